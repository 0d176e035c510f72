//! Stemmer output against a reference implementation of the original
//! Porter algorithm, over a word list of about two thousand entries.

use riskminer_core::preprocess::stem;

#[test]
fn matches_reference_stems() {
    let fixture = include_str!("fixtures/porter_reference.tsv");
    let mut mismatches = Vec::new();
    let mut n = 0;
    for line in fixture.lines() {
        let (word, expected) = line.split_once('\t').expect("word<TAB>stem");
        // words of one or two letters are left alone (the reference would turn "s" into "")
        if word.len() <= 2 {
            assert_eq!(stem(word), word);
            continue;
        }
        n += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: got {got}, want {expected}"));
        }
    }
    assert!(n > 2000);
    assert!(mismatches.is_empty(), "{} of {n} differ:\n{}", mismatches.len(), mismatches.join("\n"));
}

#[test]
fn stemming_is_idempotent_on_common_stems() {
    for w in ["risk", "market", "credit", "liquid", "oper", "polici"] {
        assert_eq!(stem(&stem(w)), stem(w));
    }
}
