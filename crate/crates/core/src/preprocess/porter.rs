//! The original Porter (1980) suffix-stripping stemmer.
//!
//! Operates on lowercase ASCII alphabetic words; anything else is returned
//! unchanged. Words of one or two letters are never stemmed.

/// Stems `word`. Non-alphabetic or non-lowercase input is returned as-is.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    String::from_utf8(w).expect("ascii in, ascii out")
}

fn is_consonant(b: &[u8], i: usize) -> bool {
    match b[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(b, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in `[C](VC)^m[V]`.
fn measure(b: &[u8]) -> usize {
    let n = b.len();
    let mut i = 0;
    while i < n && is_consonant(b, i) {
        i += 1;
    }
    let mut m = 0;
    loop {
        while i < n && !is_consonant(b, i) {
            i += 1;
        }
        if i >= n {
            return m;
        }
        while i < n && is_consonant(b, i) {
            i += 1;
        }
        m += 1;
        if i >= n {
            return m;
        }
    }
}

fn has_vowel(b: &[u8]) -> bool {
    (0..b.len()).any(|i| !is_consonant(b, i))
}

fn ends_double_consonant(b: &[u8]) -> bool {
    let n = b.len();
    n >= 2 && b[n - 1] == b[n - 2] && is_consonant(b, n - 1)
}

/// consonant-vowel-consonant ending, last consonant not w, x or y.
fn ends_cvc(b: &[u8]) -> bool {
    let n = b.len();
    n >= 3
        && is_consonant(b, n - 3)
        && !is_consonant(b, n - 2)
        && is_consonant(b, n - 1)
        && !matches!(b[n - 1], b'w' | b'x' | b'y')
}

/// Applies the rule with the longest matching suffix, if its condition
/// (evaluated on the stem) holds. Returns whether any suffix matched.
fn apply_longest(w: &mut Vec<u8>, rules: &[(&str, &str)], cond: fn(&[u8]) -> bool) -> bool {
    let best = rules
        .iter()
        .filter(|(suffix, _)| w.ends_with(suffix.as_bytes()))
        .max_by_key(|(suffix, _)| suffix.len());
    let Some((suffix, repl)) = best else { return false };
    let stem_len = w.len() - suffix.len();
    if cond(&w[..stem_len]) {
        w.truncate(stem_len);
        w.extend_from_slice(repl.as_bytes());
    }
    true
}

fn step1a(w: &mut Vec<u8>) {
    apply_longest(w, &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")], |_| true);
}

fn step1b(w: &mut Vec<u8>) {
    if w.ends_with(b"eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            w.pop();
        }
        return;
    }
    let removed = ["ed", "ing"].iter().any(|suffix| {
        let s = suffix.as_bytes();
        if w.ends_with(s) && has_vowel(&w[..w.len() - s.len()]) {
            w.truncate(w.len() - s.len());
            true
        } else {
            false
        }
    });
    if !removed {
        return;
    }
    if w.ends_with(b"at") || w.ends_with(b"bl") || w.ends_with(b"iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step1c(w: &mut [u8]) {
    let n = w.len();
    if w.ends_with(b"y") && has_vowel(&w[..n - 1]) {
        w[n - 1] = b'i';
    }
}

fn positive_measure(stem: &[u8]) -> bool {
    measure(stem) > 0
}

fn step2(w: &mut Vec<u8>) {
    const RULES: &[(&str, &str)] = &[
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
    ];
    apply_longest(w, RULES, positive_measure);
}

fn step3(w: &mut Vec<u8>) {
    const RULES: &[(&str, &str)] = &[
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ];
    apply_longest(w, RULES, positive_measure);
}

fn step4(w: &mut Vec<u8>) {
    const RULES: &[(&str, &str)] = &[
        ("al", ""),
        ("ance", ""),
        ("ence", ""),
        ("er", ""),
        ("ic", ""),
        ("able", ""),
        ("ible", ""),
        ("ant", ""),
        ("ement", ""),
        ("ment", ""),
        ("ent", ""),
        ("ou", ""),
        ("ism", ""),
        ("ate", ""),
        ("iti", ""),
        ("ous", ""),
        ("ive", ""),
        ("ize", ""),
    ];
    // "ion" carries the extra (*S or *T) condition, so it competes on length separately.
    if w.ends_with(b"ion") && !RULES.iter().any(|(s, _)| s.len() > 3 && w.ends_with(s.as_bytes())) {
        let stem = &w[..w.len() - 3];
        if measure(stem) > 1 && matches!(stem.last(), Some(b's') | Some(b't')) {
            w.truncate(w.len() - 3);
        }
        return;
    }
    apply_longest(w, RULES, |stem| measure(stem) > 1);
}

fn step5a(w: &mut Vec<u8>) {
    if w.ends_with(b"e") {
        let stem = &w[..w.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.pop();
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if measure(w) > 1 && w.ends_with(b"ll") {
        w.pop();
    }
}
