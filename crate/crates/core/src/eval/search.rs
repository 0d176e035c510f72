use std::fmt;
use std::fmt::Write as _;

use rand::Rng as _;

use super::{EvalError, Fold};
use crate::exec::Execution;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(x) => Some(*x),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Integers, then floats, then text.
    pub fn parse(s: &str) -> ParamValue {
        if let Ok(i) = s.parse() {
            ParamValue::Int(i)
        } else if let Ok(x) = s.parse() {
            ParamValue::Float(x)
        } else {
            ParamValue::Text(s.to_string())
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// Parameter assignments in declaration order.
pub type ParamConfig = Vec<(String, ParamValue)>;

#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Choice(Vec<ParamValue>),
    /// Inclusive on both ends.
    IntUniform { low: i64, high: i64 },
    FloatUniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
}

impl Sampler {
    fn validate(&self, name: &str) -> Result<(), EvalError> {
        let bad = |reason: &str| Err(EvalError::InvalidSampler { name: name.into(), reason: reason.into() });
        match self {
            Sampler::Choice(v) if v.is_empty() => bad("no choices"),
            Sampler::IntUniform { low, high } if low > high => bad("low > high"),
            Sampler::FloatUniform { low, high } if !(low < high && low.is_finite() && high.is_finite()) => {
                bad("need finite low < high")
            }
            Sampler::LogUniform { low, high } if !(*low > 0.0 && low < high && high.is_finite()) => {
                bad("need 0 < low < high")
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut rng::Rng) -> ParamValue {
        match self {
            Sampler::Choice(v) => v[rng.gen_range(0..v.len())].clone(),
            Sampler::IntUniform { low, high } => ParamValue::Int(rng.gen_range(*low..=*high)),
            Sampler::FloatUniform { low, high } => ParamValue::Float(rng.gen_range(*low..*high)),
            Sampler::LogUniform { low, high } => ParamValue::Float(rng.gen_range(low.ln()..high.ln()).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub index: usize,
    pub config: ParamConfig,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Rows in enumeration order.
    pub rows: Vec<SearchRow>,
    pub best: usize,
}

impl SearchResult {
    pub fn best_row(&self) -> &SearchRow {
        &self.rows[self.best]
    }

    /// Tab-separated result table.
    pub fn to_table(&self) -> String {
        let mut s = String::from("index\tconfig\tmean_score\tfold_scores\n");
        for r in &self.rows {
            let cfg: Vec<String> = r.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let folds: Vec<String> = r.fold_scores.iter().map(f64::to_string).collect();
            writeln!(s, "{}\t{}\t{}\t{}", r.index, cfg.join(","), r.mean_score, folds.join(",")).unwrap();
        }
        s
    }
}

fn cartesian(space: &[(String, Vec<ParamValue>)]) -> Vec<ParamConfig> {
    let mut configs: Vec<ParamConfig> = vec![Vec::new()];
    for (name, values) in space {
        configs = configs
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push((name.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    configs
}

fn run<F, E>(configs: Vec<ParamConfig>, folds: &[Fold], evaluate: F, exec: Execution) -> Result<SearchResult, EvalError>
where
    F: Fn(&ParamConfig, &Fold) -> Result<f64, E> + Sync + Send,
    E: fmt::Display + Send,
{
    if folds.len() < 2 {
        return Err(EvalError::BadK { k: folds.len(), n: folds.iter().map(|f| f.test.len()).sum() });
    }
    let k = folds.len();
    let scores = exec.map(configs.len() * k, |t| evaluate(&configs[t / k], &folds[t % k]));
    let mut rows = Vec::with_capacity(configs.len());
    for (index, (config, chunk)) in configs.into_iter().zip(scores.chunks(k)).enumerate() {
        let fold_scores = chunk
            .iter()
            .map(|r| r.as_ref().copied().map_err(|e| EvalError::Trial { index, message: e.to_string() }))
            .collect::<Result<Vec<f64>, _>>()?;
        let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
        rows.push(SearchRow { index, config, fold_scores, mean_score });
    }
    // first strictly greater mean wins, so ties keep the earliest config; NaN never wins
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_score > rows[best].mean_score || rows[best].mean_score.is_nan() && !r.mean_score.is_nan() {
            best = i;
        }
    }
    Ok(SearchResult { rows, best })
}

/// Scores every point of the Cartesian product (first parameter varies
/// slowest) by its mean score across `folds`. Higher is better.
pub fn grid_search<F, E>(space: &[(String, Vec<ParamValue>)], folds: &[Fold], evaluate: F, exec: Execution) -> Result<SearchResult, EvalError>
where
    F: Fn(&ParamConfig, &Fold) -> Result<f64, E> + Sync + Send,
    E: fmt::Display + Send,
{
    if space.is_empty() || space.iter().any(|(_, v)| v.is_empty()) {
        return Err(EvalError::EmptySpace);
    }
    run(cartesian(space), folds, evaluate, exec)
}

/// Draws `n_draws` configurations (parameters sampled in declaration order)
/// and scores them as [`grid_search`] does.
pub fn random_search<F, E>(
    space: &[(String, Sampler)],
    n_draws: usize,
    seed: u64,
    folds: &[Fold],
    evaluate: F,
    exec: Execution,
) -> Result<SearchResult, EvalError>
where
    F: Fn(&ParamConfig, &Fold) -> Result<f64, E> + Sync + Send,
    E: fmt::Display + Send,
{
    if space.is_empty() || n_draws == 0 {
        return Err(EvalError::EmptySpace);
    }
    for (name, s) in space {
        s.validate(name)?;
    }
    let mut rng = rng::seeded(seed, stream::SEARCH);
    let configs = (0..n_draws).map(|_| space.iter().map(|(n, s)| (n.clone(), s.draw(&mut rng))).collect()).collect();
    run(configs, folds, evaluate, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{folds_to_pairs, kfold};
    use std::convert::Infallible;

    fn folds() -> Vec<Fold> {
        folds_to_pairs(&kfold(6, 3, 0).unwrap())
    }

    fn ints(v: &[i64]) -> Vec<ParamValue> {
        v.iter().map(|&i| ParamValue::Int(i)).collect()
    }

    fn score_a(c: &ParamConfig, _: &Fold) -> Result<f64, Infallible> {
        Ok(c[0].1.as_f64().unwrap())
    }

    #[test]
    fn grid_picks_best_and_first_on_ties() {
        let r = grid_search(&[("a".into(), ints(&[1, 2]))], &folds(), score_a, Execution::Sequential).unwrap();
        assert_eq!((r.rows.len(), r.best_row().config[0].1.clone()), (2, ParamValue::Int(2)));
        let space = vec![("a".to_string(), ints(&[1, 2])), ("b".to_string(), vec![ParamValue::parse("x"), ParamValue::parse("y")])];
        let r = grid_search(&space, &folds(), |_: &ParamConfig, _: &Fold| Ok::<_, Infallible>(1.0), Execution::Parallel).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.best, 0);
        assert_eq!(r.rows[1].config, vec![("a".into(), ParamValue::Int(1)), ("b".into(), ParamValue::Text("y".into()))]);
    }

    #[test]
    fn grid_errors() {
        assert_eq!(grid_search(&[], &folds(), score_a, Execution::Sequential), Err(EvalError::EmptySpace));
        let one = folds_to_pairs(&[vec![0, 1]]);
        assert!(matches!(grid_search(&[("a".into(), ints(&[1]))], &one, score_a, Execution::Sequential), Err(EvalError::BadK { .. })));
        let failing = |_: &ParamConfig, _: &Fold| Err::<f64, _>("boom");
        assert_eq!(
            grid_search(&[("a".into(), ints(&[1]))], &folds(), failing, Execution::Sequential),
            Err(EvalError::Trial { index: 0, message: "boom".into() })
        );
    }

    #[test]
    fn random_search_is_seeded() {
        let space = vec![("a".to_string(), Sampler::IntUniform { low: 1, high: 3 }), ("lr".to_string(), Sampler::LogUniform { low: 1e-3, high: 1.0 })];
        let a = random_search(&space, 5, 7, &folds(), score_a, Execution::Sequential).unwrap();
        let b = random_search(&space, 5, 7, &folds(), score_a, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(random_search(&space, 1, 7, &folds(), score_a, Execution::Sequential).unwrap().rows.len(), 1);
        let bad = vec![("a".to_string(), Sampler::IntUniform { low: 3, high: 1 })];
        assert!(matches!(random_search(&bad, 1, 0, &folds(), score_a, Execution::Sequential), Err(EvalError::InvalidSampler { .. })));
    }

    #[test]
    fn int_sampler_frequencies() {
        let s = Sampler::IntUniform { low: 1, high: 3 };
        let mut rng = rng::seeded(11, stream::SEARCH);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[(s.draw(&mut rng).as_i64().unwrap() - 1) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (0.28..=0.38).contains(&(c as f64 / 3000.0))), "{counts:?}");
    }

    #[test]
    fn param_value_parsing() {
        assert_eq!(ParamValue::parse("3"), ParamValue::Int(3));
        assert_eq!(ParamValue::parse("0.5"), ParamValue::Float(0.5));
        assert_eq!(ParamValue::parse("adam").to_string(), "adam");
    }
}
