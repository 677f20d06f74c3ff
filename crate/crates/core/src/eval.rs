//! Utterance-level aggregation, concordance scoring and multi-run summaries.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt::Display;

use crate::affect::{ChunkIndex, EmotionPrediction};
use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median; an even count averages the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median input"));
    }
    let s = sorted(values);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

/// Chunk-to-utterance reduction. `Median` is the default; the others exist
/// for ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregator {
    #[default]
    Median,
    Mean,
    Max,
}

impl Aggregator {
    pub fn reduce(self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::Empty("aggregation input"));
        }
        Ok(match self {
            Self::Median => median(values)?,
            Self::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Self::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Per-dimension median of the chunk predictions of one utterance.
pub fn aggregate_median(chunks: &[EmotionPrediction]) -> Result<EmotionPrediction> {
    aggregate(chunks, Aggregator::Median)
}

pub fn aggregate(chunks: &[EmotionPrediction], how: Aggregator) -> Result<EmotionPrediction> {
    let first = chunks.first().ok_or(Error::Empty("chunk predictions"))?;
    if let Some(other) = chunks.iter().find(|c| c.utterance_id != first.utterance_id) {
        return Err(Error::MixedUtterances(
            first.utterance_id.clone(),
            other.utterance_id.clone(),
        ));
    }
    let arousal: Vec<f64> = chunks.iter().map(|c| c.arousal).collect();
    let valence: Vec<f64> = chunks.iter().map(|c| c.valence).collect();
    Ok(EmotionPrediction {
        arousal: how.reduce(&arousal)?,
        valence: how.reduce(&valence)?,
        utterance_id: first.utterance_id.clone(),
        chunk: ChunkIndex::Aggregate,
    })
}

/// Concordance correlation coefficient with population moments:
///
/// ```text
/// ccc = 2·cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))²)
/// ```
///
/// Two identical constant sequences score 1.
pub fn ccc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::TooShort {
            min: 2,
            actual: pred.len(),
        });
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ccc input"));
    }
    let n = pred.len() as f64;
    let mx = pred.iter().sum::<f64>() / n;
    let my = truth.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in pred.iter().zip(truth) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = sxx / n + syy / n + (mx - my) * (mx - my);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * sxy / n / denom).clamp(-1.0, 1.0))
}

/// Five-number box-plot summary with min/max whiskers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles use linear interpolation between order statistics at
/// position `q·(n-1)`.
pub fn boxplot_stats(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::Empty("box-plot input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("box-plot input"));
    }
    let s = sorted(values);
    let q = |p: f64| {
        let h = p * (s.len() - 1) as f64;
        let lo = h as usize;
        let hi = (lo + 1).min(s.len() - 1);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    Ok(FiveNumber {
        min: s[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: s[s.len() - 1],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunScore {
    pub run: usize,
    pub seed: u64,
    pub ccc_arousal: f64,
    pub ccc_valence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub per_run: Vec<RunScore>,
    pub arousal: FiveNumber,
    pub valence: FiveNumber,
}

/// Runs `run(index, seed)` for `runs` consecutive seeds starting at
/// `base_seed` and summarises the returned `(ccc_arousal, ccc_valence)`.
pub fn evaluate_runs<E: Display>(
    runs: usize,
    base_seed: u64,
    mut run: impl FnMut(usize, u64) -> Result<(f64, f64), E>,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let mut per_run = Vec::with_capacity(runs);
    for i in 0..runs {
        let seed = base_seed
            .checked_add(i as u64)
            .ok_or_else(|| Error::Config("seed range overflows u64".into()))?;
        let (a, v) = run(i, seed).map_err(|e| Error::Run {
            run: i,
            message: e.to_string(),
        })?;
        per_run.push(RunScore {
            run: i,
            seed,
            ccc_arousal: a,
            ccc_valence: v,
        });
    }
    let a: Vec<f64> = per_run.iter().map(|r| r.ccc_arousal).collect();
    let v: Vec<f64> = per_run.iter().map(|r| r.ccc_valence).collect();
    Ok(EvalReport {
        arousal: boxplot_stats(&a)?,
        valence: boxplot_stats(&v)?,
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn pred(id: &str, a: f64, v: f64, i: usize) -> EmotionPrediction {
        EmotionPrediction {
            arousal: a,
            valence: v,
            utterance_id: id.into(),
            chunk: ChunkIndex::Chunk(i),
        }
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[0.2, -0.1, 0.5]).unwrap(), 0.2);
        assert!((median(&[0.1, 0.3]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(median(&[0.7]).unwrap(), 0.7);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn aggregate_is_per_dimension() {
        let chunks = [pred("u", 0.2, 0.9, 0), pred("u", -0.1, -0.3, 1), pred("u", 0.5, 0.1, 2)];
        let agg = aggregate_median(&chunks).unwrap();
        assert_eq!((agg.arousal, agg.valence), (0.2, 0.1));
        assert_eq!(agg.chunk, ChunkIndex::Aggregate);
    }

    #[test]
    fn ablation_aggregators() {
        let chunks = [pred("u", 0.2, 0.9, 0), pred("u", -0.1, -0.3, 1), pred("u", 0.5, 0.0, 2)];
        let mean = aggregate(&chunks, Aggregator::Mean).unwrap();
        assert!((mean.arousal - 0.2).abs() < 1e-15 && (mean.valence - 0.2).abs() < 1e-15);
        let max = aggregate(&chunks, Aggregator::Max).unwrap();
        assert_eq!((max.arousal, max.valence), (0.5, 0.9));
        assert!(Aggregator::Mean.reduce(&[]).is_err());
    }

    #[test]
    fn aggregate_errors() {
        assert!(aggregate_median(&[]).is_err());
        let mixed = [pred("u", 0.0, 0.0, 0), pred("w", 0.0, 0.0, 0)];
        assert_eq!(
            aggregate_median(&mixed),
            Err(Error::MixedUtterances(String::from("u"), String::from("w")))
        );
    }

    #[test]
    fn ccc_cases() {
        let x = [0.1, 0.5, -0.3, 0.8];
        assert!((ccc(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ccc(&[0.4; 4], &x).unwrap(), 0.0);
        assert_eq!(ccc(&[0.4; 3], &[0.4; 3]).unwrap(), 1.0);
        assert!(ccc(&[1.0], &[1.0]).is_err());
        assert!(ccc(&[1.0, 2.0], &[1.0]).is_err());
        assert!(ccc(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.2).collect();
        assert!(ccc(&x, &shifted).unwrap() < 1.0);
    }

    #[test]
    fn boxplot_cases() {
        let s = boxplot_stats(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(
            s,
            FiveNumber {
                min: 1.0,
                q1: 2.0,
                median: 3.0,
                q3: 4.0,
                max: 5.0
            }
        );
        let single = boxplot_stats(&[0.3]).unwrap();
        assert_eq!(
            single,
            FiveNumber {
                min: 0.3,
                q1: 0.3,
                median: 0.3,
                q3: 0.3,
                max: 0.3
            }
        );
        assert!(boxplot_stats(&[]).is_err());
    }

    #[test]
    fn evaluate_runs_uses_distinct_seeds() {
        let report = evaluate_runs::<Error>(10, 40, |i, seed| Ok((i as f64 / 10.0, seed as f64 / 100.0))).unwrap();
        assert_eq!(report.per_run.len(), 10);
        let seeds: Vec<u64> = report.per_run.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, (40..50).collect::<Vec<_>>());
        assert!(report.arousal.q1 <= report.arousal.median && report.arousal.median <= report.arousal.q3);
    }

    #[test]
    fn single_run_degenerate_summary() {
        let report = evaluate_runs::<Error>(1, 0, |_, _| Ok((0.6, 0.4))).unwrap();
        assert_eq!(
            report.arousal,
            FiveNumber {
                min: 0.6,
                q1: 0.6,
                median: 0.6,
                q3: 0.6,
                max: 0.6
            }
        );
    }

    #[test]
    fn run_errors_carry_the_index() {
        let err = evaluate_runs(3, 0, |i, _| if i == 2 { Err("boom") } else { Ok((0.0, 0.0)) });
        assert_eq!(
            err,
            Err(Error::Run {
                run: 2,
                message: "boom".into()
            })
        );
        assert!(evaluate_runs::<Error>(0, 0, |_, _| Ok((0.0, 0.0))).is_err());
        assert!(evaluate_runs::<Error>(2, u64::MAX, |_, _| Ok((0.0, 0.0))).is_err());
    }
}
