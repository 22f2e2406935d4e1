//! Pass/fail test of one subgroup's outcome distribution against the whole
//! population in the ℓ∞ norm, with PAC margins when the test is subsampled.
//!
//! A side (subgroup or population) with more rows than the sample budget `m`
//! is estimated from `m` rows drawn uniformly without replacement. With
//! `m = ⌈ln(4K/η) / (2ε²)⌉`, Hoeffding plus a union bound over the `2K` bin
//! estimates puts every estimated bin within ε of the truth with probability
//! at least `1 - η`, so the estimated distance is within `2ε` of the true one.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::subgroup::{Literal, Rule};
use crate::tabular::EncodedTable;

/// Binary outcomes.
pub const OUTCOME_BINS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    pub epsilon: f64,
    pub eta: f64,
    #[serde(default)]
    pub max_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for PacConfig {
    fn default() -> Self {
        PacConfig {
            epsilon: 0.05,
            eta: 0.05,
            max_subsample: None,
            seed: 0,
        }
    }
}

impl PacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(AuditError::InvalidParameter(format!(
                "epsilon must be in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(AuditError::InvalidParameter(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        if self.max_subsample == Some(0) {
            return Err(AuditError::InvalidParameter("max_subsample must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn decide(estimate: f64, margin: f64, delta: f64) -> Verdict {
        if estimate + margin <= delta {
            Verdict::Pass
        } else if estimate - margin > delta {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfVerdict {
    pub estimate: f64,
    pub margin: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// (subgroup rows used, population rows used)
    pub subsample_sizes: (usize, usize),
    pub exact: bool,
    pub seed: u64,
}

/// Normalised outcome frequencies; bin `k` is outcome `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    pub fn from_counts(counts: &[usize]) -> Result<Histogram> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(AuditError::EmptySubgroup);
        }
        Ok(Histogram(counts.iter().map(|&c| c as f64 / n as f64).collect()))
    }

    pub fn new(freqs: Vec<f64>) -> Histogram {
        Histogram(freqs)
    }

    pub fn bins(&self) -> &[f64] {
        &self.0
    }
}

fn outcome_counts(target: &[bool], rows: impl Iterator<Item = usize>) -> [usize; OUTCOME_BINS] {
    let mut counts = [0usize; OUTCOME_BINS];
    for i in rows {
        counts[target[i] as usize] += 1;
    }
    counts
}

/// Outcome histogram of the rows matched by `selector`.
pub fn outcome_histogram(table: &EncodedTable, selector: &Rule) -> Result<Histogram> {
    let target = table.target().ok_or(AuditError::NoTarget)?;
    selector.validate(table.schema())?;
    let rows = (0..table.n_rows()).filter(|&i| selector.matches(table.row(i)));
    Histogram::from_counts(&outcome_counts(target, rows))
}

pub fn linf_distance(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.0.len() != h2.0.len() {
        return Err(AuditError::SupportMismatch(h1.0.len(), h2.0.len()));
    }
    Ok(h1.0.iter().zip(&h2.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Rows per side needed for every bin of both histograms to be within ε of
/// the truth with probability at least `1 - η`.
pub fn required_subsample(cfg: &PacConfig, bins: usize) -> usize {
    assert!(bins >= 2, "need at least two outcome bins");
    ((4.0 * bins as f64 / cfg.eta).ln() / (2.0 * cfg.epsilon * cfg.epsilon)).ceil() as usize
}

/// Per-bin accuracy guaranteed by `m` samples at failure probability η.
fn accuracy_for(m: usize, eta: f64, bins: usize) -> f64 {
    ((4.0 * bins as f64 / eta).ln() / (2.0 * m as f64)).sqrt()
}

/// Tests whether the subgroup `feature = value` differs from the full
/// population by more than `delta` in the ℓ∞ norm over outcome histograms.
pub fn linf_test(table: &EncodedTable, feature: &str, value: &str, delta: f64, cfg: &PacConfig) -> Result<LinfVerdict> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(AuditError::InvalidParameter(format!("delta must be in [0, 1], got {delta}")));
    }
    let target = table.target().ok_or(AuditError::NoTarget)?;
    let (fi, spec) = table.schema().feature(feature)?;
    let ci = spec.category_index(value).ok_or_else(|| AuditError::UnknownCategory {
        feature: feature.to_string(),
        value: value.to_string(),
    })?;
    let selector = Rule::new(vec![Literal::new(fi, ci)])?;
    let members: Vec<usize> = (0..table.n_rows()).filter(|&i| selector.matches(table.row(i))).collect();
    if members.is_empty() {
        return Err(AuditError::EmptySubgroup);
    }

    let required = required_subsample(cfg, OUTCOME_BINS);
    let budget = cfg.max_subsample.unwrap_or(required);
    let side_eps = if budget >= required {
        cfg.epsilon
    } else {
        accuracy_for(budget, cfg.eta, OUTCOME_BINS)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut margin = 0.0;
    let mut draw = |size: usize| -> Option<Vec<usize>> {
        (size > budget).then(|| {
            margin += side_eps;
            index::sample(&mut rng, size, budget).into_vec()
        })
    };
    let sub_pick = draw(members.len());
    let pop_pick = draw(table.n_rows());

    let sub_counts = match &sub_pick {
        Some(pick) => outcome_counts(target, pick.iter().map(|&k| members[k])),
        None => outcome_counts(target, members.iter().copied()),
    };
    let pop_counts = match &pop_pick {
        Some(pick) => outcome_counts(target, pick.iter().copied()),
        None => outcome_counts(target, 0..table.n_rows()),
    };
    let estimate = linf_distance(&Histogram::from_counts(&sub_counts)?, &Histogram::from_counts(&pop_counts)?)?;
    let exact = sub_pick.is_none() && pop_pick.is_none();
    Ok(LinfVerdict {
        estimate,
        margin,
        threshold: delta,
        verdict: Verdict::decide(estimate, margin, delta),
        subsample_sizes: (
            sub_pick.map_or(members.len(), |p| p.len()),
            pop_pick.map_or(table.n_rows(), |p| p.len()),
        ),
        exact,
        seed: cfg.seed,
    })
}
