//! Pairwise definite-ordering logic, per-subject Gehan scores, and the
//! two-sample Gehan test.
//!
//! Two bracketed observations are definitely ordered when one upper bound
//! does not exceed the other's lower bound; everything else is indeterminate.
//! Summing `±1` over definite pairs gives each subject a Gehan score, and the
//! group-wise sum of scores is the Gehan statistic.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, IntervalObservation};
use crate::{Error, Result};

/// Outcome of comparing two bracketed observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefiniteOrdering {
    DefinitelyLess,
    DefinitelyGreater,
    Indeterminate,
}

/// Two-sample Gehan test summary.
#[derive(Debug, Clone, Serialize)]
pub struct GehanTestResult {
    /// Gehan statistic `G`, the sum of group-1 subject scores.
    pub statistic: f64,
    /// Permutation variance estimate of `G`.
    pub variance: f64,
    /// Normal deviate `G / sqrt(variance)` (0 when the variance degenerates).
    pub z: f64,
    /// Two-sided normal p-value.
    pub p_value: f64,
    /// Pooled per-subject scores, group 1 first.
    pub per_subject_scores: Vec<f64>,
    /// True when every pooled score is zero and no test is possible.
    pub degenerate: bool,
    pub n_group1: usize,
    pub n_group2: usize,
}

#[derive(Clone, Copy)]
struct Bracket {
    lower: f64,
    upper: f64,
    delta: bool,
}

impl Bracket {
    fn of(obs: &IntervalObservation) -> Self {
        Bracket {
            lower: obs.lower(),
            upper: obs.upper(),
            delta: obs.delta(),
        }
    }
}

/// `a` is definitely less than `b` when `a.upper ≤ b.lower`, except that two
/// equal exact values stay indeterminate (a censored bound touching an exact
/// value still counts).
fn definitely_less(a: Bracket, b: Bracket) -> bool {
    if a.upper < b.lower {
        true
    } else if a.upper == b.lower {
        !(a.delta && b.delta)
    } else {
        false
    }
}

/// Compare two observations for definite ordering of their event times.
pub fn definite_ordering(a: &IntervalObservation, b: &IntervalObservation) -> DefiniteOrdering {
    let (ba, bb) = (Bracket::of(a), Bracket::of(b));
    if definitely_less(ba, bb) {
        DefiniteOrdering::DefinitelyLess
    } else if definitely_less(bb, ba) {
        DefiniteOrdering::DefinitelyGreater
    } else {
        DefiniteOrdering::Indeterminate
    }
}

fn scores_of(brackets: &[Bracket]) -> Vec<f64> {
    let n = brackets.len();
    let mut scores = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if definitely_less(brackets[i], brackets[j]) {
                scores[i] -= 1.0;
                scores[j] += 1.0;
            } else if definitely_less(brackets[j], brackets[i]) {
                scores[i] += 1.0;
                scores[j] -= 1.0;
            }
        }
    }
    scores
}

/// Per-subject Gehan scores `G_i = #{definitely greater} − #{definitely
/// less}` over the pooled sample. Requires `n ≥ 2`.
pub fn gehan_scores(pooled: &Dataset) -> Result<Vec<f64>> {
    if pooled.n() < 2 {
        return Err(Error::InvalidInput(
            "Gehan scores need at least two observations".into(),
        ));
    }
    Ok(scores_of(
        &pooled
            .observations()
            .iter()
            .map(Bracket::of)
            .collect::<Vec<_>>(),
    ))
}

/// Two-sample Gehan test. Covariates and clusters are ignored; the two
/// datasets may have different covariate dimensions.
pub fn two_sample_test(group1: &Dataset, group2: &Dataset) -> Result<GehanTestResult> {
    let m = group1.n();
    let n = group2.n();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("both groups must be nonempty".into()));
    }
    let pooled: Vec<Bracket> = group1
        .observations()
        .iter()
        .chain(group2.observations())
        .map(Bracket::of)
        .collect();
    let scores = scores_of(&pooled);

    let statistic: f64 = scores[..m].iter().sum();
    let total = (m + n) as f64;
    let sum_sq: f64 = scores.iter().map(|g| g * g).sum();
    let variance = (m as f64) * (n as f64) / (total * (total - 1.0)) * sum_sq;

    let (z, p_value, degenerate) = if variance > 0.0 {
        let z = statistic / variance.sqrt();
        let normal = Normal::standard();
        let p = (2.0 * normal.cdf(-z.abs())).min(1.0);
        (z, p, false)
    } else {
        (0.0, 1.0, true)
    };

    Ok(GehanTestResult {
        statistic,
        variance,
        z,
        p_value,
        per_subject_scores: scores,
        degenerate,
        n_group1: m,
        n_group2: n,
    })
}
