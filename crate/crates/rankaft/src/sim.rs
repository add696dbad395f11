//! Seeded data generators and a replicated Monte Carlo study harness.
//!
//! Failure times follow `log T = 2 + X₁ + X₂ + scale·ε` with `X₁ ~ N(0,1)`,
//! `X₂ ~ Bernoulli(1/2)` and true coefficients (1, 1). Under the bracket
//! (PIC) design a subject is observed exactly with probability
//! `p* = p₀ − 0.1·I(X₂ = 1)`; otherwise periodic examination times with
//! gaps `Uniform(0.1, 1)` up to the follow-up horizon bracket the event.
//! Under the doubly-censored design a left/right censoring pair `(L, R)` is
//! drawn on the log scale and the event is exact only when it lands inside.
//! The free constants (`p₀`, or `c_L`/`c_R`) are calibrated by bisection on
//! pilot draws so the realized censoring matches the requested rates.
//!
//! Clustered variants draw a gamma frailty ν per cluster that multiplies the
//! error, and cluster sizes grow with the frailty's decile (2 through 11),
//! making cluster size informative about outcomes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Gumbel, Normal as NormalDist};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma as GammaQuantile, Normal};

use crate::data::{CensoringComposition, Dataset, IntervalObservation};
use crate::estimator::{fit, FitConfig, WeightSpec};
use crate::rng::{derive, stream_rng};
use crate::variance::{attach_covariance, ResampleConfig};
use crate::{Error, Result};

/// True regression coefficients used by every generator.
pub const TRUE_BETA: [f64; 2] = [1.0, 1.0];
const INTERCEPT: f64 = 2.0;
/// Maximum follow-up time for the examination process.
const TAU: f64 = 100.0;
const PILOT_SIZE: usize = 10_000;

const STREAM_CALIBRATE: u64 = 20;
const STREAM_GENERATE: u64 = 21;
const STREAM_RESAMPLE: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Pic,
    Dc,
    PicClustered,
    DcClustered,
}

impl ScenarioKind {
    pub fn is_clustered(&self) -> bool {
        matches!(self, ScenarioKind::PicClustered | ScenarioKind::DcClustered)
    }

    fn is_dc(&self) -> bool {
        matches!(self, ScenarioKind::Dc | ScenarioKind::DcClustered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorDist {
    Normal,
    /// Standard Gumbel (minimum) with location 0 and scale 1.
    ExtremeValue,
    Exp1,
}

/// Requested censoring: an overall rate for bracket designs, or the pair of
/// left/right rates for doubly-censored designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CensoringTarget {
    Overall(f64),
    LeftRight { left: f64, right: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Subjects (univariate) or clusters (clustered designs).
    pub n: usize,
    pub error: ErrorDist,
    pub censoring: CensoringTarget,
    /// Frailty dispersion θ for clustered designs (gamma shape 1/θ, scale θ).
    pub theta: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::Config(format!(
                "scenario size must be at least 20, got {}",
                self.n
            )));
        }
        match (&self.censoring, self.kind.is_dc()) {
            (CensoringTarget::Overall(r), false) => {
                if !(*r > 0.0 && *r < 1.0) {
                    return Err(Error::Config(format!(
                        "overall censoring rate must lie in (0, 1), got {r}"
                    )));
                }
            }
            (CensoringTarget::LeftRight { left, right }, true) => {
                if !(*left > 0.0 && *left < 1.0) || !(*right > 0.0 && *right < 1.0) {
                    return Err(Error::Config(
                        "left/right censoring rates must lie in (0, 1)".into(),
                    ));
                }
                if left + right >= 1.0 {
                    return Err(Error::Config(
                        "left + right censoring must leave room for exact events".into(),
                    ));
                }
            }
            (CensoringTarget::Overall(_), true) => {
                return Err(Error::Config(
                    "doubly-censored scenarios need left/right censoring rates".into(),
                ));
            }
            (CensoringTarget::LeftRight { .. }, false) => {
                return Err(Error::Config(
                    "bracket scenarios take a single overall censoring rate".into(),
                ));
            }
        }
        if self.kind.is_clustered() && !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!(
                "frailty dispersion must be positive, got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn true_beta(&self) -> &'static [f64; 2] {
        &TRUE_BETA
    }
}

/// Calibrated design constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DesignConstants {
    Pic { p0: f64 },
    Dc { c_l: f64, c_r: f64 },
}

fn draw_error(dist: ErrorDist, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        ErrorDist::Normal => NormalDist::new(0.0, 1.0).unwrap().sample(rng),
        // Minimum-form Gumbel: negate a standard (maximum) Gumbel draw.
        ErrorDist::ExtremeValue => -Gumbel::new(0.0, 1.0).unwrap().sample(rng),
        ErrorDist::Exp1 => rand_distr::Exp::new(1.0).unwrap().sample(rng),
    }
}

fn draw_covariates(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x1 = NormalDist::new(0.0, 1.0).unwrap().sample(rng);
    let x2 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    (x1, x2)
}

fn event_time(x1: f64, x2: f64, eps: f64, scale: f64) -> f64 {
    (INTERCEPT + TRUE_BETA[0] * x1 + TRUE_BETA[1] * x2 + scale * eps).exp()
}

/// Probability of an exact observation for a subject.
fn p_star(p0: f64, x2: f64) -> f64 {
    (p0 - 0.1 * x2).clamp(0.0, 1.0)
}

/// Bracket a censored event by the periodic examination walk: gaps are
/// Uniform(0.1, 1), examinations stop below the horizon, and events beyond
/// the last examination are right-censored there. An event before the first
/// examination is left-censored (lower bracket 0).
fn examination_bracket(t: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut w_prev = 0.0_f64;
    loop {
        let gap = 0.1 + 0.9 * rng.random::<f64>();
        let w_next = w_prev + gap;
        if w_next >= TAU {
            return (w_prev, f64::INFINITY);
        }
        if t < w_next {
            return (w_prev, w_next);
        }
        w_prev = w_next;
    }
}

fn pic_observation(
    t: f64,
    x: Vec<f64>,
    p0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<IntervalObservation> {
    if rng.random::<f64>() < p_star(p0, x[1]) {
        IntervalObservation::from_pic_record(true, t, 0.0, 0.0, x)
    } else {
        let (u, v) = examination_bracket(t, rng);
        if u == 0.0 && v.is_infinite() {
            // Cannot happen with gaps below the horizon, but keep the
            // encoding total.
            return Err(Error::InvalidObservation("uninformative bracket".into()));
        }
        IntervalObservation::from_pic_record(false, 0.0, u, v, x)
    }
}

/// Left/right censoring pair on the log scale, via inverse-transform draws
/// `uL, uR ~ Uniform(0,1)`.
fn dc_bounds(x1: f64, x2: f64, u_l: f64, u_r: f64, c_l: f64, c_r: f64) -> (f64, f64) {
    let log_l = (1.0 - 0.25 * x1) * (-6.0 + u_l * (c_l + 6.0));
    let log_r = log_l + (1.0 - 0.5 * x2) * (6.0 + u_r * (c_r - 6.0));
    (log_l.exp(), log_r.exp())
}

fn dc_observation(
    t: f64,
    x: Vec<f64>,
    c_l: f64,
    c_r: f64,
    rng: &mut ChaCha8Rng,
) -> Result<IntervalObservation> {
    let (u_l, u_r) = (rng.random::<f64>(), rng.random::<f64>());
    let (l, r) = dc_bounds(x[0], x[1], u_l, u_r, c_l, c_r);
    if t <= l {
        IntervalObservation::from_dc_record(l, false, false, true, x)
    } else if t > r {
        IntervalObservation::from_dc_record(r, false, true, false, x)
    } else {
        IntervalObservation::from_dc_record(t, true, false, false, x)
    }
}

/// Calibrate p₀ so the realized censored fraction matches the target.
/// Whether a subject is censored depends only on (X₂, the exactness draw),
/// so the pilot needs no event times.
fn calibrate_pic(target: f64, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, &[STREAM_CALIBRATE, 1]);
    let pilot: Vec<(f64, f64)> = (0..PILOT_SIZE)
        .map(|_| {
            let x2 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
            (x2, rng.random::<f64>())
        })
        .collect();
    let censored_rate = |p0: f64| -> f64 {
        pilot
            .iter()
            .filter(|(x2, u)| *u >= p_star(p0, *x2))
            .count() as f64
            / PILOT_SIZE as f64
    };
    // The rate decreases in p₀; p₀ below 0.1 would push p* negative.
    let (lo, hi) = (0.1_f64, 1.0_f64);
    if censored_rate(lo) < target || censored_rate(hi) > target {
        return Err(Error::Calibration(format!(
            "overall censoring rate {target} is outside the attainable range [{:.3}, {:.3}]",
            censored_rate(hi),
            censored_rate(lo)
        )));
    }
    let mut lo = lo;
    let mut hi = hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if censored_rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p0 = 0.5 * (lo + hi);
    let realized = censored_rate(p0);
    if (realized - target).abs() > 0.03 {
        return Err(Error::Calibration(format!(
            "bisection stalled: realized censoring {realized:.3} vs target {target:.3}"
        )));
    }
    Ok(p0)
}

struct DcPilotRow {
    x1: f64,
    x2: f64,
    t: f64,
    u_l: f64,
    u_r: f64,
}

/// Calibrate (c_L, c_R) against the left/right censoring targets on a pilot
/// sample drawn from the same event-time law (including frailty scaling for
/// clustered designs).
fn calibrate_dc(cfg: &ScenarioConfig, left: f64, right: f64) -> Result<(f64, f64)> {
    let mut rng = stream_rng(cfg.seed, &[STREAM_CALIBRATE, 2]);
    let frailty = if cfg.kind.is_clustered() {
        Some(GammaDist::new(1.0 / cfg.theta, cfg.theta).map_err(|e| {
            Error::Config(format!("invalid frailty parameters: {e}"))
        })?)
    } else {
        None
    };
    let mut pilot = Vec::with_capacity(PILOT_SIZE);
    while pilot.len() < PILOT_SIZE {
        // One pilot cluster (singleton unless clustered): members share ν.
        let (scale, members) = match &frailty {
            Some(g) => {
                let nu = g.sample(&mut rng);
                (nu, 4)
            }
            None => (1.0, 1),
        };
        for _ in 0..members {
            let (x1, x2) = draw_covariates(&mut rng);
            let eps = draw_error(cfg.error, &mut rng);
            pilot.push(DcPilotRow {
                x1,
                x2,
                t: event_time(x1, x2, eps, scale),
                u_l: rng.random(),
                u_r: rng.random(),
            });
        }
    }

    let left_rate = |c_l: f64| -> f64 {
        pilot
            .iter()
            .filter(|r| {
                let (l, _) = dc_bounds(r.x1, r.x2, r.u_l, r.u_r, c_l, 7.0);
                r.t <= l
            })
            .count() as f64
            / pilot.len() as f64
    };
    let c_l = bisect_monotone(-6.0 + 1e-6, 40.0, left, true, &left_rate).ok_or_else(|| {
        Error::Calibration(format!("left-censoring target {left} is unattainable"))
    })?;

    let right_rate = |c_r: f64| -> f64 {
        pilot
            .iter()
            .filter(|r| {
                let (_, rr) = dc_bounds(r.x1, r.x2, r.u_l, r.u_r, c_l, c_r);
                r.t > rr
            })
            .count() as f64
            / pilot.len() as f64
    };
    let c_r = bisect_monotone(6.0 + 1e-6, 80.0, right, false, &right_rate).ok_or_else(|| {
        Error::Calibration(format!("right-censoring target {right} is unattainable"))
    })?;

    let (rl, rr) = (left_rate(c_l), right_rate(c_r));
    if (rl - left).abs() > 0.03 || (rr - right).abs() > 0.03 {
        return Err(Error::Calibration(format!(
            "bisection stalled: realized ({rl:.3}, {rr:.3}) vs targets ({left:.3}, {right:.3})"
        )));
    }
    Ok((c_l, c_r))
}

/// Bisection for `f(c) = target` where f is empirically monotone
/// (`increasing` says in which direction); None when the bracket misses the
/// target.
fn bisect_monotone(
    lo: f64,
    hi: f64,
    target: f64,
    increasing: bool,
    f: &dyn Fn(f64) -> f64,
) -> Option<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    let (mut lo, mut hi) = if increasing {
        if f_lo > target || f_hi < target {
            return None;
        }
        (lo, hi)
    } else {
        if f_lo < target || f_hi > target {
            return None;
        }
        (lo, hi)
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let below = if increasing {
            f(mid) < target
        } else {
            f(mid) > target
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub(crate) fn calibrate(cfg: &ScenarioConfig) -> Result<DesignConstants> {
    cfg.validate()?;
    match cfg.censoring {
        CensoringTarget::Overall(rate) => {
            Ok(DesignConstants::Pic {
                p0: calibrate_pic(rate, cfg.seed)?,
            })
        }
        CensoringTarget::LeftRight { left, right } => {
            let (c_l, c_r) = calibrate_dc(cfg, left, right)?;
            Ok(DesignConstants::Dc { c_l, c_r })
        }
    }
}

/// Gamma deciles used to map frailties to cluster sizes 2..=11.
fn frailty_deciles(theta: f64) -> Result<Vec<f64>> {
    let g = GammaQuantile::new(1.0 / theta, 1.0 / theta)
        .map_err(|e| Error::Config(format!("invalid frailty parameters: {e}")))?;
    Ok((1..=9).map(|d| g.inverse_cdf(0.1 * d as f64)).collect())
}

fn cluster_size(nu: f64, deciles: &[f64]) -> usize {
    2 + deciles.iter().filter(|&&q| nu >= q).count()
}

pub(crate) fn generate_with(
    cfg: &ScenarioConfig,
    consts: &DesignConstants,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let mut obs = Vec::new();
    if cfg.kind.is_clustered() {
        let frailty = GammaDist::new(1.0 / cfg.theta, cfg.theta)
            .map_err(|e| Error::Config(format!("invalid frailty parameters: {e}")))?;
        let deciles = frailty_deciles(cfg.theta)?;
        for i in 0..cfg.n {
            let nu = frailty.sample(rng);
            let m = cluster_size(nu, &deciles);
            for _ in 0..m {
                let (x1, x2) = draw_covariates(rng);
                let eps = draw_error(cfg.error, rng);
                let t = event_time(x1, x2, eps, nu);
                let o = match consts {
                    DesignConstants::Pic { p0 } => pic_observation(t, vec![x1, x2], *p0, rng)?,
                    DesignConstants::Dc { c_l, c_r } => {
                        dc_observation(t, vec![x1, x2], *c_l, *c_r, rng)?
                    }
                };
                obs.push(o.with_cluster(format!("c{i}")));
            }
        }
    } else {
        for _ in 0..cfg.n {
            let (x1, x2) = draw_covariates(rng);
            let eps = draw_error(cfg.error, rng);
            let t = event_time(x1, x2, eps, 1.0);
            let o = match consts {
                DesignConstants::Pic { p0 } => pic_observation(t, vec![x1, x2], *p0, rng)?,
                DesignConstants::Dc { c_l, c_r } => {
                    dc_observation(t, vec![x1, x2], *c_l, *c_r, rng)?
                }
            };
            obs.push(o);
        }
    }
    Dataset::new(obs)
}

/// Generate one dataset for the scenario (calibrating design constants from
/// the scenario seed).
pub fn generate(cfg: &ScenarioConfig) -> Result<Dataset> {
    let consts = calibrate(cfg)?;
    let mut rng = stream_rng(cfg.seed, &[STREAM_GENERATE, 0]);
    generate_with(cfg, &consts, &mut rng)
}

/// Univariate bracket-censored scenario.
pub fn gen_pic(cfg: &ScenarioConfig) -> Result<Dataset> {
    if cfg.kind != ScenarioKind::Pic {
        return Err(Error::Config("gen_pic expects a pic scenario".into()));
    }
    generate(cfg)
}

/// Univariate doubly-censored scenario.
pub fn gen_dc(cfg: &ScenarioConfig) -> Result<Dataset> {
    if cfg.kind != ScenarioKind::Dc {
        return Err(Error::Config("gen_dc expects a dc scenario".into()));
    }
    generate(cfg)
}

/// Clustered scenario (bracket or doubly-censored overlay).
pub fn gen_clustered(cfg: &ScenarioConfig) -> Result<Dataset> {
    if !cfg.kind.is_clustered() {
        return Err(Error::Config("gen_clustered expects a clustered scenario".into()));
    }
    generate(cfg)
}

/// Study-level settings for [`run_mc_study`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSettings {
    pub replicates: usize,
    /// Perturbation draws per replicate; 0 skips covariance estimation (no
    /// ASE/CP columns).
    pub resamples: usize,
    pub k_scale: f64,
    pub ci_level: f64,
    /// Keep per-replicate estimates for external plotting.
    pub emit_raw: bool,
    /// Fit template; the per-option weight specification overrides its
    /// weight field.
    pub fit: FitConfig,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            replicates: 200,
            resamples: 200,
            k_scale: 1.0,
            ci_level: 0.95,
            emit_raw: false,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub bias: f64,
    pub ese: f64,
    pub ase: Option<f64>,
    pub cp: Option<f64>,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptionSummary {
    pub label: String,
    pub weight: WeightSpec,
    pub replicates_used: usize,
    pub failures: usize,
    pub params: Vec<ParamSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RawEstimate {
    pub replicate: usize,
    pub option: String,
    pub parameter: String,
    pub estimate: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McStudyReport {
    pub scenario: ScenarioConfig,
    pub replicates: usize,
    pub options: Vec<OptionSummary>,
    /// Mean realized censoring composition across replicates.
    pub censoring: CensoringComposition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<RawEstimate>>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl McStudyReport {
    /// Relative efficiency of option `of` over option `over` per parameter:
    /// the MSE ratio `mse(over) / mse(of)` (above 1 favors `of`).
    pub fn relative_efficiency(&self, of: &str, over: &str) -> Option<Vec<f64>> {
        let a = self.options.iter().find(|o| o.label == of)?;
        let b = self.options.iter().find(|o| o.label == over)?;
        Some(
            a.params
                .iter()
                .zip(&b.params)
                .map(|(pa, pb)| pb.mse / pa.mse)
                .collect(),
        )
    }
}

struct ReplicateOutcome {
    composition: CensoringComposition,
    // Per option: (estimates, standard errors) or a failure message.
    fits: Vec<std::result::Result<(Vec<f64>, Option<Vec<f64>>), String>>,
}

/// Run a replicated study: generate, fit every option, estimate covariance,
/// and aggregate bias/ESE/ASE/CP per parameter. Replicate-level failures are
/// excluded with a count; more than 5% failures for any option aborts.
pub fn run_mc_study(
    scenario: &ScenarioConfig,
    options: &[WeightSpec],
    settings: &McSettings,
) -> Result<McStudyReport> {
    let started = std::time::Instant::now();
    scenario.validate()?;
    if options.is_empty() {
        return Err(Error::Config("no fit options requested".into()));
    }
    if settings.replicates < 50 {
        return Err(Error::Config(
            "coverage estimation needs at least 50 replicates".into(),
        ));
    }
    if !(settings.ci_level > 0.0 && settings.ci_level < 1.0) {
        return Err(Error::Config("ci level must lie in (0, 1)".into()));
    }
    let consts = calibrate(scenario)?;

    let outcomes: Vec<ReplicateOutcome> = (0..settings.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(scenario.seed, &[STREAM_GENERATE, r as u64]);
            let data = match generate_with(scenario, &consts, &mut rng) {
                Ok(d) => d,
                Err(e) => {
                    return ReplicateOutcome {
                        composition: CensoringComposition::default(),
                        fits: options.iter().map(|_| Err(e.to_string())).collect(),
                    }
                }
            };
            let composition = data.censoring_composition();
            let fits = options
                .iter()
                .enumerate()
                .map(|(oi, wspec)| {
                    let mut cfg = settings.fit.clone();
                    cfg.weight = *wspec;
                    let mut fitted = fit(&data, &cfg).map_err(|e| e.to_string())?;
                    let ses = if settings.resamples > 0 {
                        let rcfg = ResampleConfig {
                            resamples: settings.resamples,
                            seed: derive(scenario.seed, &[STREAM_RESAMPLE, r as u64, oi as u64]),
                            k_scale: settings.k_scale,
                        };
                        attach_covariance(&data, &mut fitted, &rcfg)
                            .map_err(|e| e.to_string())?;
                        let cov = fitted
                            .covariance
                            .as_ref()
                            .ok_or_else(|| "singular slope matrix; raise resamples".to_string())?;
                        Some(
                            (0..data.p())
                                .map(|j| cov[j][j].max(0.0).sqrt())
                                .collect::<Vec<f64>>(),
                        )
                    } else {
                        None
                    };
                    Ok((fitted.beta, ses))
                })
                .collect();
            ReplicateOutcome { composition, fits }
        })
        .collect();

    // Aggregate.
    let normal = Normal::standard();
    let z = normal.inverse_cdf(0.5 * (1.0 + settings.ci_level));
    let p = TRUE_BETA.len();
    let mut option_summaries = Vec::with_capacity(options.len());
    for (oi, wspec) in options.iter().enumerate() {
        let successes: Vec<&(Vec<f64>, Option<Vec<f64>>)> = outcomes
            .iter()
            .filter_map(|o| o.fits[oi].as_ref().ok())
            .collect();
        let failures = settings.replicates - successes.len();
        if failures * 20 > settings.replicates {
            let first = outcomes
                .iter()
                .filter_map(|o| o.fits[oi].as_ref().err())
                .next()
                .cloned()
                .unwrap_or_default();
            return Err(Error::TooManyFailures {
                failed: failures,
                total: settings.replicates,
                first,
            });
        }
        let used = successes.len();
        let mut params = Vec::with_capacity(p);
        for j in 0..p {
            let ests: Vec<f64> = successes.iter().map(|(b, _)| b[j]).collect();
            let mean = ests.iter().sum::<f64>() / used as f64;
            let bias = mean - TRUE_BETA[j];
            let ese = (ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (used.saturating_sub(1)) as f64)
                .sqrt();
            let mse = ests
                .iter()
                .map(|e| (e - TRUE_BETA[j]).powi(2))
                .sum::<f64>()
                / used as f64;
            let (ase, cp) = if settings.resamples > 0 {
                let ses: Vec<f64> = successes
                    .iter()
                    .map(|(_, s)| s.as_ref().expect("resampled")[j])
                    .collect();
                let ase = ses.iter().sum::<f64>() / used as f64;
                let covered = successes
                    .iter()
                    .zip(&ses)
                    .filter(|((b, _), se)| {
                        (b[j] - z * **se) <= TRUE_BETA[j] && TRUE_BETA[j] <= (b[j] + z * **se)
                    })
                    .count();
                (Some(ase), Some(covered as f64 / used as f64))
            } else {
                (None, None)
            };
            params.push(ParamSummary {
                parameter: format!("beta{}", j + 1),
                bias,
                ese,
                ase,
                cp,
                mse,
            });
        }
        option_summaries.push(OptionSummary {
            label: wspec.label(),
            weight: *wspec,
            replicates_used: used,
            failures,
            params,
        });
    }

    let mut censoring = CensoringComposition::default();
    for o in &outcomes {
        censoring.exact += o.composition.exact;
        censoring.left += o.composition.left;
        censoring.interval += o.composition.interval;
        censoring.right += o.composition.right;
        censoring.uninformative += o.composition.uninformative;
    }
    let nrep = settings.replicates as f64;
    censoring.exact /= nrep;
    censoring.left /= nrep;
    censoring.interval /= nrep;
    censoring.right /= nrep;
    censoring.uninformative /= nrep;

    let raw = settings.emit_raw.then(|| {
        let mut rows = Vec::new();
        for (r, o) in outcomes.iter().enumerate() {
            for (oi, f) in o.fits.iter().enumerate() {
                if let Ok((beta, ses)) = f {
                    for j in 0..p {
                        rows.push(RawEstimate {
                            replicate: r,
                            option: options[oi].label(),
                            parameter: format!("beta{}", j + 1),
                            estimate: beta[j],
                            se: ses.as_ref().map(|s| s[j]),
                        });
                    }
                }
            }
        }
        rows
    });

    Ok(McStudyReport {
        scenario: scenario.clone(),
        replicates: settings.replicates,
        options: option_summaries,
        censoring,
        raw,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
