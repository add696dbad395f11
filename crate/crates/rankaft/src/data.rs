//! Observation and dataset types for partly interval-censored event data.
//!
//! An event time is represented by an effective bracket `[lower, upper]`:
//! exact observations have `lower == upper`, interval-censored observations
//! have `lower < upper`, `lower == 0` encodes "no lower bound" (left-censored)
//! and `upper == +∞` encodes "no upper bound" (right-censored). Doubly
//! censored records (exact / left- / right-censored) reduce to the same
//! bracket form, so every downstream routine handles both data types through
//! one code path.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result, RowError};

/// One subject's censoring-bracketed event time with covariates and an
/// optional cluster label.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalObservation {
    lower: f64,
    upper: f64,
    delta: bool,
    covariates: Vec<f64>,
    cluster: Option<String>,
}

impl IntervalObservation {
    /// An exactly observed event at time `t > 0`.
    pub fn exact(t: f64, covariates: Vec<f64>) -> Result<Self> {
        check_covariates(&covariates)?;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidObservation(format!(
                "exact time must be finite and positive, got {t}"
            )));
        }
        Ok(Self {
            lower: t,
            upper: t,
            delta: true,
            covariates,
            cluster: None,
        })
    }

    /// A censored observation bracketed by `lower < upper`. `lower == 0`
    /// means no lower bound; `upper == +∞` means no upper bound.
    pub fn interval(lower: f64, upper: f64, covariates: Vec<f64>) -> Result<Self> {
        check_covariates(&covariates)?;
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::InvalidObservation("bracket contains NaN".into()));
        }
        if !lower.is_finite() || lower < 0.0 {
            return Err(Error::InvalidObservation(format!(
                "lower bracket must be finite and nonnegative, got {lower}"
            )));
        }
        if lower >= upper {
            return Err(Error::InvalidObservation(format!(
                "censored bracket requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            delta: false,
            covariates,
            cluster: None,
        })
    }

    /// Build an observation from a PIC record `(Δ, T, U, V, X)`: exact events
    /// carry the bracket `(T, T)`, censored ones `(U, V)`.
    pub fn from_pic_record(delta: bool, t: f64, u: f64, v: f64, x: Vec<f64>) -> Result<Self> {
        if delta {
            Self::exact(t, x)
        } else {
            Self::interval(u, v, x)
        }
    }

    /// Build an observation from a DC record `(T̃, δ₁, δ₂, δ₃, X)`. Exactly
    /// one indicator must be set: δ₁ = exact at `t_tilde`, δ₂ = right-censored
    /// (bracket `(t_tilde, ∞)`), δ₃ = left-censored (bracket `(0, t_tilde)`).
    pub fn from_dc_record(t_tilde: f64, d1: bool, d2: bool, d3: bool, x: Vec<f64>) -> Result<Self> {
        let set = d1 as u8 + d2 as u8 + d3 as u8;
        if set != 1 {
            return Err(Error::InvalidObservation(format!(
                "exactly one of d1, d2, d3 must be set, got ({}, {}, {})",
                d1 as u8, d2 as u8, d3 as u8
            )));
        }
        if !t_tilde.is_finite() || t_tilde <= 0.0 {
            return Err(Error::InvalidObservation(format!(
                "observed time must be finite and positive, got {t_tilde}"
            )));
        }
        if d1 {
            Self::exact(t_tilde, x)
        } else if d2 {
            Self::interval(t_tilde, f64::INFINITY, x)
        } else {
            Self::interval(0.0, t_tilde, x)
        }
    }

    /// Attach a cluster label.
    pub fn with_cluster(mut self, label: impl Into<String>) -> Self {
        self.cluster = Some(label.into());
        self
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn delta(&self) -> bool {
        self.delta
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn cluster(&self) -> Option<&str> {
        self.cluster.as_deref()
    }

    /// η₁ = 1 when the lower bracket is informative (exact or `lower > 0`).
    pub fn eta1(&self) -> bool {
        self.delta || self.lower > 0.0
    }

    /// η₂ = 1 when the upper bracket is informative (exact or `upper < ∞`).
    pub fn eta2(&self) -> bool {
        self.delta || self.upper.is_finite()
    }

    /// Residual bracket `(log lower − β'x, log upper − β'x)`, with `−∞`/`+∞`
    /// for uninformative ends. `beta` must have the covariate length.
    pub fn residual_bounds(&self, beta: &[f64]) -> (f64, f64) {
        assert_eq!(
            beta.len(),
            self.covariates.len(),
            "coefficient/covariate dimension mismatch"
        );
        let shift = dot(beta, &self.covariates);
        let u_res = if self.lower > 0.0 {
            self.lower.ln() - shift
        } else {
            f64::NEG_INFINITY
        };
        let v_res = if self.upper.is_finite() {
            self.upper.ln() - shift
        } else {
            f64::INFINITY
        };
        (u_res, v_res)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_covariates(x: &[f64]) -> Result<()> {
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidObservation(format!(
            "covariates must be finite, got {bad}"
        )));
    }
    Ok(())
}

/// Realized censoring composition of a dataset, as fractions of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct CensoringComposition {
    pub exact: f64,
    pub left: f64,
    pub interval: f64,
    pub right: f64,
    pub uninformative: f64,
}

/// A validated, immutable collection of observations with a common covariate
/// dimension and derived cluster structure. Rows without a cluster label form
/// singleton clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<IntervalObservation>,
    p: usize,
    cluster_of: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    cluster_labels: Vec<Option<String>>,
}

impl Dataset {
    pub fn new(observations: Vec<IntervalObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidDataset("no observations".into()));
        }
        let p = observations[0].covariates.len();
        for (i, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "observation {i} has {} covariates, expected {p}",
                    obs.covariates.len()
                )));
            }
        }
        if !observations.iter().any(|o| o.eta1() || o.eta2()) {
            return Err(Error::InvalidDataset(
                "every bracket is (0, inf); no observation carries rank information".into(),
            ));
        }

        // Cluster indices in order of first appearance; unlabeled rows are
        // singleton clusters.
        let mut by_label: HashMap<&str, usize> = HashMap::new();
        let mut cluster_of = Vec::with_capacity(observations.len());
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut cluster_labels: Vec<Option<String>> = Vec::new();
        for (i, obs) in observations.iter().enumerate() {
            let c = match obs.cluster.as_deref() {
                Some(label) => *by_label.entry(label).or_insert_with(|| {
                    clusters.push(Vec::new());
                    cluster_labels.push(Some(label.to_string()));
                    clusters.len() - 1
                }),
                None => {
                    clusters.push(Vec::new());
                    cluster_labels.push(None);
                    clusters.len() - 1
                }
            };
            clusters[c].push(i);
            cluster_of.push(c);
        }

        Ok(Self {
            observations,
            p,
            cluster_of,
            clusters,
            cluster_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn observations(&self) -> &[IntervalObservation] {
        &self.observations
    }

    pub fn obs(&self, i: usize) -> &IntervalObservation {
        &self.observations[i]
    }

    /// Cluster index of observation `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    /// Member indices of cluster `c`.
    pub fn cluster_members(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    /// Label of cluster `c` (`None` for synthesized singleton clusters).
    pub fn cluster_label(&self, c: usize) -> Option<&str> {
        self.cluster_labels[c].as_deref()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    pub fn censoring_composition(&self) -> CensoringComposition {
        let n = self.n() as f64;
        let mut comp = CensoringComposition::default();
        for obs in &self.observations {
            if obs.delta {
                comp.exact += 1.0;
            } else {
                match (obs.lower > 0.0, obs.upper.is_finite()) {
                    (true, true) => comp.interval += 1.0,
                    (false, true) => comp.left += 1.0,
                    (true, false) => comp.right += 1.0,
                    (false, false) => comp.uninformative += 1.0,
                }
            }
        }
        comp.exact /= n;
        comp.left /= n;
        comp.interval /= n;
        comp.right /= n;
        comp.uninformative /= n;
        comp
    }
}

/// Which cluster column to use when reading CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ClusterColumn {
    /// Use a column named `cluster` when present, singletons otherwise.
    #[default]
    Auto,
    /// No cluster column even if one named `cluster` exists.
    None,
    /// A required named column.
    Named(String),
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvSchema {
    /// Bracket format: lower/upper/delta columns.
    Pic {
        lower: String,
        upper: String,
        delta: String,
        cluster: ClusterColumn,
        /// Covariate column names; `None` takes every remaining column.
        covariates: Option<Vec<String>>,
    },
    /// Doubly-censored format: observed time plus indicator triple.
    Dc {
        time: String,
        d1: String,
        d2: String,
        d3: String,
        cluster: ClusterColumn,
        covariates: Option<Vec<String>>,
    },
}

impl CsvSchema {
    pub fn pic_default() -> Self {
        CsvSchema::Pic {
            lower: "lower".into(),
            upper: "upper".into(),
            delta: "delta".into(),
            cluster: ClusterColumn::Auto,
            covariates: None,
        }
    }

    pub fn dc_default() -> Self {
        CsvSchema::Dc {
            time: "time".into(),
            d1: "d1".into(),
            d2: "d2".into(),
            d3: "d3".into(),
            cluster: ClusterColumn::Auto,
            covariates: None,
        }
    }
}

/// Load and validate a dataset from a CSV file. Any rejected row fails the
/// whole load; the error carries a per-row report.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema, &path.display().to_string())
}

/// As [`load_csv`], over any reader. `origin` names the source in errors.
pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema, origin: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("{origin}: cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let plan = ColumnPlan::resolve(&headers, schema, origin)?;

    let mut observations = Vec::new();
    let mut rejected = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx as u64 + 2; // 1-based, after the header line
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowError {
                    line,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        if record.len() != headers.len() {
            rejected.push(RowError {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
            continue;
        }
        match plan.parse_row(&record) {
            Ok(obs) => observations.push(obs),
            Err(message) => rejected.push(RowError { line, message }),
        }
    }

    if !rejected.is_empty() {
        return Err(Error::CsvRows {
            path: origin.to_string(),
            rejected,
        });
    }
    if observations.is_empty() {
        return Err(Error::InvalidDataset(format!("{origin}: empty dataset")));
    }
    Dataset::new(observations)
}

/// Write a dataset in the bracket (PIC) CSV format, `+∞` encoded as `inf`.
/// Columns: `lower,upper,delta[,cluster],x1..xp`.
pub fn write_pic_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let has_cluster = dataset
        .observations()
        .iter()
        .any(|o| o.cluster().is_some());
    let mut header = vec!["lower".to_string(), "upper".to_string(), "delta".to_string()];
    if has_cluster {
        header.push("cluster".to_string());
    }
    for j in 1..=dataset.p() {
        header.push(format!("x{j}"));
    }
    wtr.write_record(&header).map_err(csv_io)?;
    for obs in dataset.observations() {
        let mut row = vec![
            fmt_num(obs.lower()),
            fmt_num(obs.upper()),
            if obs.delta() { "1".into() } else { "0".into() },
        ];
        if has_cluster {
            row.push(obs.cluster().unwrap_or("").to_string());
        }
        for &x in obs.covariates() {
            row.push(fmt_num(x));
        }
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        // Shortest representation that round-trips exactly.
        format!("{v}")
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {e}"))
}

enum RowKind {
    Pic {
        lower: usize,
        upper: usize,
        delta: usize,
    },
    Dc {
        time: usize,
        d1: usize,
        d2: usize,
        d3: usize,
    },
}

struct ColumnPlan {
    kind: RowKind,
    cluster: Option<usize>,
    covariates: Vec<usize>,
}

impl ColumnPlan {
    fn resolve(headers: &[String], schema: &CsvSchema, origin: &str) -> Result<Self> {
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("{origin}: missing column `{name}`")))
        };
        let (kind, cluster_spec, covariates, mut taken): (_, _, _, Vec<usize>) = match schema {
            CsvSchema::Pic {
                lower,
                upper,
                delta,
                cluster,
                covariates,
            } => {
                let l = find(lower)?;
                let u = find(upper)?;
                let d = find(delta)?;
                (
                    RowKind::Pic {
                        lower: l,
                        upper: u,
                        delta: d,
                    },
                    cluster,
                    covariates,
                    vec![l, u, d],
                )
            }
            CsvSchema::Dc {
                time,
                d1,
                d2,
                d3,
                cluster,
                covariates,
            } => {
                let t = find(time)?;
                let i1 = find(d1)?;
                let i2 = find(d2)?;
                let i3 = find(d3)?;
                (
                    RowKind::Dc {
                        time: t,
                        d1: i1,
                        d2: i2,
                        d3: i3,
                    },
                    cluster,
                    covariates,
                    vec![t, i1, i2, i3],
                )
            }
        };

        let cluster = match cluster_spec {
            ClusterColumn::Auto => headers.iter().position(|h| h == "cluster"),
            ClusterColumn::None => None,
            ClusterColumn::Named(name) => Some(find(name)?),
        };
        if let Some(c) = cluster {
            taken.push(c);
        }

        let covariates = match covariates {
            Some(names) => names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?,
            None => (0..headers.len()).filter(|i| !taken.contains(i)).collect(),
        };

        Ok(Self {
            kind,
            cluster,
            covariates,
        })
    }

    fn parse_row(&self, record: &csv::StringRecord) -> std::result::Result<IntervalObservation, String> {
        let x = self
            .covariates
            .iter()
            .map(|&i| parse_f64(&record[i], "covariate"))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        let obs = match &self.kind {
            RowKind::Pic {
                lower,
                upper,
                delta,
            } => {
                let lo = parse_f64(&record[*lower], "lower")?;
                let up = parse_f64(&record[*upper], "upper")?;
                let d = parse_flag(&record[*delta], "delta")?;
                if d && lo != up {
                    return Err(format!(
                        "exact row (delta=1) must have lower == upper, got {lo} and {up}"
                    ));
                }
                IntervalObservation::from_pic_record(d, lo, lo, up, x)
            }
            RowKind::Dc { time, d1, d2, d3 } => {
                let t = parse_f64(&record[*time], "time")?;
                let i1 = parse_flag(&record[*d1], "d1")?;
                let i2 = parse_flag(&record[*d2], "d2")?;
                let i3 = parse_flag(&record[*d3], "d3")?;
                IntervalObservation::from_dc_record(t, i1, i2, i3, x)
            }
        }
        .map_err(|e| e.to_string())?;
        Ok(match self.cluster {
            Some(c) if !record[c].is_empty() => obs.with_cluster(&record[c]),
            _ => obs,
        })
    }
}

fn parse_f64(field: &str, what: &str) -> std::result::Result<f64, String> {
    // Rust's float parser already accepts `inf`/`infinity` case-insensitively.
    let v: f64 = field
        .parse()
        .map_err(|_| format!("cannot parse {what} value `{field}`"))?;
    if v.is_nan() {
        return Err(format!("{what} value is NaN"));
    }
    Ok(v)
}

fn parse_flag(field: &str, what: &str) -> std::result::Result<bool, String> {
    match field {
        "0" | "false" | "FALSE" | "False" => Ok(false),
        "1" | "true" | "TRUE" | "True" => Ok(true),
        _ => Err(format!("cannot parse {what} indicator `{field}` (expected 0/1)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exact(t: f64) -> IntervalObservation {
        IntervalObservation::exact(t, vec![]).unwrap()
    }

    #[test]
    fn pic_record_exact_and_interval() {
        let e = IntervalObservation::from_pic_record(true, 3.0, 0.0, 0.0, vec![1.0]).unwrap();
        assert_eq!((e.lower(), e.upper(), e.delta()), (3.0, 3.0, true));

        let ic = IntervalObservation::from_pic_record(false, 0.0, 2.0, 5.0, vec![1.0]).unwrap();
        assert_eq!((ic.lower(), ic.upper(), ic.delta()), (2.0, 5.0, false));

        let rc = IntervalObservation::from_pic_record(false, 0.0, 4.0, f64::INFINITY, vec![]).unwrap();
        assert!(rc.eta1() && !rc.eta2());
    }

    #[test]
    fn pic_record_rejects_bad_brackets() {
        assert!(IntervalObservation::from_pic_record(false, 0.0, 5.0, 5.0, vec![]).is_err());
        assert!(IntervalObservation::from_pic_record(false, 0.0, 6.0, 5.0, vec![]).is_err());
        assert!(IntervalObservation::from_pic_record(false, 0.0, -1.0, 5.0, vec![]).is_err());
        assert!(IntervalObservation::from_pic_record(true, -3.0, 0.0, 0.0, vec![]).is_err());
        assert!(IntervalObservation::from_pic_record(true, 3.0, 0.0, 0.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn dc_record_reduction() {
        let left = IntervalObservation::from_dc_record(2.0, false, false, true, vec![]).unwrap();
        assert_eq!((left.lower(), left.upper(), left.delta()), (0.0, 2.0, false));
        assert!(!left.eta1() && left.eta2());

        let ex = IntervalObservation::from_dc_record(5.0, true, false, false, vec![]).unwrap();
        assert_eq!((ex.lower(), ex.upper(), ex.delta()), (5.0, 5.0, true));

        let right = IntervalObservation::from_dc_record(4.0, false, true, false, vec![]).unwrap();
        assert_eq!(right.lower(), 4.0);
        assert!(right.upper().is_infinite() && !right.delta());
    }

    #[test]
    fn dc_record_rejects_bad_indicators() {
        assert!(IntervalObservation::from_dc_record(2.0, true, true, false, vec![]).is_err());
        assert!(IntervalObservation::from_dc_record(2.0, false, false, false, vec![]).is_err());
        assert!(IntervalObservation::from_dc_record(0.0, true, false, false, vec![]).is_err());
    }

    #[test]
    fn residual_bounds_examples() {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let obs = IntervalObservation::exact(e2, vec![]).unwrap();
        let (u, v) = obs.residual_bounds(&[]);
        assert_relative_eq!(u, 2.0, max_relative = 1e-15);
        assert_relative_eq!(v, 2.0, max_relative = 1e-15);

        let left = IntervalObservation::interval(0.0, 2.0, vec![]).unwrap();
        let (u, v) = left.residual_bounds(&[]);
        assert!(u.is_infinite() && u < 0.0);
        assert_relative_eq!(v, 2.0_f64.ln(), max_relative = 1e-15);

        let obs = IntervalObservation::interval(1.0, std::f64::consts::E, vec![1.0]).unwrap();
        let (u, v) = obs.residual_bounds(&[1.0]);
        assert_relative_eq!(u, -1.0, max_relative = 1e-15);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn eta_flags_match_finite_bounds() {
        let cases = [
            IntervalObservation::exact(1.0, vec![]).unwrap(),
            IntervalObservation::interval(0.0, 2.0, vec![]).unwrap(),
            IntervalObservation::interval(1.0, f64::INFINITY, vec![]).unwrap(),
            IntervalObservation::interval(1.0, 2.0, vec![]).unwrap(),
        ];
        for obs in &cases {
            let (u, v) = obs.residual_bounds(&[]);
            assert_eq!(obs.eta1() && obs.eta2(), u.is_finite() && v.is_finite());
            assert!(u <= v);
        }
    }

    proptest! {
        #[test]
        fn residual_bounds_equivariant(
            t in 0.05_f64..50.0,
            x in -3.0_f64..3.0,
            beta in -2.0_f64..2.0,
            shift in -2.0_f64..2.0,
        ) {
            let obs = IntervalObservation::exact(t, vec![x]).unwrap();
            let (u0, v0) = obs.residual_bounds(&[beta]);
            let (u1, v1) = obs.residual_bounds(&[beta + shift]);
            prop_assert!((u1 - (u0 - shift * x)).abs() <= 1e-12 * (1.0 + u0.abs()));
            prop_assert!((v1 - (v0 - shift * x)).abs() <= 1e-12 * (1.0 + v0.abs()));
        }
    }

    #[test]
    fn dataset_rejects_mixed_dimensions() {
        let a = IntervalObservation::exact(1.0, vec![1.0]).unwrap();
        let b = IntervalObservation::exact(2.0, vec![1.0, 2.0]).unwrap();
        assert!(Dataset::new(vec![a, b]).is_err());
    }

    #[test]
    fn dataset_rejects_all_uninformative() {
        let rows = vec![
            IntervalObservation::interval(0.0, f64::INFINITY, vec![]).unwrap(),
            IntervalObservation::interval(0.0, f64::INFINITY, vec![]).unwrap(),
        ];
        assert!(Dataset::new(rows).is_err());
    }

    #[test]
    fn clusters_group_by_label_with_singletons() {
        let rows = vec![
            exact(1.0).with_cluster("a"),
            exact(2.0).with_cluster("b"),
            exact(3.0).with_cluster("a"),
            exact(4.0),
        ];
        let ds = Dataset::new(rows).unwrap();
        assert_eq!(ds.n_clusters(), 3);
        assert_eq!(ds.cluster_of(0), ds.cluster_of(2));
        assert_eq!(ds.cluster_members(ds.cluster_of(0)), &[0, 2]);
        assert_eq!(ds.cluster_sizes().iter().sum::<usize>(), 4);
        assert_eq!(ds.cluster_label(ds.cluster_of(3)), None);
    }

    // The five observations of the motivating toy sample: 1, 2−, 3, 4+, 5.
    pub(crate) fn toy_csv() -> &'static str {
        "lower,upper,delta\n1,1,1\n0,2,0\n3,3,1\n4,inf,0\n5,5,1\n"
    }

    #[test]
    fn load_csv_toy_sample() {
        let ds = load_csv_reader(toy_csv().as_bytes(), &CsvSchema::pic_default(), "toy").unwrap();
        assert_eq!(ds.n(), 5);
        assert_eq!(ds.p(), 0);
        let deltas: Vec<bool> = ds.observations().iter().map(|o| o.delta()).collect();
        assert_eq!(deltas, vec![true, false, true, false, true]);
        assert!(ds.obs(3).upper().is_infinite());
        let comp = ds.censoring_composition();
        assert_relative_eq!(comp.exact, 0.6);
        assert_relative_eq!(comp.left, 0.2);
        assert_relative_eq!(comp.right, 0.2);
    }

    #[test]
    fn load_csv_reports_row_errors() {
        let text = "lower,upper,delta,x1\n1,1,1,0.5\n5,2,0,0.1\n";
        let err = load_csv_reader(text.as_bytes(), &CsvSchema::pic_default(), "bad").unwrap_err();
        match err {
            Error::CsvRows { rejected, .. } => {
                assert_eq!(rejected.len(), 1);
                assert_eq!(rejected[0].line, 3);
            }
            other => panic!("expected CsvRows, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_cluster_column() {
        let text = "lower,upper,delta,cluster,x1\n1,1,1,a,0.0\n2,2,1,b,0.0\n3,3,1,c,0.0\n4,4,1,a,0.0\n";
        let ds = load_csv_reader(text.as_bytes(), &CsvSchema::pic_default(), "c").unwrap();
        assert_eq!(ds.n_clusters(), 3);
        assert_eq!(ds.p(), 1);
    }

    #[test]
    fn load_csv_missing_column_is_schema_error() {
        let text = "lower,upper\n1,1\n";
        let err = load_csv_reader(text.as_bytes(), &CsvSchema::pic_default(), "m").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn pic_csv_round_trip() {
        let rows = vec![
            exact(1.5).with_cluster("u"),
            IntervalObservation::interval(0.0, 2.25, vec![])
                .unwrap()
                .with_cluster("v"),
            IntervalObservation::interval(4.0, f64::INFINITY, vec![])
                .unwrap()
                .with_cluster("u"),
        ];
        let ds = Dataset::new(rows).unwrap();
        let mut buf = Vec::new();
        write_pic_csv(&ds, &mut buf).unwrap();
        let back = load_csv_reader(buf.as_slice(), &CsvSchema::pic_default(), "rt").unwrap();
        assert_eq!(back, ds);
    }
}
