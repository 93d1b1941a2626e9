//! Limit-theorem experiments on triangular arrays.
//!
//! For each row `n` the runner computes the free row sum
//! `ν_n = μ_n1 ⊞ ... ⊞ μ_nk ⊞ δ_{c_n}`, the classical row sum `μ_n`, and the
//! centered data `(σ_n, γ_n)`, and compares them with the free and classical
//! infinitely divisible laws of the expected generator pair. Every quantity is
//! computed independently so a numerical failure only blanks its own cell.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrays::{self, ArrayKind, Row, TriangularArray};
use crate::classical::classical_convolve_many;
use crate::error::{Error, Result};
use crate::freeconv::free_convolve_many;
use crate::generators::{materialize_classical, materialize_free, GeneratorPair};
use crate::measure::{kolmogorov_distance, levy_distance, GridSpec, Measure};
use crate::transform::{voiculescu_in, Cone};

/// Exact column order of the convergence CSV.
pub const CSV_COLUMNS: [&str; 11] = [
    "n",
    "free_dist",
    "classical_dist",
    "sigma_dist",
    "gamma_err",
    "max_a",
    "max_tail",
    "max_v",
    "lemma31_viol1",
    "lemma31_viol2",
    "lemma32_gap",
];

/// Slack allowed on the `lemma31_check` inequalities.
pub const LEMMA31_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Levy,
    Kolmogorov,
}

impl Metric {
    pub fn distance(self, a: &Measure, b: &Measure) -> f64 {
        match self {
            Metric::Levy => levy_distance(a, b),
            Metric::Kolmogorov => kolmogorov_distance(a, b),
        }
    }
}

/// Array source: a built-in recipe, or rows read from an array file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySource {
    File { file: PathBuf },
    Kind(ArrayKind),
}

fn default_rows() -> Vec<usize> {
    vec![4, 16, 64, 256]
}

fn default_probe_ys() -> Vec<f64> {
    vec![2.0, 5.0, 10.0, 100.0]
}

fn default_lemma31_ys() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0]
}

fn default_tail_eps() -> f64 {
    0.1
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub array: ArraySource,
    #[serde(default = "default_rows")]
    pub rows: Vec<usize>,
    /// Generator pair of the expected limit.
    pub limit: GeneratorPair,
    /// Output grid for row sums and limit laws; fitted automatically when absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub metric: Metric,
    /// Heights `y` of the probe points `iy` for cone diagnostics.
    #[serde(default = "default_probe_ys")]
    pub probe_ys: Vec<f64>,
    #[serde(default = "default_lemma31_ys")]
    pub lemma31_ys: Vec<f64>,
    /// `ε` in the tail masses `μ_nk{|t| >= ε}`.
    #[serde(default = "default_tail_eps")]
    pub tail_eps: f64,
    /// Accepted φ-additivity error in the check suite.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut cfg: ExperimentConfig = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ArraySource::File { file } = &mut cfg.array {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty()
            && !matches!(
                self.array,
                ArraySource::File { .. } | ArraySource::Kind(ArrayKind::CustomRows { .. })
            )
        {
            return Err(Error::Config("row list must be nonempty".into()));
        }
        if self.probe_ys.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
            return Err(Error::Config("probe heights must be positive".into()));
        }
        if self.lemma31_ys.iter().any(|&y| !(y >= 1.0 && y.is_finite())) {
            return Err(Error::Config("lemma31 heights must be at least 1".into()));
        }
        if !(self.tail_eps > 0.0) {
            return Err(Error::Config("tail_eps must be positive".into()));
        }
        if !(self.limit.sigma.total_mass() >= 0.0) || !self.limit.gamma.is_finite() {
            return Err(Error::Config(
                "limit pair must have finite gamma and finite sigma".into(),
            ));
        }
        Ok(())
    }

    pub fn build_array(&self) -> Result<TriangularArray> {
        match &self.array {
            ArraySource::File { file } => TriangularArray::read(file),
            ArraySource::Kind(kind) => arrays::build_array(kind, &self.rows),
        }
    }
}

/// One row of the convergence table plus per-probe detail.
#[derive(Clone, Debug, Serialize)]
pub struct RowReport {
    pub n: usize,
    pub free_dist: f64,
    pub classical_dist: f64,
    pub sigma_dist: f64,
    pub gamma_err: f64,
    pub max_a: f64,
    pub max_tail: f64,
    pub max_v: f64,
    pub lemma31_viol1: f64,
    pub lemma31_viol2: f64,
    pub lemma32_gap: f64,
    /// `max_k |v_nk(iy)|` for each probe height.
    #[serde(skip)]
    pub v_by_y: Vec<f64>,
    /// `lemma32_gap` for each probe height.
    #[serde(skip)]
    pub lemma32_by_y: Vec<f64>,
    /// `Σ_k |Im f_nk(iy)|` for each probe height.
    #[serde(skip)]
    pub im_f_by_y: Vec<f64>,
    #[serde(skip)]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub probe_ys: Vec<f64>,
    pub rows: Vec<RowReport>,
    /// Failures that affect every row, such as an unmaterializable limit.
    pub errors: Vec<String>,
}

impl ConvergenceReport {
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match name {
                "n" => r.n as f64,
                "free_dist" => r.free_dist,
                "classical_dist" => r.classical_dist,
                "sigma_dist" => r.sigma_dist,
                "gamma_err" => r.gamma_err,
                "max_a" => r.max_a,
                "max_tail" => r.max_tail,
                "max_v" => r.max_v,
                "lemma31_viol1" => r.lemma31_viol1,
                "lemma31_viol2" => r.lemma31_viol2,
                "lemma32_gap" => r.lemma32_gap,
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        if self.rows.is_empty() {
            out.write_record(CSV_COLUMNS)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn all_errors(&self) -> Vec<String> {
        let mut all = self.errors.clone();
        for r in &self.rows {
            all.extend(r.errors.iter().map(|e| format!("n = {}: {e}", r.n)));
        }
        all
    }
}

struct Limits {
    free: std::result::Result<Measure, String>,
    classical: std::result::Result<Measure, String>,
}

/// Runs the experiment row by row. Only an unreadable array is fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let arr = cfg.build_array()?;
    let grid = cfg.grid.as_ref();
    let (free, classical) = rayon::join(
        || materialize_free(&cfg.limit, grid).map_err(|e| format!("free limit: {e}")),
        || materialize_classical(&cfg.limit, grid).map_err(|e| format!("classical limit: {e}")),
    );
    let limits = Limits { free, classical };
    let errors = [&limits.free, &limits.classical]
        .iter()
        .filter_map(|r| r.as_ref().err().cloned())
        .collect();
    let rows = (0..arr.rows.len())
        .into_par_iter()
        .map(|i| row_report(cfg, &arr, i, &limits))
        .collect();
    Ok(ConvergenceReport {
        probe_ys: cfg.probe_ys.clone(),
        rows,
        errors,
    })
}

fn row_report(cfg: &ExperimentConfig, arr: &TriangularArray, index: usize, limits: &Limits) -> RowReport {
    let row = &arr.rows[index];
    let grid = cfg.grid.as_ref();
    let mut errors = Vec::new();
    let mut keep = |label: &str, r: Result<f64>| -> f64 {
        r.unwrap_or_else(|e| {
            errors.push(format!("{label}: {e}"));
            f64::NAN
        })
    };

    let ((free_row, classical_row), cond) = rayon::join(
        || {
            rayon::join(
                || free_convolve_many(&row.measures, row.c, grid),
                || classical_convolve_many(&row.measures, row.c, grid),
            )
        },
        || arrays::condition3(arr, index),
    );
    let compare = |side: Result<Measure>, limit: &std::result::Result<Measure, String>| -> Result<f64> {
        let side = side?;
        match limit {
            Ok(l) => Ok(cfg.metric.distance(&side, l)),
            Err(e) => Err(Error::Config(format!("limit unavailable ({e})"))),
        }
    };
    let free_dist = keep("free row sum", compare(free_row, &limits.free));
    let classical_dist = keep("classical row sum", compare(classical_row, &limits.classical));
    let (sigma_dist, gamma_err) = match &cond {
        Ok(d) => (
            levy_distance(&d.sigma_n, &cfg.limit.sigma),
            (d.gamma_n - cfg.limit.gamma).abs(),
        ),
        Err(e) => {
            let msg = e.to_string();
            keep("condition 3", Err(Error::Config(msg)));
            (f64::NAN, f64::NAN)
        }
    };

    let max_a = row
        .groups()
        .iter()
        .map(|(m, _)| arrays::truncated_mean(m).abs())
        .fold(0.0, f64::max);
    let max_tail = row
        .groups()
        .iter()
        .map(|(m, _)| m.tail_mass(cfg.tail_eps))
        .fold(0.0, f64::max);

    let cone = Cone::default();
    let mut v_by_y = Vec::new();
    let mut lemma32_by_y = Vec::new();
    let mut im_f_by_y = Vec::new();
    for &y in &cfg.probe_ys {
        let w = Complex64::new(0.0, y);
        v_by_y.push(keep("prop23 residual", arrays::max_prop23_residual(row, w)));
        lemma32_by_y.push(keep("lemma32 gap", arrays::lemma32_gap(row, y, &cone)));
        im_f_by_y.push(keep("f_nk", arrays::sum_abs_im_f(row, y)));
    }
    let mut viol1: f64 = 0.0;
    let mut viol2: f64 = 0.0;
    for &y in &cfg.lemma31_ys {
        match arrays::lemma31_check(row, y) {
            Ok(v) => {
                viol1 = viol1.max(v.first);
                viol2 = viol2.max(v.second);
            }
            Err(e) => {
                keep("lemma31", Err(e));
                viol1 = f64::NAN;
                viol2 = f64::NAN;
            }
        }
    }
    RowReport {
        n: arr.label(index),
        free_dist,
        classical_dist,
        sigma_dist,
        gamma_err,
        max_a,
        max_tail,
        max_v: nan_max(&v_by_y),
        lemma31_viol1: viol1,
        lemma31_viol2: viol2,
        lemma32_gap: nan_max(&lemma32_by_y),
        v_by_y,
        lemma32_by_y,
        im_f_by_y,
        errors,
    }
}

/// Maximum that propagates NaN.
fn nan_max(xs: &[f64]) -> f64 {
    xs.iter().fold(f64::NEG_INFINITY, |a, &b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lemma31,
    Prop23,
    PhiAdditivity,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma31" => Ok(Suite::Lemma31),
            "prop23" => Ok(Suite::Prop23),
            "phi-additivity" => Ok(Suite::PhiAdditivity),
            _ => Err(Error::Config(format!("unknown suite {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub passed: bool,
    pub max_violation: f64,
    pub details: Vec<String>,
}

pub fn run_check(suite: Suite, cfg: &ExperimentConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let arr = cfg.build_array()?;
    match suite {
        Suite::Lemma31 => check_lemma31(cfg, &arr),
        Suite::Prop23 => check_prop23(cfg, &arr),
        Suite::PhiAdditivity => check_phi_additivity(cfg, &arr),
    }
}

/// Both inequalities at every row and height; the second only where
/// `max_k |a_nk| <= 1/2`.
fn check_lemma31(cfg: &ExperimentConfig, arr: &TriangularArray) -> Result<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (i, row) in arr.rows.iter().enumerate() {
        for &y in &cfg.lemma31_ys {
            let v = arrays::lemma31_check(row, y)?;
            worst = worst.max(v.first).max(v.second);
            details.push(format!(
                "n = {} y = {y}: viol1 = {:e} viol2 = {:e}{}",
                arr.label(i),
                v.first.max(0.0),
                v.second.max(0.0),
                if v.second_applies {
                    ""
                } else {
                    " (second not applicable)"
                }
            ));
        }
    }
    Ok(CheckReport {
        suite: Suite::Lemma31,
        passed: worst <= LEMMA31_SLACK,
        max_violation: worst.max(0.0),
        details,
    })
}

/// `max_k |v_nk(iy)|` must shrink down the rows at each probe height, and
/// along the probe heights within each row.
fn check_prop23(cfg: &ExperimentConfig, arr: &TriangularArray) -> Result<CheckReport> {
    let mut ys = cfg.probe_ys.clone();
    ys.sort_by(f64::total_cmp);
    let table: Vec<Vec<f64>> = arr
        .rows
        .iter()
        .map(|row| {
            ys.iter()
                .map(|&y| arrays::max_prop23_residual(row, Complex64::new(0.0, y)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut details = Vec::new();
    let mut step = |prev: f64, next: f64| {
        if !(next < prev || (prev == 0.0 && next == 0.0)) {
            failures += 1;
            worst = worst.max(next - prev);
        }
    };
    for (j, &y) in ys.iter().enumerate() {
        for i in 1..table.len() {
            step(table[i - 1][j], table[i][j]);
        }
        let col: Vec<String> = table.iter().map(|r| format!("{:.3e}", r[j])).collect();
        details.push(format!("y = {y}: max |v| by row = [{}]", col.join(", ")));
    }
    for (i, r) in table.iter().enumerate() {
        for j in 1..r.len() {
            step(r[j - 1], r[j]);
        }
        let by_y: Vec<String> = r.iter().map(|v| format!("{v:.3e}")).collect();
        details.push(format!(
            "n = {}: max |v| by height = [{}]",
            arr.label(i),
            by_y.join(", ")
        ));
    }
    Ok(CheckReport {
        suite: Suite::Prop23,
        passed: failures == 0,
        max_violation: worst,
        details,
    })
}

/// `|φ_{ν_n}(iy) - c_n - Σ_k φ_{μ_nk}(iy)|` at the probe heights, with `ν_n`
/// the recovered free row sum.
fn check_phi_additivity(cfg: &ExperimentConfig, arr: &TriangularArray) -> Result<CheckReport> {
    let cone = Cone::default();
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (i, row) in arr.rows.iter().enumerate() {
        let out = free_convolve_many(&row.measures, row.c, cfg.grid.as_ref())?;
        let mut row_worst: f64 = 0.0;
        for &y in &cfg.probe_ys {
            let w = Complex64::new(0.0, y);
            let err = phi_row_error(row, &out, w, &cone)?;
            row_worst = row_worst.max(err);
        }
        worst = worst.max(row_worst);
        details.push(format!("n = {}: max error {:e}", arr.label(i), row_worst));
    }
    Ok(CheckReport {
        suite: Suite::PhiAdditivity,
        passed: worst <= cfg.tolerance,
        max_violation: worst,
        details,
    })
}

fn phi_row_error(row: &Row, out: &Measure, w: Complex64, cone: &Cone) -> Result<f64> {
    let mut sum = Complex64::new(row.c, 0.0);
    for (m, k) in row.groups() {
        sum += k as f64 * voiculescu_in(m, w, cone)?;
    }
    Ok((voiculescu_in(out, w, cone)? - sum).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        cfg
    }

    #[test]
    fn config_defaults() {
        let cfg = config(
            r#"{"array": {"kind": "iid_scaled_bernoulli"}, "limit": {"gamma": 0, "sigma": {"atoms": [{"x": 0, "w": 1}]}}}"#,
        );
        assert_eq!(cfg.rows, vec![4, 16, 64, 256]);
        assert_eq!(cfg.probe_ys, vec![2.0, 5.0, 10.0, 100.0]);
        assert_eq!(cfg.metric, Metric::Levy);
        assert!(cfg.grid.is_none());
        let bad =
            r#"{"array": {"kind": "iid_scaled_bernoulli"}, "limit": {"gamma": 0, "sigma": {}}, "metric": "total"}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }

    #[test]
    fn point_mass_array_converges_immediately() {
        let row = |n: usize| serde_json::json!({"c": 0.75, "n": n, "measures": vec![serde_json::json!({"atoms": [{"x": 0.0, "w": 1.0}]}); n]});
        let json = serde_json::json!({
            "array": {"kind": "custom_rows", "rows": [row(1), row(2), row(3)]},
            "limit": {"gamma": 0.75, "sigma": {}},
        });
        let cfg: ExperimentConfig = serde_json::from_value(json).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.all_errors().is_empty(), "{:?}", report.all_errors());
        for r in &report.rows {
            for v in [
                r.free_dist,
                r.classical_dist,
                r.sigma_dist,
                r.gamma_err,
                r.max_a,
                r.max_tail,
                r.max_v,
            ] {
                assert_eq!(v, 0.0);
            }
        }
        let csv = report.to_csv_string().unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn row_errors_are_isolated() {
        let wide = Measure::from_atoms(&[(-50.0, 0.5), (50.0, 0.5)]).unwrap();
        let rows = vec![
            Row::new(0.0, vec![wide.clone(); 2], Some(1)).unwrap(),
            Row::new(0.0, vec![Measure::dirac(0.0); 2], Some(2)).unwrap(),
        ];
        let cfg = ExperimentConfig {
            array: ArraySource::Kind(ArrayKind::CustomRows { rows }),
            rows: vec![],
            limit: GeneratorPair::drift(0.0),
            grid: Some(GridSpec::new(-1.0, 1.0, 257).unwrap()),
            metric: Metric::Kolmogorov,
            probe_ys: default_probe_ys(),
            lemma31_ys: default_lemma31_ys(),
            tail_eps: 0.1,
            tolerance: 1e-4,
            out_csv: None,
        };
        let report = run_experiment(&cfg).unwrap();
        assert!(!report.rows[0].errors.is_empty());
        assert!(report.rows[0].classical_dist.is_nan());
        assert!(report.rows[1].errors.is_empty());
        assert_eq!(report.rows[1].free_dist, 0.0);
    }

    #[test]
    fn lemma31_suite_on_bernoulli_rows() {
        let cfg = config(
            r#"{"array": {"kind": "iid_scaled_bernoulli"}, "rows": [4, 16], "limit": {"gamma": 0, "sigma": {"atoms": [{"x": 0, "w": 1}]}}}"#,
        );
        let r = run_check(Suite::Lemma31, &cfg).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.details.len(), 8);
    }

    #[test]
    fn suites_parse() {
        assert_eq!("phi-additivity".parse::<Suite>().unwrap(), Suite::PhiAdditivity);
        assert!("lemma99".parse::<Suite>().is_err());
    }
}
