//! Triangular arrays and the centering quantities used to compare free and
//! classical limits of their row sums.
//!
//! For an entry `μ` of a row: `a = ∫_{|t|<1} t dμ`, `μ̄ = μ(· + a)`,
//! `f(z) = z²[G_μ̄(z) - 1/z] = ∫ tz/(z - t) dμ̄(t)`, and for `y >= 1`
//! `b(y) = ∫_{|t|≥1} a dμ + ∫_{|t|≥1} (t - a) y² / (y² + (t - a)²) dμ`.
//! Row data: `dσ_n = Σ_k t²/(1+t²) dμ̄_k` and
//! `γ_n = c_n + Σ_k [a_k + ∫ t/(1+t²) dμ̄_k]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::transform::{self, kernel, Cone};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub c: f64,
    pub measures: Vec<Measure>,
    /// Row index `n`; positional (1-based) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl Row {
    pub fn new(c: f64, measures: Vec<Measure>, n: Option<usize>) -> Result<Self> {
        let row = Row { c, measures, n };
        row.validate()?;
        Ok(row)
    }

    fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::InvalidMeasure("array row without measures".into()));
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "row shift must be finite, got {}",
                self.c
            )));
        }
        for m in &self.measures {
            if !m.is_probability() {
                return Err(Error::InvalidMeasure(format!(
                    "array entries must be probability measures, got total mass {}",
                    m.total_mass()
                )));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.measures.len()
    }

    /// Distinct entries with multiplicities, in order of first appearance.
    pub fn groups(&self) -> Vec<(&Measure, usize)> {
        let mut out: Vec<(&Measure, usize)> = Vec::new();
        for m in &self.measures {
            match out.iter_mut().find(|(g, _)| *g == m) {
                Some((_, k)) => *k += 1,
                None => out.push((m, 1)),
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularArray {
    pub rows: Vec<Row>,
}

impl TriangularArray {
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        let arr = TriangularArray { rows };
        arr.validate()?;
        Ok(arr)
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InvalidMeasure("array without rows".into()));
        }
        self.rows.iter().try_for_each(Row::validate)
    }

    /// `n` of the row at `index`.
    pub fn label(&self, index: usize) -> usize {
        self.rows[index].n.unwrap_or(index + 1)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let arr: TriangularArray = serde_json::from_reader(BufReader::new(file))?;
        arr.validate()?;
        Ok(arr)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }
}

/// Recipes for the arrays used in experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrayKind {
    /// `n` copies of `½δ_{-1/√n} + ½δ_{1/√n}`.
    IidScaledBernoulli,
    /// `n` copies of `(1 - λ/n)δ_0 + (λ/n)δ_1`.
    PoissonBernoulli { lambda: f64 },
    /// `n` copies of the centered measure dilated by `1/√n`.
    IidScaledFromMeasure { measure: Measure },
    /// Rows given explicitly.
    CustomRows { rows: Vec<Row> },
}

/// Rows `n` for every `n` in `ns`; custom rows are returned as given.
pub fn build_array(kind: &ArrayKind, ns: &[usize]) -> Result<TriangularArray> {
    if let ArrayKind::CustomRows { rows } = kind {
        return TriangularArray::new(rows.clone());
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Config("row list must be nonempty with n >= 1".into()));
    }
    let rows = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let m = match kind {
                ArrayKind::IidScaledBernoulli => {
                    let a = 1.0 / nf.sqrt();
                    Measure::from_atoms(&[(-a, 0.5), (a, 0.5)])?
                }
                ArrayKind::PoissonBernoulli { lambda } => {
                    let p = lambda / nf;
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::Config(format!(
                            "poisson_bernoulli needs 0 < λ/n <= 1, got {p} at n = {n}"
                        )));
                    }
                    if p == 1.0 {
                        Measure::dirac(1.0)
                    } else {
                        Measure::from_atoms(&[(0.0, 1.0 - p), (1.0, p)])?
                    }
                }
                ArrayKind::IidScaledFromMeasure { measure } => {
                    let m = measure.clone().normalized()?;
                    m.shift(-m.mean()).dilate(1.0 / nf.sqrt())?
                }
                ArrayKind::CustomRows { .. } => unreachable!(),
            };
            Row::new(0.0, vec![m; n], Some(n))
        })
        .collect::<Result<Vec<_>>>()?;
    TriangularArray::new(rows)
}

/// `max_k μ_k{|t| >= eps}` for every row.
pub fn max_tail_masses(arr: &TriangularArray, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    Ok(arr
        .rows
        .iter()
        .map(|r| r.groups().iter().map(|(m, _)| m.tail_mass(eps)).fold(0.0, f64::max))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Infinitesimality {
    pub max_tail: Vec<f64>,
    /// Row maxima are non-increasing and either vanish or strictly drop.
    pub infinitesimal: bool,
}

pub fn is_infinitesimal(arr: &TriangularArray, eps: f64) -> Result<Infinitesimality> {
    let max_tail = max_tail_masses(arr, eps)?;
    let monotone = max_tail.windows(2).all(|w| w[1] <= w[0]);
    let last = *max_tail.last().expect("nonempty array");
    let infinitesimal = monotone && (last == 0.0 || last < max_tail[0]);
    Ok(Infinitesimality {
        max_tail,
        infinitesimal,
    })
}

/// `a = ∫_{|t|<1} t dμ`, boundary atoms excluded.
pub fn truncated_mean(m: &Measure) -> f64 {
    m.integrate_real_where(|t| t.abs() < 1.0, |t| t)
        .expect("finite integrand")
}

#[derive(Clone, Debug)]
pub struct RowCentering {
    pub a: Vec<f64>,
    pub centered: Vec<Measure>,
}

impl RowCentering {
    pub fn max_abs_a(&self) -> f64 {
        self.a.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

pub fn centering(row: &Row) -> RowCentering {
    let (a, centered) = row
        .measures
        .iter()
        .map(|m| {
            let a = truncated_mean(m);
            (a, m.shift(-a))
        })
        .unzip();
    RowCentering { a, centered }
}

/// `f(z) = ∫ tz/(z - t) dμ̄(t)`.
pub fn f_nk(centered: &Measure, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain { op: "f_nk", z });
    }
    centered.integrate(|t| t * z / (z - t))
}

/// `z²[G_μ̄(z) - 1/z]` through the Cauchy kernel.
pub fn f_nk_cauchy(centered: &Measure, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain { op: "f_nk", z });
    }
    let parts = kernel::cauchy_parts(centered, z);
    Ok(z * z * parts.excess + z * (centered.total_mass() - 1.0))
}

pub fn b_nk(mu: &Measure, a: f64, y: f64) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(Error::Config(format!("b_nk needs y >= 1, got {y}")));
    }
    let y2 = y * y;
    mu.integrate_real_where(
        |t| t.abs() >= 1.0,
        |t| {
            let s = t - a;
            a + s * y2 / (y2 + s * s)
        },
    )
}

#[derive(Clone, Debug)]
pub struct Condition3Data {
    pub sigma_n: Measure,
    pub gamma_n: f64,
    /// Running supremum of the mass of `σ_m` over rows up to this one.
    pub l: f64,
    /// Summands of `σ_n` with multiplicities, before superposition.
    pub parts: Vec<(Measure, f64)>,
}

impl Condition3Data {
    /// `∫ f dσ_n`, summed over the parts.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64 + Copy,
    {
        self.parts.iter().map(|(m, k)| Ok(*k * m.integrate(f)?)).sum()
    }
}

fn row_sigma(row: &Row) -> Result<(Vec<(Measure, f64)>, f64)> {
    let mut parts = Vec::new();
    let mut gamma = row.c;
    for (m, k) in row.groups() {
        let a = truncated_mean(m);
        let centered = m.shift(-a);
        let drift = centered.integrate_real(|t| t / (1.0 + t * t))?;
        gamma += k as f64 * (a + drift);
        let tilted = centered.reweight(|t| t * t / (1.0 + t * t))?;
        let atoms: Vec<_> = tilted.atoms().iter().copied().filter(|a| a.w > 0.0).collect();
        let tilted = Measure::finite(atoms, tilted.density().cloned())?;
        if tilted.total_mass() > 0.0 {
            parts.push((tilted, k as f64));
        }
    }
    Ok((parts, gamma))
}

fn assemble(parts: &[(Measure, f64)]) -> Result<Measure> {
    let scaled = parts.iter().map(|(m, k)| m.scaled(*k)).collect::<Result<Vec<_>>>()?;
    match scaled.len() {
        0 => Ok(Measure::zero()),
        1 => Ok(scaled.into_iter().next().expect("one part")),
        _ => Measure::superpose(&scaled),
    }
}

/// `(σ_n, γ_n)` for the row at `index`, with `L` taken over rows `0..=index`.
pub fn condition3(arr: &TriangularArray, index: usize) -> Result<Condition3Data> {
    if index >= arr.rows.len() {
        return Err(Error::Config(format!("row {index} out of range")));
    }
    let mut l: f64 = 0.0;
    let mut last = None;
    for row in &arr.rows[..=index] {
        let (parts, gamma) = row_sigma(row)?;
        let sigma = assemble(&parts)?;
        l = l.max(sigma.total_mass());
        last = Some((sigma, gamma, parts));
    }
    let (sigma_n, gamma_n, parts) = last.expect("at least one row");
    Ok(Condition3Data {
        sigma_n,
        gamma_n,
        l,
        parts,
    })
}

/// `|(c_n + Σ_k [a_k + f_k(z)]) - (γ_n + ∫ (1 + tz)/(z - t) dσ_n)|`.
pub fn bridge_gap(row: &Row, data: &Condition3Data, z: Complex64) -> Result<f64> {
    let mut left = Complex64::new(row.c, 0.0);
    for (m, k) in row.groups() {
        let a = truncated_mean(m);
        left += k as f64 * (a + f_nk(&m.shift(-a), z)?);
    }
    let right = data.gamma_n + data.integrate(|t| (1.0 + t * z) / (z - t))?;
    Ok((left - right).norm())
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Lemma31Violations {
    /// `max_k (|Re[f(iy) - b(y)]| - 2|Im f(iy)|)⁺`.
    pub first: f64,
    /// `max_k (|Re f(iy)| - (3 + 6y)|Im f(iy)|)⁺`, zero when the precondition fails.
    pub second: f64,
    /// Whether `max_k |a_k| <= 1/2`.
    pub second_applies: bool,
}

pub fn lemma31_check(row: &Row, y: f64) -> Result<Lemma31Violations> {
    if !(y >= 1.0) {
        return Err(Error::Config(format!("lemma31_check needs y >= 1, got {y}")));
    }
    let z = Complex64::new(0.0, y);
    let groups = row.groups();
    let a: Vec<f64> = groups.iter().map(|(m, _)| truncated_mean(m)).collect();
    let second_applies = a.iter().all(|a| a.abs() <= 0.5);
    let mut out = Lemma31Violations {
        second_applies,
        ..Lemma31Violations::default()
    };
    for ((m, _), &a) in groups.iter().zip(&a) {
        let f = f_nk(&m.shift(-a), z)?;
        let b = b_nk(m, a, y)?;
        out.first = out.first.max((f - b).re.abs() - 2.0 * f.im.abs());
        if second_applies {
            out.second = out.second.max(f.re.abs() - (3.0 + 6.0 * y) * f.im.abs());
        }
    }
    Ok(out)
}

/// `|Σ_k φ_{μ_k}(iy) - Σ_k [a_k + f_k(iy)]|`; the shift `c_n` cancels.
pub fn lemma32_gap(row: &Row, y: f64, cone: &Cone) -> Result<f64> {
    let z = Complex64::new(0.0, y);
    let mut gap = Complex64::new(0.0, 0.0);
    for (m, k) in row.groups() {
        let a = truncated_mean(m);
        let phi = transform::voiculescu_in(m, z, cone)?;
        gap += k as f64 * (phi - a - f_nk(&m.shift(-a), z)?);
    }
    Ok(gap.norm())
}

/// `Σ_k |Im f_k(iy)|`.
pub fn sum_abs_im_f(row: &Row, y: f64) -> Result<f64> {
    let z = Complex64::new(0.0, y);
    row.groups()
        .iter()
        .map(|(m, k)| {
            let a = truncated_mean(m);
            Ok(*k as f64 * f_nk(&m.shift(-a), z)?.im.abs())
        })
        .sum()
}

/// `max_k |v_k(w)|` with `φ_{μ_k}(w) = w²[G_{μ_k}(w) - 1/w](1 + v_k(w))`.
/// Point masses have `φ` constant and no residual to measure; they are skipped.
pub fn max_prop23_residual(row: &Row, w: Complex64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (m, _) in row.groups() {
        if m.is_atomic() && m.atoms().len() == 1 {
            continue;
        }
        worst = worst.max(transform::prop23_residual(m, w)?.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Density};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn row_of(m: Measure, k: usize, shift: f64) -> Row {
        Row::new(shift, vec![m; k], None).unwrap()
    }

    #[test]
    fn infinitesimality_examples() {
        let ones = TriangularArray::new((1..=4).map(|k| row_of(Measure::dirac(1.0), k, 0.0)).collect()).unwrap();
        let r = is_infinitesimal(&ones, 0.5).unwrap();
        assert_eq!(r.max_tail, vec![1.0; 4]);
        assert!(!r.infinitesimal);

        let bern = build_array(&ArrayKind::IidScaledBernoulli, &[1, 2, 3, 4, 5, 8, 16]).unwrap();
        let r = is_infinitesimal(&bern, 0.5).unwrap();
        assert_eq!(&r.max_tail[4..], &[0.0, 0.0, 0.0]);
        assert!(r.infinitesimal);

        let zeros = TriangularArray::new((1..=3).map(|k| row_of(Measure::dirac(0.0), k, 0.0)).collect()).unwrap();
        let r = is_infinitesimal(&zeros, 0.1).unwrap();
        assert!(r.max_tail.iter().all(|&v| v == 0.0) && r.infinitesimal);
    }

    #[test]
    fn centering_examples() {
        let bern = crate::measure::laws::symmetric_bernoulli(1.0);
        let rc = centering(&row_of(bern.clone(), 3, 0.0));
        assert!(rc.a.iter().all(|&a| a == 0.0));
        assert!(rc.centered.iter().all(|m| *m == bern));

        let pois = Measure::from_atoms(&[(0.0, 0.9), (1.0, 0.1)]).unwrap();
        let rc = centering(&row_of(pois.clone(), 2, 0.0));
        assert!(rc.a.iter().all(|&a| a == 0.0) && rc.centered[0] == pois);

        let rc = centering(&row_of(Measure::dirac(0.3), 1, 0.0));
        assert!((rc.a[0] - 0.3).abs() < 1e-15);
        assert!(rc.centered[0].atoms()[0].x.abs() < 1e-15);
        assert!(rc.max_abs_a() <= 1.0);
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_nk(&Measure::dirac(0.0), c(0.3, 1.2)).unwrap(), c(0.0, 0.0));
        let m = crate::measure::laws::symmetric_bernoulli(0.5);
        let z = c(0.0, 1.0);
        let direct = 0.5 * (-0.5 * z / (z + 0.5) + 0.5 * z / (z - 0.5));
        let a = f_nk(&m, z).unwrap();
        let b = f_nk_cauchy(&m, z).unwrap();
        assert!((a - direct).norm() < 1e-15);
        assert!((a - b).norm() < 1e-12);
        assert!((a - c(0.0, -0.2)).norm() < 1e-15, "{a}");
    }

    #[test]
    fn f_forms_agree_for_densities() {
        let m = Measure::probability(
            vec![Atom { x: 0.2, w: 0.4 }],
            Some(Density::new(-0.5, 0.7, (0..121).map(|j| 1.0 + j as f64 * 0.01).collect()).unwrap()),
        )
        .unwrap();
        for z in [c(0.0, 1.0), c(0.3, 0.2), c(-2.0, 5.0)] {
            let a = f_nk(&m, z).unwrap();
            let b = f_nk_cauchy(&m, z).unwrap();
            assert!(a.im <= 0.0);
            // trapezoid against the exact piecewise-linear kernel
            assert!((a - b).norm() < 1e-4, "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn b_examples() {
        let inner = Measure::from_atoms(&[(-0.9, 0.5), (0.4, 0.5)]).unwrap();
        assert_eq!(b_nk(&inner, truncated_mean(&inner), 3.0).unwrap(), 0.0);
        assert!((b_nk(&Measure::dirac(2.0), 0.0, 1.0).unwrap() - 0.4).abs() < 1e-15);
        let sym = crate::measure::laws::symmetric_bernoulli(2.0);
        for y in [1.0, 2.0, 7.5] {
            assert!(b_nk(&sym, 0.0, y).unwrap().abs() < 1e-15);
        }
        assert!(b_nk(&sym, 0.0, 0.5).is_err());
    }

    #[test]
    fn condition3_examples() {
        let arr = build_array(&ArrayKind::IidScaledBernoulli, &[4]).unwrap();
        let d = condition3(&arr, 0).unwrap();
        assert_eq!(d.sigma_n.atoms().len(), 2);
        for a in d.sigma_n.atoms() {
            assert!((a.x.abs() - 0.5).abs() < 1e-15 && (a.w - 0.4).abs() < 1e-15);
        }
        assert!(d.gamma_n.abs() < 1e-15);

        let arr = build_array(&ArrayKind::PoissonBernoulli { lambda: 1.0 }, &[4, 16, 64, 256]).unwrap();
        for i in 0..4 {
            let d = condition3(&arr, i).unwrap();
            assert_eq!(d.sigma_n.atoms().len(), 1);
            let a = d.sigma_n.atoms()[0];
            assert!(a.x == 1.0 && (a.w - 0.5).abs() < 1e-12);
            assert!((d.gamma_n - 0.5).abs() < 1e-12);
            assert!((d.l - 0.5).abs() < 1e-12);
        }

        let arr = TriangularArray::new(vec![row_of(Measure::dirac(0.0), 5, 1.25)]).unwrap();
        let d = condition3(&arr, 0).unwrap();
        assert_eq!(d.sigma_n.total_mass(), 0.0);
        assert_eq!(d.gamma_n, 1.25);
    }

    #[test]
    fn sigma_mass_matches_row_sum() {
        let dens = Measure::from_density(
            -1.5,
            2.0,
            (0..351).map(|j| 1.0 + (j as f64 * 0.03).sin().abs()).collect(),
        )
        .unwrap();
        let other = Measure::from_atoms(&[(-2.0, 0.25), (0.5, 0.75)]).unwrap();
        let row = Row::new(0.3, vec![dens.clone(), other.clone(), dens], None).unwrap();
        let arr = TriangularArray::new(vec![row.clone()]).unwrap();
        let d = condition3(&arr, 0).unwrap();
        let rc = centering(&row);
        let expect: f64 = rc
            .centered
            .iter()
            .map(|m| m.integrate_real(|t| t * t / (1.0 + t * t)).unwrap())
            .sum();
        assert!((d.sigma_n.total_mass() - expect).abs() < 1e-12);
        for z in [c(0.1, 0.5), c(-3.0, 2.0), c(0.0, 10.0)] {
            assert!(bridge_gap(&row, &d, z).unwrap() < 1e-9);
        }
    }

    #[test]
    fn lemma31_examples() {
        for y in [1.0, 2.0, 5.0] {
            let v = lemma31_check(&row_of(Measure::dirac(0.0), 2, 0.0), y).unwrap();
            assert_eq!((v.first, v.second), (0.0, 0.0));
            let bern = build_array(&ArrayKind::IidScaledBernoulli, &[16]).unwrap();
            let v = lemma31_check(&bern.rows[0], y).unwrap();
            assert!(v.second_applies && v.first <= 1e-9 && v.second <= 1e-9, "{v:?}");
        }
        let v = lemma31_check(&row_of(Measure::dirac(0.3), 1, 0.0), 1.0).unwrap();
        assert!(v.first <= 1e-9 && v.second <= 1e-9);
    }

    #[test]
    fn builders() {
        let arr = build_array(&ArrayKind::IidScaledBernoulli, &[1, 2, 3]).unwrap();
        for (i, row) in arr.rows.iter().enumerate() {
            let n = i + 1;
            assert_eq!(row.k(), n);
            assert_eq!(arr.label(i), n);
            let a = 1.0 / (n as f64).sqrt();
            assert_eq!(row.measures[0], Measure::from_atoms(&[(-a, 0.5), (a, 0.5)]).unwrap());
        }
        let arr = build_array(&ArrayKind::PoissonBernoulli { lambda: 1.0 }, &[10]).unwrap();
        assert_eq!(arr.rows[0].k(), 10);
        let a = arr.rows[0].measures[0].atoms();
        assert!((a[0].w - 0.9).abs() < 1e-15 && a[1].x == 1.0 && (a[1].w - 0.1).abs() < 1e-15);

        let u = crate::measure::laws::uniform(0.0, 2.0, 201).unwrap();
        let arr = build_array(&ArrayKind::IidScaledFromMeasure { measure: u }, &[4]).unwrap();
        let m = &arr.rows[0].measures[0];
        assert!(m.mean().abs() < 1e-12);
        assert!((m.variance() - 1.0 / 12.0).abs() < 1e-4);
    }

    #[test]
    fn array_file_round_trip() {
        let arr = TriangularArray::new(vec![
            row_of(crate::measure::laws::symmetric_bernoulli(0.5), 2, 0.25),
            Row::new(
                -1.0,
                vec![Measure::from_density(0.0, 1.0, vec![1.0; 11]).unwrap()],
                Some(7),
            )
            .unwrap(),
        ])
        .unwrap();
        let dir = std::env::temp_dir().join(format!("freelimit-array-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("array.json");
        arr.write(&path).unwrap();
        assert_eq!(TriangularArray::read(&path).unwrap(), arr);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"rows\":[{\"c\":0.25,\"measures\":["));
        std::fs::remove_dir_all(&dir).unwrap();
        let custom = build_array(&ArrayKind::CustomRows { rows: arr.rows.clone() }, &[]).unwrap();
        assert_eq!(custom, arr);
    }

    #[test]
    fn residual_and_gap_shrink_along_bernoulli_rows() {
        let arr = build_array(&ArrayKind::IidScaledBernoulli, &[4, 16, 64, 256]).unwrap();
        let cone = Cone::new(1.0, 1.0).unwrap();
        let mut last_v = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        for row in &arr.rows {
            let v = max_prop23_residual(row, c(0.0, 5.0)).unwrap();
            let gap = lemma32_gap(row, 5.0, &cone).unwrap();
            assert!(v < last_v && gap < last_gap, "{v} {gap}");
            last_v = v;
            last_gap = gap;
        }
        assert!(last_v <= 0.02);
    }
}
