//! Finite Borel measures on the real line.
//!
//! A [`Measure`] is a finite list of atoms plus an optional density sampled on a
//! uniform grid and interpreted piecewise-linearly. Probability measures, the
//! Lévy-Hinčin generator measures and the reweighted measures built from
//! triangular arrays all share this one representation.

mod io;
pub mod laws;
mod metric;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_finite, read_probability, write_json, MeasureFile};
pub use metric::{kolmogorov_distance, levy_distance};

/// Mass tolerance for a measure to count as a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Default number of density samples for measures built from closed forms.
pub const DEFAULT_POINTS: usize = 2048;

/// A uniform grid `lo = x_0 < x_1 < ... < x_{n-1} = hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    lo: f64,
    hi: f64,
    n_points: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.lo, raw.hi, raw.n_points)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            lo: g.lo,
            hi: g.hi,
            n_points: g.n_points,
        }
    }
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(GridSpec { lo, hi, n_points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.n_points {
            self.hi
        } else {
            self.lo + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }
}

/// A point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

/// Nonnegative samples on a uniform grid, linear between nodes, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Density {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let grid =
            GridSpec::new(lo, hi, values.len()).map_err(|e| Error::InvalidMeasure(format!("density support: {e}")))?;
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "density sample {v} is not a finite nonnegative number"
            )));
        }
        Ok(Density { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn lo(&self) -> f64 {
        self.grid.lo
    }

    pub fn hi(&self) -> f64 {
        self.grid.hi
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, j: usize) -> f64 {
        self.grid.node(j)
    }

    /// Trapezoid weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let h = self.step();
        if j == 0 || j + 1 == self.values.len() {
            0.5 * h
        } else {
            h
        }
    }

    /// Piecewise-linear interpolant.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        let h = self.step();
        let n = self.values.len();
        let j = (((x - self.lo()) / h).floor() as usize).min(n - 2);
        let s = (x - self.node(j)) / h;
        self.values[j] * (1.0 - s) + self.values[j + 1] * s
    }

    pub fn mass(&self) -> f64 {
        (0..self.values.len()).map(|j| self.weight(j) * self.values[j]).sum()
    }

    fn cumulative(&self) -> Vec<f64> {
        let h = self.step();
        let mut cum = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for pair in self.values.windows(2) {
            acc += 0.5 * h * (pair[0] + pair[1]);
            cum.push(acc);
        }
        cum
    }
}

/// A finite positive Borel measure: atoms plus an optional piecewise-linear density.
///
/// Values are immutable once built. Atom locations are strictly increasing and
/// every stored atom has positive mass.
#[derive(Clone, Debug)]
pub struct Measure {
    atoms: Vec<Atom>,
    density: Option<Density>,
    total_mass: f64,
    atom_cum: Vec<f64>,
    density_cum: Vec<f64>,
}

impl PartialEq for Measure {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.density == other.density
    }
}

impl Measure {
    /// A finite measure with no constraint on its total mass.
    pub fn finite(atoms: Vec<Atom>, density: Option<Density>) -> Result<Self> {
        let atoms = canonical_atoms(atoms)?;
        let density = density.filter(|d| d.values.iter().any(|&v| v > 0.0));
        let mut atom_cum = Vec::with_capacity(atoms.len() + 1);
        let mut acc = 0.0;
        atom_cum.push(0.0);
        for a in &atoms {
            acc += a.w;
            atom_cum.push(acc);
        }
        let density_cum = density.as_ref().map(Density::cumulative).unwrap_or_default();
        let total_mass = acc + density_cum.last().copied().unwrap_or(0.0);
        if !total_mass.is_finite() {
            return Err(Error::InvalidMeasure("total mass is not finite".into()));
        }
        Ok(Measure {
            atoms,
            density,
            total_mass,
            atom_cum,
            density_cum,
        })
    }

    /// A probability measure; the input is rescaled to total mass one.
    pub fn probability(atoms: Vec<Atom>, density: Option<Density>) -> Result<Self> {
        Measure::finite(atoms, density)?.normalized()
    }

    pub fn zero() -> Self {
        Measure::finite(Vec::new(), None).expect("empty measure is valid")
    }

    pub fn dirac(x: f64) -> Self {
        Measure::from_atoms(&[(x, 1.0)]).expect("point mass is valid")
    }

    /// Probability measure from `(location, mass)` pairs (normalized).
    pub fn from_atoms(pairs: &[(f64, f64)]) -> Result<Self> {
        let atoms = pairs.iter().map(|&(x, w)| Atom { x, w }).collect();
        Measure::probability(atoms, None)
    }

    /// Probability measure with a density only (normalized).
    pub fn from_density(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        Measure::probability(Vec::new(), Some(Density::new(lo, hi, values)?))
    }

    pub fn normalized(self) -> Result<Self> {
        let m = self.total_mass;
        if !(m > 0.0) {
            return Err(Error::InvalidMeasure(format!("cannot normalize a measure of mass {m}")));
        }
        if m == 1.0 {
            return Ok(self);
        }
        self.scaled(1.0 / m)
    }

    /// Multiplies every mass by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                x: a.x,
                w: a.w * factor,
            })
            .collect();
        let density = match &self.density {
            Some(d) => Some(Density::new(
                d.lo(),
                d.hi(),
                d.values.iter().map(|v| v * factor).collect(),
            )?),
            None => None,
        };
        Measure::finite(atoms, density)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= PROBABILITY_TOL
    }

    pub fn is_atomic(&self) -> bool {
        self.density.is_none()
    }

    /// Smallest interval containing every atom and the density support.
    /// `None` for the zero measure.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let (Some(first), Some(last)) = (self.atoms.first(), self.atoms.last()) {
            lo = first.x;
            hi = last.x;
        }
        if let Some(d) = &self.density {
            lo = lo.min(d.lo());
            hi = hi.max(d.hi());
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Mass of `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.x <= x);
        self.atom_cum[k] + self.density_cdf(x)
    }

    /// Mass of `(-inf, x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.x < x);
        self.atom_cum[k] + self.density_cdf(x)
    }

    fn density_cdf(&self, x: f64) -> f64 {
        let Some(d) = &self.density else { return 0.0 };
        if x <= d.lo() {
            return 0.0;
        }
        if x >= d.hi() {
            return *self.density_cum.last().unwrap();
        }
        let h = d.step();
        let n = d.values.len();
        let j = (((x - d.lo()) / h).floor() as usize).min(n - 2);
        let s = x - d.node(j);
        let (v0, v1) = (d.values[j], d.values[j + 1]);
        self.density_cum[j] + v0 * s + (v1 - v0) * s * s / (2.0 * h)
    }

    /// `sum_atoms w f(x) + trapezoid(f * density)`.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        self.integrate_where(|_| true, f)
    }

    /// Integral over the set `{t : keep(t)}`; density nodes are kept or dropped
    /// whole, so complementary sets split the trapezoid sum exactly.
    pub fn integrate_where<P, F>(&self, keep: P, f: F) -> Result<Complex64>
    where
        P: Fn(f64) -> bool,
        F: Fn(f64) -> Complex64,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.atoms.iter().filter(|a| keep(a.x)) {
            let v = f(a.x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite {
                    op: "integrate",
                    t: a.x,
                });
            }
            acc += a.w * v;
        }
        if let Some(d) = &self.density {
            for (j, &p) in d.values.iter().enumerate() {
                let x = d.node(j);
                if p == 0.0 || !keep(x) {
                    continue;
                }
                let v = f(x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite { op: "integrate", t: x });
                }
                acc += d.weight(j) * p * v;
            }
        }
        Ok(acc)
    }

    pub fn integrate_real<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        Ok(self.integrate(|t| Complex64::new(f(t), 0.0))?.re)
    }

    pub fn integrate_real_where<P, F>(&self, keep: P, f: F) -> Result<f64>
    where
        P: Fn(f64) -> bool,
        F: Fn(f64) -> f64,
    {
        Ok(self.integrate_where(keep, |t| Complex64::new(f(t), 0.0))?.re)
    }

    /// Mass of `{t : |t| >= eps}`.
    pub fn tail_mass(&self, eps: f64) -> f64 {
        let inside = self.cdf_left(eps) - self.cdf(-eps);
        (self.total_mass - inside.max(0.0)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.integrate_real(|t| t).unwrap_or(f64::NAN) / self.total_mass
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate_real(|t| (t - m) * (t - m)).unwrap_or(f64::NAN) / self.total_mass
    }

    /// Translation by `a`: the image of the measure under `t -> t + a`.
    pub fn shift(&self, a: f64) -> Measure {
        let atoms = self.atoms.iter().map(|at| Atom { x: at.x + a, w: at.w }).collect();
        let density = self.density.as_ref().map(|d| Density {
            grid: GridSpec {
                lo: d.lo() + a,
                hi: d.hi() + a,
                n_points: d.values.len(),
            },
            values: d.values.clone(),
        });
        self.rebuilt(atoms, density)
    }

    /// Image under `t -> s t` for `s > 0`.
    pub fn dilate(&self, s: f64) -> Result<Measure> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "dilation factor must be positive, got {s}"
            )));
        }
        let atoms = self.atoms.iter().map(|at| Atom { x: at.x * s, w: at.w }).collect();
        let density = match &self.density {
            Some(d) => Some(Density::new(
                d.lo() * s,
                d.hi() * s,
                d.values.iter().map(|v| v / s).collect(),
            )?),
            None => None,
        };
        Measure::finite(atoms, density)
    }

    /// `dρ(t) = weight(t) dμ(t)`, with `weight >= 0`; density samples are
    /// reweighted node by node.
    pub fn reweight<F>(&self, weight: F) -> Result<Measure>
    where
        F: Fn(f64) -> f64,
    {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                x: a.x,
                w: a.w * weight(a.x),
            })
            .collect();
        let density = match &self.density {
            Some(d) => {
                let values = d
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * weight(d.node(j)))
                    .collect();
                Some(Density::new(d.lo(), d.hi(), values)?)
            }
            None => None,
        };
        Measure::finite(atoms, density)
    }

    /// Sum of finite measures. Densities on identical grids are added node by
    /// node; otherwise they are resampled on a common grid at the finest spacing.
    pub fn superpose(parts: &[Measure]) -> Result<Measure> {
        let atoms: Vec<Atom> = parts.iter().flat_map(|m| m.atoms.iter().copied()).collect();
        let densities: Vec<&Density> = parts.iter().filter_map(|m| m.density.as_ref()).collect();
        let density = match densities.as_slice() {
            [] => None,
            [first, rest @ ..] if rest.iter().all(|d| d.grid == first.grid) => {
                let mut values = first.values.clone();
                for d in rest {
                    for (v, w) in values.iter_mut().zip(&d.values) {
                        *v += w;
                    }
                }
                Some(Density::new(first.lo(), first.hi(), values)?)
            }
            all => {
                let lo = all.iter().map(|d| d.lo()).fold(f64::INFINITY, f64::min);
                let hi = all.iter().map(|d| d.hi()).fold(f64::NEG_INFINITY, f64::max);
                let h = all.iter().map(|d| d.step()).fold(f64::INFINITY, f64::min);
                let n = (((hi - lo) / h).ceil() as usize + 1).max(2);
                let grid = GridSpec::new(lo, hi, n)?;
                // cell averages keep the mass of every part exact
                let pieces: Vec<Measure> = all
                    .iter()
                    .map(|d| Measure::finite(Vec::new(), Some((*d).clone())))
                    .collect::<Result<_>>()?;
                let hg = grid.step();
                let values = (0..n)
                    .map(|j| {
                        let left = if j == 0 { lo } else { grid.node(j) - 0.5 * hg };
                        let right = if j + 1 == n { hi } else { grid.node(j) + 0.5 * hg };
                        let mass: f64 = pieces.iter().map(|p| p.cdf(right) - p.cdf(left)).sum();
                        (mass / (right - left)).max(0.0)
                    })
                    .collect();
                Some(Density::new(lo, hi, values)?)
            }
        };
        Measure::finite(atoms, density)
    }

    fn rebuilt(&self, atoms: Vec<Atom>, density: Option<Density>) -> Measure {
        let mut m = Measure::finite(atoms, density).expect("rebuild of a valid measure");
        // keep the exact cached mass so translations preserve it bit for bit
        m.total_mass = self.total_mass;
        m
    }
}

/// Sorts, merges coincident locations and drops zero masses.
fn canonical_atoms(mut atoms: Vec<Atom>) -> Result<Vec<Atom>> {
    for a in &atoms {
        if !a.x.is_finite() {
            return Err(Error::InvalidMeasure(format!("atom location {} is not finite", a.x)));
        }
        if !(a.w.is_finite() && a.w >= 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "atom mass {} at {} is not a finite nonnegative number",
                a.w, a.x
            )));
        }
    }
    atoms.retain(|a| a.w > 0.0);
    atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last) if last.x == a.x => last.w += a.w,
            _ => merged.push(a),
        }
    }
    Ok(merged)
}
