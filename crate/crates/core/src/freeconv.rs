//! Free additive convolution through subordination.
//!
//! For `μ_1 ⊞ ... ⊞ μ_N` the subordination functions satisfy
//! `ω_j = z + Σ_{i≠j} H_i(ω_i)` with `H = F - id`, and
//! `F_{⊞}(z) = F_{μ_j}(ω_j(z))` for every `j`. Identical factors share one
//! `ω`, so a row of `k` copies of one law is a single scalar equation. The
//! system is solved pointwise by Newton's method with a damped fixed-point
//! fallback, continued along the evaluation line, and the result is
//! recovered by Stieltjes inversion.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Atom, GridSpec, Measure, DEFAULT_POINTS};
use crate::sweep::{self, PointSolver};
use crate::transform::kernel::Kernel;
use crate::transform::{stieltjes_invert_with, voiculescu, CauchyEvaluable, StieltjesOptions};

/// Fixed-point iterations allowed before a point is declared stalled.
pub const MAX_ITERATIONS: usize = 500;

/// Damping of the fixed-point fallback.
pub const DAMPING: f64 = 0.5;

const NEWTON_ITERATIONS: usize = 60;
const COARSE_POINTS: usize = 512;
const COARSE_ROUNDS: usize = 4;
const COARSE_MASS_SLACK: f64 = 0.02;
/// Accepted residual, relative to the Newton tolerance, once the iteration stagnates.
const STAGNATION_SLACK: f64 = 1e5;
/// Evaluation height as a multiple of the output grid step.
pub(crate) const EPS_PER_STEP: f64 = 1.0;

/// Solution of the two-measure subordination system at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SubordinationState {
    pub z: Complex64,
    pub omega1: Complex64,
    pub omega2: Complex64,
    pub residual: f64,
}

/// Distinct factors with multiplicities; point masses are folded into a shift.
#[derive(Clone, Debug)]
struct Factors {
    groups: Vec<(Measure, f64)>,
    shift: f64,
}

impl Factors {
    fn collect(ms: &[Measure]) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::InvalidMeasure("free convolution of an empty list".into()));
        }
        let mut groups: Vec<(Measure, f64)> = Vec::new();
        let mut shift = 0.0;
        for m in ms {
            if !m.is_probability() {
                return Err(Error::InvalidMeasure(format!(
                    "free convolution needs probability measures, got total mass {}",
                    m.total_mass()
                )));
            }
            if m.is_atomic() && m.atoms().len() == 1 {
                shift += m.atoms()[0].x;
                continue;
            }
            match groups.iter_mut().find(|(g, _)| g == m) {
                Some((_, k)) => *k += 1.0,
                None => groups.push((m.clone(), 1.0)),
            }
        }
        Ok(Factors { groups, shift })
    }

    /// Atoms of the convolution: `Σ x_j` carries `1 - Σ (1 - μ_j{x_j})` when
    /// that is positive. Copies of one factor must use the same atom.
    fn atoms(&self) -> Vec<Atom> {
        fn walk(groups: &[(Measure, f64)], at: usize, x: f64, deficit: f64, out: &mut Vec<Atom>) {
            if at == groups.len() {
                out.push(Atom { x, w: 1.0 - deficit });
                return;
            }
            let (m, k) = &groups[at];
            for a in m.atoms() {
                let d = deficit + k * (1.0 - a.w);
                if d < 1.0 - 1e-12 {
                    walk(groups, at + 1, x + k * a.x, d, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.groups, 0, 0.0, 0.0, &mut out);
        out.sort_by(|a, b| a.x.total_cmp(&b.x));
        out
    }

    /// Interval containing the support of the convolution (before the shift).
    fn window(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (m, k) in &self.groups {
            let (a, b) = m.support_bounds().expect("probability measure has support");
            lo += k * a;
            hi += k * b;
        }
        (lo, hi)
    }

    /// Moment window `mean ± (3 sd + 2 reach)`, where `reach` is the largest
    /// distance of a factor's support from its mean.
    fn moment_window(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        let mut reach: f64 = 0.0;
        for (m, k) in &self.groups {
            let mu = m.mean();
            let (a, b) = m.support_bounds().expect("probability measure has support");
            mean += k * mu;
            var += k * m.variance();
            reach = reach.max((mu - a).max(b - mu));
        }
        let r = 3.0 * var.sqrt() + 2.0 * reach;
        (mean - r, mean + r)
    }
}

/// Pointwise solver for the grouped subordination system.
struct Subordination<'a> {
    groups: &'a [(Measure, f64)],
    kernels: Vec<Kernel<'a>>,
    means: Vec<f64>,
    total_mean: f64,
    anchor: f64,
    /// Group whose `G_j(ω_j)` is reported.
    lead: usize,
}

struct Eval {
    residual: Vec<Complex64>,
    norm: f64,
    h_prime: Vec<Complex64>,
}

impl<'a> Subordination<'a> {
    fn new(groups: &'a [(Measure, f64)]) -> Self {
        let means: Vec<f64> = groups.iter().map(|(m, _)| m.mean()).collect();
        let total_mean = groups.iter().zip(&means).map(|((_, k), m)| k * m).sum();
        let spread: f64 = groups.iter().map(|(m, k)| k * m.variance()).sum::<f64>().sqrt();
        let lead = (0..groups.len())
            .max_by(|&a, &b| groups[a].1.total_cmp(&groups[b].1))
            .unwrap_or(0);
        Subordination {
            groups,
            kernels: groups.iter().map(|(m, _)| Kernel::new(m)).collect(),
            means,
            total_mean,
            anchor: 10.0 * spread.max(1.0),
            lead,
        }
    }

    fn h(&self, j: usize, w: Complex64) -> (Complex64, Complex64) {
        let parts = self.kernels[j].parts(w);
        (parts.f_minus_z(w, self.groups[j].0.total_mass()), parts.df() - 1.0)
    }

    fn eval(&self, z: Complex64, omega: &[Complex64]) -> Option<Eval> {
        let hs: Vec<(Complex64, Complex64)> = omega.iter().enumerate().map(|(j, &w)| self.h(j, w)).collect();
        let sum: Complex64 = hs.iter().zip(self.groups).map(|((h, _), (_, k))| k * h).sum();
        let residual: Vec<Complex64> = omega.iter().zip(&hs).map(|(&w, (h, _))| w - z - sum + h).collect();
        let norm = residual.iter().map(|r| r.norm()).fold(0.0, f64::max);
        norm.is_finite().then(|| Eval {
            residual,
            norm,
            h_prime: hs.into_iter().map(|(_, d)| d).collect(),
        })
    }

    fn admissible(&self, z: Complex64, omega: &[Complex64]) -> bool {
        omega.iter().all(|w| w.im > 0.5 * z.im && w.re.is_finite())
    }

    fn tolerance(&self, z: Complex64, omega: &[Complex64]) -> f64 {
        let scale = omega.iter().map(|w| w.norm()).fold(z.norm(), f64::max);
        1e-13 * (1.0 + scale)
    }

    /// Solves `J x = r` with `J = diag(1 + H'_j) - 1 (k_l H'_l)^T`.
    fn jacobian_solve(&self, h_prime: &[Complex64], r: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = r.len();
        let mut a: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut row: Vec<Complex64> = (0..n).map(|l| -self.groups[l].1 * h_prime[l]).collect();
                row[j] += 1.0 + h_prime[j];
                row
            })
            .collect();
        let mut b = r.to_vec();
        solve_dense(&mut a, &mut b)?;
        Some(b)
    }

    /// Damped Newton. A step length is accepted by the natural monotonicity
    /// test: the simplified correction `J(ω)⁻¹ r(ω - t δ)` must shrink against
    /// `δ`. Near a pole of some `H_j` the raw residual is badly scaled and
    /// rejects good steps; the correction is not.
    fn newton(&self, z: Complex64, mut omega: Vec<Complex64>) -> Option<Vec<Complex64>> {
        let mut e = self.eval(z, &omega)?;
        for _ in 0..NEWTON_ITERATIONS {
            if e.norm <= self.tolerance(z, &omega) {
                return self.finish(z, omega);
            }
            let step = self.jacobian_solve(&e.h_prime, &e.residual)?;
            let size = max_norm(&step);
            if !size.is_finite() {
                return None;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<Complex64> = omega.iter().zip(&step).map(|(w, s)| w - t * s).collect();
                if self.admissible(z, &trial) {
                    if let Some(te) = self.eval(z, &trial) {
                        let done = te.norm <= self.tolerance(z, &trial);
                        let shrinks = || {
                            self.jacobian_solve(&e.h_prime, &te.residual)
                                .is_some_and(|c| max_norm(&c) < (1.0 - 0.25 * t) * size)
                        };
                        if done || shrinks() {
                            accepted = Some((trial, te));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            // no descent: the residual is at its rounding floor, or Newton failed
            let Some((next, ne)) = accepted else { break };
            omega = next;
            e = ne;
        }
        (e.norm <= STAGNATION_SLACK * self.tolerance(z, &omega))
            .then_some(omega)
            .and_then(|w| self.finish(z, w))
    }

    /// Subordination functions satisfy `Im ω_j >= Im z`.
    fn finish(&self, z: Complex64, omega: Vec<Complex64>) -> Option<Vec<Complex64>> {
        let slack = 1e-9 * (1.0 + z.norm());
        omega.iter().all(|w| w.im >= z.im - slack).then_some(omega)
    }

    /// `ω_j ← (1 - d) ω_j + d (z + S - H_j(ω_j))`.
    fn fixed_point(&self, z: Complex64, mut omega: Vec<Complex64>) -> Option<Vec<Complex64>> {
        for _ in 0..MAX_ITERATIONS {
            let e = self.eval(z, &omega)?;
            if e.norm <= 1e-8 * (1.0 + z.norm()) {
                return self.newton(z, omega);
            }
            for (w, r) in omega.iter_mut().zip(&e.residual) {
                *w -= DAMPING * r;
                if w.im < z.im {
                    w.im = z.im;
                }
            }
        }
        None
    }

    fn state(&self, z: Complex64, omega: &[Complex64]) -> SubordinationState {
        let residual = self.eval(z, omega).map_or(f64::INFINITY, |e| e.norm);
        SubordinationState {
            z,
            omega1: omega[0],
            omega2: omega.get(1).copied().unwrap_or(omega[0]),
            residual,
        }
    }
}

impl PointSolver for Subordination<'_> {
    type State = Vec<Complex64>;

    fn anchor_height(&self) -> f64 {
        self.anchor
    }

    fn cold_seed(&self, z: Complex64) -> Vec<Complex64> {
        // H_j(ω) ≈ -mean_j far from the support
        self.means.iter().map(|m| z - self.total_mean + m).collect()
    }

    /// Warm starts rely on Newton alone; a failure is handled by splitting the step.
    fn solve(&self, z: Complex64, start: &Vec<Complex64>) -> Option<Vec<Complex64>> {
        self.newton(z, start.clone())
    }

    fn solve_cold(&self, z: Complex64, start: &Vec<Complex64>) -> Option<Vec<Complex64>> {
        self.newton(z, start.clone())
            .or_else(|| self.fixed_point(z, start.clone()))
    }

    fn cauchy(&self, _z: Complex64, omega: &Vec<Complex64>) -> Complex64 {
        self.kernels[self.lead].parts(omega[self.lead]).g
    }

    fn stall(&self, z: Complex64) -> Error {
        Error::SubordinationStall { z }
    }
}

impl CauchyEvaluable for Subordination<'_> {
    fn cauchy_at(&self, z: Complex64) -> Result<Complex64> {
        sweep::cauchy_at(self, z)
    }

    fn cauchy_on_line(&self, xs: &[f64], eps: f64) -> Result<Vec<Complex64>> {
        sweep::cauchy_on_line(self, xs, eps)
    }

    fn cauchy_on_line_partial(&self, xs: &[f64], eps: f64) -> Vec<Option<Complex64>> {
        sweep::cauchy_on_line_partial(self, xs, eps)
    }
}

/// Gaussian elimination with partial pivoting; the solution replaces `b`.
fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn solve_dense(a: &mut [Vec<Complex64>], b: &mut [Complex64]) -> Option<()> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if !(a[p][col].norm() > 0.0) {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(r);
            for (x, v) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * b[c];
        }
        b[col] = acc / a[col][col];
        if !(b[col].re.is_finite() && b[col].im.is_finite()) {
            return None;
        }
    }
    Some(())
}

/// Solves the subordination system for `μ ⊞ ν` at `z` by descent from above.
pub fn subordinate(mu: &Measure, nu: &Measure, z: Complex64) -> Result<SubordinationState> {
    if !(z.im > 0.0) {
        return Err(Error::Domain { op: "subordinate", z });
    }
    for m in [mu, nu] {
        if !m.is_probability() {
            return Err(Error::InvalidMeasure("subordination needs probability measures".into()));
        }
    }
    let groups = vec![(mu.clone(), 1.0), (nu.clone(), 1.0)];
    let s = Subordination::new(&groups);
    let omega = sweep::descend(&s, z)?;
    Ok(s.state(z, &omega))
}

/// `μ ⊞ ν`. Without a grid the output grid is fitted to the support.
pub fn free_convolve(mu: &Measure, nu: &Measure, grid: Option<&GridSpec>) -> Result<Measure> {
    free_convolve_many(&[mu.clone(), nu.clone()], 0.0, grid)
}

/// `μ_1 ⊞ ... ⊞ μ_N ⊞ δ_c`.
pub fn free_convolve_many(ms: &[Measure], c: f64, grid: Option<&GridSpec>) -> Result<Measure> {
    let factors = Factors::collect(ms)?;
    let shift = factors.shift + c;
    match factors.groups.as_slice() {
        [] => return Ok(Measure::dirac(shift)),
        [(m, k)] if *k == 1.0 => return Ok(m.shift(shift)),
        _ => {}
    }
    let solver = Subordination::new(&factors.groups);
    let atoms = factors.atoms();
    let out_grid = match grid {
        Some(g) => GridSpec::new(g.lo() - shift, g.hi() - shift, g.n_points())?,
        None => {
            let (a, b) = factors.window();
            let (c, d) = factors.moment_window();
            let narrow = (a.max(c), b.min(d));
            match fit_grid(&solver, narrow, &atoms) {
                Ok(g) if coarse_mass(&solver, &g, &atoms)? > 1.0 - COARSE_MASS_SLACK => g,
                _ => fit_grid(&solver, (a, b), &atoms)?,
            }
        }
    };
    let opts = StieltjesOptions {
        known_atoms: Some(atoms),
        ..StieltjesOptions::default()
    };
    let eps = EPS_PER_STEP * out_grid.step();
    Ok(stieltjes_invert_with(&solver, &out_grid, eps, &opts)?.shift(shift))
}

/// Narrows an a priori support window with coarse passes close to the axis.
pub(crate) fn fit_grid<G: CauchyEvaluable>(solver: &G, window: (f64, f64), atoms: &[Atom]) -> Result<GridSpec> {
    let (mut lo, mut hi) = window;
    let atom_mass: f64 = atoms.iter().map(|a| a.w).sum();
    for _ in 0..COARSE_ROUNDS {
        let grid = GridSpec::new(lo, hi, COARSE_POINTS)?;
        let h = grid.step();
        // cell midpoints keep integrable edge singularities off the samples
        let xs: Vec<f64> = grid.nodes().windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let g = near_axis(solver, &xs, 1e-8 * (hi - lo), h)?;
        let rho: Vec<f64> = g.iter().map(|v| (-v.im / std::f64::consts::PI).max(0.0)).collect();
        let peak = rho.iter().copied().fold(0.0, f64::max);
        let mass = atom_mass + h * rho.iter().sum::<f64>();
        if !(mass > 0.5 && mass < 1.5) {
            break;
        }
        let mut new_lo = f64::INFINITY;
        let mut new_hi = f64::NEG_INFINITY;
        for (&x, &r) in xs.iter().zip(&rho) {
            if r > 1e-5 * peak {
                new_lo = new_lo.min(x);
                new_hi = new_hi.max(x);
            }
        }
        for a in atoms {
            new_lo = new_lo.min(a.x);
            new_hi = new_hi.max(a.x);
        }
        let (new_lo, new_hi) = (new_lo - 2.0 * h, new_hi + 2.0 * h);
        if !(new_hi > new_lo) {
            break;
        }
        let shrink = (new_hi - new_lo) / (hi - lo);
        lo = lo.max(new_lo);
        hi = hi.min(new_hi);
        if shrink > 0.9 {
            break;
        }
    }
    // room for the Poisson tails around the support
    let pad = 0.02 * (hi - lo);
    GridSpec::new(lo - pad, hi + pad, DEFAULT_POINTS)
}

/// `G` at height `eta` above the axis. Points where the solver stalls (cusps
/// of the density) are taken at height `fallback` instead.
fn near_axis<G: CauchyEvaluable>(solver: &G, xs: &[f64], eta: f64, fallback: f64) -> Result<Vec<Complex64>> {
    let first = solver.cauchy_on_line_partial(xs, eta);
    first
        .into_par_iter()
        .zip(xs)
        .map(|(g, &x)| match g {
            Some(g) => Ok(g),
            None => solver.cauchy_at(Complex64::new(x, fallback)),
        })
        .collect()
}

/// Mass seen by a coarse pass over `grid`, atoms included.
fn coarse_mass<G: CauchyEvaluable>(solver: &G, grid: &GridSpec, atoms: &[Atom]) -> Result<f64> {
    let coarse = GridSpec::new(grid.lo(), grid.hi(), COARSE_POINTS)?;
    let h = coarse.step();
    let g = solver.cauchy_on_line(&coarse.nodes(), h)?;
    let rho: Vec<f64> = g.iter().map(|v| -v.im / std::f64::consts::PI).collect();
    let atom_mass: f64 = atoms.iter().map(|a| a.w).sum();
    // Poisson smoothing at height h leaks about h / (π d) past each edge
    Ok(atom_mass.max(0.0) + h * rho.iter().sum::<f64>())
}

/// `max |φ_{μ⊞ν}(w) - φ_μ(w) - φ_ν(w)|` over the probes, with the left side
/// evaluated on the recovered measure.
pub fn phi_additivity_check(mu: &Measure, nu: &Measure, probes: &[Complex64]) -> Result<f64> {
    let out = free_convolve(mu, nu, None)?;
    let mut worst: f64 = 0.0;
    for &w in probes {
        let err = voiculescu(&out, w)? - voiculescu(mu, w)? - voiculescu(nu, w)?;
        worst = worst.max(err.norm());
    }
    Ok(worst)
}
