//! Recovering a measure from its Cauchy transform near the real axis.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_upper, kernel};
use crate::error::{Error, Result};
use crate::measure::{Atom, Density, GridSpec, Measure};

/// Anything that can produce `G(z)` for `Im z > 0`.
pub trait CauchyEvaluable: Sync {
    fn cauchy_at(&self, z: Complex64) -> Result<Complex64>;

    /// `G(x + i eps)` for every `x`. Implementors with a path-dependent solver
    /// override this to warm-start along the line.
    fn cauchy_on_line(&self, xs: &[f64], eps: f64) -> Result<Vec<Complex64>> {
        xs.par_iter().map(|&x| self.cauchy_at(Complex64::new(x, eps))).collect()
    }

    /// As [`cauchy_on_line`](Self::cauchy_on_line), with `None` at points where
    /// the evaluation fails rather than an error for the whole line.
    fn cauchy_on_line_partial(&self, xs: &[f64], eps: f64) -> Vec<Option<Complex64>> {
        xs.par_iter()
            .map(|&x| self.cauchy_at(Complex64::new(x, eps)).ok())
            .collect()
    }
}

impl CauchyEvaluable for Measure {
    fn cauchy_at(&self, z: Complex64) -> Result<Complex64> {
        check_upper("cauchy", z)?;
        Ok(kernel::cauchy_parts(self, z).g)
    }

    fn cauchy_on_line(&self, xs: &[f64], eps: f64) -> Result<Vec<Complex64>> {
        check_upper("cauchy", Complex64::new(0.0, eps))?;
        let k = kernel::Kernel::new(self);
        Ok(xs.par_iter().map(|&x| k.parts(Complex64::new(x, eps)).g).collect())
    }
}

/// A Cauchy transform given by a formula.
pub struct ClosedForm<F>(pub F);

impl<F> CauchyEvaluable for ClosedForm<F>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    fn cauchy_at(&self, z: Complex64) -> Result<Complex64> {
        check_upper("cauchy", z)?;
        Ok((self.0)(z))
    }
}

#[derive(Clone, Debug)]
pub struct StieltjesOptions {
    /// Grid points with `eps |G(x + i eps)|` above this are atom candidates.
    pub atom_threshold: f64,
    /// Largest accepted `|mass - 1|` before renormalization.
    pub mass_tolerance: f64,
    /// Atoms known in advance; when set, detection is skipped.
    pub known_atoms: Option<Vec<Atom>>,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        StieltjesOptions {
            atom_threshold: 0.1,
            mass_tolerance: 0.02,
            known_atoms: None,
        }
    }
}

pub fn stieltjes_invert<G>(g: &G, grid: &GridSpec, eps: f64) -> Result<Measure>
where
    G: CauchyEvaluable + ?Sized,
{
    stieltjes_invert_with(g, grid, eps, &StieltjesOptions::default())
}

/// Density recovered from `-(1/π) Im G(x + iε)`, extrapolated to `ε → 0`
/// from `ε` and `ε/2`, plus atoms located by a local pole fit.
///
/// Each node carries the mass of its dual cell `[x - h/2, x + h/2]`,
/// integrated along the line with composite Simpson on four sub-steps, so
/// the recovered mass does not depend on how well the density is resolved
/// near singular edges.
pub fn stieltjes_invert_with<G>(g: &G, grid: &GridSpec, eps: f64, opts: &StieltjesOptions) -> Result<Measure>
where
    G: CauchyEvaluable + ?Sized,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "stieltjes_invert: eps must be positive, got {eps}"
        )));
    }
    let n = grid.n_points();
    let h = grid.step();
    let q = 0.25 * h;
    let sub: Vec<f64> = (0..4 * n + 1).map(|i| grid.lo() - 0.5 * h + i as f64 * q).collect();
    let g1 = g.cauchy_on_line(&sub, eps)?;
    let g2 = g.cauchy_on_line(&sub, 0.5 * eps)?;

    let atoms = match &opts.known_atoms {
        Some(known) => known.clone(),
        None => {
            let xs = grid.nodes();
            let at_nodes: Vec<Complex64> = (0..n).map(|j| g1[4 * j + 2]).collect();
            find_atoms(g, &xs, &at_nodes, eps, h, opts.atom_threshold)?
        }
    };
    let smooth = |vals: &[Complex64], y: f64| -> Vec<f64> {
        vals.iter()
            .zip(&sub)
            .map(|(&v, &x)| {
                let z = Complex64::new(x, y);
                let pole: Complex64 = atoms.iter().map(|a| a.w / (z - a.x)).sum();
                -(v - pole).im / std::f64::consts::PI
            })
            .collect()
    };
    let r1 = smooth(&g1, eps);
    let r2 = smooth(&g2, 0.5 * eps);

    let simpson = |r: &[f64], from: usize, to: usize| -> f64 {
        let mut acc = r[from] + r[to];
        for (i, v) in r.iter().enumerate().take(to).skip(from + 1) {
            acc += if (i - from) % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * q / 3.0
    };
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let (from, to) = match j {
                0 => (2, 4),
                _ if j + 1 == n => (4 * j, 4 * j + 2),
                _ => (4 * j, 4 * j + 4),
            };
            let mass = 2.0 * simpson(&r2, from, to) - simpson(&r1, from, to);
            (mass / ((to - from) as f64 * q)).max(0.0)
        })
        .collect();

    let density = Density::new(grid.lo(), grid.hi(), values)?;
    let raw = Measure::finite(atoms, Some(density))?;
    let mass = raw.total_mass();
    if !((mass - 1.0).abs() <= opts.mass_tolerance) {
        return Err(Error::MassDefect { mass });
    }
    raw.normalized()
}

fn find_atoms<G>(g: &G, xs: &[f64], g1: &[Complex64], eps: f64, h: f64, threshold: f64) -> Result<Vec<Atom>>
where
    G: CauchyEvaluable + ?Sized,
{
    let strength: Vec<f64> = g1.iter().map(|v| eps * v.norm()).collect();
    let n = xs.len();
    let mut atoms: Vec<Atom> = Vec::new();
    for j in 0..n {
        let s = strength[j];
        let left = if j > 0 { strength[j - 1] } else { 0.0 };
        let right = if j + 1 < n { strength[j + 1] } else { 0.0 };
        if !(s > threshold && s >= left && s > right) {
            continue;
        }
        let Some(atom) = fit_pole(g, xs[j], eps, h.max(eps))? else {
            continue;
        };
        if atom.w < 1e-3 * threshold {
            continue;
        }
        if let Some(prev) = atoms.last_mut() {
            if (prev.x - atom.x).abs() < eps {
                if atom.w > prev.w {
                    *prev = atom;
                }
                continue;
            }
        }
        atoms.push(atom);
    }
    Ok(atoms)
}

/// Near an isolated atom `G(z) ≈ a / (z - x0) + b`, so `F` is nearly linear:
/// two samples give `a` and `x0`. The mass is then extrapolated from
/// `-ε Im G(x0 + iε)`, whose smooth-part contribution is linear in `ε`.
fn fit_pole<G>(g: &G, x: f64, eps: f64, reach: f64) -> Result<Option<Atom>>
where
    G: CauchyEvaluable + ?Sized,
{
    let mut x0 = x;
    for _ in 0..3 {
        let z1 = Complex64::new(x0, eps);
        let z2 = Complex64::new(x0, 0.5 * eps);
        let f1 = 1.0 / g.cauchy_at(z1)?;
        let f2 = 1.0 / g.cauchy_at(z2)?;
        let slope = (z1 - z2) / (f1 - f2);
        let next = (z1 - slope * f1).re;
        if !next.is_finite() || (next - x).abs() > 2.0 * reach {
            return Ok(None);
        }
        x0 = next;
    }
    let m1 = -eps * g.cauchy_at(Complex64::new(x0, eps))?.im;
    let m2 = -0.5 * eps * g.cauchy_at(Complex64::new(x0, 0.5 * eps))?.im;
    let w = 2.0 * m2 - m1;
    Ok((w > 0.0).then_some(Atom { x: x0, w }))
}
