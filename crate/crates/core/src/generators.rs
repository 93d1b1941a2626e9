//! Lévy–Hinčin generator pairs `(γ, σ)` and the infinitely divisible laws
//! they generate.
//!
//! Free side: `φ(z) = γ + ∫ (1 + tz)/(z - t) dσ(t)`. Writing
//! `(1 + tz)/(z - t) = t + (1 + t²)/(z - t)` gives
//! `φ = γ + ∫ t dσ + G_{σ̃}` with `dσ̃ = (1 + t²) dσ`, so the Cauchy kernel
//! of `σ̃` does the work.
//!
//! Classical side: the exponent integrand is rewritten as
//! `t² (1 + x²) E(tx) + itx` with `E(u) = (e^{iu} - 1 - iu)/u²`, which is
//! smooth through `x = 0` where it equals `-t²/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{dyadic_floor, invert_exponent, split_spikes, Lattice, DEFAULT_POINTS as CLASSICAL_POINTS};
use crate::error::{Error, Result};
use crate::freeconv::{fit_grid, EPS_PER_STEP};
use crate::measure::{GridSpec, Measure};
use crate::sweep::{self, PointSolver};
use crate::transform::kernel::Kernel;
use crate::transform::{stieltjes_invert, CauchyEvaluable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPair {
    pub gamma: f64,
    pub sigma: Measure,
}

impl GeneratorPair {
    pub fn new(gamma: f64, sigma: Measure) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidMeasure(format!("gamma must be finite, got {gamma}")));
        }
        Ok(GeneratorPair { gamma, sigma })
    }

    /// `(γ, 0)`, generating `δ_γ` on both sides.
    pub fn drift(gamma: f64) -> Self {
        GeneratorPair {
            gamma,
            sigma: Measure::zero(),
        }
    }

    /// Mean of the generated law, `γ + ∫ t dσ`.
    pub fn mean(&self) -> f64 {
        self.gamma + self.first_moment()
    }

    /// Variance of the generated law, `∫ (1 + t²) dσ`.
    pub fn variance(&self) -> f64 {
        self.sigma.integrate_real(|t| 1.0 + t * t).unwrap_or(f64::NAN)
    }

    fn first_moment(&self) -> f64 {
        self.sigma.integrate_real(|t| t).unwrap_or(f64::NAN)
    }

    fn is_drift(&self) -> bool {
        self.sigma.total_mass() == 0.0
    }

    /// `(γ + γ', σ + σ')`.
    pub fn combine(&self, other: &GeneratorPair) -> Result<GeneratorPair> {
        Ok(GeneratorPair {
            gamma: self.gamma + other.gamma,
            sigma: Measure::superpose(&[self.sigma.clone(), other.sigma.clone()])?,
        })
    }
}

/// `φ(z) = γ + ∫ (1 + tz)/(z - t) dσ(t)`.
pub fn phi_free(g: &GeneratorPair, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain { op: "phi_free", z });
    }
    Ok(g.gamma + g.sigma.integrate(|t| (1.0 + t * z) / (z - t))?)
}

/// `φ'(z) = -∫ (1 + t²)/(z - t)² dσ(t)`.
pub fn phi_free_derivative(g: &GeneratorPair, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain {
            op: "phi_free_derivative",
            z,
        });
    }
    g.sigma.integrate(|t| -(1.0 + t * t) / ((z - t) * (z - t)))
}

/// `(e^{iu} - 1 - iu) / u²`.
fn e2(u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(-0.5, 0.0);
    }
    let half = (0.5 * u).sin();
    let re = -2.0 * half * half / (u * u);
    let im = if u.abs() < 0.1 {
        let u2 = u * u;
        u * (-1.0 / 6.0 + u2 * (1.0 / 120.0 + u2 * (-1.0 / 5040.0 + u2 / 362_880.0)))
    } else {
        (u.sin() - u) / (u * u)
    };
    Complex64::new(re, im)
}

/// `iγt + ∫ (e^{itx} - 1 - itx/(1+x²)) (1+x²)/x² dσ(x)`, the integrand being
/// `-t²/2` at `x = 0`.
pub fn char_exponent_classical(g: &GeneratorPair, t: f64) -> Complex64 {
    let body = g
        .sigma
        .integrate(|x| t * t * (1.0 + x * x) * e2(t * x) + Complex64::new(0.0, t * x))
        .expect("finite integrand");
    Complex64::new(0.0, g.gamma * t) + body
}

/// Solves `w + φ(w) = z` for `w = F(z)` with `Im w >= Im z`.
struct FreeLevyHincin<'a> {
    kernel: Kernel<'a>,
    drift: f64,
    anchor: f64,
}

impl FreeLevyHincin<'_> {
    fn residual(&self, z: Complex64, w: Complex64) -> (Complex64, Complex64) {
        let p = self.kernel.parts(w);
        (w + self.drift + p.g - z, 1.0 + p.dg)
    }
}

impl PointSolver for FreeLevyHincin<'_> {
    type State = Complex64;

    fn anchor_height(&self) -> f64 {
        self.anchor
    }

    fn cold_seed(&self, z: Complex64) -> Complex64 {
        z - self.drift
    }

    fn solve(&self, z: Complex64, start: &Complex64) -> Option<Complex64> {
        let tol = 1e-13 * (1.0 + z.norm());
        let mut w = *start;
        let (mut r, mut dr) = self.residual(z, w);
        for _ in 0..60 {
            if r.norm() <= tol {
                let slack = 1e-9 * (1.0 + z.norm());
                return (w.im >= z.im - slack).then_some(w);
            }
            let step = r / dr;
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial = w - t * step;
                if trial.im > 0.5 * z.im {
                    let (tr, tdr) = self.residual(z, trial);
                    if tr.norm() < r.norm() {
                        accepted = Some((trial, tr, tdr));
                        break;
                    }
                }
                t *= 0.5;
            }
            (w, r, dr) = accepted?;
        }
        None
    }

    fn cauchy(&self, _z: Complex64, w: &Complex64) -> Complex64 {
        1.0 / w
    }

    fn stall(&self, z: Complex64) -> Error {
        Error::ContinuationStall { z }
    }
}

impl CauchyEvaluable for FreeLevyHincin<'_> {
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

/// A priori window `mean ± (k sd + reach of σ)`.
fn window(g: &GeneratorPair, sds: f64) -> (f64, f64) {
    let reach = g.sigma.support_bounds().map_or(0.0, |(a, b)| a.abs().max(b.abs()));
    let r = sds * g.variance().sqrt() + 2.0 * reach;
    (g.mean() - r, g.mean() + r)
}

/// `ν_⊞^{γ,σ}`, the law with `F⁻¹(z) = z + φ(z)`.
pub fn materialize_free(g: &GeneratorPair, grid: Option<&GridSpec>) -> Result<Measure> {
    if g.is_drift() {
        return Ok(Measure::dirac(g.gamma));
    }
    let tilted = g.sigma.reweight(|t| 1.0 + t * t)?;
    let solver = FreeLevyHincin {
        kernel: Kernel::new(&tilted),
        drift: g.gamma + g.first_moment(),
        anchor: 10.0 * tilted.total_mass().sqrt().max(1.0),
    };
    let grid = match grid {
        Some(gs) => *gs,
        None => fit_grid(&solver, window(g, 3.0), &[])?,
    };
    stieltjes_invert(&solver, &grid, EPS_PER_STEP * grid.step())
}

/// `ν_*^{γ,σ}` by inverse transform of `exp(ψ)` on a dyadic lattice.
pub fn materialize_classical(g: &GeneratorPair, grid: Option<&GridSpec>) -> Result<Measure> {
    if g.is_drift() {
        return Ok(Measure::dirac(g.gamma));
    }
    let (lo, hi) = match grid {
        Some(gs) => (gs.lo(), gs.hi()),
        None => window(g, 12.0),
    };
    let dx = match grid {
        Some(gs) => dyadic_floor(gs.step()),
        None => dyadic_floor((hi - lo) / (CLASSICAL_POINTS - 1) as f64),
    };
    let offset = (lo / dx).floor() as i64;
    let m = (((hi / dx).ceil() as i64 - offset + 1) as usize).next_power_of_two();
    let masses = invert_exponent(|t| char_exponent_classical(g, t), offset as f64 * dx, dx, m);
    let (atomic, continuous) = split_spikes(&masses);
    Lattice {
        offset,
        dx,
        atomic,
        continuous,
    }
    .into_measure(grid.map(|gs| (gs.lo(), gs.hi())))
}
