//! Cauchy, F- and Voiculescu transforms of measures.
//!
//! `G(z) = ∫ dμ(t) / (z - t)` maps the upper half-plane into the lower one,
//! `F = 1/G`, and on a truncated cone `{x + iy : |x| < αy, y > β}` where `F`
//! has a left inverse the Voiculescu transform is `φ(w) = F⁻¹(w) - w`.

mod cone;
pub(crate) mod kernel;
mod stieltjes;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::Measure;

pub use cone::{select_cone, select_cone_with, Cone, ConeSearch};
pub use stieltjes::{stieltjes_invert, stieltjes_invert_with, CauchyEvaluable, ClosedForm, StieltjesOptions};

/// Absolute tolerance, relative to `1 + |w|`, for `|F(F⁻¹(w)) - w|`.
pub const INVERSION_TOL: f64 = 1e-10;

/// Threshold below which `w²[G(w) - 1/w]` is treated as zero.
pub const DEGENERATE_RESIDUAL: f64 = 1e-14;

fn check_upper(op: &'static str, z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.im.is_finite() && z.re.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { op, z })
    }
}

/// `G_μ(z)`.
pub fn cauchy(m: &Measure, z: Complex64) -> Result<Complex64> {
    check_upper("cauchy", z)?;
    Ok(kernel::cauchy_parts(m, z).g)
}

/// `F_μ(z) = 1 / G_μ(z)`.
pub fn f_transform(m: &Measure, z: Complex64) -> Result<Complex64> {
    check_upper("f_transform", z)?;
    Ok(1.0 / kernel::cauchy_parts(m, z).g)
}

/// `F_μ⁻¹(w)` on the default cone `Γ_{1,1}`; see [`invert_f_in`].
pub fn invert_f(m: &Measure, w: Complex64) -> Result<Complex64> {
    invert_f_in(m, w, &Cone::default())
}

/// `F_μ⁻¹(w)`: Newton iteration seeded at `w`, falling back to continuation
/// from `i·max(4β, 2|w|)` along the straight segment to `w`.
pub fn invert_f_in(m: &Measure, w: Complex64, cone: &Cone) -> Result<Complex64> {
    Ok(w + phi_in(m, w, cone)?)
}

/// Voiculescu transform `φ_μ(w) = F_μ⁻¹(w) - w` on the default cone.
pub fn voiculescu(m: &Measure, w: Complex64) -> Result<Complex64> {
    phi_in(m, w, &Cone::default())
}

pub fn voiculescu_in(m: &Measure, w: Complex64, cone: &Cone) -> Result<Complex64> {
    phi_in(m, w, cone)
}

fn phi_in(m: &Measure, w: Complex64, cone: &Cone) -> Result<Complex64> {
    check_upper("invert_f", w)?;
    let k = kernel::Kernel::new(m);
    newton_phi(&k, w, Complex64::new(0.0, 0.0))
        .or_else(|| continuation_phi(&k, w, cone.beta))
        .ok_or(Error::OutsideInvertibility { w })
}

/// Newton on `u ↦ F(w + u) - w`, written as `(F(z) - z) + u` so that `u = φ(w)`
/// keeps full relative precision when `|w|` is large.
pub(crate) fn newton_phi(k: &kernel::Kernel, w: Complex64, seed: Complex64) -> Option<Complex64> {
    let mass = k.measure().total_mass();
    let scale = 1.0 + w.norm();
    let mut u = seed;
    for _ in 0..80 {
        let z = w + u;
        let parts = k.parts(z);
        let r = parts.f_minus_z(z, mass) + u;
        let dr = parts.df();
        if !(r.re.is_finite() && r.im.is_finite()) {
            return None;
        }
        let mut step = r / dr;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        // stay in the upper half-plane
        let mut halvings = 0;
        while (w + u - step).im <= 0.0 {
            step *= 0.5;
            halvings += 1;
            if halvings > 40 {
                return None;
            }
        }
        u -= step;
        if u.norm() > 10.0 * scale {
            return None;
        }
        if step.norm() <= 1e-15 * (u.norm() + 1e-3 * scale) {
            break;
        }
    }
    let z = w + u;
    let parts = k.parts(z);
    let residual = (parts.f_minus_z(z, mass) + u).norm();
    (residual <= INVERSION_TOL * scale).then_some(u)
}

/// Tracks `φ` from the high anchor `i·max(4β, 2|w|)` down the segment to `w`.
pub(crate) fn continuation_phi(k: &kernel::Kernel, w: Complex64, beta: f64) -> Option<Complex64> {
    let anchor = Complex64::new(0.0, (4.0 * beta).max(2.0 * w.norm()));
    let mut u = newton_phi(k, anchor, Complex64::new(0.0, 0.0))?;
    let mut s: f64 = 0.0;
    let mut ds: f64 = 0.125;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        let target = anchor + next * (w - anchor);
        match newton_phi(k, target, u) {
            Some(v) if (v - u).norm() <= 0.5 * (1.0 + u.norm()) => {
                u = v;
                s = next;
                ds = (ds * 1.5).min(0.25);
            }
            _ => {
                ds *= 0.5;
                if ds < 1e-7 {
                    return None;
                }
            }
        }
    }
    Some(u)
}

/// `v` in `φ_μ(w) = w²[G_μ(w) - 1/w](1 + v)`.
pub fn prop23_residual(m: &Measure, w: Complex64) -> Result<Complex64> {
    check_upper("prop23_residual", w)?;
    let parts = kernel::cauchy_parts(m, w);
    // for a probability measure w²(G - 1/w) = w² (G - mass/w) + w (mass - 1)
    let denominator = w * w * parts.excess + w * (m.total_mass() - 1.0);
    if denominator.norm() < DEGENERATE_RESIDUAL {
        return Err(Error::DegenerateResidual {
            w,
            denominator: denominator.norm(),
        });
    }
    Ok(voiculescu(m, w)? / denominator - 1.0)
}
