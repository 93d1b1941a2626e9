//! Truncated cones and probe-based certification of where `F⁻¹` is trusted.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::{continuation_phi, newton_phi};
use crate::error::{Error, Result};
use crate::measure::Measure;

/// `Γ_{α,β} = {x + iy : |x| < αy, y > β}` with `β >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Cone {
    fn default() -> Self {
        Cone { alpha: 1.0, beta: 1.0 }
    }
}

impl Cone {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("cone alpha must be positive, got {alpha}")));
        }
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(Error::Config(format!("cone beta must be at least 1, got {beta}")));
        }
        Ok(Cone { alpha, beta })
    }

    pub fn contains(&self, w: Complex64) -> bool {
        w.im > self.beta && w.re.abs() < self.alpha * w.im
    }

    /// Probe points: `heights` levels spaced geometrically in `(β, 16β]`, each
    /// with `rays` points spread across `|x| <= 0.95 αy` plus one on the
    /// imaginary axis. Returned ray by ray, lowest point first.
    pub fn probe_rays(&self, heights: usize, rays: usize) -> Vec<Vec<Complex64>> {
        let ys: Vec<f64> = (0..heights)
            .map(|k| {
                let lo = 1.05 * self.beta;
                let hi = 16.0 * self.beta;
                lo * (hi / lo).powf(k as f64 / (heights.max(2) - 1) as f64)
            })
            .collect();
        let mut ratios: Vec<f64> = (0..rays)
            .map(|r| -0.95 + 1.9 * r as f64 / (rays.max(2) - 1) as f64)
            .collect();
        if !ratios.contains(&0.0) {
            ratios.push(0.0);
        }
        ratios
            .into_iter()
            .map(|rho| ys.iter().map(|&y| Complex64::new(rho * self.alpha * y, y)).collect())
            .collect()
    }
}

/// Parameters of the geometric search for `β`.
#[derive(Clone, Copy, Debug)]
pub struct ConeSearch {
    pub heights: usize,
    pub rays: usize,
    /// Largest `β` tried; the search doubles from 1.
    pub beta_cap: f64,
}

impl Default for ConeSearch {
    fn default() -> Self {
        ConeSearch {
            heights: 8,
            rays: 8,
            beta_cap: 1024.0,
        }
    }
}

/// Smallest `β ∈ {1, 2, 4, ...}` such that every measure passes the probes of
/// `Γ_{α,β}`. A heuristic certificate, not a proof.
pub fn select_cone(ms: &[Measure], alpha: f64) -> Result<Cone> {
    select_cone_with(ms, alpha, &ConeSearch::default())
}

pub fn select_cone_with(ms: &[Measure], alpha: f64, search: &ConeSearch) -> Result<Cone> {
    if ms.is_empty() {
        return Err(Error::Config("select_cone needs at least one measure".into()));
    }
    let kernels: Vec<Kernel> = ms.iter().map(Kernel::new).collect();
    let mut beta = 1.0;
    while beta <= search.beta_cap {
        let cone = Cone::new(alpha, beta)?;
        let rays = cone.probe_rays(search.heights, search.rays);
        if kernels
            .iter()
            .all(|k| rays.par_iter().all(|ray| ray_passes(k, ray, &cone)))
        {
            return Ok(cone);
        }
        beta *= 2.0;
    }
    Err(Error::ConeSelection {
        alpha,
        cap: search.beta_cap,
    })
}

/// Direct Newton and continuation agree at every probe, and the preimages
/// climb monotonically with the probe height.
fn ray_passes(m: &Kernel, ray: &[Complex64], cone: &Cone) -> bool {
    let mut last_im = 0.0;
    for &w in ray {
        let Some(direct) = newton_phi(m, w, Complex64::new(0.0, 0.0)) else {
            return false;
        };
        let Some(tracked) = continuation_phi(m, w, cone.beta) else {
            return false;
        };
        if (direct - tracked).norm() > 1e-8 * (1.0 + w.norm()) {
            return false;
        }
        let z = w + direct;
        if z.im <= last_im {
            return false;
        }
        last_im = z.im;
    }
    true
}
