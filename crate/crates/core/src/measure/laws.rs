//! Closed-form laws used as inputs, limits and references.
//!
//! Absolutely continuous laws are built from their CDF: each density node
//! carries exactly the mass of its cell, so total mass is exact even when the
//! density is unbounded at an edge.

use std::f64::consts::PI;

use statrs::function::erf::erf;

use super::{Atom, Density, Measure};
use crate::error::{Error, Result};

/// Probability measure whose node values are cell averages of `cdf` over
/// `[lo, hi]` sampled at `n` points.
pub fn from_cdf<F>(cdf: F, lo: f64, hi: f64, n: usize) -> Result<Measure>
where
    F: Fn(f64) -> f64,
{
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 points, got {n}")));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let node = |j: usize| if j + 1 == n { hi } else { lo + j as f64 * h };
    let values = (0..n)
        .map(|j| {
            let left = if j == 0 { lo } else { node(j) - 0.5 * h };
            let right = if j + 1 == n { hi } else { node(j) + 0.5 * h };
            ((cdf(right) - cdf(left)) / (right - left)).max(0.0)
        })
        .collect();
    Measure::probability(Vec::new(), Some(Density::new(lo, hi, values)?))
}

/// Centered semicircle law with the given variance (radius `2 sqrt(variance)`).
pub fn semicircle(variance: f64, n: usize) -> Result<Measure> {
    let r = 2.0 * variance.sqrt();
    let cdf = move |x: f64| {
        let u = (x / r).clamp(-1.0, 1.0);
        0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
    };
    from_cdf(cdf, -r, r, n)
}

/// Arcsine law on `[-r, r]`, density `1 / (pi sqrt(r^2 - x^2))`.
pub fn arcsine(r: f64, n: usize) -> Result<Measure> {
    let cdf = move |x: f64| 0.5 + (x / r).clamp(-1.0, 1.0).asin() / PI;
    from_cdf(cdf, -r, r, n)
}

/// Free Poisson (Marchenko-Pastur) law of rate one, density
/// `sqrt(x (4 - x)) / (2 pi x)` on `(0, 4]`.
pub fn free_poisson_unit(n: usize) -> Result<Measure> {
    let cdf = |x: f64| {
        let theta = (x.clamp(0.0, 4.0).sqrt() / 2.0).min(1.0).asin();
        (2.0 / PI) * (theta + 0.5 * (2.0 * theta).sin())
    };
    from_cdf(cdf, 0.0, 4.0, n)
}

/// Gaussian law truncated to `mean +- 10 std`.
pub fn gaussian(mean: f64, std: f64, n: usize) -> Result<Measure> {
    let cdf = move |x: f64| 0.5 * (1.0 + erf((x - mean) / (std * std::f64::consts::SQRT_2)));
    from_cdf(cdf, mean - 10.0 * std, mean + 10.0 * std, n)
}

/// Uniform law on `[a, b]`.
pub fn uniform(a: f64, b: f64, n: usize) -> Result<Measure> {
    Measure::from_density(a, b, vec![1.0; n])
}

/// `½ δ_{-a} + ½ δ_a`.
pub fn symmetric_bernoulli(a: f64) -> Measure {
    Measure::from_atoms(&[(-a, 0.5), (a, 0.5)]).expect("valid atoms")
}

/// Poisson law with rate `lambda`, truncated after `k_max` and renormalized.
pub fn poisson(lambda: f64, k_max: usize) -> Result<Measure> {
    let mut atoms = Vec::with_capacity(k_max + 1);
    let mut p = (-lambda).exp();
    for k in 0..=k_max {
        atoms.push(Atom { x: k as f64, w: p });
        p *= lambda / (k + 1) as f64;
    }
    Measure::probability(atoms, None)
}
