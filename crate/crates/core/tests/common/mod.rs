#![allow(dead_code)]

use freelimit::{Atom, Density, Measure};
use proptest::prelude::*;

/// Probability measures mixing up to five atoms and a PL density inside `[-r, r]`.
pub fn measure_within(r: f64) -> impl Strategy<Value = Measure> {
    let atoms = prop::collection::vec((-r..r, 0.01..1.0f64), 0..5);
    let dens = prop::option::of((0.0..1.0f64, 0.2..1.0f64, prop::collection::vec(0.0..1.0f64, 3..24)));
    (atoms, dens)
        .prop_filter("nonzero", |(a, d)| {
            !a.is_empty() || d.as_ref().is_some_and(|d| d.2.iter().any(|&v| v > 0.0))
        })
        .prop_map(move |(atoms, dens)| {
            let atoms = atoms.into_iter().map(|(x, w)| Atom { x, w }).collect();
            let density = dens.map(|(start, width, v)| {
                let lo = -r + start * r;
                let hi = (lo + width * r).min(r);
                Density::new(lo, hi, v).unwrap()
            });
            Measure::probability(atoms, density).unwrap()
        })
}

/// Purely atomic probability measures inside `[-r, r]`.
pub fn atomic_within(r: f64, max_atoms: usize) -> impl Strategy<Value = Measure> {
    prop::collection::vec((-r..r, 0.05..1.0f64), 1..=max_atoms).prop_map(|atoms| {
        let atoms = atoms.into_iter().map(|(x, w)| Atom { x, w }).collect();
        Measure::probability(atoms, None).unwrap()
    })
}

/// Finite (not necessarily probability) atomic measures inside `[-r, r]`.
pub fn finite_atomic(r: f64) -> impl Strategy<Value = Measure> {
    prop::collection::vec((-r..r, 0.0..2.0f64), 0..5).prop_map(|atoms| {
        let atoms = atoms
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(x, w)| Atom { x, w })
            .collect();
        Measure::finite(atoms, None).unwrap()
    })
}

pub fn upper_half_plane() -> impl Strategy<Value = num_complex::Complex64> {
    (-5.0..5.0f64, 0.05..5.0f64).prop_map(|(re, im)| num_complex::Complex64::new(re, im))
}

/// Mean and variance of `m` with the density integrated exactly as a
/// piecewise-linear function (Simpson is exact on each cell).
pub fn exact_moments(m: &Measure) -> (f64, f64) {
    let mut s = [0.0f64; 3];
    for a in m.atoms() {
        s[0] += a.w;
        s[1] += a.w * a.x;
        s[2] += a.w * a.x * a.x;
    }
    if let Some(d) = m.density() {
        let v = d.values();
        let h = d.step();
        for j in 0..v.len() - 1 {
            let (x0, x1) = (d.node(j), d.node(j + 1));
            let xm = 0.5 * (x0 + x1);
            let pm = 0.5 * (v[j] + v[j + 1]);
            for (k, acc) in s.iter_mut().enumerate() {
                let p = k as i32;
                *acc += h / 6.0 * (v[j] * x0.powi(p) + 4.0 * pm * xm.powi(p) + v[j + 1] * x1.powi(p));
            }
        }
    }
    let mean = s[1] / s[0];
    (mean, s[2] / s[0] - mean * mean)
}
