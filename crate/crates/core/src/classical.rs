//! Classical convolution through characteristic functions.
//!
//! Measures are moved onto a lattice `x_i = i dx` anchored at the origin, with
//! `dx` a power of two so that dyadic atoms (Bernoulli rows, integer Poisson
//! atoms) land on nodes exactly. Lattice masses are convolved through FFT
//! products; the purely atomic factors are convolved separately so atoms of
//! the result are known rather than guessed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Atom, Density, GridSpec, Measure};

/// Default number of lattice points across the output window.
pub const DEFAULT_POINTS: usize = 4096;
/// Purely atomic inputs with at most this many atoms in total are convolved exactly.
pub const EXACT_ATOM_LIMIT: usize = 64;
/// Smallest retained fraction of mass inside the output window.
pub const MIN_RECOVERED_MASS: f64 = 0.98;

/// Lattice masses below this are treated as round-off.
const MASS_FLOOR: f64 = 1e-14;

/// Samples of `ν̂(t) = ∫ e^{itx} dν(x)` on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct CharFunction {
    pub t_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CharFunction {
    pub fn sup_distance(&self, other: &CharFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Uniform grid of `n` points on `[-t_max, t_max]`.
pub fn t_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -t_max + 2.0 * t_max * k as f64 / (n - 1) as f64)
        .collect()
}

/// `∫ e^{itx} dm(x)` at every `t`, integrating the piecewise-linear density exactly.
pub fn char_function(m: &Measure, t_grid: &[f64]) -> CharFunction {
    let values = t_grid.par_iter().map(|&t| fourier(m, t)).collect();
    CharFunction {
        t_grid: t_grid.to_vec(),
        values,
    }
}

fn fourier(m: &Measure, t: f64) -> Complex64 {
    let mut acc: Complex64 = m.atoms().iter().map(|a| a.w * Complex64::cis(t * a.x)).sum();
    if let Some(d) = m.density() {
        let h = d.step();
        let theta = t * h;
        let hat = sinc(0.5 * theta).powi(2);
        let left = half_hat(theta);
        let n = d.values().len();
        for (j, &v) in d.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let shape = match j {
                0 => left,
                _ if j + 1 == n => left.conj(),
                _ => Complex64::new(hat, 0.0),
            };
            acc += v * h * shape * Complex64::cis(t * d.node(j));
        }
    }
    acc
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `∫_0^1 (1 - s) e^{iθs} ds`.
fn half_hat(theta: f64) -> Complex64 {
    if theta.abs() < 1e-3 {
        let t2 = theta * theta;
        Complex64::new(0.5 - t2 / 24.0, theta / 6.0 - theta * t2 / 120.0)
    } else {
        let i = Complex64::new(0.0, 1.0);
        i / theta - (Complex64::cis(theta) - 1.0) / (theta * theta)
    }
}

/// Largest power of two not above `x`.
pub(crate) fn dyadic_floor(x: f64) -> f64 {
    2f64.powi(x.log2().floor() as i32)
}

/// Masses on the lattice `(offset + i) dx`, split into atomic and continuous parts.
#[derive(Clone, Debug)]
pub(crate) struct Lattice {
    pub offset: i64,
    pub dx: f64,
    pub atomic: Vec<f64>,
    pub continuous: Vec<f64>,
}

impl Lattice {
    /// Atoms split linearly between the two nearest nodes; the density's
    /// mass over each dual cell `[x_i - dx/2, x_i + dx/2]` goes to node `i`.
    pub fn discretize(m: &Measure, dx: f64) -> Lattice {
        let (lo, hi) = m.support_bounds().expect("nonzero measure");
        let offset = (lo / dx).floor() as i64 - 1;
        let len = ((hi / dx).ceil() as i64 + 1 - offset + 1) as usize;
        let mut atomic = vec![0.0; len];
        for a in m.atoms() {
            let u = a.x / dx - offset as f64;
            let i = u.floor();
            let f = u - i;
            let i = i as usize;
            atomic[i] += a.w * (1.0 - f);
            if f > 0.0 {
                atomic[i + 1] += a.w * f;
            }
        }
        let mut continuous = vec![0.0; len];
        if let Some(d) = m.density() {
            let dens = Measure::finite(Vec::new(), Some(d.clone())).expect("valid density");
            for (i, c) in continuous.iter_mut().enumerate() {
                let x = (offset + i as i64) as f64 * dx;
                *c = dens.cdf(x + 0.5 * dx) - dens.cdf(x - 0.5 * dx);
            }
        }
        Lattice {
            offset,
            dx,
            atomic,
            continuous,
        }
    }

    fn has_atoms(&self) -> bool {
        self.atomic.iter().any(|&v| v > 0.0)
    }

    fn node(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.dx
    }

    /// Measure restricted to `[lo, hi]` (whole lattice when `None`), with
    /// atoms from the atomic part and density `mass / dx` from the rest.
    pub fn into_measure(self, window: Option<(f64, f64)>) -> Result<Measure> {
        let inside = |x: f64| window.is_none_or(|(lo, hi)| x >= lo - 1e-12 && x <= hi + 1e-12);
        let atoms: Vec<Atom> = self
            .atomic
            .iter()
            .enumerate()
            .filter(|&(i, &w)| w > MASS_FLOOR && inside(self.node(i)))
            .map(|(i, &w)| Atom { x: self.node(i), w })
            .collect();
        let cont: Vec<(usize, f64)> = self
            .continuous
            .iter()
            .enumerate()
            .filter(|&(i, &w)| w > MASS_FLOOR && inside(self.node(i)))
            .map(|(i, &w)| (i, w))
            .collect();
        let density = match (cont.first(), cont.last()) {
            (Some(&(a, _)), Some(&(b, _))) => {
                // one empty node on each side so the density falls to zero
                let a = a.saturating_sub(1);
                let b = (b + 1).min(self.continuous.len() - 1);
                let values: Vec<f64> = (a..=b)
                    .map(|i| {
                        let w = self.continuous[i];
                        if w > MASS_FLOOR && inside(self.node(i)) {
                            w / self.dx
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (b > a)
                    .then(|| Density::new(self.node(a), self.node(b), values))
                    .transpose()?
            }
            _ => None,
        };
        let raw = Measure::finite(atoms, density)?;
        let mass = raw.total_mass();
        if !(mass >= MIN_RECOVERED_MASS) {
            return Err(Error::GridTooSmall { mass });
        }
        raw.normalized()
    }
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

fn spectrum(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(values) {
        b.re = v;
    }
    fft_in_place(&mut buf, false);
    buf
}

/// Linear convolution of lattice vectors with multiplicities.
fn convolve_powers(parts: &[(&[f64], i32)], n: usize) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0); n];
    for (v, k) in parts {
        for (a, s) in acc.iter_mut().zip(spectrum(v, n)) {
            *a *= s.powi(*k);
        }
    }
    fft_in_place(&mut acc, true);
    acc.into_iter().map(|v| v.re / n as f64).collect()
}

/// `μ_1 * ... * μ_N * δ_c`.
pub fn classical_convolve_many(ms: &[Measure], c: f64, grid: Option<&GridSpec>) -> Result<Measure> {
    if ms.is_empty() {
        return Err(Error::InvalidMeasure("classical convolution of an empty list".into()));
    }
    for m in ms {
        if !m.is_probability() {
            return Err(Error::InvalidMeasure(format!(
                "classical convolution needs probability measures, got total mass {}",
                m.total_mass()
            )));
        }
    }
    let atom_count: usize = ms.iter().map(|m| m.atoms().len()).sum();
    if ms.iter().all(Measure::is_atomic) && atom_count <= EXACT_ATOM_LIMIT {
        let out = exact_atomic(ms)?.shift(c);
        return match grid {
            Some(g) => restrict_atoms(&out, g.lo(), g.hi()),
            None => Ok(out),
        };
    }

    let mut groups: Vec<(&Measure, i32)> = Vec::new();
    for m in ms {
        match groups.iter_mut().find(|(g, _)| *g == m) {
            Some((_, k)) => *k += 1,
            None => groups.push((m, 1)),
        }
    }
    let (lo, hi) = groups.iter().fold((0.0, 0.0), |(lo, hi), (m, k)| {
        let (a, b) = m.support_bounds().expect("probability measure");
        (lo + *k as f64 * a, hi + *k as f64 * b)
    });
    let dx = match grid {
        Some(g) => dyadic_floor(g.step()),
        None => dyadic_floor(((hi - lo) / (DEFAULT_POINTS - 1) as f64).max(f64::MIN_POSITIVE)),
    };
    let lattices: Vec<(Lattice, i32)> = groups.iter().map(|(m, k)| (Lattice::discretize(m, dx), *k)).collect();
    let offset: i64 = lattices.iter().map(|(l, k)| l.offset * *k as i64).sum();
    let len: usize = lattices
        .iter()
        .map(|(l, k)| (l.atomic.len() - 1) * *k as usize)
        .sum::<usize>()
        + 1;
    let n = len.next_power_of_two();

    let totals: Vec<(Vec<f64>, i32)> = lattices
        .iter()
        .map(|(l, k)| (l.atomic.iter().zip(&l.continuous).map(|(a, b)| a + b).collect(), *k))
        .collect();
    let total = convolve_powers(&totals.iter().map(|(v, k)| (v.as_slice(), *k)).collect::<Vec<_>>(), n);
    let atomic = if lattices.iter().all(|(l, _)| l.has_atoms()) {
        convolve_powers(
            &lattices
                .iter()
                .map(|(l, k)| (l.atomic.as_slice(), *k))
                .collect::<Vec<_>>(),
            n,
        )
    } else {
        vec![0.0; n]
    };
    let continuous: Vec<f64> = total.iter().zip(&atomic).map(|(t, a)| (t - a).max(0.0)).collect();
    let lattice = Lattice {
        offset,
        dx,
        atomic: atomic[..len].iter().map(|v| v.max(0.0)).collect(),
        continuous: continuous[..len].to_vec(),
    };
    let window = grid.map(|g| (g.lo() - c, g.hi() - c));
    Ok(lattice.into_measure(window)?.shift(c))
}

/// All sums of one atom from each factor, merging coincident locations.
fn exact_atomic(ms: &[Measure]) -> Result<Measure> {
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for m in ms {
        let mut next: Vec<(f64, f64)> = Vec::with_capacity(acc.len() * m.atoms().len());
        for &(x, w) in &acc {
            for a in m.atoms() {
                next.push((x + a.x, w * a.w));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        acc.clear();
        for (x, w) in next {
            match acc.last_mut() {
                Some(last) if (last.0 - x).abs() <= 1e-12 * (1.0 + x.abs()) => last.1 += w,
                _ => acc.push((x, w)),
            }
        }
    }
    Measure::from_atoms(&acc)
}

fn restrict_atoms(m: &Measure, lo: f64, hi: f64) -> Result<Measure> {
    let kept: Vec<(f64, f64)> = m
        .atoms()
        .iter()
        .filter(|a| a.x >= lo && a.x <= hi)
        .map(|a| (a.x, a.w))
        .collect();
    let mass: f64 = kept.iter().map(|p| p.1).sum();
    if !(mass >= MIN_RECOVERED_MASS) {
        return Err(Error::GridTooSmall { mass });
    }
    Measure::from_atoms(&kept)
}

/// Inverse transform of `exp(ψ)` sampled at `t_k = 2πk / (M dx)`, returning
/// lattice masses on `x_j = x0 + j dx`, `j < M`.
pub(crate) fn invert_exponent<F>(psi: F, x0: f64, dx: f64, m: usize) -> Vec<f64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let mut buf: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            let t = 2.0 * PI * kk / (m as f64 * dx);
            psi(t).exp() * Complex64::cis(-t * x0)
        })
        .collect();
    fft_in_place(&mut buf, false);
    buf.into_iter().map(|v| v.re / m as f64).collect()
}

/// Splits lattice masses into spikes (atoms) and a smooth remainder.
pub(crate) fn split_spikes(masses: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = masses.len();
    let mut atomic = vec![0.0; n];
    let mut continuous = vec![0.0; n];
    for i in 0..n {
        let v = masses[i];
        let left = if i > 0 { masses[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { masses[i + 1].abs() } else { 0.0 };
        if v > 1e-9 && v > 50.0 * left.max(right) {
            atomic[i] = v;
        } else {
            continuous[i] = v.max(0.0);
        }
    }
    (atomic, continuous)
}
