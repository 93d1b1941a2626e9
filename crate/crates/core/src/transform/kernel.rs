//! Cauchy transform of a measure whose density is linear between grid nodes.
//!
//! Each density cell is integrated exactly: with a logarithm when `z` is close
//! to the cell, with a convergent series in `(h/2)/(z - midpoint)` otherwise.
//! The exact form stays accurate arbitrarily close to the real axis, which
//! Stieltjes inversion and the subordination solver depend on.

use num_complex::Complex64;

use crate::measure::{Density, Measure};

/// Cells closer than this many cell widths use the logarithmic form.
const NEAR_CELLS: f64 = 8.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct CauchyParts {
    /// `G(z)`.
    pub g: Complex64,
    /// `G'(z)`.
    pub dg: Complex64,
    /// `G(z) - mass / z`, computed without cancellation.
    pub excess: Complex64,
}

impl CauchyParts {
    /// `F(z) - z = (1 - z G(z)) / G(z)`, accurate for large `|z|`.
    pub fn f_minus_z(&self, z: Complex64, mass: f64) -> Complex64 {
        ((1.0 - mass) - z * self.excess) / self.g
    }

    /// `F'(z) = -G'(z) / G(z)^2`.
    pub fn df(&self) -> Complex64 {
        -self.dg / (self.g * self.g)
    }
}

/// Requires `Im z > 0`. Direct sum over all cells; see [`Kernel`] for
/// repeated evaluation.
pub(crate) fn cauchy_parts(m: &Measure, z: Complex64) -> CauchyParts {
    let mut acc = CauchyParts::zero();
    add_atoms(&mut acc, m, z);
    if let Some(d) = m.density() {
        for j in 0..d.values().len() - 1 {
            add_cell(&mut acc, d, j, z);
        }
    }
    acc
}

impl CauchyParts {
    fn zero() -> Self {
        let o = Complex64::new(0.0, 0.0);
        CauchyParts { g: o, dg: o, excess: o }
    }
}

fn add_atoms(acc: &mut CauchyParts, m: &Measure, z: Complex64) {
    for a in m.atoms() {
        let r = 1.0 / (z - a.x);
        acc.g += a.w * r;
        acc.dg -= a.w * r * r;
        acc.excess += a.w * a.x * r / z;
    }
}

fn add_cell(acc: &mut CauchyParts, d: &Density, j: usize, z: Complex64) {
    let v = d.values();
    let (p0, p1) = (v[j], v[j + 1]);
    if p0 == 0.0 && p1 == 0.0 {
        return;
    }
    let x0 = d.node(j);
    let x1 = d.node(j + 1);
    let hj = x1 - x0;
    let q = 0.5 * hj;
    let xm = 0.5 * (x0 + x1);
    let pm = 0.5 * (p0 + p1);
    let slope = (p1 - p0) / hj;
    let c0 = pm * hj;
    let dist = z - xm;
    if dist.norm() > NEAR_CELLS * hj {
        // G_cell = sum_j [2 pm u^{2j+1}/(2j+1) + 2 slope q u^{2j+2}/(2j+3)], u = q/dist
        let u = q / dist;
        let u2 = u * u;
        let mut upow = u;
        let mut rest = Complex64::new(0.0, 0.0);
        let mut dsum = Complex64::new(0.0, 0.0);
        let mut k = 0.0;
        loop {
            let odd = 2.0 * slope * q * upow * u;
            if k > 0.0 {
                rest += 2.0 * pm * upow / (2.0 * k + 1.0);
            }
            rest += odd / (2.0 * k + 3.0);
            dsum += 2.0 * pm * upow + odd * (2.0 * k + 2.0) / (2.0 * k + 3.0);
            upow *= u2;
            k += 1.0;
            if upow.norm() < 1e-18 {
                break;
            }
        }
        acc.g += c0 / dist + rest;
        acc.dg -= dsum / dist;
        acc.excess += c0 * xm / (dist * z) + rest;
    } else {
        let r0 = z - x0;
        let r1 = z - x1;
        let log_ratio = r0.ln() - r1.ln();
        let p_ext = p0 + slope * r0;
        let cell = p_ext * log_ratio - slope * hj;
        acc.g += cell;
        acc.dg += slope * log_ratio + p_ext * (1.0 / r0 - 1.0 / r1);
        acc.excess += cell - c0 / z;
    }
}

/// Moments kept per tree node.
const TERMS: usize = 22;
/// Cells per leaf.
const LEAF: usize = 16;
/// A node is summarized by its moments once `|z - c| >= FAR * half_width`,
/// which bounds the truncation error by `FAR^-TERMS`.
const FAR: f64 = 6.0;

struct Node {
    cells: (usize, usize),
    center: f64,
    half: f64,
    moments: [f64; TERMS],
    children: Option<(usize, usize)>,
}

/// Cauchy transform with a binary tree of cell ranges: far ranges are
/// summed through their moments `∫ (t - c)^k ρ(t) dt`, near cells exactly.
pub(crate) struct Kernel<'a> {
    m: &'a Measure,
    nodes: Vec<Node>,
}

impl<'a> Kernel<'a> {
    pub fn new(m: &'a Measure) -> Self {
        let mut nodes = Vec::new();
        if let Some(d) = m.density() {
            let cells = d.values().len() - 1;
            if cells > 4 * LEAF {
                build(d, 0, cells, &mut nodes);
            }
        }
        Kernel { m, nodes }
    }

    pub fn measure(&self) -> &'a Measure {
        self.m
    }

    pub fn parts(&self, z: Complex64) -> CauchyParts {
        if self.nodes.is_empty() {
            return cauchy_parts(self.m, z);
        }
        let d = self.m.density().expect("tree implies a density");
        let mut acc = CauchyParts::zero();
        add_atoms(&mut acc, self.m, z);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.moments[0] == 0.0 && node.moments.iter().all(|&v| v == 0.0) {
                continue;
            }
            let dist = z - node.center;
            if dist.norm() >= FAR * node.half {
                let r = 1.0 / dist;
                let mut rk = r;
                let mut rest = Complex64::new(0.0, 0.0);
                let mut dg = Complex64::new(0.0, 0.0);
                for (k, &mk) in node.moments.iter().enumerate() {
                    let term = mk * rk;
                    if k > 0 {
                        rest += term;
                    }
                    dg -= (k + 1) as f64 * term * r;
                    rk *= r;
                }
                let m0 = node.moments[0];
                acc.g += m0 * r + rest;
                acc.dg += dg;
                acc.excess += m0 * node.center / (z * dist) + rest;
            } else if let Some((a, b)) = node.children {
                stack.push(a);
                stack.push(b);
            } else {
                for j in node.cells.0..node.cells.1 {
                    add_cell(&mut acc, d, j, z);
                }
            }
        }
        acc
    }
}

fn build(d: &Density, lo: usize, hi: usize, nodes: &mut Vec<Node>) -> usize {
    let x_lo = d.node(lo);
    let x_hi = d.node(hi);
    let center = 0.5 * (x_lo + x_hi);
    let mut moments = [0.0; TERMS];
    let v = d.values();
    for j in lo..hi {
        let (x0, x1) = (d.node(j), d.node(j + 1));
        let slope = (v[j + 1] - v[j]) / (x1 - x0);
        // ρ(t) = alpha + slope (t - c) on the cell
        let alpha = v[j] + slope * (center - x0);
        let (u0, u1) = (x0 - center, x1 - center);
        let (mut a0, mut a1) = (u0, u1);
        for (k, mk) in moments.iter_mut().enumerate() {
            let (b0, b1) = (a0 * u0, a1 * u1);
            *mk += alpha * (a1 - a0) / (k + 1) as f64 + slope * (b1 - b0) / (k + 2) as f64;
            a0 = b0;
            a1 = b1;
        }
    }
    let idx = nodes.len();
    nodes.push(Node {
        cells: (lo, hi),
        center,
        half: 0.5 * (x_hi - x_lo),
        moments,
        children: None,
    });
    if hi - lo > LEAF {
        let mid = lo + (hi - lo) / 2;
        let a = build(d, lo, mid, nodes);
        let b = build(d, mid, hi, nodes);
        nodes[idx].children = Some((a, b));
    }
    idx
}
