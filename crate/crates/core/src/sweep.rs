//! Continuation of a pointwise solver along horizontal lines in the upper
//! half-plane. Shared by the free convolution and free Lévy-Hinčin solvers.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Points per independently anchored chunk. Fixed so results do not depend
/// on the thread count.
pub(crate) const CHUNK: usize = 64;

const DESCENT_STEPS: usize = 24;
const MAX_SPLITS: u32 = 12;

pub(crate) trait PointSolver: Sync {
    type State: Clone + Send;

    /// Height above the target at which a cold start is trusted.
    fn anchor_height(&self) -> f64;

    /// Initial guess at a point high above the support.
    fn cold_seed(&self, z: Complex64) -> Self::State;

    /// Solution at `z` starting from a nearby solution, or `None` if the local
    /// solve fails.
    fn solve(&self, z: Complex64, start: &Self::State) -> Option<Self::State>;

    /// Solution at `z` starting from [`cold_seed`](Self::cold_seed).
    fn solve_cold(&self, z: Complex64, start: &Self::State) -> Option<Self::State> {
        self.solve(z, start)
    }

    fn cauchy(&self, z: Complex64, state: &Self::State) -> Complex64;

    fn stall(&self, z: Complex64) -> Error;
}

/// Follows the solution from `(from, state)` to `to`, splitting the segment
/// when a direct step fails.
pub(crate) fn track<S: PointSolver>(s: &S, from: Complex64, state: &S::State, to: Complex64) -> Option<S::State> {
    track_depth(s, from, state, to, 0)
}

fn track_depth<S: PointSolver>(
    s: &S,
    from: Complex64,
    state: &S::State,
    to: Complex64,
    depth: u32,
) -> Option<S::State> {
    if let Some(next) = s.solve(to, state) {
        return Some(next);
    }
    if depth >= MAX_SPLITS {
        return None;
    }
    let mid = 0.5 * (from + to);
    let half = track_depth(s, from, state, mid, depth + 1)?;
    track_depth(s, mid, &half, to, depth + 1)
}

/// Cold start at `z + i Y`, then geometric descent in height down to `z`.
pub(crate) fn descend<S: PointSolver>(s: &S, z: Complex64) -> Result<S::State> {
    let top = z.im + s.anchor_height();
    let mut at = Complex64::new(z.re, top);
    let mut state = s.solve_cold(at, &s.cold_seed(at)).ok_or_else(|| s.stall(at))?;
    for k in 1..=DESCENT_STEPS {
        let y = top * (z.im / top).powf(k as f64 / DESCENT_STEPS as f64);
        let next = Complex64::new(z.re, y);
        state = track(s, at, &state, next).ok_or_else(|| s.stall(next))?;
        at = next;
    }
    Ok(state)
}

pub(crate) fn cauchy_at<S: PointSolver>(s: &S, z: Complex64) -> Result<Complex64> {
    let state = descend(s, z)?;
    Ok(s.cauchy(z, &state))
}

/// `G(x + i eps)` along `xs`, warm-started point to point inside fixed chunks.
pub(crate) fn cauchy_on_line<S: PointSolver>(s: &S, xs: &[f64], eps: f64) -> Result<Vec<Complex64>> {
    let chunks: Vec<Result<Vec<Complex64>>> = xs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut prev: Option<(Complex64, S::State)> = None;
            for &x in chunk {
                let z = Complex64::new(x, eps);
                let state = match &prev {
                    Some((pz, ps)) => match track(s, *pz, ps, z) {
                        Some(st) => st,
                        None => descend(s, z)?,
                    },
                    None => descend(s, z)?,
                };
                out.push(s.cauchy(z, &state));
                prev = Some((z, state));
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(xs.len());
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// As [`cauchy_on_line`], but a point where both tracking and a fresh descent
/// fail is reported as `None`; the next point continues from the last solved one.
pub(crate) fn cauchy_on_line_partial<S: PointSolver>(s: &S, xs: &[f64], eps: f64) -> Vec<Option<Complex64>> {
    let chunks: Vec<Vec<Option<Complex64>>> = xs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut prev: Option<(Complex64, S::State)> = None;
            for &x in chunk {
                let z = Complex64::new(x, eps);
                let state = prev
                    .as_ref()
                    .and_then(|(pz, ps)| track(s, *pz, ps, z))
                    .or_else(|| descend(s, z).ok());
                out.push(state.as_ref().map(|st| s.cauchy(z, st)));
                if let Some(st) = state {
                    prev = Some((z, st));
                }
            }
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}
