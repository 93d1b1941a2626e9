//! Weak-convergence metrics between finite measures.

use super::Measure;

/// Vertical slack when comparing CDF values.
const CDF_SLACK: f64 = 1e-12;
/// Bisection stops once the bracket on the Lévy distance is this narrow.
const LEVY_TOL: f64 = 1e-8;

/// Points where a CDF jumps or changes shape: atoms, density nodes and the
/// midpoints between density nodes.
fn break_points(m: &Measure) -> Vec<f64> {
    let mut pts: Vec<f64> = m.atoms().iter().map(|a| a.x).collect();
    if let Some(d) = m.density() {
        let n = d.values().len();
        for j in 0..n {
            pts.push(d.node(j));
            if j + 1 < n {
                pts.push(0.5 * (d.node(j) + d.node(j + 1)));
            }
        }
    }
    pts
}

/// Whether `F_a(x - eps) - eps <= F_b(x) <= F_a(x + eps) + eps` at every candidate x,
/// checking right values and left limits.
fn band_holds(a: &Measure, pa: &[f64], b: &Measure, pb: &[f64], eps: f64) -> bool {
    let check = |x: f64| {
        let fb = b.cdf(x);
        let fb_left = b.cdf_left(x);
        let upper_ok = fb <= a.cdf(x + eps) + eps + CDF_SLACK && fb_left <= a.cdf_left(x + eps) + eps + CDF_SLACK;
        let lower_ok = a.cdf(x - eps) - eps <= fb + CDF_SLACK && a.cdf_left(x - eps) - eps <= fb_left + CDF_SLACK;
        upper_ok && lower_ok
    };
    pb.iter().all(|&x| check(x)) && pa.iter().all(|&x| check(x - eps) && check(x + eps))
}

/// Lévy distance `inf{eps > 0 : F_a(x-eps)-eps <= F_b(x) <= F_a(x+eps)+eps for all x}`.
///
/// Exact for atomic measures; for densities the band is checked at nodes and
/// midpoints, so the answer is accurate to the grid resolution.
pub fn levy_distance(a: &Measure, b: &Measure) -> f64 {
    let pa = break_points(a);
    let pb = break_points(b);
    let holds = |eps: f64| band_holds(a, &pa, b, &pb, eps) && band_holds(b, &pb, a, &pa, eps);
    if holds(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = a.total_mass().max(b.total_mass()).max(1.0);
    while hi - lo > LEVY_TOL {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Sup distance between the two CDFs.
pub fn kolmogorov_distance(a: &Measure, b: &Measure) -> f64 {
    break_points(a)
        .into_iter()
        .chain(break_points(b))
        .map(|x| (a.cdf(x) - b.cdf(x)).abs().max((a.cdf_left(x) - b.cdf_left(x)).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_of_identical_measures_is_zero() {
        let m = Measure::from_atoms(&[(-1.0, 0.25), (0.5, 0.75)]).unwrap();
        assert_eq!(levy_distance(&m, &m), 0.0);
    }

    #[test]
    fn levy_between_point_masses() {
        let d = levy_distance(&Measure::dirac(0.0), &Measure::dirac(0.3));
        assert!((d - 0.3).abs() < 1e-6, "{d}");
        // vertical slack caps the distance at 1 for far-apart masses
        let d = levy_distance(&Measure::dirac(0.0), &Measure::dirac(5.0));
        assert!((d - 1.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn levy_for_unnormalized_measures() {
        // atoms at +-1/16 of mass 128/257 each, against the unit mass at 0
        let w = 128.0 / 257.0;
        let s = Measure::finite(
            vec![
                super::super::Atom { x: -1.0 / 16.0, w },
                super::super::Atom { x: 1.0 / 16.0, w },
            ],
            None,
        )
        .unwrap();
        let d = levy_distance(&s, &Measure::dirac(0.0));
        assert!((d - 1.0 / 16.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn kolmogorov_between_point_masses() {
        assert_eq!(kolmogorov_distance(&Measure::dirac(0.0), &Measure::dirac(1.0)), 1.0);
        let b = Measure::from_atoms(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(kolmogorov_distance(&Measure::dirac(0.0), &b), 0.5);
    }
}
