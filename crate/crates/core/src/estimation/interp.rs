//! Pilot interpolation across frequency.

use num_complex::Complex64;

use super::ChannelEstimate;
use crate::error::{Error, Result};

fn check_knots(
    values: &[Complex64],
    positions: &[usize],
    occupied: usize,
    min: usize,
) -> Result<()> {
    if values.len() != positions.len() {
        return Err(Error::InvalidInput(format!(
            "{} pilot estimates for {} positions",
            values.len(),
            positions.len()
        )));
    }
    if positions.len() < min {
        return Err(Error::InvalidInput(format!(
            "need at least {min} pilots, got {}",
            positions.len()
        )));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "pilot positions must be strictly increasing".into(),
        ));
    }
    if positions[0] != 0 || positions[positions.len() - 1] + 1 != occupied {
        return Err(Error::InvalidInput(
            "pilots must sit on both edges of the occupied band".into(),
        ));
    }
    Ok(())
}

/// Walks the band segment by segment, handing `(segment index, a)` to `f`
/// for every carrier, where `a = (k − pos_m)/(pos_{m+1} − pos_m)`.
fn fill_segments(
    positions: &[usize],
    occupied: usize,
    mut f: impl FnMut(usize, f64) -> Complex64,
) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(occupied);
    let mut seg = 0;
    for k in 0..occupied {
        while seg + 2 < positions.len() && k >= positions[seg + 1] {
            seg += 1;
        }
        let span = (positions[seg + 1] - positions[seg]) as f64;
        let a = (k as f64 - positions[seg] as f64) / span;
        out.push(f(seg, a));
    }
    out
}

/// `H(k) = (1 − a)·H_p(m) + a·H_p(m + 1)`.
pub fn interpolate_linear(
    pilot_estimates: &[Complex64],
    positions: &[usize],
    occupied: usize,
) -> Result<ChannelEstimate> {
    check_knots(pilot_estimates, positions, occupied, 2)?;
    let response = fill_segments(positions, occupied, |m, a| {
        if a == 0.0 {
            pilot_estimates[m]
        } else if a == 1.0 {
            pilot_estimates[m + 1]
        } else {
            pilot_estimates[m] * (1.0 - a) + pilot_estimates[m + 1] * a
        }
    });
    Ok(ChannelEstimate { response })
}

/// Solves a tridiagonal system by the Thomas algorithm. `sub[i]` multiplies
/// `x[i]` in row `i + 1` and `sup[i]` multiplies `x[i + 1]` in row `i`.
/// Intended for diagonally dominant systems such as the spline equations.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if rhs.len() != n || sub.len() + 1 != n.max(1) || sup.len() + 1 != n.max(1) {
        return Err(Error::InvalidInput(
            "inconsistent tridiagonal system".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![Complex64::default(); n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::InvalidInput("singular tridiagonal system".into()));
    }
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot == 0.0 {
            return Err(Error::InvalidInput("singular tridiagonal system".into()));
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - d[i - 1] * sub[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= next * c[i];
    }
    Ok(d)
}

/// Second derivatives of the natural cubic spline through `(x, y)`; zero at
/// both ends.
pub fn natural_second_derivatives(x: &[f64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::InvalidInput(
            "natural spline needs at least 3 knots".into(),
        ));
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let interior = n - 2;
    let diag: Vec<f64> = (1..n - 1).map(|i| (h[i - 1] + h[i]) / 3.0).collect();
    let off: Vec<f64> = (1..interior).map(|i| h[i] / 6.0).collect();
    let rhs: Vec<Complex64> = (1..n - 1)
        .map(|i| (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1])
        .collect();
    let inner = solve_tridiagonal(&off, &diag, &off, &rhs)?;
    let mut z = Vec::with_capacity(n);
    z.push(Complex64::default());
    z.extend(inner);
    z.push(Complex64::default());
    Ok(z)
}

/// Natural cubic spline through the pilot estimates:
/// `H(k) = A·H_p(m) + B·H_p(m + 1) + C·z(m) + D·z(m + 1)` with `A = 1 − a`,
/// `B = a`, `C = (A³ − A)Δ²/6`, `D = (B³ − B)Δ²/6`.
pub fn interpolate_cubic(
    pilot_estimates: &[Complex64],
    positions: &[usize],
    occupied: usize,
) -> Result<ChannelEstimate> {
    check_knots(pilot_estimates, positions, occupied, 3)?;
    let x: Vec<f64> = positions.iter().map(|&p| p as f64).collect();
    let z = natural_second_derivatives(&x, pilot_estimates)?;
    let response = fill_segments(positions, occupied, |m, a| {
        if a == 0.0 {
            return pilot_estimates[m];
        }
        if a == 1.0 {
            return pilot_estimates[m + 1];
        }
        let span = x[m + 1] - x[m];
        let big_a = 1.0 - a;
        let big_b = a;
        let c = (big_a.powi(3) - big_a) * span * span / 6.0;
        let d = (big_b.powi(3) - big_b) * span * span / 6.0;
        pilot_estimates[m] * big_a + pilot_estimates[m + 1] * big_b + z[m] * c + z[m + 1] * d
    });
    Ok(ChannelEstimate { response })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{true_frequency_response, ChannelProfile};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn grid_positions(occupied: usize) -> Vec<usize> {
        (0..occupied).step_by(9).collect()
    }

    #[test]
    fn linear_midpoint() {
        let est = interpolate_linear(&[c(1.0), c(3.0)], &[0, 9], 10).unwrap();
        assert!((est.response[4] - c(17.0 / 9.0)).norm() < 1e-15);
        assert_eq!(est.response[0], c(1.0));
        assert_eq!(est.response[9], c(3.0));
    }

    #[test]
    fn knot_checks() {
        assert!(interpolate_linear(&[c(1.0)], &[0], 1).is_err());
        assert!(interpolate_linear(&[c(1.0), c(2.0)], &[0, 9], 12).is_err());
        assert!(interpolate_linear(&[c(1.0), c(2.0)], &[1, 9], 10).is_err());
        assert!(interpolate_cubic(&[c(1.0), c(2.0)], &[0, 9], 10).is_err());
        assert!(interpolate_cubic(&[c(1.0), c(2.0), c(3.0)], &[0, 9, 9], 10).is_err());
    }

    #[test]
    fn both_pass_through_knots() {
        let pos = grid_positions(91);
        let vals: Vec<Complex64> = pos
            .iter()
            .map(|&p| Complex64::new((p as f64 * 0.3).sin(), (p as f64 * 0.1).cos()))
            .collect();
        let lin = interpolate_linear(&vals, &pos, 91).unwrap();
        let cub = interpolate_cubic(&vals, &pos, 91).unwrap();
        for (i, &p) in pos.iter().enumerate() {
            assert_eq!(lin.response[p], vals[i]);
            assert_eq!(cub.response[p], vals[i]);
        }
        assert!(cub
            .response
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite()));
    }

    #[test]
    fn constant_and_affine_profiles() {
        let pos = grid_positions(55);
        let k = Complex64::new(0.4, -0.9);
        let flat = vec![k; pos.len()];
        let cub = interpolate_cubic(&flat, &pos, 55).unwrap();
        assert!(cub.response.iter().all(|v| (v - k).norm() < 1e-14));

        let alpha = Complex64::new(0.5, 0.25);
        let beta = Complex64::new(-0.01, 0.02);
        let affine = |x: f64| alpha + beta * x;
        let vals: Vec<Complex64> = pos.iter().map(|&p| affine(p as f64)).collect();
        let x: Vec<f64> = pos.iter().map(|&p| p as f64).collect();
        for z in natural_second_derivatives(&x, &vals).unwrap() {
            assert!(z.norm() < 1e-15);
        }
        let lin = interpolate_linear(&vals, &pos, 55).unwrap();
        let cub = interpolate_cubic(&vals, &pos, 55).unwrap();
        for kk in 0..55 {
            assert!((lin.response[kk] - affine(kk as f64)).norm() < 1e-13);
            assert!((cub.response[kk] - affine(kk as f64)).norm() < 1e-13);
        }
    }

    #[test]
    fn tridiagonal_residual() {
        let x: Vec<f64> = vec![0.0, 1.0, 2.5, 4.0, 7.0, 7.5, 9.0];
        let y: Vec<Complex64> = x
            .iter()
            .map(|v| Complex64::new(v.sin(), v.cos() * 2.0))
            .collect();
        let z = natural_second_derivatives(&x, &y).unwrap();
        let mut max_res: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 1..x.len() - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let lhs = z[i - 1] * (h0 / 6.0) + z[i] * ((h0 + h1) / 3.0) + z[i + 1] * (h1 / 6.0);
            let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            max_res = max_res.max((lhs - rhs).norm());
            scale = scale.max(rhs.norm());
        }
        assert!(max_res / scale <= 1e-10);
        // Second derivative is continuous at interior knots by construction;
        // check first-derivative continuity numerically.
        let est_left = |i: usize| {
            let h = x[i] - x[i - 1];
            (y[i] - y[i - 1]) / h + z[i - 1] * (h / 6.0) + z[i] * (h / 3.0)
        };
        let est_right = |i: usize| {
            let h = x[i + 1] - x[i];
            (y[i + 1] - y[i]) / h - z[i] * (h / 3.0) - z[i + 1] * (h / 6.0)
        };
        for i in 1..x.len() - 1 {
            assert!((est_left(i) - est_right(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn solver_rejects_bad_shapes() {
        assert!(solve_tridiagonal(&[1.0], &[1.0, 2.0, 3.0], &[1.0, 1.0], &[c(1.0); 3]).is_err());
        assert!(solve_tridiagonal(&[], &[0.0], &[], &[c(1.0)]).is_err());
        assert_eq!(
            solve_tridiagonal(&[], &[2.0], &[], &[c(1.0)]).unwrap(),
            vec![c(0.5)]
        );
    }

    #[test]
    fn spline_beats_linear_on_two_tap_channel() {
        let m = 8192;
        let occupied = 5617;
        let start = (m - occupied) / 2;
        let profile = two_tap_profile();
        let bins: Vec<usize> = (start..start + occupied).collect();
        let truth = true_frequency_response(&profile, m, &bins);
        let pos = grid_positions(occupied);
        let knots: Vec<Complex64> = pos.iter().map(|&p| truth[p]).collect();
        let max_err = |est: &ChannelEstimate| {
            est.response
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let lin = max_err(&interpolate_linear(&knots, &pos, occupied).unwrap());
        let cub = max_err(&interpolate_cubic(&knots, &pos, occupied).unwrap());
        assert!(cub < lin, "cubic {cub} vs linear {lin}");
    }

    fn two_tap_profile() -> ChannelProfile {
        use crate::channel::PathSpec;
        use crate::sysconfig::MODE3_SAMPLE_RATE;
        let p = ChannelProfile::from_paths(
            &[
                PathSpec {
                    delay_us: 0.0,
                    attenuation_db: 0.0,
                },
                PathSpec {
                    delay_us: 18.0 / MODE3_SAMPLE_RATE * 1e6,
                    attenuation_db: 6.0,
                },
            ],
            MODE3_SAMPLE_RATE,
        )
        .unwrap();
        assert_eq!(p.taps()[1].delay_samples, 18);
        p
    }
}
