use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimation::{interpolate_cubic, nn_train, NnHyper};
use crate::filterbank::{beta_coeffs, direct_synthesize, synthesize, FilterBank, RealGrid};
use crate::framing::prbs_sequence;
use crate::grid::Grid;
use crate::oqam::{phase, postprocess, preprocess, BranchPair};
use crate::protofilter::{nyquist_residuals, PrototypeFilter, K4_COEFFS};

/// Minimum back-to-back symbol SIR.
pub const SIR_FLOOR_DB: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelfTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckResult {
    match result {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn qpsk(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Grid<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Grid::from_fn(rows, cols, |_, _| {
        Complex64::new(
            if rng.random() { r } else { -r },
            if rng.random() { r } else { -r },
        )
    })
}

fn polyphase_vs_direct() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for m in [8, 16, 32] {
        let filter = PrototypeFilter::new(4, m)?;
        let beta = beta_coeffs(m, 4);
        for _ in 0..20 {
            let grid = RealGrid::from_fn(m, 8, |_, _| rng.random_range(-1.0..1.0));
            let fast = synthesize(&grid, &filter, &beta)?;
            let slow = direct_synthesize(&grid, &filter, &beta)?;
            let num: f64 = fast
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let den: f64 = slow.iter().map(|b| b.norm_sqr()).sum();
            worst = worst.max((num / den).sqrt());
        }
    }
    Ok((worst <= 1e-9, format!("max relative L2 error {worst:.3e}")))
}

fn oqam_round_trip() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let symbols = Grid::from_fn(16, 8, |_, _| {
        Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    });
    let real = preprocess(&symbols);
    let rephased = Grid::from_fn(real.rows(), real.cols(), |k, m| {
        phase(k, m) * real.get(k, m)
    });
    let back = postprocess(&rephased)?;
    let worst = back
        .as_slice()
        .iter()
        .zip(symbols.as_slice())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max symbol error {worst:.3e}")))
}

/// Symbol-domain SIR in dB of OQAM → synthesis → analysis → OQAM⁻¹ with an
/// ideal channel, over random QPSK on every carrier.
pub fn back_to_back_sir(filter: &PrototypeFilter, symbols: usize, seed: u64) -> Result<f64> {
    let m = filter.subcarriers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx = qpsk(m, symbols, &mut rng);
    let bank = FilterBank::new(filter.clone())?;
    let stream = bank.synthesize(&preprocess(&tx))?;
    let rx = postprocess(&bank.analyze(&stream)?)?;
    let signal: f64 = tx.as_slice().iter().map(|x| x.norm_sqr()).sum();
    let error: f64 = rx
        .as_slice()
        .iter()
        .zip(tx.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(10.0 * (signal / error).log10())
}

/// Back-to-back SIR at `M ∈ {16, 64, 512}` for filters from `make(M)`. The
/// small bank is where a single bad tap shows up most.
pub fn check_back_to_back_sir(make: &dyn Fn(usize) -> Result<PrototypeFilter>) -> CheckResult {
    let run = || -> Result<(bool, String)> {
        let mut parts = Vec::new();
        let mut ok = true;
        for m in [16, 64, 512] {
            let sir = back_to_back_sir(&make(m)?, 16, 3)?;
            ok &= sir >= SIR_FLOOR_DB;
            parts.push(format!("M={m}: {sir:.1} dB"));
        }
        Ok((ok, parts.join(", ")))
    };
    outcome("back_to_back_sir", run())
}

fn nyquist() -> Result<(bool, String)> {
    let r = nyquist_residuals(&K4_COEFFS)?;
    let worst = r.iter().cloned().fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("max residual {worst:.3e}")))
}

fn prbs_period() -> Result<(bool, String)> {
    let seq = prbs_sequence(2 * 2047 + 12);
    let repeats = seq[..2047] == seq[2047..2 * 2047];
    let shorter = (1..2047).find(|&p| 2047 % p == 0 && seq[..2047 - p] == seq[p..2047]);
    let head_ok = seq[..11].iter().all(|&b| b == 1) && seq[11] == 0;
    Ok((
        repeats && shorter.is_none() && head_ok,
        format!("period 2047 repeats: {repeats}, shorter period: {shorter:?}, first 12 bits ok: {head_ok}"),
    ))
}

fn spline_knots() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let positions: Vec<usize> = (0..40).map(|i| 9 * i).collect();
    let hp: Vec<Complex64> = positions
        .iter()
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let est = interpolate_cubic(&hp, &positions, 352)?;
    let worst = positions
        .iter()
        .zip(&hp)
        .map(|(&p, h)| (est.response[p] - h).norm())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max knot deviation {worst:.3e}")))
}

fn least_squares(x: &[[f64; 2]], d: &[f64]) -> [f64; 2] {
    let (mut a, mut b, mut c, mut p, mut q) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (xi, di) in x.iter().zip(d) {
        a += xi[0] * xi[0];
        b += xi[0] * xi[1];
        c += xi[1] * xi[1];
        p += xi[0] * di;
        q += xi[1] * di;
    }
    let det = a * c - b * b;
    [(c * p - b * q) / det, (a * q - b * p) / det]
}

fn lms_vs_least_squares() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let gains = [
        Complex64::new(0.5, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::from_polar(0.8, std::f64::consts::FRAC_PI_4),
    ];
    // Every carrier sees the four QPSK points once, in a rotated order.
    let tx = Grid::from_fn(24, 4, |k, n| {
        Complex64::from_polar(
            1.0,
            std::f64::consts::FRAC_PI_4 * (2 * ((n + k) % 4) + 1) as f64,
        )
    });
    for g in gains {
        let rx = tx.map(|&x| BranchPair::uniform(g * x));
        let eq = nn_train(&rx, &tx, &NnHyper::default(), 0)?;
        for k in 0..tx.rows() {
            let x: Vec<[f64; 2]> = rx
                .row(k)
                .iter()
                .map(|o| [o.re_branch.re, o.re_branch.im])
                .collect();
            let re = least_squares(&x, &tx.row(k).iter().map(|v| v.re).collect::<Vec<_>>());
            let im = least_squares(&x, &tx.row(k).iter().map(|v| v.im).collect::<Vec<_>>());
            let w = eq.weight_matrix(k);
            let frob = ((w[0][0] - re[0]).powi(2)
                + (w[0][1] - re[1]).powi(2)
                + (w[1][0] - im[0]).powi(2)
                + (w[1][1] - im[1]).powi(2))
            .sqrt();
            worst = worst.max(frob);
        }
    }
    Ok((worst <= 1e-2, format!("max Frobenius distance {worst:.3e}")))
}

/// The full oracle suite with a custom filter for the back-to-back check.
pub fn selftest_with_filter(make: &dyn Fn(usize) -> Result<PrototypeFilter>) -> SelfTestReport {
    SelfTestReport {
        checks: vec![
            outcome("polyphase_vs_direct", polyphase_vs_direct()),
            outcome("oqam_round_trip", oqam_round_trip()),
            check_back_to_back_sir(make),
            outcome("nyquist_residuals", nyquist()),
            outcome("prbs_period", prbs_period()),
            outcome("spline_knot_pass_through", spline_knots()),
            outcome("lms_vs_least_squares", lms_vs_least_squares()),
        ],
    }
}

pub fn selftest() -> SelfTestReport {
    selftest_with_filter(&|m| PrototypeFilter::new(4, m))
}
