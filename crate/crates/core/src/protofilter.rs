//! Frequency-sampling design of the Nyquist prototype filter.
//!
//! The prototype is specified by `K` samples `h_0..h_{K-1}` of its frequency
//! response taken every `1/(K·M)` cycles per sample. The time response is the
//! cosine sum of those samples, evaluated with a one-sample offset so the
//! length-`K·M − 1` filter is exactly symmetric.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Frequency coefficients for the `K = 4` design, signed as used.
#[allow(clippy::approx_constant)]
pub const K4_COEFFS: [f64; 4] = [1.0, -0.9719598, 0.7071068, -0.2351470];

/// Frequency coefficients for overlap factor `k`.
pub fn design_coeffs(k: usize) -> Result<Vec<f64>> {
    match k {
        1 => Ok(vec![1.0]),
        4 => Ok(K4_COEFFS.to_vec()),
        other => Err(Error::Config(format!(
            "no prototype design for overlap factor {other} (supported: 1, 4)"
        ))),
    }
}

/// Time-domain taps, normalized so the centre tap is 1.
pub fn impulse_response(coeffs: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 8 || !m.is_power_of_two() {
        return Err(Error::Config(format!(
            "subcarrier count must be a power of two >= 8, got {m}"
        )));
    }
    if coeffs.is_empty() {
        return Err(Error::InvalidInput("empty coefficient set".into()));
    }
    let k = coeffs.len();
    let len = k * m - 1;
    let km = (k * m) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let n = (i + 1) as f64;
            coeffs[0]
                + 2.0
                    * coeffs[1..]
                        .iter()
                        .enumerate()
                        .map(|(j, h)| h * (2.0 * PI * (j + 1) as f64 * n / km).cos())
                        .sum::<f64>()
        })
        .collect();
    let centre = taps[k * m / 2 - 1];
    if centre == 0.0 {
        return Err(Error::InvalidInput(
            "prototype has a zero centre tap".into(),
        ));
    }
    for t in &mut taps {
        *t /= centre;
    }
    Ok(taps)
}

/// Residuals of the Nyquist conditions for a `K = 4` coefficient set:
/// `h0 + 2(h1 + h2 + h3)`, `h1² + h3² − 1` and `2h2² − 1`.
pub fn nyquist_residuals(coeffs: &[f64]) -> Result<[f64; 3]> {
    let [h0, h1, h2, h3] = <[f64; 4]>::try_from(coeffs).map_err(|_| {
        Error::InvalidInput(format!(
            "Nyquist residuals need 4 coefficients, got {}",
            coeffs.len()
        ))
    })?;
    Ok([
        h0 + 2.0 * (h1 + h2 + h3),
        h1 * h1 + h3 * h3 - 1.0,
        2.0 * h2 * h2 - 1.0,
    ])
}

/// A designed prototype filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    overlap: usize,
    subcarriers: usize,
    freq_coeffs: Vec<f64>,
    taps: Vec<f64>,
}

impl PrototypeFilter {
    pub fn new(overlap: usize, subcarriers: usize) -> Result<Self> {
        let freq_coeffs = design_coeffs(overlap)?;
        let taps = impulse_response(&freq_coeffs, subcarriers)?;
        Ok(Self {
            overlap,
            subcarriers,
            freq_coeffs,
            taps,
        })
    }

    /// Wraps externally supplied taps, e.g. a deliberately corrupted copy.
    pub fn from_taps(overlap: usize, subcarriers: usize, taps: Vec<f64>) -> Result<Self> {
        if taps.len() != overlap * subcarriers - 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} taps, got {}",
                overlap * subcarriers - 1,
                taps.len()
            )));
        }
        Ok(Self {
            overlap,
            subcarriers,
            freq_coeffs: Vec::new(),
            taps,
        })
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn freq_coeffs(&self) -> &[f64] {
        &self.freq_coeffs
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// `Lp = K·M − 1`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// |DTFT| of the taps at `f` cycles per sample.
    pub fn magnitude_at(&self, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, t) in self.taps.iter().enumerate() {
            let ph = -2.0 * PI * f * i as f64;
            re += t * ph.cos();
            im += t * ph.sin();
        }
        re.hypot(im)
    }
}

/// Magnitude response sampled at `n_points` uniform frequencies covering
/// `[-0.5, 0.5)` cycles per sample, in dB relative to DC.
pub fn frequency_response(filter: &PrototypeFilter, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 64 {
        return Err(Error::InvalidInput(format!(
            "need at least 64 frequency points, got {n_points}"
        )));
    }
    let dc = filter.magnitude_at(0.0);
    Ok((0..n_points)
        .map(|i| {
            let f = -0.5 + i as f64 / n_points as f64;
            (f, 20.0 * (filter.magnitude_at(f) / dc).log10())
        })
        .collect())
}
