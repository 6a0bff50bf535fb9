//! Static tapped-delay-line multipath and AWGN.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One path as specified: excess delay and attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub delay_us: f64,
    pub attenuation_db: f64,
}

/// A path snapped to the sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTap {
    pub delay_samples: usize,
    pub gain: Complex64,
}

/// Brazil A: six static paths.
pub const BRAZIL_A: [PathSpec; 6] = [
    PathSpec {
        delay_us: 0.0,
        attenuation_db: 0.0,
    },
    PathSpec {
        delay_us: 0.15,
        attenuation_db: 13.8,
    },
    PathSpec {
        delay_us: 2.2,
        attenuation_db: 16.2,
    },
    PathSpec {
        delay_us: 3.05,
        attenuation_db: 14.9,
    },
    PathSpec {
        delay_us: 5.86,
        attenuation_db: 13.6,
    },
    PathSpec {
        delay_us: 5.93,
        attenuation_db: 16.4,
    },
];

/// A multipath profile resolved at a given sample rate, normalized to unit
/// total power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    paths: Vec<PathSpec>,
    taps: Vec<ResolvedTap>,
}

impl ChannelProfile {
    /// Single unit tap at delay zero.
    pub fn identity() -> Self {
        Self {
            paths: Vec::new(),
            taps: vec![ResolvedTap {
                delay_samples: 0,
                gain: Complex64::new(1.0, 0.0),
            }],
        }
    }

    /// Rounds each delay to the nearest sample, sums colliding taps
    /// coherently (zero phase) and scales to `Σ|gain|² = 1`. An empty list
    /// gives the identity channel.
    pub fn from_paths(paths: &[PathSpec], sample_rate: f64) -> Result<Self> {
        if sample_rate.is_nan() || sample_rate <= 0.0 {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if paths.is_empty() {
            return Ok(Self::identity());
        }
        for p in paths {
            if p.delay_us.is_nan() || p.delay_us < 0.0 || !p.attenuation_db.is_finite() {
                return Err(Error::Config(format!("invalid path {p:?}")));
            }
        }
        if paths.windows(2).any(|w| w[1].delay_us <= w[0].delay_us) {
            return Err(Error::Config(
                "path delays must be strictly increasing".into(),
            ));
        }
        let mut taps: Vec<ResolvedTap> = Vec::new();
        for p in paths {
            let delay_samples = (p.delay_us * 1e-6 * sample_rate).round() as usize;
            let gain = Complex64::new(10f64.powf(-p.attenuation_db / 20.0), 0.0);
            match taps.last_mut() {
                Some(last) if last.delay_samples == delay_samples => last.gain += gain,
                _ => taps.push(ResolvedTap {
                    delay_samples,
                    gain,
                }),
            }
        }
        let power: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
        let scale = power.sqrt().recip();
        for t in &mut taps {
            t.gain *= scale;
        }
        Ok(Self {
            paths: paths.to_vec(),
            taps,
        })
    }

    /// Loads a JSON list of `{delay_us, attenuation_db}` objects.
    pub fn from_json_file(path: impl AsRef<Path>, sample_rate: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let paths: Vec<PathSpec> = serde_json::from_str(&text)?;
        Self::from_paths(&paths, sample_rate)
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn taps(&self) -> &[ResolvedTap] {
        &self.taps
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay_samples).max().unwrap_or(0)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }
}

pub fn brazil_a_profile(sample_rate: f64) -> Result<ChannelProfile> {
    ChannelProfile::from_paths(&BRAZIL_A, sample_rate)
}

/// `y[n] = Σ gain · x[n − delay]`; the output is longer by the maximum delay.
pub fn apply_multipath(stream: &[Complex64], profile: &ChannelProfile) -> Vec<Complex64> {
    if stream.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::default(); stream.len() + profile.max_delay()];
    for tap in profile.taps() {
        for (o, x) in out[tap.delay_samples..].iter_mut().zip(stream) {
            *o += tap.gain * x;
        }
    }
    out
}

/// Noise level relative to the average power of the stream it is added to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
}

impl NoiseSpec {
    /// Complex noise variance for a stream of the given average power.
    pub fn variance(&self, signal_power: f64) -> f64 {
        signal_power / 10f64.powf(self.snr_db / 10.0)
    }
}

pub fn mean_power(stream: &[Complex64]) -> f64 {
    stream.iter().map(|v| v.norm_sqr()).sum::<f64>() / stream.len().max(1) as f64
}

/// Adds circular Gaussian noise of total variance `variance`.
pub fn add_noise<R: Rng>(stream: &[Complex64], variance: f64, rng: &mut R) -> Vec<Complex64> {
    if variance <= 0.0 {
        return stream.to_vec();
    }
    let sigma = (variance / 2.0).sqrt();
    stream
        .iter()
        .map(|&x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(re, im) * sigma
        })
        .collect()
}

/// AWGN at `snr_db` relative to the measured stream power. `+∞` returns the
/// input unchanged.
pub fn apply_awgn(stream: &[Complex64], snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    if stream.is_empty() {
        return Err(Error::InvalidInput(
            "cannot add noise to an empty stream".into(),
        ));
    }
    if snr_db == f64::INFINITY {
        return Ok(stream.to_vec());
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidInput("SNR is NaN".into()));
    }
    let variance = NoiseSpec { snr_db }.variance(mean_power(stream));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(add_noise(stream, variance, &mut rng))
}

/// `H[k] = Σ gain · exp(−j2π·k·delay/M)` at each given absolute FFT bin.
pub fn true_frequency_response(
    profile: &ChannelProfile,
    m: usize,
    bins: &[usize],
) -> Vec<Complex64> {
    bins.iter()
        .map(|&k| {
            profile
                .taps()
                .iter()
                .map(|t| {
                    let turns = ((k * t.delay_samples) % m) as f64 / m as f64;
                    t.gain * Complex64::from_polar(1.0, -2.0 * PI * turns)
                })
                .sum()
        })
        .collect()
}
