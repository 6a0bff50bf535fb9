//! Monte-Carlo BER engine.
//!
//! A trial pushes seeded bursts of `symbols_per_frame` FBMC symbols through
//! OQAM staggering, the synthesis bank, the channel, the analysis bank and
//! the selected equalizer, and counts bit errors until the stop rule fires.
//!
//! The SNR axis is Es/N0 per data symbol: QAM points have unit energy and the
//! filter bank has unit gain, so the complex noise variance added to every
//! sample of the stream is `10^(−snr/10)`.

mod report;
mod scenario;
mod selftest;

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, apply_multipath, true_frequency_response, ChannelProfile};
use crate::error::{Error, Result};
use crate::estimation::{
    equalize, interpolate_cubic, interpolate_linear, nn_train, raw_pilot_estimates, EstimatorKind,
    NeuralEqualizer,
};
use crate::filterbank::FilterBank;
use crate::framing::{
    build_frame_with_layout, deframe_with_layout, training_frame, FrameLayout, SymbolGrid,
};
use crate::grid::Grid;
use crate::oqam::{branch_observations, preprocess, BranchPair};
use crate::protofilter::PrototypeFilter;
use crate::sysconfig::{demap_symbols, map_bits, QamMap};

pub use report::{emit_csv, read_csv, read_csv_from, write_csv};
pub use scenario::{ChannelModel, Scenario, ScenarioFile};
pub use selftest::{
    back_to_back_sir, check_back_to_back_sir, selftest, selftest_with_filter, CheckResult,
    SelfTestReport, SIR_FLOOR_DB,
};

/// Frames decoded concurrently before the stop rule is re-checked.
const FRAME_BATCH: usize = 16;

/// One BER measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub estimator: EstimatorKind,
    pub channel: String,
    pub qam_order: u32,
    pub seed: u64,
    pub wall_time_seconds: f64,
    /// Whether every carrier's perceptrons met the stop tolerance. Always
    /// true for estimators that need no training.
    pub training_converged: bool,
}

impl BerRecord {
    /// Same measurement, ignoring wall time.
    pub fn same_counts(&self, other: &BerRecord) -> bool {
        let strip = |r: &BerRecord| BerRecord {
            wall_time_seconds: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// SplitMix64 finalizer, used to derive decorrelated sub-seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th SNR point of a sweep.
pub fn snr_point_seed(master: u64, index: usize) -> u64 {
    master ^ mix_seed(index as u64)
}

fn frame_seed(trial: u64, frame: u64) -> u64 {
    mix_seed(trial ^ mix_seed(frame.wrapping_add(1) << 1))
}

fn training_seed(trial: u64) -> u64 {
    mix_seed(trial ^ 0x7472_6169_6e69_6e67)
}

/// Wilson score interval for `errors` out of `trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Transmit/receive chain shared by all frames of a trial.
struct Link {
    layout: FrameLayout,
    map: QamMap,
    bank: FilterBank,
    profile: ChannelProfile,
    noise_variance: f64,
}

impl Link {
    fn new(scenario: &Scenario) -> Result<Self> {
        let params = &scenario.params;
        let filter = PrototypeFilter::new(params.overlap_factor, params.fft_size)?;
        Ok(Self {
            layout: FrameLayout::new(params),
            map: QamMap::new(params.qam_order),
            bank: FilterBank::new(filter)?,
            profile: scenario.channel.profile(params.sample_rate)?,
            noise_variance: if scenario.snr_db.is_infinite() {
                0.0
            } else {
                10f64.powf(-scenario.snr_db / 10.0)
            },
        })
    }

    /// Frame on all `M` rows → branch observations on all `M` rows.
    fn transceive(&self, frame: &SymbolGrid, rng: &mut ChaCha8Rng) -> Result<Grid<BranchPair>> {
        let tx = self.bank.synthesize(&preprocess(&frame.values))?;
        let mut rx = apply_multipath(&tx, &self.profile);
        rx.truncate(tx.len());
        let rx = add_noise(&rx, self.noise_variance, rng);
        branch_observations(&self.bank.analyze(&rx)?)
    }
}

/// Per-trial equalizer state.
enum Receiver {
    /// Static response on every occupied carrier.
    Known(Vec<Complex64>),
    Pilots {
        cubic: bool,
        window: usize,
    },
    Neural(NeuralEqualizer),
}

impl Receiver {
    /// Equalized data, symbol-major like [`Deframed::data`](crate::framing::Deframed).
    fn equalize(&self, link: &Link, obs: Grid<BranchPair>) -> Result<Vec<Option<Complex64>>> {
        let layout = &link.layout;
        let rx = deframe_with_layout(&SymbolGrid::with_layout(obs, layout)?, layout)?;
        let data_pos = layout.data_positions();
        let per_symbol = data_pos.len();
        let symbols = rx.pilot_obs.cols();
        let mut out = Vec::with_capacity(rx.data.len());
        match self {
            Receiver::Known(response) => {
                let h: Vec<Complex64> = data_pos.iter().map(|&p| response[p]).collect();
                for chunk in rx.data.chunks_exact(per_symbol) {
                    out.extend(equalize(chunk, &h)?);
                }
            }
            Receiver::Pilots { cubic, window } => {
                let pilots = rx.pilot_obs.map(|o| o.re_branch);
                let positions = layout.pilot_positions();
                for (n, chunk) in rx.data.chunks_exact(per_symbol).enumerate() {
                    let lo = n.saturating_sub((window - 1) / 2);
                    let hi = (lo + window).min(symbols);
                    let hp =
                        raw_pilot_estimates(&pilots.select_cols(lo..hi), layout.pilot_values())?;
                    let est = if *cubic {
                        interpolate_cubic(&hp, &positions, layout.occupied())?
                    } else {
                        interpolate_linear(&hp, &positions, layout.occupied())?
                    };
                    let h: Vec<Complex64> = data_pos.iter().map(|&p| est.response[p]).collect();
                    out.extend(equalize(chunk, &h)?);
                }
            }
            Receiver::Neural(eq) => {
                for chunk in rx.data.chunks_exact(per_symbol) {
                    out.extend(
                        chunk
                            .iter()
                            .zip(&data_pos)
                            .map(|(&o, &p)| Some(eq.apply(p, o))),
                    );
                }
            }
        }
        Ok(out)
    }
}

fn prepare_receiver(scenario: &Scenario, link: &Link) -> Result<Receiver> {
    Ok(match scenario.estimator {
        EstimatorKind::Ideal => {
            let bins: Vec<usize> = link.layout.occupied_rows().collect();
            Receiver::Known(true_frequency_response(
                &link.profile,
                link.layout.fft_size(),
                &bins,
            ))
        }
        EstimatorKind::Linear => Receiver::Pilots {
            cubic: false,
            window: scenario.pilot_window,
        },
        EstimatorKind::Cubic => Receiver::Pilots {
            cubic: true,
            window: scenario.pilot_window,
        },
        EstimatorKind::Neural => {
            let seed = training_seed(scenario.seed);
            let training = training_frame(&scenario.params, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs = link.transceive(&training.grid, &mut rng)?;
            let rows: Vec<usize> = link.layout.occupied_rows().collect();
            let rx = obs.select_rows(&rows);
            let tx = training.grid.values.select_rows(&rows);
            Receiver::Neural(nn_train(&rx, &tx, &scenario.nn, seed)?)
        }
    })
}

/// Bit errors and bits of one data frame.
fn run_frame(scenario: &Scenario, link: &Link, rx: &Receiver, index: u64) -> Result<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(scenario.seed, index));
    let n_bits = scenario.bits_per_frame() as usize;
    let bits: Vec<u8> = (0..n_bits).map(|_| rng.random_range(0..2u8)).collect();
    let data = map_bits(&bits, &link.map)?;
    let frame = build_frame_with_layout(&data, &link.layout)?;
    let obs = link.transceive(&frame, &mut rng)?;
    let points = link.map.points();
    let decided: Vec<Complex64> = rx
        .equalize(link, obs)?
        .into_iter()
        .map(|s| s.unwrap_or_else(|| points[rng.random_range(0..points.len())]))
        .collect();
    if decided.len() != data.len() {
        return Err(Error::InvalidInput(format!(
            "frame misaligned: {} symbols decided, {} sent",
            decided.len(),
            data.len()
        )));
    }
    let errors = demap_symbols(&decided, &link.map)
        .iter()
        .zip(&bits)
        .filter(|(a, b)| a != b)
        .count();
    Ok((errors as u64, n_bits as u64))
}

/// Runs one SNR point until `bit_errors ≥ min_errors` or `bits_sent ≥ max_bits`,
/// checked at every frame boundary. Frames are decoded in parallel batches but
/// accounted in order, so results do not depend on the thread count.
pub fn run_trial(scenario: &Scenario) -> Result<BerRecord> {
    let start = Instant::now();
    scenario.validate()?;
    let link = Link::new(scenario)?;
    let receiver = prepare_receiver(scenario, &link)?;
    let training_converged = match &receiver {
        Receiver::Neural(eq) => eq.converged(),
        _ => true,
    };

    let (mut errors, mut bits) = (0u64, 0u64);
    let mut next = 0u64;
    'outer: loop {
        let batch: Vec<(u64, u64)> = (next..next + FRAME_BATCH as u64)
            .into_par_iter()
            .map(|i| run_frame(scenario, &link, &receiver, i))
            .collect::<Result<_>>()?;
        next += FRAME_BATCH as u64;
        for (e, b) in batch {
            errors += e;
            bits += b;
            if errors >= scenario.min_errors || bits >= scenario.max_bits {
                break 'outer;
            }
        }
    }

    Ok(BerRecord {
        snr_db: scenario.snr_db,
        bits_sent: bits,
        bit_errors: errors,
        ber: errors as f64 / bits as f64,
        estimator: scenario.estimator,
        channel: scenario.channel.label().to_string(),
        qam_order: scenario.params.qam_order.into(),
        seed: scenario.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        training_converged,
    })
}

/// One trial per SNR, each seeded from `(scenario.seed, index)`. Records come
/// back in the order of `snrs`.
pub fn sweep(scenario: &Scenario, snrs: &[f64]) -> Result<Vec<BerRecord>> {
    if snrs.is_empty() {
        return Err(Error::Config("SNR list is empty".into()));
    }
    if snrs.iter().any(|s| s.is_nan()) || snrs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("SNR list must be strictly increasing".into()));
    }
    snrs.par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let point = Scenario {
                snr_db: snr,
                seed: snr_point_seed(scenario.seed, i),
                ..scenario.clone()
            };
            run_trial(&point)
        })
        .collect()
}

/// `start, start + step, …` up to and including `stop` (within rounding).
pub fn snr_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::Config(format!(
            "bad SNR range {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
