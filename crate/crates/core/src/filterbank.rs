//! Polyphase synthesis and analysis filter banks.
//!
//! Synthesis takes one real OQAM sample per carrier and half-symbol. Each
//! column is rotated by the OQAM phase and the beta multiplier, transformed
//! by an M-point inverse DFT and pushed through the `M` polyphase branches of
//! the prototype (`taps[p], taps[p + M], ...`). Consecutive columns overlap
//! and add at a stride of `M/2` samples.
//!
//! Analysis is the adjoint: for every column it folds the windowed stream
//! through the same branches, applies a forward DFT and removes the beta
//! multiplier. The OQAM phase is left on the output; [`crate::oqam`] removes
//! it. Both transforms are scaled by `1/√M`, and the taps are scaled to
//! energy `M`, so a carrier round trip has unit gain.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{dimension, Error, Result};
use crate::grid::Grid;
use crate::oqam::phase;
use crate::protofilter::PrototypeFilter;

/// Real OQAM-domain samples, `M` carriers × half-symbol columns.
pub type RealGrid = Grid<f64>;
/// Complex analysis-bank output, `M` carriers × half-symbol columns.
pub type ComplexGrid = Grid<Complex64>;
/// Channel-facing complex baseband samples.
pub type SampleStream = Vec<Complex64>;

/// Per-carrier unit-modulus phase factors.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaVector(Vec<Complex64>);

impl BetaVector {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `β_k = (−1)^k · exp(−jπk(Lp − 1)/M)` with `Lp = K·M − 1`.
pub fn beta_coeffs(m: usize, k: usize) -> BetaVector {
    let lp = (k * m) as f64 - 1.0;
    BetaVector(
        (0..m)
            .map(|c| {
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                // Reduce the angle before evaluating so large M keeps precision.
                let turns = (c as f64 * (lp - 1.0) / (2.0 * m as f64)).rem_euclid(1.0);
                Complex64::from_polar(sign, -2.0 * PI * turns)
            })
            .collect(),
    )
}

/// Number of samples produced for `columns` half-symbol columns.
pub fn stream_len(columns: usize, m: usize, filter_len: usize) -> usize {
    if columns == 0 {
        0
    } else {
        (columns - 1) * m / 2 + filter_len
    }
}

/// Tap scale giving the synthesis/analysis cascade unit gain.
fn tap_gain(filter: &PrototypeFilter) -> f64 {
    (filter.subcarriers() as f64 / filter.energy()).sqrt()
}

/// Delay of the synthesis → matched-filter cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PipelineDelay {
    pub samples: usize,
    pub half_symbols: usize,
    pub residual_samples: usize,
}

impl PipelineDelay {
    fn from_samples(samples: usize, m: usize) -> Self {
        Self {
            samples,
            half_symbols: samples / (m / 2),
            residual_samples: samples % (m / 2),
        }
    }
}

fn delay_cache() -> &'static Mutex<HashMap<(usize, usize), PipelineDelay>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), PipelineDelay>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cascade delay for `(M, K)`, measured by pushing a carrier-0 pulse through
/// synthesis and a causal carrier-0 matched filter. Cached per `(M, K)`.
pub fn pipeline_delay(m: usize, k: usize) -> Result<PipelineDelay> {
    if let Some(d) = delay_cache().lock().unwrap().get(&(m, k)) {
        return Ok(*d);
    }
    let filter = PrototypeFilter::new(k, m)?;
    let d = measure_delay(&filter, &beta_coeffs(m, k))?;
    delay_cache().lock().unwrap().insert((m, k), d);
    Ok(d)
}

fn measure_delay(filter: &PrototypeFilter, beta: &BetaVector) -> Result<PipelineDelay> {
    let m = filter.subcarriers();
    let mut pulse = RealGrid::zeros(m, 1);
    pulse.set(0, 0, 1.0);
    let bank = Bank::new(filter, beta)?;
    let tx = bank.synthesize(&pulse)?;

    // Causal matched filter for carrier 0: time-reversed conjugate of the
    // carrier-0 synthesis pulse, applied by FFT convolution.
    let gain = tap_gain(filter) / (m as f64).sqrt();
    let rx_filter: Vec<Complex64> = filter
        .taps()
        .iter()
        .rev()
        .map(|&t| Complex64::new(t * gain, 0.0) * beta.as_slice()[0].conj())
        .collect();
    let n = (tx.len() + rx_filter.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a = tx.clone();
    a.resize(n, Complex64::default());
    let mut b = rx_filter;
    b.resize(n, Complex64::default());
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let lag = a[..tx.len() + filter.len() - 1]
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, v)| {
            if v.norm() > best.1 {
                (i, v.norm())
            } else {
                best
            }
        })
        .0;
    Ok(PipelineDelay::from_samples(lag, m))
}

/// FFT plans and scaled taps shared by synthesis and analysis.
struct Bank {
    m: usize,
    taps: Vec<f64>,
    beta: Vec<Complex64>,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl Bank {
    fn new(filter: &PrototypeFilter, beta: &BetaVector) -> Result<Self> {
        let m = filter.subcarriers();
        if beta.len() != m {
            return Err(dimension(format!("{m} beta factors"), beta.len()));
        }
        let gain = tap_gain(filter);
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            taps: filter.taps().iter().map(|t| t * gain).collect(),
            beta: beta.as_slice().to_vec(),
            ifft: planner.plan_fft_inverse(m),
            fft: planner.plan_fft_forward(m),
        })
    }

    fn synthesize(&self, grid: &RealGrid) -> Result<SampleStream> {
        let m = self.m;
        if grid.rows() != m {
            return Err(dimension(format!("{m} carrier rows"), grid.rows()));
        }
        let lp = self.taps.len();
        let mut out = vec![Complex64::default(); stream_len(grid.cols(), m, lp)];
        let norm = 1.0 / (m as f64).sqrt();
        let mut buf = vec![Complex64::default(); m];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for col in 0..grid.cols() {
            let mut silent = true;
            for (k, b) in buf.iter_mut().enumerate() {
                let a = grid.get(k, col);
                silent &= a == 0.0;
                *b = self.beta[k] * phase(k, col) * a;
            }
            if silent {
                continue;
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            let base = col * m / 2;
            for (i, &t) in self.taps.iter().enumerate() {
                out[base + i] += buf[i % m] * (t * norm);
            }
        }
        Ok(out)
    }

    fn analyze(&self, stream: &[Complex64], delay: PipelineDelay) -> Result<ComplexGrid> {
        let m = self.m;
        let lp = self.taps.len();
        if stream.len() < lp {
            return Err(Error::InvalidInput(format!(
                "stream of {} samples is shorter than the {lp}-tap filter",
                stream.len()
            )));
        }
        let cols = (stream.len() - lp) / (m / 2) + 1;
        // Window start relative to the synthesis column origin.
        let offset = delay.samples as isize - (lp as isize - 1);
        let norm = 1.0 / (m as f64).sqrt();
        let mut out = ComplexGrid::zeros(m, cols);
        let mut buf = vec![Complex64::default(); m];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for col in 0..cols {
            buf.fill(Complex64::default());
            let start = (col * m / 2) as isize + offset;
            for (i, &t) in self.taps.iter().enumerate() {
                let n = start + i as isize;
                if n >= 0 && (n as usize) < stream.len() {
                    buf[i % m] += stream[n as usize] * t;
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, v) in buf.iter().enumerate() {
                out.set(k, col, *v * self.beta[k].conj() * norm);
            }
        }
        Ok(out)
    }
}

/// Synthesis/analysis pair with cached FFT plans and cascade delay.
pub struct FilterBank {
    filter: PrototypeFilter,
    bank: Bank,
    delay: PipelineDelay,
}

impl FilterBank {
    /// Filter bank using the standard beta multiplier.
    pub fn new(filter: PrototypeFilter) -> Result<Self> {
        let beta = beta_coeffs(filter.subcarriers(), filter.overlap());
        Self::with_beta(filter, &beta)
    }

    pub fn with_beta(filter: PrototypeFilter, beta: &BetaVector) -> Result<Self> {
        let bank = Bank::new(&filter, beta)?;
        let standard = *beta == beta_coeffs(filter.subcarriers(), filter.overlap())
            && crate::protofilter::design_coeffs(filter.overlap())
                .is_ok_and(|c| filter.freq_coeffs() == c.as_slice());
        let delay = if standard {
            pipeline_delay(filter.subcarriers(), filter.overlap())?
        } else {
            measure_delay(&filter, beta)?
        };
        Ok(Self {
            filter,
            bank,
            delay,
        })
    }

    pub fn filter(&self) -> &PrototypeFilter {
        &self.filter
    }

    pub fn subcarriers(&self) -> usize {
        self.bank.m
    }

    pub fn delay(&self) -> PipelineDelay {
        self.delay
    }

    pub fn synthesize(&self, grid: &RealGrid) -> Result<SampleStream> {
        self.bank.synthesize(grid)
    }

    /// Complex per-carrier outputs, aligned to the transmitted columns. The
    /// column count is recovered from the stream length; trailing samples
    /// that do not complete a column (e.g. a multipath tail) are ignored.
    pub fn analyze(&self, stream: &[Complex64]) -> Result<ComplexGrid> {
        self.bank.analyze(stream, self.delay)
    }
}

fn check_dims(grid: &RealGrid, filter: &PrototypeFilter, beta: &BetaVector) -> Result<()> {
    let m = filter.subcarriers();
    if grid.rows() != m {
        return Err(dimension(format!("{m} carrier rows"), grid.rows()));
    }
    if beta.len() != m {
        return Err(dimension(format!("{m} beta factors"), beta.len()));
    }
    Ok(())
}

/// Polyphase synthesis (IDFT + branch filters + overlap-add).
pub fn synthesize(
    grid: &RealGrid,
    filter: &PrototypeFilter,
    beta: &BetaVector,
) -> Result<SampleStream> {
    check_dims(grid, filter, beta)?;
    Bank::new(filter, beta)?.synthesize(grid)
}

/// Reference synthesis: every carrier's half-symbol sequence is upsampled by
/// `M/2` and convolved with its own modulated filter
/// `b_k[i] = taps[i]·exp(j2πik/M)`, then scaled by `β_k` and summed.
/// Cost is `O(M · columns · Lp)`; meant for small `M`.
pub fn direct_synthesize(
    grid: &RealGrid,
    filter: &PrototypeFilter,
    beta: &BetaVector,
) -> Result<SampleStream> {
    check_dims(grid, filter, beta)?;
    let m = filter.subcarriers();
    let lp = filter.len();
    let scale = tap_gain(filter) / (m as f64).sqrt();
    let mut out = vec![Complex64::default(); stream_len(grid.cols(), m, lp)];
    for k in 0..m {
        let modulated: Vec<Complex64> = filter
            .taps()
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let turns = ((i * k) % m) as f64 / m as f64;
                Complex64::from_polar(t * scale, 2.0 * PI * turns)
            })
            .collect();
        for col in 0..grid.cols() {
            let a = grid.get(k, col);
            if a == 0.0 {
                continue;
            }
            let weight = beta.as_slice()[k] * phase(k, col) * a;
            let base = col * m / 2;
            for (i, b) in modulated.iter().enumerate() {
                out[base + i] += weight * b;
            }
        }
    }
    Ok(out)
}

/// Analysis bank for a given filter and beta vector.
pub fn analyze(
    stream: &[Complex64],
    filter: &PrototypeFilter,
    beta: &BetaVector,
) -> Result<ComplexGrid> {
    FilterBank::with_beta(filter.clone(), beta)?.analyze(stream)
}
