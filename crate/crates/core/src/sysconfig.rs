//! System parameters for the three ISDB-T_B transmission modes plus a
//! desk-scale "toy" mode, and the Gray-coded square QAM maps.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carriers between consecutive pilots in the occupied band.
pub const PILOT_SPACING: usize = 9;
/// Prototype filter overlap factor used throughout.
pub const OVERLAP_FACTOR: usize = 4;
/// Mode-3 sample rate, 8192 samples per 1.008 ms symbol.
pub const MODE3_SAMPLE_RATE: f64 = 8192.0 / 1.008e-3;

/// One of the three standard transmission modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionMode {
    Mode1,
    Mode2,
    Mode3,
}

/// Mode tag stored in [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Mode1,
    Mode2,
    Mode3,
    Toy,
}

impl From<TransmissionMode> for Mode {
    fn from(m: TransmissionMode) -> Self {
        match m {
            TransmissionMode::Mode1 => Mode::Mode1,
            TransmissionMode::Mode2 => Mode::Mode2,
            TransmissionMode::Mode3 => Mode::Mode3,
        }
    }
}

/// Square QAM order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QamOrder {
    Qam4,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub fn points(self) -> usize {
        match self {
            QamOrder::Qam4 => 4,
            QamOrder::Qam16 => 16,
            QamOrder::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.points().trailing_zeros() as usize
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            4 => Ok(QamOrder::Qam4),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            other => Err(Error::Config(format!(
                "unsupported QAM order {other} (expected 4, 16 or 64)"
            ))),
        }
    }
}

impl From<QamOrder> for u32 {
    fn from(q: QamOrder) -> u32 {
        q.points() as u32
    }
}

impl fmt::Display for QamOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.points())
    }
}

/// Mode, carrier layout and sampling configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mode: Mode,
    /// Subcarrier count M (FFT size).
    pub fft_size: usize,
    pub occupied_carriers: usize,
    pub data_carriers: usize,
    pub pilot_carriers: usize,
    pub pilot_spacing: usize,
    /// Overlap factor K of the prototype filter.
    pub overlap_factor: usize,
    /// Useful symbol period in seconds.
    pub symbol_period: f64,
    /// Sample rate in Hz, `fft_size / symbol_period`.
    pub sample_rate: f64,
    pub qam_order: QamOrder,
}

fn pilot_count(occupied: usize, spacing: usize) -> usize {
    if occupied == 0 {
        0
    } else {
        (occupied - 1) / spacing + 1
    }
}

/// Table row for one of the standard modes. The modulation defaults to
/// 64-QAM; use [`SystemParams::with_qam`] to change it.
pub fn mode_params(mode: TransmissionMode) -> SystemParams {
    let (fft_size, occupied, data, pilots, symbol_period) = match mode {
        TransmissionMode::Mode1 => (2048, 1405, 1248, 157, 0.252e-3),
        TransmissionMode::Mode2 => (4096, 2809, 2496, 313, 0.504e-3),
        TransmissionMode::Mode3 => (8192, 5617, 4992, 625, 1.008e-3),
    };
    SystemParams {
        mode: mode.into(),
        fft_size,
        occupied_carriers: occupied,
        data_carriers: data,
        pilot_carriers: pilots,
        pilot_spacing: PILOT_SPACING,
        overlap_factor: OVERLAP_FACTOR,
        symbol_period,
        sample_rate: fft_size as f64 / symbol_period,
        qam_order: QamOrder::Qam64,
    }
}

/// Reduced-size configuration. The sample rate stays at the Mode-3 value so
/// channel delays map to the same tap indices for every `fft_size`.
pub fn toy_params(fft_size: usize, occupied: usize, qam_order: QamOrder) -> Result<SystemParams> {
    if fft_size < 16 || !fft_size.is_power_of_two() {
        return Err(Error::Config(format!(
            "toy fft size must be a power of two >= 16, got {fft_size}"
        )));
    }
    if occupied > fft_size {
        return Err(Error::Config(format!(
            "occupied carriers {occupied} exceed fft size {fft_size}"
        )));
    }
    if occupied % PILOT_SPACING != 1 {
        return Err(Error::Config(format!(
            "occupied carriers must be 1 mod {PILOT_SPACING} so the band starts and ends on a pilot, got {occupied}"
        )));
    }
    let pilots = pilot_count(occupied, PILOT_SPACING);
    Ok(SystemParams {
        mode: Mode::Toy,
        fft_size,
        occupied_carriers: occupied,
        data_carriers: occupied - pilots,
        pilot_carriers: pilots,
        pilot_spacing: PILOT_SPACING,
        overlap_factor: OVERLAP_FACTOR,
        symbol_period: fft_size as f64 / MODE3_SAMPLE_RATE,
        sample_rate: MODE3_SAMPLE_RATE,
        qam_order,
    })
}

impl SystemParams {
    pub fn with_qam(mut self, qam_order: QamOrder) -> Self {
        self.qam_order = qam_order;
        self
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.qam_order.bits_per_symbol()
    }

    /// Filter length `K·M − 1`.
    pub fn filter_len(&self) -> usize {
        self.overlap_factor * self.fft_size - 1
    }

    /// Checks every structural invariant; used on deserialized scenarios.
    pub fn validate(&self) -> Result<()> {
        let m = self.fft_size;
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size {m} is not a power of two >= 8"
            )));
        }
        if self.pilot_spacing == 0 {
            return Err(Error::Config("pilot_spacing must be positive".into()));
        }
        if self.occupied_carriers > m {
            return Err(Error::Config(format!(
                "occupied_carriers {} exceed fft_size {m}",
                self.occupied_carriers
            )));
        }
        if self.occupied_carriers == 0
            || !(self.occupied_carriers - 1).is_multiple_of(self.pilot_spacing)
        {
            return Err(Error::Config(
                "occupied band must start and end on a pilot".into(),
            ));
        }
        if self.data_carriers + self.pilot_carriers != self.occupied_carriers {
            return Err(Error::Config(
                "occupied_carriers must equal data_carriers + pilot_carriers".into(),
            ));
        }
        if self.pilot_carriers != pilot_count(self.occupied_carriers, self.pilot_spacing) {
            return Err(Error::Config(format!(
                "pilot_carriers {} inconsistent with a spacing-{} grid",
                self.pilot_carriers, self.pilot_spacing
            )));
        }
        if !matches!(self.overlap_factor, 1 | 4) {
            return Err(Error::Config(format!(
                "unsupported overlap factor {}",
                self.overlap_factor
            )));
        }
        if self.symbol_period.is_nan()
            || self.symbol_period <= 0.0
            || self.sample_rate.is_nan()
            || self.sample_rate <= 0.0
        {
            return Err(Error::Config(
                "symbol_period and sample_rate must be positive".into(),
            ));
        }
        let derived = m as f64 / self.symbol_period;
        if ((derived - self.sample_rate) / self.sample_rate).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sample_rate {} does not equal fft_size / symbol_period = {derived}",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Gray-labelled square constellation with unit average energy.
///
/// A label's leading half of bits selects the in-phase level and the trailing
/// half the quadrature level, both Gray coded so label 0 sits at the most
/// positive level. Label `00` of 4-QAM is therefore `(1 + j)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QamMap {
    order: QamOrder,
    /// Per-axis amplitude indexed by the axis Gray label.
    axis_levels: Vec<f64>,
    points: Vec<Complex64>,
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 1 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl QamMap {
    pub fn new(order: QamOrder) -> Self {
        let axis_bits = order.bits_per_symbol() / 2;
        let levels = 1usize << axis_bits;
        let scale = (2.0 * ((levels * levels) as f64 - 1.0) / 3.0)
            .sqrt()
            .recip();
        let axis_levels: Vec<f64> = (0..levels)
            .map(|label| {
                let idx = gray_decode(label);
                ((levels - 1) as f64 - 2.0 * idx as f64) * scale
            })
            .collect();
        let points = (0..order.points())
            .map(|label| {
                let i = label >> axis_bits;
                let q = label & (levels - 1);
                Complex64::new(axis_levels[i], axis_levels[q])
            })
            .collect();
        Self {
            order,
            axis_levels,
            points,
        }
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.bits_per_symbol()
    }

    /// Constellation points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Nearest label on one axis; on a tie (up to rounding) the lower label wins.
    fn slice_axis(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, &level) in self.axis_levels.iter().enumerate() {
            let d = (x - level).abs();
            if d < best_d - 1e-12 * (1.0 + best_d.min(1e6)) {
                best_d = d;
                best = label;
            }
        }
        best
    }

    /// Hard decision: label of the nearest point. Euclidean distance separates
    /// over the two axes, so per-axis slicing gives the same answer as a full
    /// search, tie-break included.
    pub fn nearest_label(&self, y: Complex64) -> usize {
        let axis_bits = self.bits_per_symbol() / 2;
        (self.slice_axis(y.re) << axis_bits) | self.slice_axis(y.im)
    }
}

/// Maps bits (one `0`/`1` per byte, MSB of each label first) onto points.
pub fn map_bits(bits: &[u8], map: &QamMap) -> Result<Vec<Complex64>> {
    let n = map.bits_per_symbol();
    if !bits.len().is_multiple_of(n) {
        return Err(Error::InvalidInput(format!(
            "{} bits is not a multiple of {n} bits per symbol",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(n)
        .map(|chunk| {
            let label = chunk
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            map.point(label)
        })
        .collect())
}

/// Nearest-point hard demapping.
pub fn demap_symbols(symbols: &[Complex64], map: &QamMap) -> Vec<u8> {
    let n = map.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * n);
    for &s in symbols {
        let label = map.nearest_label(s);
        for j in (0..n).rev() {
            bits.push(((label >> j) & 1) as u8);
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_ORDERS: [QamOrder; 3] = [QamOrder::Qam4, QamOrder::Qam16, QamOrder::Qam64];

    #[test]
    fn table_rows() {
        let p = mode_params(TransmissionMode::Mode3);
        assert_eq!(
            (
                p.fft_size,
                p.occupied_carriers,
                p.data_carriers,
                p.pilot_carriers
            ),
            (8192, 5617, 4992, 625)
        );
        assert_eq!(p.symbol_period, 1.008e-3);
        assert_eq!(p.pilot_spacing, 9);
        assert_eq!(p.overlap_factor, 4);
        let p = mode_params(TransmissionMode::Mode2);
        assert_eq!(
            (
                p.fft_size,
                p.occupied_carriers,
                p.data_carriers,
                p.pilot_carriers
            ),
            (4096, 2809, 2496, 313)
        );
        let p = mode_params(TransmissionMode::Mode1);
        assert_eq!(
            (
                p.fft_size,
                p.occupied_carriers,
                p.data_carriers,
                p.pilot_carriers
            ),
            (2048, 1405, 1248, 157)
        );
    }

    #[test]
    fn spacing_nine_grid_reproduces_pilot_counts() {
        for mode in [
            TransmissionMode::Mode1,
            TransmissionMode::Mode2,
            TransmissionMode::Mode3,
        ] {
            let p = mode_params(mode);
            let counted = (0..p.occupied_carriers).filter(|k| k % 9 == 0).count();
            assert_eq!(counted, p.pilot_carriers, "{mode:?}");
            assert_eq!(p.occupied_carriers - counted, p.data_carriers);
            p.validate().unwrap();
        }
        let mode3 = (0..5617).step_by(9).collect::<Vec<_>>();
        assert_eq!(mode3.len(), 625);
        assert_eq!(*mode3.last().unwrap(), 5616);
    }

    #[test]
    fn sample_rate_is_derived() {
        let p = mode_params(TransmissionMode::Mode3);
        assert!((p.sample_rate - 8_126_984.126_984).abs() < 1e-3);
        let t = toy_params(128, 91, QamOrder::Qam4).unwrap();
        assert!((t.sample_rate - p.sample_rate).abs() < 1e-6);
        assert!((t.fft_size as f64 / t.symbol_period - t.sample_rate).abs() < 1e-3);
    }

    #[test]
    fn toy_counts() {
        let t = toy_params(128, 91, QamOrder::Qam4).unwrap();
        assert_eq!((t.pilot_carriers, t.data_carriers), (11, 80));
        let t = toy_params(64, 55, QamOrder::Qam16).unwrap();
        assert_eq!((t.pilot_carriers, t.data_carriers), (7, 48));
        t.validate().unwrap();
        assert!(toy_params(64, 56, QamOrder::Qam4).is_err());
        assert!(toy_params(8, 1, QamOrder::Qam4).is_err());
        assert!(toy_params(96, 91, QamOrder::Qam4).is_err());
        assert!(toy_params(64, 73, QamOrder::Qam4).is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let t = toy_params(128, 91, QamOrder::Qam64).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"fft_size\":128"));
        assert!(s.contains("\"qam_order\":64"));
        assert!(s.contains("\"mode\":\"toy\""));
        let back: SystemParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = s.replace("\"qam_order\":64", "\"qam_order\":8");
        assert!(serde_json::from_str::<SystemParams>(&bad).is_err());
    }

    #[test]
    fn validate_rejects_broken_params() {
        let mut p = toy_params(128, 91, QamOrder::Qam4).unwrap();
        p.data_carriers += 1;
        assert!(p.validate().is_err());
        let mut p = toy_params(128, 91, QamOrder::Qam4).unwrap();
        p.sample_rate *= 2.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn qpsk_label_zero() {
        let map = QamMap::new(QamOrder::Qam4);
        let s = map_bits(&[0, 0], &map).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - Complex64::new(r, r)).norm() < 1e-15);
        for p in map.points() {
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
        let mut pts = map.points().to_vec();
        pts.dedup();
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn unit_average_energy() {
        for order in ALL_ORDERS {
            let map = QamMap::new(order);
            let mean: f64 =
                map.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order.points() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "{order:?}: {mean}");
            for i in 0..map.points().len() {
                for j in 0..i {
                    assert!((map.point(i) - map.point(j)).norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for order in ALL_ORDERS {
            let map = QamMap::new(order);
            let pts = map.points();
            let min_d = (0..pts.len())
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .map(|(i, j)| (pts[i] - pts[j]).norm())
                .fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                for j in 0..i {
                    let d = pts[i] - pts[j];
                    let axis_adjacent =
                        (d.re.abs() < 1e-9 || d.im.abs() < 1e-9) && (d.norm() - min_d).abs() < 1e-9;
                    if axis_adjacent {
                        assert_eq!((i ^ j).count_ones(), 1, "{order:?} labels {i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_round_trip() {
        for order in ALL_ORDERS {
            let map = QamMap::new(order);
            let n = map.bits_per_symbol();
            let bits: Vec<u8> = (0..order.points())
                .flat_map(|label| (0..n).rev().map(move |j| ((label >> j) & 1) as u8))
                .collect();
            let syms = map_bits(&bits, &map).unwrap();
            assert_eq!(demap_symbols(&syms, &map), bits);
        }
    }

    #[test]
    fn map_rejects_ragged_input() {
        let map = QamMap::new(QamOrder::Qam16);
        assert!(map_bits(&[0, 1, 1], &map).is_err());
    }

    #[test]
    fn nearest_neighbour_demap() {
        let map = QamMap::new(QamOrder::Qam4);
        assert_eq!(demap_symbols(&[Complex64::new(0.9, 0.8)], &map), vec![0, 0]);
        assert_eq!(
            demap_symbols(&[Complex64::new(-0.1, 0.3)], &map),
            vec![1, 0]
        );
    }

    #[test]
    fn slicing_matches_brute_force_with_ties() {
        // Probe points on decision boundaries as well as random ones.
        for order in ALL_ORDERS {
            let map = QamMap::new(order);
            let levels = &map.axis_levels;
            let mut probes: Vec<f64> = levels.clone();
            for a in levels {
                for b in levels {
                    probes.push(0.5 * (a + b));
                }
            }
            probes.extend([-3.0, 3.0, 0.0, 0.123, -0.77]);
            for &x in &probes {
                for &y in &probes {
                    let s = Complex64::new(x, y);
                    let dists: Vec<f64> = map.points().iter().map(|p| (s - p).norm_sqr()).collect();
                    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                    let brute = dists
                        .iter()
                        .position(|&d| (d - dmin).abs() <= 1e-12 * (1.0 + dmin))
                        .unwrap();
                    assert_eq!(map.nearest_label(s), brute, "{order:?} at {s}");
                }
            }
        }
    }

    #[test]
    fn vanishing_noise_gives_zero_ber() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for order in ALL_ORDERS {
            let map = QamMap::new(order);
            let bits: Vec<u8> = (0..600 * map.bits_per_symbol())
                .map(|_| rng.random_range(0..2u8))
                .collect();
            let noisy: Vec<Complex64> = map_bits(&bits, &map)
                .unwrap()
                .into_iter()
                .map(|s| {
                    s + Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 1e-6
                })
                .collect();
            assert_eq!(demap_symbols(&noisy, &map), bits);
        }
    }
}
