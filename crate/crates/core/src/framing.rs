//! Frequency framing: occupied band placement, PRBS-modulated pilots and
//! null guard carriers.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dimension, Error, Result};
use crate::grid::Grid;
use crate::sysconfig::{map_bits, QamMap, SystemParams};

/// Pilot amplitude (boosted BPSK).
pub const PILOT_AMPLITUDE: f64 = 4.0 / 3.0;
/// Symbols in the training burst.
pub const TRAINING_SYMBOLS: usize = 4;

const PRBS_MASK: u16 = 0x07ff;

/// 11-stage Fibonacci LFSR for `x^11 + x^9 + 1`.
///
/// Bit `i - 1` of the state holds register `b_i`. Each step outputs `b11`,
/// shifts `b1..b10` up by one and feeds `b9 XOR b11` into `b1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrbsState(u16);

impl Default for PrbsState {
    fn default() -> Self {
        PrbsState(PRBS_MASK)
    }
}

impl PrbsState {
    /// Returns `None` for the all-zero lock-up state.
    pub fn new(registers: u16) -> Option<Self> {
        let r = registers & PRBS_MASK;
        (r != 0).then_some(PrbsState(r))
    }

    pub fn registers(self) -> u16 {
        self.0
    }

    /// Output bit and successor state.
    pub fn step(self) -> (u8, PrbsState) {
        let b9 = (self.0 >> 8) & 1;
        let b11 = (self.0 >> 10) & 1;
        let next = ((self.0 << 1) | (b9 ^ b11)) & PRBS_MASK;
        (b11 as u8, PrbsState(next))
    }
}

/// The first `length` PRBS bits from the all-ones state.
pub fn prbs_sequence(length: usize) -> Vec<u8> {
    let mut state = PrbsState::default();
    (0..length)
        .map(|_| {
            let (bit, next) = state.step();
            state = next;
            bit
        })
        .collect()
}

/// Pilot `i` is `(4/3)(1 − 2 w_i)` with `w_i` the `i`-th PRBS bit.
pub fn pilot_values(count: usize) -> Vec<f64> {
    prbs_sequence(count)
        .into_iter()
        .map(|w| PILOT_AMPLITUDE * (1.0 - 2.0 * w as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CarrierRole {
    Data,
    Pilot,
    Null,
}

impl CarrierRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CarrierRole::Data => "data",
            CarrierRole::Pilot => "pilot",
            CarrierRole::Null => "null",
        }
    }
}

/// Static carrier layout derived from [`SystemParams`].
///
/// The occupied band is centred in the `M` rows; with an odd number of null
/// carriers the extra one goes above the band.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    fft_size: usize,
    band_start: usize,
    roles: Vec<CarrierRole>,
    pilot_rows: Vec<usize>,
    data_rows: Vec<usize>,
    pilot_values: Vec<f64>,
}

impl FrameLayout {
    pub fn new(params: &SystemParams) -> Self {
        let m = params.fft_size;
        let occupied = params.occupied_carriers;
        let band_start = (m - occupied) / 2;
        let mut roles = vec![CarrierRole::Null; m];
        let mut pilot_rows = Vec::new();
        let mut data_rows = Vec::new();
        for idx in 0..occupied {
            let row = band_start + idx;
            if idx % params.pilot_spacing == 0 {
                roles[row] = CarrierRole::Pilot;
                pilot_rows.push(row);
            } else {
                roles[row] = CarrierRole::Data;
                data_rows.push(row);
            }
        }
        let pilot_values = pilot_values(pilot_rows.len());
        Self {
            fft_size: m,
            band_start,
            roles,
            pilot_rows,
            data_rows,
            pilot_values,
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// First occupied row.
    pub fn band_start(&self) -> usize {
        self.band_start
    }

    pub fn occupied(&self) -> usize {
        self.pilot_rows.len() + self.data_rows.len()
    }

    /// Absolute rows of the occupied band, ascending.
    pub fn occupied_rows(&self) -> std::ops::Range<usize> {
        self.band_start..self.band_start + self.occupied()
    }

    pub fn roles(&self) -> &[CarrierRole] {
        &self.roles
    }

    pub fn pilot_rows(&self) -> &[usize] {
        &self.pilot_rows
    }

    pub fn data_rows(&self) -> &[usize] {
        &self.data_rows
    }

    /// Pilot positions as occupied-band indices.
    pub fn pilot_positions(&self) -> Vec<usize> {
        self.pilot_rows
            .iter()
            .map(|r| r - self.band_start)
            .collect()
    }

    /// Data positions as occupied-band indices.
    pub fn data_positions(&self) -> Vec<usize> {
        self.data_rows.iter().map(|r| r - self.band_start).collect()
    }

    pub fn pilot_values(&self) -> &[f64] {
        &self.pilot_values
    }

    pub fn null_count(&self) -> (usize, usize) {
        let below = self.band_start;
        (below, self.fft_size - self.occupied() - below)
    }
}

/// Carriers × symbols grid tagged with its per-carrier role mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid<T = Complex64> {
    pub values: Grid<T>,
    pub roles: Vec<CarrierRole>,
}

impl<T: Copy> SymbolGrid<T> {
    /// Tags received values with the layout's role mask.
    pub fn with_layout(values: Grid<T>, layout: &FrameLayout) -> Result<Self> {
        if values.rows() != layout.fft_size() {
            return Err(dimension(
                format!("{} rows", layout.fft_size()),
                values.rows(),
            ));
        }
        Ok(Self {
            values,
            roles: layout.roles().to_vec(),
        })
    }

    pub fn symbols(&self) -> usize {
        self.values.cols()
    }
}

/// Places `data` (symbol-major, ascending data carrier within a symbol) into
/// frames with pilots and guard nulls.
pub fn build_frame(data: &[Complex64], params: &SystemParams) -> Result<SymbolGrid> {
    build_frame_with_layout(data, &FrameLayout::new(params))
}

pub fn build_frame_with_layout(data: &[Complex64], layout: &FrameLayout) -> Result<SymbolGrid> {
    let per_symbol = layout.data_rows().len();
    if per_symbol == 0 || !data.len().is_multiple_of(per_symbol) {
        return Err(Error::InvalidInput(format!(
            "{} data symbols is not a multiple of {per_symbol} data carriers",
            data.len()
        )));
    }
    let n = data.len() / per_symbol;
    let mut values = Grid::zeros(layout.fft_size(), n);
    for (col, chunk) in data.chunks_exact(per_symbol).enumerate() {
        for (&row, &v) in layout.pilot_rows().iter().zip(layout.pilot_values()) {
            values.set(row, col, Complex64::new(v, 0.0));
        }
        for (&row, &v) in layout.data_rows().iter().zip(chunk) {
            values.set(row, col, v);
        }
    }
    Ok(SymbolGrid {
        values,
        roles: layout.roles().to_vec(),
    })
}

/// Data symbols and pilot observations pulled out of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Deframed<T> {
    /// Symbol-major, ascending data carrier within each symbol.
    pub data: Vec<T>,
    /// Pilots × symbols.
    pub pilot_obs: Grid<T>,
}

/// Inverse of [`build_frame`] for any cell type.
pub fn deframe<T: Copy + Default>(
    grid: &SymbolGrid<T>,
    params: &SystemParams,
) -> Result<Deframed<T>> {
    deframe_with_layout(grid, &FrameLayout::new(params))
}

pub fn deframe_with_layout<T: Copy + Default>(
    grid: &SymbolGrid<T>,
    layout: &FrameLayout,
) -> Result<Deframed<T>> {
    if grid.values.rows() != layout.fft_size() {
        return Err(dimension(
            format!("{} rows", layout.fft_size()),
            grid.values.rows(),
        ));
    }
    if grid.roles != layout.roles() {
        return Err(Error::InvalidInput(
            "role mask does not match the configured carrier layout".into(),
        ));
    }
    let n = grid.values.cols();
    let mut data = Vec::with_capacity(layout.data_rows().len() * n);
    for col in 0..n {
        data.extend(layout.data_rows().iter().map(|&r| grid.values.get(r, col)));
    }
    Ok(Deframed {
        data,
        pilot_obs: grid.values.select_rows(layout.pilot_rows()),
    })
}

/// Four known symbols with every data carrier excited by seeded QAM.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFrame {
    pub grid: SymbolGrid,
    pub data: Vec<Complex64>,
}

pub fn training_frame(params: &SystemParams, seed: u64) -> Result<TrainingFrame> {
    let layout = FrameLayout::new(params);
    let map = QamMap::new(params.qam_order);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..layout.data_rows().len() * TRAINING_SYMBOLS * map.bits_per_symbol())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let data = map_bits(&bits, &map)?;
    let grid = build_frame_with_layout(&data, &layout)?;
    Ok(TrainingFrame { grid, data })
}

/// Debug dump: `symbol,carrier,role,re,im`, one row per carrier and symbol.
pub fn write_frame_csv<W: Write>(grid: &SymbolGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["symbol", "carrier", "role", "re", "im"])?;
    for n in 0..grid.values.cols() {
        for (k, role) in grid.roles.iter().enumerate() {
            let v = grid.values.get(k, n);
            w.write_record([
                n.to_string(),
                k.to_string(),
                role.as_str().to_string(),
                format!("{:e}", v.re),
                format!("{:e}", v.im),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
