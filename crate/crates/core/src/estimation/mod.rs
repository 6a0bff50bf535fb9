//! Channel estimation and equalization.
//!
//! Pilot-based estimators work in two steps: raw least-squares estimates at
//! the pilot carriers, then interpolation across the occupied band. The
//! neural estimator instead learns a per-carrier equalizer from a known
//! training burst (see [`neural`]).

mod interp;
pub mod neural;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::oqam::BranchPair;

pub use interp::{
    interpolate_cubic, interpolate_linear, natural_second_derivatives, solve_tridiagonal,
};
pub use neural::{
    activation, nn_equalize, nn_train, training_error, weight_update, Activation, NeuralEqualizer,
    NnHyper, UpdateRule,
};

/// Magnitudes at or below this are treated as a spectral null.
pub const ERASURE_THRESHOLD: f64 = 1e-9;

/// Channel response per occupied carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub response: Vec<Complex64>,
}

/// Estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Linear,
    Cubic,
    Neural,
    Ideal,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Linear => "linear",
            EstimatorKind::Cubic => "cubic",
            EstimatorKind::Neural => "neural",
            EstimatorKind::Ideal => "ideal",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EstimatorKind::Linear),
            "cubic" => Ok(EstimatorKind::Cubic),
            "neural" => Ok(EstimatorKind::Neural),
            "ideal" => Ok(EstimatorKind::Ideal),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected linear, cubic, neural or ideal)"
            ))),
        }
    }
}

/// `H_p = Y_p / X_p` per pilot, averaged over the supplied symbols
/// (`rx_pilots` is pilots × symbols).
pub fn raw_pilot_estimates(
    rx_pilots: &Grid<Complex64>,
    tx_pilots: &[f64],
) -> Result<Vec<Complex64>> {
    if rx_pilots.rows() != tx_pilots.len() {
        return Err(crate::error::dimension(
            format!("{} pilot rows", tx_pilots.len()),
            rx_pilots.rows(),
        ));
    }
    if rx_pilots.cols() == 0 {
        return Err(Error::InvalidInput("no received symbols".into()));
    }
    if let Some(i) = tx_pilots.iter().position(|&x| x == 0.0) {
        return Err(Error::InvalidInput(format!(
            "transmitted pilot {i} is zero"
        )));
    }
    Ok(tx_pilots
        .iter()
        .enumerate()
        .map(|(p, &x)| {
            rx_pilots.row(p).iter().map(|y| y / x).sum::<Complex64>() / rx_pilots.cols() as f64
        })
        .collect())
}

/// One-tap zero forcing. Each observation is divided by its carrier's
/// response and read along its own axis: `Re(re_branch/H) + j·Im(im_branch/H)`,
/// which is plain `Y/H` for a [`BranchPair::uniform`] observation. Carriers
/// with `|H| ≤ ERASURE_THRESHOLD` (or a non-finite estimate) are erased.
pub fn equalize(obs: &[BranchPair], response: &[Complex64]) -> Result<Vec<Option<Complex64>>> {
    if obs.len() != response.len() {
        return Err(crate::error::dimension(
            format!("{} responses", obs.len()),
            response.len(),
        ));
    }
    Ok(obs
        .iter()
        .zip(response)
        .map(|(o, &h)| {
            let usable = h.norm() > ERASURE_THRESHOLD && h.re.is_finite() && h.im.is_finite();
            usable.then(|| Complex64::new((o.re_branch / h).re, (o.im_branch / h).im))
        })
        .collect())
}
