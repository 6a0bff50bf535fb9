//! OQAM staggering.
//!
//! Each complex symbol `c` on carrier `k`, symbol `n` becomes two real samples
//! at half-symbols `2n` and `2n + 1`: `(Re c, Im c)` on even carriers and
//! `(Im c, Re c)` on odd carriers. The phase `θ[k, m] = j^(k+m)` is applied by
//! the synthesis bank, so the grid handed to it stays real.
//!
//! On the receive side the analysis output is derotated by `conj(θ)`. With
//! an ideal channel the wanted sample lands on the real axis and the
//! intrinsic interference of the filter bank on the imaginary axis.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filterbank::{ComplexGrid, RealGrid};
use crate::grid::Grid;

const J_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `θ[k, m] = j^(k+m)`.
#[inline]
pub fn phase(carrier: usize, half_symbol: usize) -> Complex64 {
    J_POWERS[(carrier + half_symbol) % 4]
}

/// Half-symbol offset (0 or 1) carrying the real part on `carrier`.
#[inline]
pub fn real_slot(carrier: usize) -> usize {
    carrier % 2
}

/// Complex symbols → staggered real samples (twice as many columns).
pub fn preprocess(grid: &Grid<Complex64>) -> RealGrid {
    let mut out = RealGrid::zeros(grid.rows(), 2 * grid.cols());
    for k in 0..grid.rows() {
        let re_slot = real_slot(k);
        for n in 0..grid.cols() {
            let c = grid.get(k, n);
            out.set(k, 2 * n + re_slot, c.re);
            out.set(k, 2 * n + 1 - re_slot, c.im);
        }
    }
    out
}

/// Two complex views of one received symbol, one per half-symbol.
///
/// `re_branch` is the derotated half-symbol that carried `Re c`; `im_branch`
/// is `j` times the derotated half-symbol that carried `Im c`. Through a flat
/// channel `H` and with no intrinsic interference both equal `H·c`, so
/// `Re(re_branch / H) + j·Im(im_branch / H)` recovers `c`. Intrinsic
/// interference only perturbs the component each branch is not read along.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchPair {
    pub re_branch: Complex64,
    pub im_branch: Complex64,
}

impl BranchPair {
    /// Both branches equal `y`: a plain complex observation.
    pub fn uniform(y: Complex64) -> Self {
        Self {
            re_branch: y,
            im_branch: y,
        }
    }

    /// Recombines without channel correction.
    pub fn combine(&self) -> Complex64 {
        Complex64::new(self.re_branch.re, self.im_branch.im)
    }
}

fn check_even(grid: &ComplexGrid) -> Result<()> {
    if !grid.cols().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "OQAM post-processing needs an even number of half-symbols, got {}",
            grid.cols()
        )));
    }
    Ok(())
}

/// Derotates the analysis output and pairs half-symbols into per-symbol
/// branch observations, ready for channel equalization.
pub fn branch_observations(grid: &ComplexGrid) -> Result<Grid<BranchPair>> {
    check_even(grid)?;
    let j = Complex64::new(0.0, 1.0);
    Ok(Grid::from_fn(grid.rows(), grid.cols() / 2, |k, n| {
        let re_m = 2 * n + real_slot(k);
        let im_m = 2 * n + 1 - real_slot(k);
        BranchPair {
            re_branch: grid.get(k, re_m) * phase(k, re_m).conj(),
            im_branch: j * grid.get(k, im_m) * phase(k, im_m).conj(),
        }
    }))
}

/// Removes `θ`, keeps the real part and recombines staggered pairs.
pub fn postprocess(grid: &ComplexGrid) -> Result<Grid<Complex64>> {
    Ok(branch_observations(grid)?.map(BranchPair::combine))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symbols(rows: usize, cols: usize, seed: u64) -> Grid<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
        })
    }

    /// What the analysis bank returns for an ideal, interference-free channel.
    fn rephase(real: &RealGrid) -> ComplexGrid {
        Grid::from_fn(real.rows(), real.cols(), |k, m| {
            phase(k, m) * real.get(k, m)
        })
    }

    #[test]
    fn phase_is_unit_and_periodic() {
        for k in 0..9 {
            for m in 0..9 {
                assert_eq!(phase(k, m).norm(), 1.0);
                assert_eq!(phase(k, m), phase(k + 4, m));
                assert_eq!(phase(k, m), phase(k, m + 4));
            }
        }
        // Neighbours in time and frequency are in quadrature.
        assert_eq!(phase(3, 5) * Complex64::new(0.0, 1.0), phase(4, 5));
        assert_eq!(phase(3, 5) * Complex64::new(0.0, 1.0), phase(3, 6));
    }

    #[test]
    fn stagger_convention() {
        let mut g = Grid::zeros(2, 1);
        g.set(0, 0, Complex64::new(3.0, 4.0));
        g.set(1, 0, Complex64::new(3.0, 4.0));
        let r = preprocess(&g);
        assert_eq!(r.row(0), &[3.0, 4.0]);
        assert_eq!(r.row(1), &[4.0, 3.0]);
    }

    #[test]
    fn real_input_leaves_quadrature_slots_empty() {
        let g = random_symbols(6, 5, 1).map(|c| Complex64::new(c.re, 0.0));
        let r = preprocess(&g);
        for k in (0..6).step_by(2) {
            for n in 0..5 {
                assert_eq!(r.get(k, 2 * n + 1), 0.0);
            }
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let g = random_symbols(8, 6, 2);
        assert_eq!(postprocess(&rephase(&preprocess(&g))).unwrap(), g);
        let z = Grid::<Complex64>::zeros(4, 3);
        assert_eq!(postprocess(&rephase(&preprocess(&z))).unwrap(), z);
    }

    #[test]
    fn quadrature_interference_is_rejected() {
        let g = random_symbols(8, 6, 3);
        let real = preprocess(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let perturbed = Grid::from_fn(real.rows(), real.cols(), |k, m| {
            let eps = rng.random_range(-0.5..0.5);
            phase(k, m) * Complex64::new(real.get(k, m), eps)
        });
        assert_eq!(postprocess(&perturbed).unwrap(), g);
    }

    #[test]
    fn odd_columns_rejected() {
        assert!(postprocess(&ComplexGrid::zeros(4, 3)).is_err());
    }

    #[test]
    fn branches_see_flat_gain() {
        let g = random_symbols(5, 4, 5);
        let h = Complex64::from_polar(0.7, 1.1);
        let rx = rephase(&preprocess(&g)).map(|v| v * h);
        let obs = branch_observations(&rx).unwrap();
        for k in 0..5 {
            for n in 0..4 {
                let b = obs.get(k, n);
                let c = g.get(k, n);
                let est = Complex64::new((b.re_branch / h).re, (b.im_branch / h).im);
                assert!((est - c).norm() < 1e-12);
            }
        }
        assert_eq!(BranchPair::uniform(h).combine(), h);
    }
}
