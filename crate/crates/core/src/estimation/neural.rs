//! Per-carrier perceptron equalizer trained by back-propagation (delta rule).
//!
//! Every occupied carrier gets two perceptrons, one for the real and one for
//! the imaginary part of the equalized symbol. Both read the two real inputs
//! `(Re y, Im y)` of their branch observation, so together they realize an
//! arbitrary real 2×2 map, enough to undo a complex gain.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, Error, Result};
use crate::grid::Grid;
use crate::oqam::BranchPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Linear,
    /// Logistic `1/(1 + e^−a)`.
    Sigmoid,
}

pub fn activation(a: f64, kind: Activation) -> f64 {
    match kind {
        Activation::Linear => a,
        Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
    }
}

/// `0.5·(d − y)²`.
pub fn training_error(d: f64, y: f64) -> f64 {
    0.5 * (d - y) * (d - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `w + δ·(d − y)·x`, the gradient step on the squared error.
    #[default]
    Delta,
    /// `w − δ·0.5(d − y)²·x`, taken literally.
    Literal,
}

pub fn weight_update<const N: usize>(
    w: [f64; N],
    x: [f64; N],
    d: f64,
    y: f64,
    rate: f64,
    rule: UpdateRule,
) -> [f64; N] {
    let step = match rule {
        UpdateRule::Delta => rate * (d - y),
        UpdateRule::Literal => -rate * training_error(d, y),
    };
    let mut out = w;
    for (o, xi) in out.iter_mut().zip(x) {
        *o += step * xi;
    }
    out
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnHyper {
    /// Learning rate δ.
    pub delta: f64,
    pub epochs: usize,
    /// Stop once the mean training error is at or below this.
    pub tolerance: f64,
    pub activation: Activation,
    pub rule: UpdateRule,
    /// Update the bias terms as well (they stay at zero otherwise).
    pub train_bias: bool,
    /// Initial weights are drawn uniformly from `±init_scale`.
    pub init_scale: f64,
}

impl Default for NnHyper {
    fn default() -> Self {
        Self {
            delta: 0.1,
            epochs: 500,
            tolerance: 1e-6,
            activation: Activation::Linear,
            rule: UpdateRule::Delta,
            train_bias: false,
            init_scale: 0.1,
        }
    }
}

impl NnHyper {
    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.delta
            )));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        if self.init_scale.is_nan() || self.init_scale < 0.0 {
            return Err(Error::Config("init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perceptron {
    pub weights: [f64; 2],
    pub bias: f64,
}

impl Perceptron {
    pub fn output(&self, x: [f64; 2], kind: Activation) -> f64 {
        activation(
            self.weights[0] * x[0] + self.weights[1] * x[1] + self.bias,
            kind,
        )
    }
}

/// Training outcome for one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierFit {
    /// `[real-part perceptron, imaginary-part perceptron]`.
    pub units: [Perceptron; 2],
    pub epochs_run: usize,
    pub final_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralEqualizer {
    hyper: NnHyper,
    carriers: Vec<CarrierFit>,
    trained: bool,
}

fn inputs(obs: BranchPair) -> [[f64; 2]; 2] {
    [
        [obs.re_branch.re, obs.re_branch.im],
        [obs.im_branch.re, obs.im_branch.im],
    ]
}

impl NeuralEqualizer {
    /// Zero-weight equalizer that refuses to run until trained.
    pub fn untrained(carriers: usize, hyper: NnHyper) -> Self {
        let fit = CarrierFit {
            units: [Perceptron::default(); 2],
            epochs_run: 0,
            final_error: f64::NAN,
            converged: false,
        };
        Self {
            hyper,
            carriers: vec![fit; carriers],
            trained: false,
        }
    }

    pub fn hyper(&self) -> &NnHyper {
        &self.hyper
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn carriers(&self) -> &[CarrierFit] {
        &self.carriers
    }

    /// True when every carrier met the stop tolerance within the epoch budget.
    pub fn converged(&self) -> bool {
        self.trained && self.carriers.iter().all(|c| c.converged)
    }

    /// `W_k`, rows are the real- and imaginary-part perceptrons.
    pub fn weight_matrix(&self, carrier: usize) -> [[f64; 2]; 2] {
        let u = &self.carriers[carrier].units;
        [u[0].weights, u[1].weights]
    }

    pub fn bias(&self, carrier: usize) -> [f64; 2] {
        let u = &self.carriers[carrier].units;
        [u[0].bias, u[1].bias]
    }

    /// Equalized symbol for one observation on `carrier`.
    pub fn apply(&self, carrier: usize, obs: BranchPair) -> Complex64 {
        let x = inputs(obs);
        let u = &self.carriers[carrier].units;
        Complex64::new(
            u[0].output(x[0], self.hyper.activation),
            u[1].output(x[1], self.hyper.activation),
        )
    }
}

fn train_carrier(
    carrier: usize,
    rx: &[BranchPair],
    tx: &[Complex64],
    hyper: &NnHyper,
    seed: u64,
) -> Result<CarrierFit> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (carrier as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut init = || {
        if hyper.init_scale > 0.0 {
            rng.random_range(-hyper.init_scale..=hyper.init_scale)
        } else {
            0.0
        }
    };
    let mut units = [
        Perceptron {
            weights: [init(), init()],
            bias: 0.0,
        },
        Perceptron {
            weights: [init(), init()],
            bias: 0.0,
        },
    ];
    let samples: Vec<([[f64; 2]; 2], [f64; 2])> = rx
        .iter()
        .zip(tx)
        .map(|(&obs, &d)| (inputs(obs), [d.re, d.im]))
        .collect();
    let mean_error = |units: &[Perceptron; 2]| {
        let total: f64 = samples
            .iter()
            .map(|(x, d)| {
                (0..2)
                    .map(|c| training_error(d[c], units[c].output(x[c], hyper.activation)))
                    .sum::<f64>()
            })
            .sum();
        total / (2 * samples.len()).max(1) as f64
    };

    let mut error = mean_error(&units);
    let mut epochs_run = 0;
    while error > hyper.tolerance && epochs_run < hyper.epochs {
        for (x, d) in &samples {
            for c in 0..2 {
                let y = units[c].output(x[c], hyper.activation);
                units[c].weights =
                    weight_update(units[c].weights, x[c], d[c], y, hyper.delta, hyper.rule);
                if hyper.train_bias {
                    units[c].bias =
                        weight_update([units[c].bias], [1.0], d[c], y, hyper.delta, hyper.rule)[0];
                }
            }
        }
        epochs_run += 1;
        error = mean_error(&units);
        let finite = units
            .iter()
            .all(|u| u.weights.iter().all(|w| w.is_finite()) && u.bias.is_finite());
        if !finite || !error.is_finite() {
            return Err(Error::TrainingDiverged {
                carrier,
                delta: hyper.delta,
                epochs: epochs_run,
            });
        }
    }
    Ok(CarrierFit {
        units,
        epochs_run,
        final_error: error,
        converged: error <= hyper.tolerance,
    })
}

/// Trains one perceptron pair per row. `rx` holds the received branch
/// observations and `tx` the known transmitted symbols, carriers × symbols.
/// Carriers are independent and trained in parallel; the result does not
/// depend on the thread count.
pub fn nn_train(
    rx: &Grid<BranchPair>,
    tx: &Grid<Complex64>,
    hyper: &NnHyper,
    seed: u64,
) -> Result<NeuralEqualizer> {
    hyper.validate()?;
    if rx.rows() != tx.rows() || rx.cols() != tx.cols() {
        return Err(dimension(
            format!("{}x{} training grid", tx.rows(), tx.cols()),
            format!("{}x{}", rx.rows(), rx.cols()),
        ));
    }
    if rx.cols() == 0 {
        return Err(Error::InvalidInput("no training symbols".into()));
    }
    let carriers = (0..rx.rows())
        .into_par_iter()
        .map(|k| train_carrier(k, rx.row(k), tx.row(k), hyper, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(NeuralEqualizer {
        hyper: *hyper,
        carriers,
        trained: true,
    })
}

/// Applies the trained equalizer row by row.
pub fn nn_equalize(rx: &Grid<BranchPair>, eq: &NeuralEqualizer) -> Result<Grid<Complex64>> {
    if !eq.is_trained() {
        return Err(Error::Untrained);
    }
    if rx.rows() != eq.carriers.len() {
        return Err(dimension(
            format!("{} carriers", eq.carriers.len()),
            rx.rows(),
        ));
    }
    Ok(Grid::from_fn(rx.rows(), rx.cols(), |k, n| {
        eq.apply(k, rx.get(k, n))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk_grid(rows: usize, cols: usize, seed: u64) -> Grid<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Grid::from_fn(rows, cols, |_, _| {
            let s = |b: bool| if b { r } else { -r };
            Complex64::new(s(rng.random()), s(rng.random()))
        })
    }

    /// Closed-form least squares per output: minimizes Σ (d − w·x)² over the
    /// training pairs via the 2×2 normal equations.
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

    /// Every carrier sees all four QPSK points first, so the burst is full rank.
    fn training_burst(rows: usize, cols: usize, seed: u64) -> Grid<Complex64> {
        let random = qpsk_grid(rows, cols, seed);
        Grid::from_fn(rows, cols, |k, n| {
            if n < 4 {
                Complex64::from_polar(
                    1.0,
                    std::f64::consts::FRAC_PI_4 * (2 * ((n + k) % 4) + 1) as f64,
                )
            } else {
                random.get(k, n)
            }
        })
    }

    fn tight() -> NnHyper {
        NnHyper {
            tolerance: 1e-24,
            ..NnHyper::default()
        }
    }

    fn train_flat(gain: Complex64) -> (NeuralEqualizer, Grid<Complex64>, Grid<BranchPair>) {
        let tx = training_burst(12, 8, 3);
        let rx = tx.map(|&x| BranchPair::uniform(gain * x));
        let eq = nn_train(&rx, &tx, &tight(), 1).unwrap();
        (eq, tx, rx)
    }

    #[test]
    fn activations() {
        assert_eq!(activation(0.0, Activation::Sigmoid), 0.5);
        assert!((activation(50.0, Activation::Sigmoid) - 1.0).abs() < 1e-15);
        assert_eq!(activation(-3.25, Activation::Linear), -3.25);
    }

    #[test]
    fn error_function() {
        assert_eq!(training_error(1.0, 0.0), 0.5);
        assert_eq!(training_error(0.3, 0.3), 0.0);
        assert_eq!(training_error(2.0, -1.0), training_error(-1.0, 2.0));
    }

    #[test]
    fn update_rules() {
        let w = [0.3, -0.2];
        for rule in [UpdateRule::Delta, UpdateRule::Literal] {
            assert_eq!(weight_update(w, [1.0, 2.0], 0.7, 0.7, 0.5, rule), w);
        }
        assert_eq!(
            weight_update([0.0], [1.0], 1.0, 0.0, 0.5, UpdateRule::Delta),
            [0.5]
        );
        assert_eq!(
            weight_update([0.0], [1.0], 1.0, 0.0, 0.5, UpdateRule::Literal),
            [-0.25]
        );
    }

    #[test]
    fn delta_rule_contracts_geometrically() {
        let (x, d, rate): (f64, f64, f64) = (1.5, 2.0, 0.3);
        let ratio = (1.0 - rate * x * x).abs();
        let mut w = [0.0];
        let e0 = d;
        for t in 1..=30 {
            let y = w[0] * x;
            w = weight_update(w, [x], d, y, rate, UpdateRule::Delta);
            let e = (d - w[0] * x).abs();
            let expect = e0 * ratio.powi(t);
            assert!(
                (e - expect).abs() <= 1e-12 * e0.max(1.0),
                "t={t}: {e} vs {expect}"
            );
        }
    }

    #[test]
    fn identity_channel_trains_to_identity() {
        let (eq, _, _) = train_flat(Complex64::new(1.0, 0.0));
        for k in 0..12 {
            let w = eq.weight_matrix(k);
            assert!((w[0][0] - 1.0).abs() < 1e-3 && w[0][1].abs() < 1e-3);
            assert!(w[1][0].abs() < 1e-3 && (w[1][1] - 1.0).abs() < 1e-3);
            assert_eq!(eq.bias(k), [0.0, 0.0]);
        }
        let tx = training_burst(4, 8, 1);
        let eq = nn_train(
            &tx.map(|&x| BranchPair::uniform(x)),
            &tx,
            &NnHyper::default(),
            0,
        )
        .unwrap();
        assert!(eq.converged());
        assert!(eq
            .carriers()
            .iter()
            .all(|c| c.final_error <= 1e-6 && c.epochs_run < 500));
    }

    #[test]
    fn flat_gains_match_least_squares() {
        let gains = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::from_polar(0.8, std::f64::consts::FRAC_PI_4),
        ];
        for g in gains {
            let (eq, tx, rx) = train_flat(g);
            for k in 0..12 {
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
                assert!(frob < 1e-2, "gain {g}, carrier {k}: {frob}");
            }
        }
        let (eq, _, _) = train_flat(Complex64::new(0.5, 0.0));
        let w = eq.weight_matrix(0);
        assert!((w[0][0] - 2.0).abs() < 1e-2 && (w[1][1] - 2.0).abs() < 1e-2);
        let (eq, _, _) = train_flat(Complex64::new(0.0, 1.0));
        let w = eq.weight_matrix(0);
        let expect = [[0.0, 1.0], [-1.0, 0.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((w[r][c] - expect[r][c]).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn equalize_after_training() {
        let g = Complex64::from_polar(1.3, -2.0);
        let (eq, _, _) = train_flat(g);
        let data = qpsk_grid(12, 9, 99);
        let out = nn_equalize(&data.map(|&x| BranchPair::uniform(g * x)), &eq).unwrap();
        for (a, b) in out.as_slice().iter().zip(data.as_slice()) {
            assert!((a - b).norm() < 1e-3);
        }
    }

    #[test]
    fn identity_equalizer_passes_input() {
        let (eq, _, _) = train_flat(Complex64::new(1.0, 0.0));
        let data = qpsk_grid(12, 3, 5);
        let out = nn_equalize(&data.map(|&x| BranchPair::uniform(x)), &eq).unwrap();
        for (a, b) in out.as_slice().iter().zip(data.as_slice()) {
            assert!((a - b).norm() < 2e-3);
        }
    }

    #[test]
    fn linear_equalizer_is_linear() {
        let (eq, _, _) = train_flat(Complex64::from_polar(0.9, 0.4));
        let a = BranchPair {
            re_branch: Complex64::new(0.3, -1.0),
            im_branch: Complex64::new(2.0, 0.1),
        };
        let b = BranchPair {
            re_branch: Complex64::new(-0.7, 0.2),
            im_branch: Complex64::new(0.5, 0.5),
        };
        let s = BranchPair {
            re_branch: a.re_branch * 2.0 + b.re_branch * 3.0,
            im_branch: a.im_branch * 2.0 + b.im_branch * 3.0,
        };
        let lhs = eq.apply(4, s);
        let rhs = eq.apply(4, a) * 2.0 + eq.apply(4, b) * 3.0;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn untrained_and_mismatched() {
        let eq = NeuralEqualizer::untrained(4, NnHyper::default());
        let g = Grid::<BranchPair>::zeros(4, 2);
        assert!(matches!(nn_equalize(&g, &eq), Err(Error::Untrained)));
        let (eq, _, _) = train_flat(Complex64::new(1.0, 0.0));
        assert!(nn_equalize(&g, &eq).is_err());
        let tx = qpsk_grid(4, 4, 1);
        assert!(nn_train(&g, &tx, &NnHyper::default(), 0).is_err());
        let bad = NnHyper {
            delta: 0.0,
            ..NnHyper::default()
        };
        assert!(nn_train(&tx.map(|&x| BranchPair::uniform(x)), &tx, &bad, 0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let tx = qpsk_grid(3, 4, 1);
        let rx = tx.map(|&x| BranchPair::uniform(x * 10.0));
        let hyper = NnHyper {
            delta: 5.0,
            ..NnHyper::default()
        };
        match nn_train(&rx, &tx, &hyper, 0) {
            Err(Error::TrainingDiverged { delta, .. }) => assert_eq!(delta, 5.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn epoch_budget_flagged() {
        // Inconsistent targets: no exact fit, so the tolerance is never met.
        let tx = qpsk_grid(2, 4, 7);
        let rx = Grid::from_fn(2, 4, |k, n| BranchPair::uniform(tx.get(k, (n + 1) % 4)));
        let hyper = NnHyper {
            epochs: 20,
            ..NnHyper::default()
        };
        let eq = nn_train(&rx, &tx, &hyper, 0).unwrap();
        assert!(!eq.converged());
        assert!(eq.carriers().iter().all(|c| c.epochs_run == 20));
    }

    #[test]
    fn sigmoid_and_bias_modes_run() {
        let tx = qpsk_grid(2, 4, 7).map(|v| Complex64::new(0.5 + 0.3 * v.re, 0.5 + 0.3 * v.im));
        let rx = tx.map(|&x| BranchPair::uniform(x));
        let hyper = NnHyper {
            activation: Activation::Sigmoid,
            train_bias: true,
            epochs: 50,
            ..NnHyper::default()
        };
        let eq = nn_train(&rx, &tx, &hyper, 0).unwrap();
        let y = eq.apply(0, rx.get(0, 0));
        assert!(y.re > 0.0 && y.re < 1.0 && y.im > 0.0 && y.im < 1.0);
        assert_ne!(eq.bias(0), [0.0, 0.0]);
    }

    #[test]
    fn training_is_reproducible() {
        let (a, _, _) = train_flat(Complex64::new(0.2, 0.9));
        let (b, _, _) = train_flat(Complex64::new(0.2, 0.9));
        assert_eq!(a, b);
    }
}
