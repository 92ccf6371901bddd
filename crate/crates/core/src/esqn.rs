//! Echo State Queueing Network.
//!
//! A fixed random reservoir of random neurons driven one step at a time by
//! an input sequence, with a linear readout fitted by ridge regression.
//! Only the readout is trained.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{nmse, Dataset};
use crate::error::{Error, Result};

/// Reservoir and readout settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsqnConfig {
    /// Number of reservoir (hidden) neurons.
    pub hidden: usize,
    /// Probability that a candidate connection exists.
    pub density: f64,
    /// Weights are drawn uniformly from `[0, w_max]`.
    pub w_max: f64,
    /// Rate margin `σ ≥ 1`: every rate is `σ` times the outgoing mass.
    /// Larger values shorten the reservoir memory.
    pub sigma: f64,
    pub ridge_lambda: f64,
    pub washout: usize,
    pub seed: u64,
}

impl Default for EsqnConfig {
    fn default() -> Self {
        EsqnConfig {
            hidden: 50,
            density: 0.2,
            w_max: 1.0,
            sigma: 1.0,
            ridge_lambda: 1e-6,
            washout: 50,
            seed: 0,
        }
    }
}

impl EsqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("esqn.hidden must be >= 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!("esqn.density must be in (0, 1], got {}", self.density)));
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("esqn.w_max must be positive, got {}", self.w_max)));
        }
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("esqn.sigma must be >= 1, got {}", self.sigma)));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "esqn.ridge_lambda must be non-negative, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// Reservoir with its current state and (once fitted) its readout.
///
/// Neurons `0..I` are inputs, `I..I+H` the reservoir. `w_plus[(j, i)]` is
/// the excitatory weight of the connection `j → i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsqnModel {
    n_inputs: usize,
    w_plus: DMatrix<f64>,
    w_minus: DMatrix<f64>,
    rates: DVector<f64>,
    #[serde(skip)]
    state: Option<DVector<f64>>,
    /// `O × (I + H + 1)`, bias in the last column.
    readout: Option<DMatrix<f64>>,
    pub ridge_lambda: f64,
    pub washout: usize,
    /// Input steps where `a_i / r_i` exceeded 1 and was clamped.
    #[serde(skip)]
    input_clamps: usize,
}

impl EsqnModel {
    /// Random reservoir for `n_inputs` inputs.
    ///
    /// Inputs connect to reservoir neurons and reservoir neurons to each
    /// other (self-loops included) with probability `density`; each existing
    /// connection gets independent `w⁺, w⁻ ~ U[0, w_max]`. A neuron left
    /// without outgoing connections gets one to a random reservoir neuron.
    pub fn random(n_inputs: usize, config: &EsqnConfig) -> Result<Self> {
        config.validate()?;
        if n_inputs == 0 {
            return Err(Error::InvalidParameter("esqn needs at least one input".into()));
        }
        let n = n_inputs + config.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut w_plus = DMatrix::zeros(n, n);
        let mut w_minus = DMatrix::zeros(n, n);
        let mut draw = |rng: &mut ChaCha8Rng, j: usize, i: usize| {
            w_plus[(j, i)] = rng.random::<f64>() * config.w_max;
            w_minus[(j, i)] = rng.random::<f64>() * config.w_max;
        };
        for j in 0..n {
            let mut any = false;
            for i in n_inputs..n {
                if rng.random::<f64>() < config.density {
                    draw(&mut rng, j, i);
                    any = true;
                }
            }
            if !any {
                let i = rng.random_range(n_inputs..n);
                draw(&mut rng, j, i);
            }
        }
        let rates = DVector::from_fn(n, |j, _| {
            config.sigma * (w_plus.row(j).sum() + w_minus.row(j).sum())
        });
        Self::from_parts(n_inputs, w_plus, w_minus, rates, config.ridge_lambda, config.washout)
    }

    /// Reservoir from explicit weights (`[(j, i)]` = connection `j → i`) and
    /// rates.
    pub fn from_parts(
        n_inputs: usize,
        w_plus: DMatrix<f64>,
        w_minus: DMatrix<f64>,
        rates: DVector<f64>,
        ridge_lambda: f64,
        washout: usize,
    ) -> Result<Self> {
        let n = rates.len();
        if n_inputs == 0 || n_inputs > n {
            return Err(Error::InvalidParameter(format!("{n_inputs} inputs for {n} neurons")));
        }
        if w_plus.shape() != (n, n) || w_minus.shape() != (n, n) {
            return Err(Error::Shape(format!("weights must be {n}x{n}")));
        }
        if w_plus.iter().chain(w_minus.iter()).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("reservoir weights must be finite and non-negative".into()));
        }
        if let Some(i) = rates.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!("rate of neuron {i} must be positive")));
        }
        if !(ridge_lambda >= 0.0) {
            return Err(Error::InvalidParameter("ridge_lambda must be non-negative".into()));
        }
        Ok(EsqnModel {
            n_inputs,
            w_plus,
            w_minus,
            rates,
            state: None,
            readout: None,
            ridge_lambda,
            washout,
            input_clamps: 0,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Inputs plus reservoir neurons.
    pub fn n_neurons(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    pub fn w_plus(&self) -> &DMatrix<f64> {
        &self.w_plus
    }

    pub fn w_minus(&self) -> &DMatrix<f64> {
        &self.w_minus
    }

    pub fn readout(&self) -> Option<&DMatrix<f64>> {
        self.readout.as_ref()
    }

    pub fn input_clamps(&self) -> usize {
        self.input_clamps
    }

    /// Current state; zero before the first step.
    pub fn state(&self) -> DVector<f64> {
        self.state.clone().unwrap_or_else(|| DVector::zeros(self.n_neurons()))
    }

    pub fn reset(&mut self) {
        self.state = None;
        self.input_clamps = 0;
    }

    /// Advances the state by one input vector.
    pub fn step(&mut self, a: &[f64]) -> Result<&DVector<f64>> {
        if a.len() != self.n_inputs {
            return Err(Error::Shape(format!("expected {} inputs, got {}", self.n_inputs, a.len())));
        }
        let n = self.n_neurons();
        let prev = self.state();
        let mut next = DVector::zeros(n);
        for i in 0..self.n_inputs {
            let x = a[i] / self.rates[i];
            if x > 1.0 {
                self.input_clamps += 1;
            }
            next[i] = x.clamp(0.0, 1.0);
        }
        for i in self.n_inputs..n {
            let (mut num, mut den) = (0.0, self.rates[i]);
            for j in 0..n {
                let src = if j < self.n_inputs { next[j] } else { prev[j] };
                num += self.w_plus[(j, i)] * src;
                den += self.w_minus[(j, i)] * src;
            }
            next[i] = (num / den).clamp(0.0, 1.0);
        }
        self.state = Some(next);
        Ok(self.state.as_ref().expect("just set"))
    }

    /// Steps through every input row, returning the states as rows.
    pub fn run(&mut self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut states = DMatrix::zeros(inputs.nrows(), self.n_neurons());
        for k in 0..inputs.nrows() {
            let a: Vec<f64> = inputs.row(k).iter().copied().collect();
            let s = self.step(&a)?;
            states.row_mut(k).copy_from(&s.transpose());
        }
        Ok(states)
    }

    /// Resets the state, runs the training sequence and fits the readout on
    /// the post-washout states. The state is left at the end of the
    /// sequence so a held-out continuation can follow.
    pub fn fit(&mut self, data: &Dataset) -> Result<()> {
        let features = self.n_neurons() + 1;
        if data.len() <= self.washout + features {
            return Err(Error::InvalidInput(format!(
                "sequence of length {} too short: washout {} plus {features} features",
                data.len(),
                self.washout
            )));
        }
        self.reset();
        let states = self.run(data.inputs())?;
        let kept = data.len() - self.washout;
        let x = with_bias(&states.rows(self.washout, kept).into_owned());
        let y = data.targets().rows(self.washout, kept).into_owned();
        self.readout = Some(ridge(&x, &y, self.ridge_lambda)?.transpose());
        Ok(())
    }

    /// Teacher-forced one-step-ahead predictions from the current state,
    /// one row per input row.
    pub fn predict(&mut self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let readout = self
            .readout
            .clone()
            .ok_or_else(|| Error::State("esqn readout is not fitted".into()))?;
        let states = self.run(inputs)?;
        Ok(with_bias(&states) * readout.transpose())
    }

    /// Predictions on `data` and their NMSE.
    pub fn evaluate(&mut self, data: &Dataset) -> Result<(DMatrix<f64>, f64)> {
        let pred = self.predict(data.inputs())?;
        let score = nmse(pred.as_slice(), data.targets().as_slice())?;
        Ok((pred, score))
    }
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone().insert_column(x.ncols(), 1.0);
    out.set_column(x.ncols(), &DVector::from_element(x.nrows(), 1.0));
    out
}

/// Smallest singular-value ratio accepted for an unregularized fit.
const RANK_TOL: f64 = 1e-12;

/// Ridge solution `β = (XᵀX + λI)⁻¹ XᵀY`.
///
/// With `λ = 0` the design must have full column rank.
pub fn ridge(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!("{} design rows, {} target rows", x.nrows(), y.nrows())));
    }
    if lambda == 0.0 {
        let svd = x.clone().svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if x.nrows() < x.ncols() || !(min > RANK_TOL * max) {
            return Err(Error::IllConditioned(
                "design matrix is rank deficient, use ridge_lambda > 0".into(),
            ));
        }
        return svd.solve(y, 0.0).map_err(|e| Error::IllConditioned(e.to_string()));
    }
    let p = x.ncols();
    let gram = x.transpose() * x + DMatrix::identity(p, p) * lambda;
    let rhs = x.transpose() * y;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("regularized normal matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// Held-out NMSE of a linear autoregression: ridge regression of the
/// targets on the input window plus a bias.
pub fn ar_baseline(train: &Dataset, test: &Dataset, lambda: f64) -> Result<f64> {
    let beta = ridge(&with_bias(train.inputs()), train.targets(), lambda)?;
    let pred = with_bias(test.inputs()) * beta;
    nmse(pred.as_slice(), test.targets().as_slice())
}

/// Mean and two-sided Student-t confidence interval over repeated trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub confidence: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TrialSummary {
    pub fn from_values(values: Vec<f64>, confidence: f64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidInput("a confidence interval needs at least two trials".into()));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidParameter(format!("confidence must be in (0, 1), got {confidence}")));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_dev = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .inverse_cdf(0.5 + confidence / 2.0);
        let half = t * std_dev / (n as f64).sqrt();
        Ok(TrialSummary {
            values,
            mean,
            std_dev,
            confidence,
            ci_low: mean - half,
            ci_high: mean + half,
        })
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

impl std::fmt::Display for TrialSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "NMSE {:.4} ± {:.4} ({:.0}% CI [{:.4}, {:.4}], {} trials)",
            self.mean,
            self.half_width(),
            self.confidence * 100.0,
            self.ci_low,
            self.ci_high,
            self.values.len()
        )
    }
}

pub const DEFAULT_TRIALS: usize = 20;

/// Fits a fresh reservoir per trial (seed `config.seed + t`) on `train` and
/// scores it on `test`, which continues the training sequence.
pub fn esqn_trials(train: &Dataset, test: &Dataset, config: &EsqnConfig, trials: usize) -> Result<TrialSummary> {
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let cfg = EsqnConfig { seed: config.seed.wrapping_add(t), ..config.clone() };
            let mut model = EsqnModel::random(train.n_inputs(), &cfg)?;
            model.fit(train)?;
            Ok(model.evaluate(test)?.1)
        })
        .collect::<Result<Vec<f64>>>()?;
    TrialSummary::from_values(values, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hidden() -> EsqnModel {
        let mut wp = DMatrix::zeros(2, 2);
        wp[(0, 1)] = 1.0;
        EsqnModel::from_parts(1, wp, DMatrix::zeros(2, 2), DVector::from_vec(vec![2.0, 2.0]), 1e-6, 0).unwrap()
    }

    #[test]
    fn zero_input_keeps_zero_state() {
        let mut m = EsqnModel::random(2, &EsqnConfig::default()).unwrap();
        for _ in 0..5 {
            assert!(m.step(&[0.0, 0.0]).unwrap().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn hand_values() {
        let mut m = one_hidden();
        let s = m.step(&[0.6]).unwrap();
        assert!((s[0] - 0.3).abs() < 1e-15);
        assert!((s[1] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn hidden_neurons_see_the_previous_state() {
        // 1 → 2 → 2: neuron 2 reads neuron 1 one step late.
        let mut wp = DMatrix::zeros(3, 3);
        wp[(0, 1)] = 1.0;
        wp[(1, 2)] = 1.0;
        let mut m =
            EsqnModel::from_parts(1, wp, DMatrix::zeros(3, 3), DVector::from_element(3, 1.0), 0.0, 0).unwrap();
        let s1 = m.step(&[0.5]).unwrap().clone();
        assert_eq!((s1[1], s1[2]), (0.5, 0.0));
        let s2 = m.step(&[0.0]).unwrap().clone();
        assert_eq!((s2[1], s2[2]), (0.0, 0.5));
    }

    #[test]
    fn oversized_input_is_clamped_and_counted() {
        let mut m = one_hidden();
        let s = m.step(&[3.0]).unwrap();
        assert_eq!(s[0], 1.0);
        assert_eq!(m.input_clamps(), 1);
    }

    #[test]
    fn random_reservoir_is_deterministic_and_valid() {
        let cfg = EsqnConfig { hidden: 20, seed: 7, ..Default::default() };
        let a = EsqnModel::random(3, &cfg).unwrap();
        let b = EsqnModel::random(3, &cfg).unwrap();
        assert_eq!(a, b);
        // inputs receive nothing
        assert!(a.w_plus().columns(0, 3).iter().all(|&w| w == 0.0));
        for j in 0..a.n_neurons() {
            let mass = a.w_plus().row(j).sum() + a.w_minus().row(j).sum();
            assert!(mass > 0.0);
            assert!((a.rates()[j] - mass).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_zero_target_gives_zero_readout() {
        let x = DMatrix::from_fn(10, 3, |r, c| ((r * 3 + c) as f64).sin());
        let beta = ridge(&x, &DMatrix::zeros(10, 1), 1e-3).unwrap();
        assert!(beta.iter().all(|b| b.abs() < 1e-15));
    }

    #[test]
    fn ridge_recovers_a_coordinate() {
        let x = DMatrix::from_fn(12, 4, |r, c| ((r * r * 4 + c * c + r * c) as f64 * 0.37).sin());
        let y = x.columns(2, 1).into_owned();
        let beta = ridge(&x, &y, 0.0).unwrap();
        for (i, b) in beta.iter().enumerate() {
            let want = if i == 2 { 1.0 } else { 0.0 };
            assert!((b - want).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_design_without_ridge_is_rejected() {
        let mut x = DMatrix::from_fn(8, 3, |r, c| (r + c) as f64);
        let c0 = x.column(0).into_owned();
        x.set_column(2, &c0);
        assert!(matches!(ridge(&x, &DMatrix::zeros(8, 1), 0.0), Err(Error::IllConditioned(_))));
        assert!(ridge(&x, &DMatrix::zeros(8, 1), 1e-6).is_ok());
    }

    #[test]
    fn predict_requires_fit() {
        let mut m = one_hidden();
        assert!(matches!(m.predict(&DMatrix::zeros(2, 1)), Err(Error::State(_))));
    }

    #[test]
    fn trial_summary_interval() {
        let s = TrialSummary::from_values(vec![1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(s.mean, 2.0);
        // t_{0.975, 2} = 4.302653
        assert!((s.half_width() - 4.302652729749464 / 3f64.sqrt()).abs() < 1e-9);
        assert!(s.to_string().starts_with("NMSE 2.0000 ± 2.4841"), "{s}");
    }
}
