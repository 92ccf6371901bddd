use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainerConfig;
use crate::data::Dataset;
use crate::deriv::{assemble_gradient, DerivativeBundle};
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::solve::{check_stability, solve, ActivityState, StabilityScope};

/// Solves every row of `inputs` (a `K×I` matrix) and stacks the activity
/// vectors into a `K×N` matrix.
pub fn batch_forward(spec: &NetworkSpec, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = inputs.nrows();
    let states: Vec<ActivityState> = (0..k)
        .into_par_iter()
        .map(|s| {
            let row: Vec<f64> = inputs.row(s).iter().copied().collect();
            solve(spec, &row).map_err(|e| Error::Sample { sample: s, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(k, spec.n(), |s, i| states[s].rho[i]))
}

/// Steady states of every sample, in sample order.
pub fn solve_all(spec: &NetworkSpec, data: &Dataset) -> Result<Vec<ActivityState>> {
    (0..data.len())
        .into_par_iter()
        .map(|s| solve(spec, &data.input_row(s)).map_err(|e| Error::Sample { sample: s, source: Box::new(e) }))
        .collect()
}

/// `Σ_k Σ_o (b_o − ρ_o)²` from solved states.
fn rss(spec: &NetworkSpec, data: &Dataset, states: &[ActivityState]) -> f64 {
    let outputs = spec.outputs();
    let mut total = 0.0;
    for (s, st) in states.iter().enumerate() {
        for (c, &o) in outputs.iter().enumerate() {
            let e = data.targets()[(s, c)] - st.rho[o];
            total += e * e;
        }
    }
    total
}

/// Batch mean squared error `RSS / K`.
pub fn batch_mse(spec: &NetworkSpec, data: &Dataset) -> Result<f64> {
    let states = solve_all(spec, data)?;
    Ok(rss(spec, data, &states) / data.len() as f64)
}

pub(crate) fn check_shapes(spec: &NetworkSpec, data: &Dataset) -> Result<()> {
    let (i, o) = (spec.inputs().len(), spec.outputs().len());
    if data.n_inputs() != i || data.n_targets() != o {
        return Err(Error::Shape(format!(
            "dataset is {}->{} but network is {i}->{o}",
            data.n_inputs(),
            data.n_targets()
        )));
    }
    Ok(())
}

/// Seeded sampler of `U[lo, hi]` initial weights.
pub fn weight_sampler(seed: u64, range: [f64; 2]) -> impl FnMut() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = range;
    move || if hi > lo { rng.random_range(lo..hi) } else { lo }
}

/// Redraws every trainable weight from `U[init_range]` with `rng_seed`.
pub fn init_weights(spec: &mut NetworkSpec, config: &TrainerConfig) -> Result<()> {
    let mut draw = weight_sampler(config.rng_seed, config.init_range);
    let w = DVector::from_fn(spec.weight_index().len(), |_, _| draw());
    spec.set_weights_flat(&w)
}

/// Instability messages for the final weights, one per offending sample.
pub(crate) fn stability_warnings(spec: &NetworkSpec, data: &Dataset, scope: StabilityScope) -> Vec<String> {
    match solve_all(spec, data) {
        Err(e) => vec![format!("could not solve final network: {e}")],
        Ok(states) => states
            .iter()
            .enumerate()
            .filter_map(|(s, st)| {
                let report = check_stability(st, spec, scope);
                (!report.stable).then(|| format!("sample {s}: unstable neurons {:?}", report.unstable()))
            })
            .collect(),
    }
}

/// Batch least-squares problem in a chosen parameterization: the
/// parameters are the weights themselves or, when `squared`, `θ` with
/// `w = θ²`.
pub(crate) struct Problem<'a> {
    pub spec: NetworkSpec,
    pub data: &'a Dataset,
    pub squared: bool,
}

/// Residual, Jacobian and gradient of `½‖E‖²` in parameter space.
pub(crate) struct Linearization {
    pub half_rss: f64,
    pub jacobian: DMatrix<f64>,
    pub grad: DVector<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &NetworkSpec, data: &'a Dataset, squared: bool) -> Self {
        Problem { spec: spec.clone(), data, squared }
    }

    pub fn params(&self) -> DVector<f64> {
        let w = self.spec.weights_flat();
        if self.squared {
            w.map(f64::sqrt)
        } else {
            w
        }
    }

    pub fn weights(&self, p: &DVector<f64>) -> DVector<f64> {
        if self.squared {
            p.map(|t| t * t)
        } else {
            p.clone()
        }
    }

    pub fn load(&mut self, p: &DVector<f64>) -> Result<()> {
        let w = self.weights(p);
        self.spec.set_weights_flat(&w)
    }

    pub fn half_rss(&mut self, p: &DVector<f64>) -> Result<f64> {
        self.load(p)?;
        let states = solve_all(&self.spec, self.data)?;
        Ok(0.5 * rss(&self.spec, self.data, &states))
    }

    pub fn mse(&self, half_rss: f64) -> f64 {
        2.0 * half_rss / self.data.len() as f64
    }

    pub fn linearize(&mut self, p: &DVector<f64>) -> Result<Linearization> {
        self.load(p)?;
        let states = solve_all(&self.spec, self.data)?;
        let DerivativeBundle { residual, mut jacobian, .. } = assemble_gradient(&self.spec, self.data, &states)?;
        if self.squared {
            for (m, mut col) in jacobian.column_iter_mut().enumerate() {
                col.scale_mut(2.0 * p[m]);
            }
        }
        let grad = jacobian.transpose() * &residual;
        Ok(Linearization { half_rss: 0.5 * residual.norm_squared(), jacobian, grad })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_rows_match_single_solves() {
        let mut draw = weight_sampler(3, [0.1, 1.0]);
        let spec = NetworkSpec::layered(&[2, 3, 1], 1.0, &mut draw).unwrap();
        let inputs = DMatrix::from_fn(5, 2, |r, c| (r * 2 + c) as f64 / 10.0);
        let c = batch_forward(&spec, &inputs).unwrap();
        for k in 0..5 {
            let st = solve(&spec, &[inputs[(k, 0)], inputs[(k, 1)]]).unwrap();
            assert_eq!(c.row(k).transpose(), st.rho);
        }
        assert_eq!(batch_forward(&spec, &DMatrix::zeros(0, 2)).unwrap().shape(), (0, 6));
    }

    #[test]
    fn sampler_is_seeded_and_in_range() {
        let a: Vec<f64> = std::iter::repeat_with(weight_sampler(9, [0.1, 1.0])).take(50).collect();
        let b: Vec<f64> = std::iter::repeat_with(weight_sampler(9, [0.1, 1.0])).take(50).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|w| (0.1..1.0).contains(w)));
    }
}
