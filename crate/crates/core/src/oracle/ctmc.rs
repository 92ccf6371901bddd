//! Truncated continuous-time Markov chain of a G-network.
//!
//! Each queue holds `0..=B` positive customers. Arrivals at a full queue
//! are lost, which is the only difference from the infinite chain.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::solve::solve;

pub const MAX_QUEUES: usize = 4;
pub const MAX_STATES: usize = 2_000_000;
pub const DEFAULT_CAP: usize = 40;
/// Largest probability allowed on states with some queue at the cap.
pub const TRUNCATION_MASS: f64 = 1e-6;

/// Band elimination is used while `states · bandwidth²` stays below this.
const BANDED_WORK: f64 = 4e9;
const POWER_TOL: f64 = 1e-15;
const POWER_MAX_SWEEPS: usize = 1_000_000;

/// A network, the input pattern that sets its exogenous rates, and the
/// per-queue truncation cap.
#[derive(Debug, Clone)]
pub struct CtmcSpec {
    network: NetworkSpec,
    lambda_plus: DVector<f64>,
    cap: usize,
}

impl CtmcSpec {
    pub fn new(network: NetworkSpec, pattern: &[f64], cap: usize) -> Result<Self> {
        check_size(network.n(), cap)?;
        let lambda_plus = network.effective_lambda_plus(pattern)?;
        Ok(CtmcSpec { network, lambda_plus, cap })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn n_queues(&self) -> usize {
        self.network.n()
    }

    /// `(B + 1)^N`.
    pub fn n_states(&self) -> usize {
        (self.cap + 1).pow(self.network.n() as u32)
    }

    pub fn network(&self) -> &NetworkSpec {
        &self.network
    }

    fn with_cap(&self, cap: usize) -> Result<Self> {
        check_size(self.network.n(), cap)?;
        Ok(CtmcSpec { cap, ..self.clone() })
    }

    fn counts(&self, mut s: usize) -> Vec<usize> {
        let base = self.cap + 1;
        (0..self.n_queues())
            .map(|_| {
                let k = s % base;
                s /= base;
                k
            })
            .collect()
    }

    /// Calls `f(target, rate)` for every transition out of state `s`.
    /// Transitions that leave the state unchanged are skipped.
    fn for_each_transition(&self, s: usize, mut f: impl FnMut(usize, f64)) {
        let net = &self.network;
        let n = net.n();
        let b = self.cap;
        let k = self.counts(s);
        let stride: Vec<usize> = (0..n).map(|i| (b + 1).pow(i as u32)).collect();
        let lm = net.lambda_minus();
        let r = net.rates();
        let (wp, wm, d) = (net.w_plus(), net.w_minus(), net.departure());
        for i in 0..n {
            if self.lambda_plus[i] > 0.0 && k[i] < b {
                f(s + stride[i], self.lambda_plus[i]);
            }
            if k[i] == 0 {
                continue;
            }
            if lm[i] > 0.0 {
                f(s - stride[i], lm[i]);
            }
            // service completion at i, then routing
            let after = s - stride[i];
            if d[i] > 0.0 {
                f(after, r[i] * d[i]);
            }
            for j in 0..n {
                let kj = if j == i { k[j] - 1 } else { k[j] };
                if wp[(i, j)] > 0.0 {
                    let to = if kj < b { after + stride[j] } else { after };
                    if to != s {
                        f(to, wp[(i, j)]);
                    }
                }
                if wm[(i, j)] > 0.0 {
                    let to = if kj > 0 { after - stride[j] } else { after };
                    f(to, wm[(i, j)]);
                }
            }
        }
    }

    /// Dense generator `Q`, diagonal set to minus the off-diagonal row sum.
    /// Only for small chains.
    pub fn generator(&self) -> Result<DMatrix<f64>> {
        let m = self.n_states();
        if m > 5000 {
            return Err(Error::Guard(format!("{m} states is too many for a dense generator")));
        }
        let mut q = DMatrix::zeros(m, m);
        for s in 0..m {
            self.for_each_transition(s, |t, rate| q[(s, t)] += rate);
            let off: f64 = (0..m).filter(|&t| t != s).map(|t| q[(s, t)]).sum();
            q[(s, s)] = -off;
        }
        Ok(q)
    }
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > MAX_QUEUES {
        return Err(Error::Guard(format!("CTMC oracle handles 1..={MAX_QUEUES} queues, got {n}")));
    }
    if cap == 0 {
        return Err(Error::Guard("truncation cap must be >= 1".into()));
    }
    let states = (cap as f64 + 1.0).powi(n as i32);
    if states > MAX_STATES as f64 {
        return Err(Error::Guard(format!(
            "(B+1)^N = {states} exceeds {MAX_STATES} states (B = {cap}, N = {n})"
        )));
    }
    Ok(())
}

/// Stationary distribution of the truncated chain and its marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcSolution {
    pub cap: usize,
    pub n_queues: usize,
    /// Joint probabilities in mixed-radix order, queue 0 varying fastest.
    pub pi: Vec<f64>,
    /// `ρ̂_i = P(queue i non-empty)`.
    pub busy: Vec<f64>,
    /// Per-queue distribution over `0..=B`.
    pub marginals: Vec<Vec<f64>>,
    /// Probability of the states where some queue sits at the cap.
    pub cap_mass: f64,
    pub method: String,
}

impl CtmcSolution {
    /// Total variation `½ Σ |π(k) − Π_i ρ_iᵏⁱ(1 − ρ_i)|` over the truncated
    /// box.
    pub fn product_form_tv(&self, rho: &[f64]) -> Result<f64> {
        if rho.len() != self.n_queues {
            return Err(Error::Shape(format!("{} activities for {} queues", rho.len(), self.n_queues)));
        }
        let base = self.cap + 1;
        let mut tv = 0.0;
        for (s, &p) in self.pi.iter().enumerate() {
            let mut rest = s;
            let mut prod = 1.0;
            for &r in rho {
                prod *= r.powi((rest % base) as i32) * (1.0 - r);
                rest /= base;
            }
            tv += (p - prod).abs();
        }
        Ok(tv / 2.0)
    }
}

/// Steady state of the truncated chain.
///
/// The balance equations `πQ = 0` are solved with `π(0) = 1` fixed (one
/// equation dropped) by band elimination, or by uniformized power
/// iteration when the band is too wide. If more than
/// [`TRUNCATION_MASS`] sits on the cap, the cap is doubled once.
pub fn gnetwork_ctmc_steady(spec: &CtmcSpec) -> Result<CtmcSolution> {
    let pattern: Vec<f64> = spec.network.inputs().iter().map(|&i| spec.lambda_plus[i]).collect();
    let state = solve(&spec.network, &pattern)?;
    if let Some(&i) = state.saturated.first() {
        return Err(Error::Guard(format!("queue {i} is unstable (ρ ≥ 1), the chain has no steady state")));
    }
    let first = steady_with_cap(spec)?;
    if first.cap_mass <= TRUNCATION_MASS {
        return Ok(first);
    }
    let wider = spec.with_cap(spec.cap * 2).map_err(|_| Error::TruncationTooSmall {
        cap: spec.cap,
        mass: first.cap_mass,
    })?;
    let second = steady_with_cap(&wider)?;
    if second.cap_mass > TRUNCATION_MASS {
        return Err(Error::TruncationTooSmall { cap: wider.cap, mass: second.cap_mass });
    }
    Ok(second)
}

fn steady_with_cap(spec: &CtmcSpec) -> Result<CtmcSolution> {
    let m = spec.n_states();
    let mut bandwidth = 0usize;
    for s in 0..m {
        spec.for_each_transition(s, |t, _| bandwidth = bandwidth.max(s.abs_diff(t)));
    }
    let work = m as f64 * (bandwidth as f64).powi(2);
    let (pi, method) = if work <= BANDED_WORK {
        (banded_steady(spec, bandwidth)?, "banded")
    } else {
        (power_steady(spec)?, "power")
    };
    Ok(summarize(spec, pi, method))
}

/// Solves the balance equations of states `1..m` with `π(0) = 1`.
///
/// The matrix is `Qᵀ` without row and column 0. Its columns are weakly
/// diagonally dominant, so elimination without pivoting is stable and
/// keeps the band.
fn banded_steady(spec: &CtmcSpec, bw: usize) -> Result<Vec<f64>> {
    let m = spec.n_states();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let size = m - 1;
    let width = 2 * bw + 1;
    // band[i * width + (j + bw - i)] holds A[i][j]
    let mut band = vec![0.0; size * width];
    let mut rhs = vec![0.0; size];
    let idx = |i: usize, j: usize| i * width + j + bw - i;
    for s in 0..m {
        let mut out = 0.0;
        spec.for_each_transition(s, |t, rate| {
            out += rate;
            // flow s → t enters the balance equation of t
            if t == 0 {
                return;
            }
            if s == 0 {
                rhs[t - 1] -= rate;
            } else {
                band[idx(t - 1, s - 1)] += rate;
            }
        });
        if s > 0 {
            band[idx(s - 1, s - 1)] -= out;
        }
    }
    for k in 0..size {
        let pivot = band[idx(k, k)];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem(format!("zero pivot at state {}: chain is reducible", k + 1)));
        }
        let last = (k + bw).min(size - 1);
        for i in k + 1..=last {
            let factor = band[idx(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..=last {
                band[idx(i, j)] -= factor * band[idx(k, j)];
            }
            rhs[i] -= factor * rhs[k];
        }
    }
    let mut x = vec![0.0; size];
    for i in (0..size).rev() {
        let last = (i + bw).min(size - 1);
        let mut acc = rhs[i];
        for j in i + 1..=last {
            acc -= band[idx(i, j)] * x[j];
        }
        x[i] = acc / band[idx(i, i)];
    }
    let mut pi = Vec::with_capacity(m);
    pi.push(1.0);
    pi.extend(x.into_iter().map(|p| p.max(0.0)));
    normalize(&mut pi);
    Ok(pi)
}

/// Power iteration on the uniformized chain `P = I + Q/Λ`.
fn power_steady(spec: &CtmcSpec) -> Result<Vec<f64>> {
    let m = spec.n_states();
    let mut out = vec![0.0; m];
    for (s, o) in out.iter_mut().enumerate() {
        spec.for_each_transition(s, |_, rate| *o += rate);
    }
    let lambda = out.iter().cloned().fold(0.0, f64::max) * 1.01;
    if lambda == 0.0 {
        return Err(Error::SingularSystem("chain has no transitions".into()));
    }
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..POWER_MAX_SWEEPS {
        for (s, n) in next.iter_mut().enumerate() {
            *n = pi[s] * (1.0 - out[s] / lambda);
        }
        for s in 0..m {
            let p = pi[s];
            spec.for_each_transition(s, |t, rate| next[t] += p * rate / lambda);
        }
        normalize(&mut next);
        let change = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if change < POWER_TOL {
            return Ok(pi);
        }
    }
    Err(Error::NonConvergence { iterations: POWER_MAX_SWEEPS, residual: f64::NAN })
}

fn normalize(pi: &mut [f64]) {
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
}

fn summarize(spec: &CtmcSpec, pi: Vec<f64>, method: &str) -> CtmcSolution {
    let n = spec.n_queues();
    let b = spec.cap;
    let mut marginals = vec![vec![0.0; b + 1]; n];
    let mut cap_mass = 0.0;
    for (s, &p) in pi.iter().enumerate() {
        let k = spec.counts(s);
        for i in 0..n {
            marginals[i][k[i]] += p;
        }
        if k.iter().any(|&x| x == b) {
            cap_mass += p;
        }
    }
    let busy = marginals.iter().map(|m| 1.0 - m[0]).collect();
    CtmcSolution { cap: b, n_queues: n, pi, busy, marginals, cap_mass, method: method.to_string() }
}
