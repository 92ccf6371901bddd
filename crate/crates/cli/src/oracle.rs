use std::path::Path;

use gnet_core::data::Dataset;
use gnet_core::deriv::assemble_gradient;
use gnet_core::network::NetworkSpec;
use gnet_core::optim::{extended_gradient, solve_all};
use gnet_core::oracle::{finite_diff_gradient, gnetwork_ctmc_steady, CtmcSolution, CtmcSpec, FdTarget, DEFAULT_CAP};
use gnet_core::solve::solve;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{emit, read_json};
use crate::random;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub max_neurons: usize,
    pub recurrent: bool,
    pub samples: usize,
    pub h: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { seed: 0, max_neurons: 8, recurrent: false, samples: 3, h: 1e-6, rel_tol: 1e-5, abs_tol: 1e-8 }
    }
}

/// An open queueing network given by its rates, row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueNetwork {
    pub w_plus: Vec<Vec<f64>>,
    #[serde(default)]
    pub w_minus: Option<Vec<Vec<f64>>>,
    pub rates: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    #[serde(default)]
    pub lambda_minus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcConfig {
    pub network: QueueNetwork,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Serialize)]
struct Verdict<T: Serialize> {
    oracle: &'static str,
    pass: bool,
    max_deviation: f64,
    tolerance: f64,
    details: T,
}

#[derive(Serialize)]
struct TargetCheck {
    target: FdTarget,
    coordinates: usize,
    max_abs_dev: f64,
    max_rel_dev: f64,
}

#[derive(Serialize)]
struct GradcheckDetails {
    config: GradcheckConfig,
    neurons: usize,
    feedforward: bool,
    targets: Vec<TargetCheck>,
}

#[derive(Serialize)]
struct CtmcDetails {
    queues: usize,
    cap: usize,
    method: String,
    cap_mass: f64,
    busy: Vec<f64>,
    rho: Vec<f64>,
    max_busy_dev: f64,
    max_marginal_dev: f64,
}

#[derive(Serialize)]
struct ProductFormDetails {
    queues: usize,
    cap: usize,
    method: String,
    rho: Vec<f64>,
    total_variation: f64,
}

fn report<T: Serialize>(verdict: Verdict<T>, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
    text.push('\n');
    emit(out, &text)?;
    let word = if verdict.pass { "PASS" } else { "FAIL" };
    let line = format!(
        "{}: {word} (max deviation {:.3e}, tolerance {:.1e})",
        verdict.oracle, verdict.max_deviation, verdict.tolerance
    );
    eprintln!("{line}");
    if verdict.pass {
        Ok(())
    } else {
        Err(CliError::runtime(line))
    }
}

/// `|a − f| / max(|a|, |f|, abs/rel)`: at most `rel` exactly when the
/// coordinate is within `max(rel·scale, abs)`.
fn scaled_dev(a: f64, f: f64, rel: f64, abs: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(abs / rel)
}

fn compare(target: FdTarget, an: &DVector<f64>, fd: &DVector<f64>, skip: impl Fn(usize) -> bool, c: &GradcheckConfig) -> TargetCheck {
    let mut check = TargetCheck { target, coordinates: 0, max_abs_dev: 0.0, max_rel_dev: 0.0 };
    for m in (0..an.len()).filter(|&m| !skip(m)) {
        check.coordinates += 1;
        check.max_abs_dev = check.max_abs_dev.max((an[m] - fd[m]).abs());
        check.max_rel_dev = check.max_rel_dev.max(scaled_dev(an[m], fd[m], c.rel_tol, c.abs_tol));
    }
    check
}

fn gradcheck(c: &GradcheckConfig) -> CliResult<(bool, f64, GradcheckDetails)> {
    if !(c.h > 0.0) || !(c.rel_tol > 0.0) || !(c.abs_tol >= 0.0) || c.samples == 0 || c.max_neurons < 2 {
        return Err(CliError::usage("gradcheck: need h > 0, rel_tol > 0, abs_tol >= 0, samples >= 1, max_neurons >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let spec = if c.recurrent { random::recurrent(&mut rng, c.max_neurons) } else { random::feedforward(&mut rng, c.max_neurons) };
    let data = random::dataset(&mut rng, &spec, c.samples);
    let targets = checks(&spec, &data, c)?;
    let worst = targets.iter().map(|t| t.max_rel_dev).fold(0.0, f64::max);
    let details = GradcheckDetails { config: c.clone(), neurons: spec.n(), feedforward: spec.is_feedforward(), targets };
    Ok((worst <= c.rel_tol, worst, details))
}

fn checks(spec: &NetworkSpec, data: &Dataset, c: &GradcheckConfig) -> CliResult<Vec<TargetCheck>> {
    let bundle = assemble_gradient(spec, data, &solve_all(spec, data)?)?;
    let n = spec.n();
    let (mut gp, mut gm, mut gr) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    for k in 0..data.len() {
        let (_, p, m, r) = extended_gradient(spec, &data.input_row(k), &data.target_row(k))?;
        gp += p;
        gm += m;
        gr += r;
    }
    let fd = |t| finite_diff_gradient(spec, data, c.h, t);
    let inputs = spec.inputs();
    Ok(vec![
        compare(FdTarget::Weights, &bundle.grad, &fd(FdTarget::Weights)?, |_| false, c),
        // λ⁺ of an input is the pattern itself
        compare(FdTarget::LambdaPlus, &gp, &fd(FdTarget::LambdaPlus)?, |u| inputs.contains(&u), c),
        compare(FdTarget::LambdaMinus, &gm, &fd(FdTarget::LambdaMinus)?, |_| false, c),
        compare(FdTarget::OutputRates, &gr, &fd(FdTarget::OutputRates)?, |u| !spec.roles()[u].is_output(), c),
    ])
}

pub fn cmd_gradcheck(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let mut c: GradcheckConfig = match config {
        Some(p) => read_json(p, "gradcheck config")?,
        None => GradcheckConfig::default(),
    };
    if let Some(s) = seed {
        c.seed = s;
    }
    let (pass, worst, details) = gradcheck(&c)?;
    report(Verdict { oracle: "gradcheck", pass, max_deviation: worst, tolerance: c.rel_tol, details }, out)
}

fn matrix(name: &str, n: usize, rows: &[Vec<f64>]) -> CliResult<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::usage(format!("network: `{name}` must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_ctmc(c: &CtmcConfig) -> CliResult<(CtmcSolution, DVector<f64>)> {
    let q = &c.network;
    let n = q.rates.len();
    let vector = |name: &str, v: &[f64]| {
        if v.len() == n {
            Ok(DVector::from_column_slice(v))
        } else {
            Err(CliError::usage(format!("network: `{name}` must have {n} entries")))
        }
    };
    if !(c.tolerance > 0.0) {
        return Err(CliError::usage("`tolerance` must be > 0"));
    }
    let wp = matrix("w_plus", n, &q.w_plus)?;
    let wm = match &q.w_minus {
        Some(rows) => matrix("w_minus", n, rows)?,
        None => DMatrix::zeros(n, n),
    };
    let lp = vector("lambda_plus", &q.lambda_plus)?;
    let lm = match &q.lambda_minus {
        Some(v) => vector("lambda_minus", v)?,
        None => DVector::zeros(n),
    };
    let net = NetworkSpec::from_queueing(wp, wm, vector("rates", &q.rates)?, lp, lm)
        .map_err(|e| CliError::usage(format!("network: {e}")))?;
    let pattern: Vec<f64> = net.inputs().iter().map(|&i| net.lambda_plus()[i]).collect();
    let spec = CtmcSpec::new(net.clone(), &pattern, c.cap)?;
    let sol = gnetwork_ctmc_steady(&spec)?;
    let rho = solve(&net, &pattern)?.rho;
    Ok((sol, rho))
}

fn read_ctmc(config: &Path) -> CliResult<CtmcConfig> {
    read_json(config, "oracle config")
}

pub fn cmd_ctmc(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let c = read_ctmc(config)?;
    let (sol, rho) = build_ctmc(&c)?;
    let mut busy_dev: f64 = 0.0;
    let mut marginal_dev: f64 = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        busy_dev = busy_dev.max((sol.busy[i] - r).abs());
        for (k, &p) in sol.marginals[i].iter().enumerate() {
            marginal_dev = marginal_dev.max((p - r.powi(k as i32) * (1.0 - r)).abs());
        }
    }
    let worst = busy_dev.max(marginal_dev);
    let details = CtmcDetails {
        queues: sol.n_queues,
        cap: sol.cap,
        method: sol.method.clone(),
        cap_mass: sol.cap_mass,
        busy: sol.busy.clone(),
        rho: rho.iter().copied().collect(),
        max_busy_dev: busy_dev,
        max_marginal_dev: marginal_dev,
    };
    report(Verdict { oracle: "ctmc", pass: worst <= c.tolerance, max_deviation: worst, tolerance: c.tolerance, details }, out)
}

pub fn cmd_productform(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let c = read_ctmc(config)?;
    let (sol, rho) = build_ctmc(&c)?;
    let tv = sol.product_form_tv(rho.as_slice())?;
    let details = ProductFormDetails {
        queues: sol.n_queues,
        cap: sol.cap,
        method: sol.method.clone(),
        rho: rho.iter().copied().collect(),
        total_variation: tv,
    };
    report(Verdict { oracle: "productform", pass: tv <= c.tolerance, max_deviation: tv, tolerance: c.tolerance, details }, out)
}
