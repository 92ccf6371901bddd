//! Network data model.
//!
//! A network is stored through its canonical parameters: the positive and
//! negative weight matrices `w⁺`, `w⁻` (row `i` holds the weights of the
//! connections leaving neuron `i`), the free service rates of the output
//! neurons and the exogenous signal rates `λ⁺`, `λ⁻`. Service rates of
//! input and hidden neurons and all departure probabilities are derived
//! from those and refreshed after every mutation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking the routing-row invariant.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Role of a neuron with respect to the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Input,
    Hidden,
    Output,
    /// A neuron that receives an input variable and is read as an output.
    InputOutput,
}

impl Role {
    pub fn is_input(self) -> bool {
        matches!(self, Role::Input | Role::InputOutput)
    }

    pub fn is_output(self) -> bool {
        matches!(self, Role::Output | Role::InputOutput)
    }
}

/// Sign of a weight: excitatory (`w⁺`) or inhibitory (`w⁻`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Flat ordering of the trainable weights.
///
/// Coordinates `0..slots` address `w⁺` over the structural edges in
/// row-major order, coordinates `slots..2·slots` address `w⁻` in the same
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightIndex {
    slots: Vec<(usize, usize)>,
}

impl WeightIndex {
    pub fn len(&self) -> usize {
        2 * self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[(usize, usize)] {
        &self.slots
    }

    /// Maps a flat coordinate to `(sign, u, v)`.
    pub fn coordinate(&self, m: usize) -> (Sign, usize, usize) {
        let k = self.slots.len();
        if m < k {
            (Sign::Plus, self.slots[m].0, self.slots[m].1)
        } else {
            (Sign::Minus, self.slots[m - k].0, self.slots[m - k].1)
        }
    }

    /// Inverse of [`WeightIndex::coordinate`].
    pub fn position(&self, sign: Sign, u: usize, v: usize) -> Option<usize> {
        let p = self.slots.binary_search(&(u, v)).ok()?;
        Some(match sign {
            Sign::Plus => p,
            Sign::Minus => p + self.slots.len(),
        })
    }
}

/// Topology, weights and rates of one random neural network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    roles: Vec<Role>,
    edges: Vec<(usize, usize)>,
    mask: DMatrix<bool>,
    w_plus: DMatrix<f64>,
    w_minus: DMatrix<f64>,
    rates: DVector<f64>,
    departure: DVector<f64>,
    lambda_plus: DVector<f64>,
    lambda_minus: DVector<f64>,
    controlled: bool,
    order: Option<Vec<usize>>,
}

impl NetworkSpec {
    /// Builds a network from its canonical parameters and derives the
    /// remaining rates.
    ///
    /// `output_rates[i]` is read only for output neurons. Weights outside the
    /// structural `edges` must be zero.
    pub fn from_parts(
        roles: Vec<Role>,
        edges: Vec<(usize, usize)>,
        w_plus: DMatrix<f64>,
        w_minus: DMatrix<f64>,
        output_rates: DVector<f64>,
        lambda_plus: DVector<f64>,
        lambda_minus: DVector<f64>,
    ) -> Result<Self> {
        let n = roles.len();
        if n == 0 {
            return Err(Error::InvalidParameter("network must have at least one neuron".into()));
        }
        for (name, m) in [("w_plus", &w_plus), ("w_minus", &w_minus)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        for (name, v) in [
            ("output_rates", &output_rates),
            ("lambda_plus", &lambda_plus),
            ("lambda_minus", &lambda_minus),
        ] {
            if v.len() != n {
                return Err(Error::Shape(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        if !roles.iter().any(|r| r.is_output()) {
            return Err(Error::InvalidParameter("network needs at least one output neuron".into()));
        }

        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        let mut mask = DMatrix::from_element(n, n, false);
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Topology(format!("edge ({u}, {v}) out of range for {n} neurons")));
            }
            mask[(u, v)] = true;
        }
        for i in 0..n {
            for j in 0..n {
                let (p, m) = (w_plus[(i, j)], w_minus[(i, j)]);
                if !(p >= 0.0 && m >= 0.0) || !p.is_finite() || !m.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "weights must be finite and non-negative, got w+ = {p}, w- = {m} at ({i}, {j})"
                    )));
                }
                if !mask[(i, j)] && (p != 0.0 || m != 0.0) {
                    return Err(Error::Topology(format!("nonzero weight on absent edge ({i}, {j})")));
                }
            }
            if !(lambda_plus[i] >= 0.0 && lambda_minus[i] >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "exogenous rates of neuron {i} must be non-negative"
                )));
            }
        }

        let order = topological_order(n, &edges);
        let mut spec = NetworkSpec {
            roles,
            edges,
            mask,
            w_plus,
            w_minus,
            rates: output_rates,
            departure: DVector::zeros(n),
            lambda_plus,
            lambda_minus,
            controlled: false,
            order,
        };
        spec.derive_rates()?;
        Ok(spec)
    }

    /// Fully connected layered feedforward network: every neuron of layer
    /// `l` connects to every neuron of layer `l+1`. The first layer holds the
    /// input neurons and the last one the output neurons.
    ///
    /// Trainable weights are filled by `init`, called once per flat
    /// coordinate in [`WeightIndex`] order.
    pub fn layered(
        sizes: &[usize],
        output_rate: f64,
        mut init: impl FnMut() -> f64,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(format!(
                "layer sizes must be positive and at least two layers are required, got {sizes:?}"
            )));
        }
        let n: usize = sizes.iter().sum();
        let mut roles = Vec::with_capacity(n);
        let mut starts = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for (l, &size) in sizes.iter().enumerate() {
            starts.push(offset);
            let role = if l == 0 {
                Role::Input
            } else if l == sizes.len() - 1 {
                Role::Output
            } else {
                Role::Hidden
            };
            roles.extend(std::iter::repeat_n(role, size));
            offset += size;
        }
        let mut edges = Vec::new();
        for l in 0..sizes.len() - 1 {
            for u in starts[l]..starts[l] + sizes[l] {
                for v in starts[l + 1]..starts[l + 1] + sizes[l + 1] {
                    edges.push((u, v));
                }
            }
        }
        Self::with_edges(roles, edges, output_rate, &mut init)
    }

    /// Network with arbitrary structural edges, weights filled by `init` in
    /// [`WeightIndex`] order and every output rate set to `output_rate`.
    pub fn with_edges(
        roles: Vec<Role>,
        mut edges: Vec<(usize, usize)>,
        output_rate: f64,
        mut init: impl FnMut() -> f64,
    ) -> Result<Self> {
        let n = roles.len();
        edges.sort_unstable();
        edges.dedup();
        let mut w_plus = DMatrix::zeros(n, n);
        let mut w_minus = DMatrix::zeros(n, n);
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Topology(format!("edge ({u}, {v}) out of range for {n} neurons")));
            }
            w_plus[(u, v)] = init();
        }
        for &(u, v) in &edges {
            w_minus[(u, v)] = init();
        }
        Self::from_parts(
            roles,
            edges,
            w_plus,
            w_minus,
            DVector::from_element(n, output_rate),
            DVector::zeros(n),
            DVector::zeros(n),
        )
    }

    /// Queueing-style constructor: every rate is given explicitly and each
    /// neuron with a positive departure probability becomes an output.
    ///
    /// Edges are inferred from the nonzero weights.
    pub fn from_queueing(
        w_plus: DMatrix<f64>,
        w_minus: DMatrix<f64>,
        rates: DVector<f64>,
        lambda_plus: DVector<f64>,
        lambda_minus: DVector<f64>,
    ) -> Result<Self> {
        let n = rates.len();
        if w_plus.shape() != (n, n) || w_minus.shape() != (n, n) {
            return Err(Error::Shape(format!("weight matrices must be {n}x{n}")));
        }
        let mut edges = Vec::new();
        let mut roles = Vec::with_capacity(n);
        for i in 0..n {
            let mut mass = 0.0;
            for j in 0..n {
                if w_plus[(i, j)] != 0.0 || w_minus[(i, j)] != 0.0 {
                    edges.push((i, j));
                }
                mass += w_plus[(i, j)] + w_minus[(i, j)];
            }
            if !(rates[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("rate of queue {i} must be > 0")));
            }
            let d = 1.0 - mass / rates[i];
            let input = lambda_plus[i] > 0.0 || lambda_minus[i] > 0.0;
            roles.push(match (input, d > ROW_TOLERANCE) {
                (true, true) => Role::InputOutput,
                (true, false) => Role::Input,
                (false, true) => Role::Output,
                (false, false) => Role::Hidden,
            });
        }
        if !roles.iter().any(|r| r.is_output()) {
            return Err(Error::InvalidParameter(
                "at least one queue must route customers out of the network".into(),
            ));
        }
        let mut spec = Self::from_parts(roles, edges, w_plus, w_minus, rates.clone(), lambda_plus, lambda_minus)?;
        // non-output rates were derived from the weights; keep the caller's
        // values where they agree to within rounding
        for i in 0..n {
            if (spec.rates[i] - rates[i]).abs() > ROW_TOLERANCE * rates[i].max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "queue {i}: outgoing weight mass exceeds its rate"
                )));
            }
        }
        spec.rates = rates;
        spec.refresh_departures();
        Ok(spec)
    }

    /// Recomputes the service rates of non-output neurons and the departure
    /// probabilities of all neurons from the current weights.
    ///
    /// Non-output neurons get `d = 0` and `r = Σ_j (w⁺_ij + w⁻_ij)`; output
    /// neurons keep their rate and get `d = 1 − Σ_j (w⁺_ij + w⁻_ij)/r`.
    pub fn derive_rates(&mut self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let mass: f64 = (0..n).map(|j| self.w_plus[(i, j)] + self.w_minus[(i, j)]).sum();
            if self.roles[i].is_output() {
                let r = self.rates[i];
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "output neuron {i} needs a positive service rate, got {r}"
                    )));
                }
                if mass > r * (1.0 + ROW_TOLERANCE) {
                    return Err(Error::InvalidParameter(format!(
                        "output neuron {i}: outgoing weight mass {mass} exceeds its rate {r}"
                    )));
                }
                self.departure[i] = (1.0 - mass / r).max(0.0);
            } else {
                if !(mass > 0.0) {
                    return Err(Error::DegenerateNeuron { neuron: i });
                }
                self.rates[i] = mass;
                self.departure[i] = 0.0;
            }
        }
        Ok(())
    }

    fn refresh_departures(&mut self) {
        let n = self.n();
        for i in 0..n {
            let mass: f64 = (0..n).map(|j| self.w_plus[(i, j)] + self.w_minus[(i, j)]).sum();
            self.departure[i] = (1.0 - mass / self.rates[i]).max(0.0);
        }
    }

    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.mask[(u, v)]
    }

    pub fn w_plus(&self) -> &DMatrix<f64> {
        &self.w_plus
    }

    pub fn w_minus(&self) -> &DMatrix<f64> {
        &self.w_minus
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    pub fn departure(&self) -> &DVector<f64> {
        &self.departure
    }

    pub fn lambda_plus(&self) -> &DVector<f64> {
        &self.lambda_plus
    }

    pub fn lambda_minus(&self) -> &DVector<f64> {
        &self.lambda_minus
    }

    pub fn controlled(&self) -> bool {
        self.controlled
    }

    pub fn set_controlled(&mut self, controlled: bool) {
        self.controlled = controlled;
    }

    /// Input neuron indices in increasing order; pattern component `k` feeds
    /// the `k`-th of them.
    pub fn inputs(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i].is_input()).collect()
    }

    pub fn outputs(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i].is_output()).collect()
    }

    /// Topological order of the neurons when the graph is acyclic and has
    /// no self-loops.
    pub fn topological_order(&self) -> Option<&[usize]> {
        self.order.as_deref()
    }

    pub fn is_feedforward(&self) -> bool {
        self.order.is_some()
    }

    /// Routing probabilities `p⁺_ij = w⁺_ij / r_i`.
    pub fn routing_plus(&self) -> DMatrix<f64> {
        let mut p = self.w_plus.clone();
        for i in 0..self.n() {
            p.row_mut(i).scale_mut(1.0 / self.rates[i]);
        }
        p
    }

    /// Routing probabilities `p⁻_ij = w⁻_ij / r_i`.
    pub fn routing_minus(&self) -> DMatrix<f64> {
        let mut p = self.w_minus.clone();
        for i in 0..self.n() {
            p.row_mut(i).scale_mut(1.0 / self.rates[i]);
        }
        p
    }

    /// Largest violation of `Σ_j (p⁺_ij + p⁻_ij) + d_i = 1` over all rows.
    pub fn row_defect(&self) -> f64 {
        let (pp, pm) = (self.routing_plus(), self.routing_minus());
        (0..self.n())
            .map(|i| (pp.row(i).sum() + pm.row(i).sum() + self.departure[i] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Exogenous positive rates when `pattern` is presented: the base
    /// `λ⁺` with the entries of the input neurons replaced by the pattern.
    pub fn effective_lambda_plus(&self, pattern: &[f64]) -> Result<DVector<f64>> {
        let inputs = self.inputs();
        if pattern.len() != inputs.len() {
            return Err(Error::Shape(format!(
                "pattern has {} components, network has {} input neurons",
                pattern.len(),
                inputs.len()
            )));
        }
        let mut lp = self.lambda_plus.clone();
        for (&i, &a) in inputs.iter().zip(pattern) {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidInput(format!("input rate {a} must be finite and >= 0")));
            }
            lp[i] = a;
        }
        Ok(lp)
    }

    pub fn weight_index(&self) -> WeightIndex {
        WeightIndex { slots: self.edges.clone() }
    }

    /// Trainable weights in [`WeightIndex`] order.
    pub fn weights_flat(&self) -> DVector<f64> {
        let k = self.edges.len();
        let mut w = DVector::zeros(2 * k);
        for (p, &(u, v)) in self.edges.iter().enumerate() {
            w[p] = self.w_plus[(u, v)];
            w[p + k] = self.w_minus[(u, v)];
        }
        w
    }

    /// Replaces the trainable weights and re-derives the rates.
    ///
    /// On error the previous weights are restored.
    pub fn set_weights_flat(&mut self, w: &DVector<f64>) -> Result<()> {
        let k = self.edges.len();
        if w.len() != 2 * k {
            return Err(Error::Shape(format!("expected {} weights, got {}", 2 * k, w.len())));
        }
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("weights must be finite and >= 0, got {bad}")));
        }
        let saved = (self.w_plus.clone(), self.w_minus.clone(), self.rates.clone(), self.departure.clone());
        for (p, &(u, v)) in self.edges.iter().enumerate() {
            self.w_plus[(u, v)] = w[p];
            self.w_minus[(u, v)] = w[p + k];
        }
        if let Err(e) = self.derive_rates() {
            (self.w_plus, self.w_minus, self.rates, self.departure) = saved;
            return Err(e);
        }
        Ok(())
    }

    /// Replaces the trainable weights and the output rates together (entries
    /// of `rates` at non-output neurons are ignored). On error the network
    /// is left unchanged.
    pub fn set_weights_and_output_rates(&mut self, w: &DVector<f64>, rates: &DVector<f64>) -> Result<()> {
        if rates.len() != self.n() {
            return Err(Error::Shape(format!("expected {} rates, got {}", self.n(), rates.len())));
        }
        let saved = self.clone();
        for i in 0..self.n() {
            if self.roles[i].is_output() {
                self.rates[i] = rates[i];
            }
        }
        if let Err(e) = self.set_weights_flat(w) {
            *self = saved;
            return Err(e);
        }
        Ok(())
    }

    /// Sets one weight and re-derives the rates.
    pub fn set_weight(&mut self, sign: Sign, u: usize, v: usize, value: f64) -> Result<()> {
        let index = self.weight_index();
        let m = index
            .position(sign, u, v)
            .ok_or_else(|| Error::Topology(format!("({u}, {v}) is not a structural edge")))?;
        let mut w = self.weights_flat();
        w[m] = value;
        self.set_weights_flat(&w)
    }

    /// Sets the free service rate of an output neuron.
    pub fn set_output_rate(&mut self, i: usize, r: f64) -> Result<()> {
        if !self.roles[i].is_output() {
            return Err(Error::InvalidParameter(format!(
                "neuron {i} is not an output neuron, its rate is derived"
            )));
        }
        let old = self.rates[i];
        self.rates[i] = r;
        if let Err(e) = self.derive_rates() {
            self.rates[i] = old;
            self.derive_rates()?;
            return Err(e);
        }
        Ok(())
    }

    pub fn set_lambda_plus(&mut self, i: usize, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda+ must be >= 0, got {value}")));
        }
        self.lambda_plus[i] = value;
        Ok(())
    }

    pub fn set_lambda_minus(&mut self, i: usize, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda- must be >= 0, got {value}")));
        }
        self.lambda_minus[i] = value;
        Ok(())
    }

    /// Sum of outgoing weight mass of neuron `i`.
    pub fn outgoing_mass(&self, i: usize) -> f64 {
        (0..self.n()).map(|j| self.w_plus[(i, j)] + self.w_minus[(i, j)]).sum()
    }
}

/// Kahn's algorithm; `None` when the graph has a cycle or a self-loop.
fn topological_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u == v {
            return None;
        }
        indegree[v] += 1;
        children[u].push(v);
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop_first() {
        order.push(u);
        for &v in &children[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.insert(v);
            }
        }
    }
    (order.len() == n).then_some(order)
}
