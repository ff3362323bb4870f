//! Exact inference by enumeration, numeric conditional-independence tests,
//! and sum-product message passing.
//!
//! Enumeration builds the full product of every function table and is the
//! reference the other routines are tested against. It refuses models with
//! more than [`MAX_CELLS`] joint configurations.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Evidence, FactorGraph, ModelError, NodeId};
use crate::tables::{Axis, FactorTable, TableError, MAX_CELLS};

/// Conditioning events with probability at or below this are skipped.
pub const ZERO_EVENT: f64 = 1e-12;

/// Loopy schedule stops once no message moves by more than this.
pub const CONVERGENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("total mass is zero under the given evidence")]
    ZeroMass,
    #[error("the factor graph skeleton has a cycle; use the loopy schedule")]
    NotATree,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` appears in more than one set")]
    OverlappingSets(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(TableError),
}

impl From<TableError> for InferenceError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::ZeroMass => InferenceError::ZeroMass,
            other => InferenceError::Table(other),
        }
    }
}

/// The product of all functions of `graph`, with axes for every variable in
/// declaration order. Variables outside every scope get an all-ones factor.
pub fn unnormalized_joint(graph: &FactorGraph) -> Result<FactorTable, TableError> {
    let axes: Vec<Axis> = (0..graph.variables().len())
        .map(|v| graph.variable_axis(v))
        .collect();
    let mut cells: u128 = 1;
    for a in &axes {
        cells = cells.saturating_mul(a.cardinality as u128);
    }
    if cells > MAX_CELLS as u128 {
        return Err(TableError::TooLarge { cells });
    }
    let tables: Vec<&FactorTable> = graph.functions().iter().map(|f| f.table()).collect();
    let order: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    FactorTable::product(&tables)?.extended(&axes)?.permute(&order)
}

/// A normalized distribution over every variable of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    table: FactorTable,
}

impl JointTable {
    pub fn table(&self) -> &FactorTable {
        &self.table
    }

    pub fn into_table(self) -> FactorTable {
        self.table
    }

    /// Marginal over one variable.
    pub fn marginal(&self, variable: &str) -> Result<Vec<f64>, InferenceError> {
        if self.table.position(variable).is_none() {
            return Err(InferenceError::UnknownVariable(variable.to_string()));
        }
        Ok(self.table.marginal_onto(&[variable])?.values().to_vec())
    }
}

/// Product of all functions with the evidence clamped, rescaled to sum to one.
/// Evidence variables stay as axes carrying a point mass.
pub fn joint_enumerate(
    graph: &FactorGraph,
    evidence: &Evidence,
) -> Result<JointTable, InferenceError> {
    evidence.validate(graph)?;
    let mut table = unnormalized_joint(graph)?;
    for (name, &state) in &evidence.assignments {
        table = table.clamp(name, state)?;
    }
    Ok(JointTable {
        table: table.normalized()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Enumerate,
    SumProduct,
}

/// `P(variable | evidence)`.
pub fn marginal(
    graph: &FactorGraph,
    variable: &str,
    evidence: &Evidence,
    method: Method,
) -> Result<Vec<f64>, InferenceError> {
    if graph.variable_index(variable).is_none() {
        return Err(InferenceError::UnknownVariable(variable.to_string()));
    }
    match method {
        Method::Enumerate => joint_enumerate(graph, evidence)?.marginal(variable),
        Method::SumProduct => {
            let set = sum_product(graph, evidence, &SumProductOptions::default())?;
            Ok(set.get(variable).expect("every variable has a belief").to_vec())
        }
    }
}

fn resolve_disjoint(
    graph: &FactorGraph,
    sets: [&[String]; 3],
) -> Result<(), InferenceError> {
    let mut seen = BTreeSet::new();
    for set in sets {
        for name in set {
            if graph.variable_index(name).is_none() {
                return Err(InferenceError::UnknownVariable(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(InferenceError::OverlappingSets(name.clone()));
            }
        }
    }
    Ok(())
}

/// Largest `|P(x,y|g) - P(x|g) P(y|g)|` over all configurations, skipping
/// conditioning events `g` with `P(g) <= 1e-12`.
pub fn ci_deviation(
    graph: &FactorGraph,
    x: &[String],
    y: &[String],
    given: &[String],
) -> Result<f64, InferenceError> {
    resolve_disjoint(graph, [x, y, given])?;
    let joint = joint_enumerate(graph, &Evidence::new())?;
    let order: Vec<&str> = given
        .iter()
        .chain(x)
        .chain(y)
        .map(String::as_str)
        .collect();
    let table = joint.table.marginal_onto(&order)?;
    let card = |names: &[String]| -> usize {
        names
            .iter()
            .map(|n| table.cardinality(n).unwrap_or(1))
            .product()
    };
    let (nx, ny) = (card(x), card(y));
    let mut worst = 0.0_f64;
    for block in table.values().chunks(nx * ny) {
        let pg: f64 = block.iter().sum();
        if pg <= ZERO_EVENT {
            continue;
        }
        let px: Vec<f64> = (0..nx)
            .map(|i| block[i * ny..(i + 1) * ny].iter().sum::<f64>() / pg)
            .collect();
        let py: Vec<f64> = (0..ny)
            .map(|j| (0..nx).map(|i| block[i * ny + j]).sum::<f64>() / pg)
            .collect();
        for i in 0..nx {
            for j in 0..ny {
                worst = worst.max((block[i * ny + j] / pg - px[i] * py[j]).abs());
            }
        }
    }
    Ok(worst)
}

/// Numeric conditional independence of `x` and `y` given `given`, within `tol`.
pub fn numeric_ci(
    graph: &FactorGraph,
    x: &[String],
    y: &[String],
    given: &[String],
    tol: f64,
) -> Result<bool, InferenceError> {
    Ok(ci_deviation(graph, x, y, given)? <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Leaves to root and back; exact, needs an acyclic skeleton.
    Tree,
    /// Synchronous flooding with damping; approximate.
    Loopy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumProductOptions {
    pub schedule: Schedule,
    pub max_iters: usize,
    /// weight of the previous message in the loopy update
    pub damping: f64,
}

impl Default for SumProductOptions {
    fn default() -> Self {
        SumProductOptions {
            schedule: Schedule::Tree,
            max_iters: 200,
            damping: 0.5,
        }
    }
}

/// Per-variable beliefs, in variable declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub marginals: Vec<(String, Vec<f64>)>,
    /// false for loopy runs, whose beliefs are approximate
    pub exact: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl MarginalSet {
    pub fn get(&self, variable: &str) -> Option<&[f64]> {
        self.marginals
            .iter()
            .find(|(n, _)| n == variable)
            .map(|(_, p)| p.as_slice())
    }
}

/// Scope edges of the skeleton, with lookup from either endpoint.
struct Skeleton<'g> {
    graph: &'g FactorGraph,
    /// (function, position in its scope, variable)
    edges: Vec<(usize, usize, usize)>,
    fn_edges: Vec<Vec<usize>>,
    var_edges: Vec<Vec<usize>>,
}

impl<'g> Skeleton<'g> {
    fn new(graph: &'g FactorGraph) -> Self {
        let mut edges = Vec::new();
        let mut fn_edges = vec![Vec::new(); graph.functions().len()];
        let mut var_edges = vec![Vec::new(); graph.variables().len()];
        for (k, f) in graph.functions().iter().enumerate() {
            for (pos, &v) in f.scope().iter().enumerate() {
                fn_edges[k].push(edges.len());
                var_edges[v].push(edges.len());
                edges.push((k, pos, v));
            }
        }
        Skeleton {
            graph,
            edges,
            fn_edges,
            var_edges,
        }
    }

    fn is_forest(&self) -> bool {
        let nv = self.var_edges.len();
        let n = nv + self.fn_edges.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(f, _, v) in &self.edges {
            let (a, b) = (find(&mut parent, nv + f), find(&mut parent, v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    fn card(&self, v: usize) -> usize {
        self.graph.variables()[v].cardinality
    }

    fn evidence_vector(&self, v: usize, evidence: &[Option<usize>]) -> Vec<f64> {
        match evidence[v] {
            Some(s) => (0..self.card(v)).map(|i| if i == s { 1.0 } else { 0.0 }).collect(),
            None => vec![1.0; self.card(v)],
        }
    }

    fn var_to_fn(&self, e: usize, to_var: &[Vec<f64>], evidence: &[Option<usize>]) -> Vec<f64> {
        let v = self.edges[e].2;
        let mut out = self.evidence_vector(v, evidence);
        for &other in &self.var_edges[v] {
            if other != e {
                for (o, m) in out.iter_mut().zip(&to_var[other]) {
                    *o *= m;
                }
            }
        }
        normalize(out)
    }

    fn fn_to_var(&self, e: usize, to_fn: &[Vec<f64>]) -> Vec<f64> {
        let (f, pos, v) = self.edges[e];
        let table = self.graph.functions()[f].table();
        let incoming: Vec<&[f64]> = self.fn_edges[f]
            .iter()
            .map(|&other| to_fn[other].as_slice())
            .collect();
        let mut out = vec![0.0; self.card(v)];
        for (states, value) in table.iter() {
            if value == 0.0 {
                continue;
            }
            let mut w = value;
            for (i, &s) in states.iter().enumerate() {
                if i != pos {
                    w *= incoming[i][s];
                }
            }
            out[states[pos]] += w;
        }
        normalize(out)
    }

    fn beliefs(
        &self,
        to_var: &[Vec<f64>],
        evidence: &[Option<usize>],
    ) -> Result<Vec<(String, Vec<f64>)>, InferenceError> {
        (0..self.var_edges.len())
            .map(|v| {
                let mut b = self.evidence_vector(v, evidence);
                for &e in &self.var_edges[v] {
                    for (x, m) in b.iter_mut().zip(&to_var[e]) {
                        *x *= m;
                    }
                }
                let total: f64 = b.iter().sum();
                if total <= 0.0 {
                    return Err(InferenceError::ZeroMass);
                }
                Ok((
                    self.graph.variables()[v].name.clone(),
                    b.into_iter().map(|x| x / total).collect(),
                ))
            })
            .collect()
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in &mut v {
            *x /= total;
        }
    }
    v
}

/// Sum-product over the factor graph skeleton. Edge directions and dashed
/// edges play no role here; messages are normalized per edge.
pub fn sum_product(
    graph: &FactorGraph,
    evidence: &Evidence,
    options: &SumProductOptions,
) -> Result<MarginalSet, InferenceError> {
    evidence.validate(graph)?;
    let mut clamp = vec![None; graph.variables().len()];
    for (name, &state) in &evidence.assignments {
        clamp[graph.variable_index(name).unwrap()] = Some(state);
    }
    let sk = Skeleton::new(graph);
    let uniform = |e: usize| {
        let c = sk.card(sk.edges[e].2);
        vec![1.0 / c as f64; c]
    };
    let mut to_fn: Vec<Vec<f64>> = (0..sk.edges.len()).map(uniform).collect();
    let mut to_var: Vec<Vec<f64>> = to_fn.clone();

    match options.schedule {
        Schedule::Tree => {
            if !sk.is_forest() {
                return Err(InferenceError::NotATree);
            }
            // DFS order per component, remembering the edge to the parent
            let nv = graph.variables().len();
            let mut visited = vec![false; nv + graph.functions().len()];
            let mut order: Vec<(NodeId, Option<usize>)> = Vec::new();
            for root in 0..nv {
                if visited[root] {
                    continue;
                }
                visited[root] = true;
                let mut stack = vec![(NodeId::Variable(root), None)];
                while let Some((node, up)) = stack.pop() {
                    order.push((node, up));
                    let incident = match node {
                        NodeId::Variable(v) => &sk.var_edges[v],
                        NodeId::Function(f) => &sk.fn_edges[f],
                    };
                    for &e in incident {
                        if Some(e) == up {
                            continue;
                        }
                        let next = match node {
                            NodeId::Variable(_) => NodeId::Function(sk.edges[e].0),
                            NodeId::Function(_) => NodeId::Variable(sk.edges[e].2),
                        };
                        let id = match next {
                            NodeId::Variable(v) => v,
                            NodeId::Function(f) => nv + f,
                        };
                        if !visited[id] {
                            visited[id] = true;
                            stack.push((next, Some(e)));
                        }
                    }
                }
            }
            // collect: children before parents
            for &(node, up) in order.iter().rev() {
                if let Some(e) = up {
                    match node {
                        NodeId::Variable(_) => to_fn[e] = sk.var_to_fn(e, &to_var, &clamp),
                        NodeId::Function(_) => to_var[e] = sk.fn_to_var(e, &to_fn),
                    }
                }
            }
            // distribute: parents before children
            for &(node, up) in &order {
                match node {
                    NodeId::Variable(v) => {
                        for &e in &sk.var_edges[v] {
                            if Some(e) != up {
                                to_fn[e] = sk.var_to_fn(e, &to_var, &clamp);
                            }
                        }
                    }
                    NodeId::Function(f) => {
                        for &e in &sk.fn_edges[f] {
                            if Some(e) != up {
                                to_var[e] = sk.fn_to_var(e, &to_fn);
                            }
                        }
                    }
                }
            }
            Ok(MarginalSet {
                marginals: sk.beliefs(&to_var, &clamp)?,
                exact: true,
                converged: true,
                iterations: 1,
            })
        }
        Schedule::Loopy => {
            let d = options.damping;
            let mut converged = false;
            let mut iterations = 0;
            while iterations < options.max_iters {
                iterations += 1;
                let new_to_var: Vec<Vec<f64>> =
                    (0..sk.edges.len()).map(|e| sk.fn_to_var(e, &to_fn)).collect();
                let new_to_fn: Vec<Vec<f64>> = (0..sk.edges.len())
                    .map(|e| sk.var_to_fn(e, &to_var, &clamp))
                    .collect();
                let mut delta = 0.0_f64;
                for (old, new) in to_var
                    .iter_mut()
                    .zip(new_to_var)
                    .chain(to_fn.iter_mut().zip(new_to_fn))
                {
                    for (o, n) in old.iter_mut().zip(new) {
                        let damped = d * *o + (1.0 - d) * n;
                        delta = delta.max((damped - *o).abs());
                        *o = damped;
                    }
                }
                if delta < CONVERGENCE_TOL {
                    converged = true;
                    break;
                }
            }
            Ok(MarginalSet {
                marginals: sk.beliefs(&to_var, &clamp)?,
                exact: false,
                converged,
                iterations,
            })
        }
    }
}
