//! Bayesian networks, Markov random fields, and the conversions between them
//! and factor graphs. Every conversion preserves the joint distribution.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::model::{FactorGraph, FunctionDecl, ModelError, Role, Variable};
use crate::tables::{Axis, FactorTable, TableError};

/// Tolerance for CPD normalization in [`BayesNet`] validation.
pub const CPD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvertError {
    #[error("name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("variable `{0}` has cardinality zero")]
    ZeroCardinality(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` has no cpd")]
    MissingCpd(String),
    #[error("variable `{0}` has more than one cpd")]
    DuplicateCpd(String),
    #[error("cpd of `{child}` lists invalid parent `{parent}`")]
    InvalidParent { child: String, parent: String },
    #[error("parent relation has a cycle through `{0}`")]
    Cycle(String),
    #[error("cpd of `{child}` is not normalized (worst deviation {deviation:e})")]
    CpdNotNormalized { child: String, deviation: f64 },
    #[error("table for `{owner}`: {source}")]
    Table { owner: String, source: TableError },
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} - {1}")]
    DuplicateEdge(String, String),
    #[error("potential scope {{{}}} is not a clique", .0.join(","))]
    NotAClique(Vec<String>),
    #[error("potential scope {{{}}} is not a maximal clique", .0.join(","))]
    PotentialNotOnMaximalClique(Vec<String>),
    #[error("more than one potential on {{{}}}", .0.join(","))]
    DuplicatePotential(Vec<String>),
    #[error("function `{0}` has undirected edges")]
    UndirectedEdgePresent(String),
    #[error("function `{0}` has more than one child")]
    MultiChildFunction(String),
    #[error("variable `{0}` has no incoming directed edge")]
    OrphanVariable(String),
    #[error("function `{0}` has neither children nor dashed targets")]
    UnattachedFunction(String),
    #[error("local normalization fails for `{variable}` (worst deviation {deviation:e})")]
    NormalizationFailure { variable: String, deviation: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn table_err(owner: &str) -> impl FnOnce(TableError) -> ConvertError + '_ {
    move |source| ConvertError::Table {
        owner: owner.to_string(),
        source,
    }
}

fn index_variables(variables: &[Variable]) -> Result<HashMap<String, usize>, ConvertError> {
    let mut index = HashMap::new();
    for (i, v) in variables.iter().enumerate() {
        if v.cardinality == 0 {
            return Err(ConvertError::ZeroCardinality(v.name.clone()));
        }
        if index.insert(v.name.clone(), i).is_some() {
            return Err(ConvertError::DuplicateName(v.name.clone()));
        }
    }
    Ok(index)
}

/// Unvalidated CPD: table axes are `parents` in order, then `child`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdDecl {
    pub child: String,
    pub parents: Vec<String>,
    pub values: Vec<f64>,
}

impl CpdDecl {
    pub fn new<I, S>(child: impl Into<String>, parents: I, values: Vec<f64>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CpdDecl {
            child: child.into(),
            parents: parents.into_iter().map(Into::into).collect(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cpd {
    parents: Vec<usize>,
    table: FactorTable,
}

impl Cpd {
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    /// Axes: parents in order, child last.
    pub fn table(&self) -> &FactorTable {
        &self.table
    }
}

/// A Bayesian network: one normalized CPD per variable over a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    /// `cpds[i]` belongs to `variables[i]`
    cpds: Vec<Cpd>,
}

impl BayesNet {
    pub fn new(variables: Vec<Variable>, decls: Vec<CpdDecl>) -> Result<Self, ConvertError> {
        let index = index_variables(&variables)?;
        let mut slots: Vec<Option<Cpd>> = vec![None; variables.len()];
        for decl in decls {
            let child = *index
                .get(&decl.child)
                .ok_or_else(|| ConvertError::UnknownVariable(decl.child.clone()))?;
            if slots[child].is_some() {
                return Err(ConvertError::DuplicateCpd(decl.child));
            }
            let mut parents = Vec::with_capacity(decl.parents.len());
            for p in &decl.parents {
                let pi = *index.get(p).ok_or_else(|| ConvertError::InvalidParent {
                    child: decl.child.clone(),
                    parent: p.clone(),
                })?;
                if pi == child || parents.contains(&pi) {
                    return Err(ConvertError::InvalidParent {
                        child: decl.child.clone(),
                        parent: p.clone(),
                    });
                }
                parents.push(pi);
            }
            let axes = parents
                .iter()
                .chain(std::iter::once(&child))
                .map(|&v| Axis::new(variables[v].name.clone(), variables[v].cardinality))
                .collect();
            let table = FactorTable::new(axes, decl.values).map_err(table_err(&decl.child))?;
            let (ok, deviation) = table
                .is_normalized_over(&[decl.child.as_str()], CPD_TOL)
                .map_err(table_err(&decl.child))?;
            if !ok {
                return Err(ConvertError::CpdNotNormalized {
                    child: decl.child,
                    deviation,
                });
            }
            slots[child] = Some(Cpd { parents, table });
        }
        let cpds = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| ConvertError::MissingCpd(variables[i].name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let net = BayesNet { variables, cpds };
        net.check_acyclic()?;
        Ok(net)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    /// Number of parent-to-child edges.
    pub fn edge_count(&self) -> usize {
        self.cpds.iter().map(|c| c.parents.len()).sum()
    }

    pub fn parents_of(&self, v: usize) -> &[usize] {
        &self.cpds[v].parents
    }

    fn check_acyclic(&self) -> Result<(), ConvertError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn visit(net: &BayesNet, v: usize, state: &mut [u8]) -> Result<(), ConvertError> {
            match state[v] {
                1 => return Err(ConvertError::Cycle(net.variables[v].name.clone())),
                2 => return Ok(()),
                _ => {}
            }
            state[v] = 1;
            for &p in &net.cpds[v].parents {
                visit(net, p, state)?;
            }
            state[v] = 2;
            Ok(())
        }
        let mut state = vec![0u8; self.variables.len()];
        for v in 0..self.variables.len() {
            visit(self, v, &mut state)?;
        }
        Ok(())
    }
}

/// A potential in a Markov network; axes give its scope in stored order.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    scope: Vec<usize>,
    table: FactorTable,
}

impl Potential {
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn table(&self) -> &FactorTable {
        &self.table
    }
}

/// A Markov random field: an undirected graph with optional clique potentials.
///
/// Edges are stored as `(a, b)` with `a < b` in variable order and sorted;
/// potentials are sorted by their name-sorted scope. Two nets describing the
/// same model therefore compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovNet {
    variables: Vec<Variable>,
    edges: BTreeSet<(usize, usize)>,
    potentials: Vec<Potential>,
}

impl MarkovNet {
    pub fn new<S: AsRef<str>>(
        variables: Vec<Variable>,
        edges: &[(S, S)],
        potentials: Vec<(Vec<String>, Vec<f64>)>,
    ) -> Result<Self, ConvertError> {
        let index = index_variables(&variables)?;
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| ConvertError::UnknownVariable(name.to_string()))
        };
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            let (ia, ib) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if ia == ib {
                return Err(ConvertError::SelfLoop(a.as_ref().to_string()));
            }
            if !edge_set.insert((ia.min(ib), ia.max(ib))) {
                return Err(ConvertError::DuplicateEdge(
                    a.as_ref().to_string(),
                    b.as_ref().to_string(),
                ));
            }
        }
        let mut pots = Vec::with_capacity(potentials.len());
        for (scope_names, values) in potentials {
            let scope = scope_names
                .iter()
                .map(|n| lookup(n))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, &a) in scope.iter().enumerate() {
                for &b in &scope[i + 1..] {
                    if !edge_set.contains(&(a.min(b), a.max(b))) {
                        return Err(ConvertError::NotAClique(scope_names.clone()));
                    }
                }
            }
            let axes = scope
                .iter()
                .map(|&v| Axis::new(variables[v].name.clone(), variables[v].cardinality))
                .collect();
            let table =
                FactorTable::new(axes, values).map_err(table_err(&scope_names.join(",")))?;
            pots.push(Potential { scope, table });
        }
        let net = MarkovNet {
            variables,
            edges: edge_set,
            potentials: Vec::new(),
        };
        pots.sort_by_cached_key(|p| net.sorted_names(&p.scope));
        for w in pots.windows(2) {
            if net.sorted_names(&w[0].scope) == net.sorted_names(&w[1].scope) {
                return Err(ConvertError::DuplicatePotential(net.sorted_names(&w[0].scope)));
            }
        }
        Ok(MarkovNet {
            potentials: pots,
            ..net
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    fn sorted_names(&self, vars: &[usize]) -> Vec<String> {
        let mut names: Vec<String> = vars.iter().map(|&v| self.variables[v].name.clone()).collect();
        names.sort();
        names
    }

    fn adjacency(&self) -> Vec<HashSet<usize>> {
        let mut adj = vec![HashSet::new(); self.variables.len()];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    /// Maximal cliques as sorted variable-name lists, sorted lexicographically.
    pub fn maximal_cliques(&self) -> Vec<Vec<String>> {
        let adj = self.adjacency();
        let mut cliques = Vec::new();
        bron_kerbosch(
            &adj,
            Vec::new(),
            (0..self.variables.len()).collect(),
            HashSet::new(),
            &mut cliques,
        );
        let mut named: Vec<Vec<String>> = cliques.iter().map(|c| self.sorted_names(c)).collect();
        named.sort();
        named
    }
}

/// Bron–Kerbosch with Tomita pivoting.
fn bron_kerbosch(
    adj: &[HashSet<usize>],
    r: Vec<usize>,
    mut p: HashSet<usize>,
    mut x: HashSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r);
        }
        return;
    }
    let pivot = *p
        .union(&x)
        .max_by_key(|&&u| (p.iter().filter(|v| adj[u].contains(v)).count(), std::cmp::Reverse(u)))
        .unwrap();
    let mut candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    candidates.sort_unstable();
    for v in candidates {
        let mut r2 = r.clone();
        r2.push(v);
        let p2 = p.intersection(&adj[v]).copied().collect();
        let x2 = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(adj, r2, p2, x2, out);
        p.remove(&v);
        x.insert(v);
    }
}

pub fn maximal_cliques(mrf: &MarkovNet) -> Vec<Vec<String>> {
    mrf.maximal_cliques()
}

/// Returns `base` or `base` with a numeric suffix, avoiding `taken`.
fn unique_name(base: String, taken: &mut HashSet<String>) -> String {
    let mut name = base.clone();
    let mut i = 1;
    while taken.contains(&name) {
        name = format!("{base}_{i}");
        i += 1;
    }
    taken.insert(name.clone());
    name
}

/// One function per variable holding its CPD: parents point in, the child
/// points out.
pub fn bn_to_fg(bn: &BayesNet) -> Result<FactorGraph, ConvertError> {
    let mut taken: HashSet<String> = bn.variables.iter().map(|v| v.name.clone()).collect();
    let decls = bn
        .variables
        .iter()
        .zip(&bn.cpds)
        .map(|(var, cpd)| {
            let name = unique_name(format!("P_{}", var.name), &mut taken);
            FunctionDecl::from_table(name, &cpd.table)
                .parents(cpd.parents.iter().map(|&p| bn.variables[p].name.clone()))
                .children([var.name.clone()])
        })
        .collect();
    Ok(FactorGraph::new(bn.variables.clone(), decls)?)
}

/// Builds a BN from a fully directed factor graph. Each variable's CPD is the
/// product of the functions pointing into it and the normalization functions
/// dash-connected to it.
pub fn fg_to_bn(graph: &FactorGraph) -> Result<BayesNet, ConvertError> {
    let funcs = graph.functions();
    for f in funcs {
        if f.roles().contains(&Role::Undirected) {
            return Err(ConvertError::UndirectedEdgePresent(f.name().to_string()));
        }
        match f.children().count() {
            0 if f.dashed().is_empty() => {
                return Err(ConvertError::UnattachedFunction(f.name().to_string()))
            }
            0 | 1 => {}
            _ => return Err(ConvertError::MultiChildFunction(f.name().to_string())),
        }
    }
    let report = graph.check_local_normalization(CPD_TOL);
    if let Some(c) = report.components.iter().find(|c| !c.passed) {
        return Err(ConvertError::NormalizationFailure {
            variable: c.children.join(","),
            deviation: c.worst_deviation,
        });
    }

    let vars = graph.variables();
    // a normalizer with several dashed targets goes to the first of them
    let mut owner: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
    for (k, f) in funcs.iter().enumerate() {
        let target = f.children().next().or_else(|| f.dashed().first().copied());
        if let Some(v) = target {
            owner[v].push(k);
        }
    }

    let mut decls = Vec::with_capacity(vars.len());
    for (v, var) in vars.iter().enumerate() {
        if !funcs.iter().any(|f| f.children().any(|c| c == v)) {
            return Err(ConvertError::OrphanVariable(var.name.clone()));
        }
        let tables: Vec<&FactorTable> = owner[v].iter().map(|&k| funcs[k].table()).collect();
        let product = FactorTable::product(&tables).map_err(table_err(&var.name))?;
        let parents: Vec<String> = product
            .axis_names()
            .filter(|n| *n != var.name)
            .map(String::from)
            .collect();
        let mut order = parents.clone();
        order.push(var.name.clone());
        let table = product.permute(&order).map_err(table_err(&var.name))?;
        decls.push(CpdDecl {
            child: var.name.clone(),
            parents,
            values: table.values().to_vec(),
        });
    }
    BayesNet::new(vars.to_vec(), decls).map_err(|e| match e {
        ConvertError::CpdNotNormalized { child, deviation } => ConvertError::NormalizationFailure {
            variable: child,
            deviation,
        },
        other => other,
    })
}

/// One undirected function per maximal clique. Cliques without a potential
/// get the all-ones table.
pub fn mrf_to_fg(mrf: &MarkovNet) -> Result<FactorGraph, ConvertError> {
    let cliques = mrf.maximal_cliques();
    let mut by_clique: HashMap<Vec<String>, &Potential> = HashMap::new();
    for p in &mrf.potentials {
        let key = mrf.sorted_names(&p.scope);
        if !cliques.contains(&key) {
            return Err(ConvertError::PotentialNotOnMaximalClique(key));
        }
        if by_clique.insert(key.clone(), p).is_some() {
            return Err(ConvertError::DuplicatePotential(key));
        }
    }
    let mut taken: HashSet<String> = mrf.variables.iter().map(|v| v.name.clone()).collect();
    let index: HashMap<&str, usize> = mrf
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut decls = Vec::with_capacity(cliques.len());
    for clique in &cliques {
        let name = unique_name(format!("phi_{}", clique.join("_")), &mut taken);
        let table = match by_clique.get(clique) {
            Some(p) => p.table.clone(),
            None => FactorTable::ones(
                clique
                    .iter()
                    .map(|n| Axis::new(n.clone(), mrf.variables[index[n.as_str()]].cardinality))
                    .collect(),
            )
            .map_err(table_err(&name))?,
        };
        decls.push(FunctionDecl::from_table(name, &table));
    }
    Ok(FactorGraph::new(mrf.variables.clone(), decls)?)
}

/// Creates a clique over each function's neighbors (scope and dashed
/// targets), then assigns every function to the lexicographically first
/// maximal clique containing its neighbors. Each clique potential is the
/// product of its functions.
pub fn fg_to_mrf(graph: &FactorGraph) -> Result<MarkovNet, ConvertError> {
    let vars = graph.variables();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let neighbors: Vec<Vec<usize>> = graph
        .functions()
        .iter()
        .map(|f| f.scope().iter().chain(f.dashed()).copied().collect())
        .collect();
    for nb in &neighbors {
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    let edge_names: Vec<(String, String)> = edges
        .iter()
        .map(|&(a, b)| (vars[a].name.clone(), vars[b].name.clone()))
        .collect();
    let skeleton = MarkovNet::new(vars.to_vec(), &edge_names, Vec::new())?;
    let cliques = skeleton.maximal_cliques();

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); cliques.len()];
    for (k, nb) in neighbors.iter().enumerate() {
        let names: HashSet<&str> = nb.iter().map(|&v| vars[v].name.as_str()).collect();
        // cliques are sorted, so the first hit is the lexicographically first
        let c = cliques
            .iter()
            .position(|c| names.iter().all(|n| c.iter().any(|m| m == n)))
            .expect("every neighbor set lies in some maximal clique");
        assigned[c].push(k);
    }

    let index: HashMap<&str, usize> = vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut potentials = Vec::with_capacity(cliques.len());
    for (clique, members) in cliques.iter().zip(&assigned) {
        let tables: Vec<&FactorTable> =
            members.iter().map(|&k| graph.functions()[k].table()).collect();
        let axes: Vec<Axis> = clique
            .iter()
            .map(|n| Axis::new(n.clone(), vars[index[n.as_str()]].cardinality))
            .collect();
        let owner = clique.join(",");
        let table = FactorTable::product(&tables)
            .and_then(|p| p.extended(&axes))
            .map_err(table_err(&owner))?;
        let scope: Vec<String> = table.axis_names().map(String::from).collect();
        potentials.push((scope, table.values().to_vec()));
    }
    MarkovNet::new(vars.to_vec(), &edge_names, potentials)
}
