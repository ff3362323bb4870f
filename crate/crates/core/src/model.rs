//! The extended factor graph: variables, function nodes and typed edges.
//!
//! Every function node connects to the variables in its scope with one of
//! three edge kinds (parent-in, child-out or undirected). A function may also
//! carry dashed edges to variables outside its scope, marking it as a
//! normalizer of a conditional over those variables. Dashed edges take part
//! in the acyclicity check and in descendant sets but never in paths.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::tables::{Axis, FactorTable, TableError};

/// Default tolerance for the local normalization check.
pub const DEFAULT_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("empty name")]
    EmptyName,
    #[error("variable `{0}` has cardinality zero")]
    ZeroCardinality(String),
    #[error("function `{function}` refers to unknown variable `{variable}`")]
    UnknownVariable { function: String, variable: String },
    #[error("function `{function}`: `{variable}` is not partitioned into exactly one of parents/children/undirected within the scope")]
    PartitionViolation { function: String, variable: String },
    #[error("function `{function}`: dashed target `{variable}` is also in its scope")]
    DashedOverlap { function: String, variable: String },
    #[error("function `{function}`: {source}")]
    TableShapeMismatch {
        function: String,
        source: TableError,
    },
    #[error("function `{function}`: value {value} at index {index} is negative or not finite")]
    NegativeOrNonFiniteValue {
        function: String,
        index: usize,
        value: f64,
    },
    #[error("directed cycle through `{0}`")]
    DirectedCycle(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("evidence on unknown variable `{0}`")]
    UnknownEvidence(String),
    #[error("evidence state {state} out of range for `{variable}` (cardinality {cardinality})")]
    EvidenceOutOfRange {
        variable: String,
        state: usize,
        cardinality: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
        }
    }
}

/// Edge classes between a function and a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// variable -> function
    ParentIn,
    /// function -> variable
    ChildOut,
    Undirected,
    /// function ⇢ variable (normalization)
    Dashed,
}

impl EdgeKind {
    pub fn is_directed(self) -> bool {
        !matches!(self, EdgeKind::Undirected)
    }
}

/// Role of a scope variable in a function node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Parent,
    Child,
    Undirected,
}

impl Role {
    pub fn edge_kind(self) -> EdgeKind {
        match self {
            Role::Parent => EdgeKind::ParentIn,
            Role::Child => EdgeKind::ChildOut,
            Role::Undirected => EdgeKind::Undirected,
        }
    }
}

/// Unvalidated description of a function node.
///
/// Scope variables not listed in `parents` or `children` and not listed in
/// `undirected` are treated as undirected.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionDecl {
    pub name: String,
    pub scope: Vec<String>,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub undirected: Vec<String>,
    pub normalizes: Vec<String>,
    pub values: Vec<f64>,
}

fn strings<I, S>(items: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    items.into_iter().map(Into::into).collect()
}

impl FunctionDecl {
    pub fn new(name: impl Into<String>) -> Self {
        FunctionDecl {
            name: name.into(),
            ..Default::default()
        }
    }

    /// A declaration whose scope and values are taken from `table`.
    pub fn from_table(name: impl Into<String>, table: &FactorTable) -> Self {
        FunctionDecl {
            name: name.into(),
            scope: table.axis_names().map(String::from).collect(),
            values: table.values().to_vec(),
            ..Default::default()
        }
    }

    pub fn scope<I: IntoIterator<Item = S>, S: Into<String>>(mut self, vars: I) -> Self {
        self.scope = strings(vars);
        self
    }

    pub fn parents<I: IntoIterator<Item = S>, S: Into<String>>(mut self, vars: I) -> Self {
        self.parents = strings(vars);
        self
    }

    pub fn children<I: IntoIterator<Item = S>, S: Into<String>>(mut self, vars: I) -> Self {
        self.children = strings(vars);
        self
    }

    pub fn undirected<I: IntoIterator<Item = S>, S: Into<String>>(mut self, vars: I) -> Self {
        self.undirected = strings(vars);
        self
    }

    pub fn normalizes<I: IntoIterator<Item = S>, S: Into<String>>(mut self, vars: I) -> Self {
        self.normalizes = strings(vars);
        self
    }

    pub fn values(mut self, values: Vec<f64>) -> Self {
        self.values = values;
        self
    }
}

/// A validated function node. Scope and dashed targets are variable indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionNode {
    name: String,
    scope: Vec<usize>,
    roles: Vec<Role>,
    dashed: Vec<usize>,
    table: FactorTable,
}

impl FunctionNode {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn dashed(&self) -> &[usize] {
        &self.dashed
    }

    pub fn table(&self) -> &FactorTable {
        &self.table
    }

    fn with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.scope
            .iter()
            .zip(&self.roles)
            .filter(move |(_, r)| **r == role)
            .map(|(v, _)| *v)
    }

    pub fn parents(&self) -> impl Iterator<Item = usize> + '_ {
        self.with_role(Role::Parent)
    }

    pub fn children(&self) -> impl Iterator<Item = usize> + '_ {
        self.with_role(Role::Child)
    }

    pub fn undirected(&self) -> impl Iterator<Item = usize> + '_ {
        self.with_role(Role::Undirected)
    }

    pub fn has_children(&self) -> bool {
        self.roles.contains(&Role::Child)
    }
}

/// A node of the bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Variable(usize),
    Function(usize),
}

/// Observed variables, as variable name to state index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    pub assignments: BTreeMap<String, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn with(mut self, variable: impl Into<String>, state: usize) -> Self {
        self.assignments.insert(variable.into(), state);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn validate(&self, graph: &FactorGraph) -> Result<(), ModelError> {
        for (name, &state) in &self.assignments {
            let v = graph
                .variable_index(name)
                .ok_or_else(|| ModelError::UnknownEvidence(name.clone()))?;
            let cardinality = graph.variables()[v].cardinality;
            if state >= cardinality {
                return Err(ModelError::EvidenceOutOfRange {
                    variable: name.clone(),
                    state,
                    cardinality,
                });
            }
        }
        Ok(())
    }
}

/// A validated, immutable extended factor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    functions: Vec<FunctionNode>,
    var_index: HashMap<String, usize>,
    fn_index: HashMap<String, usize>,
    /// per variable: incident (function, edge kind), dashed included
    incidence: Vec<Vec<(usize, EdgeKind)>>,
}

impl FactorGraph {
    /// Validates raw variable and function descriptions.
    pub fn new(variables: Vec<Variable>, decls: Vec<FunctionDecl>) -> Result<Self, ModelError> {
        let mut var_index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if v.name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if v.cardinality == 0 {
                return Err(ModelError::ZeroCardinality(v.name.clone()));
            }
            if var_index.insert(v.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
        }

        let mut fn_index = HashMap::new();
        let mut functions = Vec::with_capacity(decls.len());
        for (k, decl) in decls.into_iter().enumerate() {
            if decl.name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if var_index.contains_key(&decl.name) || fn_index.insert(decl.name.clone(), k).is_some()
            {
                return Err(ModelError::DuplicateName(decl.name));
            }
            functions.push(build_function(&variables, &var_index, decl)?);
        }

        let mut incidence = vec![Vec::new(); variables.len()];
        for (k, f) in functions.iter().enumerate() {
            for (&v, role) in f.scope.iter().zip(&f.roles) {
                incidence[v].push((k, role.edge_kind()));
            }
            for &v in &f.dashed {
                incidence[v].push((k, EdgeKind::Dashed));
            }
        }

        let graph = FactorGraph {
            variables,
            functions,
            var_index,
            fn_index,
            incidence,
        };
        graph.check_acyclic()?;
        Ok(graph)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn functions(&self) -> &[FunctionNode] {
        &self.functions
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.fn_index.get(name).copied()
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.variable_index(name)
            .map(NodeId::Variable)
            .or_else(|| self.function_index(name).map(NodeId::Function))
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        match node {
            NodeId::Variable(v) => &self.variables[v].name,
            NodeId::Function(f) => &self.functions[f].name,
        }
    }

    /// Incident functions of a variable with their edge kinds (dashed included).
    pub fn incidence(&self, variable: usize) -> &[(usize, EdgeKind)] {
        &self.incidence[variable]
    }

    /// All edges as (function, variable, kind).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeKind)> + '_ {
        self.functions.iter().enumerate().flat_map(|(k, f)| {
            f.scope
                .iter()
                .zip(&f.roles)
                .map(move |(&v, r)| (k, v, r.edge_kind()))
                .chain(f.dashed.iter().map(move |&v| (k, v, EdgeKind::Dashed)))
        })
    }

    pub fn variable_axis(&self, v: usize) -> Axis {
        Axis::new(self.variables[v].name.clone(), self.variables[v].cardinality)
    }

    /// Variables with no incident edge at all.
    pub fn isolated_variables(&self) -> Vec<usize> {
        (0..self.variables.len())
            .filter(|&v| self.incidence[v].is_empty())
            .collect()
    }

    pub fn has_directed_edges(&self) -> bool {
        self.edges().any(|(_, _, k)| k.is_directed())
    }

    pub fn has_undirected_edges(&self) -> bool {
        self.edges().any(|(_, _, k)| k == EdgeKind::Undirected)
    }

    /// One-step directed successors, dashed edges included.
    pub fn successors(&self, node: NodeId) -> Vec<NodeId> {
        match node {
            NodeId::Variable(v) => self.incidence[v]
                .iter()
                .filter(|(_, k)| *k == EdgeKind::ParentIn)
                .map(|(f, _)| NodeId::Function(*f))
                .collect(),
            NodeId::Function(f) => {
                let func = &self.functions[f];
                func.children()
                    .chain(func.dashed.iter().copied())
                    .map(NodeId::Variable)
                    .collect()
            }
        }
    }

    /// One-step directed predecessors, dashed edges included.
    pub fn predecessors(&self, node: NodeId) -> Vec<NodeId> {
        match node {
            NodeId::Variable(v) => self.incidence[v]
                .iter()
                .filter(|(_, k)| matches!(k, EdgeKind::ChildOut | EdgeKind::Dashed))
                .map(|(f, _)| NodeId::Function(*f))
                .collect(),
            NodeId::Function(f) => self.functions[f].parents().map(NodeId::Variable).collect(),
        }
    }

    fn check_acyclic(&self) -> Result<(), ModelError> {
        let nv = self.variables.len();
        let id = |n: NodeId| match n {
            NodeId::Variable(v) => v,
            NodeId::Function(f) => nv + f,
        };
        let nodes: Vec<NodeId> = (0..nv)
            .map(NodeId::Variable)
            .chain((0..self.functions.len()).map(NodeId::Function))
            .collect();
        let mut indegree = vec![0usize; nodes.len()];
        for &n in &nodes {
            for s in self.successors(n) {
                indegree[id(s)] += 1;
            }
        }
        let mut queue: VecDeque<NodeId> =
            nodes.iter().copied().filter(|&n| indegree[id(n)] == 0).collect();
        let mut seen = 0;
        while let Some(n) = queue.pop_front() {
            seen += 1;
            for s in self.successors(n) {
                indegree[id(s)] -= 1;
                if indegree[id(s)] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if seen < nodes.len() {
            let stuck = nodes.iter().find(|&&n| indegree[id(n)] > 0).unwrap();
            return Err(ModelError::DirectedCycle(self.node_name(*stuck).to_string()));
        }
        Ok(())
    }

    /// Strict descendants of `node` over parent-in, child-out and dashed edges.
    pub fn descendants(&self, node: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack = self.successors(node);
        while let Some(n) = stack.pop() {
            if out.insert(n) {
                stack.extend(self.successors(n));
            }
        }
        out
    }

    pub fn descendants_of(&self, name: &str) -> Result<BTreeSet<NodeId>, ModelError> {
        let node = self
            .node(name)
            .ok_or_else(|| ModelError::UnknownNode(name.to_string()))?;
        Ok(self.descendants(node))
    }

    /// Checks the local normalization condition on every maximal component
    /// of functions and the variables they point to with child-out edges.
    pub fn check_local_normalization(&self, tol: f64) -> NormalizationReport {
        let nv = self.variables.len();
        let nf = self.functions.len();
        // union-find over functions [0, nf) and variables [nf, nf + nv)
        let mut parent: Vec<usize> = (0..nf + nv).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (k, f) in self.functions.iter().enumerate() {
            for c in f.children() {
                let (a, b) = (find(&mut parent, k), find(&mut parent, nf + c));
                parent[a] = b;
            }
        }
        let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (k, f) in self.functions.iter().enumerate() {
            if f.has_children() {
                let root = find(&mut parent, k);
                groups.entry(root).or_default().0.push(k);
            }
        }
        for v in 0..nv {
            let has_parent_fn = self.incidence[v].iter().any(|(_, e)| *e == EdgeKind::ChildOut);
            if has_parent_fn {
                let root = find(&mut parent, nf + v);
                groups.entry(root).or_default().1.push(v);
            }
        }

        let mut components = Vec::new();
        for (members, children) in groups.into_values() {
            let normalizers: Vec<usize> = (0..nf)
                .filter(|k| !members.contains(k))
                .filter(|&k| self.functions[k].dashed.iter().any(|d| children.contains(d)))
                .collect();
            let tables: Vec<&FactorTable> = members
                .iter()
                .chain(&normalizers)
                .map(|&k| &self.functions[k].table)
                .collect();
            let child_names: Vec<&str> =
                children.iter().map(|&v| self.variables[v].name.as_str()).collect();
            let (passed, worst) = FactorTable::product(&tables)
                .and_then(|p| p.is_normalized_over(&child_names, tol))
                .unwrap_or((false, f64::INFINITY));
            let conditioning: BTreeSet<usize> = tables
                .iter()
                .flat_map(|t| t.axis_names())
                .filter_map(|n| self.variable_index(n))
                .filter(|v| !children.contains(v))
                .collect();
            components.push(ComponentReport {
                functions: members.iter().map(|&k| self.functions[k].name.clone()).collect(),
                normalizers: normalizers
                    .iter()
                    .map(|&k| self.functions[k].name.clone())
                    .collect(),
                children: child_names.iter().map(|s| s.to_string()).collect(),
                conditioning: conditioning
                    .into_iter()
                    .map(|v| self.variables[v].name.clone())
                    .collect(),
                worst_deviation: worst,
                passed,
            });
        }
        NormalizationReport {
            tolerance: tol,
            components,
            isolated: self
                .isolated_variables()
                .into_iter()
                .map(|v| self.variables[v].name.clone())
                .collect(),
        }
    }

    pub fn structure_stats(&self) -> StructureStats {
        let mut stats = StructureStats {
            variables: self.variables.len(),
            functions: self.functions.len(),
            ..Default::default()
        };
        for (_, _, kind) in self.edges() {
            match kind {
                EdgeKind::ParentIn => stats.parent_edges += 1,
                EdgeKind::ChildOut => stats.child_edges += 1,
                EdgeKind::Undirected => stats.undirected_edges += 1,
                EdgeKind::Dashed => stats.dashed_edges += 1,
            }
        }
        for f in &self.functions {
            *stats.scope_sizes.entry(f.scope.len()).or_default() += 1;
        }
        stats
    }
}

fn build_function(
    variables: &[Variable],
    var_index: &HashMap<String, usize>,
    decl: FunctionDecl,
) -> Result<FunctionNode, ModelError> {
    let lookup = |name: &String| {
        var_index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownVariable {
                function: decl.name.clone(),
                variable: name.clone(),
            })
    };
    let partition_err = |name: &String| ModelError::PartitionViolation {
        function: decl.name.clone(),
        variable: name.clone(),
    };

    let mut scope = Vec::with_capacity(decl.scope.len());
    for name in &decl.scope {
        let v = lookup(name)?;
        if scope.contains(&v) {
            return Err(ModelError::DuplicateName(name.clone()));
        }
        scope.push(v);
    }
    let mut roles: Vec<Option<Role>> = vec![None; scope.len()];
    for (list, role) in [
        (&decl.parents, Role::Parent),
        (&decl.children, Role::Child),
        (&decl.undirected, Role::Undirected),
    ] {
        for name in list {
            let v = lookup(name)?;
            let pos = scope
                .iter()
                .position(|&s| s == v)
                .ok_or_else(|| partition_err(name))?;
            if roles[pos].is_some() {
                return Err(partition_err(name));
            }
            roles[pos] = Some(role);
        }
    }
    let roles: Vec<Role> = roles
        .into_iter()
        .map(|r| r.unwrap_or(Role::Undirected))
        .collect();

    let mut dashed = Vec::with_capacity(decl.normalizes.len());
    for name in &decl.normalizes {
        let v = lookup(name)?;
        if scope.contains(&v) {
            return Err(ModelError::DashedOverlap {
                function: decl.name.clone(),
                variable: name.clone(),
            });
        }
        if dashed.contains(&v) {
            return Err(ModelError::DuplicateName(name.clone()));
        }
        dashed.push(v);
    }

    let axes = scope
        .iter()
        .map(|&v| Axis::new(variables[v].name.clone(), variables[v].cardinality))
        .collect();
    let table = FactorTable::new(axes, decl.values).map_err(|e| match e {
        TableError::NegativeOrNonFinite { index, value } => ModelError::NegativeOrNonFiniteValue {
            function: decl.name.clone(),
            index,
            value,
        },
        other => ModelError::TableShapeMismatch {
            function: decl.name.clone(),
            source: other,
        },
    })?;

    Ok(FunctionNode {
        name: decl.name,
        scope,
        roles,
        dashed,
        table,
    })
}

/// Result of the normalization check for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub functions: Vec<String>,
    pub normalizers: Vec<String>,
    pub children: Vec<String>,
    pub conditioning: Vec<String>,
    pub worst_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    pub tolerance: f64,
    pub components: Vec<ComponentReport>,
    /// Variables without any edge; treated as carrying an all-ones factor.
    pub isolated: Vec<String>,
}

impl NormalizationReport {
    pub fn passed(&self) -> bool {
        self.components.iter().all(|c| c.passed)
    }

    pub fn worst_deviation(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.worst_deviation)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for NormalizationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            writeln!(
                f,
                "component children={{{}}} functions={{{}}} normalizers={{{}}} given={{{}}} worst={:e} {}",
                c.children.join(","),
                c.functions.join(","),
                c.normalizers.join(","),
                c.conditioning.join(","),
                c.worst_deviation,
                if c.passed { "ok" } else { "FAIL" }
            )?;
        }
        for v in &self.isolated {
            writeln!(f, "warning: variable `{v}` has no edges and is treated as uniform")?;
        }
        write!(
            f,
            "normalization {} (tol {:e})",
            if self.passed() { "ok" } else { "failed" },
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureStats {
    pub variables: usize,
    pub functions: usize,
    pub parent_edges: usize,
    pub child_edges: usize,
    pub undirected_edges: usize,
    pub dashed_edges: usize,
    /// scope size -> number of functions
    pub scope_sizes: BTreeMap<usize, usize>,
}

impl StructureStats {
    /// Edge count excluding dashed edges.
    pub fn edges(&self) -> usize {
        self.parent_edges + self.child_edges + self.undirected_edges
    }
}
