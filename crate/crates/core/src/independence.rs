//! Conditional independence by path blocking.
//!
//! A path between two variables runs over scope edges only (dashed edges are
//! never traversed). At an interior node the path is blocked when
//!
//! 1. the node is an observed variable, or
//! 2. both path edges point into the node, and neither the node nor any of
//!    its descendants is observed.
//!
//! Descendants follow parent-in, child-out and dashed edges. The search is a
//! breadth-first walk over `(node, arrival class)` states, so it runs in time
//! linear in the number of edges.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::model::{EdgeKind, FactorGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndependenceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` appears in more than one set")]
    OverlappingSets(String),
    #[error("the x and y sets must be nonempty")]
    EmptySet,
    #[error("graph has directed or dashed edges; blankets are defined for undirected graphs only")]
    NotUndirected,
}

/// How a path edge meets a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// directed into the node
    Head,
    /// directed out of the node
    Tail,
    /// undirected
    Lateral,
}

impl EdgeClass {
    fn index(self) -> usize {
        match self {
            EdgeClass::Head => 0,
            EdgeClass::Tail => 1,
            EdgeClass::Lateral => 2,
        }
    }
}

/// Classes of a scope edge as seen from the function and from the variable.
fn classes(kind: EdgeKind) -> (EdgeClass, EdgeClass) {
    match kind {
        EdgeKind::ParentIn => (EdgeClass::Head, EdgeClass::Tail),
        EdgeKind::ChildOut => (EdgeClass::Tail, EdgeClass::Head),
        EdgeKind::Undirected => (EdgeClass::Lateral, EdgeClass::Lateral),
        EdgeKind::Dashed => unreachable!("dashed edges are not path edges"),
    }
}

/// Path-traversable neighbors of a node: (neighbor, class at node, class at neighbor).
pub fn path_neighbors(graph: &FactorGraph, node: NodeId) -> Vec<(NodeId, EdgeClass, EdgeClass)> {
    match node {
        NodeId::Variable(v) => graph
            .incidence(v)
            .iter()
            .filter(|(_, k)| *k != EdgeKind::Dashed)
            .map(|&(f, k)| {
                let (at_fn, at_var) = classes(k);
                (NodeId::Function(f), at_var, at_fn)
            })
            .collect(),
        NodeId::Function(f) => {
            let func = &graph.functions()[f];
            func.scope()
                .iter()
                .zip(func.roles())
                .map(|(&v, role)| {
                    let (at_fn, at_var) = classes(role.edge_kind());
                    (NodeId::Variable(v), at_fn, at_var)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependenceQuery {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub given: Vec<String>,
}

impl IndependenceQuery {
    pub fn new<I, J, K, S>(x: I, y: J, given: K) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = S>,
        K: IntoIterator<Item = S>,
        S: Into<String>,
    {
        IndependenceQuery {
            x: x.into_iter().map(Into::into).collect(),
            y: y.into_iter().map(Into::into).collect(),
            given: given.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Separated,
    /// Not shown independent; carries one unblocked path from x to y.
    NotSeparated { witness: Vec<NodeId> },
}

impl Verdict {
    pub fn is_separated(&self) -> bool {
        matches!(self, Verdict::Separated)
    }
}

fn resolve(graph: &FactorGraph, names: &[String]) -> Result<Vec<usize>, IndependenceError> {
    names
        .iter()
        .map(|n| {
            graph
                .variable_index(n)
                .ok_or_else(|| IndependenceError::UnknownVariable(n.clone()))
        })
        .collect()
}

fn disjoint(graph: &FactorGraph, sets: &[&[usize]]) -> Result<(), IndependenceError> {
    let mut seen = BTreeSet::new();
    for set in sets {
        let own: BTreeSet<usize> = set.iter().copied().collect();
        for v in own {
            if !seen.insert(v) {
                return Err(IndependenceError::OverlappingSets(
                    graph.variables()[v].name.clone(),
                ));
            }
        }
    }
    Ok(())
}

/// Flags nodes that have an observed strict descendant, by one reverse
/// traversal from the observed variables.
fn observed_descendant_flags(graph: &FactorGraph, observed: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let mut var_flag = vec![false; graph.variables().len()];
    let mut fn_flag = vec![false; graph.functions().len()];
    let mut stack: Vec<NodeId> = Vec::new();
    for (v, &o) in observed.iter().enumerate() {
        if o {
            stack.extend(graph.predecessors(NodeId::Variable(v)));
        }
    }
    while let Some(n) = stack.pop() {
        let flag = match n {
            NodeId::Variable(v) => &mut var_flag[v],
            NodeId::Function(f) => &mut fn_flag[f],
        };
        if !*flag {
            *flag = true;
            stack.extend(graph.predecessors(n));
        }
    }
    (var_flag, fn_flag)
}

struct Search<'g> {
    graph: &'g FactorGraph,
    observed: Vec<bool>,
    var_desc: Vec<bool>,
    fn_desc: Vec<bool>,
}

type State = (NodeId, Option<EdgeClass>);

impl<'g> Search<'g> {
    fn new(graph: &'g FactorGraph, observed_vars: &[usize]) -> Self {
        let mut observed = vec![false; graph.variables().len()];
        for &v in observed_vars {
            observed[v] = true;
        }
        let (var_desc, fn_desc) = observed_descendant_flags(graph, &observed);
        Search {
            graph,
            observed,
            var_desc,
            fn_desc,
        }
    }

    /// Whether a path may pass `node` entering with `arrival` and leaving with `departure`.
    fn passes(&self, node: NodeId, arrival: EdgeClass, departure: EdgeClass) -> bool {
        let (observed, has_observed_desc) = match node {
            NodeId::Variable(v) => (self.observed[v], self.var_desc[v]),
            NodeId::Function(f) => (false, self.fn_desc[f]),
        };
        if observed {
            return false;
        }
        let collider = arrival == EdgeClass::Head && departure == EdgeClass::Head;
        !collider || has_observed_desc
    }

    fn slot(&self, node: NodeId, arrival: Option<EdgeClass>) -> usize {
        let base = match node {
            NodeId::Variable(v) => v,
            NodeId::Function(f) => self.graph.variables().len() + f,
        };
        base * 4 + arrival.map_or(3, EdgeClass::index)
    }

    /// BFS from the sources; stops early when `stop` matches a reached node.
    /// Returns the reached nodes and, on early stop, the walk to the match.
    fn run(
        &self,
        sources: &[usize],
        stop: impl Fn(NodeId) -> bool,
    ) -> (BTreeSet<NodeId>, Option<Vec<NodeId>>) {
        let total = (self.graph.variables().len() + self.graph.functions().len()) * 4;
        let mut prev: Vec<Option<Option<State>>> = vec![None; total];
        let mut queue: VecDeque<State> = VecDeque::new();
        let mut reached = BTreeSet::new();
        for &s in sources {
            let state = (NodeId::Variable(s), None);
            let slot = self.slot(state.0, state.1);
            if prev[slot].is_none() {
                prev[slot] = Some(None);
                queue.push_back(state);
                reached.insert(state.0);
            }
        }
        while let Some((node, arrival)) = queue.pop_front() {
            for (next, depart, arrive) in path_neighbors(self.graph, node) {
                if let Some(a) = arrival {
                    if !self.passes(node, a, depart) {
                        continue;
                    }
                }
                let slot = self.slot(next, Some(arrive));
                if prev[slot].is_some() {
                    continue;
                }
                prev[slot] = Some(Some((node, arrival)));
                reached.insert(next);
                if stop(next) {
                    let mut walk = vec![next];
                    let mut cur = (node, arrival);
                    loop {
                        walk.push(cur.0);
                        match prev[self.slot(cur.0, cur.1)].unwrap() {
                            Some(p) => cur = p,
                            None => break,
                        }
                    }
                    walk.reverse();
                    return (reached, Some(walk));
                }
                queue.push_back((next, Some(arrive)));
            }
        }
        (reached, None)
    }
}

/// Decides whether every path between `x` and `y` is blocked given `given`.
pub fn separated(
    graph: &FactorGraph,
    query: &IndependenceQuery,
) -> Result<Verdict, IndependenceError> {
    let x = resolve(graph, &query.x)?;
    let y = resolve(graph, &query.y)?;
    let given = resolve(graph, &query.given)?;
    if x.is_empty() || y.is_empty() {
        return Err(IndependenceError::EmptySet);
    }
    disjoint(graph, &[&x, &y, &given])?;
    let search = Search::new(graph, &given);
    let targets: BTreeSet<NodeId> = y.iter().map(|&v| NodeId::Variable(v)).collect();
    match search.run(&x, |n| targets.contains(&n)).1 {
        Some(witness) => Ok(Verdict::NotSeparated { witness }),
        None => Ok(Verdict::Separated),
    }
}

/// All nodes an unblocked path from `sources` reaches given `observed`.
/// Observed variables are included when a path arrives at them, but paths
/// never continue through them.
pub fn reachable_set(
    graph: &FactorGraph,
    sources: &[String],
    observed: &[String],
) -> Result<BTreeSet<NodeId>, IndependenceError> {
    let s = resolve(graph, sources)?;
    let o = resolve(graph, observed)?;
    disjoint(graph, &[&s, &o])?;
    Ok(Search::new(graph, &o).run(&s, |_| false).0)
}

/// Variables sharing a function with `variable`, in declaration order.
pub fn markov_blanket_undirected(
    graph: &FactorGraph,
    variable: &str,
) -> Result<Vec<String>, IndependenceError> {
    let v = graph
        .variable_index(variable)
        .ok_or_else(|| IndependenceError::UnknownVariable(variable.to_string()))?;
    if graph.has_directed_edges() {
        return Err(IndependenceError::NotUndirected);
    }
    let mut blanket = BTreeSet::new();
    for &(f, _) in graph.incidence(v) {
        blanket.extend(graph.functions()[f].scope().iter().copied());
    }
    blanket.remove(&v);
    Ok(blanket
        .into_iter()
        .map(|u| graph.variables()[u].name.clone())
        .collect())
}

/// Renders a node sequence with edge arrows, e.g. `x <- P_x <- u`.
pub fn render_path(graph: &FactorGraph, path: &[NodeId]) -> String {
    let mut out = String::new();
    for (i, &node) in path.iter().enumerate() {
        if i > 0 {
            let arrow = path_neighbors(graph, path[i - 1])
                .into_iter()
                .find(|(n, _, _)| *n == node)
                .map_or(" ?? ", |(_, at_prev, _)| match at_prev {
                    EdgeClass::Tail => " -> ",
                    EdgeClass::Head => " <- ",
                    EdgeClass::Lateral => " -- ",
                });
            out.push_str(arrow);
        }
        out.push_str(graph.node_name(node));
    }
    out
}
