//! Random model generators and brute-force oracles shared by the integration
//! tests. The oracles deliberately avoid the library's table algebra and graph
//! search: they index raw value arrays and walk adjacency lists directly.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use efg::convert::{BayesNet, CpdDecl, MarkovNet};
use efg::model::{EdgeKind, FactorGraph, FunctionDecl, NodeId, Variable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn golden(name: &str) -> String {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn golden_graph(name: &str) -> FactorGraph {
    efg::parse_model(&golden(name))
        .unwrap()
        .to_factor_graph()
        .unwrap()
}

pub fn names(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// All subsets of `items`, smallest first.
pub fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, t)| t.clone())
                .collect()
        })
        .collect();
    out.sort_by_key(Vec::len);
    out
}

fn positive(rng: &mut (impl Rng + ?Sized), n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

/// Random rows, each normalized over the last `inner` cells.
fn conditional(rng: &mut (impl Rng + ?Sized), rows: usize, inner: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * inner);
    for _ in 0..rows {
        let row = positive(rng, inner);
        let total: f64 = row.iter().sum();
        out.extend(row.iter().map(|x| x / total));
    }
    out
}

// ---------------------------------------------------------------- oracles

/// Row-major flat index of `states` (last axis fastest).
pub fn flat_index(cards: &[usize], states: &[usize]) -> usize {
    cards.iter().zip(states).fold(0, |acc, (c, s)| acc * c + s)
}

/// Every joint assignment of `cards`, in row-major order.
pub fn assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut k| {
            let mut s = vec![0; cards.len()];
            for i in (0..cards.len()).rev() {
                s[i] = k % cards[i];
                k /= cards[i];
            }
            s
        })
        .collect()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// Joint over all variables in declaration order, by direct evaluation of
/// every function at every assignment.
pub fn fg_joint_oracle(graph: &FactorGraph) -> Vec<f64> {
    let cards: Vec<usize> = graph.variables().iter().map(|v| v.cardinality).collect();
    let joint = assignments(&cards)
        .into_iter()
        .map(|a| {
            graph
                .functions()
                .iter()
                .map(|f| {
                    let sub: Vec<usize> = f.scope().iter().map(|&v| a[v]).collect();
                    let sc: Vec<usize> = f.scope().iter().map(|&v| cards[v]).collect();
                    f.table().values()[flat_index(&sc, &sub)]
                })
                .product::<f64>()
        })
        .collect();
    normalize(joint)
}

pub fn bn_joint_oracle(bn: &BayesNet) -> Vec<f64> {
    let cards: Vec<usize> = bn.variables().iter().map(|v| v.cardinality).collect();
    assignments(&cards)
        .into_iter()
        .map(|a| {
            bn.cpds()
                .iter()
                .enumerate()
                .map(|(v, cpd)| {
                    let mut idx: Vec<usize> = cpd.parents().iter().map(|&p| a[p]).collect();
                    idx.push(a[v]);
                    let mut sc: Vec<usize> = cpd.parents().iter().map(|&p| cards[p]).collect();
                    sc.push(cards[v]);
                    cpd.table().values()[flat_index(&sc, &idx)]
                })
                .product::<f64>()
        })
        .collect()
}

pub fn mrf_joint_oracle(mrf: &MarkovNet) -> Vec<f64> {
    let cards: Vec<usize> = mrf.variables().iter().map(|v| v.cardinality).collect();
    let joint = assignments(&cards)
        .into_iter()
        .map(|a| {
            mrf.potentials()
                .iter()
                .map(|p| {
                    let sub: Vec<usize> = p.scope().iter().map(|&v| a[v]).collect();
                    let sc: Vec<usize> = p.scope().iter().map(|&v| cards[v]).collect();
                    p.table().values()[flat_index(&sc, &sub)]
                })
                .product::<f64>()
        })
        .collect();
    normalize(joint)
}

/// Joint of `graph` reordered to the variable order of `names`.
pub fn reorder(joint: &[f64], from: &[Variable], to: &[Variable]) -> Vec<f64> {
    let pos: Vec<usize> = to
        .iter()
        .map(|v| from.iter().position(|u| u.name == v.name).unwrap())
        .collect();
    let from_cards: Vec<usize> = from.iter().map(|v| v.cardinality).collect();
    let to_cards: Vec<usize> = to.iter().map(|v| v.cardinality).collect();
    assignments(&to_cards)
        .into_iter()
        .map(|a| {
            let mut src = vec![0; from.len()];
            for (i, &p) in pos.iter().enumerate() {
                src[p] = a[i];
            }
            joint[flat_index(&from_cards, &src)]
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Maximal cliques by testing every vertex subset.
pub fn brute_force_cliques(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let adjacent = |a: usize, b: usize| edges.contains(&(a.min(b), a.max(b)));
    let is_clique = |s: &[usize]| {
        s.iter()
            .enumerate()
            .all(|(i, &a)| s[i + 1..].iter().all(|&b| adjacent(a, b)))
    };
    let all: Vec<usize> = (0..n).collect();
    subsets(&all)
        .into_iter()
        .filter(|s| !s.is_empty() && is_clique(s))
        .filter(|s| {
            (0..n)
                .filter(|v| !s.contains(v))
                .all(|v| !s.iter().all(|&u| adjacent(u, v)))
        })
        .collect()
}

/// Textbook d-separation: x and y are separated by z iff they are
/// disconnected in the moralized ancestral graph of x, y, z after removing z.
pub fn d_separated(parents: &[Vec<usize>], x: usize, y: usize, z: &[usize]) -> bool {
    let n = parents.len();
    let mut relevant = vec![false; n];
    let mut stack: Vec<usize> = z.iter().copied().chain([x, y]).collect();
    while let Some(v) = stack.pop() {
        if !relevant[v] {
            relevant[v] = true;
            stack.extend(&parents[v]);
        }
    }
    let mut adj = vec![BTreeSet::new(); n];
    for v in (0..n).filter(|&v| relevant[v]) {
        for (i, &p) in parents[v].iter().enumerate() {
            adj[v].insert(p);
            adj[p].insert(v);
            for &q in &parents[v][i + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
    }
    !connected_avoiding(&adj, x, y, z)
}

/// Whether `x` reaches `y` without entering `removed`.
pub fn connected_avoiding(adj: &[BTreeSet<usize>], x: usize, y: usize, removed: &[usize]) -> bool {
    let mut seen = vec![false; adj.len()];
    for &r in removed {
        seen[r] = true;
    }
    seen[x] = true;
    let mut queue = VecDeque::from([x]);
    while let Some(v) = queue.pop_front() {
        if v == y {
            return true;
        }
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    false
}

pub fn mrf_adjacency(mrf: &MarkovNet) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); mrf.variables().len()];
    for &(a, b) in mrf.edges() {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    adj
}

// ----------------------------------------------- path rule, independently

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Class {
    Head,
    Tail,
    Lateral,
}

/// Non-dashed neighbors of a node with the edge class at the node itself.
pub fn neighbors(graph: &FactorGraph, node: NodeId) -> Vec<(NodeId, Class)> {
    graph
        .edges()
        .filter_map(|(f, v, kind)| {
            let (at_f, at_v) = match kind {
                EdgeKind::ParentIn => (Class::Head, Class::Tail),
                EdgeKind::ChildOut => (Class::Tail, Class::Head),
                EdgeKind::Undirected => (Class::Lateral, Class::Lateral),
                EdgeKind::Dashed => return None,
            };
            match node {
                NodeId::Function(k) if k == f => Some((NodeId::Variable(v), at_f)),
                NodeId::Variable(u) if u == v => Some((NodeId::Function(f), at_v)),
                _ => None,
            }
        })
        .collect()
}

/// Nodes with an observed variable among themselves or their descendants,
/// following parent-in, child-out and dashed edges downstream.
pub fn opened_by_observation(graph: &FactorGraph, observed: &[usize]) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<NodeId> = observed.iter().map(|&v| NodeId::Variable(v)).collect();
    while let Some(n) = stack.pop() {
        if !out.insert(n) {
            continue;
        }
        for (f, v, kind) in graph.edges() {
            match (kind, n) {
                (EdgeKind::ParentIn, NodeId::Function(k)) if k == f => {
                    stack.push(NodeId::Variable(v))
                }
                (EdgeKind::ChildOut | EdgeKind::Dashed, NodeId::Variable(u)) if u == v => {
                    stack.push(NodeId::Function(f))
                }
                _ => {}
            }
        }
    }
    out
}

fn passes(
    node: NodeId,
    a: Class,
    b: Class,
    observed: &[usize],
    opened: &BTreeSet<NodeId>,
) -> bool {
    if let NodeId::Variable(v) = node {
        if observed.contains(&v) {
            return false;
        }
    }
    !(a == Class::Head && b == Class::Head) || opened.contains(&node)
}

/// Simple-path semantics: is there a path without repeated nodes from `x` to
/// `y` whose interior nodes all pass?
pub fn simple_path_connected(graph: &FactorGraph, x: usize, y: usize, observed: &[usize]) -> bool {
    let opened = opened_by_observation(graph, observed);
    fn dfs(
        graph: &FactorGraph,
        node: NodeId,
        arrived: Option<Class>,
        target: NodeId,
        visited: &mut Vec<NodeId>,
        observed: &[usize],
        opened: &BTreeSet<NodeId>,
    ) -> bool {
        if node == target {
            return true;
        }
        for (next, class) in neighbors(graph, node) {
            if visited.contains(&next) {
                continue;
            }
            if let Some(a) = arrived {
                if !passes(node, a, class, observed, opened) {
                    continue;
                }
            }
            let back = neighbors(graph, next)
                .into_iter()
                .find(|(n, _)| *n == node)
                .unwrap()
                .1;
            visited.push(next);
            if dfs(graph, next, Some(back), target, visited, observed, opened) {
                return true;
            }
            visited.pop();
        }
        false
    }
    let mut visited = vec![NodeId::Variable(x)];
    dfs(
        graph,
        NodeId::Variable(x),
        None,
        NodeId::Variable(y),
        &mut visited,
        observed,
        &opened,
    )
}

/// Checks a witness walk: endpoints, adjacency over non-dashed edges, and the
/// blocking rules at every interior node.
pub fn witness_is_unblocked(
    graph: &FactorGraph,
    witness: &[NodeId],
    xs: &[usize],
    ys: &[usize],
    observed: &[usize],
) -> bool {
    let opened = opened_by_observation(graph, observed);
    let is_var_in = |n: Option<&NodeId>, set: &[usize]| matches!(n, Some(NodeId::Variable(v)) if set.contains(v));
    if !is_var_in(witness.first(), xs) || !is_var_in(witness.last(), ys) {
        return false;
    }
    let class = |from: NodeId, to: NodeId| {
        neighbors(graph, from)
            .into_iter()
            .find(|(n, _)| *n == to)
            .map(|(_, c)| c)
    };
    for w in witness.windows(2) {
        if class(w[0], w[1]).is_none() {
            return false;
        }
    }
    witness.windows(3).all(|w| {
        passes(
            w[1],
            class(w[1], w[0]).unwrap(),
            class(w[1], w[2]).unwrap(),
            observed,
            &opened,
        )
    })
}

// ------------------------------------------------------------- generators

/// Random BN with up to `max_vars` variables. Declaration order is shuffled
/// relative to the topological order.
pub fn random_bn(rng: &mut impl Rng, max_vars: usize, max_card: usize, max_parents: usize) -> BayesNet {
    let n = rng.gen_range(1..=max_vars);
    let density: f64 = rng.gen_range(0.2..0.8);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_card)).collect();
    let mut decls = Vec::new();
    for v in 0..n {
        let mut parents: Vec<usize> = (0..v).filter(|_| rng.gen_bool(density)).collect();
        parents.shuffle(rng);
        parents.truncate(max_parents);
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        decls.push(CpdDecl::new(
            format!("x{v}"),
            parents.iter().map(|p| format!("x{p}")),
            conditional(rng, rows, cards[v]),
        ));
    }
    let mut vars: Vec<Variable> = (0..n).map(|v| Variable::new(format!("x{v}"), cards[v])).collect();
    vars.shuffle(rng);
    decls.shuffle(rng);
    BayesNet::new(vars, decls).unwrap()
}

/// Random MRF with positive potentials on every maximal clique.
pub fn random_mrf(rng: &mut impl Rng, max_vars: usize, max_card: usize) -> MarkovNet {
    let n = rng.gen_range(1..=max_vars);
    let density: f64 = rng.gen_range(0.1..0.9);
    let vars: Vec<Variable> = (0..n)
        .map(|v| Variable::new(format!("m{v}"), rng.gen_range(2..=max_card)))
        .collect();
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(density) {
                edges.insert((a, b));
            }
        }
    }
    let mut potentials = Vec::new();
    for mut clique in brute_force_cliques(n, &edges) {
        clique.shuffle(rng);
        let size: usize = clique.iter().map(|&v| vars[v].cardinality).product();
        let scope = clique.iter().map(|&v| vars[v].name.clone()).collect();
        potentials.push((scope, positive(rng, size)));
    }
    let mut edge_names: Vec<(String, String)> = edges
        .iter()
        .map(|&(a, b)| (vars[a].name.clone(), vars[b].name.clone()))
        .collect();
    edge_names.shuffle(rng);
    potentials.shuffle(rng);
    MarkovNet::new(vars, &edge_names, potentials).unwrap()
}

fn pick_subset(rng: &mut impl Rng, pool: &[usize], max: usize) -> Vec<usize> {
    let k = rng.gen_range(0..=max.min(pool.len()));
    let mut out: Vec<usize> = pool.choose_multiple(rng, k).copied().collect();
    out.sort_unstable();
    out
}

/// Which local structures a random normalized graph may use.
#[derive(Clone, Copy, Debug)]
pub struct Families {
    pub undirected_roots: bool,
    pub multi_child: bool,
}

impl Families {
    pub const ALL: Families = Families {
        undirected_roots: true,
        multi_child: true,
    };
    /// Everything `fg_to_bn` accepts.
    pub const BN_CONVERTIBLE: Families = Families {
        undirected_roots: false,
        multi_child: false,
    };
}

/// Random normalized extended factor graph over at most five variables with
/// cardinality at most three. Local structures: single CPDs, factorized
/// conditionals with a dashed normalizer, mixture-of-experts switches,
/// functions with several children, and undirected potentials among root
/// variables.
pub fn random_normalized_graph(rng: &mut impl Rng, families: Families) -> FactorGraph {
    let n = rng.gen_range(2..=5);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
    let name = |v: usize| format!("v{v}");
    let vars: Vec<Variable> = (0..n).map(|v| Variable::new(name(v), cards[v])).collect();
    let size = |scope: &[usize]| scope.iter().map(|&v| cards[v]).product::<usize>();
    let names_of = |scope: &[usize]| scope.iter().map(|&v| name(v)).collect::<Vec<_>>();
    let mut decls: Vec<FunctionDecl> = Vec::new();
    let mut fresh = 0;
    let mut fname = |kind: &str| {
        fresh += 1;
        format!("{kind}{fresh}")
    };

    let mut start = 0;
    if families.undirected_roots && rng.gen_bool(0.4) {
        let r = rng.gen_range(2..=n.min(3));
        let mut covered = vec![false; r];
        for a in 0..r {
            for b in a + 1..r {
                if rng.gen_bool(0.7) {
                    let scope = [a, b];
                    covered[a] = true;
                    covered[b] = true;
                    decls.push(
                        FunctionDecl::new(fname("phi"))
                            .scope(names_of(&scope))
                            .values(positive(rng, size(&scope))),
                    );
                }
            }
        }
        for v in (0..r).filter(|&v| !covered[v]) {
            decls.push(
                FunctionDecl::new(fname("phi"))
                    .scope([name(v)])
                    .values(positive(rng, cards[v])),
            );
        }
        start = r;
    }

    let mut v = start;
    while v < n {
        let earlier: Vec<usize> = (0..v).collect();
        match rng.gen_range(0..4) {
            // factorized conditional with a dashed normalizer
            1 => {
                let m = rng.gen_range(2..=3);
                let parts: Vec<Vec<usize>> = (0..m).map(|_| pick_subset(rng, &earlier, 2)).collect();
                let union: Vec<usize> = parts
                    .iter()
                    .flatten()
                    .copied()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let tables: Vec<Vec<f64>> = parts
                    .iter()
                    .map(|p| {
                        let mut s = p.clone();
                        s.push(v);
                        positive(rng, size(&s))
                    })
                    .collect();
                let mut norm = Vec::new();
                for a in assignments(&union.iter().map(|&u| cards[u]).collect::<Vec<_>>()) {
                    let mut total = 0.0;
                    for z in 0..cards[v] {
                        let mut prod = 1.0;
                        for (p, t) in parts.iter().zip(&tables) {
                            let mut idx: Vec<usize> =
                                p.iter().map(|u| a[union.iter().position(|w| w == u).unwrap()]).collect();
                            idx.push(z);
                            let mut sc: Vec<usize> = p.iter().map(|&u| cards[u]).collect();
                            sc.push(cards[v]);
                            prod *= t[flat_index(&sc, &idx)];
                        }
                        total += prod;
                    }
                    norm.push(1.0 / total);
                }
                for (p, t) in parts.iter().zip(tables) {
                    let mut s = p.clone();
                    s.push(v);
                    decls.push(
                        FunctionDecl::new(fname("f"))
                            .scope(names_of(&s))
                            .parents(names_of(p))
                            .children([name(v)])
                            .values(t),
                    );
                }
                decls.push(
                    FunctionDecl::new(fname("n"))
                        .scope(names_of(&union))
                        .parents(names_of(&union))
                        .normalizes([name(v)])
                        .values(norm),
                );
                v += 1;
            }
            // mixture of experts selected by a switch variable
            2 if !earlier.is_empty() => {
                let s = *earlier.choose(rng).unwrap();
                let others: Vec<usize> = earlier.iter().copied().filter(|&u| u != s).collect();
                for j in 0..cards[s] {
                    let c = pick_subset(rng, &others, 1);
                    let mut scope = vec![s];
                    scope.extend(&c);
                    scope.push(v);
                    let rows = size(&c);
                    let cpd = conditional(rng, rows, cards[v]);
                    let values: Vec<f64> = assignments(&scope.iter().map(|&u| cards[u]).collect::<Vec<_>>())
                        .into_iter()
                        .map(|a| {
                            if a[0] == j {
                                cpd[a[1..].iter().zip(&scope[1..]).fold(0, |acc, (x, &u)| acc * cards[u] + x)]
                            } else {
                                1.0
                            }
                        })
                        .collect();
                    let mut parents = vec![s];
                    parents.extend(&c);
                    decls.push(
                        FunctionDecl::new(fname("expert"))
                            .scope(names_of(&scope))
                            .parents(names_of(&parents))
                            .children([name(v)])
                            .values(values),
                    );
                }
                v += 1;
            }
            // one function with two children
            3 if families.multi_child && v + 1 < n => {
                let p = pick_subset(rng, &earlier, 2);
                let mut scope = p.clone();
                scope.extend([v, v + 1]);
                decls.push(
                    FunctionDecl::new(fname("pair"))
                        .scope(names_of(&scope))
                        .parents(names_of(&p))
                        .children([name(v), name(v + 1)])
                        .values(conditional(rng, size(&p), cards[v] * cards[v + 1])),
                );
                v += 2;
            }
            // plain conditional
            _ => {
                let p = pick_subset(rng, &earlier, 2);
                let mut scope = p.clone();
                scope.push(v);
                decls.push(
                    FunctionDecl::new(fname("cpd"))
                        .scope(names_of(&scope))
                        .parents(names_of(&p))
                        .children([name(v)])
                        .values(conditional(rng, size(&p), cards[v])),
                );
                v += 1;
            }
        }
    }
    FactorGraph::new(vars, decls).unwrap()
}

/// Random factor graph whose skeleton is a forest. Edge roles are random;
/// they cannot form a directed cycle on an acyclic skeleton.
pub fn random_tree(rng: &mut impl Rng, max_vars: usize, max_card: usize) -> FactorGraph {
    let target = rng.gen_range(1..=max_vars);
    let mut vars = vec![Variable::new("t0", rng.gen_range(2..=max_card))];
    let mut decls = Vec::new();
    let mut k = 0;
    let mut add = |scope: Vec<usize>, vars: &[Variable], rng: &mut dyn rand::RngCore| {
        k += 1;
        let mut decl = FunctionDecl::new(format!("g{k}")).scope(scope.iter().map(|&v| vars[v].name.clone()));
        for &v in &scope {
            let n = vars[v].name.clone();
            decl = match rng.gen_range(0..3) {
                0 => decl.parents([n]),
                1 => decl.children([n]),
                _ => decl.undirected([n]),
            };
        }
        let size = scope.iter().map(|&v| vars[v].cardinality).product();
        decl.values(positive(rng, size))
    };
    while vars.len() < target {
        if rng.gen_bool(0.1) {
            // a new tree in the forest
            vars.push(Variable::new(format!("t{}", vars.len()), rng.gen_range(2..=max_card)));
            continue;
        }
        let anchor = rng.gen_range(0..vars.len());
        let new = rng.gen_range(1..=2).min(target - vars.len());
        let mut scope = vec![anchor];
        for _ in 0..new {
            scope.push(vars.len());
            vars.push(Variable::new(format!("t{}", vars.len()), rng.gen_range(2..=max_card)));
        }
        scope.shuffle(rng);
        decls.push(add(scope, &vars, rng));
    }
    for v in 0..vars.len() {
        if rng.gen_bool(0.3) {
            decls.push(add(vec![v], &vars, rng));
        }
    }
    FactorGraph::new(vars, decls).unwrap()
}

pub fn bn_parents(bn: &BayesNet) -> Vec<Vec<usize>> {
    (0..bn.variables().len()).map(|v| bn.parents_of(v).to_vec()).collect()
}

/// The mixture-of-experts model with random conditionals: z follows
/// `P(z | c1)` when `m = 1` and `P(z | c0)` when `m = 0`.
pub fn mixture_of_experts(rng: &mut impl Rng) -> FactorGraph {
    let vars = ["c0", "c1", "m", "z"].map(|n| Variable::new(n, 2)).to_vec();
    let z_c0 = conditional(rng, 2, 2);
    let z_c1 = conditional(rng, 2, 2);
    // expert j is active when m = j
    let powered = |cpd: &[f64], active: usize| -> Vec<f64> {
        assignments(&[2, 2, 2])
            .into_iter()
            .map(|a| if a[0] == active { cpd[a[1] * 2 + a[2]] } else { 1.0 })
            .collect()
    };
    let decls = vec![
        FunctionDecl::new("p_c0").scope(["c0"]).children(["c0"]).values(conditional(rng, 1, 2)),
        FunctionDecl::new("p_c1").scope(["c1"]).children(["c1"]).values(conditional(rng, 1, 2)),
        FunctionDecl::new("p_m").scope(["m"]).children(["m"]).values(conditional(rng, 1, 2)),
        FunctionDecl::new("expert0")
            .scope(["m", "c0", "z"])
            .parents(["m", "c0"])
            .children(["z"])
            .values(powered(&z_c0, 0)),
        FunctionDecl::new("expert1")
            .scope(["m", "c1", "z"])
            .parents(["m", "c1"])
            .children(["z"])
            .values(powered(&z_c1, 1)),
    ];
    FactorGraph::new(vars, decls).unwrap()
}
