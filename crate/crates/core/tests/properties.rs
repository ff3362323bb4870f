mod common;

use std::collections::BTreeSet;

use common::*;
use efg::convert::{bn_to_fg, fg_to_mrf, maximal_cliques, mrf_to_fg, MarkovNet};
use efg::inference::{joint_enumerate, numeric_ci, sum_product, Schedule, SumProductOptions};
use efg::model::{EdgeKind, Evidence, FactorGraph, FunctionDecl, ModelError, NodeId, Variable};
use efg::{parse_model, serialize_model, separated, IndependenceQuery, ModelFile, Verdict};
use proptest::prelude::*;
use rand::Rng;

fn all_queries(g: &FactorGraph) -> Vec<(usize, usize, Vec<usize>)> {
    let n = g.variables().len();
    let mut out = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for z in subsets(&rest) {
                    out.push((x, y, z));
                }
            }
        }
    }
    out
}

fn ask(g: &FactorGraph, x: usize, y: usize, z: &[usize]) -> Verdict {
    let name = |v: usize| g.variables()[v].name.clone();
    separated(g, &IndependenceQuery::new([name(x)], [name(y)], z.iter().map(|&v| name(v)))).unwrap()
}

/// Random directed graph over variables and functions, with random dashed
/// edges, checked against acyclicity before use.
fn random_directed(rng: &mut impl Rng, nodes: usize) -> Option<FactorGraph> {
    let nv = rng.gen_range(1..=nodes / 2);
    let nf = nodes - nv;
    let vars: Vec<Variable> = (0..nv).map(|i| Variable::new(format!("v{i}"), 2)).collect();
    let decls: Vec<FunctionDecl> = (0..nf)
        .map(|k| {
            let mut decl = FunctionDecl::new(format!("f{k}"));
            let mut scope = Vec::new();
            for v in 0..nv {
                match rng.gen_range(0..5) {
                    0 => {
                        scope.push(format!("v{v}"));
                        decl.parents.push(format!("v{v}"));
                    }
                    1 => {
                        scope.push(format!("v{v}"));
                        decl.children.push(format!("v{v}"));
                    }
                    2 => decl.normalizes.push(format!("v{v}")),
                    _ => {}
                }
            }
            let size = 1 << scope.len();
            decl.scope(scope).values(vec![1.0; size])
        })
        .collect();
    FactorGraph::new(vars, decls).ok()
}

/// Reachability by repeated squaring of the adjacency relation.
fn closure_by_squaring(g: &FactorGraph) -> Vec<Vec<bool>> {
    let nv = g.variables().len();
    let n = nv + g.functions().len();
    let mut r = vec![vec![false; n]; n];
    for (f, v, kind) in g.edges() {
        match kind {
            EdgeKind::ParentIn => r[v][nv + f] = true,
            EdgeKind::ChildOut | EdgeKind::Dashed => r[nv + f][v] = true,
            EdgeKind::Undirected => {}
        }
    }
    loop {
        let mut next = r.clone();
        for (i, row) in r.iter().enumerate() {
            for (k, _) in row.iter().enumerate().filter(|(_, &hit)| hit) {
                for (j, &reach) in r[k].iter().enumerate() {
                    next[i][j] |= reach;
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn separation_is_symmetric(seed in any::<u64>()) {
        let g = random_normalized_graph(&mut rng(seed), Families::ALL);
        for (x, y, z) in all_queries(&g) {
            prop_assert_eq!(ask(&g, x, y, &z).is_separated(), ask(&g, y, x, &z).is_separated());
        }
    }

    #[test]
    fn walks_agree_with_simple_paths(seed in any::<u64>()) {
        let g = random_normalized_graph(&mut rng(seed), Families::ALL);
        for (x, y, z) in all_queries(&g) {
            prop_assert_eq!(
                ask(&g, x, y, &z).is_separated(),
                !simple_path_connected(&g, x, y, &z),
                "{} vs {} given {:?}", x, y, z
            );
        }
    }

    #[test]
    fn witnesses_are_unblocked(seed in any::<u64>()) {
        let mut r = rng(seed);
        let graphs = [
            random_normalized_graph(&mut r, Families::ALL),
            bn_to_fg(&random_bn(&mut r, 6, 2, 3)).unwrap(),
            mrf_to_fg(&random_mrf(&mut r, 6, 2)).unwrap(),
        ];
        for g in &graphs {
            for (x, y, z) in all_queries(g) {
                if let Verdict::NotSeparated { witness } = ask(g, x, y, &z) {
                    prop_assert!(witness_is_unblocked(g, &witness, &[x], &[y], &z), "{:?}", witness);
                }
            }
        }
    }

    #[test]
    fn set_queries_are_unions_for_bns(seed in any::<u64>()) {
        let mut r = rng(seed);
        let bn = random_bn(&mut r, 6, 2, 3);
        let g = bn_to_fg(&bn).unwrap();
        let n = g.variables().len();
        let all: Vec<usize> = (0..n).collect();
        for xs in subsets(&all).into_iter().filter(|s| !s.is_empty()).take(8) {
            let rest: Vec<usize> = all.iter().copied().filter(|v| !xs.contains(v)).collect();
            for ys in subsets(&rest).into_iter().filter(|s| !s.is_empty()).take(4) {
                let zs: Vec<usize> = rest.iter().copied().filter(|v| !ys.contains(v) && r.gen_bool(0.5)).collect();
                let name = |v: &usize| g.variables()[*v].name.clone();
                let q = IndependenceQuery::new(xs.iter().map(name), ys.iter().map(name), zs.iter().map(name));
                let joint = separated(&g, &q).unwrap().is_separated();
                let each = xs.iter().all(|&x| ys.iter().all(|&y| ask(&g, x, y, &zs).is_separated()));
                prop_assert_eq!(joint, each);
            }
        }
    }

    #[test]
    fn numeric_ci_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_normalized_graph(&mut r, Families::ALL);
        let names: Vec<String> = g.variables().iter().map(|v| v.name.clone()).collect();
        for (x, y, z) in all_queries(&g).into_iter().take(20) {
            let zs: Vec<String> = z.iter().map(|&v| names[v].clone()).collect();
            let a = numeric_ci(&g, &[names[x].clone()], &[names[y].clone()], &zs, 1e-9).unwrap();
            let b = numeric_ci(&g, &[names[y].clone()], &[names[x].clone()], &zs, 1e-9).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn directed_models_are_self_normalizing(seed in any::<u64>()) {
        let g = random_normalized_graph(&mut rng(seed), Families { undirected_roots: false, multi_child: true });
        prop_assert!(g.check_local_normalization(1e-9).passed());
        let z = efg::tables::normalization_constant(&g).unwrap();
        prop_assert!((z - 1.0).abs() <= 1e-9, "g0 = {}", z);
    }

    #[test]
    fn bn_graphs_pass_normalization_tightly(seed in any::<u64>()) {
        let g = bn_to_fg(&random_bn(&mut rng(seed), 8, 3, 3)).unwrap();
        prop_assert!(g.check_local_normalization(1e-12).passed());
    }

    #[test]
    fn joints_have_unit_mass(seed in any::<u64>()) {
        let mut r = rng(seed);
        for g in [random_normalized_graph(&mut r, Families::ALL), random_tree(&mut r, 8, 3)] {
            let j = joint_enumerate(&g, &Evidence::new()).unwrap();
            prop_assert!((j.table().total_mass() - 1.0).abs() <= 1e-9);
            prop_assert!(max_abs_diff(j.table().values(), &fg_joint_oracle(&g)) <= 1e-12);
        }
    }

    #[test]
    fn maximal_cliques_match_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=10);
        let p: f64 = r.gen_range(0.1..0.9);
        let vars: Vec<Variable> = (0..n).map(|i| Variable::new(format!("w{i}"), 2)).collect();
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in a + 1..n {
                if r.gen_bool(p) {
                    edges.insert((a, b));
                }
            }
        }
        let named: Vec<(String, String)> = edges.iter().map(|&(a, b)| (format!("w{a}"), format!("w{b}"))).collect();
        let mrf = MarkovNet::new(vars.clone(), &named, Vec::new()).unwrap();
        let mut expected: Vec<Vec<String>> = brute_force_cliques(n, &edges)
            .into_iter()
            .map(|c| {
                let mut names: Vec<String> = c.iter().map(|&v| vars[v].name.clone()).collect();
                names.sort();
                names
            })
            .collect();
        expected.sort();
        prop_assert_eq!(maximal_cliques(&mrf), expected);
    }

    #[test]
    fn descendants_match_transitive_closure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nodes = r.gen_range(2..=20);
        let Some(g) = random_directed(&mut r, nodes) else { return Ok(()) };
        let closure = closure_by_squaring(&g);
        let nv = g.variables().len();
        let index = |n: NodeId| match n {
            NodeId::Variable(v) => v,
            NodeId::Function(f) => nv + f,
        };
        for i in 0..closure.len() {
            let node = if i < nv { NodeId::Variable(i) } else { NodeId::Function(i - nv) };
            let got: BTreeSet<usize> = g.descendants(node).into_iter().map(index).collect();
            let want: BTreeSet<usize> = (0..closure.len()).filter(|&j| closure[i][j]).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn descendants_grow_with_edges(seed in any::<u64>()) {
        let mut r = rng(seed);
        let bn = random_bn(&mut r, 6, 2, 2);
        let g = bn_to_fg(&bn).unwrap();
        // adding a root variable with a new function pointing into every sink
        let mut vars = g.variables().to_vec();
        vars.push(Variable::new("extra", 2));
        let mut decls: Vec<FunctionDecl> = g.functions().iter().map(|f| {
            let name = |v: usize| g.variables()[v].name.clone();
            FunctionDecl::new(f.name())
                .scope(f.scope().iter().map(|&v| name(v)))
                .parents(f.parents().map(name))
                .children(f.children().map(name))
                .values(f.table().values().to_vec())
        }).collect();
        decls.push(FunctionDecl::new("hook").scope([g.variables()[0].name.clone(), "extra".into()])
            .parents([g.variables()[0].name.clone()]).children(["extra"]).values(vec![0.5; 4]));
        let bigger = FactorGraph::new(vars, decls).unwrap();
        for v in 0..g.variables().len() {
            let before: BTreeSet<String> = g.descendants(NodeId::Variable(v)).into_iter().map(|n| g.node_name(n).to_string()).collect();
            let after: BTreeSet<String> = bigger.descendants(NodeId::Variable(v)).into_iter().map(|n| bigger.node_name(n).to_string()).collect();
            prop_assert!(before.is_subset(&after));
        }
    }

    #[test]
    fn tree_sum_product_matches_enumeration(seed in any::<u64>()) {
        let g = random_tree(&mut rng(seed), 8, 3);
        let exact = joint_enumerate(&g, &Evidence::new()).unwrap();
        let tree = sum_product(&g, &Evidence::new(), &SumProductOptions::default()).unwrap();
        let loopy = sum_product(&g, &Evidence::new(), &SumProductOptions {
            schedule: Schedule::Loopy,
            max_iters: 500,
            damping: 0.5,
        }).unwrap();
        prop_assert!(loopy.converged);
        for v in g.variables() {
            let m = exact.marginal(&v.name).unwrap();
            prop_assert!(max_abs_diff(tree.get(&v.name).unwrap(), &m) <= 1e-10);
            prop_assert!(max_abs_diff(loopy.get(&v.name).unwrap(), &m) <= 1e-8);
        }
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let models = [
            ModelFile::FactorGraph(random_normalized_graph(&mut r, Families::ALL)),
            ModelFile::FactorGraph(random_tree(&mut r, 6, 4)),
            ModelFile::BayesNet(random_bn(&mut r, 6, 3, 3)),
            ModelFile::MarkovNet(random_mrf(&mut r, 6, 3)),
        ];
        for m in models {
            let text = serialize_model(&m);
            let back = parse_model(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(serialize_model(&back), text);
        }
    }

    #[test]
    fn fg_to_mrf_keeps_the_joint(seed in any::<u64>()) {
        let g = random_normalized_graph(&mut rng(seed), Families::ALL);
        let mrf = fg_to_mrf(&g).unwrap();
        prop_assert!(max_abs_diff(&mrf_joint_oracle(&mrf), &fg_joint_oracle(&g)) <= 1e-12);
    }

    #[test]
    fn mangled_text_never_panics(seed in any::<u64>(), cut in 0usize..2000, junk in "[ a-z0-9.#|\n-]{0,12}") {
        let mut r = rng(seed);
        let files = ["mixture_of_experts.fgx", "chain_component.fgx", "five_node.bn", "five_node.mrf"];
        let text = golden(files[r.gen_range(0..files.len())]);
        let at = text.char_indices().map(|(i, _)| i).nth(cut % text.len()).unwrap_or(0);
        let mangled = format!("{}{}{}", &text[..at], junk, &text[at..]);
        let _ = parse_model(&mangled);
    }
}

#[test]
fn invalid_graphs_are_rejected_with_the_matching_error() {
    let v = |n: &str| Variable::new(n, 2);
    let cases: Vec<(Vec<Variable>, Vec<FunctionDecl>, ModelError)> = vec![
        (
            vec![v("x"), v("x")],
            vec![],
            ModelError::DuplicateName("x".into()),
        ),
        (
            vec![v("x")],
            vec![FunctionDecl::new("f").scope(["y"]).values(vec![1.0, 1.0])],
            ModelError::UnknownVariable { function: "f".into(), variable: "y".into() },
        ),
        (
            vec![v("x")],
            vec![FunctionDecl::new("f").scope(["x"]).parents(["x"]).children(["x"]).values(vec![1.0, 1.0])],
            ModelError::PartitionViolation { function: "f".into(), variable: "x".into() },
        ),
        (
            vec![v("x")],
            vec![FunctionDecl::new("f").scope(["x"]).normalizes(["x"]).values(vec![1.0, 1.0])],
            ModelError::DashedOverlap { function: "f".into(), variable: "x".into() },
        ),
        (
            vec![v("x"), v("y")],
            vec![
                FunctionDecl::new("f").scope(["x", "y"]).parents(["x"]).children(["y"]).values(vec![1.0; 4]),
                FunctionDecl::new("g").scope(["y", "x"]).parents(["y"]).children(["x"]).values(vec![1.0; 4]),
            ],
            ModelError::DirectedCycle(String::new()),
        ),
    ];
    for (vars, decls, expected) in cases {
        let err = FactorGraph::new(vars, decls).unwrap_err();
        match (&err, &expected) {
            (ModelError::DirectedCycle(_), ModelError::DirectedCycle(_)) => {}
            _ => assert_eq!(err, expected),
        }
    }
}
