//! Command dispatch for the `efg` binary.
//!
//! Exit codes: 0 on success, 1 when the input is well formed but invalid or a
//! query fails on semantic grounds (including a failed `check`), 2 for parse
//! and usage errors.

use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::convert::{fg_to_bn, fg_to_mrf};
use crate::format::{parse_model, serialize_model, ModelFile, ParseError};
use crate::independence::{markov_blanket_undirected, render_path, separated, IndependenceQuery};
use crate::inference::{joint_enumerate, marginal, sum_product, Method, Schedule, SumProductOptions};
use crate::model::{Evidence, FactorGraph, DEFAULT_NORMALIZATION_TOL};

pub const JSON_SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "efg", version, about = "Extended factor graph toolkit")]
struct Cli {
    /// Emit a JSON object instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a model and report local normalization per component.
    Check {
        /// Model file, or `-` for stdin.
        #[arg(default_value = "-")]
        file: String,
        #[arg(long, default_value_t = DEFAULT_NORMALIZATION_TOL)]
        tol: f64,
    },
    /// Count variables, functions and edges.
    Stats {
        #[arg(default_value = "-")]
        file: String,
    },
    /// Graphical independence test of X and Y given Z.
    Indep {
        file: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Convert between factor graphs, Bayesian networks and Markov networks.
    Convert {
        file: String,
        #[arg(long, value_enum)]
        to: Target,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Print the normalized joint distribution.
    Joint {
        file: String,
        /// Comma-separated `VAR=STATE` assignments.
        #[arg(long, value_delimiter = ',', value_parser = parse_assignment)]
        evidence: Vec<(String, usize)>,
    },
    /// Print the marginal distribution of one variable.
    Marginal {
        file: String,
        var: String,
        #[arg(long, value_delimiter = ',', value_parser = parse_assignment)]
        evidence: Vec<(String, usize)>,
        #[arg(long, value_enum, default_value_t = MethodArg::Enum)]
        method: MethodArg,
        /// Use the damped flooding schedule (sum-product only).
        #[arg(long)]
        loopy: bool,
        #[arg(long, default_value_t = 200, requires = "loopy")]
        max_iters: usize,
        #[arg(long, default_value_t = 0.5, requires = "loopy", value_parser = parse_damping)]
        damping: f64,
    },
    /// Markov blanket of a variable in an undirected model.
    Blanket { file: String, var: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    #[value(alias = "fgx")]
    Fg,
    Bn,
    Mrf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Enum,
    Sumproduct,
}

fn parse_assignment(s: &str) -> Result<(String, usize), String> {
    let (name, state) = s
        .split_once('=')
        .ok_or_else(|| format!("expected VAR=STATE, got `{s}`"))?;
    let state = state
        .trim()
        .parse()
        .map_err(|_| format!("invalid state `{state}`"))?;
    Ok((name.trim().to_string(), state))
}

fn parse_damping(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(d) if (0.0..1.0).contains(&d) => Ok(d),
        _ => Err(format!("damping must be in [0, 1), got `{s}`")),
    }
}

/// A command failure, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: e.to_string(),
        }
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure {
            code: if e.is_validation() { EXIT_INVALID } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    json: bool,
}

impl Io<'_> {
    fn load(&mut self, file: &str) -> Result<ModelFile, Failure> {
        let mut text = String::new();
        if file == "-" {
            self.stdin
                .read_to_string(&mut text)
                .map_err(|e| Failure::usage(format!("stdin: {e}")))?;
        } else {
            text = std::fs::read_to_string(file)
                .map_err(|e| Failure::usage(format!("{file}: {e}")))?;
        }
        Ok(parse_model(&text)?)
    }

    fn load_graph(&mut self, file: &str) -> Result<(ModelFile, FactorGraph), Failure> {
        let model = self.load(file)?;
        let graph = model.to_factor_graph().map_err(Failure::invalid)?;
        Ok((model, graph))
    }

    fn emit(&mut self, text: &str, value: Value) {
        let result = if self.json {
            let mut obj = json!({ "schema": JSON_SCHEMA });
            if let (Some(o), Value::Object(extra)) = (obj.as_object_mut(), value) {
                o.extend(extra);
            }
            writeln!(self.stdout, "{obj}")
        } else {
            self.stdout.write_all(text.as_bytes())
        };
        let _ = result;
    }
}

fn evidence_from(pairs: &[(String, usize)]) -> Evidence {
    pairs
        .iter()
        .fold(Evidence::new(), |ev, (n, s)| ev.with(n.clone(), *s))
}

fn probabilities(values: &[f64]) -> String {
    values
        .iter()
        .enumerate()
        .map(|(s, p)| format!("{s} {p:?}\n"))
        .collect()
}

fn execute(command: Command, io: &mut Io) -> Result<i32, Failure> {
    match command {
        Command::Check { file, tol } => {
            let (_, graph) = io.load_graph(&file)?;
            let report = graph.check_local_normalization(tol);
            let components: Vec<Value> = report
                .components
                .iter()
                .map(|c| {
                    json!({
                        "children": c.children,
                        "functions": c.functions,
                        "normalizers": c.normalizers,
                        "given": c.conditioning,
                        "worst_deviation": c.worst_deviation,
                        "passed": c.passed,
                    })
                })
                .collect();
            io.emit(
                &format!("{report}\n"),
                json!({
                    "command": "check",
                    "passed": report.passed(),
                    "tolerance": report.tolerance,
                    "worst_deviation": report.worst_deviation(),
                    "components": components,
                    "isolated": report.isolated,
                }),
            );
            Ok(if report.passed() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Stats { file } => {
            let (model, graph) = io.load_graph(&file)?;
            let s = graph.structure_stats();
            let source_edges = match &model {
                ModelFile::FactorGraph(_) => None,
                ModelFile::BayesNet(bn) => Some(bn.edge_count()),
                ModelFile::MarkovNet(mrf) => Some(mrf.edges().len()),
            };
            let sizes: Vec<String> = s.scope_sizes.iter().map(|(k, n)| format!("{k}:{n}")).collect();
            let mut text = format!(
                "variables {}\nfunctions {}\nedges {}\nparent_edges {}\nchild_edges {}\nundirected_edges {}\ndashed_edges {}\nscope_sizes {}\n",
                s.variables,
                s.functions,
                s.edges(),
                s.parent_edges,
                s.child_edges,
                s.undirected_edges,
                s.dashed_edges,
                sizes.join(" ")
            );
            if let Some(n) = source_edges {
                text.push_str(&format!(
                    "source_kind {}\nsource_edges {n}\n",
                    model.kind().keyword()
                ));
            }
            let sizes_json: serde_json::Map<String, Value> = s
                .scope_sizes
                .iter()
                .map(|(k, n)| (k.to_string(), json!(n)))
                .collect();
            io.emit(
                &text,
                json!({
                    "command": "stats",
                    "variables": s.variables,
                    "functions": s.functions,
                    "edges": s.edges(),
                    "parent_edges": s.parent_edges,
                    "child_edges": s.child_edges,
                    "undirected_edges": s.undirected_edges,
                    "dashed_edges": s.dashed_edges,
                    "scope_sizes": sizes_json,
                    "source_kind": model.kind().keyword(),
                    "source_edges": source_edges,
                }),
            );
            Ok(EXIT_OK)
        }
        Command::Indep { file, x, y, given } => {
            let (_, graph) = io.load_graph(&file)?;
            let given: Vec<String> = given.into_iter().filter(|s| !s.is_empty()).collect();
            let verdict = separated(&graph, &IndependenceQuery::new(x, y, given))
                .map_err(Failure::invalid)?;
            let (text, witness) = match &verdict {
                crate::independence::Verdict::Separated => ("separated\n".to_string(), Value::Null),
                crate::independence::Verdict::NotSeparated { witness } => {
                    let names: Vec<&str> = witness.iter().map(|&n| graph.node_name(n)).collect();
                    (
                        format!("not-separated\n{}\n", render_path(&graph, witness)),
                        json!(names),
                    )
                }
            };
            io.emit(
                &text,
                json!({
                    "command": "indep",
                    "separated": verdict.is_separated(),
                    "witness": witness,
                }),
            );
            Ok(EXIT_OK)
        }
        Command::Convert { file, to, output } => {
            let model = io.load(&file)?;
            let converted = match (to, model) {
                (Target::Bn, m @ ModelFile::BayesNet(_)) | (Target::Mrf, m @ ModelFile::MarkovNet(_)) => m,
                (Target::Fg, m) => ModelFile::FactorGraph(m.to_factor_graph().map_err(Failure::invalid)?),
                (Target::Bn, m) => {
                    let g = m.to_factor_graph().map_err(Failure::invalid)?;
                    ModelFile::BayesNet(fg_to_bn(&g).map_err(Failure::invalid)?)
                }
                (Target::Mrf, m) => {
                    let g = m.to_factor_graph().map_err(Failure::invalid)?;
                    ModelFile::MarkovNet(fg_to_mrf(&g).map_err(Failure::invalid)?)
                }
            };
            let text = serialize_model(&converted);
            match output {
                Some(path) => {
                    std::fs::write(&path, &text)
                        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                    io.emit(
                        "",
                        json!({
                            "command": "convert",
                            "kind": converted.kind().keyword(),
                            "output": path.display().to_string(),
                        }),
                    );
                }
                None => io.emit(
                    &text,
                    json!({
                        "command": "convert",
                        "kind": converted.kind().keyword(),
                        "text": text,
                    }),
                ),
            }
            Ok(EXIT_OK)
        }
        Command::Joint { file, evidence } => {
            let (_, graph) = io.load_graph(&file)?;
            let joint = joint_enumerate(&graph, &evidence_from(&evidence)).map_err(Failure::invalid)?;
            let table = joint.table();
            let names: Vec<&str> = table.axis_names().collect();
            let mut text = format!("{} p\n", names.join(" "));
            for (states, p) in table.iter() {
                let cells: Vec<String> = states.iter().map(usize::to_string).collect();
                text.push_str(&format!("{} {p:?}\n", cells.join(" ")));
            }
            let cards: Vec<usize> = table.axes().iter().map(|a| a.cardinality).collect();
            io.emit(
                &text,
                json!({
                    "command": "joint",
                    "variables": names,
                    "cardinalities": cards,
                    "values": table.values(),
                }),
            );
            Ok(EXIT_OK)
        }
        Command::Marginal {
            file,
            var,
            evidence,
            method,
            loopy,
            max_iters,
            damping,
        } => {
            if loopy && method == MethodArg::Enum {
                return Err(Failure::usage("--loopy requires --method sumproduct"));
            }
            let (_, graph) = io.load_graph(&file)?;
            let evidence = evidence_from(&evidence);
            let (values, exact, converged, iterations) = match method {
                MethodArg::Enum => (
                    marginal(&graph, &var, &evidence, Method::Enumerate).map_err(Failure::invalid)?,
                    true,
                    true,
                    0,
                ),
                MethodArg::Sumproduct => {
                    if graph.variable_index(&var).is_none() {
                        return Err(Failure::invalid(format!("unknown variable `{var}`")));
                    }
                    let options = SumProductOptions {
                        schedule: if loopy { Schedule::Loopy } else { Schedule::Tree },
                        max_iters,
                        damping,
                    };
                    let set = sum_product(&graph, &evidence, &options).map_err(Failure::invalid)?;
                    let values = set.get(&var).unwrap_or_default().to_vec();
                    (values, set.exact, set.converged, set.iterations)
                }
            };
            if !converged {
                let _ = writeln!(
                    io.stderr,
                    "warning: loopy schedule did not converge in {iterations} iterations"
                );
            }
            io.emit(
                &probabilities(&values),
                json!({
                    "command": "marginal",
                    "variable": var,
                    "method": if method == MethodArg::Enum { "enum" } else { "sumproduct" },
                    "values": values,
                    "exact": exact,
                    "converged": converged,
                    "iterations": iterations,
                }),
            );
            Ok(EXIT_OK)
        }
        Command::Blanket { file, var } => {
            let (_, graph) = io.load_graph(&file)?;
            let blanket = markov_blanket_undirected(&graph, &var).map_err(Failure::invalid)?;
            io.emit(
                &format!("{}\n", blanket.join(" ")),
                json!({ "command": "blanket", "variable": var, "blanket": blanket }),
            );
            Ok(EXIT_OK)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = Io {
        stdin,
        stdout,
        stderr,
        json: cli.json,
    };
    match execute(cli.command, &mut io) {
        Ok(code) => code,
        Err(f) => {
            if io.json {
                let _ = writeln!(
                    io.stdout,
                    "{}",
                    json!({ "schema": JSON_SCHEMA, "error": f.message, "exit_code": f.code })
                );
            }
            let _ = writeln!(io.stderr, "error: {}", f.message);
            f.code
        }
    }
}
