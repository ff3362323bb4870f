//! Line-oriented text formats for factor graphs (`fgx`), Bayesian networks
//! (`bn`) and Markov random fields (`mrf`).
//!
//! ```text
//! fgx 1
//! var x 2
//! var y 2
//! factor f
//!   scope x y
//!   parents x
//!   children y
//!   table 0.9 0.1 0.2 0.8
//! end
//! ```
//!
//! Tables are row-major over the listed axes with the last axis fastest. `#`
//! starts a comment. Variables may be declared anywhere in the file.

use std::fmt::Write as _;

use thiserror::Error;

use crate::convert::{bn_to_fg, mrf_to_fg, BayesNet, ConvertError, CpdDecl, MarkovNet};
use crate::model::{FactorGraph, FunctionDecl, ModelError, Variable};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("table has {found} entries, expected {expected}")]
    TableLength { found: usize, expected: usize },
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Convert(ConvertError),
}

impl ParseError {
    fn syntax(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            kind: ParseErrorKind::Syntax(message.into()),
        }
    }

    /// True when the text is well formed but describes an invalid model.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.kind,
            ParseErrorKind::Model(_) | ParseErrorKind::Convert(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Fgx,
    Bn,
    Mrf,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Fgx => "fgx",
            ModelKind::Bn => "bn",
            ModelKind::Mrf => "mrf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    FactorGraph(FactorGraph),
    BayesNet(BayesNet),
    MarkovNet(MarkovNet),
}

impl ModelFile {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelFile::FactorGraph(_) => ModelKind::Fgx,
            ModelFile::BayesNet(_) => ModelKind::Bn,
            ModelFile::MarkovNet(_) => ModelKind::Mrf,
        }
    }

    pub fn version(&self) -> u32 {
        FORMAT_VERSION
    }

    /// The model as a factor graph, converting BNs and MRFs.
    pub fn to_factor_graph(&self) -> Result<FactorGraph, ConvertError> {
        match self {
            ModelFile::FactorGraph(g) => Ok(g.clone()),
            ModelFile::BayesNet(bn) => bn_to_fg(bn),
            ModelFile::MarkovNet(mrf) => mrf_to_fg(mrf),
        }
    }
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            (!tokens.is_empty()).then_some(Line {
                number: i + 1,
                tokens,
            })
        })
        .collect()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\''))
}

fn identifiers(line: &Line, tokens: &[&str]) -> Result<Vec<String>, ParseError> {
    tokens
        .iter()
        .map(|t| {
            if is_identifier(t) {
                Ok(t.to_string())
            } else {
                Err(ParseError::syntax(line.number, format!("invalid name `{t}`")))
            }
        })
        .collect()
}

fn reals(line: &Line, tokens: &[&str]) -> Result<Vec<f64>, ParseError> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| ParseError::syntax(line.number, format!("invalid number `{t}`")))
        })
        .collect()
}

/// A parsed `NAME … end` block: its header tokens and keyed body lines.
struct Block<'a> {
    line: usize,
    header: Vec<String>,
    entries: Vec<(&'a str, usize, Vec<&'a str>)>,
}

impl<'a> Block<'a> {
    fn take(&mut self, key: &str) -> Option<(usize, Vec<&'a str>)> {
        let i = self.entries.iter().position(|(k, _, _)| *k == key)?;
        let (_, line, rest) = self.entries.remove(i);
        Some((line, rest))
    }

    fn take_names(&mut self, key: &str) -> Result<Option<(usize, Vec<String>)>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, rest)) => {
                let l = Line {
                    number: line,
                    tokens: Vec::new(),
                };
                Ok(Some((line, identifiers(&l, &rest)?)))
            }
        }
    }

    fn take_table(&mut self) -> Result<(usize, Vec<f64>), ParseError> {
        let (line, rest) = self
            .take("table")
            .ok_or_else(|| ParseError::syntax(self.line, "block has no `table` line"))?;
        let l = Line {
            number: line,
            tokens: Vec::new(),
        };
        Ok((line, reals(&l, &rest)?))
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.entries.first() {
            None => Ok(()),
            Some((key, line, _)) => Err(ParseError::syntax(*line, format!("unexpected `{key}`"))),
        }
    }
}

/// Reads a block opened on `lines[*i]`, leaving `*i` past its `end`.
fn read_block<'a>(
    lines: &[Line<'a>],
    i: &mut usize,
    allowed: &[&str],
) -> Result<Block<'a>, ParseError> {
    let open = &lines[*i];
    let mut block = Block {
        line: open.number,
        header: open.tokens[1..].iter().map(|s| s.to_string()).collect(),
        entries: Vec::new(),
    };
    *i += 1;
    while let Some(line) = lines.get(*i) {
        *i += 1;
        let key = line.tokens[0];
        if key == "end" {
            if line.tokens.len() > 1 {
                return Err(ParseError::syntax(line.number, "`end` takes no arguments"));
            }
            return Ok(block);
        }
        if !allowed.contains(&key) {
            return Err(ParseError::syntax(line.number, format!("unexpected `{key}` in block")));
        }
        if block.entries.iter().any(|(k, _, _)| *k == key) {
            return Err(ParseError::syntax(line.number, format!("repeated `{key}`")));
        }
        block.entries.push((key, line.number, line.tokens[1..].to_vec()));
    }
    Err(ParseError::syntax(block.line, "block is not closed by `end`"))
}

struct Declarations {
    variables: Vec<Variable>,
    lines: Vec<usize>,
}

impl Declarations {
    fn new() -> Self {
        Declarations {
            variables: Vec::new(),
            lines: Vec::new(),
        }
    }

    fn add(&mut self, line: &Line) -> Result<(), ParseError> {
        if line.tokens.len() != 3 {
            return Err(ParseError::syntax(line.number, "expected `var NAME CARD`"));
        }
        let name = &identifiers(line, &line.tokens[1..2])?[0];
        let card: usize = line.tokens[2].parse().map_err(|_| {
            ParseError::syntax(line.number, format!("invalid cardinality `{}`", line.tokens[2]))
        })?;
        if card == 0 {
            return Err(ParseError {
                line: line.number,
                kind: ParseErrorKind::Model(ModelError::ZeroCardinality(name.clone())),
            });
        }
        if self.variables.iter().any(|v| &v.name == name) {
            return Err(ParseError {
                line: line.number,
                kind: ParseErrorKind::Model(ModelError::DuplicateName(name.clone())),
            });
        }
        self.variables.push(Variable::new(name.clone(), card));
        self.lines.push(line.number);
        Ok(())
    }

    fn expected_cells(&self, names: &[String]) -> Option<usize> {
        names.iter().try_fold(1usize, |acc, n| {
            let v = self.variables.iter().find(|v| &v.name == n)?;
            acc.checked_mul(v.cardinality)
        })
    }

    fn check_length(&self, line: usize, names: &[String], found: usize) -> Result<(), ParseError> {
        match self.expected_cells(names) {
            Some(expected) if expected != found => Err(ParseError {
                line,
                kind: ParseErrorKind::TableLength { found, expected },
            }),
            _ => Ok(()),
        }
    }
}

/// Returns the line of the first item whose inclusion makes `build` fail.
fn locate<T, E>(
    lines: &[usize],
    fallback: usize,
    build: impl Fn(usize) -> Result<T, E>,
) -> usize {
    (1..=lines.len())
        .find(|&k| build(k).is_err())
        .map(|k| lines[k - 1])
        .unwrap_or(fallback)
}

pub fn parse_model(text: &str) -> Result<ModelFile, ParseError> {
    let lines = tokenize(text);
    let header = lines
        .first()
        .ok_or_else(|| ParseError::syntax(1, "empty input; expected a header"))?;
    let kind = match header.tokens[0] {
        "fgx" => ModelKind::Fgx,
        "bn" => ModelKind::Bn,
        "mrf" => ModelKind::Mrf,
        other => {
            return Err(ParseError::syntax(
                header.number,
                format!("unknown format `{other}`; expected fgx, bn or mrf"),
            ))
        }
    };
    match header.tokens.get(1..) {
        Some([v]) if v.parse::<u32>() == Ok(FORMAT_VERSION) => {}
        Some([v]) => {
            return Err(ParseError::syntax(
                header.number,
                format!("unsupported version `{v}`"),
            ))
        }
        _ => return Err(ParseError::syntax(header.number, "expected `KIND VERSION`")),
    }
    let body = &lines[1..];
    match kind {
        ModelKind::Fgx => parse_fgx(body, header.number).map(ModelFile::FactorGraph),
        ModelKind::Bn => parse_bn(body, header.number).map(ModelFile::BayesNet),
        ModelKind::Mrf => parse_mrf(body, header.number).map(ModelFile::MarkovNet),
    }
}

fn parse_fgx(lines: &[Line], header: usize) -> Result<FactorGraph, ParseError> {
    let mut vars = Declarations::new();
    let mut decls: Vec<FunctionDecl> = Vec::new();
    let mut decl_lines = Vec::new();
    let mut tables = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        match line.tokens[0] {
            "var" => {
                vars.add(line)?;
                i += 1;
            }
            "factor" => {
                let mut block = read_block(
                    lines,
                    &mut i,
                    &["scope", "parents", "children", "undirected", "normalizes", "table"],
                )?;
                let name = match block.header.as_slice() {
                    [name] if is_identifier(name) => name.clone(),
                    _ => return Err(ParseError::syntax(block.line, "expected `factor NAME`")),
                };
                let (_, scope) = block
                    .take_names("scope")?
                    .ok_or_else(|| ParseError::syntax(block.line, "factor has no `scope` line"))?;
                let mut decl = FunctionDecl::new(name).scope(scope);
                for key in ["parents", "children", "undirected", "normalizes"] {
                    if let Some((_, names)) = block.take_names(key)? {
                        decl = match key {
                            "parents" => decl.parents(names),
                            "children" => decl.children(names),
                            "undirected" => decl.undirected(names),
                            _ => decl.normalizes(names),
                        };
                    }
                }
                let (table_line, values) = block.take_table()?;
                let open = block.line;
                block.finish()?;
                tables.push(table_line);
                decl_lines.push(open);
                decls.push(decl.values(values));
            }
            other => {
                return Err(ParseError::syntax(line.number, format!("unexpected `{other}`")))
            }
        }
    }
    for (decl, &line) in decls.iter().zip(&tables) {
        vars.check_length(line, &decl.scope, decl.values.len())?;
    }
    FactorGraph::new(vars.variables.clone(), decls.clone()).map_err(|e| ParseError {
        line: locate(&decl_lines, header, |k| {
            FactorGraph::new(vars.variables.clone(), decls[..k].to_vec())
        }),
        kind: ParseErrorKind::Model(e),
    })
}

fn parse_bn(lines: &[Line], header: usize) -> Result<BayesNet, ParseError> {
    let mut vars = Declarations::new();
    let mut decls: Vec<CpdDecl> = Vec::new();
    let mut decl_lines = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        match line.tokens[0] {
            "var" => {
                vars.add(line)?;
                i += 1;
            }
            "cpd" => {
                let mut block = read_block(lines, &mut i, &["table"])?;
                let open = block.line;
                let (child, parents) = match block.header.split_first() {
                    Some((child, [])) => (child.clone(), Vec::new()),
                    Some((child, [bar, rest @ ..])) if bar == "|" && !rest.is_empty() => {
                        (child.clone(), rest.to_vec())
                    }
                    _ => {
                        return Err(ParseError::syntax(
                            open,
                            "expected `cpd CHILD` or `cpd CHILD | PARENT…`",
                        ))
                    }
                };
                let header_line = Line {
                    number: open,
                    tokens: Vec::new(),
                };
                let names: Vec<&str> = std::iter::once(child.as_str())
                    .chain(parents.iter().map(String::as_str))
                    .collect();
                identifiers(&header_line, &names)?;
                let (table_line, values) = block.take_table()?;
                block.finish()?;
                let mut axes = parents.clone();
                axes.push(child.clone());
                vars.check_length(table_line, &axes, values.len())?;
                decl_lines.push((child.clone(), open));
                decls.push(CpdDecl::new(child, parents, values));
            }
            other => {
                return Err(ParseError::syntax(line.number, format!("unexpected `{other}`")))
            }
        }
    }
    BayesNet::new(vars.variables.clone(), decls).map_err(|e| {
        let name = match &e {
            ConvertError::UnknownVariable(n)
            | ConvertError::DuplicateCpd(n)
            | ConvertError::Cycle(n)
            | ConvertError::MissingCpd(n)
            | ConvertError::InvalidParent { child: n, .. }
            | ConvertError::CpdNotNormalized { child: n, .. }
            | ConvertError::Table { owner: n, .. } => Some(n.clone()),
            _ => None,
        };
        let cpd_line = |n: &str| {
            // the last block for a child is the one that triggers a duplicate
            decl_lines.iter().rev().find(|(c, _)| c == n).map(|(_, l)| *l)
        };
        let var_line = |n: &str| {
            vars.variables
                .iter()
                .position(|v| v.name == n)
                .map(|i| vars.lines[i])
        };
        let line = name
            .as_deref()
            .and_then(|n| match e {
                ConvertError::MissingCpd(_) => var_line(n),
                _ => cpd_line(n).or_else(|| var_line(n)),
            })
            .unwrap_or(header);
        ParseError {
            line,
            kind: ParseErrorKind::Convert(e),
        }
    })
}

fn parse_mrf(lines: &[Line], header: usize) -> Result<MarkovNet, ParseError> {
    let mut vars = Declarations::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut edge_lines = Vec::new();
    let mut potentials: Vec<(Vec<String>, Vec<f64>)> = Vec::new();
    let mut potential_lines = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        match line.tokens[0] {
            "var" => {
                vars.add(line)?;
                i += 1;
            }
            "edge" => {
                if line.tokens.len() != 3 {
                    return Err(ParseError::syntax(line.number, "expected `edge A B`"));
                }
                let ends = identifiers(line, &line.tokens[1..])?;
                edges.push((ends[0].clone(), ends[1].clone()));
                edge_lines.push(line.number);
                i += 1;
            }
            "potential" => {
                let mut block = read_block(lines, &mut i, &["table"])?;
                let open = block.line;
                let header_line = Line {
                    number: open,
                    tokens: Vec::new(),
                };
                let names: Vec<&str> = block.header.iter().map(String::as_str).collect();
                let scope = identifiers(&header_line, &names)?;
                let (table_line, values) = block.take_table()?;
                block.finish()?;
                vars.check_length(table_line, &scope, values.len())?;
                potential_lines.push(open);
                potentials.push((scope, values));
            }
            other => {
                return Err(ParseError::syntax(line.number, format!("unexpected `{other}`")))
            }
        }
    }
    MarkovNet::new(vars.variables.clone(), &edges, potentials.clone()).map_err(|e| {
        let line = if MarkovNet::new(vars.variables.clone(), &edges, Vec::new()).is_err() {
            locate(&edge_lines, header, |k| {
                MarkovNet::new(vars.variables.clone(), &edges[..k], Vec::new())
            })
        } else {
            locate(&potential_lines, header, |k| {
                MarkovNet::new(vars.variables.clone(), &edges, potentials[..k].to_vec())
            })
        };
        ParseError {
            line,
            kind: ParseErrorKind::Convert(e),
        }
    })
}

fn push_real_line(out: &mut String, key: &str, values: &[f64]) {
    out.push_str("  ");
    out.push_str(key);
    for v in values {
        // `{:?}` is the shortest text that parses back to the same f64
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

fn push_name_line<'a>(out: &mut String, key: &str, names: impl IntoIterator<Item = &'a str>) {
    out.push_str(key);
    for n in names {
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
}

fn push_variables(out: &mut String, vars: &[Variable]) {
    for v in vars {
        let _ = writeln!(out, "var {} {}", v.name, v.cardinality);
    }
}

/// Canonical text for a model. Parsing the output gives back an equal model.
pub fn serialize_model(model: &ModelFile) -> String {
    let mut out = format!("{} {}\n", model.kind().keyword(), FORMAT_VERSION);
    match model {
        ModelFile::FactorGraph(g) => {
            let vars = g.variables();
            let name = |v: usize| vars[v].name.as_str();
            push_variables(&mut out, vars);
            for f in g.functions() {
                let _ = writeln!(out, "factor {}", f.name());
                push_name_line(&mut out, "  scope", f.scope().iter().map(|&v| name(v)));
                let groups: [(&str, Vec<usize>); 4] = [
                    ("  parents", f.parents().collect()),
                    ("  children", f.children().collect()),
                    ("  undirected", f.undirected().collect()),
                    ("  normalizes", f.dashed().to_vec()),
                ];
                for (key, members) in groups {
                    if !members.is_empty() {
                        push_name_line(&mut out, key, members.iter().map(|&v| name(v)));
                    }
                }
                push_real_line(&mut out, "table", f.table().values());
                out.push_str("end\n");
            }
        }
        ModelFile::BayesNet(bn) => {
            let vars = bn.variables();
            push_variables(&mut out, vars);
            for (v, cpd) in bn.cpds().iter().enumerate() {
                out.push_str("cpd ");
                out.push_str(&vars[v].name);
                if !cpd.parents().is_empty() {
                    out.push_str(" |");
                    for &p in cpd.parents() {
                        out.push(' ');
                        out.push_str(&vars[p].name);
                    }
                }
                out.push('\n');
                push_real_line(&mut out, "table", cpd.table().values());
                out.push_str("end\n");
            }
        }
        ModelFile::MarkovNet(mrf) => {
            let vars = mrf.variables();
            push_variables(&mut out, vars);
            for &(a, b) in mrf.edges() {
                let _ = writeln!(out, "edge {} {}", vars[a].name, vars[b].name);
            }
            for p in mrf.potentials() {
                push_name_line(
                    &mut out,
                    "potential",
                    p.scope().iter().map(|&v| vars[v].name.as_str()),
                );
                push_real_line(&mut out, "table", p.table().values());
                out.push_str("end\n");
            }
        }
    }
    out
}
