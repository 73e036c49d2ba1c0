//! Reader and writer for the SteinLib STP text format (version 1.0).
//!
//! Only undirected graphs are supported: `E` lines in `SECTION Graph` and `T`
//! lines in `SECTION Terminals`. Other sections are skipped. Node ids are
//! 1-based on disk and 0-based in memory.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, StpInstance, Weight};

pub const MAGIC: &str = "33D32945 STP File, Version 1.0";

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Comment,
    Graph,
    Terminals,
    Skipped,
}

/// Decimal weight as `mantissa / 10^decimals`.
fn parse_weight(tok: &str, line: usize) -> Result<(u64, u32)> {
    if tok.starts_with('-') {
        return Err(err(line, format!("negative weight {tok}")));
    }
    let (int, frac) = match tok.split_once('.') {
        Some((i, f)) => (i, f.trim_end_matches('0')),
        None => (tok, ""),
    };
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) {
        return Err(err(line, format!("invalid weight {tok:?}")));
    }
    let decimals = frac.len() as u32;
    if decimals > 9 {
        return Err(err(line, format!("weight {tok} has too many decimals")));
    }
    let mantissa: u64 = format!("{int}{frac}")
        .parse()
        .map_err(|_| err(line, format!("weight {tok} out of range")))?;
    if mantissa == 0 {
        return Err(err(line, format!("non-positive weight {tok}")));
    }
    Ok((mantissa, decimals))
}

fn parse_count(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| err(line, format!("expected a count after {what}")))
}

fn parse_node(tok: Option<&str>, n: usize, line: usize) -> Result<NodeId> {
    let id: usize = tok
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(line, "expected a node id"))?;
    if id == 0 || id > n {
        return Err(err(line, format!("node id {id} outside 1..={n}")));
    }
    Ok(id - 1)
}

fn unquote(rest: &str) -> String {
    rest.trim().trim_matches('"').to_string()
}

pub fn parse_stp(text: &str) -> Result<StpInstance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (magic_line, magic) = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| err(1, "empty input"))?;
    let normalized = magic.split_whitespace().collect::<Vec<_>>().join(" ");
    if !normalized.eq_ignore_ascii_case(MAGIC) {
        return Err(err(magic_line, "missing STP magic header"));
    }

    let mut section = Section::None;
    let mut name: Option<String> = None;
    let mut seed: Option<u64> = None;
    let mut nodes: Option<usize> = None;
    let mut declared_edges: Option<usize> = None;
    let mut edges: Vec<(NodeId, NodeId, u64, u32)> = Vec::new();
    let mut graph_line = 0;
    let mut declared_terminals: Option<usize> = None;
    let mut terminals: Vec<NodeId> = Vec::new();
    let mut terminals_line = 0;
    let mut saw_eof = false;
    let mut last_line = magic_line;

    let check_edges =
        |edges: &[(NodeId, NodeId, u64, u32)], declared: Option<usize>, line| match declared {
            Some(m) if m != edges.len() => Err(err(
                line,
                format!("declared {m} edges but found {}", edges.len()),
            )),
            _ => Ok(()),
        };

    for (ln, line) in lines {
        last_line = ln;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default().to_ascii_lowercase();
        match key.as_str() {
            "eof" => {
                if section != Section::None {
                    return Err(err(ln, "EOF inside an open section"));
                }
                saw_eof = true;
                break;
            }
            "section" => {
                if section != Section::None {
                    return Err(err(ln, "SECTION before END of previous section"));
                }
                let which = toks.next().unwrap_or_default().to_ascii_lowercase();
                section = match which.as_str() {
                    "comment" => Section::Comment,
                    "graph" => {
                        graph_line = ln;
                        Section::Graph
                    }
                    "terminals" => {
                        if nodes.is_none() {
                            return Err(err(ln, "Terminals section before Graph section"));
                        }
                        check_edges(&edges, declared_edges, ln)?;
                        terminals_line = ln;
                        Section::Terminals
                    }
                    other => {
                        log::warn!("line {ln}: skipping unsupported section {other:?}");
                        Section::Skipped
                    }
                };
                continue;
            }
            "end" => {
                if section == Section::None {
                    return Err(err(ln, "END without an open section"));
                }
                if section == Section::Terminals {
                    if let Some(t) = declared_terminals {
                        if t != terminals.len() {
                            return Err(err(
                                ln,
                                format!("declared {t} terminals but found {}", terminals.len()),
                            ));
                        }
                    }
                }
                section = Section::None;
                continue;
            }
            _ => {}
        }
        let rest = line[key.len()..].trim();
        match section {
            Section::None => {
                return Err(err(
                    ln,
                    format!("unexpected line outside a section: {line}"),
                ))
            }
            Section::Skipped => {}
            Section::Comment => match key.as_str() {
                "name" => name = Some(unquote(rest)),
                "remark" => {
                    let text = unquote(rest);
                    if let Some(s) = text.strip_prefix("seed ") {
                        seed = s.trim().parse().ok();
                    }
                }
                _ => {}
            },
            Section::Graph => match key.as_str() {
                "nodes" => nodes = Some(parse_count(toks.next(), ln, "Nodes")?),
                "edges" => declared_edges = Some(parse_count(toks.next(), ln, "Edges")?),
                "e" => {
                    let n = nodes.ok_or_else(|| err(ln, "edge before Nodes declaration"))?;
                    let u = parse_node(toks.next(), n, ln)?;
                    let v = parse_node(toks.next(), n, ln)?;
                    let w = toks.next().ok_or_else(|| err(ln, "missing edge weight"))?;
                    let (mantissa, decimals) = parse_weight(w, ln)?;
                    if u == v {
                        return Err(err(ln, "self-loop"));
                    }
                    if declared_edges.is_some_and(|m| edges.len() >= m) {
                        return Err(err(ln, "more edges than declared"));
                    }
                    edges.push((u, v, mantissa, decimals));
                }
                _ => return Err(err(ln, format!("unsupported graph entry {line:?}"))),
            },
            Section::Terminals => match key.as_str() {
                "terminals" => {
                    declared_terminals = Some(parse_count(toks.next(), ln, "Terminals")?)
                }
                "t" => {
                    let n = nodes.unwrap_or(0);
                    terminals.push(parse_node(toks.next(), n, ln)?);
                    if declared_terminals.is_some_and(|t| terminals.len() > t) {
                        return Err(err(ln, "more terminals than declared"));
                    }
                }
                _ => return Err(err(ln, format!("unsupported terminal entry {line:?}"))),
            },
        }
    }
    if !saw_eof {
        return Err(err(last_line + 1, "missing EOF"));
    }
    let n = nodes.ok_or_else(|| err(last_line, "missing Graph section"))?;
    check_edges(&edges, declared_edges, last_line)?;
    if terminals_line == 0 {
        return Err(err(last_line, "missing Terminals section"));
    }

    let max_dec = edges.iter().map(|e| e.3).max().unwrap_or(0);
    let denominator = 10u64.pow(max_dec);
    let scaled = edges
        .iter()
        .map(|&(u, v, m, d)| (u, v, m * 10u64.pow(max_dec - d)));
    let graph = Graph::with_denominator(n, scaled, denominator)
        .map_err(|e| err(graph_line, e.to_string()))?;
    let mut instance = StpInstance::new(graph, terminals, name.unwrap_or_default())
        .map_err(|e| err(terminals_line, e.to_string()))?;
    instance.seed = seed;
    Ok(instance)
}

fn format_weight(w: Weight, denominator: u64) -> String {
    if denominator == 1 {
        return w.to_string();
    }
    let decimals = denominator.ilog10();
    if 10u64.pow(decimals) == denominator {
        format!(
            "{}.{:0width$}",
            w / denominator,
            w % denominator,
            width = decimals as usize
        )
    } else {
        format!("{}", w as f64 / denominator as f64)
    }
}

/// Byte-deterministic STP text: edges sorted by `(u, v)`, 1-based ids.
pub fn serialize_stp(instance: &StpInstance) -> String {
    let g = instance.graph();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push_str("\n\nSECTION Comment\n");
    let _ = writeln!(out, "Name    \"{}\"", instance.id.replace('"', "'"));
    if let Some(seed) = instance.seed {
        let _ = writeln!(out, "Remark  \"seed {seed}\"");
    }
    out.push_str("END\n\nSECTION Graph\n");
    let _ = writeln!(out, "Nodes {}", g.n());
    let _ = writeln!(out, "Edges {}", g.m());
    for e in g.edges() {
        let _ = writeln!(
            out,
            "E {} {} {}",
            e.u + 1,
            e.v + 1,
            format_weight(e.w, g.denominator())
        );
    }
    out.push_str("END\n\nSECTION Terminals\n");
    let _ = writeln!(out, "Terminals {}", instance.terminals().len());
    for t in instance.terminals() {
        let _ = writeln!(out, "T {}", t + 1);
    }
    out.push_str("END\n\nEOF\n");
    out
}
