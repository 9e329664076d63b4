use std::collections::HashSet;
use std::io::{BufRead, Write};

use super::{check_probability, Graph, NodeId, ProbabilityModel};
use crate::error::{Error, Result};

/// Reads a whitespace-separated edge list (`u v` or `u v p` per line, `#`
/// comments).
///
/// Node labels are re-indexed densely in ascending label order. An explicit
/// `p` on a line overrides `model` for that edge.
pub fn load_edge_list<R: BufRead>(reader: R, model: ProbabilityModel) -> Result<Graph> {
    if let ProbabilityModel::Uniform(p) = model {
        check_probability(p)?;
    }

    let mut raw: Vec<(u64, u64, Option<f64>)> = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = index + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_error(
                lineno,
                format!("expected `u v` or `u v p`, found {} fields", fields.len()),
            ));
        }
        let u = parse_node(fields[0], lineno)?;
        let v = parse_node(fields[1], lineno)?;
        let p = match fields.get(2) {
            Some(field) => {
                let p: f64 = field
                    .parse()
                    .map_err(|_| parse_error(lineno, format!("invalid probability `{field}`")))?;
                check_probability(p)
                    .map_err(|e| Error::Domain(format!("line {lineno}: {e}")))?;
                Some(p)
            }
            None if model == ProbabilityModel::FromFile => {
                return Err(parse_error(lineno, "missing probability".to_string()));
            }
            None => None,
        };
        if u == v || !seen.insert((u, v)) {
            continue;
        }
        raw.push((u, v, p));
    }

    let mut labels: Vec<u64> = raw.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    labels.sort_unstable();
    labels.dedup();
    let dense = |label: u64| labels.binary_search(&label).unwrap() as NodeId;

    let mut in_degree = vec![0usize; labels.len()];
    for &(_, v, _) in &raw {
        in_degree[dense(v) as usize] += 1;
    }
    let edges: Vec<(NodeId, NodeId, f64)> = raw
        .iter()
        .map(|&(u, v, p)| {
            let (u, v) = (dense(u), dense(v));
            let p = p.unwrap_or_else(|| match model {
                ProbabilityModel::Uniform(p) => p,
                ProbabilityModel::WeightedCascade => 1.0 / in_degree[v as usize] as f64,
                ProbabilityModel::FromFile => unreachable!("checked while parsing"),
            });
            (u, v, p)
        })
        .collect();
    Graph::with_labels(labels, edges)
}

/// Writes one `u v p` line per edge in edge-id order, using original labels.
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    for e in 0..graph.edge_count() as u32 {
        let (u, v) = graph.endpoints(e);
        writeln!(
            out,
            "{} {} {}",
            graph.label(u),
            graph.label(v),
            format_probability(graph.probability(e))
        )?;
    }
    Ok(())
}

/// Shortest decimal that parses back to exactly `p`, zero-padded to at least
/// nine significant digits.
pub fn format_probability(p: f64) -> String {
    let mut s = format!("{p}");
    if !s.contains('.') {
        s.push('.');
    }
    let significant = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    for _ in significant..9 {
        s.push('0');
    }
    s
}

fn parse_node(field: &str, line: usize) -> Result<u64> {
    field
        .parse()
        .map_err(|_| parse_error(line, format!("invalid node id `{field}`")))
}

fn parse_error(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}
