//! Plain-text dump of R-sample batches.
//!
//! ```text
//! # hmp-rsamples v1
//! # graph_hash=<hex>
//! # seed=<u64>
//! # samples=<count>
//! 3 1
//! 4
//!
//! 2
//!
//! ```
//!
//! One line per protector set (dense node ids, source first); each R-sample
//! ends with a blank line. An empty set is written as `-`.

use std::io::{BufRead, Write};

use super::RSample;
use crate::error::{Error, Result};
use crate::graph::NodeId;

const MAGIC: &str = "# hmp-rsamples v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub graph_hash: String,
    pub seed: u64,
    pub samples: usize,
}

pub fn write_dump<W: Write>(mut out: W, header: &DumpHeader, samples: &[RSample]) -> Result<()> {
    if header.samples != samples.len() {
        return Err(Error::Domain(format!(
            "header announces {} samples but {} were given",
            header.samples,
            samples.len()
        )));
    }
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# graph_hash={}", header.graph_hash)?;
    writeln!(out, "# seed={}", header.seed)?;
    writeln!(out, "# samples={}", header.samples)?;
    for sample in samples {
        for set in &sample.sets {
            if set.is_empty() {
                writeln!(out, "-")?;
                continue;
            }
            let line: Vec<String> = set.iter().map(NodeId::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a dump back. Sources are recovered from the first id of each set;
/// empty sets have no recoverable source and get `NodeId::MAX`.
pub fn read_dump<R: BufRead>(reader: R) -> Result<(DumpHeader, Vec<RSample>)> {
    let mut lines = reader.lines().enumerate();
    let mut next_header = |key: &str| -> Result<String> {
        let (index, line) = lines
            .next()
            .ok_or_else(|| parse(0, format!("missing `{key}` header")))?;
        let line = line?;
        if key.is_empty() {
            return if line == MAGIC {
                Ok(line)
            } else {
                Err(parse(index + 1, "not an r-sample dump".to_string()))
            };
        }
        line.strip_prefix("# ")
            .and_then(|rest| rest.strip_prefix(key))
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| parse(index + 1, format!("expected `# {key}=...`")))
    };
    next_header("")?;
    let graph_hash = next_header("graph_hash")?;
    let seed = next_header("seed")?
        .parse()
        .map_err(|_| parse(3, "invalid seed".to_string()))?;
    let samples = next_header("samples")?
        .parse()
        .map_err(|_| parse(4, "invalid sample count".to_string()))?;
    let header = DumpHeader { graph_hash, seed, samples };

    let mut out = Vec::with_capacity(samples);
    let mut current = RSample::default();
    for (index, line) in lines {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            out.push(std::mem::take(&mut current));
            continue;
        }
        if text == "-" {
            current.sets.push(Vec::new());
            current.sources.push(NodeId::MAX);
            continue;
        }
        let set = text
            .split_whitespace()
            .map(|field| {
                field
                    .parse::<NodeId>()
                    .map_err(|_| parse(index + 1, format!("invalid node id `{field}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        current.sources.push(set[0]);
        current.sets.push(set);
    }
    if !current.sets.is_empty() {
        return Err(parse(0, "last r-sample is not terminated by a blank line".to_string()));
    }
    if out.len() != samples {
        return Err(parse(
            0,
            format!("header announces {samples} samples, found {}", out.len()),
        ));
    }
    Ok((header, out))
}

fn parse(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}
