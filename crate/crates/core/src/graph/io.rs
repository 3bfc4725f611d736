use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Graph, LoadReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Delimiter {
    /// Commas and/or whitespace.
    #[default]
    Auto,
    Whitespace,
    Comma,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeListOptions {
    pub delimiter: Delimiter,
    /// Lines are nominations `u -> v`; reciprocal pairs are counted rather
    /// than reported as duplicates. The result is symmetrized either way.
    pub directed_input: bool,
}

fn split_tokens(line: &str, delim: Delimiter) -> Vec<&str> {
    match delim {
        Delimiter::Whitespace => line.split_whitespace().collect(),
        Delimiter::Comma => line.split(',').map(str::trim).filter(|t| !t.is_empty()).collect(),
        Delimiter::Auto => line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect(),
    }
}

/// Parses an edge list. Node ids are registered in order of first appearance.
pub fn parse_edge_list<R: Read>(
    reader: R,
    source: &str,
    opts: EdgeListOptions,
) -> Result<(Graph, LoadReport)> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut intern = |tok: &str| -> usize {
        if let Some(&i) = index.get(tok) {
            return i;
        }
        index.insert(tok.to_string(), ids.len());
        ids.push(tok.to_string());
        ids.len() - 1
    };
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks = split_tokens(body, opts.delimiter);
        if toks.len() != 2 {
            return Err(Error::Parse {
                file: source.to_string(),
                line: lineno + 1,
                message: format!("expected two node tokens, found {}", toks.len()),
            });
        }
        let u = intern(toks[0]);
        let v = intern(toks[1]);
        pairs.push((u, v));
    }
    Graph::build(ids, pairs, opts.directed_input)
}

pub fn load_edge_list(path: impl AsRef<Path>, opts: EdgeListOptions) -> Result<(Graph, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(file, &path.display().to_string(), opts)
}

/// Reads a `node,attr1,attr2,...` table onto `graph`. Values other than
/// `0`/`1` (including empty cells) are recorded as missing, as are nodes
/// absent from the table.
pub fn parse_attributes<R: Read>(graph: &mut Graph, reader: R, source: &str) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            file: source.to_string(),
            line: 1,
            message: "attribute header needs `node` plus at least one attribute".into(),
        });
    }
    let n = graph.node_count();
    let mut columns: Vec<Vec<Option<u8>>> = vec![vec![None; n]; headers.len() - 1];
    for rec in rdr.records() {
        let rec = rec?;
        let id = &rec[0];
        let i = graph
            .index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        for (c, col) in columns.iter_mut().enumerate() {
            col[i] = match rec.get(c + 1) {
                Some("0") => Some(0),
                Some("1") => Some(1),
                Some(_) | None => None,
            };
        }
    }
    for (name, col) in headers.iter().skip(1).zip(columns) {
        graph.set_attribute(name, col)?;
    }
    Ok(())
}

pub fn load_attributes(graph: &mut Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(graph, file, &path.display().to_string())
}

pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    let werr = |e| Error::io("<edge list output>", e);
    writeln!(out, "# {} nodes, {} edges", graph.node_count(), graph.edge_count()).map_err(werr)?;
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", graph.id(u), graph.id(v)).map_err(werr)?;
    }
    Ok(())
}

pub fn write_attributes<W: Write>(graph: &Graph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = graph.attribute_names().collect();
    let mut header = vec!["node"];
    header.extend(&names);
    w.write_record(&header)?;
    for i in 0..graph.node_count() {
        let mut row = vec![graph.id(i).to_string()];
        for name in &names {
            row.push(match graph.attribute(name).and_then(|c| c[i]) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<attribute output>", e))?;
    Ok(())
}
