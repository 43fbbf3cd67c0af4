//! Text formats.
//!
//! * edge file: one `<src> <dst>` pair per line (tab or space separated),
//!   `#` starts a comment;
//! * attribute file: CSV with header `node,attr`, one row per node;
//! * feature file: CSV, one row of reals per node, optional header row.
//!
//! Node ids are dense `0..n`. When the attribute file names nodes with
//! non-integer labels, ids follow attribute-file row order and the labels are
//! returned in [`Dataset::node_labels`].

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Graph, NodeFeatures, SensitiveAttributes};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub attrs: SensitiveAttributes,
    pub features: Option<NodeFeatures>,
    /// Original node labels indexed by dense id, for string-labelled inputs.
    pub node_labels: Option<Vec<String>>,
    pub self_loops_dropped: usize,
}

struct AttrRow {
    node: String,
    attr: String,
    line: usize,
}

pub fn load_graph(
    edge_path: impl AsRef<Path>,
    attr_path: impl AsRef<Path>,
) -> Result<(Graph, SensitiveAttributes)> {
    let ds = load_dataset(edge_path, attr_path, None::<&Path>)?;
    Ok((ds.graph, ds.attrs))
}

pub fn load_dataset(
    edge_path: impl AsRef<Path>,
    attr_path: impl AsRef<Path>,
    feature_path: Option<impl AsRef<Path>>,
) -> Result<Dataset> {
    let edge_path = edge_path.as_ref();
    let attr_path = attr_path.as_ref();
    let raw_edges = read_edge_tokens(edge_path)?;
    let rows = read_attr_rows(attr_path)?;
    let n = rows.len();

    let numeric = rows.iter().all(|r| r.node.parse::<usize>().is_ok());
    let (order, node_labels, ids): (Vec<usize>, Option<Vec<String>>, Vec<(usize, usize)>) =
        if numeric {
            let mut ids = Vec::with_capacity(raw_edges.len());
            let mut max_id = None::<usize>;
            for (a, b, line) in &raw_edges {
                let pa = parse_id(a, edge_path, *line)?;
                let pb = parse_id(b, edge_path, *line)?;
                max_id = Some(max_id.map_or(pa.max(pb), |m: usize| m.max(pa).max(pb)));
                ids.push((pa, pb));
            }
            if let Some(m) = max_id {
                if m + 1 > n {
                    return Err(Error::AttributeCountMismatch {
                        expected: m + 1,
                        found: n,
                    });
                }
            }
            let mut order = vec![usize::MAX; n];
            for (k, r) in rows.iter().enumerate() {
                let id: usize = r.node.parse().unwrap();
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
                if order[id] != usize::MAX {
                    return Err(malformed(attr_path, r.line, format!("duplicate node {id}")));
                }
                order[id] = k;
            }
            (order, None, ids)
        } else {
            let mut index = HashMap::with_capacity(n);
            for (k, r) in rows.iter().enumerate() {
                if index.insert(r.node.as_str(), k).is_some() {
                    return Err(malformed(
                        attr_path,
                        r.line,
                        format!("duplicate node `{}`", r.node),
                    ));
                }
            }
            let lookup = |label: &str, line: usize| {
                index.get(label).copied().ok_or_else(|| Error::UnknownNode {
                    path: edge_path.to_path_buf(),
                    line,
                    label: label.to_string(),
                })
            };
            let mut ids = Vec::with_capacity(raw_edges.len());
            for (a, b, line) in &raw_edges {
                ids.push((lookup(a, *line)?, lookup(b, *line)?));
            }
            let labels = rows.iter().map(|r| r.node.clone()).collect();
            ((0..n).collect(), Some(labels), ids)
        };

    let attr_tokens: Vec<&str> = order.iter().map(|&k| rows[k].attr.as_str()).collect();
    let attrs = attributes_from_tokens(&attr_tokens)?;

    let self_loops = ids.iter().filter(|(a, b)| a == b).count();
    let graph = Graph::from_edges(n, ids.into_iter().filter(|(a, b)| a != b))?;

    let features = match feature_path {
        Some(p) => Some(load_features(p.as_ref(), n)?),
        None => None,
    };

    Ok(Dataset {
        graph,
        attrs,
        features,
        node_labels,
        self_loops_dropped: self_loops,
    })
}

/// Loads an attribute file on its own. Returns the attributes in dense-id
/// order and, for string-labelled nodes, the labels.
pub fn load_attributes(
    attr_path: impl AsRef<Path>,
) -> Result<(SensitiveAttributes, Option<Vec<String>>)> {
    let attr_path = attr_path.as_ref();
    let rows = read_attr_rows(attr_path)?;
    let n = rows.len();
    if rows.iter().all(|r| r.node.parse::<usize>().is_ok()) {
        let mut tokens = vec![None; n];
        for r in &rows {
            let id: usize = r.node.parse().unwrap();
            if id >= n {
                return Err(Error::NodeOutOfRange { id, n });
            }
            if tokens[id].replace(r.attr.as_str()).is_some() {
                return Err(malformed(attr_path, r.line, format!("duplicate node {id}")));
            }
        }
        let tokens: Vec<&str> = tokens.into_iter().map(Option::unwrap).collect();
        Ok((attributes_from_tokens(&tokens)?, None))
    } else {
        let tokens: Vec<&str> = rows.iter().map(|r| r.attr.as_str()).collect();
        let labels = rows.iter().map(|r| r.node.clone()).collect();
        Ok((attributes_from_tokens(&tokens)?, Some(labels)))
    }
}

pub fn load_features(path: impl AsRef<Path>, n: usize) -> Result<NodeFeatures> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|t| t.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            // a non-numeric first row is a header
            Err(_) if k == 0 => continue,
            Err(e) => return Err(malformed(path, line, e.to_string())),
        };
        if let Some(&bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(malformed(path, line, format!("non-finite feature {bad}")));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(malformed(
                    path,
                    line,
                    format!("expected {d} columns, found {}", values.len()),
                ))
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    if rows != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: rows,
        });
    }
    let x = Array2::from_shape_vec((n, dim.unwrap_or(0)), data)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    NodeFeatures::dense(x)
}

pub fn write_edges<W: Write>(graph: &Graph, mut out: W) -> std::io::Result<()> {
    for &(a, b) in graph.edges() {
        writeln!(out, "{a}\t{b}")?;
    }
    out.flush()
}

pub fn write_attributes<W: Write>(attrs: &SensitiveAttributes, mut out: W) -> std::io::Result<()> {
    writeln!(out, "node,attr")?;
    for (v, &a) in attrs.values().iter().enumerate() {
        match attrs.labels() {
            Some(labels) => writeln!(out, "{v},{}", labels[a])?,
            None => writeln!(out, "{v},{a}")?,
        }
    }
    out.flush()
}

fn read_edge_tokens(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => out.push((a.to_string(), b.to_string(), k + 1)),
            _ => {
                return Err(malformed(
                    path,
                    k + 1,
                    "expected `<src> <dst>`".to_string(),
                ))
            }
        }
    }
    Ok(out)
}

fn read_attr_rows(path: &Path) -> Result<Vec<AttrRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "node" || &header[1] != "attr" {
        return Err(malformed(path, 1, "expected header `node,attr`".into()));
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 2, |p| p.line() as usize);
        if record.len() != 2 || record[0].is_empty() || record[1].is_empty() {
            return Err(malformed(path, line, "expected `node,attr`".into()));
        }
        rows.push(AttrRow {
            node: record[0].to_string(),
            attr: record[1].to_string(),
            line,
        });
    }
    Ok(rows)
}

/// Integer tokens are class ids; otherwise labels map to ids in sorted order.
fn attributes_from_tokens(tokens: &[&str]) -> Result<SensitiveAttributes> {
    let ints: Option<Vec<usize>> = tokens.iter().map(|t| t.parse::<usize>().ok()).collect();
    match ints {
        Some(values) => SensitiveAttributes::from_values(values),
        None => {
            let labels: BTreeSet<&str> = tokens.iter().copied().collect();
            let labels: Vec<String> = labels.into_iter().map(str::to_string).collect();
            let values = tokens
                .iter()
                .map(|t| labels.binary_search_by(|l| l.as_str().cmp(t)).unwrap())
                .collect();
            let k = labels.len();
            Ok(SensitiveAttributes::new(values, k)?.with_labels(labels))
        }
    }
}

fn parse_id(token: &str, path: &Path, line: usize) -> Result<usize> {
    token
        .parse()
        .map_err(|_| malformed(path, line, format!("`{token}` is not a node id")))
}

fn malformed(path: &Path, line: usize, reason: String) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn duplicate_edges_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "e.txt", "0 1\n1\t2\n0 1\n");
        let a = write(&dir, "a.csv", "node,attr\n0,0\n1,1\n2,0\n");
        let (g, s) = load_graph(&e, &a).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(s.values(), &[0, 1, 0]);
    }

    #[test]
    fn short_attribute_file_is_a_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "e.txt", "0 1\n1 2\n");
        let a = write(&dir, "a.csv", "node,attr\n0,0\n1,1\n");
        let err = load_graph(&e, &a).unwrap_err();
        assert!(err.to_string().contains("attribute count mismatch"), "{err}");
    }

    #[test]
    fn malformed_edge_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "e.txt", "# header\n0 1\n1 2 3\n");
        let a = write(&dir, "a.csv", "node,attr\n0,0\n1,1\n2,0\n");
        match load_graph(&e, &a).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn attribute_node_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "e.txt", "0 1\n");
        let a = write(&dir, "a.csv", "node,attr\n0,0\n5,1\n");
        assert!(matches!(
            load_graph(&e, &a).unwrap_err(),
            Error::NodeOutOfRange { id: 5, n: 2 }
        ));
    }

    #[test]
    fn string_labels_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(&dir, "e.txt", "alice bob # friends\n\nbob carol\ncarol carol\n");
        let a = write(&dir, "a.csv", "node,attr\nalice,f\nbob,m\ncarol,f\ndave,x\n");
        let ds = load_dataset(&e, &a, None::<&Path>).unwrap();
        assert_eq!(ds.graph.n(), 4);
        assert_eq!(ds.graph.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ds.self_loops_dropped, 1);
        assert_eq!(ds.attrs.values(), &[0, 1, 0, 2]);
        assert_eq!(ds.attrs.labels().unwrap(), &["f", "m", "x"]);
        assert_eq!(ds.node_labels.unwrap()[3], "dave");

        let bad = write(&dir, "bad.txt", "alice eve\n");
        assert!(matches!(
            load_graph(&bad, &a).unwrap_err(),
            Error::UnknownNode { line: 1, .. }
        ));
    }

    #[test]
    fn features_with_header_and_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "x.csv", "f0,f1\n1.0,2.0\n3.5,-1\n");
        let x = load_features(&f, 2).unwrap();
        assert_eq!(x.to_dense(), ndarray::array![[1.0, 2.0], [3.5, -1.0]]);
        assert!(load_features(&f, 3).is_err());
        let ragged = write(&dir, "r.csv", "1,2\n3\n");
        assert!(load_features(&ragged, 2).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::from_edges(5, [(0, 3), (4, 1), (2, 3)]).unwrap();
        let s = SensitiveAttributes::new(vec![0, 1, 1, 0, 2], 3).unwrap();
        let e = dir.path().join("e.txt");
        let a = dir.path().join("a.csv");
        write_edges(&g, File::create(&e).unwrap()).unwrap();
        write_attributes(&s, File::create(&a).unwrap()).unwrap();
        let (g2, s2) = load_graph(&e, &a).unwrap();
        assert_eq!(g, g2);
        assert_eq!(s, s2);
    }
}
