//! File formats: dense and sparse expression matrices, group labels, edge
//! lists, and simulation-truth directories.
//!
//! Matrices are observations x variables with a header row of variable names
//! and a leading observation-name column; tab- and comma-separated files are
//! both accepted (sniffed from the header). The sparse alternative is a
//! triplet file — a `rows cols nnz` header followed by 1-indexed
//! `i j value` lines — accompanied by separate row/column name files.
//!
//! All floating-point output is printed with 17 significant digits so files
//! round-trip losslessly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::covariance::{DataMatrix, GroupedDataset};
use crate::error::{Error, Result};
use crate::inference::EdgeSet;
use crate::pipeline::GroupAnalysis;
use crate::simulate::SimulationTruth;

/// Lossless float rendering (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Input is variables x observations; swap after reading.
    pub transpose: bool,
    /// Row names for the sparse triplet format.
    pub row_names: Option<std::path::PathBuf>,
    /// Column names for the sparse triplet format.
    pub col_names: Option<std::path::PathBuf>,
}

struct NamedMatrix {
    row_names: Vec<String>,
    col_names: Vec<String>,
    values: Array2<f64>,
}

fn sniff_delimiter(line: &str) -> char {
    if line.contains('\t') {
        '\t'
    } else {
        ','
    }
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got '{}'", token.trim()),
    })
}

fn read_name_file(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// True when the first line looks like a sparse triplet header
/// (`rows cols nnz`).
fn is_triplet_header(line: &str) -> bool {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    tokens.len() == 3 && tokens.iter().all(|t| t.parse::<usize>().is_ok())
}

fn load_named_matrix(path: &Path, options: &LoadOptions) -> Result<NamedMatrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let (_, first) = *lines.peek().ok_or(Error::EmptyInput)?;

    let mut matrix = if is_triplet_header(first) {
        load_triplet(&text, options)?
    } else {
        load_dense(&text)?
    };
    if options.transpose {
        matrix = NamedMatrix {
            values: matrix.values.t().to_owned(),
            row_names: matrix.col_names,
            col_names: matrix.row_names,
        };
    }
    Ok(matrix)
}

fn load_dense(text: &str) -> Result<NamedMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let delim = sniff_delimiter(header);
    let header_fields: Vec<&str> = header.split(delim).collect();
    if header_fields.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header must name at least one variable".into(),
        });
    }
    let col_names: Vec<String> = header_fields[1..]
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let p = col_names.len();

    let mut row_names = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != p + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, got {}", p + 1, fields.len()),
            });
        }
        row_names.push(fields[0].trim().to_string());
        for token in &fields[1..] {
            data.push(parse_value(token, line_no)?);
        }
    }
    let n = row_names.len();
    let values = Array2::from_shape_vec((n, p), data).expect("shape checked per line");
    Ok(NamedMatrix {
        row_names,
        col_names,
        values,
    })
}

fn load_triplet(text: &str, options: &LoadOptions) -> Result<NamedMatrix> {
    let row_names_path = options.row_names.as_ref().ok_or_else(|| {
        Error::InvalidConfig("sparse triplet input requires a row-name file".into())
    })?;
    let col_names_path = options.col_names.as_ref().ok_or_else(|| {
        Error::InvalidConfig("sparse triplet input requires a column-name file".into())
    })?;
    let row_names = read_name_file(row_names_path)?;
    let col_names = read_name_file(col_names_path)?;

    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().expect("validated by is_triplet_header"))
        .collect();
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if row_names.len() != rows || col_names.len() != cols {
        return Err(Error::DimensionMismatch(format!(
            "triplet header says {rows}x{cols} but name files have {} rows / {} cols",
            row_names.len(),
            col_names.len()
        )));
    }

    let mut values = Array2::<f64>::zeros((rows, cols));
    let mut seen = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 'i j value', got {} fields", fields.len()),
            });
        }
        let i: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad row index '{}'", fields[0]),
        })?;
        let j: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad column index '{}'", fields[1]),
        })?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(Error::Parse {
                line: line_no,
                message: format!("index ({i}, {j}) outside 1..={rows} x 1..={cols}"),
            });
        }
        values[(i - 1, j - 1)] = parse_value(fields[2], line_no)?;
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse {
            line: 1,
            message: format!("header promises {nnz} entries, file has {seen}"),
        });
    }
    Ok(NamedMatrix {
        row_names,
        col_names,
        values,
    })
}

fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let delim = sniff_delimiter(line);
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 'observation{delim}group', got {} fields", fields.len()),
            });
        }
        out.push((fields[0].trim().to_string(), fields[1].trim().to_string()));
    }
    Ok(out)
}

/// Load an expression matrix and a label file into a [`GroupedDataset`].
///
/// Observations are partitioned by group in file order; groups are ordered by
/// name. Every observation must be labeled and every label must refer to an
/// observation that exists.
pub fn load_dataset(
    matrix_path: &Path,
    labels_path: &Path,
    options: &LoadOptions,
) -> Result<GroupedDataset> {
    let matrix = load_named_matrix(matrix_path, options)?;
    let labels = load_labels(labels_path)?;

    let mut label_map: HashMap<&str, &str> = HashMap::with_capacity(labels.len());
    for (obs, group) in &labels {
        label_map.insert(obs.as_str(), group.as_str());
    }
    let row_set: std::collections::HashSet<&str> =
        matrix.row_names.iter().map(|s| s.as_str()).collect();
    for (obs, _) in &labels {
        if !row_set.contains(obs.as_str()) {
            return Err(Error::UnknownObservation(obs.clone()));
        }
    }

    let mut group_rows: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, obs) in matrix.row_names.iter().enumerate() {
        match label_map.get(obs.as_str()) {
            Some(group) => group_rows.entry(group).or_default().push(row),
            None => return Err(Error::UnlabeledObservation(obs.clone())),
        }
    }

    let p = matrix.col_names.len();
    let mut groups = Vec::with_capacity(group_rows.len());
    let mut group_names = Vec::with_capacity(group_rows.len());
    for (name, rows) in &group_rows {
        if rows.len() < 3 {
            return Err(Error::GroupTooSmall {
                name: (*name).to_string(),
                n: rows.len(),
            });
        }
        let values =
            Array2::from_shape_fn((rows.len(), p), |(i, j)| matrix.values[(rows[i], j)]);
        groups.push(DataMatrix::new(values)?);
        group_names.push((*name).to_string());
    }
    GroupedDataset::new(groups, matrix.col_names, group_names)
}

/// Observation names used when a dataset is written: `{group}_{0001..}`.
fn observation_names(dataset: &GroupedDataset) -> Vec<Vec<String>> {
    dataset
        .group_names()
        .iter()
        .zip(dataset.groups())
        .map(|(name, data)| {
            (0..data.n())
                .map(|k| format!("{name}_{:04}", k + 1))
                .collect()
        })
        .collect()
}

/// Write `matrix.tsv` and `labels.tsv` for a dataset; the exact inverse of
/// [`load_dataset`] on the same files.
pub fn write_dataset(dir: &Path, dataset: &GroupedDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let obs_names = observation_names(dataset);

    let mut matrix = String::from("observation");
    for name in dataset.variable_names() {
        matrix.push('\t');
        matrix.push_str(name);
    }
    matrix.push('\n');
    let mut labels = String::new();
    for (g, data) in dataset.groups().iter().enumerate() {
        for (k, row) in data.values().rows().into_iter().enumerate() {
            matrix.push_str(&obs_names[g][k]);
            for v in row {
                matrix.push('\t');
                matrix.push_str(&fmt_float(*v));
            }
            matrix.push('\n');
            labels.push_str(&format!(
                "{}\t{}\n",
                obs_names[g][k],
                dataset.group_names()[g]
            ));
        }
    }
    fs::write(dir.join("matrix.tsv"), matrix)?;
    fs::write(dir.join("labels.tsv"), labels)?;
    Ok(())
}

/// Write an edge set as `gene_i  gene_j  weight` rows using variable names.
pub fn write_edge_set(path: &Path, set: &EdgeSet, variable_names: &[String]) -> Result<()> {
    let mut out = String::from("gene_i\tgene_j\tweight\n");
    for e in &set.edges {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            variable_names[e.i],
            variable_names[e.j],
            fmt_float(e.weight)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a named edge list: two name columns and a numeric column. When the
/// header declares a `selected` column (the full per-pair listing that
/// `infer` writes), rows with `selected = false` are skipped, so scoring an
/// inference output directly does the right thing.
pub fn read_named_edges(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let delim = sniff_delimiter(header);
    let selected_col = header
        .split(delim)
        .position(|field| field.trim() == "selected");
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        if let Some(col) = selected_col {
            match fields.get(col).map(|s| s.trim()) {
                Some("true") => {}
                Some("false") => continue,
                other => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("selected column must be true/false, got {other:?}"),
                    });
                }
            }
        }
        out.push((
            fields[0].trim().to_string(),
            fields[1].trim().to_string(),
            parse_value(fields[2], idx + 1)?,
        ));
    }
    Ok(out)
}

/// Full per-pair output for one group: every canonical pair with its partial
/// correlation, raw and adjusted p-value, and selection flag.
pub fn write_group_edges(
    path: &Path,
    variable_names: &[String],
    analysis: &GroupAnalysis,
) -> Result<()> {
    let p = variable_names.len();
    let mut out =
        String::from("gene_i\tgene_j\tpartial_correlation\tp_value\tadjusted_p\tselected\n");
    let mut flat = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                variable_names[i],
                variable_names[j],
                fmt_float(analysis.partial.rho[(i, j)]),
                fmt_float(analysis.partial.pvalues[flat]),
                fmt_float(analysis.adjusted_pvalues[flat]),
                analysis.selected[flat]
            ));
            flat += 1;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in matrix.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push('\t');
            }
            out.push_str(&fmt_float(*v));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Serialize a simulation truth to a directory: the dataset in the loadable
/// input format, one precision matrix file per group, and the shared, unique,
/// and full-support edge lists.
pub fn write_truth(dir: &Path, truth: &SimulationTruth) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dataset(dir, &truth.dataset)?;
    let names = truth.dataset.variable_names();
    write_edge_set(&dir.join("edges_shared.tsv"), &truth.shared_edges, names)?;
    for (g, group) in truth.dataset.group_names().iter().enumerate() {
        write_matrix(&dir.join(format!("precision_{group}.tsv")), &truth.precisions[g])?;
        write_edge_set(
            &dir.join(format!("edges_unique_{group}.tsv")),
            &truth.unique_edges[g],
            names,
        )?;
        write_edge_set(
            &dir.join(format!("edges_truth_{group}.tsv")),
            &truth.support(g),
            names,
        )?;
    }
    let config =
        serde_json::to_string_pretty(&truth.config).expect("config serialization is infallible");
    fs::write(dir.join("truth.json"), config + "\n")?;
    Ok(())
}
