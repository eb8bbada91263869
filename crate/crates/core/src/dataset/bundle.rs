//! Graph bundle directories:
//!
//! ```text
//! meta.json     {name, n, d, num_classes, categories, feature_dtype: "f32le"}
//! edges.csv     src,dst          one undirected edge per row
//! features.bin  n*d float32 little-endian, row-major
//! labels.csv    id,label
//! texts.jsonl   {"id", "title", "text"} per line (optional)
//! splits.json   {"train", "val", "test"} (optional)
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, NodeText, SplitFractions, Splits, DEFAULT_SPLIT_SEED};
use crate::graph::Graph;

pub const FEATURE_DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub categories: Vec<String>,
    pub feature_dtype: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    src: usize,
    dst: usize,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    id: usize,
    label: usize,
}

#[derive(Serialize, Deserialize)]
struct TextRow {
    id: usize,
    title: String,
    text: String,
}

fn io_err(file: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        file: file.to_path_buf(),
        source,
    }
}

fn parse_err(file: &Path, message: impl ToString) -> DatasetError {
    DatasetError::Parse {
        file: file.to_path_buf(),
        message: message.to_string(),
    }
}

fn open(file: &Path) -> Result<File, DatasetError> {
    File::open(file).map_err(io_err(file))
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();

    let meta_path = dir.join("meta.json");
    let meta: BundleMeta = serde_json::from_reader(BufReader::new(open(&meta_path)?))
        .map_err(|e| parse_err(&meta_path, e))?;
    if meta.feature_dtype != FEATURE_DTYPE {
        return Err(parse_err(
            &meta_path,
            format!("unsupported feature_dtype {:?}", meta.feature_dtype),
        ));
    }
    if !meta.categories.is_empty() && meta.categories.len() != meta.num_classes {
        return Err(DatasetError::Shape {
            file: meta_path,
            message: format!(
                "{} categories for num_classes = {}",
                meta.categories.len(),
                meta.num_classes
            ),
        });
    }
    let n = meta.n;

    let edges_path = dir.join("edges.csv");
    let mut pairs = Vec::new();
    let mut reader = csv::Reader::from_reader(open(&edges_path)?);
    for row in reader.deserialize::<EdgeRow>() {
        let row = row.map_err(|e| parse_err(&edges_path, e))?;
        if row.src >= n || row.dst >= n {
            return Err(DatasetError::Shape {
                file: edges_path,
                message: format!("edge ({}, {}) outside 0..{n}", row.src, row.dst),
            });
        }
        pairs.push((row.src, row.dst));
    }
    let graph = Graph::new(n, &pairs)?;

    let feat_path = dir.join("features.bin");
    let bytes = fs::read(&feat_path).map_err(io_err(&feat_path))?;
    let expected = n * meta.d * 4;
    if bytes.len() != expected {
        return Err(DatasetError::Shape {
            file: feat_path,
            message: format!(
                "meta.json declares {n}x{} = {} floats, file holds {} bytes",
                meta.d,
                n * meta.d,
                bytes.len()
            ),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let features = Array2::from_shape_vec((n, meta.d), values).expect("length checked");

    let labels_path = dir.join("labels.csv");
    let mut labels = vec![None; n];
    let mut reader = csv::Reader::from_reader(open(&labels_path)?);
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| parse_err(&labels_path, e))?;
        if row.id >= n {
            return Err(DatasetError::Shape {
                file: labels_path,
                message: format!("node id {} outside 0..{n}", row.id),
            });
        }
        if row.label >= meta.num_classes {
            return Err(DatasetError::LabelOutOfRange {
                file: labels_path,
                node: row.id,
                label: row.label,
                num_classes: meta.num_classes,
            });
        }
        labels[row.id] = Some(row.label);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| DatasetError::Shape {
                file: labels_path.clone(),
                message: format!("no label for node {i}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let texts_path = dir.join("texts.jsonl");
    let texts = if texts_path.exists() {
        Some(read_texts(&texts_path, n)?)
    } else {
        None
    };

    let splits_path = dir.join("splits.json");
    let splits = if splits_path.exists() {
        let s: Splits = serde_json::from_reader(BufReader::new(open(&splits_path)?))
            .map_err(|e| parse_err(&splits_path, e))?;
        s.validate(n).map_err(|e| parse_err(&splits_path, e))?;
        s
    } else {
        Splits::random(n, SplitFractions::STANDARD, DEFAULT_SPLIT_SEED)?
    };

    let ds = Dataset {
        name: meta.name,
        graph,
        features,
        labels,
        num_classes: meta.num_classes,
        categories: meta.categories,
        texts,
        splits,
    };
    ds.validate()?;
    Ok(ds)
}

fn read_texts(path: &Path, n: usize) -> Result<Vec<NodeText>, DatasetError> {
    let mut slots: Vec<Option<NodeText>> = vec![None; n];
    for (lineno, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TextRow = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
        if row.id >= n {
            return Err(DatasetError::Shape {
                file: path.to_path_buf(),
                message: format!("node id {} outside 0..{n}", row.id),
            });
        }
        slots[row.id] = Some(NodeText {
            title: row.title,
            text: row.text,
        });
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            t.ok_or_else(|| DatasetError::Shape {
                file: path.to_path_buf(),
                message: format!("no text record for node {i}"),
            })
        })
        .collect()
}

/// Writes `ds` as a bundle directory, creating it if needed. Features are
/// narrowed to f32.
pub fn save_bundle(ds: &Dataset, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    ds.validate()?;

    let meta = BundleMeta {
        name: ds.name.clone(),
        n: ds.num_nodes(),
        d: ds.feature_dim(),
        num_classes: ds.num_classes,
        categories: ds.categories.clone(),
        feature_dtype: FEATURE_DTYPE.to_string(),
    };
    write_json(&dir.join("meta.json"), &meta)?;

    let edges_path = dir.join("edges.csv");
    let mut w = csv::Writer::from_path(&edges_path).map_err(|e| parse_err(&edges_path, e))?;
    for &(src, dst) in ds.graph.edges() {
        w.serialize(EdgeRow { src, dst })
            .map_err(|e| parse_err(&edges_path, e))?;
    }
    w.flush().map_err(io_err(&edges_path))?;

    let feat_path = dir.join("features.bin");
    let mut bytes = Vec::with_capacity(ds.features.len() * 4);
    for &x in ds.features.iter() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(&feat_path, bytes).map_err(io_err(&feat_path))?;

    let labels_path = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&labels_path).map_err(|e| parse_err(&labels_path, e))?;
    for (id, &label) in ds.labels.iter().enumerate() {
        w.serialize(LabelRow { id, label })
            .map_err(|e| parse_err(&labels_path, e))?;
    }
    w.flush().map_err(io_err(&labels_path))?;

    let texts_path = dir.join("texts.jsonl");
    match &ds.texts {
        Some(texts) => {
            let f = File::create(&texts_path).map_err(io_err(&texts_path))?;
            let mut w = BufWriter::new(f);
            for (id, t) in texts.iter().enumerate() {
                let row = TextRow {
                    id,
                    title: t.title.clone(),
                    text: t.text.clone(),
                };
                let line = serde_json::to_string(&row).map_err(|e| parse_err(&texts_path, e))?;
                writeln!(w, "{line}").map_err(io_err(&texts_path))?;
            }
            w.flush().map_err(io_err(&texts_path))?;
        }
        None => {
            if texts_path.exists() {
                fs::remove_file(&texts_path).map_err(io_err(&texts_path))?;
            }
        }
    }

    write_json(&dir.join("splits.json"), &ds.splits)
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), DatasetError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}
