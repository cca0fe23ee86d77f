//! On-disk formats.
//!
//! * schemata: a JSON tree of `{name, children, datatype, instances}` nodes,
//!   whose leaves are the attributes;
//! * histories: JSON Lines, one `{"row","col","confidence","t"}` per line;
//! * references: a JSON list of `[row, col]`;
//! * similarity matrices: CSV whose first line is `rows,cols`;
//! * calibrator artifacts: versioned JSON;
//! * task bundles: a directory holding all of the above.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrator::{CalibratorParams, FeatureScaling, HeadLayout, Network, NetworkShape};
use crate::error::{Error, Result};
use crate::matchers::SimilarityMatrix;
use crate::model::{validate_history, Attribute, DecisionHistory, DecisionRecord, Pair, ReferenceMatch, Schema};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    parse_err(path, e.line(), e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SchemaNode {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<SchemaNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    datatype: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    instances: Vec<String>,
}

fn collect_leaves(node: &SchemaNode, prefix: &mut Vec<String>, out: &mut Vec<Attribute>) {
    prefix.push(node.name.clone());
    if node.children.is_empty() {
        let mut a = Attribute::new(out.len(), node.name.clone(), prefix.clone());
        a.datatype = node.datatype.clone();
        a.instances = node.instances.clone();
        out.push(a);
    } else {
        for c in &node.children {
            collect_leaves(c, prefix, out);
        }
    }
    prefix.pop();
}

pub fn schema_from_json(text: &str, origin: &Path) -> Result<Schema> {
    let root: SchemaNode = serde_json::from_str(text).map_err(|e| json_err(origin, e))?;
    if root.children.is_empty() {
        return Err(parse_err(origin, 1, format!("schema {} has no attributes", root.name)));
    }
    let mut attrs = Vec::new();
    for c in &root.children {
        collect_leaves(c, &mut vec![root.name.clone()], &mut attrs);
    }
    Schema::new(root.name, attrs)
}

pub fn schema_to_json(schema: &Schema) -> Result<String> {
    schema.validate()?;
    let mut root = SchemaNode {
        name: schema.name.clone(),
        children: Vec::new(),
        datatype: None,
        instances: Vec::new(),
    };
    for a in &schema.attributes {
        if a.path.first() != Some(&schema.name) || a.path.last() != Some(&a.name) || a.path.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "attribute {} has path {:?}, which does not run from {} to itself",
                a.name, a.path, schema.name
            )));
        }
        let mut node = &mut root;
        for seg in &a.path[1..a.path.len() - 1] {
            let pos = match node.children.iter().position(|c| &c.name == seg && !c.children.is_empty()) {
                Some(p) => p,
                None => {
                    node.children.push(SchemaNode {
                        name: seg.clone(),
                        children: Vec::new(),
                        datatype: None,
                        instances: Vec::new(),
                    });
                    node.children.len() - 1
                }
            };
            node = &mut node.children[pos];
        }
        node.children.push(SchemaNode {
            name: a.name.clone(),
            children: Vec::new(),
            datatype: a.datatype.clone(),
            instances: a.instances.clone(),
        });
    }
    Ok(serde_json::to_string_pretty(&root)? + "\n")
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    schema_from_json(&read(path)?, path)
}

/// Fails if the tree cannot reproduce the attribute order on reload.
pub fn save_schema(path: &Path, schema: &Schema) -> Result<()> {
    let text = schema_to_json(schema)?;
    let back = schema_from_json(&text, path)?;
    if &back != schema {
        return Err(Error::InvalidArgument(format!(
            "schema {} attributes are not in tree order",
            schema.name
        )));
    }
    write(path, &text)
}

pub fn history_from_jsonl(text: &str, origin: &Path) -> Result<DecisionHistory> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str::<DecisionRecord>(l).map_err(|e| parse_err(origin, k + 1, e.to_string())))
        .collect()
}

pub fn history_to_jsonl(history: &DecisionHistory) -> Result<String> {
    let mut out = String::new();
    for r in history.iter() {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn load_history(path: &Path) -> Result<DecisionHistory> {
    history_from_jsonl(&read(path)?, path)
}

pub fn save_history(path: &Path, history: &DecisionHistory) -> Result<()> {
    write(path, &history_to_jsonl(history)?)
}

pub fn load_reference(path: &Path) -> Result<ReferenceMatch> {
    let pairs: Vec<(usize, usize)> = serde_json::from_str(&read(path)?).map_err(|e| json_err(path, e))?;
    Ok(ReferenceMatch::new(pairs.into_iter().map(|(r, c)| Pair::new(r, c))))
}

pub fn reference_to_json(reference: &ReferenceMatch) -> Result<String> {
    let pairs: Vec<(usize, usize)> = reference.pairs().map(|p| (p.row, p.col)).collect();
    Ok(serde_json::to_string(&pairs)? + "\n")
}

pub fn save_reference(path: &Path, reference: &ReferenceMatch) -> Result<()> {
    write(path, &reference_to_json(reference)?)
}

pub fn matrix_from_csv(text: &str, origin: &Path) -> Result<SimilarityMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(origin, 1, "missing rows,cols header"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(origin, hl + 1, format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(origin, hl + 1, format!("header {header:?} is not rows,cols")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (ln, line) in lines {
        if seen == rows {
            return Err(parse_err(origin, ln + 1, format!("more than {rows} rows")));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(parse_err(
                origin,
                ln + 1,
                format!("row {seen} has {} values, expected {cols}", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(origin, ln + 1, format!("({seen},{j}): {cell:?} is not a number")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_err(origin, ln + 1, format!("({seen},{j}): value {v} outside [0,1]")));
            }
            values.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(origin, text.lines().count(), format!("found {seen} rows, header says {rows}")));
    }
    SimilarityMatrix::new(rows, cols, values)
}

pub fn matrix_to_csv(m: &SimilarityMatrix) -> String {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn load_matrix(path: &Path) -> Result<SimilarityMatrix> {
    matrix_from_csv(&read(path)?, path)
}

pub fn save_matrix(path: &Path, m: &SimilarityMatrix) -> Result<()> {
    write(path, &matrix_to_csv(m))
}

pub const ARTIFACT_FORMAT: &str = "procmatch-calibrator";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    layout: HeadLayout,
    shape: NetworkShape,
    scaling: FeatureScaling,
    networks: Vec<Vec<f64>>,
}

pub fn calibrator_to_json(params: &CalibratorParams) -> Result<String> {
    params.validate()?;
    let art = Artifact {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        layout: params.layout,
        shape: params.shape(),
        scaling: params.scaling,
        networks: params.networks.iter().map(|n| n.weights.clone()).collect(),
    };
    Ok(serde_json::to_string(&art)? + "\n")
}

pub fn calibrator_from_json(text: &str, origin: &Path) -> Result<CalibratorParams> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let head: Header = serde_json::from_str(text).map_err(|e| json_err(origin, e))?;
    if head.format != ARTIFACT_FORMAT {
        return Err(parse_err(origin, 1, format!("not a calibrator artifact (format {:?})", head.format)));
    }
    if head.version != ARTIFACT_VERSION {
        return Err(Error::ArtifactVersion {
            found: head.version,
            expected: ARTIFACT_VERSION,
        });
    }
    let art: Artifact = serde_json::from_str(text).map_err(|e| json_err(origin, e))?;
    let params = CalibratorParams {
        layout: art.layout,
        networks: art
            .networks
            .into_iter()
            .map(|weights| Network { shape: art.shape, weights })
            .collect(),
        scaling: art.scaling,
    };
    params.validate()?;
    Ok(params)
}

pub fn load_calibrator(path: &Path) -> Result<CalibratorParams> {
    calibrator_from_json(&read(path)?, path)
}

pub fn save_calibrator(path: &Path, params: &CalibratorParams) -> Result<()> {
    write(path, &calibrator_to_json(params)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: String,
    /// Overrides the reference size used by the estimators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_size: Option<usize>,
}

fn default_version() -> String {
    "1".into()
}

/// A matching task and the decision histories recorded on it.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBundle {
    pub meta: BundleMeta,
    pub schema_a: Schema,
    pub schema_b: Schema,
    pub reference: Option<ReferenceMatch>,
    pub algorithmic: Option<SimilarityMatrix>,
    /// Histories keyed by file stem.
    pub histories: BTreeMap<String, DecisionHistory>,
}

impl TaskBundle {
    pub fn rows(&self) -> usize {
        self.schema_a.len()
    }

    pub fn cols(&self) -> usize {
        self.schema_b.len()
    }

    /// Declared size, else the reference's, else `min(rows, cols)`.
    pub fn ref_size(&self) -> usize {
        self.meta
            .ref_size
            .or_else(|| self.reference.as_ref().map(ReferenceMatch::known_size).filter(|&k| k > 0))
            .unwrap_or_else(|| self.rows().min(self.cols()))
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.rows(), self.cols());
        if let Some(r) = &self.reference {
            if let Some(p) = r.pairs().find(|p| p.row >= n || p.col >= m) {
                return Err(Error::PairOutOfBounds {
                    index: 0,
                    pair: p,
                    rows: n,
                    cols: m,
                });
            }
        }
        if let Some(a) = &self.algorithmic {
            if (a.rows(), a.cols()) != (n, m) {
                return Err(Error::DimensionMismatch {
                    expected_rows: n,
                    expected_cols: m,
                    rows: a.rows(),
                    cols: a.cols(),
                });
            }
        }
        for (name, h) in &self.histories {
            if let Some(v) = validate_history(h, n, m).first() {
                return Err(Error::InvalidArgument(format!("history {name}: {v}")));
            }
        }
        if self.meta.ref_size == Some(0) {
            return Err(Error::InvalidArgument("ref_size must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn load_task_bundle(dir: &Path) -> Result<TaskBundle> {
    let member = |f: &str| dir.join(f);
    let missing: Vec<String> = ["schema_a.json", "schema_b.json", "meta.json"]
        .into_iter()
        .filter(|f| !member(f).is_file())
        .map(String::from)
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteBundle {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let meta_path = member("meta.json");
    let meta: BundleMeta = serde_json::from_str(&read(&meta_path)?).map_err(|e| json_err(&meta_path, e))?;
    let optional = |f: &str| Some(member(f)).filter(|p| p.is_file());
    let mut histories = BTreeMap::new();
    let hist_dir = member("histories");
    if hist_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&hist_dir)
            .map_err(|e| Error::io(&hist_dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&hist_dir, err)))
            .collect::<Result<_>>()?;
        files.sort();
        for f in files.into_iter().filter(|f| f.extension().is_some_and(|x| x == "jsonl")) {
            let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            histories.insert(stem, load_history(&f)?);
        }
    }
    let bundle = TaskBundle {
        meta,
        schema_a: load_schema(&member("schema_a.json"))?,
        schema_b: load_schema(&member("schema_b.json"))?,
        reference: optional("reference.json").map(|p| load_reference(&p)).transpose()?,
        algorithmic: optional("algorithmic.csv").map(|p| load_matrix(&p)).transpose()?,
        histories,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn save_task_bundle(dir: &Path, bundle: &TaskBundle) -> Result<()> {
    bundle.validate()?;
    save_schema(&dir.join("schema_a.json"), &bundle.schema_a)?;
    save_schema(&dir.join("schema_b.json"), &bundle.schema_b)?;
    write(&dir.join("meta.json"), &(serde_json::to_string_pretty(&bundle.meta)? + "\n"))?;
    if let Some(r) = &bundle.reference {
        save_reference(&dir.join("reference.json"), r)?;
    }
    if let Some(a) = &bundle.algorithmic {
        save_matrix(&dir.join("algorithmic.csv"), a)?;
    }
    for (name, h) in &bundle.histories {
        save_history(&dir.join("histories").join(format!("{name}.jsonl")), h)?;
    }
    Ok(())
}
