//! In-memory datasets and evaluation records, optionally mirrored to a
//! directory. Datasets are stored as `<id>.csv` plus `<id>.json` metadata;
//! evaluations as `<id>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use readiness_core::dataset::{ColumnSchema, MetadataDescriptor};
use readiness_core::{parse_csv, schema_fingerprint, Dataset, DatasetError, EvalConfig, ParseOptions, ReadinessReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage I/O failed for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stored file {path} is unreadable: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetMeta {
    dataset_id: String,
    name: String,
    /// Raw descriptor JSON, re-parsed on load.
    descriptor: Option<String>,
}

#[derive(Debug)]
pub struct StoredDataset {
    pub id: String,
    pub dataset: Dataset,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub name: String,
    pub row_count: usize,
    pub schema: Vec<ColumnSchema>,
    pub schema_fingerprint: String,
}

impl StoredDataset {
    pub fn info(&self) -> DatasetInfo {
        DatasetInfo {
            dataset_id: self.id.clone(),
            name: self.dataset.source_id().to_string(),
            row_count: self.dataset.row_count(),
            schema: self.dataset.schema(),
            schema_fingerprint: self.fingerprint.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalState {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub evaluation_id: String,
    pub dataset_id: String,
    pub cfg: EvalConfig,
    pub state: EvalState,
    pub report: Option<ReadinessReport>,
    pub error: Option<String>,
}

impl EvaluationRecord {
    /// `done` carries a report and `failed` an error, nothing else does.
    pub fn is_consistent(&self) -> bool {
        (self.state == EvalState::Done) == self.report.is_some() && (self.state == EvalState::Failed) == self.error.is_some()
    }
}

/// Parses an upload the same way the command line does.
pub fn load_dataset(bytes: &[u8], name: &str, descriptor: Option<&str>) -> Result<(Dataset, Vec<String>), DatasetError> {
    let d = parse_csv(bytes, name, &ParseOptions::default())?;
    match descriptor {
        Some(text) => {
            let (desc, warnings) = MetadataDescriptor::from_json(text)?;
            Ok((d.with_descriptor(Some(desc)), warnings))
        }
        None => Ok((d, Vec::new())),
    }
}

#[derive(Debug, Default)]
pub struct Store {
    datasets: RwLock<BTreeMap<String, Arc<StoredDataset>>>,
    evaluations: RwLock<BTreeMap<String, EvaluationRecord>>,
    dir: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (and creates) a persistent store, loading whatever it holds.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        for sub in ["datasets", "evaluations"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io(&p))?;
        }
        let store = Store {
            dir: Some(dir.clone()),
            ..Default::default()
        };
        let mut datasets = BTreeMap::new();
        for path in json_files(&dir.join("datasets"))? {
            let meta: DatasetMeta = read_json(&path)?;
            let csv_path = path.with_extension("csv");
            let bytes = fs::read(&csv_path).map_err(io(&csv_path))?;
            let (d, _) = load_dataset(&bytes, &meta.name, meta.descriptor.as_deref()).map_err(|e| StoreError::Corrupt {
                path: csv_path.clone(),
                message: e.to_string(),
            })?;
            datasets.insert(meta.dataset_id.clone(), Arc::new(stored(meta.dataset_id, d)));
        }
        let mut evaluations = BTreeMap::new();
        for path in json_files(&dir.join("evaluations"))? {
            let rec: EvaluationRecord = read_json(&path)?;
            evaluations.insert(rec.evaluation_id.clone(), rec);
        }
        *store.datasets.write().expect("store lock") = datasets;
        *store.evaluations.write().expect("store lock") = evaluations;
        Ok(store)
    }

    pub fn add_dataset(&self, bytes: &[u8], d: Dataset, descriptor: Option<&str>) -> Result<Arc<StoredDataset>, StoreError> {
        let id = new_id("ds");
        if let Some(dir) = &self.dir {
            let base = dir.join("datasets").join(&id);
            let csv_path = base.with_extension("csv");
            fs::write(&csv_path, bytes).map_err(io(&csv_path))?;
            write_json(
                &base.with_extension("json"),
                &DatasetMeta {
                    dataset_id: id.clone(),
                    name: d.source_id().to_string(),
                    descriptor: descriptor.map(str::to_string),
                },
            )?;
        }
        let entry = Arc::new(stored(id.clone(), d));
        self.datasets.write().expect("store lock").insert(id, entry.clone());
        Ok(entry)
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<StoredDataset>> {
        self.datasets.read().expect("store lock").get(id).cloned()
    }

    pub fn datasets(&self) -> Vec<DatasetInfo> {
        self.datasets.read().expect("store lock").values().map(|d| d.info()).collect()
    }

    /// Inserts or replaces a record, mirroring it to disk when persistent.
    pub fn put_evaluation(&self, rec: EvaluationRecord) -> Result<(), StoreError> {
        if let Some(dir) = &self.dir {
            write_json(&dir.join("evaluations").join(&rec.evaluation_id).with_extension("json"), &rec)?;
        }
        self.evaluations.write().expect("store lock").insert(rec.evaluation_id.clone(), rec);
        Ok(())
    }

    pub fn evaluation(&self, id: &str) -> Option<EvaluationRecord> {
        self.evaluations.read().expect("store lock").get(id).cloned()
    }

    pub fn evaluations(&self) -> Vec<EvaluationRecord> {
        self.evaluations.read().expect("store lock").values().cloned().collect()
    }
}

fn stored(id: String, dataset: Dataset) -> StoredDataset {
    StoredDataset {
        fingerprint: schema_fingerprint(&dataset),
        id,
        dataset,
    }
}

pub fn new_id(prefix: &str) -> String {
    format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes through a temporary file so a crash never leaves half a record.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let tmp = path.with_extension("json.tmp");
    let bytes = serde_json::to_vec_pretty(value).expect("records serialize");
    fs::write(&tmp, bytes).map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}
