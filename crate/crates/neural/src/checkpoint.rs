//! Parameter checkpoints as versioned JSON.
//!
//! ```json
//! { "format": "memrex-params", "version": 1, "step": 120,
//!   "params": [ { "name": "act_emb", "shape": [14, 64], "values": [ ... ] } ] }
//! ```
//!
//! Values are written as `f64` regardless of the in-memory scalar type and
//! parameters keep their registration order.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::params::ParamStore;
use crate::{Scalar, Tensor};

pub const CHECKPOINT_FORMAT: &str = "memrex-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    step: u64,
    params: Vec<ParamRecord>,
}

pub fn to_json<T: Scalar>(store: &ParamStore<T>) -> Result<String> {
    Ok(serde_json::to_string(&to_file(store))?)
}

fn to_file<T: Scalar>(store: &ParamStore<T>) -> CheckpointFile {
    CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        step: store.step_count(),
        params: store
            .iter()
            .map(|(_, p)| ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape(),
                values: p.value.data().iter().map(|x| x.as_f64()).collect(),
            })
            .collect(),
    }
}

fn from_file<T: Scalar>(file: CheckpointFile) -> Result<ParamStore<T>> {
    if file.format != CHECKPOINT_FORMAT {
        return Err(NeuralError::Checkpoint(format!("unexpected format `{}`", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {}", file.version)));
    }
    let mut store = ParamStore::new();
    for rec in file.params {
        let data = rec.values.into_iter().map(T::lit).collect();
        store.add(rec.name, Tensor::from_vec(rec.shape[0], rec.shape[1], data)?)?;
    }
    store.set_step_count(file.step);
    Ok(store)
}

pub fn from_json<T: Scalar>(s: &str) -> Result<ParamStore<T>> {
    from_file(serde_json::from_str(s)?)
}

pub fn save<T: Scalar>(store: &ParamStore<T>, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(w, &to_file(store))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParamStore<T>> {
    let r = BufReader::new(File::open(path)?);
    from_file(serde_json::from_reader(r)?)
}
