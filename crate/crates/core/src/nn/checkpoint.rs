//! Checkpoints: a JSON manifest plus a blob of little-endian f32 values.
//!
//! The manifest lists parameter names, shapes and their order in the blob,
//! together with an opaque architecture descriptor and the RNG seed used
//! for training. The blob sits next to the manifest as `<stem>.bin`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore, Scalar};

pub const ENGINE_VERSION: &str = concat!("wolgof-nn/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine_version: String,
    pub dtype: String,
    pub seed: u64,
    pub architecture: serde_json::Value,
    pub parameters: Vec<ParamEntry>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
}

fn io_err(path: &Path, source: std::io::Error) -> NnError {
    NnError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

/// Writes `store` as manifest + blob. Values are stored as f32.
pub fn save<T: Scalar>(
    manifest_path: &Path,
    store: &ParamStore<T>,
    architecture: serde_json::Value,
    seed: u64,
) -> Result<Manifest, NnError> {
    let blob = blob_path(manifest_path);
    let manifest = Manifest {
        engine_version: ENGINE_VERSION.to_string(),
        dtype: "f32".to_string(),
        seed,
        architecture,
        parameters: store
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
            })
            .collect(),
        blob: blob
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut bytes = Vec::with_capacity(store.iter().map(|(_, p)| p.value.len() * 4).sum());
    for (_, p) in store.iter() {
        for &v in p.value.data() {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    fs::write(&blob, bytes).map_err(|e| io_err(&blob, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(manifest_path, text).map_err(|e| io_err(manifest_path, e))?;
    Ok(manifest)
}

pub fn read_manifest(manifest_path: &Path) -> Result<Manifest, NnError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| NnError::Checkpoint(format!("{}: {e}", manifest_path.display())))?;
    if manifest.dtype != "f32" {
        return Err(NnError::Checkpoint(format!("unsupported dtype `{}`", manifest.dtype)));
    }
    Ok(manifest)
}

/// Fills `store` from the blob. The store must already hold parameters
/// with the manifest's names and shapes, in the same order.
pub fn load_into<T: Scalar>(
    manifest_path: &Path,
    manifest: &Manifest,
    store: &mut ParamStore<T>,
) -> Result<(), NnError> {
    if store.len() != manifest.parameters.len() {
        return Err(NnError::Checkpoint(format!(
            "model has {} parameters, checkpoint has {}",
            store.len(),
            manifest.parameters.len()
        )));
    }
    for ((_, p), entry) in store.iter().zip(&manifest.parameters) {
        if p.name != entry.name || p.value.shape() != entry.shape.as_slice() {
            return Err(NnError::Checkpoint(format!(
                "parameter `{}` {:?} does not match checkpoint `{}` {:?}",
                p.name,
                p.value.shape(),
                entry.name,
                entry.shape
            )));
        }
    }
    let blob = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&manifest.blob);
    let bytes = fs::read(&blob).map_err(|e| io_err(&blob, e))?;
    let expected: usize = manifest
        .parameters
        .iter()
        .map(|p| p.shape.iter().product::<usize>() * 4)
        .sum();
    if bytes.len() != expected {
        return Err(NnError::Checkpoint(format!(
            "blob holds {} bytes, manifest needs {expected}",
            bytes.len()
        )));
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v = T::of(f64::from(values.next().expect("length checked")));
        }
        p.grad.fill(T::zero());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut store = ParamStore::<f32>::new();
        store.add("a", Tensor::new(vec![2, 2], vec![1.5, -0.25, 3.0e-7, 9.0]).unwrap());
        store.add_buffer("b", Tensor::new(vec![1], vec![0.1]).unwrap());
        let manifest = save(&path, &store, serde_json::json!({"kind": "test"}), 9).unwrap();
        assert_eq!(manifest.blob, "model.bin");
        assert_eq!(std::fs::read(dir.path().join("model.bin")).unwrap().len(), 20);

        let mut other = ParamStore::<f32>::new();
        other.add("a", Tensor::zeros(&[2, 2]));
        other.add_buffer("b", Tensor::zeros(&[1]));
        let read = read_manifest(&path).unwrap();
        assert_eq!(read, manifest);
        load_into(&path, &read, &mut other).unwrap();
        assert_eq!(other, store);

        let mut wrong = ParamStore::<f32>::new();
        wrong.add("a", Tensor::zeros(&[4]));
        wrong.add("b", Tensor::zeros(&[1]));
        assert!(load_into(&path, &read, &mut wrong).is_err());
    }
}
