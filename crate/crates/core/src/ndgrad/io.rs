//! Parameter persistence: `params.json` plus one `f32le` blob per parameter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Parameter, Tensor};
use crate::blob::{self, DTYPE_TAG};
use crate::{Error, Result};

pub const PARAMS_MANIFEST: &str = "params.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsManifest {
    pub dtype: String,
    pub params: Vec<ParamEntry>,
}

pub fn save_params(store: &ParamStore, dir: &Path) -> Result<()> {
    blob::ensure_dir(dir)?;
    let mut params = Vec::with_capacity(store.len());
    for p in store.iter() {
        let file = format!("{}.bin", p.name);
        blob::write_f32(&dir.join(&file), p.value.data())?;
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.shape().to_vec(),
            file,
        });
    }
    let manifest = ParamsManifest {
        dtype: DTYPE_TAG.to_string(),
        params,
    };
    blob::write_json(&dir.join(PARAMS_MANIFEST), &manifest)
}

/// Loads every parameter listed in the manifest, in manifest order.
/// Optimizer state is not persisted and starts fresh.
pub fn load_params(dir: &Path) -> Result<ParamStore> {
    let manifest_path = dir.join(PARAMS_MANIFEST);
    let manifest: ParamsManifest = blob::read_json(&manifest_path)?;
    if manifest.dtype != DTYPE_TAG {
        return Err(Error::Manifest {
            path: manifest_path,
            detail: format!("unsupported dtype {:?}", manifest.dtype),
        });
    }
    let mut store = ParamStore::new();
    for entry in manifest.params {
        if entry.shape.is_empty() || entry.shape.contains(&0) {
            return Err(Error::Manifest {
                path: manifest_path.clone(),
                detail: format!("parameter {} has invalid shape {:?}", entry.name, entry.shape),
            });
        }
        let len = entry.shape.iter().product();
        let data = blob::read_f32(&dir.join(&entry.file), len)?;
        store.add(Parameter::new(entry.name, Tensor::new(entry.shape, data)));
    }
    Ok(store)
}

/// Copies values from `loaded` into `target`, requiring identical names and shapes.
pub fn assign_params(target: &mut ParamStore, loaded: &ParamStore, source: &Path) -> Result<()> {
    if target.len() != loaded.len() {
        return Err(Error::ShapeMismatch {
            path: source.to_path_buf(),
            detail: format!("expected {} parameters, found {}", target.len(), loaded.len()),
        });
    }
    for (t, l) in target.iter_mut().zip(loaded.iter()) {
        if t.name != l.name || t.shape() != l.shape() {
            return Err(Error::ShapeMismatch {
                path: source.to_path_buf(),
                detail: format!(
                    "parameter {} {:?} does not match stored {} {:?}",
                    t.name,
                    t.shape(),
                    l.name,
                    l.shape()
                ),
            });
        }
        t.value = l.value.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndgrad::Mlp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Mlp::new(&mut store, "net", &[3, 7, 2], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        save_params(&store, dir.path()).unwrap();
        let loaded = load_params(dir.path()).unwrap();
        assert_eq!(loaded.len(), store.len());
        for (a, b) in store.iter().zip(loaded.iter()) {
            assert_eq!(a.name, b.name);
            let bits = |p: &Parameter| p.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn truncated_blob_names_the_file() {
        let mut store = ParamStore::new();
        store.add(Parameter::new("w", Tensor::zeros(vec![4])));
        let dir = tempfile::tempdir().unwrap();
        save_params(&store, dir.path()).unwrap();
        std::fs::write(dir.path().join("w.bin"), [0u8; 12]).unwrap();
        match load_params(dir.path()) {
            Err(Error::Truncated { path, expected: 16, found: 12 }) => {
                assert!(path.ends_with("w.bin"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
