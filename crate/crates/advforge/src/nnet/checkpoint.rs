//! Checkpoint directory format: `manifest.json` (kind, dims, vocab hash,
//! parameter order) plus `params.bin` (concatenated little-endian float32
//! arrays in manifest order) and `vocab.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::util::{atomic_write, fnv1a64};

use super::classifier::CLASSIFIER_PARAM_NAMES;
use super::{ClassifierModel, GeneratorModel};

pub const CHECKPOINT_VERSION: &str = "advforge-ckpt-v1";

#[derive(Debug, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    kind: String,
    dims: BTreeMap<String, usize>,
    vocab_hash: String,
    params: Vec<ParamInfo>,
}

/// The three files of a checkpoint directory.
pub fn checkpoint_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("manifest.json"), dir.join("params.bin"), dir.join("vocab.json"))
}

fn vocab_hash(vocab: &Vocab) -> String {
    format!("fnv1a64:{:016x}", fnv1a64(&vocab.canonical_bytes()))
}

fn params_to_f32_bytes(params: &[Array2<f64>]) -> Vec<u8> {
    let total: usize = params.iter().map(|p| p.len()).sum();
    let mut bytes = Vec::with_capacity(total * 4);
    for p in params {
        for v in p.iter() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    bytes
}

fn write_checkpoint(
    dir: &Path,
    kind: &str,
    dims: BTreeMap<String, usize>,
    names: &[String],
    params: &[Array2<f64>],
    vocab: &Vocab,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        version: CHECKPOINT_VERSION.to_string(),
        kind: kind.to_string(),
        dims,
        vocab_hash: vocab_hash(vocab),
        params: names
            .iter()
            .zip(params)
            .map(|(n, p)| ParamInfo { name: n.clone(), shape: vec![p.nrows(), p.ncols()] })
            .collect(),
    };
    let (manifest_path, params_path, vocab_path) = checkpoint_paths(dir);
    atomic_write(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    atomic_write(&params_path, &params_to_f32_bytes(params))?;
    atomic_write(&vocab_path, &serde_json::to_vec_pretty(vocab)?)?;
    Ok(())
}

fn read_checkpoint(dir: &Path, expect_kind: &str) -> Result<(Manifest, Vec<Array2<f64>>, Vocab)> {
    let (manifest_path, params_path, vocab_path) = checkpoint_paths(dir);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version \"{}\" (expected \"{CHECKPOINT_VERSION}\")",
            manifest.version
        )));
    }
    if manifest.kind != expect_kind {
        return Err(Error::Checkpoint(format!(
            "kind mismatch: found \"{}\", expected \"{expect_kind}\"",
            manifest.kind
        )));
    }
    let mut vocab: Vocab = serde_json::from_slice(&fs::read(&vocab_path)?)?;
    vocab.rebuild_index();
    if vocab_hash(&vocab) != manifest.vocab_hash {
        return Err(Error::Checkpoint("vocab hash mismatch".into()));
    }
    let bytes = fs::read(&params_path)?;
    let expected: usize = manifest.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    if bytes.len() != expected * 4 {
        return Err(Error::Checkpoint(format!(
            "params.bin has {} bytes, expected {}",
            bytes.len(),
            expected * 4
        )));
    }
    let mut params = Vec::with_capacity(manifest.params.len());
    let mut offset = 0usize;
    for info in &manifest.params {
        if info.shape.len() != 2 {
            return Err(Error::Checkpoint(format!("param {} is not 2-d", info.name)));
        }
        let (rows, cols) = (info.shape[0], info.shape[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let raw: [u8; 4] = bytes[offset..offset + 4].try_into().unwrap();
            data.push(f32::from_le_bytes(raw) as f64);
            offset += 4;
        }
        params.push(
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
        );
    }
    Ok((manifest, params, vocab))
}

fn dim(dims: &BTreeMap<String, usize>, key: &str) -> Result<usize> {
    dims.get(key).copied().ok_or_else(|| Error::Checkpoint(format!("missing dim \"{key}\"")))
}

pub fn save_classifier(dir: &Path, model: &ClassifierModel, vocab: &Vocab) -> Result<()> {
    let mut dims = BTreeMap::new();
    dims.insert("vocab_size".into(), model.vocab_size);
    dims.insert("dim".into(), model.dim);
    dims.insert("num_classes".into(), model.num_classes);
    dims.insert("max_len".into(), model.max_len);
    let names: Vec<String> = CLASSIFIER_PARAM_NAMES.iter().map(|s| s.to_string()).collect();
    write_checkpoint(dir, "classifier", dims, &names, model.params(), vocab)
}

pub fn load_classifier(dir: &Path) -> Result<(ClassifierModel, Vocab)> {
    let (manifest, params, vocab) = read_checkpoint(dir, "classifier")?;
    let vocab_size = dim(&manifest.dims, "vocab_size")?;
    let d = dim(&manifest.dims, "dim")?;
    let num_classes = dim(&manifest.dims, "num_classes")?;
    let max_len = dim(&manifest.dims, "max_len")?;
    if params.len() != CLASSIFIER_PARAM_NAMES.len()
        || params[0].nrows() != vocab_size
        || params[0].ncols() != d
        || vocab.len() != vocab_size
    {
        return Err(Error::Checkpoint("classifier dims inconsistent with params".into()));
    }
    Ok((ClassifierModel::from_params(vocab_size, d, num_classes, max_len, params), vocab))
}

pub fn save_generator(dir: &Path, model: &GeneratorModel, vocab: &Vocab) -> Result<()> {
    let mut dims = BTreeMap::new();
    dims.insert("vocab_size".into(), model.vocab_size);
    dims.insert("dim".into(), model.dim);
    dims.insert("max_ctx".into(), model.max_ctx);
    dims.insert("hidden".into(), model.hidden);
    let names = GeneratorModel::param_names();
    write_checkpoint(dir, "generator", dims, &names, model.params(), vocab)
}

pub fn load_generator(dir: &Path) -> Result<(GeneratorModel, Vocab)> {
    let (manifest, params, vocab) = read_checkpoint(dir, "generator")?;
    let vocab_size = dim(&manifest.dims, "vocab_size")?;
    let d = dim(&manifest.dims, "dim")?;
    let max_ctx = dim(&manifest.dims, "max_ctx")?;
    let hidden = dim(&manifest.dims, "hidden")?;
    if params.len() != GeneratorModel::param_names().len()
        || params[0].nrows() != vocab_size
        || params[0].ncols() != d
        || vocab.len() != vocab_size
    {
        return Err(Error::Checkpoint("generator dims inconsistent with params".into()));
    }
    Ok((GeneratorModel::from_params(vocab_size, d, max_ctx, hidden, params), vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn vocab() -> Vocab {
        build_vocab(
            &["alpha beta gamma delta".into()],
            &["neg".into(), "pos".into()],
            1,
        )
        .unwrap()
    }

    #[test]
    fn classifier_roundtrip_preserves_f32_values() {
        let v = vocab();
        let model = ClassifierModel::new(v.len(), 8, 2, 16, 9);
        let dir = tempfile::tempdir().unwrap();
        save_classifier(dir.path(), &model, &v).unwrap();
        let (loaded, lv) = load_classifier(dir.path()).unwrap();
        assert_eq!(lv, v);
        for (a, b) in model.params().iter().zip(loaded.params()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn generator_roundtrip_and_kind_check() {
        let v = vocab();
        let model = GeneratorModel::new(v.len(), 8, 24, 10);
        let dir = tempfile::tempdir().unwrap();
        save_generator(dir.path(), &model, &v).unwrap();
        assert!(load_generator(dir.path()).is_ok());
        assert!(load_classifier(dir.path()).is_err());
    }

    #[test]
    fn tampered_vocab_fails_hash_check() {
        let v = vocab();
        let model = ClassifierModel::new(v.len(), 8, 2, 16, 9);
        let dir = tempfile::tempdir().unwrap();
        save_classifier(dir.path(), &model, &v).unwrap();
        let other = build_vocab(
            &["alpha beta gamma zeta".into()],
            &["neg".into(), "pos".into()],
            1,
        )
        .unwrap();
        let vocab_path = dir.path().join("vocab.json");
        std::fs::write(&vocab_path, serde_json::to_vec_pretty(&other).unwrap()).unwrap();
        assert!(load_classifier(dir.path()).is_err());
    }

    #[test]
    fn save_is_deterministic() {
        let v = vocab();
        let model = ClassifierModel::new(v.len(), 8, 2, 16, 9);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        save_classifier(d1.path(), &model, &v).unwrap();
        save_classifier(d2.path(), &model, &v).unwrap();
        for name in ["manifest.json", "params.bin", "vocab.json"] {
            assert_eq!(
                std::fs::read(d1.path().join(name)).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap()
            );
        }
    }
}
