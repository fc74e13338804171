//! Checkpoint persistence.
//!
//! Binary layout: the magic bytes `FBCKPT`, a little-endian u32 format
//! version, a length-prefixed plain-text architecture descriptor, a u32
//! tensor count, then per-tensor records of
//! `(name_len, name, rank, dims..., f64-le data)` and a length-prefixed
//! plain-text metadata block. Tensors are stored in f64 regardless of the
//! run's compute precision. Writes go to a temp file renamed into place so
//! readers never observe a partial checkpoint.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CheckpointError;
use crate::nn::{LayerParams, NetworkArchitecture, Parameters};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"FBCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Run provenance stored alongside the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub frame: u64,
    pub flavour: String,
    pub seed: u64,
    pub lambda_l2: f64,
    pub p_conv: f64,
    pub p_fc: f64,
    pub created_unix: u64,
    /// Fine-tuning provenance: path of the source checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_scheme: Option<String>,
    /// Whether regularization stayed active during the fine-tuning run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_active_in_finetune: Option<bool>,
}

/// A parameter snapshot plus everything needed to reuse it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub arch: NetworkArchitecture,
    pub params: Parameters<f64>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// Rejects use under a different architecture, naming the first layer
    /// that disagrees.
    pub fn ensure_arch(&self, expected: &NetworkArchitecture) -> Result<(), CheckpointError> {
        if self.arch == *expected {
            return Ok(());
        }
        let ours = self.arch.layer_names();
        let theirs = expected.layer_names();
        let layer = ours
            .iter()
            .zip(theirs.iter())
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .or_else(|| {
                let a = self.arch.parameter_shapes().ok()?;
                let b = expected.parameter_shapes().ok()?;
                ours.iter()
                    .zip(a.iter().zip(b.iter()))
                    .find(|(_, (x, y))| x != y)
                    .map(|(n, _)| n.clone())
            })
            .unwrap_or_else(|| "input".to_string());
        Err(CheckpointError::ArchMismatch(layer))
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_block(out: &mut Vec<u8>, text: &str) {
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

fn write_tensor(out: &mut Vec<u8>, name: &str, tensor: &Tensor<f64>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
    for dim in tensor.shape() {
        out.extend_from_slice(&(*dim as u32).to_le_bytes());
    }
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes and atomically writes a checkpoint.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let expected = Parameters::<f64>::zeros(&checkpoint.arch)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if !checkpoint.params.same_layout(&expected) {
        return Err(CheckpointError::ArchMismatch(
            checkpoint
                .params
                .names()
                .next()
                .unwrap_or("<empty>")
                .to_string(),
        ));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let descriptor = toml::to_string(&checkpoint.arch)
        .map_err(|e| CheckpointError::Corrupt(format!("descriptor serialization: {e}")))?;
    write_block(&mut out, &descriptor);
    out.extend_from_slice(&(2 * checkpoint.params.len() as u32).to_le_bytes());
    for (name, lp) in checkpoint.params.iter() {
        write_tensor(&mut out, &format!("{name}.weight"), &lp.weights);
        write_tensor(&mut out, &format!("{name}.bias"), &lp.biases);
    }
    let meta = toml::to_string(&checkpoint.meta)
        .map_err(|e| CheckpointError::Corrupt(format!("metadata serialization: {e}")))?;
    write_block(&mut out, &meta);

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(path))?;
        }
    }
    let tmp: PathBuf = path.with_extension("fbckpt.tmp");
    fs::write(&tmp, &out).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!(
                "unexpected end of file at byte {} (wanted {} more)",
                self.pos, n
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        if len > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!(
                "text block length {len} exceeds file size"
            )));
        }
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|e| CheckpointError::Corrupt(format!("invalid utf-8 block: {e}")))
    }
}

/// Reads and validates a checkpoint; shapes are checked against the
/// descriptor before any `Checkpoint` is returned.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut file = fs::File::open(path).map_err(io_err(path))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(io_err(path))?;
    let mut r = Reader { buf: &buf, pos: 0 };

    if r.take(6)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version > FORMAT_VERSION {
        return Err(CheckpointError::VersionTooNew {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let descriptor = r.text()?;
    let arch: NetworkArchitecture = toml::from_str(&descriptor)
        .map_err(|e| CheckpointError::Corrupt(format!("architecture descriptor: {e}")))?;
    arch.validate()
        .map_err(|e| CheckpointError::Corrupt(format!("invalid architecture: {e}")))?;

    let tensor_count = r.u32()? as usize;
    let names = arch.layer_names();
    let shapes = arch
        .parameter_shapes()
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if tensor_count != 2 * names.len() {
        return Err(CheckpointError::Corrupt(format!(
            "expected {} tensors for this architecture, file declares {}",
            2 * names.len(),
            tensor_count
        )));
    }

    let mut entries: Vec<(String, LayerParams<f64>)> = Vec::with_capacity(names.len());
    for (name, (w_shape, b_shape)) in names.iter().zip(&shapes) {
        let mut read_tensor = |expected_name: String,
                               expected_shape: &[usize]|
         -> Result<Tensor<f64>, CheckpointError> {
            let r = &mut r;
            let name_len = r.u32()? as usize;
            let got_name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| CheckpointError::Corrupt(format!("tensor name: {e}")))?;
            if got_name != expected_name {
                return Err(CheckpointError::Corrupt(format!(
                    "expected tensor `{expected_name}`, found `{got_name}`"
                )));
            }
            let rank = r.u32()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()? as usize);
            }
            if dims != expected_shape {
                return Err(CheckpointError::TensorShapeMismatch {
                    name: got_name,
                    expected: expected_shape.to_vec(),
                    got: dims,
                });
            }
            let count: usize = dims.iter().product();
            let raw = r.take(count * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Tensor::from_vec(&dims, data))
        };
        let weights = read_tensor(format!("{name}.weight"), w_shape)?;
        let biases = read_tensor(format!("{name}.bias"), b_shape)?;
        entries.push((name.clone(), LayerParams { weights, biases }));
    }

    let meta_text = r.text()?;
    let meta: CheckpointMeta = toml::from_str(&meta_text)
        .map_err(|e| CheckpointError::Corrupt(format!("metadata block: {e}")))?;

    Ok(Checkpoint {
        arch,
        params: Parameters::from_entries(entries),
        meta,
    })
}

/// Writes raw bytes then renames, for tests that need corrupt files.
#[cfg(test)]
pub(crate) fn write_raw(path: &Path, bytes: &[u8]) {
    let mut f = fs::File::create(path).unwrap();
    f.write_all(bytes).unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{network_profile, xavier_init};
    use crate::rng::Rng;

    fn sample_checkpoint() -> Checkpoint {
        let arch = network_profile("desk-default", (4, 7, 9), 3).unwrap();
        let params = xavier_init::<f64>(&arch, &mut Rng::from_seed(42)).unwrap();
        Checkpoint {
            arch,
            params,
            meta: CheckpointMeta {
                frame: 120_000,
                flavour: "mini_crossing:m1d1".into(),
                seed: 9,
                lambda_l2: 1e-4,
                p_conv: 0.05,
                p_fc: 0.1,
                created_unix: 1_700_000_000,
                transfer_source: None,
                transfer_scheme: None,
                reg_active_in_finetune: None,
            },
        }
    }

    fn param_bits(params: &Parameters<f64>) -> Vec<u64> {
        params
            .iter()
            .flat_map(|(_, lp)| {
                lp.weights
                    .data()
                    .iter()
                    .chain(lp.biases.data())
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt").join("120000.fbckpt");
        let ckpt = sample_checkpoint();
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(param_bits(&ckpt.params), param_bits(&loaded.params));
        assert_eq!(loaded.meta, ckpt.meta);
        assert_eq!(loaded.arch, ckpt.arch);
        // No stray temp file once the rename lands.
        assert!(!path.with_extension("fbckpt.tmp").exists());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fbckpt");
        write_raw(&path, b"NOTANYCKPTFORMAT____________");
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn newer_version_rejected_with_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.fbckpt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&(FORMAT_VERSION + 5).to_le_bytes());
        write_raw(&path, &bytes);
        match load_checkpoint(&path) {
            Err(e @ CheckpointError::VersionTooNew { found, supported }) => {
                assert_eq!(found, FORMAT_VERSION + 5);
                assert_eq!(supported, FORMAT_VERSION);
                let msg = e.to_string();
                assert!(msg.contains(&format!("{found}")) && msg.contains(&format!("{supported}")));
            }
            other => panic!("expected VersionTooNew, got {other:?}"),
        }
    }

    #[test]
    fn truncation_never_yields_partial_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.fbckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let cut_path = dir.path().join("cut.fbckpt");
        // Every prefix in the header region, then a stride through the body.
        let cuts = (0..64.min(bytes.len()))
            .chain((64..bytes.len()).step_by(257))
            .collect::<Vec<_>>();
        for cut in cuts {
            write_raw(&cut_path, &bytes[..cut]);
            assert!(
                load_checkpoint(&cut_path).is_err(),
                "truncation at {cut} bytes must fail cleanly"
            );
        }
    }

    #[test]
    fn shape_mismatch_names_tensor() {
        // Corrupt one dim of conv2.weight in place.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("warp.fbckpt");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let needle = b"conv2.weight";
        let at = bytes
            .windows(needle.len())
            .position(|w| w == needle)
            .unwrap();
        // Layout after the name: rank u32, then dims.
        let dim0 = at + needle.len() + 4;
        bytes[dim0..dim0 + 4].copy_from_slice(&99u32.to_le_bytes());
        write_raw(&path, &bytes);
        match load_checkpoint(&path) {
            Err(CheckpointError::TensorShapeMismatch { name, .. }) => {
                assert_eq!(name, "conv2.weight")
            }
            other => panic!("expected TensorShapeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn metadata_flavour_survives() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.fbckpt");
        let mut ckpt = sample_checkpoint();
        ckpt.meta.transfer_source = Some("runs/src/ckpt/100000.fbckpt".into());
        ckpt.meta.transfer_scheme = Some("conv3".into());
        ckpt.meta.reg_active_in_finetune = Some(true);
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.meta.flavour, "mini_crossing:m1d1");
        assert_eq!(loaded.meta.transfer_scheme.as_deref(), Some("conv3"));
        assert_eq!(loaded.meta.reg_active_in_finetune, Some(true));
    }

    #[test]
    fn arch_guard_names_layer() {
        let ckpt = sample_checkpoint();
        let other = network_profile("desk-default", (6, 7, 9), 3).unwrap();
        match ckpt.ensure_arch(&other) {
            Err(CheckpointError::ArchMismatch(layer)) => assert_eq!(layer, "conv1"),
            other => panic!("expected ArchMismatch, got {other:?}"),
        }
        ckpt.ensure_arch(&ckpt.arch).unwrap();
    }
}
