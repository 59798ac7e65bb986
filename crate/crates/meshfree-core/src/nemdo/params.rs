//! Flat parameter vector with a slice layout, plus the binary checkpoint
//! format (magic, version, config, parameter count, raw doubles, checksum).

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::taylor::OperatorKind;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceKind {
    Weight,
    Bias,
}

/// One linear layer's slice bookkeeping.
#[derive(Clone, Debug)]
struct LayerSlices {
    rows: usize,
    cols: usize,
    weight: Range<usize>,
    bias: Range<usize>,
}

/// One MLP: `dims[0] -> dims[1] -> ... -> dims.last()`, tanh between all
/// but the final layer.
#[derive(Clone, Debug)]
pub struct MlpLayout {
    pub name: String,
    pub dims: Vec<usize>,
    layers: Vec<LayerSlices>,
}

impl MlpLayout {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        self.layers[layer].weight.clone()
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        self.layers[layer].bias.clone()
    }

    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        (self.layers[layer].rows, self.layers[layer].cols)
    }
}

/// Parameter layout: MLPs in fixed order `emb, msg0, upd0, ..., out`,
/// each layer stored as a row-major (in x out) weight block followed by
/// its bias.
#[derive(Clone, Debug)]
pub struct Layout {
    mlps: Vec<MlpLayout>,
    total: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Layout {
        let f = config.f_h;
        let hidden = vec![f; config.mlp_hidden];
        let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
        let chain = |input: usize, output: usize| -> Vec<usize> {
            let mut dims = vec![input];
            dims.extend_from_slice(&hidden);
            dims.push(output);
            dims
        };
        specs.push(("emb".into(), chain(2, f)));
        for l in 0..config.graph_layers {
            specs.push((format!("msg{l}"), chain(f, f)));
            specs.push((format!("upd{l}"), chain(2 * f, f)));
        }
        specs.push(("out".into(), chain(f, 1)));

        let mut offset = 0usize;
        let mut mlps = Vec::with_capacity(specs.len());
        for (name, dims) in specs {
            let mut layers = Vec::with_capacity(dims.len() - 1);
            for w in dims.windows(2) {
                let (rows, cols) = (w[0], w[1]);
                let weight = offset..offset + rows * cols;
                offset = weight.end;
                let bias = offset..offset + cols;
                offset = bias.end;
                layers.push(LayerSlices {
                    rows,
                    cols,
                    weight,
                    bias,
                });
            }
            mlps.push(MlpLayout { name, dims, layers });
        }
        Layout { mlps, total: offset }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn mlps(&self) -> &[MlpLayout] {
        &self.mlps
    }

    pub fn mlp(&self, name: &str) -> Option<&MlpLayout> {
        self.mlps.iter().find(|m| m.name == name)
    }

    /// Flattened description `(mlp name, layer, kind, slice)`.
    pub fn describe(&self) -> Vec<(String, usize, SliceKind, Range<usize>)> {
        let mut out = Vec::new();
        for m in &self.mlps {
            for (l, s) in m.layers.iter().enumerate() {
                out.push((m.name.clone(), l, SliceKind::Weight, s.weight.clone()));
                out.push((m.name.clone(), l, SliceKind::Bias, s.bias.clone()));
            }
        }
        out
    }
}

/// Flat parameter (or gradient) vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    data: Vec<f64>,
}

impl Parameters {
    pub fn zeros(len: usize) -> Self {
        Parameters {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Parameters { data }
    }

    /// Uniform init on (-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer for
    /// both weights and biases, in layout order.
    pub fn init(layout: &Layout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0f64; layout.total()];
        for m in layout.mlps() {
            for l in 0..m.layer_count() {
                let (fan_in, _) = m.layer_shape(l);
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in &mut data[m.weight_range(l)] {
                    *v = rng.gen_range(-bound..bound);
                }
                for v in &mut data[m.bias_range(l)] {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        Parameters { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"MFNC";
const CHECKPOINT_VERSION: u32 = 1;

fn kind_code(kind: OperatorKind) -> u8 {
    match kind {
        OperatorKind::Dx => 0,
        OperatorKind::Dy => 1,
        OperatorKind::Laplacian => 2,
        OperatorKind::Hyperviscous => 3,
    }
}

fn kind_from_code(code: u8) -> Result<OperatorKind> {
    Ok(match code {
        0 => OperatorKind::Dx,
        1 => OperatorKind::Dy,
        2 => OperatorKind::Laplacian,
        3 => OperatorKind::Hyperviscous,
        other => {
            return Err(Error::IncompatibleCheckpoint(format!(
                "unknown operator code {other}"
            )))
        }
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn checkpoint_save(path: &Path, config: &ModelConfig, params: &Parameters) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(64 + 8 * params.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.stencil_n as u32).to_le_bytes());
    buf.extend_from_slice(&(config.order_p as u32).to_le_bytes());
    buf.push(kind_code(config.kind));
    buf.extend_from_slice(&(config.f_h as u32).to_le_bytes());
    buf.extend_from_slice(&(config.graph_layers as u32).to_le_bytes());
    buf.extend_from_slice(&(config.mlp_hidden as u32).to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = fnv1a(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<(ModelConfig, Parameters)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| Error::IncompatibleCheckpoint(format!("{}: {msg}", path.display()));
    if bytes.len() < 4 + 4 + 4 + 4 + 1 + 4 + 4 + 4 + 8 + 8 {
        return Err(fail("file too short"));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(fail("bad magic bytes"));
    }
    let payload_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[payload_end..].try_into().unwrap());
    if fnv1a(&bytes[..payload_end]) != stored {
        return Err(fail("checksum mismatch (truncated or corrupted)"));
    }
    let mut cur = 4usize;
    let mut take_u32 = |bytes: &[u8]| -> u32 {
        let v = u32::from_le_bytes(bytes[cur..cur + 4].try_into().unwrap());
        cur += 4;
        v
    };
    let version = take_u32(&bytes);
    if version != CHECKPOINT_VERSION {
        return Err(fail(&format!("unsupported format version {version}")));
    }
    let stencil_n = take_u32(&bytes) as usize;
    let order_p = take_u32(&bytes) as usize;
    let kind = kind_from_code(bytes[cur])?;
    cur += 1;
    let mut take_u32b = |bytes: &[u8]| -> u32 {
        let v = u32::from_le_bytes(bytes[cur..cur + 4].try_into().unwrap());
        cur += 4;
        v
    };
    let f_h = take_u32b(&bytes) as usize;
    let graph_layers = take_u32b(&bytes) as usize;
    let mlp_hidden = take_u32b(&bytes) as usize;
    let count = u64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap()) as usize;
    cur += 8;
    if payload_end - cur != 8 * count {
        return Err(fail("parameter payload length mismatch"));
    }
    let config = ModelConfig {
        stencil_n,
        order_p,
        kind,
        f_h,
        graph_layers,
        mlp_hidden,
    };
    let expected = Layout::new(&config).total();
    if count != expected {
        return Err(fail(&format!(
            "parameter count {count} does not match config ({expected} expected)"
        )));
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let v = f64::from_le_bytes(bytes[cur + 8 * i..cur + 8 * i + 8].try_into().unwrap());
        data.push(v);
    }
    Ok((config, Parameters::from_vec(data)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig {
            stencil_n: 6,
            order_p: 2,
            kind: OperatorKind::Dx,
            f_h: 8,
            graph_layers: 2,
            mlp_hidden: 1,
        }
    }

    #[test]
    fn layout_slices_are_disjoint_and_cover_everything() {
        let layout = Layout::new(&small_config());
        let mut seen = vec![false; layout.total()];
        for (_, _, _, range) in layout.describe() {
            for i in range {
                assert!(!seen[i], "overlapping slice at {i}");
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s), "layout leaves gaps");
    }

    #[test]
    fn layout_matches_the_small_reference_size() {
        // n=10, F_h=32, 2 graph layers, 1 hidden layer
        let config = ModelConfig::small(OperatorKind::Dx);
        let layout = Layout::new(&config);
        // emb 2->32->32, per layer msg 32->32->32 and upd 64->32->32, out 32->32->1
        let emb = (2 * 32 + 32) + (32 * 32 + 32);
        let msg = (32 * 32 + 32) * 2;
        let upd = (64 * 32 + 32) + (32 * 32 + 32);
        let out = (32 * 32 + 32) + 33;
        assert_eq!(layout.total(), emb + 2 * (msg + upd) + out);
    }

    #[test]
    fn init_respects_fan_in_bounds_and_is_deterministic() {
        let layout = Layout::new(&small_config());
        let a = Parameters::init(&layout, 42);
        let b = Parameters::init(&layout, 42);
        assert_eq!(a, b);
        let emb = layout.mlp("emb").unwrap();
        let bound = 1.0 / (2f64).sqrt();
        for &v in &a.as_slice()[emb.weight_range(0)] {
            assert!(v.abs() < bound);
        }
        let upd = layout.mlp("upd0").unwrap();
        let bound = 1.0 / (16f64).sqrt();
        for &v in &a.as_slice()[upd.weight_range(0)] {
            assert!(v.abs() < bound);
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = small_config();
        let layout = Layout::new(&config);
        let params = Parameters::init(&layout, 3);
        checkpoint_save(&path, &config, &params).unwrap();
        let (config2, params2) = checkpoint_load(&path).unwrap();
        assert_eq!(config, config2);
        assert_eq!(params, params2);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = small_config();
        let params = Parameters::init(&Layout::new(&config), 3);
        checkpoint_save(&path, &config, &params).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 13]).unwrap();
        assert!(matches!(
            checkpoint_load(&path),
            Err(Error::IncompatibleCheckpoint(_))
        ));
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = small_config();
        let params = Parameters::init(&Layout::new(&config), 3);
        checkpoint_save(&path, &config, &params).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            checkpoint_load(&path),
            Err(Error::IncompatibleCheckpoint(_))
        ));
    }
}
