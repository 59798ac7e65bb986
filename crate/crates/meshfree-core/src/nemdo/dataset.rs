//! Training datasets: normalized stencils sampled from independently
//! perturbed periodic clouds, stored as a packed binary file
//! (header + offset pairs).

use crate::error::{Error, Result};
use crate::geometry::{generate_perturbed_grid, NormalizedStencil};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const DATASET_MAGIC: &[u8; 4] = b"MFDS";
const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub stencil_n: usize,
    pub order_p: usize,
    pub epsilon: f64,
    pub stencils: Vec<NormalizedStencil>,
}

pub struct DatasetSplits<'a> {
    pub train: Vec<&'a NormalizedStencil>,
    pub val: Vec<&'a NormalizedStencil>,
    pub test: Vec<&'a NormalizedStencil>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Deterministic contiguous split; generation already shuffles across
    /// clouds so contiguous ranges are unbiased.
    pub fn split(&self, train_frac: f64, val_frac: f64) -> Result<DatasetSplits<'_>> {
        if !(0.0..1.0).contains(&train_frac) || !(0.0..1.0).contains(&val_frac) {
            return Err(Error::invalid("split fractions must lie in (0, 1)"));
        }
        if train_frac + val_frac >= 1.0 {
            return Err(Error::invalid("train + val fractions must leave room for test"));
        }
        let n = self.len();
        let n_train = (n as f64 * train_frac).round() as usize;
        let n_val = (n as f64 * val_frac).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::invalid(format!(
                "dataset of {n} stencils is too small for the requested split"
            )));
        }
        Ok(DatasetSplits {
            train: self.stencils[..n_train].iter().collect(),
            val: self.stencils[n_train..n_train + n_val].iter().collect(),
            test: self.stencils[n_train + n_val..].iter().collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(self.stencil_n as u32).to_le_bytes())?;
        w.write_all(&(self.order_p as u32).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        w.write_all(&(self.stencils.len() as u64).to_le_bytes())?;
        for st in &self.stencils {
            for o in &st.offsets_hat {
                w.write_all(&o[0].to_le_bytes())?;
                w.write_all(&o[1].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut head = [0u8; 4 + 4 + 4 + 4 + 8 + 8];
        r.read_exact(&mut head)
            .map_err(|_| Error::invalid(format!("{}: truncated dataset header", path.display())))?;
        if &head[..4] != DATASET_MAGIC {
            return Err(Error::invalid(format!(
                "{}: not a dataset file",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != DATASET_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported dataset version {version}",
                path.display()
            )));
        }
        let stencil_n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let order_p = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        let epsilon = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let count = u64::from_le_bytes(head[24..32].try_into().unwrap()) as usize;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected = count * stencil_n * 2 * 8;
        if payload.len() != expected {
            return Err(Error::invalid(format!(
                "{}: dataset payload is {} bytes, expected {expected}",
                path.display(),
                payload.len()
            )));
        }
        let mut stencils = Vec::with_capacity(count);
        let mut cursor = 0usize;
        let mut read_f64 = |payload: &[u8]| {
            let v = f64::from_le_bytes(payload[cursor..cursor + 8].try_into().unwrap());
            cursor += 8;
            v
        };
        for _ in 0..count {
            let mut offsets_hat = Vec::with_capacity(stencil_n);
            for _ in 0..stencil_n {
                let x = read_f64(&payload);
                let y = read_f64(&payload);
                offsets_hat.push([x, y]);
            }
            stencils.push(NormalizedStencil {
                offsets_hat,
                d_n: 1.0,
            });
        }
        Ok(Dataset {
            stencil_n,
            order_p,
            epsilon,
            stencils,
        })
    }
}

/// Sample `count` normalized stencils from as many independently seeded
/// periodic clouds as needed, then shuffle so contiguous splits mix
/// clouds.
pub fn generate_dataset(
    nx: usize,
    ny: usize,
    spacing: f64,
    epsilon: f64,
    stencil_n: usize,
    order_p: usize,
    count: usize,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::invalid("dataset size must be positive"));
    }
    let per_cloud = nx * ny;
    if stencil_n >= per_cloud {
        return Err(Error::invalid(
            "stencil size must be smaller than the cloud size",
        ));
    }
    let clouds = count.div_ceil(per_cloud);
    let mut stencils = Vec::with_capacity(clouds * per_cloud);
    for c in 0..clouds {
        let cloud_seed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(c as u64 + 1);
        let cloud = generate_perturbed_grid(nx, ny, spacing, epsilon, cloud_seed)?;
        for i in 0..cloud.len() {
            stencils.push(cloud.knn_stencil(i, stencil_n)?.normalize()?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1b54a32d192ed03);
    stencils.shuffle(&mut rng);
    stencils.truncate(count);
    Ok(Dataset {
        stencil_n,
        order_p,
        epsilon,
        stencils,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_counts_and_determinism() {
        let a = generate_dataset(16, 16, 0.0625, 1.0, 10, 2, 300, 5).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.stencils.iter().all(|s| s.len() == 10));
        let b = generate_dataset(16, 16, 0.0625, 1.0, 10, 2, 300, 5).unwrap();
        for (x, y) in a.stencils.iter().zip(&b.stencils) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn zero_noise_stencils_are_grid_translates() {
        let d = generate_dataset(12, 12, 0.1, 0.0, 8, 2, 100, 1).unwrap();
        let first = &d.stencils[0];
        for st in &d.stencils[1..] {
            let mut sorted_a: Vec<_> = first
                .offsets_hat
                .iter()
                .map(|o| (o[0] * 1e12) as i64 * 10_000_000 + (o[1] * 1e12) as i64 % 10_000_000)
                .collect();
            let mut sorted_b: Vec<_> = st
                .offsets_hat
                .iter()
                .map(|o| (o[0] * 1e12) as i64 * 10_000_000 + (o[1] * 1e12) as i64 % 10_000_000)
                .collect();
            sorted_a.sort_unstable();
            sorted_b.sort_unstable();
            assert_eq!(sorted_a, sorted_b, "stencils differ beyond reordering");
        }
    }

    #[test]
    fn dataset_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.mfds");
        let d = generate_dataset(16, 16, 0.05, 0.7, 12, 2, 200, 9).unwrap();
        d.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back.stencil_n, 12);
        assert_eq!(back.order_p, 2);
        assert_eq!(back.epsilon, 0.7);
        assert_eq!(back.len(), 200);
        for (a, b) in back.stencils.iter().zip(&d.stencils) {
            for (p, q) in a.offsets_hat.iter().zip(&b.offsets_hat) {
                assert_eq!(p[0].to_bits(), q[0].to_bits());
                assert_eq!(p[1].to_bits(), q[1].to_bits());
            }
        }
    }

    #[test]
    fn split_fractions_are_validated() {
        let d = generate_dataset(12, 12, 0.1, 0.5, 8, 2, 100, 2).unwrap();
        let s = d.split(0.8, 0.1).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.val.len(), 10);
        assert_eq!(s.test.len(), 10);
        assert!(d.split(0.9, 0.2).is_err());
    }
}
