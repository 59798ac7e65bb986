//! Cloud export/import: a `x,y` CSV plus a JSON sidecar carrying the
//! generation parameters.

use super::{CloudMeta, Domain, PointCloud};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    spacing: f64,
    epsilon: f64,
    nx: usize,
    ny: usize,
    seed: u64,
    periodic: [bool; 2],
    origin: [f64; 2],
    size: [f64; 2],
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

pub fn save_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y")?;
    for p in cloud.points() {
        writeln!(w, "{},{}", p[0], p[1])?;
    }
    w.flush()?;
    let meta = cloud.meta.unwrap_or(CloudMeta {
        nx: 0,
        ny: 0,
        seed: 0,
    });
    let sc = Sidecar {
        spacing: cloud.spacing,
        epsilon: cloud.epsilon,
        nx: meta.nx,
        ny: meta.ny,
        seed: meta.seed,
        periodic: cloud.domain.periodic,
        origin: cloud.domain.min,
        size: cloud.domain.size,
    };
    let json = serde_json::to_string_pretty(&sc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_cloud_csv(path: &Path) -> Result<PointCloud> {
    let sc: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::invalid(format!("bad cloud sidecar: {e}")))?;
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut points = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (ln == 0 && t.starts_with('x')) {
            continue;
        }
        let mut it = t.split(',');
        let x: f64 = it
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad CSV row {}", ln + 1)))?;
        let y: f64 = it
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad CSV row {}", ln + 1)))?;
        points.push([x, y]);
    }
    let domain = Domain::new(sc.origin, sc.size, sc.periodic)?;
    let mut cloud = PointCloud::new(points, sc.spacing, sc.epsilon, domain)?;
    cloud.meta = Some(CloudMeta {
        nx: sc.nx,
        ny: sc.ny,
        seed: sc.seed,
    });
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_perturbed_grid;

    #[test]
    fn cloud_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        let cloud = generate_perturbed_grid(9, 7, 0.05, 0.8, 99).unwrap();
        save_cloud_csv(&cloud, &path).unwrap();
        let back = load_cloud_csv(&path).unwrap();
        assert_eq!(back.len(), cloud.len());
        assert_eq!(back.spacing, cloud.spacing);
        assert_eq!(back.epsilon, cloud.epsilon);
        assert_eq!(back.domain, cloud.domain);
        assert_eq!(back.meta, cloud.meta);
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }
}
