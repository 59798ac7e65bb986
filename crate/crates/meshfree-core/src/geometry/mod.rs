//! Point clouds, neighborhoods and stencil normalization.
//!
//! Clouds are perturbed Cartesian grids: each node of a regular grid with
//! spacing `s` is displaced per coordinate by i.i.d. uniform noise on
//! `(-eps*s/2, +eps*s/2)`. A cloud is immutable after construction; stencil
//! queries are read-only and safe to run concurrently.

mod io;
mod search;

pub use io::{load_cloud_csv, save_cloud_csv};

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use search::CellGrid;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[inline]
pub fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Axis-aligned rectangular domain with a periodic flag per axis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Domain {
    pub min: Point,
    pub size: Point,
    pub periodic: [bool; 2],
}

impl Domain {
    pub fn new(min: Point, size: Point, periodic: [bool; 2]) -> Result<Self> {
        if size[0] <= 0.0 || size[1] <= 0.0 {
            return Err(Error::invalid("domain size must be positive"));
        }
        Ok(Domain {
            min,
            size,
            periodic,
        })
    }

    /// Wrap a point into `[min, min+size)` along periodic axes.
    pub fn wrap(&self, mut p: Point) -> Point {
        for a in 0..2 {
            if self.periodic[a] {
                let rel = (p[a] - self.min[a]).rem_euclid(self.size[a]);
                p[a] = self.min[a] + rel;
            }
        }
        p
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|a| p[a] >= self.min[a] && p[a] <= self.min[a] + self.size[a])
    }

    /// Minimum-image displacement `to - from`.
    #[inline]
    pub fn min_image(&self, from: Point, to: Point) -> Point {
        let mut d = [to[0] - from[0], to[1] - from[1]];
        for a in 0..2 {
            if self.periodic[a] {
                d[a] -= self.size[a] * (d[a] / self.size[a]).round();
            }
        }
        d
    }
}

/// Generation metadata carried along for the JSON sidecar.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CloudMeta {
    pub nx: usize,
    pub ny: usize,
    pub seed: u64,
}

/// Immutable set of collocation points with a uniform cell grid for
/// neighborhood queries.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: Vec<Point>,
    pub spacing: f64,
    pub epsilon: f64,
    pub domain: Domain,
    pub meta: Option<CloudMeta>,
    grid: CellGrid,
}

impl PointCloud {
    /// Build a cloud from raw points. Points on periodic axes are wrapped
    /// into the domain; exact duplicates are rejected since zero-length
    /// offsets break kernels and normalization.
    pub fn new(points: Vec<Point>, spacing: f64, epsilon: f64, domain: Domain) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::invalid("spacing must be positive"));
        }
        if epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        if points.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        let points: Vec<Point> = points.into_iter().map(|p| domain.wrap(p)).collect();
        for (i, p) in points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::invalid(format!("non-finite point at index {i}")));
            }
            if !domain.contains(*p) {
                return Err(Error::invalid(format!(
                    "point {i} at ({}, {}) lies outside the domain",
                    p[0], p[1]
                )));
            }
        }
        let mut seen = std::collections::HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if let Some(j) = seen.insert((p[0].to_bits(), p[1].to_bits()), i) {
                return Err(Error::invalid(format!("duplicate points at indices {j} and {i}")));
            }
        }
        let grid = CellGrid::build(&points, &domain, spacing);
        Ok(PointCloud {
            points,
            spacing,
            epsilon,
            domain,
            meta: None,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    /// Minimum-image offset from node `i` to node `j`.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> Point {
        self.domain.min_image(self.points[i], self.points[j])
    }

    /// Distance from a point to the nearest non-periodic domain boundary.
    /// Returns +inf when both axes are periodic.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..2 {
            if !self.domain.periodic[a] {
                let lo = p[a] - self.domain.min[a];
                let hi = self.domain.min[a] + self.domain.size[a] - p[a];
                d = d.min(lo).min(hi);
            }
        }
        d
    }

    /// Stencil of the `n` nearest neighbors of `center`, sorted ascending by
    /// minimum-image distance with ties broken by node index.
    pub fn knn_stencil(&self, center: usize, n: usize) -> Result<Stencil> {
        if n == 0 {
            return Err(Error::invalid("stencil size must be at least 1"));
        }
        if n >= self.len() {
            return Err(Error::invalid(format!(
                "requested {n} neighbors from a cloud of {} points",
                self.len()
            )));
        }
        let pairs = self.grid.knn(&self.points, &self.domain, center, n);
        self.build_stencil(center, pairs)
    }

    /// Stencil of all nodes within `radius` of `center` (excluding the
    /// center itself), sorted by distance then index.
    pub fn radius_stencil(&self, center: usize, radius: f64) -> Result<Stencil> {
        if radius <= 0.0 {
            return Err(Error::invalid("search radius must be positive"));
        }
        for a in 0..2 {
            if self.domain.periodic[a] && radius > 0.5 * self.domain.size[a] {
                return Err(Error::invalid(
                    "search radius exceeds half the periodic domain extent",
                ));
            }
        }
        let pairs = self.grid.radius(&self.points, &self.domain, center, radius);
        self.build_stencil(center, pairs)
    }

    fn build_stencil(&self, center: usize, pairs: Vec<(f64, usize)>) -> Result<Stencil> {
        let mut neighbors = Vec::with_capacity(pairs.len());
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut d_n: f64 = 0.0;
        for (d, j) in pairs {
            if d == 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "zero-length offset between nodes {center} and {j}"
                )));
            }
            neighbors.push(j);
            offsets.push(self.offset(center, j));
            d_n = d_n.max(d);
        }
        for a in 0..2 {
            if self.domain.periodic[a] && d_n > 0.5 * self.domain.size[a] {
                return Err(Error::invalid(
                    "stencil extent exceeds half the periodic domain; minimum image is ambiguous",
                ));
            }
        }
        Ok(Stencil {
            center,
            neighbors,
            offsets,
            d_n,
        })
    }
}

/// Local neighborhood of a node: neighbor indices and minimum-image offsets
/// `x_ji`, with `d_n` the distance to the farthest retained neighbor.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub offsets: Vec<Point>,
    pub d_n: f64,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Rescale all offsets by the farthest-neighbor distance so that the
    /// largest offset has unit norm.
    pub fn normalize(&self) -> Result<NormalizedStencil> {
        if self.is_empty() {
            return Err(Error::DegenerateGeometry("empty stencil".into()));
        }
        if self.d_n <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "stencil has zero extent; cannot normalize".into(),
            ));
        }
        let offsets_hat = self
            .offsets
            .iter()
            .map(|o| [o[0] / self.d_n, o[1] / self.d_n])
            .collect();
        Ok(NormalizedStencil {
            offsets_hat,
            d_n: self.d_n,
        })
    }
}

/// Stencil offsets divided by `d_n`; the scale is retained so physical
/// weights can be recovered.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedStencil {
    pub offsets_hat: Vec<Point>,
    pub d_n: f64,
}

impl NormalizedStencil {
    pub fn len(&self) -> usize {
        self.offsets_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets_hat.is_empty()
    }
}

/// Recipe for a perturbed Cartesian grid cloud.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub origin: Point,
    pub periodic: [bool; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, spacing: f64, epsilon: f64, seed: u64) -> Self {
        GridSpec {
            nx,
            ny,
            spacing,
            epsilon,
            seed,
            origin: [0.0, 0.0],
            periodic: [true, true],
        }
    }

    pub fn with_origin(mut self, origin: Point) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_periodic(mut self, periodic: [bool; 2]) -> Self {
        self.periodic = periodic;
        self
    }

    /// Generate the cloud. Nodes sit at cell centers `origin + (i+1/2)s`
    /// before perturbation; the draw order is row-major so a fixed seed
    /// yields a bit-identical cloud.
    pub fn generate(&self) -> Result<PointCloud> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::invalid("grid must be at least 2x2"));
        }
        if self.spacing <= 0.0 {
            return Err(Error::invalid("spacing must be positive"));
        }
        if self.epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        let s = self.spacing;
        let half = 0.5 * self.epsilon * s;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let mut p = [
                    self.origin[0] + (ix as f64 + 0.5) * s,
                    self.origin[1] + (iy as f64 + 0.5) * s,
                ];
                if half > 0.0 {
                    p[0] += rng.gen_range(-half..half);
                    p[1] += rng.gen_range(-half..half);
                }
                points.push(p);
            }
        }
        let domain = Domain::new(
            self.origin,
            [self.nx as f64 * s, self.ny as f64 * s],
            self.periodic,
        )?;
        let mut cloud = PointCloud::new(points, s, self.epsilon, domain)?;
        cloud.meta = Some(CloudMeta {
            nx: self.nx,
            ny: self.ny,
            seed: self.seed,
        });
        Ok(cloud)
    }
}

/// Periodic perturbed grid on `[0, nx*s] x [0, ny*s]`.
pub fn generate_perturbed_grid(
    nx: usize,
    ny: usize,
    spacing: f64,
    epsilon: f64,
    seed: u64,
) -> Result<PointCloud> {
    GridSpec::new(nx, ny, spacing, epsilon, seed).generate()
}
