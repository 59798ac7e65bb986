//! Uniform cell grid for neighbor queries.
//!
//! Cell size is tied to the mean spacing, which is near-optimal for the
//! perturbed-grid clouds this crate works with. Queries expand outward in
//! Chebyshev rings of cells; a ring is conclusive once the current k-th
//! best distance is below the guaranteed minimum distance of any unvisited
//! cell. Small clouds (or rings that would wrap all the way around a
//! periodic axis) fall back to a full scan, which keeps the wrap logic
//! trivially correct.

use super::{norm, Domain, Point};

#[derive(Clone, Debug)]
pub(super) struct CellGrid {
    ncells: [usize; 2],
    cell: [f64; 2],
    /// CSR layout: `starts[c]..starts[c+1]` indexes into `entries`.
    starts: Vec<usize>,
    entries: Vec<usize>,
}

impl CellGrid {
    pub fn build(points: &[Point], domain: &Domain, spacing: f64) -> Self {
        let ncells = [
            ((domain.size[0] / spacing).floor() as usize).max(1),
            ((domain.size[1] / spacing).floor() as usize).max(1),
        ];
        let cell = [
            domain.size[0] / ncells[0] as f64,
            domain.size[1] / ncells[1] as f64,
        ];
        let ntot = ncells[0] * ncells[1];
        let mut counts = vec![0usize; ntot + 1];
        let cell_of = |p: &Point| -> usize {
            let cx = (((p[0] - domain.min[0]) / cell[0]) as usize).min(ncells[0] - 1);
            let cy = (((p[1] - domain.min[1]) / cell[1]) as usize).min(ncells[1] - 1);
            cy * ncells[0] + cx
        };
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for c in 0..ntot {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut cursor = counts;
        let mut entries = vec![0usize; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            entries[cursor[c]] = i;
            cursor[c] += 1;
        }
        CellGrid {
            ncells,
            cell,
            starts,
            entries,
        }
    }

    fn cell_coords(&self, domain: &Domain, p: &Point) -> [i64; 2] {
        [
            (((p[0] - domain.min[0]) / self.cell[0]) as i64).min(self.ncells[0] as i64 - 1),
            (((p[1] - domain.min[1]) / self.cell[1]) as i64).min(self.ncells[1] as i64 - 1),
        ]
    }

    fn cell_slice(&self, cx: usize, cy: usize) -> &[usize] {
        let c = cy * self.ncells[0] + cx;
        &self.entries[self.starts[c]..self.starts[c + 1]]
    }

    /// Visit every point in cells at Chebyshev ring `ring` around `base`,
    /// or return false when the ring cannot be enumerated without wrapping
    /// around a periodic axis more than once.
    fn for_ring(
        &self,
        domain: &Domain,
        base: [i64; 2],
        ring: i64,
        mut visit: impl FnMut(usize),
    ) -> bool {
        let span = 2 * ring + 1;
        if span > self.ncells[0] as i64 || span > self.ncells[1] as i64 {
            return false;
        }
        let mut cells: Vec<(i64, i64)> = Vec::new();
        if ring == 0 {
            cells.push((0, 0));
        } else {
            for dx in -ring..=ring {
                cells.push((dx, -ring));
                cells.push((dx, ring));
            }
            for dy in (-ring + 1)..ring {
                cells.push((-ring, dy));
                cells.push((ring, dy));
            }
        }
        for (dx, dy) in cells {
            let mut cx = base[0] + dx;
            let mut cy = base[1] + dy;
            if domain.periodic[0] {
                cx = cx.rem_euclid(self.ncells[0] as i64);
            } else if cx < 0 || cx >= self.ncells[0] as i64 {
                continue;
            }
            if domain.periodic[1] {
                cy = cy.rem_euclid(self.ncells[1] as i64);
            } else if cy < 0 || cy >= self.ncells[1] as i64 {
                continue;
            }
            for &i in self.cell_slice(cx as usize, cy as usize) {
                visit(i);
            }
        }
        true
    }

    /// `n` nearest neighbors of `center`, sorted by (distance, index).
    pub fn knn(
        &self,
        points: &[Point],
        domain: &Domain,
        center: usize,
        n: usize,
    ) -> Vec<(f64, usize)> {
        let p = points[center];
        let base = self.cell_coords(domain, &p);
        let min_cell = self.cell[0].min(self.cell[1]);
        let mut cands: Vec<(f64, usize)> = Vec::with_capacity(4 * n);
        let mut ring: i64 = 0;
        loop {
            let ok = self.for_ring(domain, base, ring, |j| {
                if j != center {
                    cands.push((norm(domain.min_image(p, points[j])), j));
                }
            });
            if !ok {
                return self.scan_all(points, domain, center, n);
            }
            if cands.len() >= n {
                // kth-best so far; conclusive if no unvisited cell can beat it
                let kth = {
                    let mut ds: Vec<f64> = cands.iter().map(|c| c.0).collect();
                    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ds[n - 1]
                };
                if kth <= ring as f64 * min_cell {
                    break;
                }
            }
            ring += 1;
        }
        sort_pairs(&mut cands);
        cands.truncate(n);
        cands
    }

    /// All neighbors within `radius`, sorted by (distance, index).
    pub fn radius(
        &self,
        points: &[Point],
        domain: &Domain,
        center: usize,
        radius: f64,
    ) -> Vec<(f64, usize)> {
        let p = points[center];
        let base = self.cell_coords(domain, &p);
        let reach = (radius / self.cell[0].min(self.cell[1])).ceil() as i64 + 1;
        let mut cands: Vec<(f64, usize)> = Vec::new();
        for ring in 0..=reach {
            let ok = self.for_ring(domain, base, ring, |j| {
                if j != center {
                    let d = norm(domain.min_image(p, points[j]));
                    if d <= radius {
                        cands.push((d, j));
                    }
                }
            });
            if !ok {
                cands.clear();
                for (j, q) in points.iter().enumerate() {
                    if j != center {
                        let d = norm(domain.min_image(p, *q));
                        if d <= radius {
                            cands.push((d, j));
                        }
                    }
                }
                break;
            }
        }
        sort_pairs(&mut cands);
        cands
    }

    fn scan_all(
        &self,
        points: &[Point],
        domain: &Domain,
        center: usize,
        n: usize,
    ) -> Vec<(f64, usize)> {
        let p = points[center];
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != center)
            .map(|(j, q)| (norm(domain.min_image(p, *q)), j))
            .collect();
        sort_pairs(&mut all);
        all.truncate(n);
        all
    }
}

fn sort_pairs(pairs: &mut [(f64, usize)]) {
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
}
