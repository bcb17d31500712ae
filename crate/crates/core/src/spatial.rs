use std::collections::HashMap;

use nalgebra::Vector3;

/// Uniform hash grid over 3-D points supporting exact radius queries.
///
/// Nearest-neighbor search walks cells in expanding Chebyshev shells around
/// the query and stops as soon as the best hit provably beats every
/// unvisited cell, so results are exact for any radius. Ties on distance
/// resolve to the lowest point index regardless of visit order.
#[derive(Clone, Debug)]
pub struct VoxelHashIndex {
    cell_size: f64,
    points: Vec<Vector3<f64>>,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl VoxelHashIndex {
    pub fn build(points: &[Vector3<f64>], cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite());
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry(cell_of(p, cell_size))
                .or_default()
                .push(i as u32);
        }
        Self { cell_size, points: points.to_vec(), cells }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and distance of the nearest point within `radius` of `q`.
    pub fn nearest_within(&self, q: &Vector3<f64>, radius: f64) -> Option<(usize, f64)> {
        let s = self.cell_size;
        let (cx, cy, cz) = cell_of(q, s);
        let k_max = (radius / s).ceil() as i64;
        let r2 = radius * radius;
        let mut best: Option<(f64, u32)> = None;

        for k in 0..=k_max {
            self.visit_shell(cx, cy, cz, k, |idx| {
                let d2 = (self.points[idx as usize] - q).norm_squared();
                if d2 <= r2 {
                    let better = match best {
                        None => true,
                        Some((bd2, bi)) => d2 < bd2 || (d2 == bd2 && idx < bi),
                    };
                    if better {
                        best = Some((d2, idx));
                    }
                }
            });
            // Every point in an unvisited shell is farther than k * cell_size.
            if let Some((bd2, _)) = best {
                let guard = k as f64 * s;
                if bd2 <= guard * guard {
                    break;
                }
            }
        }
        best.map(|(d2, i)| (i as usize, d2.sqrt()))
    }

    /// Appends indices of all points within `radius` of `q`, in ascending
    /// index order.
    pub fn collect_within(&self, q: &Vector3<f64>, radius: f64, out: &mut Vec<usize>) {
        let start = out.len();
        let s = self.cell_size;
        let r2 = radius * radius;
        let lo = cell_of(&Vector3::new(q.x - radius, q.y - radius, q.z - radius), s);
        let hi = cell_of(&Vector3::new(q.x + radius, q.y + radius, q.z + radius), s);
        for x in lo.0..=hi.0 {
            for y in lo.1..=hi.1 {
                for z in lo.2..=hi.2 {
                    if let Some(cell) = self.cells.get(&(x, y, z)) {
                        for &idx in cell {
                            if ((self.points[idx as usize]) - q).norm_squared() <= r2 {
                                out.push(idx as usize);
                            }
                        }
                    }
                }
            }
        }
        out[start..].sort_unstable();
    }

    /// Visits every point whose cell lies at Chebyshev distance exactly `k`.
    fn visit_shell(&self, cx: i64, cy: i64, cz: i64, k: i64, mut f: impl FnMut(u32)) {
        let mut visit_cell = |x: i64, y: i64, z: i64| {
            if let Some(cell) = self.cells.get(&(x, y, z)) {
                for &idx in cell {
                    f(idx);
                }
            }
        };
        if k == 0 {
            visit_cell(cx, cy, cz);
            return;
        }
        for dx in -k..=k {
            for dy in -k..=k {
                if dx.abs() == k || dy.abs() == k {
                    for dz in -k..=k {
                        visit_cell(cx + dx, cy + dy, cz + dz);
                    }
                } else {
                    visit_cell(cx + dx, cy + dy, cz - k);
                    visit_cell(cx + dx, cy + dy, cz + k);
                }
            }
        }
    }
}

fn cell_of(p: &Vector3<f64>, cell_size: f64) -> (i64, i64, i64) {
    (
        (p.x / cell_size).floor() as i64,
        (p.y / cell_size).floor() as i64,
        (p.z / cell_size).floor() as i64,
    )
}
