use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::DescriptorCloud;
use crate::error::{Error, Result};

/// Gate on the best cosine similarity; strictly greater-than.
pub const DEFAULT_COS_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// A pair is emitted only when its similarity exceeds this strictly.
    pub cos_threshold: f64,
    /// Exact brute-force argmax. The flag is an extension point for
    /// approximate indexes; no approximate backend exists, so search is
    /// always exact regardless of its value.
    pub exact: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { cos_threshold: DEFAULT_COS_THRESHOLD, exact: true }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cos_threshold > -1.0 && self.cos_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cos_threshold must lie in (-1, 1], got {}",
                self.cos_threshold
            )));
        }
        Ok(())
    }
}

/// One scan-point-to-map-point match.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub scan_index: usize,
    pub map_index: usize,
    pub similarity: f64,
}

/// Rescales every descriptor row to unit L2 norm (norm accumulated in f64).
/// Geometry is untouched. Idempotent.
pub fn normalize_descriptors(cloud: &DescriptorCloud) -> DescriptorCloud {
    let dim = cloud.dim();
    let mut out = Vec::with_capacity(cloud.descriptors().len());
    for row in cloud.descriptors().chunks_exact(dim) {
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
        } else {
            out.extend_from_slice(row);
        }
    }
    DescriptorCloud::new(cloud.cloud.clone(), out, dim)
        .expect("row count unchanged by normalization")
}

/// For every scan point, finds the map point with the highest cosine
/// similarity (inputs are expected unit-norm, so similarity is a dot
/// product) and emits the pair iff similarity > `cfg.cos_threshold`.
///
/// Exactness: a blocked f32 kernel screens all map rows and keeps every
/// candidate within a margin that dominates the worst-case f32 dot-product
/// rounding error for unit vectors; candidates are then re-evaluated with
/// sequential f64 accumulation, which defines the result. Ties break to the
/// lowest map index. Output is sorted by scan index and independent of
/// thread count.
pub fn match_descriptors(
    scan: &DescriptorCloud,
    map: &DescriptorCloud,
    cfg: &MatchConfig,
) -> Result<Vec<Correspondence>> {
    cfg.validate()?;
    if scan.dim() != map.dim() {
        return Err(Error::DimMismatch { expected: map.dim(), got: scan.dim() });
    }
    if scan.is_empty() || map.is_empty() {
        return Ok(Vec::new());
    }

    let dim = scan.dim();
    // Worst-case |fl(a·b) − a·b| for unit vectors is below n·eps; the blocked
    // and fused-multiply-add variants only tighten it. 4n·eps (floored at
    // 1e-3) leaves a wide moat.
    let margin = (dim as f32 * 4.0 * f32::EPSILON).max(1e-3);
    let floor = cfg.cos_threshold as f32 - margin;

    const QUERY_PANEL: usize = 64;

    let panels: Vec<Vec<Correspondence>> = (0..scan.len())
        .collect::<Vec<_>>()
        .par_chunks(QUERY_PANEL)
        .map(|panel| {
            let mut out = Vec::new();
            let mut screens = screen_panel(scan, map, panel, margin, floor);
            for (&scan_index, candidates) in panel.iter().zip(screens.iter_mut()) {
                let query = scan.descriptor(scan_index);
                let mut best: Option<(usize, f64)> = None;
                for &(j, _) in candidates.iter() {
                    let s = dot_f64(query, map.descriptor(j as usize));
                    // Candidates arrive in ascending map index; strict
                    // improvement keeps the lowest index on exact ties.
                    if best.map_or(true, |(_, bs)| s > bs) {
                        best = Some((j as usize, s));
                    }
                }
                if let Some((map_index, similarity)) = best {
                    if similarity > cfg.cos_threshold {
                        out.push(Correspondence { scan_index, map_index, similarity });
                    }
                }
            }
            out
        })
        .collect();

    Ok(panels.into_iter().flatten().collect())
}

/// Reference f64 dot product: sequential forward accumulation. The second
/// matching pass uses exactly this, so independently written oracles that
/// accumulate the same way agree bit-for-bit.
pub fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0f64;
    for k in 0..a.len() {
        s += a[k] as f64 * b[k] as f64;
    }
    s
}

/// f32 screening pass over one panel of scan points: returns, per query, all
/// map rows whose fast dot product lies within `margin` of that query's
/// running maximum (and above `floor`), in ascending map index order.
fn screen_panel(
    scan: &DescriptorCloud,
    map: &DescriptorCloud,
    panel: &[usize],
    margin: f32,
    floor: f32,
) -> Vec<Vec<(u32, f32)>> {
    const MAP_BLOCK: usize = 512;
    let dim = map.dim();
    let map_rows = map.descriptors();

    let mut bests = vec![f32::NEG_INFINITY; panel.len()];
    let mut cands: Vec<Vec<(u32, f32)>> = vec![Vec::new(); panel.len()];
    let mut vals = vec![0.0f32; 4 * MAP_BLOCK];

    let mut block_start = 0usize;
    while block_start < map.len() {
        let block_len = MAP_BLOCK.min(map.len() - block_start);
        let rows = &map_rows[block_start * dim..(block_start + block_len) * dim];

        let mut q = 0usize;
        while q < panel.len() {
            let group = (panel.len() - q).min(4);
            let queries: Vec<&[f32]> = (0..group)
                .map(|g| scan.descriptor(panel[q + g]))
                .collect();
            dots_block(&queries, rows, dim, block_len, &mut vals);

            for g in 0..group {
                let best = &mut bests[q + g];
                let list = &mut cands[q + g];
                let col = &vals[g * MAP_BLOCK..g * MAP_BLOCK + block_len];
                for (r, &v) in col.iter().enumerate() {
                    if v >= *best - margin && v >= floor {
                        if v > *best {
                            *best = v;
                        }
                        list.push(((block_start + r) as u32, v));
                        if list.len() >= 512 {
                            let keep_above = *best - margin;
                            list.retain(|&(_, lv)| lv >= keep_above);
                        }
                    }
                }
            }
            q += group;
        }
        block_start += block_len;
    }

    for (qi, list) in cands.iter_mut().enumerate() {
        let keep_above = bests[qi] - margin;
        list.retain(|&(_, lv)| lv >= keep_above);
    }
    cands
}

/// Computes f32 dot products of up to 4 queries against `n_rows` contiguous
/// map rows; `out[g * MAP_BLOCK + r]` receives query g vs row r.
fn dots_block(queries: &[&[f32]], rows: &[f32], dim: usize, n_rows: usize, out: &mut [f32]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2")
            && std::arch::is_x86_feature_detected!("fma")
        {
            unsafe { dots_block_avx2(queries, rows, dim, n_rows, out) };
            return;
        }
    }
    dots_block_portable(queries, rows, dim, n_rows, out);
}

fn dots_block_portable(
    queries: &[&[f32]],
    rows: &[f32],
    dim: usize,
    n_rows: usize,
    out: &mut [f32],
) {
    const MAP_BLOCK: usize = 512;
    for r in 0..n_rows {
        let row = &rows[r * dim..(r + 1) * dim];
        for (g, q) in queries.iter().enumerate() {
            out[g * MAP_BLOCK + r] = dot_f32_lanes(q, row);
        }
    }
}

/// Eight-lane f32 dot product; the lane layout autovectorizes on SSE2.
fn dot_f32_lanes(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let ac = &a[c * 8..c * 8 + 8];
        let bc = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += ac[l] * bc[l];
        }
    }
    let mut tail = 0.0f32;
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    (((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]))) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dots_block_avx2(
    queries: &[&[f32]],
    rows: &[f32],
    dim: usize,
    n_rows: usize,
    out: &mut [f32],
) {
    use std::arch::x86_64::*;
    const MAP_BLOCK: usize = 512;

    unsafe fn hsum(v: __m256) -> f32 {
        let lo = _mm256_castps256_ps128(v);
        let hi = _mm256_extractf128_ps(v, 1);
        let s = _mm_add_ps(lo, hi);
        let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
        _mm_cvtss_f32(s)
    }

    let main = dim - dim % 16;
    for r in 0..n_rows {
        let row = rows.as_ptr().add(r * dim);
        for (g, q) in queries.iter().enumerate() {
            let qp = q.as_ptr();
            let mut acc0 = _mm256_setzero_ps();
            let mut acc1 = _mm256_setzero_ps();
            let mut k = 0usize;
            while k < main {
                let r0 = _mm256_loadu_ps(row.add(k));
                let r1 = _mm256_loadu_ps(row.add(k + 8));
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(qp.add(k)), r0, acc0);
                acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(qp.add(k + 8)), r1, acc1);
                k += 16;
            }
            if dim - k >= 8 {
                let r0 = _mm256_loadu_ps(row.add(k));
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(qp.add(k)), r0, acc0);
                k += 8;
            }
            let mut tail = 0.0f32;
            while k < dim {
                tail += *qp.add(k) * *row.add(k);
                k += 1;
            }
            out[g * MAP_BLOCK + r] = hsum(_mm256_add_ps(acc0, acc1)) + tail;
        }
    }
}
