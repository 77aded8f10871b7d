use scatter_fields::{Grid2D, ScalarField2D};

use crate::error::GeoError;
use crate::grf::Volume3;

/// Controls mask extraction and cleanup: target volume fraction,
/// morphology radius, minimum component area, forced-background margin,
/// and the slice-selection thresholds.
#[derive(Debug, Clone)]
pub struct SaltMaskSpec {
    /// Target salt volume fraction in (0, 1).
    pub rho_salt: f64,
    /// Components smaller than this many cells are removed.
    pub min_area: usize,
    /// Cells of forced background along every edge.
    pub boundary_margin: usize,
    /// Square structuring-element radius for opening/closing.
    pub morph_radius: usize,
    /// A slice qualifies when its salt fraction reaches this value...
    pub min_slice_fraction: f64,
    /// ...and it has at least this many disjoint blobs.
    pub min_blob_count: usize,
}

impl Default for SaltMaskSpec {
    fn default() -> Self {
        Self {
            rho_salt: 0.15,
            min_area: 8,
            boundary_margin: 8,
            morph_radius: 1,
            min_slice_fraction: 0.05,
            min_blob_count: 1,
        }
    }
}

impl SaltMaskSpec {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.rho_salt > 0.0 && self.rho_salt < 1.0) {
            return Err(GeoError::InvalidParameter(format!(
                "rho_salt must lie in (0,1), got {}",
                self.rho_salt
            )));
        }
        Ok(())
    }
}

/// Threshold at the empirical `(1 - rho)` quantile: the returned
/// threshold is the sorted value at rank `ceil((1-rho) n) - 1`
/// (0-based), and the mask keeps strictly greater values.
fn quantile_threshold(values: &[f64], rho: f64) -> Result<f64, GeoError> {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(GeoError::DegenerateField);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len() as f64;
    let rank = ((1.0 - rho) * n).ceil() as usize;
    Ok(sorted[rank.saturating_sub(1).min(sorted.len() - 1)])
}

/// Binary mask of the highest-valued fraction `rho_salt` of a field.
pub fn threshold_to_mask(field: &ScalarField2D, rho_salt: f64) -> Result<ScalarField2D, GeoError> {
    if !(rho_salt > 0.0 && rho_salt < 1.0) {
        return Err(GeoError::InvalidParameter(format!("rho_salt = {rho_salt} outside (0,1)")));
    }
    let tau = quantile_threshold(field.values(), rho_salt)?;
    Ok(field.map(|v| if v > tau { 1.0 } else { 0.0 })?)
}

fn fraction_of(slice: &[f64]) -> f64 {
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Connected components under 4-connectivity; returns (labels, areas)
/// with label 0 = background and components numbered from 1.
fn label_components(mask: &[f64], nx: usize, ny: usize) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; mask.len()];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..mask.len() {
        if mask[start] == 0.0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        let mut area = 0usize;
        stack.push(start);
        labels[start] = next;
        while let Some(k) = stack.pop() {
            area += 1;
            let (i, j) = (k % nx, k / nx);
            let mut visit = |t: usize| {
                if mask[t] != 0.0 && labels[t] == 0 {
                    labels[t] = next;
                    stack.push(t);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

fn blob_count(slice: &[f64], nx: usize, ny: usize) -> usize {
    label_components(slice, nx, ny).1.len()
}

/// Separable erosion/dilation with a `(2r+1)` square structuring
/// element; out-of-domain cells count as background.
fn morph(mask: &mut Vec<f64>, nx: usize, ny: usize, r: usize, dilate: bool) {
    if r == 0 {
        return;
    }
    let pick = |a: f64, b: f64| if dilate { a.max(b) } else { a.min(b) };
    let pad: f64 = if dilate { 0.0 } else { 0.0 }; // outside = background
    let mut tmp = vec![0.0f64; mask.len()];
    // Horizontal pass.
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = if dilate { 0.0 } else { 1.0 };
            for t in i.saturating_sub(r)..=(i + r).min(nx - 1) {
                acc = pick(acc, mask[j * nx + t]);
            }
            if !dilate && (i < r || i + r > nx - 1) {
                acc = pick(acc, pad);
            }
            tmp[j * nx + i] = acc;
        }
    }
    // Vertical pass.
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = if dilate { 0.0 } else { 1.0 };
            for t in j.saturating_sub(r)..=(j + r).min(ny - 1) {
                acc = pick(acc, tmp[t * nx + i]);
            }
            if !dilate && (j < r || j + r > ny - 1) {
                acc = pick(acc, pad);
            }
            mask[j * nx + i] = acc;
        }
    }
}

/// Closing = dilation then erosion.
#[cfg(test)]
fn binary_closing(mask: &[f64], nx: usize, ny: usize, r: usize) -> Vec<f64> {
    let mut m = mask.to_vec();
    morph(&mut m, nx, ny, r, true);
    morph(&mut m, nx, ny, r, false);
    m
}

/// Morphological opening then closing, small-component removal, and the
/// forced-background boundary strip.
pub fn clean_mask(mask: &ScalarField2D, spec: &SaltMaskSpec) -> Result<ScalarField2D, GeoError> {
    if !mask.is_binary() {
        return Err(GeoError::InvalidParameter("clean_mask needs a binary mask".into()));
    }
    let grid = mask.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut m = mask.values().to_vec();
    let r = spec.morph_radius;
    // Opening = erode then dilate; closing = dilate then erode.
    morph(&mut m, nx, ny, r, false);
    morph(&mut m, nx, ny, r, true);
    morph(&mut m, nx, ny, r, true);
    morph(&mut m, nx, ny, r, false);

    if spec.min_area > 0 {
        let (labels, areas) = label_components(&m, nx, ny);
        for (k, v) in m.iter_mut().enumerate() {
            if *v != 0.0 && areas[(labels[k] - 1) as usize] < spec.min_area {
                *v = 0.0;
            }
        }
    }

    let b = spec.boundary_margin;
    if b > 0 {
        for j in 0..ny {
            for i in 0..nx {
                if i < b || j < b || i + b >= nx || j + b >= ny {
                    m[j * nx + i] = 0.0;
                }
            }
        }
    }
    Ok(ScalarField2D::from_values(grid, m)?)
}

/// Thresholds a 3D field globally at the `rho_salt` volume quantile, then
/// scans z-slices (from a seeded start, wrapping) for the first slice
/// meeting the salt-fraction and blob-count requirements; falls back to
/// the max-fraction slice. Returns the binary mask slice on `image_grid`.
pub fn extract_slice(
    volume: &Volume3,
    image_grid: Grid2D,
    spec: &SaltMaskSpec,
    seed: u64,
) -> Result<ScalarField2D, GeoError> {
    if volume.nx != image_grid.nx() || volume.ny != image_grid.ny() {
        return Err(GeoError::VolumeGridMismatch {
            vnx: volume.nx,
            vny: volume.ny,
            gnx: image_grid.nx(),
            gny: image_grid.ny(),
        });
    }
    spec.validate()?;
    let tau = quantile_threshold(&volume.data, spec.rho_salt)?;
    let bin: Vec<f64> = volume.data.iter().map(|&v| if v > tau { 1.0 } else { 0.0 }).collect();
    let per_slice = volume.ny * volume.nx;

    let start = (seed % volume.nz as u64) as usize;
    let mut best_k = 0usize;
    let mut best_fraction = -1.0f64;
    for step in 0..volume.nz {
        let k = (start + step) % volume.nz;
        let slice = &bin[k * per_slice..(k + 1) * per_slice];
        let frac = fraction_of(slice);
        if frac > best_fraction {
            best_fraction = frac;
            best_k = k;
        }
        if frac >= spec.min_slice_fraction
            && blob_count(slice, volume.nx, volume.ny) >= spec.min_blob_count
        {
            return Ok(ScalarField2D::from_values(
                image_grid,
                slice.to_vec(),
            )?);
        }
    }
    // Fallback: the slice with the largest salt area.
    let slice = &bin[best_k * per_slice..(best_k + 1) * per_slice];
    Ok(ScalarField2D::from_values(image_grid, slice.to_vec())?)
}
