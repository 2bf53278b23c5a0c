use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::net::{forward, ops, sigmoid, Map, ModelParams};
use super::spec::{RECEPTIVE_FIELD, TOTAL_STRIDE};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scene::{Image, WorkspaceModel};
use crate::sim::{plan_z, GraspPose};

pub const N_ANGLE_BINS: usize = 9;
const BIN_WIDTH_DEG: f64 = 20.0;
/// Output rows evaluated per strip in full-image inference.
const STRIP_ROWS: usize = 4;

/// Rotation bin of a yaw in `[−π/2, π/2)`.
pub fn angle_bin(theta: f64) -> Result<usize> {
    use std::f64::consts::FRAC_PI_2;
    if !(-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return Err(Error::invalid(format!("angle {theta} outside [-pi/2, pi/2)")));
    }
    let bin = ((theta.to_degrees() + 90.0) / BIN_WIDTH_DEG).floor() as usize;
    Ok(bin.min(N_ANGLE_BINS - 1))
}

/// Center yaw of bin `i`: −80°, −60°, …, 80°.
pub fn bin_to_angle(i: usize) -> Result<f64> {
    if i >= N_ANGLE_BINS {
        return Err(Error::invalid(format!("bin {i} out of range 0..{N_ANGLE_BINS}")));
    }
    Ok((-80.0 + BIN_WIDTH_DEG * i as f64).to_radians())
}

/// Dense success probabilities, one cell every `stride` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    /// `[rows, cols, n_bins]`.
    pub grid: Tensor,
    pub stride: usize,
    /// Pixel coordinate of the first cell center on both axes.
    pub origin_offset: f64,
}

impl ProbabilityMap {
    pub fn rows(&self) -> usize {
        self.grid.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.grid.shape[1]
    }

    pub fn n_bins(&self) -> usize {
        self.grid.shape[2]
    }

    pub fn get(&self, row: usize, col: usize, bin: usize) -> f32 {
        self.grid.data[(row * self.cols() + col) * self.n_bins() + bin]
    }

    /// Highest probability over bins at a cell.
    pub fn cell_max(&self, row: usize, col: usize) -> f32 {
        (0..self.n_bins())
            .map(|k| self.get(row, col, k))
            .fold(f32::NEG_INFINITY, f32::max)
    }

    /// `(u, v)` of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_offset + (self.stride * col) as f64,
            self.origin_offset + (self.stride * row) as f64,
        )
    }

    /// Cell whose stride box contains `(u, v)`.
    pub fn cell_at(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let half = self.stride as f64 / 2.0;
        let c = ((u - self.origin_offset + half) / self.stride as f64).floor();
        let r = ((v - self.origin_offset + half) / self.stride as f64).floor();
        if r < 0.0 || c < 0.0 || r as usize >= self.rows() || c as usize >= self.cols() {
            return None;
        }
        Some((r as usize, c as usize))
    }

    /// Copy shifted so cell centers are in the coordinates of a larger image.
    pub fn offset_by(mut self, du: usize, dv: usize) -> Result<Self> {
        if du != dv {
            return Err(Error::invalid("a map keeps one origin offset for both axes"));
        }
        self.origin_offset += du as f64;
        Ok(self)
    }
}

/// Sliding-window evaluation of the whole image in one pass per strip.
pub fn forward_full(params: &ModelParams, image: &Tensor) -> Result<ProbabilityMap> {
    if image.shape.len() != 3 || image.shape[2] != params.spec().in_channels() {
        return Err(Error::invalid(format!("expected [H, W, 3] image, got {:?}", image.shape)));
    }
    let (h, w) = (image.shape[0], image.shape[1]);
    let (rows, cols) = params.spec().output_grid(h, w).ok_or_else(|| {
        Error::invalid(format!("image {h}x{w} is smaller than the {RECEPTIVE_FIELD}px receptive field"))
    })?;
    let n = params.n_bins();
    let op_list = ops(params.spec());
    let refs = params.refs();
    let c = image.shape[2];
    let strips: Vec<(usize, usize)> = (0..rows)
        .step_by(STRIP_ROWS)
        .map(|r0| (r0, (r0 + STRIP_ROWS).min(rows)))
        .collect();
    let parts = strips
        .par_iter()
        .map(|&(r0, r1)| {
            let y0 = r0 * TOTAL_STRIDE;
            let sh = (r1 - 1 - r0) * TOTAL_STRIDE + RECEPTIVE_FIELD;
            let strip = Tensor {
                shape: vec![sh, w, c],
                data: image.data[y0 * w * c..(y0 + sh) * w * c].to_vec(),
            };
            let (logits, _) = forward(&op_list, &refs, Map::<f32>::from_hwc(&strip)?, false)?;
            debug_assert_eq!((logits.h, logits.w), (r1 - r0, cols));
            Ok(logits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = vec![0.0f32; rows * cols * n];
    for ((r0, _), logits) in strips.iter().zip(parts) {
        let p = logits.h * logits.w;
        for k in 0..n {
            for i in 0..p {
                let (r, col) = (r0 + i / cols, i % cols);
                grid[(r * cols + col) * n + k] = sigmoid(logits.data[k * p + i]);
            }
        }
    }
    Ok(ProbabilityMap {
        grid: Tensor {
            shape: vec![rows, cols, n],
            data: grid,
        },
        stride: TOTAL_STRIDE,
        origin_offset: ((RECEPTIVE_FIELD - 1) / 2) as f64,
    })
}

/// The executed choice of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedGrasp {
    pub pose: GraspPose,
    pub z: f64,
    pub row: usize,
    pub col: usize,
    pub bin: usize,
    pub probability: f32,
}

/// Constraints for [`select_grasp`].
#[derive(Debug, Clone, Copy)]
pub struct Selection {
    pub workspace: WorkspaceModel,
    pub finger_length: f64,
    /// Inclusive pixel box `(u0, u1, v0, v1)` cell centers must fall in.
    pub region: Option<(f64, f64, f64, f64)>,
}

/// Argmax over `(cell, bin)`; ties go to the lowest row, then column, then bin.
pub fn select_grasp(map: &ProbabilityMap, depth: &Image, sel: &Selection) -> Result<PlannedGrasp> {
    let n = map.n_bins();
    let mut best: Option<(f32, usize, usize, usize)> = None;
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            let (u, v) = map.cell_center(r, c);
            if let Some((u0, u1, v0, v1)) = sel.region {
                if u < u0 || u > u1 || v < v0 || v > v1 {
                    continue;
                }
            }
            for k in 0..n {
                let p = map.get(r, c, k);
                if best.is_none_or(|b| p > b.0) {
                    best = Some((p, r, c, k));
                }
            }
        }
    }
    let (probability, row, col, bin) =
        best.ok_or_else(|| Error::invalid("no map cell inside the selection region"))?;
    let (u, v) = map.cell_center(row, col);
    let theta = if n == 1 { 0.0 } else { bin_to_angle(bin)? };
    let (ui, vi) = (u.round() as usize, v.round() as usize);
    if depth.channels != 1 || ui >= depth.width || vi >= depth.height {
        return Err(Error::invalid("depth image does not cover the selected cell"));
    }
    let ws = &sel.workspace;
    let z_obj = depth.pixel(ui, vi)[0] as f64;
    let h_obj = ws.z_bin - z_obj;
    let z = if h_obj > 1e-9 {
        plan_z(h_obj, sel.finger_length, ws.z_bin, z_obj, ws.delta_h)?
    } else {
        ws.z_bin - ws.delta_h
    };
    Ok(PlannedGrasp {
        pose: GraspPose::new(u, v, theta),
        z,
        row,
        col,
        bin,
        probability,
    })
}

/// Writes `<stem>_bin<k>.png` per bin plus a `<stem>.txt` sidecar; returns the PNG paths.
pub fn write_heatmaps(map: &ProbabilityMap, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (rows, cols) = (map.rows(), map.cols());
    let mut out = Vec::new();
    for k in 0..map.n_bins() {
        let mut img = Image::zeros(cols, rows, 1);
        for r in 0..rows {
            for c in 0..cols {
                img.pixel_mut(c, r)[0] = (map.get(r, c, k) * 255.0).round();
            }
        }
        let path = dir.join(format!("{stem}_bin{k}.png"));
        img.save_gray_png(&path)?;
        out.push(path);
    }
    let sidecar = dir.join(format!("{stem}.txt"));
    let text = format!(
        "stride {}\norigin_offset {}\nrows {rows}\ncols {cols}\nn_bins {}\n",
        map.stride,
        map.origin_offset,
        map.n_bins()
    );
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    Ok(out)
}

pub const OVERLAY_COLOR: [f32; 3] = [255.0, 40.0, 40.0];

/// Color image with the per-cell maximum shaded in and an oval at the chosen grasp.
///
/// The oval's long axis follows the grasp yaw.
pub fn render_overlay(image: &Image, map: &ProbabilityMap, grasp: &PlannedGrasp) -> Image {
    let mut out = image.clone();
    let half = map.stride as f64 / 2.0;
    for v in 0..out.height {
        for u in 0..out.width {
            if let Some((r, c)) = map.cell_at(u as f64, v as f64) {
                let (cu, cv) = map.cell_center(r, c);
                if (u as f64 - cu).abs() > half || (v as f64 - cv).abs() > half {
                    continue;
                }
                let p = map.cell_max(r, c);
                let px = out.pixel_mut(u, v);
                // blend toward white by probability
                for ch in px.iter_mut() {
                    *ch = (*ch * (1.0 - 0.5 * p) + 255.0 * 0.5 * p).round();
                }
            }
        }
    }
    let (a, b) = (44.0f64, 16.0f64);
    let (s, c) = grasp.pose.theta.sin_cos();
    let reach = a.ceil() as i64 + 2;
    let (cu, cv) = (grasp.pose.u, grasp.pose.v);
    for dv in -reach..=reach {
        for du in -reach..=reach {
            let (x, y) = (du as f64, dv as f64);
            let (along, across) = (x * c + y * s, -x * s + y * c);
            let q = (along / a).powi(2) + (across / b).powi(2);
            if !(0.8..=1.25).contains(&q) {
                continue;
            }
            let (u, v) = (cu.round() as i64 + du, cv.round() as i64 + dv);
            if u >= 0 && v >= 0 && (u as usize) < out.width && (v as usize) < out.height {
                out.pixel_mut(u as usize, v as usize).copy_from_slice(&OVERLAY_COLOR);
            }
        }
    }
    out
}
