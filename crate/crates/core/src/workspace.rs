//! Reachable and dexterous workspace on a regular grid.
//!
//! Cells sit on a lattice anchored at the home pose. Each cell is reachable
//! when inverse kinematics is feasible at zero twist; its rotation range is
//! found by stepping the twist outward until the pose becomes infeasible or
//! the plate's rotation stop is hit.

use serde::Serialize;
use thiserror::Error;

use crate::ik::{home_pose, is_reachable};
use crate::params::MechanismParams;
use crate::types::Pose;

pub const DEFAULT_RESOLUTION: f64 = 0.5;
pub const DEFAULT_ROTATION_STEP_DEG: f64 = 1.0;
/// Total rotation that qualifies a cell as dexterous by default, degrees.
pub const DEFAULT_DEXTEROUS_ROTATION_DEG: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkspaceError {
    #[error("no cell reaches the requested total rotation of {min_total_deg:.3} deg")]
    NoSuchRegion { min_total_deg: f64 },
    #[error("invalid workspace argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkspaceCell {
    pub center: [f64; 3],
    pub reachable: bool,
    /// Largest positive twist reachable by continuous rotation, rad.
    pub max_rotation_pos: f64,
    /// Magnitude of the largest negative twist, rad.
    pub max_rotation_neg: f64,
}

impl WorkspaceCell {
    pub fn total_rotation(&self) -> f64 {
        self.max_rotation_pos + self.max_rotation_neg
    }
}

/// Cells ordered lexicographically in `(z, y, x)`: x varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceGrid {
    pub resolution: f64,
    pub rotation_step: f64,
    /// Cell counts along x, y, z.
    pub dims: [usize; 3],
    /// Center of cell `(0, 0, 0)`.
    pub origin: [f64; 3],
    pub cells: Vec<WorkspaceCell>,
}

impl WorkspaceGrid {
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    pub fn cell(&self, ix: usize, iy: usize, iz: usize) -> &WorkspaceCell {
        &self.cells[self.index(ix, iy, iz)]
    }

    pub fn reachable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.reachable).count()
    }

    /// Reachable volume in cm³.
    pub fn volume_cm3(&self) -> f64 {
        self.reachable_count() as f64 * self.resolution.powi(3) / 1000.0
    }

    /// Reachable bounding box over cell extents, or `None` if empty.
    pub fn reachable_bounds(&self) -> Option<AxisBox> {
        let half = 0.5 * self.resolution;
        let mut out: Option<AxisBox> = None;
        for c in self.cells.iter().filter(|c| c.reachable) {
            let b = out.get_or_insert(AxisBox {
                min: c.center.map(|v| v - half),
                max: c.center.map(|v| v + half),
            });
            for k in 0..3 {
                b.min[k] = b.min[k].min(c.center[k] - half);
                b.max[k] = b.max[k].max(c.center[k] + half);
            }
        }
        out
    }

    /// Half-range of reachable cell centers per axis, mm.
    pub fn extents(&self) -> [f64; 3] {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in self.cells.iter().filter(|c| c.reachable) {
            for k in 0..3 {
                lo[k] = lo[k].min(c.center[k]);
                hi[k] = hi[k].max(c.center[k]);
            }
        }
        std::array::from_fn(|k| if hi[k] >= lo[k] { 0.5 * (hi[k] - lo[k]) } else { 0.0 })
    }

    /// Largest positive and negative twist over all cells, rad.
    pub fn rotation_range(&self) -> (f64, f64) {
        self.cells.iter().fold((0.0, 0.0), |(p, n), c| {
            (f64::max(p, c.max_rotation_pos), f64::max(n, c.max_rotation_neg))
        })
    }

    /// Grid export, header `x_mm,y_mm,z_mm,reachable,rot_pos_deg,rot_neg_deg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() * 40);
        out.push_str("x_mm,y_mm,z_mm,reachable,rot_pos_deg,rot_neg_deg\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{:.4},{:.4},{:.4},{},{:.3},{:.3}\n",
                c.center[0],
                c.center[1],
                c.center[2],
                u8::from(c.reachable),
                c.max_rotation_pos.to_degrees(),
                c.max_rotation_neg.to_degrees()
            ));
        }
        out
    }
}

/// Axis-aligned box in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl AxisBox {
    pub fn edges(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.max[k] - self.min[k])
    }

    pub fn volume(&self) -> f64 {
        self.edges().iter().product()
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

fn admissible(params: &MechanismParams, center: [f64; 3], theta: f64) -> bool {
    theta.abs() <= params.theta_limit + 1e-12
        && is_reachable(params, &Pose::new(center[0], center[1], center[2], theta))
}

fn rotation_extent(params: &MechanismParams, center: [f64; 3], step: f64, sign: f64) -> f64 {
    let mut best = 0.0;
    let mut k = 1u32;
    loop {
        let theta = sign * k as f64 * step;
        if !admissible(params, center, theta) {
            return best;
        }
        best = theta.abs();
        k += 1;
    }
}

fn evaluate_cell(params: &MechanismParams, center: [f64; 3], rotation_step: f64) -> WorkspaceCell {
    if !admissible(params, center, 0.0) {
        return WorkspaceCell {
            center,
            reachable: false,
            max_rotation_pos: 0.0,
            max_rotation_neg: 0.0,
        };
    }
    WorkspaceCell {
        center,
        reachable: true,
        max_rotation_pos: rotation_extent(params, center, rotation_step, 1.0),
        max_rotation_neg: rotation_extent(params, center, rotation_step, -1.0),
    }
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Index-space box `[lo, hi]` (inclusive) around the anchor.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    anchor: [f64; 3],
    resolution: f64,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl Lattice {
    fn dims(&self) -> [usize; 3] {
        std::array::from_fn(|k| (self.hi[k] - self.lo[k] + 1) as usize)
    }

    fn len(&self) -> usize {
        self.dims().iter().product()
    }

    fn center(&self, flat: usize) -> [f64; 3] {
        let d = self.dims();
        let ix = flat % d[0];
        let iy = (flat / d[0]) % d[1];
        let iz = flat / (d[0] * d[1]);
        let idx = [ix as i64 + self.lo[0], iy as i64 + self.lo[1], iz as i64 + self.lo[2]];
        std::array::from_fn(|k| self.anchor[k] + idx[k] as f64 * self.resolution)
    }
}

/// Sweeps the workspace at zero twist and the rotation range of every
/// reachable cell. Bounds grow until the outer shell holds no reachable cell.
pub fn sweep_workspace(
    params: &MechanismParams,
    resolution: f64,
    rotation_step: f64,
) -> Result<WorkspaceGrid, WorkspaceError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(WorkspaceError::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if !(rotation_step > 0.0 && rotation_step.is_finite()) {
        return Err(WorkspaceError::InvalidArgument(format!(
            "rotation step must be positive, got {rotation_step}"
        )));
    }
    let home = home_pose(params);
    let start = (2.0 / resolution).ceil() as i64 + 1;
    // Nothing can lie farther than the fully stretched leg from its base joint.
    let reach = params.upper_link + params.lower_link;
    let plate = (params.plate_half_x + 0.5 * params.bar_offset).hypot(params.plate_half_y + 0.5 * params.bar_length);
    let limit_xy = ((params.base_radius + reach + plate) / resolution).ceil() as i64 + 1;
    let limit_z = ((reach + (home.z - params.base_z).abs()) / resolution).ceil() as i64 + 1;
    let limits = [limit_xy, limit_xy, limit_z];

    let mut lattice = Lattice {
        anchor: [0.0, 0.0, home.z],
        resolution,
        lo: [-start; 3],
        hi: [start; 3],
    };
    let reachable = loop {
        let lat = lattice;
        let mask = map_indices(lat.len(), |i| admissible(params, lat.center(i), 0.0));
        let d = lat.dims();
        let mut grew = false;
        for axis in 0..3 {
            for (side, at_lo) in [(0usize, true), (d[axis] - 1, false)] {
                let touched = (0..lat.len()).any(|i| {
                    let idx = [i % d[0], (i / d[0]) % d[1], i / (d[0] * d[1])];
                    idx[axis] == side && mask[i]
                });
                if !touched {
                    continue;
                }
                let grow = ((lat.hi[axis] - lat.lo[axis]) / 4).max(2);
                if at_lo && lattice.lo[axis] > -limits[axis] {
                    lattice.lo[axis] = (lattice.lo[axis] - grow).max(-limits[axis]);
                    grew = true;
                } else if !at_lo && lattice.hi[axis] < limits[axis] {
                    lattice.hi[axis] = (lattice.hi[axis] + grow).min(limits[axis]);
                    grew = true;
                }
            }
        }
        if !grew {
            break mask;
        }
    };

    let lat = lattice;
    let cells = map_indices(lat.len(), |i| {
        let center = lat.center(i);
        if reachable[i] {
            evaluate_cell(params, center, rotation_step)
        } else {
            WorkspaceCell {
                center,
                reachable: false,
                max_rotation_pos: 0.0,
                max_rotation_neg: 0.0,
            }
        }
    });
    Ok(WorkspaceGrid {
        resolution,
        rotation_step,
        dims: lat.dims(),
        origin: lat.center(0),
        cells,
    })
}

/// Largest-volume grid-aligned box whose every cell is reachable with at
/// least `min_total_rotation` of combined twist range.
///
/// A non-positive threshold imposes no rotation requirement and yields the
/// bounding box of the reachable set.
pub fn dexterous_cube(grid: &WorkspaceGrid, min_total_rotation: f64) -> Result<AxisBox, WorkspaceError> {
    let no_region = || WorkspaceError::NoSuchRegion {
        min_total_deg: min_total_rotation.to_degrees(),
    };
    if min_total_rotation <= 0.0 {
        return grid.reachable_bounds().ok_or_else(no_region);
    }
    let [nx, ny, nz] = grid.dims;
    let qualifies: Vec<bool> = grid
        .cells
        .iter()
        .map(|c| c.reachable && c.total_rotation() >= min_total_rotation - 1e-12)
        .collect();
    let (best, corner) = largest_box(&qualifies, [nx, ny, nz]);
    if best == 0 {
        return Err(no_region());
    }
    let ([x0, y0, z0], [x1, y1, z1]) = corner;
    let half = 0.5 * grid.resolution;
    let lo = grid.cell(x0, y0, z0).center;
    let hi = grid.cell(x1, y1, z1).center;
    Ok(AxisBox {
        min: lo.map(|v| v - half),
        max: hi.map(|v| v + half),
    })
}

/// Maximum-volume all-true box in a `(z, y, x)`-ordered mask. Returns the
/// cell count and inclusive corner indices `([x0, y0, z0], [x1, y1, z1])`.
fn largest_box(mask: &[bool], dims: [usize; 3]) -> (usize, ([usize; 3], [usize; 3])) {
    let [nx, ny, nz] = dims;
    let at = |x: usize, y: usize, z: usize| mask[(z * ny + y) * nx + x];
    let mut best = 0usize;
    let mut corner = ([0; 3], [0; 3]);
    let mut column = vec![true; nx * ny];
    let mut heights = vec![0usize; ny];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(ny + 1);
    for z0 in 0..nz {
        column.iter_mut().for_each(|c| *c = true);
        for z1 in z0..nz {
            let mut any = false;
            for x in 0..nx {
                for y in 0..ny {
                    let v = column[x * ny + y] && at(x, y, z1);
                    column[x * ny + y] = v;
                    any |= v;
                }
            }
            if !any {
                break;
            }
            let depth = z1 - z0 + 1;
            // Largest rectangle in the (x, y) slab via row histograms over x.
            heights.iter_mut().for_each(|h| *h = 0);
            for x in 0..nx {
                for y in 0..ny {
                    heights[y] = if column[x * ny + y] { heights[y] + 1 } else { 0 };
                }
                stack.clear();
                for y in 0..=ny {
                    let h = if y < ny { heights[y] } else { 0 };
                    let mut start = y;
                    while let Some(&(s, sh)) = stack.last() {
                        if sh < h {
                            break;
                        }
                        stack.pop();
                        let volume = sh * (y - s) * depth;
                        if volume > best {
                            best = volume;
                            corner = ([x + 1 - sh, s, z0], [x, y - 1, z1]);
                        }
                        start = s;
                    }
                    stack.push((start, h));
                }
            }
        }
    }
    (best, corner)
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkspaceSummary {
    pub resolution_mm: f64,
    pub reachable_cells: usize,
    pub volume_cm3: f64,
    pub extents_mm: [f64; 3],
    pub theta_range_deg: [f64; 2],
    pub rotation_min_deg: f64,
    pub dexterous_box_mm: Option<AxisBox>,
    pub dexterous_edges_mm: [f64; 3],
}

pub fn summarize(grid: &WorkspaceGrid, min_total_rotation: f64) -> WorkspaceSummary {
    let (pos, neg) = grid.rotation_range();
    let dex = dexterous_cube(grid, min_total_rotation).ok();
    WorkspaceSummary {
        resolution_mm: grid.resolution,
        reachable_cells: grid.reachable_count(),
        volume_cm3: grid.volume_cm3(),
        extents_mm: grid.extents(),
        theta_range_deg: [pos.to_degrees(), neg.to_degrees()],
        rotation_min_deg: min_total_rotation.to_degrees(),
        dexterous_edges_mm: dex.map(|b| b.edges()).unwrap_or([0.0; 3]),
        dexterous_box_mm: dex,
    }
}
