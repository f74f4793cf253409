//! Taxel grid geometry and cylinder contact models.
//!
//! A rigid cylinder resting on the sensor touches it along a line segment.
//! Each taxel owns an axis-aligned rectangle centred on its row/column
//! intersection; a taxel fires when the segment meets its rectangle. The
//! intersection model uses the physical electrode overlap, the expanded model
//! a calibrated larger rectangle so that contacts near a taxel edge also wake
//! its neighbours. Grid dimensions are in millimetres, poses in metres.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::grid::{BinaryMap, Grid};
use crate::GRAVITY;

/// Geometry of the sensing array. All lengths in mm.
///
/// Rows run along the robot's forward (x) axis, columns along the lateral
/// (y) axis. Widths (`*_w`) are x extents, heights (`*_h`) are y extents.
/// The grid is centred on the sensor origin; `coverage_*` is metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaxelGrid {
    pub rows: usize,
    pub cols: usize,
    pub coverage_x: f64,
    pub coverage_y: f64,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub intersect_w: f64,
    pub intersect_h: f64,
    pub expanded_w: f64,
    pub expanded_h: f64,
}

impl Default for TaxelGrid {
    fn default() -> Self {
        TaxelGrid {
            rows: 17,
            cols: 13,
            coverage_x: 250.0,
            coverage_y: 180.0,
            pitch_x: 14.3,
            pitch_y: 12.8,
            intersect_w: 11.3,
            intersect_h: 10.5,
            expanded_w: 18.3,
            expanded_h: 17.5,
        }
    }
}

impl TaxelGrid {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: String| Err(ConfigError::invalid("grid", reason));
        if self.rows == 0 || self.cols == 0 {
            return bad("rows and cols must be positive".into());
        }
        let lengths = [
            self.coverage_x,
            self.coverage_y,
            self.pitch_x,
            self.pitch_y,
            self.intersect_w,
            self.intersect_h,
            self.expanded_w,
            self.expanded_h,
        ];
        if lengths.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return bad("all lengths must be finite and positive".into());
        }
        if self.rows as f64 * self.pitch_x > self.coverage_x + self.pitch_x
            || self.cols as f64 * self.pitch_y > self.coverage_y + self.pitch_y
        {
            return bad("grid does not fit its coverage".into());
        }
        if self.expanded_w <= self.pitch_x || self.expanded_h <= self.pitch_y {
            return bad("expanded rectangles must overlap their neighbours".into());
        }
        if self.intersect_w >= self.pitch_x || self.intersect_h >= self.pitch_y {
            return bad("intersection rectangles must not overlap".into());
        }
        Ok(())
    }

    /// Centre of taxel (row, col) in mm.
    #[inline]
    pub fn taxel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (row as f64 - (self.rows as f64 - 1.0) / 2.0) * self.pitch_x,
            (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.pitch_y,
        )
    }

    pub fn taxel_count(&self) -> usize {
        self.rows * self.cols
    }

    fn half_extent(&self, rect: RectKind) -> (f64, f64) {
        match rect {
            RectKind::Intersect => (self.intersect_w / 2.0, self.intersect_h / 2.0),
            RectKind::Expanded => (self.expanded_w / 2.0, self.expanded_h / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RectKind {
    Intersect,
    Expanded,
}

/// Planar pose and size of the carried cylinder in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderPose {
    /// Axis centre, m, x forward.
    pub x: f64,
    pub y: f64,
    /// rad
    pub yaw: f64,
    pub radius: f64,
    pub length: f64,
    /// kg
    pub mass: f64,
}

impl CylinderPose {
    pub const MIN_RADIUS: f64 = 0.015;
    pub const MAX_RADIUS: f64 = 0.09;

    pub fn new(x: f64, y: f64, yaw: f64, radius: f64, length: f64, mass: f64) -> Self {
        CylinderPose {
            x,
            y,
            yaw,
            radius,
            length,
            mass,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let all_finite = [self.x, self.y, self.yaw, self.radius, self.length, self.mass]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ConfigError::invalid("pose", "non-finite value"));
        }
        if !(Self::MIN_RADIUS..=Self::MAX_RADIUS).contains(&self.radius) {
            return Err(ConfigError::invalid(
                "pose",
                format!("radius {} outside [0.015, 0.09] m", self.radius),
            ));
        }
        if self.length <= 0.0 {
            return Err(ConfigError::invalid("pose", "length must be positive"));
        }
        if self.mass < 0.0 {
            return Err(ConfigError::invalid("pose", "mass must be non-negative"));
        }
        Ok(())
    }
}

/// Line segment in the sensor plane (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Segment {
    fn scaled(&self, k: f64) -> Segment {
        Segment {
            start: (self.start.0 * k, self.start.1 * k),
            end: (self.end.0 * k, self.end.1 * k),
        }
    }
}

/// How taxel activations are derived from the contact segment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ContactModel {
    /// Physical electrode overlap only.
    Intersect,
    /// Intersection map blurred by a 3×3 Gaussian, then thresholded.
    Filtered { kernel_sigma: f64, threshold: f64 },
    /// Calibrated enlarged collision rectangles.
    #[default]
    Expanded,
}

impl ContactModel {
    pub const DEFAULT_KERNEL_SIGMA: f64 = 1.0;
    pub const DEFAULT_FILTER_THRESHOLD: f64 = 0.25;

    pub fn filtered_default() -> Self {
        ContactModel::Filtered {
            kernel_sigma: Self::DEFAULT_KERNEL_SIGMA,
            threshold: Self::DEFAULT_FILTER_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let ContactModel::Filtered {
            kernel_sigma,
            threshold,
        } = *self
        {
            if !(kernel_sigma > 0.0 && kernel_sigma.is_finite()) {
                return Err(ConfigError::invalid("contact_model", "kernel_sigma must be positive"));
            }
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(ConfigError::invalid("contact_model", "threshold must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ContactModel::Intersect => "intersect",
            ContactModel::Filtered { .. } => "filtered",
            ContactModel::Expanded => "expanded",
        }
    }
}

/// Per-taxel normal force in N before binarization.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceMap {
    pub values: Grid<f64>,
    /// Set when a massive object activates no taxel.
    pub no_support: bool,
}

impl ForceMap {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ForceMap {
            values: Grid::new(rows, cols),
            no_support: false,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.as_slice().iter().sum()
    }
}

/// Line where the cylinder touches the sensor plane.
pub fn contact_segment(pose: &CylinderPose) -> Segment {
    let (s, c) = pose.yaw.sin_cos();
    let h = pose.length / 2.0;
    Segment {
        start: (pose.x - h * c, pose.y - h * s),
        end: (pose.x + h * c, pose.y + h * s),
    }
}

/// Closed segment / closed axis-aligned rectangle test by parametric
/// clipping. Touching the boundary counts as intersecting.
pub fn segment_intersects_rect(seg: &Segment, min: (f64, f64), max: (f64, f64)) -> bool {
    let (x0, y0) = seg.start;
    let dx = seg.end.0 - x0;
    let dy = seg.end.1 - y0;
    let mut t_lo = 0.0_f64;
    let mut t_hi = 1.0_f64;
    for (p0, d, lo, hi) in [(x0, dx, min.0, max.0), (y0, dy, min.1, max.1)] {
        if d == 0.0 {
            if p0 < lo || p0 > hi {
                return false;
            }
            continue;
        }
        let mut t1 = (lo - p0) / d;
        let mut t2 = (hi - p0) / d;
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        t_lo = t_lo.max(t1);
        t_hi = t_hi.min(t2);
        if t_lo > t_hi {
            return false;
        }
    }
    true
}

fn rect_hits(grid: &TaxelGrid, seg_mm: &Segment, rect: RectKind) -> BinaryMap {
    let (hw, hh) = grid.half_extent(rect);
    let mut out = BinaryMap::new(grid.rows, grid.cols);

    // Only taxels whose rectangle overlaps the segment's bounding box can hit.
    let (xmin, xmax) = min_max(seg_mm.start.0, seg_mm.end.0);
    let (ymin, ymax) = min_max(seg_mm.start.1, seg_mm.end.1);
    let row_c = (grid.rows as f64 - 1.0) / 2.0;
    let col_c = (grid.cols as f64 - 1.0) / 2.0;
    let Some((r0, r1)) = index_span((xmin - hw) / grid.pitch_x + row_c, (xmax + hw) / grid.pitch_x + row_c, grid.rows)
    else {
        return out;
    };
    let Some((c0, c1)) = index_span((ymin - hh) / grid.pitch_y + col_c, (ymax + hh) / grid.pitch_y + col_c, grid.cols)
    else {
        return out;
    };

    for r in r0..=r1 {
        for c in c0..=c1 {
            let (cx, cy) = grid.taxel_center(r, c);
            if segment_intersects_rect(seg_mm, (cx - hw, cy - hh), (cx + hw, cy + hh)) {
                out.set(r, c, 1);
            }
        }
    }
    out
}

fn min_max(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

// Index range [floor(lo) - 1, ceil(hi) + 1] clamped to the grid; the exact
// rectangle test decides membership.
fn index_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let lo = lo.floor() - 1.0;
    let hi = hi.ceil() + 1.0;
    if hi < 0.0 || lo > (n - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, hi.min((n - 1) as f64) as usize))
}

/// Normalised 3×3 Gaussian kernel, row-major.
pub fn gaussian_kernel3(sigma: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    let mut sum = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let di = i as f64 - 1.0;
            let dj = j as f64 - 1.0;
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            sum += *v;
        }
    }
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    k
}

/// Zero-padded 3×3 convolution of a binary map.
pub fn blur3(map: &BinaryMap, kernel: &[[f64; 3]; 3]) -> Grid<f64> {
    let (rows, cols) = (map.rows(), map.cols());
    let mut out = Grid::<f64>::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (ki, krow) in kernel.iter().enumerate() {
                let rr = r as isize + ki as isize - 1;
                if rr < 0 || rr >= rows as isize {
                    continue;
                }
                for (kj, w) in krow.iter().enumerate() {
                    let cc = c as isize + kj as isize - 1;
                    if cc < 0 || cc >= cols as isize {
                        continue;
                    }
                    acc += w * *map.get(rr as usize, cc as usize) as f64;
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Binary activation map of the cylinder under `model`.
///
/// Poses entirely off the sensor yield an all-zero map.
pub fn active_taxels(grid: &TaxelGrid, pose: &CylinderPose, model: &ContactModel) -> BinaryMap {
    let seg_mm = contact_segment(pose).scaled(1000.0);
    match *model {
        ContactModel::Intersect => rect_hits(grid, &seg_mm, RectKind::Intersect),
        ContactModel::Expanded => rect_hits(grid, &seg_mm, RectKind::Expanded),
        ContactModel::Filtered {
            kernel_sigma,
            threshold,
        } => {
            let base = rect_hits(grid, &seg_mm, RectKind::Intersect);
            let blurred = blur3(&base, &gaussian_kernel3(kernel_sigma));
            blurred.map(|&v| (v >= threshold) as u8)
        }
    }
}

/// Distributes the cylinder weight uniformly over its active taxels.
pub fn force_map(grid: &TaxelGrid, pose: &CylinderPose, model: &ContactModel) -> ForceMap {
    let active = active_taxels(grid, pose, model);
    force_from_active(&active, pose.mass)
}

/// Uniform split of `mass`·g over the active cells of `active`.
pub fn force_from_active(active: &BinaryMap, mass: f64) -> ForceMap {
    let n = active.count_active();
    let mut out = ForceMap::zeros(active.rows(), active.cols());
    if n == 0 {
        out.no_support = mass > 0.0;
        return out;
    }
    if mass == 0.0 {
        return out;
    }
    let per = mass * GRAVITY / n as f64;
    for (dst, &a) in out.values.as_mut_slice().iter_mut().zip(active.as_slice()) {
        if a != 0 {
            *dst = per;
        }
    }
    out
}
