//! Honeycomb key grid geometry.
//!
//! Keys are laid out row-major with odd rows shifted right by half a key, so
//! every one of a key's (up to) six neighbors sits exactly one key width
//! away. Pixel storage is y-down; angles are reported in the visual frame
//! (right = 0°, up = 90°, counterclockwise positive).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of angular bins used for direction-aware pointing models.
pub const N_BINS: usize = 16;
/// Width of a single angular bin, in degrees.
pub const BIN_WIDTH_DEG: f64 = 360.0 / N_BINS as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPosition {
    pub row: usize,
    pub col: usize,
    #[serde(rename = "cx")]
    pub center_x: f64,
    #[serde(rename = "cy")]
    pub center_y: f64,
}

impl KeyPosition {
    pub fn same_key(&self, other: &KeyPosition) -> bool {
        self.row == other.row && self.col == other.col
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDoc")]
pub struct HexGrid {
    rows: usize,
    cols: usize,
    #[serde(rename = "key_width_px")]
    key_width: f64,
    positions: Vec<KeyPosition>,
}

#[derive(Deserialize)]
struct GridDoc {
    rows: usize,
    cols: usize,
    key_width_px: f64,
    positions: Vec<KeyPosition>,
}

impl TryFrom<GridDoc> for HexGrid {
    type Error = Error;

    fn try_from(doc: GridDoc) -> Result<Self> {
        let grid = build_grid(doc.rows, doc.cols, doc.key_width_px)?;
        if grid.positions.len() != doc.positions.len() {
            return Err(Error::invalid("grid position count does not match rows × cols"));
        }
        for (expected, got) in grid.positions.iter().zip(&doc.positions) {
            let tol = 1e-6 * grid.key_width;
            if !expected.same_key(got)
                || (expected.center_x - got.center_x).abs() > tol
                || (expected.center_y - got.center_y).abs() > tol
            {
                return Err(Error::invalid(format!(
                    "grid position ({}, {}) does not follow honeycomb packing",
                    got.row, got.col
                )));
            }
        }
        Ok(grid)
    }
}

/// Builds a `rows × cols` honeycomb with the top-left key centered at the origin.
pub fn build_grid(rows: usize, cols: usize, key_width: f64) -> Result<HexGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid needs at least one row and one column"));
    }
    if !(key_width.is_finite() && key_width > 0.0) {
        return Err(Error::invalid(format!("key width must be positive, got {key_width}")));
    }
    let pitch_y = key_width * 3f64.sqrt() / 2.0;
    let mut positions = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let offset = if row % 2 == 1 { key_width / 2.0 } else { 0.0 };
        for col in 0..cols {
            positions.push(KeyPosition {
                row,
                col,
                center_x: col as f64 * key_width + offset,
                center_y: row as f64 * pitch_y,
            });
        }
    }
    Ok(HexGrid {
        rows,
        cols,
        key_width,
        positions,
    })
}

impl HexGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn key_width(&self) -> f64 {
        self.key_width
    }

    /// Row-major key positions.
    pub fn positions(&self) -> &[KeyPosition] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.rows && col < self.cols).then(|| row * self.cols + col)
    }

    /// Index of a position on this grid, matched by (row, col).
    pub fn index_of_key(&self, key: &KeyPosition) -> Option<usize> {
        self.index_of(key.row, key.col)
    }

    pub fn position(&self, index: usize) -> &KeyPosition {
        &self.positions[index]
    }

    /// The key nearest the geometric middle of the grid.
    pub fn center_index(&self) -> usize {
        let row = (self.rows - 1) / 2;
        let col = (self.cols - 1) / 2;
        row * self.cols + col
    }

    /// Indices of the keys one key width away from `index`.
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let p = &self.positions[index];
        let tol = 1e-9 * self.key_width;
        self.positions
            .iter()
            .enumerate()
            .filter(|(i, q)| *i != index && (distance_px(p, q) - self.key_width).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Attributes a pixel location to the key with the nearest center (ties: lowest index).
    pub fn nearest_key(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.positions.iter().enumerate() {
            let d = (p.center_x - x).hypot(p.center_y - y);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

pub fn distance_px(p: &KeyPosition, q: &KeyPosition) -> f64 {
    (q.center_x - p.center_x).hypot(q.center_y - p.center_y)
}

/// Direction of travel from `p` to `q` in degrees, in `[0, 360)`.
pub fn angle_deg(p: &KeyPosition, q: &KeyPosition) -> Result<f64> {
    let dx = q.center_x - p.center_x;
    // storage is y-down; flip into the visual frame
    let dy = p.center_y - q.center_y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let mut angle = dy.atan2(dx).to_degrees();
    if angle < 0.0 {
        angle += 360.0;
    }
    if angle >= 360.0 {
        angle -= 360.0;
    }
    // normalizes -0.0
    Ok(angle + 0.0)
}

/// Maps an angle to one of 16 bins centered on multiples of 22.5°.
///
/// Bin `k` covers `[k·22.5 − 11.25, k·22.5 + 11.25)`; bin 0 wraps around 0°.
pub fn angle_bin(angle: f64) -> usize {
    let shifted = (angle + BIN_WIDTH_DEG / 2.0) / BIN_WIDTH_DEG;
    (shifted.floor() as i64).rem_euclid(N_BINS as i64) as usize
}
