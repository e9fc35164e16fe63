use std::f64::consts::PI;

use crate::panocam::{dir_to_angles, Pose, SensorModel};
use crate::scene::Scene;

use super::{project_scene, Projected, RasterConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileEntry {
    pub index: u32,
    /// Distance from the sensor origin to the splat center.
    pub key: f64,
}

/// Per-tile splat lists, each sorted by `(key, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub lists: Vec<Vec<TileEntry>>,
}

impl TileGrid {
    pub(crate) fn empty(sensor: &SensorModel, tile_size: usize) -> Self {
        assert!(tile_size > 0, "tile size must be positive");
        let tiles_x = sensor.width.div_ceil(tile_size);
        let tiles_y = sensor.height.div_ceil(tile_size);
        TileGrid { tile_size, width: sensor.width, height: sensor.height, tiles_x, tiles_y, lists: vec![Vec::new(); tiles_x * tiles_y] }
    }

    pub fn tile_count(&self) -> usize {
        self.lists.len()
    }

    /// Pixel rectangle `(col0, col1, row0, row1)` of a tile, half-open.
    pub fn tile_pixels(&self, tile: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (tile % self.tiles_x, tile / self.tiles_x);
        let c0 = tx * self.tile_size;
        let r0 = ty * self.tile_size;
        (c0, (c0 + self.tile_size).min(self.width), r0, (r0 + self.tile_size).min(self.height))
    }

    pub fn tile_of_pixel(&self, col: usize, row: usize) -> usize {
        (row / self.tile_size) * self.tiles_x + col / self.tile_size
    }

    pub(crate) fn insert_all(&mut self, index: u32, key: f64) {
        for list in &mut self.lists {
            list.push(TileEntry { index, key });
        }
    }

    /// Inserts into every tile overlapping the given column spans and row span (inclusive).
    pub(crate) fn insert(&mut self, index: u32, key: f64, cols: &[(usize, usize)], rows: (usize, usize)) {
        let ts = self.tile_size;
        let mut tile_cols: Vec<usize> = cols.iter().flat_map(|&(a, b)| (a / ts)..=(b / ts)).collect();
        tile_cols.sort_unstable();
        tile_cols.dedup();
        for ty in (rows.0 / ts)..=(rows.1 / ts) {
            for &tx in &tile_cols {
                self.lists[ty * self.tiles_x + tx].push(TileEntry { index, key });
            }
        }
    }

    pub(crate) fn finish(&mut self) {
        for list in &mut self.lists {
            list.sort_by(|a, b| a.key.total_cmp(&b.key).then(a.index.cmp(&b.index)));
        }
    }
}

/// Integer pixels whose centers `i + 0.5` fall in `[lo, hi]`, wrapped onto `[0, width)`.
pub(crate) fn column_spans(lo: f64, hi: f64, width: usize) -> Vec<(usize, usize)> {
    let first = (lo - 0.5).ceil();
    let last = (hi - 0.5).floor();
    if !(first <= last) {
        return Vec::new();
    }
    if last - first + 1.0 >= width as f64 {
        return vec![(0, width - 1)];
    }
    let w = width as i64;
    let a = (first as i64).rem_euclid(w) as usize;
    let b = (last as i64).rem_euclid(w) as usize;
    if a <= b {
        vec![(a, b)]
    } else {
        vec![(a, width - 1), (0, b)]
    }
}

/// Integer rows whose centers fall in `[lo, hi]`, clipped to the image.
pub(crate) fn row_span(lo: f64, hi: f64, height: usize) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(height as f64 - 1.0);
    (first <= last).then(|| (first as usize, last as usize))
}

/// Conservative binning: angular radius `psi = asin(radius / d)` around the center
/// direction, one pixel of padding, cyclic azimuth. Splats whose bounding ball
/// contains the sensor go to every tile.
pub(crate) fn bin_projected(projected: &[Projected], sensor: &SensorModel, tile_size: usize) -> TileGrid {
    let mut grid = TileGrid::empty(sensor, tile_size);
    let (w, h) = (sensor.width as f64, sensor.height as f64);
    let px_per_rad_x = w / (2.0 * PI);
    let px_per_rad_y = h / sensor.vfov_span();
    for (i, p) in projected.iter().enumerate() {
        if !p.visible {
            continue;
        }
        let index = i as u32;
        let ratio = p.radius / p.dist;
        if !(ratio < 1.0) {
            grid.insert_all(index, p.dist);
            continue;
        }
        let psi = ratio.asin();
        let a = match dir_to_angles(&p.splat.center) {
            Ok(a) => a,
            Err(_) => {
                grid.insert_all(index, p.dist);
                continue;
            }
        };
        let eta_c = (a.theta - sensor.vfov_min) * px_per_rad_y;
        let rows = match row_span(eta_c - psi * px_per_rad_y - 1.0, eta_c + psi * px_per_rad_y + 1.0, sensor.height) {
            Some(r) => r,
            None => continue,
        };
        let sin_t = a.theta.sin();
        let cols = if sin_t <= ratio {
            vec![(0, sensor.width - 1)]
        } else {
            let dphi = (ratio / sin_t).asin();
            let xi_c = (a.phi + PI) * px_per_rad_x;
            let half = dphi * px_per_rad_x + 1.0;
            column_spans(xi_c - half, xi_c + half, sensor.width)
        };
        if cols.is_empty() {
            continue;
        }
        grid.insert(index, p.dist, &cols, rows);
    }
    grid.finish();
    grid
}

/// Bins every visible primitive of `scene` at time `t` for a sensor at `pose`.
pub fn bin_splats(scene: &Scene, t: f64, sensor: &SensorModel, pose: &Pose, tile_size: usize) -> TileGrid {
    let cfg = RasterConfig { tile_size, ..RasterConfig::default() };
    let projected = project_scene(scene, t, pose, &cfg);
    bin_projected(&projected, sensor, tile_size)
}
