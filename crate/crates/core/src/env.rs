//! Occupancy-grid world model.
//!
//! The grid stores raw occupancy plus an inflated copy (every cell whose
//! center lies within `inflation_radius` of an occupied cell center). All
//! queries below run against the inflated copy. Traversals use a supercover
//! walk, so a segment passing exactly through a cell corner touches both
//! side cells.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{angle_between, rotate, Vec2};

/// Angular sampling step of clearance fans (1 degree).
pub const FAN_STEP: f64 = std::f64::consts::PI / 180.0;

/// Default inflation radius (tracker body radius), meters.
pub const DEFAULT_INFLATION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vec2,
    width: usize,
    height: usize,
    raw: Vec<bool>,
    inflated: Vec<bool>,
    inflation_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// +1 for counter-clockwise (left), -1 for clockwise (right).
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

impl OccupancyGrid {
    /// An empty (all free) grid.
    pub fn new(
        resolution: f64,
        origin: Vec2,
        width: usize,
        height: usize,
        inflation_radius: f64,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidArgument(format!("resolution must be > 0, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid must be at least 1x1".into()));
        }
        if !(inflation_radius >= 0.0) {
            return Err(Error::InvalidArgument("inflation radius must be >= 0".into()));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            raw: vec![false; width * height],
            inflated: vec![false; width * height],
            inflation_radius,
        })
    }

    /// Builds a grid from a row-major raster (`cells[iy * width + ix]`, `iy = 0` at `origin`).
    pub fn from_cells(
        resolution: f64,
        origin: Vec2,
        width: usize,
        height: usize,
        cells: Vec<bool>,
        inflation_radius: f64,
    ) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "raster has {} cells, expected {}",
                cells.len(),
                width * height
            )));
        }
        let mut grid = Self::new(resolution, origin, width, height, inflation_radius)?;
        for iy in 0..height {
            for ix in 0..width {
                if cells[iy * width + ix] {
                    grid.set_occupied(ix, iy);
                }
            }
        }
        Ok(grid)
    }

    /// Same raw occupancy, different inflation radius.
    pub fn with_inflation(&self, inflation_radius: f64) -> Result<Self> {
        Self::from_cells(
            self.resolution,
            self.origin,
            self.width,
            self.height,
            self.raw.clone(),
            inflation_radius,
        )
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> Vec2 {
        self.origin
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn inflation_radius(&self) -> f64 {
        self.inflation_radius
    }

    /// Upper corner of the map bounds.
    pub fn max_corner(&self) -> Vec2 {
        self.origin + Vec2::new(self.width as f64, self.height as f64) * self.resolution
    }

    /// Marks a raw cell occupied and inflates around it.
    pub fn set_occupied(&mut self, ix: usize, iy: usize) {
        if ix >= self.width || iy >= self.height {
            return;
        }
        let idx = iy * self.width + ix;
        if self.raw[idx] {
            return;
        }
        self.raw[idx] = true;
        let r = self.inflation_radius / self.resolution;
        let reach = (r + 1e-9).floor() as i64;
        let r2 = r * r + 1e-9;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if (dx * dx + dy * dy) as f64 > r2 {
                    continue;
                }
                let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
                    self.inflated[y as usize * self.width + x as usize] = true;
                }
            }
        }
    }

    /// Marks every cell whose center lies in the axis-aligned box `[lo, hi]`.
    pub fn fill_box(&mut self, lo: Vec2, hi: Vec2) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let c = self.cell_center(ix, iy);
                if c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y {
                    self.set_occupied(ix, iy);
                }
            }
        }
    }

    pub fn is_raw_occupied(&self, ix: usize, iy: usize) -> bool {
        self.raw[iy * self.width + ix]
    }

    /// Inflated occupancy of a cell; cells outside the map count as free.
    pub fn is_occupied(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            return false;
        }
        self.inflated[iy as usize * self.width + ix as usize]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let hi = self.max_corner();
        p.x >= self.origin.x && p.y >= self.origin.y && p.x < hi.x && p.y < hi.y
    }

    /// Cell index holding `p` (may lie outside the map).
    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        let rel = (p - self.origin) / self.resolution;
        (rel.x.floor() as i64, rel.y.floor() as i64)
    }

    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let (ix, iy) = self.cell_of(p);
        Some(((ix as usize).min(self.width - 1), (iy as usize).min(self.height - 1)))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.resolution
    }

    /// True when `p` is inside the map and its cell is free after inflation.
    pub fn is_free(&self, p: Vec2) -> bool {
        match self.world_to_cell(p) {
            Some((ix, iy)) => !self.inflated[iy * self.width + ix],
            None => false,
        }
    }

    fn require_inside(&self, p: Vec2, what: &str) -> Result<()> {
        if p.x.is_finite() && p.y.is_finite() && self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!("{what} ({:.3}, {:.3}) outside map", p.x, p.y)))
        }
    }

    /// Visits every cell touched by the segment `start + t * dir`, `t in [0, len]`,
    /// in order of entry parameter. The callback receives `(ix, iy, t_enter)` and
    /// returns `false` to stop. Traversal also ends when the walk leaves the map.
    pub fn traverse<F>(&self, start: Vec2, dir: Vec2, len: f64, mut visit: F)
    where
        F: FnMut(i64, i64, f64) -> bool,
    {
        let res = self.resolution;
        let rel = (start - self.origin) / res;
        let (mut ix, mut iy) = (rel.x.floor() as i64, rel.y.floor() as i64);
        if !visit(ix, iy, 0.0) {
            return;
        }
        let step_x: i64 = if dir.x > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dir.y > 0.0 { 1 } else { -1 };
        let next_boundary = |i: i64, step: i64, pos: f64, d: f64| -> (f64, f64) {
            if d == 0.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            let b = if step > 0 { (i + 1) as f64 } else { i as f64 };
            ((b - pos) * res / d, res / d.abs())
        };
        let (mut t_max_x, t_delta_x) = next_boundary(ix, step_x, rel.x, dir.x);
        let (mut t_max_y, t_delta_y) = next_boundary(iy, step_y, rel.y, dir.y);
        let (w, h) = (self.width as i64, self.height as i64);
        let out = |x: i64, y: i64| x < 0 || y < 0 || x >= w || y >= h;
        loop {
            let t = t_max_x.min(t_max_y);
            if t > len || !t.is_finite() {
                return;
            }
            let tie = (t_max_x - t_max_y).abs() <= 1e-12 * (1.0 + t);
            if tie {
                // Corner crossing: both side cells are touched.
                if !out(ix + step_x, iy) && !visit(ix + step_x, iy, t) {
                    return;
                }
                if !out(ix, iy + step_y) && !visit(ix, iy + step_y, t) {
                    return;
                }
                ix += step_x;
                iy += step_y;
                t_max_x += t_delta_x;
                t_max_y += t_delta_y;
            } else if t_max_x < t_max_y {
                ix += step_x;
                t_max_x += t_delta_x;
            } else {
                iy += step_y;
                t_max_y += t_delta_y;
            }
            if out(ix, iy) {
                return;
            }
            if !visit(ix, iy, t) {
                return;
            }
        }
    }

    /// Distance from `origin` along unit `dir` to the first inflated-occupied
    /// cell, capped at `max_range`.
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_range: f64) -> Result<f64> {
        self.require_inside(origin, "ray origin")?;
        let max_range = max_range.max(0.0);
        let mut hit = max_range;
        self.traverse(origin, dir, max_range, |ix, iy, t| {
            if self.is_occupied(ix, iy) {
                hit = t.clamp(0.0, max_range);
                false
            } else {
                true
            }
        });
        Ok(hit)
    }

    /// True iff the segment `a -> b` touches no inflated-occupied cell.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> Result<bool> {
        self.require_inside(a, "segment start")?;
        self.require_inside(b, "segment end")?;
        let d = b - a;
        let len = d.norm();
        let dir = if len > 0.0 { d / len } else { Vec2::new(1.0, 0.0) };
        let mut clear = true;
        self.traverse(a, dir, len, |ix, iy, _| {
            if self.is_occupied(ix, iy) {
                clear = false;
            }
            clear
        });
        Ok(clear)
    }

    /// Largest fan angle (sampled every [`FAN_STEP`]) rotating from `start_dir`
    /// toward `side` over which every ray stays clear out to `range`.
    pub fn clearance_fan(
        &self,
        apex: Vec2,
        start_dir: Vec2,
        side: Side,
        max_angle: f64,
        range: f64,
    ) -> Result<f64> {
        self.require_inside(apex, "fan apex")?;
        let max_angle = max_angle.clamp(0.0, std::f64::consts::FRAC_PI_2);
        if range <= 0.0 {
            return Ok(max_angle);
        }
        let clear = |alpha: f64| -> Result<bool> {
            let d = rotate(start_dir, side.sign() * alpha);
            Ok(self.raycast(apex, d, range)? >= range)
        };
        let n = (max_angle / FAN_STEP + 1e-9).floor() as usize;
        for j in 0..=n {
            if !clear(j as f64 * FAN_STEP)? {
                return Ok(if j == 0 { 0.0 } else { (j - 1) as f64 * FAN_STEP });
            }
        }
        let last = n as f64 * FAN_STEP;
        if max_angle - last > 1e-12 && !clear(max_angle)? {
            return Ok(last);
        }
        Ok(max_angle)
    }

    /// Parses the plain-text map format.
    ///
    /// ```text
    /// resolution 0.1
    /// width 4
    /// height 2
    /// origin 0.0 0.0
    /// 0011
    /// 0000
    /// ```
    ///
    /// Raster rows are listed top (`iy = height - 1`) first. Cells may be
    /// separated by whitespace. Lines starting with `#` are ignored.
    pub fn parse(text: &str, inflation_radius: f64) -> Result<Self> {
        let mut resolution = None;
        let mut width = None;
        let mut height = None;
        let mut origin = None;
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::MapParse(format!("line {}: {msg}", lineno + 1));
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let num = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| bad("missing value"))?
                    .parse::<f64>()
                    .map_err(|_| bad("bad number"))
            };
            match key {
                "resolution" => resolution = Some(num(parts.next())?),
                "width" => width = Some(num(parts.next())? as usize),
                "height" => height = Some(num(parts.next())? as usize),
                "origin" => {
                    let x = num(parts.next())?;
                    let y = num(parts.next())?;
                    origin = Some(Vec2::new(x, y));
                }
                _ => {
                    let mut row = Vec::new();
                    for ch in line.chars().filter(|c| !c.is_whitespace()) {
                        match ch {
                            '0' => row.push(false),
                            '1' => row.push(true),
                            _ => return Err(bad(&format!("unexpected character {ch:?}"))),
                        }
                    }
                    rows.push(row);
                }
            }
        }
        let resolution = resolution.ok_or_else(|| Error::MapParse("missing resolution".into()))?;
        let width = width.ok_or_else(|| Error::MapParse("missing width".into()))?;
        let height = height.ok_or_else(|| Error::MapParse("missing height".into()))?;
        let origin = origin.ok_or_else(|| Error::MapParse("missing origin".into()))?;
        if rows.len() != height {
            return Err(Error::MapParse(format!("expected {height} raster rows, found {}", rows.len())));
        }
        let mut cells = vec![false; width * height];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::MapParse(format!(
                    "raster row {} has {} cells, expected {width}",
                    r + 1,
                    row.len()
                )));
            }
            let iy = height - 1 - r;
            cells[iy * width..(iy + 1) * width].copy_from_slice(row);
        }
        Self::from_cells(resolution, origin, width, height, cells, inflation_radius)
    }

    pub fn load(path: impl AsRef<Path>, inflation_radius: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MapParse(format!("{}: {e}", path.display())))?;
        Self::parse(&text, inflation_radius)
    }

    /// Serializes raw occupancy in the format accepted by [`OccupancyGrid::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "resolution {}", self.resolution);
        let _ = writeln!(s, "width {}", self.width);
        let _ = writeln!(s, "height {}", self.height);
        let _ = writeln!(s, "origin {} {}", self.origin.x, self.origin.y);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.raw[iy * self.width + ix] { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }
}

/// Planar circular sector: points within `radius` of `apex` whose direction
/// is within `half_angle` of `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub apex: Vec2,
    pub axis: Vec2,
    pub half_angle: f64,
    pub radius: f64,
}

impl Sector {
    pub fn new(apex: Vec2, axis: Vec2, half_angle: f64, radius: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("sector axis must be nonzero".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&half_angle) {
            return Err(Error::InvalidArgument(format!("half angle {half_angle} outside [0, pi]")));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument("sector radius must be >= 0".into()));
        }
        Ok(Self { apex, axis: axis / n, half_angle, radius })
    }

    /// The apex itself counts as a member.
    pub fn contains(&self, x: Vec2) -> bool {
        let d = x - self.apex;
        let r = d.norm();
        if r > self.radius {
            return false;
        }
        r == 0.0 || angle_between(d, self.axis) <= self.half_angle
    }
}
