//! Tracker-side geometry built from a predicted target track: occlusion-free
//! waypoints, convex flight corridors, and visible regions.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::env::{OccupancyGrid, Sector, FAN_STEP};
use crate::error::{Error, Result};
use crate::geom::{heading, rotate, unit_from_heading, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorridorParams {
    /// Samples on each occlusion-free circle.
    pub circle_samples: usize,
    /// Visible-region half-angle cap, radians.
    pub theta_cap: f64,
    /// Constant margin angle, radians.
    pub theta_alpha: f64,
    /// Turn-probability margin gain, radians.
    pub theta_beta: f64,
    /// Face growth cap for corridor boxes, meters (`None` grows to the map bounds).
    pub max_grow: Option<f64>,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            circle_samples: 72,
            theta_cap: 75f64.to_radians(),
            theta_alpha: 0.2,
            theta_beta: 0.6,
            max_grow: Some(3.0),
        }
    }
}

/// Convex region `{x : n_r . x <= b_r for every row r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub normals: Vec<Vec2>,
    pub offsets: Vec<f64>,
}

impl Polytope {
    pub fn from_box(lo: Vec2, hi: Vec2) -> Self {
        Self {
            normals: vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0)],
            offsets: vec![-lo.x, hi.x, -lo.y, hi.y],
        }
    }

    /// Smallest slack `b_r - n_r . x`; positive inside.
    pub fn margin(&self, x: Vec2) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, b)| b - n.dot(&x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.margin(x) >= 0.0
    }

    /// Axis-aligned bounds, valid for boxes built by [`Polytope::from_box`].
    pub fn box_bounds(&self) -> (Vec2, Vec2) {
        (Vec2::new(-self.offsets[0], -self.offsets[2]), Vec2::new(self.offsets[1], self.offsets[3]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoints {
    pub points: Vec<Vec2>,
    /// `true` where no occlusion-free point existed and the previous one was reused.
    pub degraded: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    cell: (i64, i64),
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.cell.cmp(&self.cell))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn cell_free(map: &OccupancyGrid, c: (i64, i64)) -> bool {
    c.0 >= 0 && c.1 >= 0 && (c.0 as usize) < map.width() && (c.1 as usize) < map.height() && !map.is_occupied(c.0, c.1)
}

/// 8-connected Dijkstra over free cells from the cell of `start`, out to `limit` meters.
fn grid_distances(map: &OccupancyGrid, start: Vec2, limit: f64) -> HashMap<(i64, i64), f64> {
    let res = map.resolution();
    let s = map.cell_of(start);
    let mut dist = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(s, 0.0);
    heap.push(HeapItem { cost: 0.0, cell: s });
    while let Some(HeapItem { cost, cell }) = heap.pop() {
        if cost > dist[&cell] || cost > limit {
            continue;
        }
        for (dx, dy) in NEIGHBORS {
            let n = (cell.0 + dx, cell.1 + dy);
            if !cell_free(map, n) {
                continue;
            }
            if dx != 0 && dy != 0 && !(cell_free(map, (cell.0 + dx, cell.1)) && cell_free(map, (cell.0, cell.1 + dy))) {
                continue;
            }
            let c = cost + res * if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            if dist.get(&n).is_none_or(|&d| c < d) {
                dist.insert(n, c);
                heap.push(HeapItem { cost: c, cell: n });
            }
        }
    }
    dist
}

/// For each predicted target position, picks the point on the circle of radius
/// `d0` around it that sees it and is cheapest to reach from the previous
/// waypoint (the first previous waypoint is the tracker).
pub fn occlusion_free_waypoints(
    map: &OccupancyGrid,
    track: &[Vec2],
    tracker_pos: Vec2,
    d0: f64,
    params: &CorridorParams,
) -> Result<Waypoints> {
    if !map.contains(tracker_pos) {
        return Err(Error::OutOfBounds("tracker outside map".into()));
    }
    let n = params.circle_samples.max(1);
    let mut prev = tracker_pos;
    let mut out = Waypoints { points: Vec::with_capacity(track.len()), degraded: Vec::with_capacity(track.len()) };
    for &z in track {
        let base = {
            let d = prev - z;
            if d.norm() > 1e-9 { heading(d) } else { 0.0 }
        };
        let mut candidates = Vec::new();
        if map.contains(z) {
            for j in 0..n {
                let x = z + unit_from_heading(base + j as f64 * std::f64::consts::TAU / n as f64) * d0;
                if map.is_free(x) && map.line_of_sight(x, z)? {
                    candidates.push(x);
                }
            }
        }
        let mut best: Option<(f64, Vec2)> = None;
        let mut grid: Option<HashMap<(i64, i64), f64>> = None;
        for x in candidates {
            let cost = if map.line_of_sight(prev, x)? {
                Some((x - prev).norm())
            } else {
                let g = grid.get_or_insert_with(|| grid_distances(map, prev, (z - prev).norm() + 2.0 * d0 + 4.0));
                let c = map.cell_of(x);
                g.get(&c).map(|d| d + (x - map.cell_center(c.0 as usize, c.1 as usize)).norm())
            };
            if let Some(c) = cost {
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, x));
                }
            }
        }
        match best {
            Some((_, x)) => {
                out.points.push(x);
                out.degraded.push(false);
                prev = x;
            }
            None => {
                out.points.push(prev);
                out.degraded.push(true);
            }
        }
    }
    Ok(out)
}

/// Corridor over a polyline: one box per (possibly subdivided) segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub polytopes: Vec<Polytope>,
    /// Refined polyline; polytope `i` holds segment `vertices[i] -> vertices[i + 1]`.
    pub vertices: Vec<Vec2>,
    /// Index of the input segment each polytope came from.
    pub source_segment: Vec<usize>,
}

fn segment_box_cells(map: &OccupancyGrid, a: Vec2, b: Vec2) -> ((i64, i64), (i64, i64)) {
    let lo = map.cell_of(Vec2::new(a.x.min(b.x), a.y.min(b.y)));
    let hi = map.cell_of(Vec2::new(a.x.max(b.x), a.y.max(b.y)));
    (lo, hi)
}

fn cells_free(map: &OccupancyGrid, lo: (i64, i64), hi: (i64, i64)) -> bool {
    (lo.1..=hi.1).all(|y| (lo.0..=hi.0).all(|x| cell_free(map, (x, y))))
}

fn on_cell_boundary(map: &OccupancyGrid, p: Vec2) -> bool {
    let rel = (p - map.origin()) / map.resolution();
    (rel.x - rel.x.round()).abs() < 1e-6 || (rel.y - rel.y.round()).abs() < 1e-6
}

fn split_until_boxed(map: &OccupancyGrid, a: Vec2, b: Vec2, depth: usize, out: &mut Vec<(Vec2, Vec2)>) -> Result<()> {
    let (lo, hi) = segment_box_cells(map, a, b);
    if cells_free(map, lo, hi) {
        out.push((a, b));
        return Ok(());
    }
    if depth > 16 {
        return Err(Error::NoFreeSpace("segment hugs obstacles too closely for a corridor".into()));
    }
    // Split off cell boundaries so the junction sits strictly inside the
    // cell shared by both halves' boxes.
    let m = [0.5, 0.45, 0.55, 0.4, 0.6]
        .iter()
        .map(|f| a + (b - a) * *f)
        .find(|m| !on_cell_boundary(map, *m))
        .unwrap_or((a + b) / 2.0);
    split_until_boxed(map, a, m, depth + 1, out)?;
    split_until_boxed(map, m, b, depth + 1, out)
}

/// Grid A* between two free points, shortcut by line of sight.
pub fn grid_astar(map: &OccupancyGrid, a: Vec2, b: Vec2) -> Result<Vec<Vec2>> {
    let res = map.resolution();
    let s = map.cell_of(a);
    let g = map.cell_of(b);
    if !cell_free(map, s) || !cell_free(map, g) {
        return Err(Error::NoFreeSpace("A* endpoint not free".into()));
    }
    let h = |c: (i64, i64)| (((c.0 - g.0) as f64).powi(2) + ((c.1 - g.1) as f64).powi(2)).sqrt() * res;
    let mut best: HashMap<(i64, i64), f64> = HashMap::new();
    let mut parent: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(s, 0.0);
    heap.push(HeapItem { cost: h(s), cell: s });
    let mut found = false;
    let budget = map.width() * map.height();
    let mut pops = 0;
    while let Some(HeapItem { cell, .. }) = heap.pop() {
        pops += 1;
        if cell == g {
            found = true;
            break;
        }
        if pops > budget {
            break;
        }
        let gc = best[&cell];
        for (dx, dy) in NEIGHBORS {
            let n = (cell.0 + dx, cell.1 + dy);
            if !cell_free(map, n) {
                continue;
            }
            if dx != 0 && dy != 0 && !(cell_free(map, (cell.0 + dx, cell.1)) && cell_free(map, (cell.0, cell.1 + dy))) {
                continue;
            }
            let c = gc + res * if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            if best.get(&n).is_none_or(|&d| c < d) {
                best.insert(n, c);
                parent.insert(n, cell);
                heap.push(HeapItem { cost: c + h(n), cell: n });
            }
        }
    }
    if !found {
        return Err(Error::NoFreeSpace("no grid path between corridor endpoints".into()));
    }
    let mut cells = vec![g];
    let mut cur = g;
    while let Some(&p) = parent.get(&cur) {
        cells.push(p);
        cur = p;
    }
    cells.reverse();
    let mut pts: Vec<Vec2> = cells.iter().map(|c| map.cell_center(c.0 as usize, c.1 as usize)).collect();
    pts[0] = a;
    *pts.last_mut().unwrap() = b;
    // Greedy line-of-sight shortcutting.
    let mut out = vec![a];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !map.line_of_sight(pts[i], pts[j])? {
            j -= 1;
        }
        out.push(pts[j]);
        i = j;
    }
    Ok(out)
}

fn grow_box(map: &OccupancyGrid, mut lo: (i64, i64), mut hi: (i64, i64), max_grow: Option<f64>) -> ((i64, i64), (i64, i64)) {
    let cap = max_grow.map(|m| (m / map.resolution()).floor() as i64).unwrap_or(i64::MAX);
    let (lo0, hi0) = (lo, hi);
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut open = [true; 4];
    while open.iter().any(|&o| o) {
        if open[0] {
            let x = lo.0 - 1;
            if x < 0 || lo0.0 - x > cap || !(lo.1..=hi.1).all(|y| cell_free(map, (x, y))) {
                open[0] = false;
            } else {
                lo.0 = x;
            }
        }
        if open[1] {
            let x = hi.0 + 1;
            if x >= w || x - hi0.0 > cap || !(lo.1..=hi.1).all(|y| cell_free(map, (x, y))) {
                open[1] = false;
            } else {
                hi.0 = x;
            }
        }
        if open[2] {
            let y = lo.1 - 1;
            if y < 0 || lo0.1 - y > cap || !(lo.0..=hi.0).all(|x| cell_free(map, (x, y))) {
                open[2] = false;
            } else {
                lo.1 = y;
            }
        }
        if open[3] {
            let y = hi.1 + 1;
            if y >= h || y - hi0.1 > cap || !(lo.0..=hi.0).all(|x| cell_free(map, (x, y))) {
                open[3] = false;
            } else {
                hi.1 = y;
            }
        }
    }
    (lo, hi)
}

/// Builds a chain of free axis-aligned boxes covering `path`.
///
/// A segment whose bounding cells are not all free is bisected until they
/// are; a segment without line of sight is first rerouted by grid A*.
pub fn generate_corridor(map: &OccupancyGrid, path: &[Vec2], max_grow: Option<f64>) -> Result<Corridor> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("corridor path needs at least two vertices".into()));
    }
    if let Some(p) = path.iter().find(|p| !map.is_free(**p)) {
        return Err(Error::NoFreeSpace(format!("corridor vertex ({:.2}, {:.2}) not free", p.x, p.y)));
    }
    let mut corridor = Corridor { polytopes: Vec::new(), vertices: vec![path[0]], source_segment: Vec::new() };
    for (s, w) in path.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let legs = if map.line_of_sight(a, b)? { vec![a, b] } else { grid_astar(map, a, b)? };
        let mut pieces = Vec::new();
        for leg in legs.windows(2) {
            split_until_boxed(map, leg[0], leg[1], 0, &mut pieces)?;
        }
        for (pa, pb) in pieces {
            let (lo, hi) = segment_box_cells(map, pa, pb);
            let (lo, hi) = grow_box(map, lo, hi, max_grow);
            let res = map.resolution();
            let o = map.origin();
            let wlo = o + Vec2::new(lo.0 as f64, lo.1 as f64) * res;
            let whi = o + Vec2::new((hi.0 + 1) as f64, (hi.1 + 1) as f64) * res;
            corridor.polytopes.push(Polytope::from_box(wlo, whi));
            corridor.vertices.push(pb);
            corridor.source_segment.push(s);
        }
    }
    Ok(corridor)
}

/// Visible region around a predicted target position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleRegion {
    pub sector: Sector,
    /// No ray from the apex was clear out to the region radius.
    pub degraded: bool,
}

/// Sector at `z` whose rays are all clear to `radius`, with the widest
/// achievable half-angle (up to `theta_cap`); ties go to the axis nearest `hint_dir`.
pub fn visible_region(map: &OccupancyGrid, z: Vec2, hint_dir: Vec2, radius: f64, theta_cap: f64) -> VisibleRegion {
    let hint = if hint_dir.norm() > 1e-12 { hint_dir.normalize() } else { Vec2::x() };
    let n = (std::f64::consts::TAU / FAN_STEP).round() as usize;
    let degraded = VisibleRegion { sector: Sector { apex: z, axis: hint, half_angle: 0.0, radius }, degraded: true };
    if !map.is_free(z) {
        return degraded;
    }
    let clear: Vec<bool> = (0..n)
        .map(|j| {
            let d = rotate(hint, j as f64 * FAN_STEP);
            map.raycast(z, d, radius).map(|r| r >= radius).unwrap_or(false)
        })
        .collect();
    let cap = ((theta_cap / FAN_STEP) + 1e-9).floor() as usize;
    let mut best: Option<(usize, usize)> = None;
    // Axis candidates ordered by angular distance from the hint: 0, +1, -1, +2, ...
    for k in 0..n {
        let j = if k % 2 == 1 { k.div_ceil(2) } else { (n - k / 2) % n };
        if !clear[j] {
            continue;
        }
        let mut m = 0;
        while m < cap && m + 1 < n / 2 && clear[(j + m + 1) % n] && clear[(j + n - m - 1) % n] {
            m += 1;
        }
        if best.is_none_or(|(bm, _)| m > bm) {
            best = Some((m, j));
        }
    }
    match best {
        None => degraded,
        Some((m, j)) => {
            let half = if m == cap { theta_cap } else { m as f64 * FAN_STEP };
            VisibleRegion {
                sector: Sector { apex: z, axis: rotate(hint, j as f64 * FAN_STEP), half_angle: half, radius },
                degraded: false,
            }
        }
    }
}

/// Margin angles on the left and right of the visible region.
pub fn margin_angles(p_tl: f64, p_tr: f64, theta_alpha: f64, theta_beta: f64) -> (f64, f64) {
    (theta_alpha + theta_beta * p_tl, theta_alpha + theta_beta * p_tr)
}

/// Shrinks `v` by the left margin on its left boundary and the right margin
/// on its right boundary. Left and right are as seen from the apex looking
/// along the axis, so the left boundary is the counter-clockwise one.
/// Returns the desired sector and whether the margins consumed it.
pub fn desired_visible_region(v: &Sector, p_tl: f64, p_tr: f64, theta_alpha: f64, theta_beta: f64) -> (Sector, bool) {
    let (el, er) = margin_angles(p_tl, p_tr, theta_alpha, theta_beta);
    let half = v.half_angle - (el + er) / 2.0;
    let offset = ((er - el) / 2.0).clamp(-v.half_angle, v.half_angle);
    let sector = Sector { apex: v.apex, axis: rotate(v.axis, offset), half_angle: half.max(0.0), radius: v.radius };
    (sector, half < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleRegionPair {
    pub v: Sector,
    pub v_hat: Sector,
    pub degraded: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn open(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(0.1, Vec2::zeros(), w, h, 0.3).unwrap()
    }

    #[test]
    fn straight_track_waypoints_trail_behind() {
        let map = open(300, 200);
        let v = Vec2::new(1.5, 0.0);
        let z0 = Vec2::new(8.0, 10.0);
        let d0 = 2.0;
        let track: Vec<Vec2> = (1..=8).map(|k| z0 + v * (0.25 * k as f64)).collect();
        let w = occlusion_free_waypoints(&map, &track, z0 - Vec2::new(d0, 0.0), d0, &CorridorParams::default()).unwrap();
        for (s, z) in w.points.iter().zip(&track) {
            assert!((s - (z - Vec2::new(d0, 0.0))).norm() < 1e-9);
        }
        assert!(w.degraded.iter().all(|d| !d));
    }

    #[test]
    fn tracker_already_on_circle_stays() {
        let map = open(200, 200);
        let z = Vec2::new(10.0, 10.0);
        let tracker = z + rotate(Vec2::x(), 0.7) * 2.0;
        let w = occlusion_free_waypoints(&map, &[z], tracker, 2.0, &CorridorParams::default()).unwrap();
        assert!((w.points[0] - tracker).norm() < 1e-9);
    }

    #[test]
    fn wall_pushes_waypoint_to_open_side() {
        let mut map = open(300, 300);
        // Wall between tracker and target, open only on the +y end.
        map.fill_box(Vec2::new(14.0, 0.0), Vec2::new(14.4, 18.0));
        let z = Vec2::new(16.0, 15.0);
        let tracker = Vec2::new(12.0, 15.0);
        let w = occlusion_free_waypoints(&map, &[z], tracker, 2.0, &CorridorParams::default()).unwrap();
        let s = w.points[0];
        assert!(map.line_of_sight(s, z).unwrap());
        assert!(((s - z).norm() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn enclosed_target_is_degraded() {
        let mut map = open(200, 200);
        map.fill_box(Vec2::new(8.0, 8.0), Vec2::new(12.0, 12.0));
        let tracker = Vec2::new(3.0, 3.0);
        let w = occlusion_free_waypoints(&map, &[Vec2::new(10.0, 10.0)], tracker, 1.0, &CorridorParams::default()).unwrap();
        assert!(w.degraded[0]);
        assert_eq!(w.points[0], tracker);
    }

    #[test]
    fn empty_map_corridor_is_map_box() {
        let map = open(50, 40);
        let c = generate_corridor(&map, &[Vec2::new(1.0, 1.0), Vec2::new(3.0, 2.5)], None).unwrap();
        assert_eq!(c.polytopes.len(), 1);
        let (lo, hi) = c.polytopes[0].box_bounds();
        assert!((lo - Vec2::zeros()).norm() < 1e-9 && (hi - Vec2::new(5.0, 4.0)).norm() < 1e-9);
        assert!(c.polytopes[0].contains(Vec2::new(1.0, 1.0)) && c.polytopes[0].contains(Vec2::new(3.0, 2.5)));
    }

    #[test]
    fn hallway_corridor_stays_in_hallway() {
        let mut map = OccupancyGrid::new(0.1, Vec2::zeros(), 200, 100, 0.0).unwrap();
        map.fill_box(Vec2::new(0.0, 0.0), Vec2::new(20.0, 4.0));
        map.fill_box(Vec2::new(0.0, 6.0), Vec2::new(20.0, 10.0));
        let c = generate_corridor(&map, &[Vec2::new(2.0, 5.0), Vec2::new(9.0, 5.3), Vec2::new(15.0, 4.7)], None).unwrap();
        for p in &c.polytopes {
            let (lo, hi) = p.box_bounds();
            assert!(hi.y - lo.y <= 2.0 + 1e-9);
        }
        assert!(c.polytopes.len() >= 2);
    }

    #[test]
    fn blocked_segment_is_rerouted() {
        let mut map = open(200, 200);
        map.fill_box(Vec2::new(9.0, 0.0), Vec2::new(11.0, 15.0));
        let path = [Vec2::new(5.0, 5.0), Vec2::new(15.0, 5.0)];
        let c = generate_corridor(&map, &path, Some(2.0)).unwrap();
        assert!(c.polytopes.len() > 1);
        for (i, p) in c.polytopes.iter().enumerate() {
            assert!(p.contains(c.vertices[i]) && p.contains(c.vertices[i + 1]));
        }
    }

    #[test]
    fn open_visible_region_uses_hint() {
        let map = open(200, 200);
        let hint = rotate(Vec2::x(), 2.0);
        let r = visible_region(&map, Vec2::new(10.0, 10.0), hint, 2.4, 75f64.to_radians());
        assert!(!r.degraded);
        assert!((r.sector.axis - hint).norm() < 1e-12);
        assert_eq!(r.sector.half_angle, 75f64.to_radians());
    }

    #[test]
    fn corner_visible_region_points_into_open_quadrant() {
        let mut map = open(200, 200);
        // Walls to the west and south of z.
        map.fill_box(Vec2::new(0.0, 0.0), Vec2::new(9.0, 20.0));
        map.fill_box(Vec2::new(0.0, 0.0), Vec2::new(20.0, 9.0));
        let z = Vec2::new(9.8, 9.8);
        let r = visible_region(&map, z, Vec2::new(-1.0, -1.0), 2.4, 75f64.to_radians());
        assert!(!r.degraded);
        assert!(r.sector.axis.x > 0.3 && r.sector.axis.y > 0.3, "axis {:?}", r.sector.axis);
    }

    #[test]
    fn enclosed_visible_region_is_degraded() {
        let mut map = open(200, 200);
        map.fill_box(Vec2::new(8.0, 8.0), Vec2::new(12.0, 12.0));
        let mut free = OccupancyGrid::new(0.1, Vec2::zeros(), 200, 200, 0.0).unwrap();
        for iy in 0..200 {
            for ix in 0..200 {
                let c = map.cell_center(ix, iy);
                if map.is_raw_occupied(ix, iy) && ((c.x - 10.0).abs() > 0.5 || (c.y - 10.0).abs() > 0.5) {
                    free.set_occupied(ix, iy);
                }
            }
        }
        assert!(visible_region(&free, Vec2::new(10.0, 10.0), Vec2::x(), 2.4, 1.2).degraded);
    }

    #[test]
    fn desired_region_margins() {
        let v = Sector { apex: Vec2::zeros(), axis: Vec2::x(), half_angle: 1.0, radius: 2.4 };
        let (s, flag) = desired_visible_region(&v, 0.0, 0.0, 0.2, 0.6);
        assert!(!flag);
        assert!((s.half_angle - 0.8).abs() < 1e-12 && (s.axis - Vec2::x()).norm() < 1e-12);
        let (el, er) = margin_angles(1.0, 0.0, 0.2, 0.6);
        assert!((el - 0.8).abs() < 1e-12 && (er - 0.2).abs() < 1e-12);
        let (s, _) = desired_visible_region(&v, 1.0, 0.0, 0.2, 0.6);
        assert!((s.half_angle - 0.5).abs() < 1e-12);
        // Left (counter-clockwise) boundary pulled in by 0.8: the axis turns clockwise.
        assert!((heading(s.axis) + 0.3).abs() < 1e-12);
        // Undoing the shrink restores the original sector.
        assert!((s.half_angle + (el + er) / 2.0 - v.half_angle).abs() < 1e-12);
        assert!((heading(rotate(s.axis, (el - er) / 2.0)) - heading(v.axis)).abs() < 1e-12);
    }

    #[test]
    fn oversized_margins_flag_and_stay_inside() {
        let v = Sector { apex: Vec2::zeros(), axis: Vec2::y(), half_angle: 0.3, radius: 2.4 };
        let (s, flag) = desired_visible_region(&v, 1.0, 0.0, 0.2, 1.5);
        assert!(flag);
        assert_eq!(s.half_angle, 0.0);
        assert!(crate::geom::angle_between(s.axis, v.axis) <= v.half_angle + 1e-12);
        let _ = FRAC_PI_2;
    }
}
