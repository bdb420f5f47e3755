//! Synthetic worlds: target paths and corridor maps carved around them.

use itrack_core::env::OccupancyGrid;
use itrack_core::geom::{heading, rotate, unit_from_heading};
use itrack_core::Vec2;
use rand::Rng;

use crate::config::{CarveConfig, RandomPathConfig};
use crate::error::{SimError, SimResult};

/// Free segments (capsule centerlines) carved for a path: the path itself,
/// a tail behind the start, and a straight continuation past every vertex.
pub fn carve_segments(path: &[Vec2], cfg: &CarveConfig) -> Vec<(Vec2, Vec2)> {
    let n = path.len();
    let mut segs = Vec::new();
    let d0 = (path[1] - path[0]).normalize();
    segs.push((path[0] - d0 * cfg.tail, path[0]));
    for i in 0..n - 1 {
        segs.push((path[i], path[i + 1]));
        let dir = (path[i + 1] - path[i]).normalize();
        if cfg.stub > 0.0 {
            segs.push((path[i + 1], path[i + 1] + dir * cfg.stub));
        }
    }
    segs
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn segment_distance(a: (Vec2, Vec2), b: (Vec2, Vec2)) -> f64 {
    let cross = |o: Vec2, p: Vec2, q: Vec2| (p - o).perp(&(q - o));
    let s1 = cross(a.0, a.1, b.0) * cross(a.0, a.1, b.1);
    let s2 = cross(b.0, b.1, a.0) * cross(b.0, b.1, a.1);
    if s1 < 0.0 && s2 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a.0, b.0, b.1)
        .min(point_segment_distance(a.1, b.0, b.1))
        .min(point_segment_distance(b.0, a.0, a.1))
        .min(point_segment_distance(b.1, a.0, a.1))
}

/// Occupied everywhere except within `half_width` of the carved segments.
pub fn carve_map(path: &[Vec2], cfg: &CarveConfig, inflation: f64) -> SimResult<OccupancyGrid> {
    if path.len() < 2 {
        return Err(SimError::Config("carving needs a path of at least two vertices".into()));
    }
    let segs = carve_segments(path, cfg);
    let pad = cfg.half_width + cfg.margin;
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (a, b) in &segs {
        for p in [a, b] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    let res = cfg.resolution;
    let origin = ((lo - Vec2::new(pad, pad)) / res).map(f64::floor) * res;
    let width = ((hi.x + pad - origin.x) / res).ceil() as usize;
    let height = ((hi.y + pad - origin.y) / res).ceil() as usize;
    let mut cells = vec![true; width * height];
    for (a, b) in &segs {
        let blo = a.inf(b) - Vec2::new(cfg.half_width, cfg.half_width);
        let bhi = a.sup(b) + Vec2::new(cfg.half_width, cfg.half_width);
        let ix0 = (((blo.x - origin.x) / res).floor().max(0.0)) as usize;
        let iy0 = (((blo.y - origin.y) / res).floor().max(0.0)) as usize;
        let ix1 = (((bhi.x - origin.x) / res).ceil() as usize).min(width - 1);
        let iy1 = (((bhi.y - origin.y) / res).ceil() as usize).min(height - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let c = origin + Vec2::new((ix as f64 + 0.5) * res, (iy as f64 + 0.5) * res);
                if point_segment_distance(c, *a, *b) <= cfg.half_width {
                    cells[iy * width + ix] = false;
                }
            }
        }
    }
    Ok(OccupancyGrid::from_cells(res, origin, width, height, cells, inflation)?)
}

/// Random path of `cfg.turns` sharp turns whose carved corridors keep apart.
pub fn random_path<R: Rng>(cfg: &RandomPathConfig, carve: &CarveConfig, rng: &mut R) -> SimResult<Vec<Vec2>> {
    let clearance = 2.0 * carve.half_width + 1.0;
    let mut pts = vec![Vec2::zeros()];
    let mut h = 0.0;
    let first = rng.gen_range(cfg.segment[0]..=cfg.segment[1]);
    pts.push(unit_from_heading(h) * first);
    let mut segs = carve_segments(&pts, carve);
    for _ in 0..cfg.turns {
        let mut placed = false;
        for _attempt in 0..200 {
            let angle = rng.gen_range(cfg.angle_deg[0]..=cfg.angle_deg[1]).to_radians();
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let len = rng.gen_range(cfg.segment[0]..=cfg.segment[1]);
            let nh = h + sign * angle;
            let last = *pts.last().unwrap();
            let next = last + unit_from_heading(nh) * len;
            let dir = unit_from_heading(nh);
            let candidate = [(last, next), (next, next + dir * carve.stub)];
            // Everything except the segments meeting at `last` must stay clear.
            let ok = candidate.iter().all(|c| {
                segs.iter().enumerate().all(|(i, s)| {
                    let adjacent = i + 2 >= segs.len() || s.1 == last || s.0 == last;
                    adjacent || segment_distance(*c, *s) >= clearance
                })
            });
            if ok {
                pts.push(next);
                h = nh;
                segs = carve_segments(&pts, carve);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::Config("could not place a non-overlapping random path".into()));
        }
    }
    Ok(pts)
}

/// Path with a single turn of `angle` radians (positive is left) at `leg` meters.
pub fn single_turn_path(leg: f64, after: f64, angle: f64) -> Vec<Vec2> {
    let v = Vec2::new(leg, 0.0);
    vec![Vec2::zeros(), v, v + rotate(Vec2::x(), angle) * after]
}

/// Heading of the first path segment.
pub fn start_heading(path: &[Vec2]) -> f64 {
    heading(path[1] - path[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn carved_turn_has_free_path_and_walls() {
        let path = single_turn_path(12.0, 10.0, std::f64::consts::FRAC_PI_2);
        let cfg = CarveConfig::default();
        let map = carve_map(&path, &cfg, 0.3).unwrap();
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!(map.is_free(path[0] + (path[1] - path[0]) * t));
            assert!(map.is_free(path[1] + (path[2] - path[1]) * t));
        }
        // The stub continues straight past the junction.
        assert!(map.is_free(path[1] + Vec2::new(4.0, 0.0)));
        // Beside the corridor is wall.
        assert!(!map.is_free(Vec2::new(5.0, 2.5)));
    }

    #[test]
    fn random_path_is_reproducible_and_separated() {
        let cfg = RandomPathConfig { turns: 12, ..Default::default() };
        let carve = CarveConfig::default();
        let a = random_path(&cfg, &carve, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_path(&cfg, &carve, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 14);
        for w in a.windows(3) {
            let turn = itrack_core::geom::angle_between(w[1] - w[0], w[2] - w[1]).to_degrees();
            assert!((60.0 - 1e-9..=120.0 + 1e-9).contains(&turn));
        }
    }
}
