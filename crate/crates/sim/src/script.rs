//! Scripted target: a filleted polyline walked with a trapezoidal speed
//! profile, optional stops, and a body heading that leads the path tangent.

use std::f64::consts::PI;

use itrack_core::geom::{heading, unit_from_heading, wrap_angle};
use itrack_core::target_state::{synth_landmarks, LandmarkSet};
use itrack_core::Vec2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{StopEvent, TargetConfig};
use crate::error::{SimError, SimResult};

pub const SHOULDER_WIDTH: f64 = 0.4;
pub const HIP_WIDTH: f64 = 0.3;
pub const SHOULDER_HEIGHT: f64 = 1.45;
pub const HIP_HEIGHT: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Element {
    Line { from: Vec2, dir: Vec2, len: f64 },
    Arc { center: Vec2, radius: f64, start: f64, sweep: f64 },
}

impl Element {
    fn len(&self) -> f64 {
        match *self {
            Element::Line { len, .. } => len,
            Element::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position and tangent heading at arc length `s` into the element.
    fn at(&self, s: f64) -> (Vec2, f64) {
        match *self {
            Element::Line { from, dir, .. } => (from + dir * s, heading(dir)),
            Element::Arc { center, radius, start, sweep } => {
                let a = start + sweep.signum() * s / radius;
                let p = center + unit_from_heading(a) * radius;
                (p, a + sweep.signum() * PI / 2.0)
            }
        }
    }
}

/// Arc-length parameterized path: straight segments joined by circular fillets.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    elements: Vec<Element>,
    starts: Vec<f64>,
    length: f64,
    vertices: Vec<Vec2>,
}

impl Path {
    pub fn new(vertices: &[Vec2], radius: f64) -> SimResult<Self> {
        if vertices.len() < 2 {
            return Err(SimError::Config("path needs at least two vertices".into()));
        }
        if vertices.windows(2).any(|w| (w[1] - w[0]).norm() < 1e-9) {
            return Err(SimError::Config("path has repeated vertices".into()));
        }
        let n = vertices.len();
        // Tangent length cut from each side of every interior vertex.
        let mut cut = vec![0.0; n];
        let mut turn = vec![0.0; n];
        for i in 1..n - 1 {
            let a = (vertices[i] - vertices[i - 1]).normalize();
            let b = (vertices[i + 1] - vertices[i]).normalize();
            let phi = wrap_angle(heading(b) - heading(a));
            turn[i] = phi;
            if phi.abs() > 1e-9 && phi.abs() < PI - 1e-6 {
                cut[i] = radius * (phi.abs() / 2.0).tan();
            }
        }
        // Keep fillets from overlapping on short segments.
        for i in 0..n - 1 {
            let len = (vertices[i + 1] - vertices[i]).norm();
            let total = cut[i] + cut[i + 1];
            if total > len {
                let s = len / total;
                cut[i] *= s;
                cut[i + 1] *= s;
            }
        }
        let mut elements = Vec::new();
        for i in 0..n - 1 {
            let dir = (vertices[i + 1] - vertices[i]).normalize();
            let len = (vertices[i + 1] - vertices[i]).norm();
            let from = vertices[i] + dir * cut[i];
            let l = len - cut[i] - cut[i + 1];
            if l > 1e-9 {
                elements.push(Element::Line { from, dir, len: l });
            }
            let j = i + 1;
            if j < n - 1 && cut[j] > 0.0 {
                let phi = turn[j];
                let r = cut[j] / (phi.abs() / 2.0).tan();
                let entry = vertices[j] - dir * cut[j];
                let normal = unit_from_heading(heading(dir) + phi.signum() * PI / 2.0);
                let center = entry + normal * r;
                elements.push(Element::Arc { center, radius: r, start: heading(entry - center), sweep: phi });
            }
        }
        let mut starts = Vec::with_capacity(elements.len());
        let mut acc = 0.0;
        for e in &elements {
            starts.push(acc);
            acc += e.len();
        }
        Ok(Self { elements, starts, length: acc, vertices: vertices.to_vec() })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn element_at(&self, s: f64) -> usize {
        match self.starts.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// Position and tangent heading at arc length `s`, clamped to the path.
    pub fn at(&self, s: f64) -> (Vec2, f64) {
        let s = s.clamp(0.0, self.length);
        let i = self.element_at(s);
        self.elements[i].at(s - self.starts[i])
    }

    /// Whether arc length `s` lies on a fillet.
    pub fn in_turn(&self, s: f64) -> bool {
        let s = s.clamp(0.0, self.length);
        matches!(self.elements[self.element_at(s)], Element::Arc { .. })
    }

    /// Arc-length intervals of the fillets.
    pub fn turn_intervals(&self) -> Vec<(f64, f64, f64)> {
        self.elements
            .iter()
            .zip(&self.starts)
            .filter_map(|(e, s)| match *e {
                Element::Arc { sweep, .. } => Some((*s, *s + e.len(), sweep)),
                _ => None,
            })
            .collect()
    }
}

/// Ground truth of the target at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub position: Vec2,
    pub velocity: Vec2,
    pub speed: f64,
    /// Chest-facing direction, radians.
    pub body_heading: f64,
    /// Arc length travelled.
    pub s: f64,
    /// Turning, changing speed, or standing at a stop.
    pub maneuvering: bool,
}

/// Steps the scripted target along its path.
#[derive(Debug, Clone)]
pub struct ScriptedTarget {
    path: Path,
    cruise: f64,
    accel: f64,
    lead: f64,
    start_delay: f64,
    stops: Vec<StopEvent>,
    next_stop: usize,
    hold_until: Option<f64>,
    s: f64,
    v: f64,
    t: f64,
}

impl ScriptedTarget {
    pub fn new(path: Path, cfg: &TargetConfig) -> Self {
        let mut stops = cfg.stops.clone();
        stops.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        stops.retain(|s| s.distance < path.length());
        Self {
            path,
            cruise: cfg.speed,
            accel: cfg.accel,
            lead: cfg.heading_lead,
            start_delay: cfg.start_delay,
            stops,
            next_stop: 0,
            hold_until: None,
            s: 0.0,
            v: 0.0,
            t: 0.0,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn stop_distance(&self) -> f64 {
        self.stops.get(self.next_stop).map(|s| s.distance).unwrap_or(self.path.length())
    }

    /// Advances by `dt` and returns the new truth.
    pub fn step(&mut self, dt: f64) -> TargetTruth {
        self.t += dt;
        if let Some(until) = self.hold_until {
            if self.t + 1e-9 >= until {
                self.hold_until = None;
                self.next_stop += 1;
            }
        } else if self.t > self.start_delay {
            let goal = self.stop_distance();
            let left = (goal - self.s).max(0.0);
            // Start braking one tick early so the braking rate never exceeds the limit.
            let allow = (2.0 * self.accel * (left - self.v * dt).max(0.0)).sqrt();
            if self.v > 0.0 && self.v + 1e-9 >= allow {
                // Brake at the constant rate that lands exactly on the stop.
                let a = self.v * self.v / (2.0 * left.max(1e-12));
                if self.v <= a * dt {
                    self.s = goal;
                    self.v = 0.0;
                } else {
                    self.s = (self.s + self.v * dt - 0.5 * a * dt * dt).min(goal);
                    self.v -= a * dt;
                }
            } else if left <= 1e-9 {
                self.v = 0.0;
            } else {
                let v_new = (self.v + self.accel * dt).min(self.cruise);
                self.s = (self.s + 0.5 * (self.v + v_new) * dt).min(goal);
                self.v = v_new;
            }
            if goal - self.s < 1e-9 && self.v == 0.0 {
                self.s = goal;
                if let Some(stop) = self.stops.get(self.next_stop) {
                    self.hold_until = Some(self.t + stop.hold);
                }
            }
        }
        self.truth()
    }

    pub fn truth(&self) -> TargetTruth {
        let (p, h) = self.path.at(self.s);
        let (_, body) = self.path.at(self.s + self.v * self.lead);
        TargetTruth {
            position: p,
            velocity: unit_from_heading(h) * self.v,
            speed: self.v,
            body_heading: body,
            s: self.s,
            maneuvering: self.path.in_turn(self.s) || (self.v - self.cruise).abs() > 1e-6,
        }
    }
}

/// The four torso landmarks of `truth`, each coordinate perturbed by `N(0, sigma)`.
pub fn noisy_landmarks<R: Rng>(truth: &TargetTruth, sigma: f64, rng: &mut R) -> LandmarkSet {
    let mut lm = synth_landmarks(truth.position, truth.body_heading, SHOULDER_WIDTH, HIP_WIDTH, SHOULDER_HEIGHT, HIP_HEIGHT);
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("sigma > 0");
        for p in [&mut lm.left_shoulder, &mut lm.right_shoulder, &mut lm.left_hip, &mut lm.right_hip] {
            for k in 0..3 {
                p[k] += n.sample(rng);
            }
        }
    }
    lm
}
