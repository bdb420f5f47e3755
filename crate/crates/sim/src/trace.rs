//! Per-tick trace rows, CSV encoding, and summary metrics.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{SimError, SimResult};

pub const HEADER: &str = "t,s,target_x,target_y,target_vx,target_vy,target_heading,tracker_x,tracker_y,tracker_vx,tracker_vy,tracker_yaw,p_cv,p_tl,p_tr,p_dec,intent,pred_x,pred_y,occluded,distance,maneuver,replan";

/// Replan outcome recorded on a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanMark {
    None,
    Accepted,
    Failed,
}

impl ReplanMark {
    fn code(self) -> u8 {
        match self {
            ReplanMark::None => 0,
            ReplanMark::Accepted => 1,
            ReplanMark::Failed => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(ReplanMark::None),
            1 => Some(ReplanMark::Accepted),
            2 => Some(ReplanMark::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Target arc length along its path.
    pub s: f64,
    pub target: [f64; 2],
    pub target_vel: [f64; 2],
    pub target_heading: f64,
    pub tracker: [f64; 2],
    pub tracker_vel: [f64; 2],
    pub tracker_yaw: f64,
    /// Intention probabilities in cv, tl, tr, dec order.
    pub probs: [f64; 4],
    pub intent: String,
    /// Last point of the latest predicted track.
    pub pred: [f64; 2],
    pub occluded: bool,
    pub distance: f64,
    pub maneuver: bool,
    pub replan: ReplanMark,
}

impl TraceRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(200);
        let _ = write!(
            s,
            "{:.2},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{:.4},{:.4},{},{:.4},{},{}",
            self.t,
            self.s,
            self.target[0],
            self.target[1],
            self.target_vel[0],
            self.target_vel[1],
            self.target_heading,
            self.tracker[0],
            self.tracker[1],
            self.tracker_vel[0],
            self.tracker_vel[1],
            self.tracker_yaw,
            self.probs[0],
            self.probs[1],
            self.probs[2],
            self.probs[3],
            self.intent,
            self.pred[0],
            self.pred[1],
            self.occluded as u8,
            self.distance,
            self.maneuver as u8,
            self.replan.code()
        );
        s
    }

    pub fn from_csv(line: &str) -> SimResult<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != HEADER.split(',').count() {
            return Err(SimError::Trace(format!("expected {} fields, got {}", HEADER.split(',').count(), f.len())));
        }
        let num = |i: usize| -> SimResult<f64> {
            f[i].parse::<f64>().map_err(|_| SimError::Trace(format!("bad number `{}` in column {}", f[i], i + 1)))
        };
        let flag = |i: usize| -> SimResult<u8> {
            f[i].parse::<u8>().map_err(|_| SimError::Trace(format!("bad flag `{}` in column {}", f[i], i + 1)))
        };
        Ok(Self {
            t: num(0)?,
            s: num(1)?,
            target: [num(2)?, num(3)?],
            target_vel: [num(4)?, num(5)?],
            target_heading: num(6)?,
            tracker: [num(7)?, num(8)?],
            tracker_vel: [num(9)?, num(10)?],
            tracker_yaw: num(11)?,
            probs: [num(12)?, num(13)?, num(14)?, num(15)?],
            intent: f[16].to_string(),
            pred: [num(17)?, num(18)?],
            occluded: flag(19)? != 0,
            distance: num(20)?,
            maneuver: flag(21)? != 0,
            replan: ReplanMark::from_code(flag(22)?).ok_or_else(|| SimError::Trace("bad replan code".into()))?,
        })
    }
}

pub fn write_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 160 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> SimResult<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        _ => return Err(SimError::Trace("missing or unexpected header row".into())),
    }
    let rows = lines.filter(|l| !l.trim().is_empty()).map(TraceRow::from_csv).collect::<SimResult<Vec<_>>>()?;
    if rows.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(SimError::Trace("rows are not time-ordered".into()));
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> SimResult<Vec<TraceRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

/// Metrics over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub ticks: usize,
    pub duration: f64,
    pub occlusion_fraction: f64,
    pub occluded_time: f64,
    pub min_distance: f64,
    pub mean_distance: f64,
    pub max_distance: f64,
    /// Share of non-maneuver ticks with distance inside the tolerance band.
    pub steady_in_band: f64,
    pub replans: usize,
    pub failed_replans: usize,
    /// Mean and max planning-cycle time, milliseconds; unknown when summarizing a trace file.
    pub mean_planning_ms: Option<f64>,
    pub max_planning_ms: Option<f64>,
}

impl Summary {
    /// Metrics derivable from trace rows alone; `band` is the accepted distance interval.
    pub fn from_rows(rows: &[TraceRow], dt: f64, band: (f64, f64)) -> Self {
        let n = rows.len();
        let occluded = rows.iter().filter(|r| r.occluded).count();
        let dists = rows.iter().map(|r| r.distance);
        let steady: Vec<&TraceRow> = rows.iter().filter(|r| !r.maneuver).collect();
        let in_band = steady.iter().filter(|r| r.distance >= band.0 && r.distance <= band.1).count();
        Self {
            ticks: n,
            duration: rows.last().map(|r| r.t).unwrap_or(0.0),
            occlusion_fraction: if n > 0 { occluded as f64 / n as f64 } else { 0.0 },
            occluded_time: occluded as f64 * dt,
            min_distance: dists.clone().fold(f64::INFINITY, f64::min),
            mean_distance: if n > 0 { dists.clone().sum::<f64>() / n as f64 } else { 0.0 },
            max_distance: dists.fold(f64::NEG_INFINITY, f64::max),
            steady_in_band: if steady.is_empty() { 1.0 } else { in_band as f64 / steady.len() as f64 },
            replans: rows.iter().filter(|r| r.replan != ReplanMark::None).count(),
            failed_replans: rows.iter().filter(|r| r.replan == ReplanMark::Failed).count(),
            mean_planning_ms: None,
            max_planning_ms: None,
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
        format!(
            "ticks: {}\nduration: {:.2}\nocclusion_fraction: {:.5}\noccluded_time: {:.2}\nmin_distance: {:.4}\nmean_distance: {:.4}\nmax_distance: {:.4}\nsteady_in_band: {:.4}\nreplans: {}\nfailed_replans: {}\nmean_planning_ms: {}\nmax_planning_ms: {}\n",
            self.ticks,
            self.duration,
            self.occlusion_fraction,
            self.occluded_time,
            self.min_distance,
            self.mean_distance,
            self.max_distance,
            self.steady_in_band,
            self.replans,
            self.failed_replans,
            opt(self.mean_planning_ms),
            opt(self.max_planning_ms)
        )
    }
}
