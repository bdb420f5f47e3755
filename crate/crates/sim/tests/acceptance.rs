//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use itrack_core::corridor::desired_visible_region;
use itrack_core::env::Sector;
use itrack_core::geom::{unit_from_heading, wrap_angle};
use itrack_core::intention::Intention::{Dec, Tl, Tr};
use itrack_core::intention::{
    activate, observation_scores, risk_scores, IntentionDistribution, IntentionParams, ReachableRegion,
};
use itrack_core::prediction::{predict_motion, PenaltyMatrix};
use itrack_core::trajopt::Minco;
use itrack_core::Vec2;
use itrack_sim::scenarios::{sudden_stop, turn, turn_course};
use itrack_sim::trace::write_csv;
use itrack_sim::{run_scenario, RunOutput, Scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SPEED: f64 = 2.0;
const COURSE_TURNS: usize = 3;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(cfg: ScenarioConfig) -> RunOutput {
    let sc = Scenario::build(cfg).expect("scenario builds");
    run_scenario(&sc).expect("run completes")
}

fn pair(cfg: ScenarioConfig) -> (RunOutput, RunOutput) {
    let sc = Scenario::build(cfg).expect("scenario builds");
    let aware = run_scenario(&sc.with_blind(false)).expect("aware run completes");
    let blind = run_scenario(&sc.with_blind(true)).expect("blind run completes");
    (aware, blind)
}

fn gradients() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let terms = support::single_term_weights();
    let mut worst = vec![0.0f64; terms.len()];
    let mut active = vec![0usize; terms.len()];
    for _ in 0..100 {
        let m = rng.gen_range(2..=8);
        let inst = support::random_grad_instance(&mut rng, m);
        for (j, (_, w)) in terms.iter().enumerate() {
            if let Some(e) = support::gradient_error(&inst, *w) {
                worst[j] = worst[j].max(e);
                active[j] += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let mut pass = secs < 30.0;
    let mut parts = Vec::new();
    for (j, (name, _)) in terms.iter().enumerate() {
        let tol = if *name == "smooth" { 1e-6 } else { 1e-4 };
        pass &= worst[j] < tol && active[j] >= 50;
        parts.push(format!("{name} {:.1e} ({} active)", worst[j], active[j]));
    }
    verdict(pass, format!("{}; {secs:.1} s", parts.join(", ")))
}

fn parameterization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut coef, mut defect) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = rng.gen_range(1..=12);
        let (q, t, bd) = support::random_minco_instance(&mut rng, m);
        let traj = Minco::construct(&q, &t, bd).expect("construct").traj;
        let want = support::dense_kkt_coefficients(&q, &t, &bd);
        for (a, b) in traj.coeffs.iter().zip(want.iter()) {
            coef = coef.max((a - b).abs() / b.abs().max(1.0));
        }
        for i in 0..m.saturating_sub(1) {
            for d in 0..=4 {
                let a = traj.eval_piece(i, t[i], d);
                let b = traj.eval_piece(i + 1, 0.0, d);
                defect = defect.max((a - b).norm() / a.norm().max(b.norm()).max(1.0));
            }
        }
    }
    verdict(coef <= 1e-8 && defect <= 1e-6, format!("max coefficient error {coef:.1e}, max junction defect {defect:.1e}"))
}

fn search_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let pen = PenaltyMatrix::default();
    let (mut agree, mut compared) = (0, 0);
    for _ in 0..50 {
        let (map, p0) = support::random_small_map(&mut rng);
        let v0 = support::random_velocity(&mut rng);
        let i0 = itrack_core::intention::Intention::ALL[rng.gen_range(0..4)];
        let params = support::oracle_params(rng.gen_range(1..=4));
        let track = predict_motion(p0, v0, i0, &map, &params, &pen).expect("search runs");
        compared += 1;
        let ok = match support::enumerate_best(p0, v0, i0, &map, &params, &pen) {
            Some((cost, pts)) => {
                !track.truncated
                    && (track.cost - cost).abs() <= 1e-12
                    && track.points.iter().zip(&pts).all(|(a, b)| (a - b).norm() <= 1e-12)
            }
            None => track.truncated,
        };
        agree += ok as usize;
    }
    verdict(agree == compared, format!("{agree}/{compared} maps identical"))
}

fn turning() -> Verdict {
    let started = Instant::now();
    let mut wins = 0;
    let mut worst_aware: f64 = 0.0;
    let mut cells = Vec::new();
    for seed in 0..20 {
        let (a, b) = pair(turn_course(seed, SPEED, COURSE_TURNS));
        let (fa, fb) = (a.summary.occlusion_fraction, b.summary.occlusion_fraction);
        worst_aware = worst_aware.max(fa);
        wins += (fa < fb) as usize;
        cells.push(format!("{:.3}/{:.3}", fa, fb));
    }
    let secs = started.elapsed().as_secs_f64();
    println!("  per-seed occlusion aware/blind: {}", cells.join(" "));
    verdict(
        worst_aware < 0.05 && wins >= 16 && secs < 300.0,
        format!("max aware occlusion {:.3}, aware strictly better in {wins}/20 seeds, {secs:.0} s", worst_aware),
    )
}

fn deceleration() -> Verdict {
    let (mut min_ok, mut dominates, mut band_ok) = (0, 0, 0);
    let mut lowest = f64::INFINITY;
    let mut lowest_band: f64 = 1.0;
    for seed in 0..10 {
        let (a, b) = pair(sudden_stop(seed, SPEED));
        lowest = lowest.min(a.summary.min_distance);
        lowest_band = lowest_band.min(a.summary.steady_in_band);
        min_ok += (a.summary.min_distance >= 1.0) as usize;
        dominates += (a.summary.min_distance >= b.summary.min_distance) as usize;
        band_ok += (a.summary.steady_in_band >= 0.9) as usize;
    }
    verdict(
        min_ok == 10 && dominates >= 8 && band_ok == 10,
        format!(
            "min distance >= 1.0 in {min_ok}/10 (lowest {lowest:.2}), >= ablation in {dominates}/10, in band >= 90% in {band_ok}/10 (lowest {:.3})",
            lowest_band
        ),
    )
}

/// Earliest of the fillet end and the moment the body heading settles
/// within one degree of its final value.
fn heading_change_end(out: &RunOutput, turn_start: f64) -> f64 {
    let final_heading = out.rows.last().expect("rows").target_heading;
    let settled = out
        .rows
        .iter()
        .filter(|r| r.t >= turn_start)
        .find(|r| wrap_angle(r.target_heading - final_heading).abs() < 1f64.to_radians())
        .map(|r| r.t)
        .unwrap_or(f64::INFINITY);
    settled.min(out.turn_end_times[0])
}

fn intention_timing() -> Verdict {
    let mut hits = 0;
    let mut leads = Vec::new();
    for seed in 0..10 {
        let cfg = turn(seed, SPEED, PI / 2.0);
        let sc = Scenario::build(cfg).expect("scenario builds");
        let (arc_start, _, _) = sc.path.turn_intervals()[0];
        let out = run_scenario(&sc).expect("run completes");
        let start = out.rows.iter().find(|r| r.s >= arc_start).expect("turn reached").t;
        let end = heading_change_end(&out, start);
        // tl must be the argmax 0.3 s before the end; the lead is measured
        // from the onset of that uninterrupted tl stretch.
        let k = out.rows.iter().rposition(|r| r.t <= end - 0.3 + 1e-9).expect("row before end");
        let lead = if out.rows[k].intent == "tl" {
            let onset = out.rows[..=k].iter().rposition(|r| r.intent != "tl").map(|i| i + 1).unwrap_or(0);
            end - out.rows[onset].t
        } else {
            f64::NEG_INFINITY
        };
        hits += (lead >= 0.3) as usize;
        leads.push(format!("{lead:.2}"));
    }
    verdict(hits >= 8, format!("tl is argmax 0.3 s before the heading change ends in {hits}/10 seeds (leads {} s)", leads.join(" ")))
}

fn region(theta_l: f64, theta_r: f64) -> ReachableRegion {
    ReachableRegion { apex: Vec2::zeros(), dir: Some(Vec2::x()), theta_l, theta_r, radius: 1.0 }
}

fn properties() -> Verdict {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let p = IntentionParams::default();
    let mut failures: Vec<&str> = Vec::new();
    let mut check = |name: &'static str, ok: bool| {
        if !ok && !failures.contains(&name) {
            failures.push(name);
        }
    };
    for _ in 0..N {
        let a: f64 = rng.gen_range(-50.0..50.0);
        let w = wrap_angle(a);
        let inside = rng.gen_range(-PI..=PI);
        check(
            "wrap",
            (-PI..=PI).contains(&w)
                && (w.sin() - a.sin()).abs() < 1e-9
                && (w.cos() - a.cos()).abs() < 1e-9
                && wrap_angle(w) == w
                && wrap_angle(inside) == inside,
        );

        let h = rng.gen_range(-PI..PI);
        let half = rng.gen_range(0.0..PI);
        let radius = rng.gen_range(0.1..6.0);
        let apex = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let s = Sector::new(apex, unit_from_heading(h), half, radius).expect("sector");
        let (r, phi) = (rng.gen_range(0.0..8.0), rng.gen_range(-PI..PI));
        let x = apex + unit_from_heading(h + phi) * r;
        let (dist, off) = ((x - apex).norm(), wrap_angle(phi).abs());
        if (dist - radius).abs() > 1e-9 && (off - half).abs() > 1e-9 {
            check("sector", s.contains(x) == (dist <= radius && (dist < 1e-12 || off <= half)));
        }

        let th: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.6));
        let v = Vec2::new(rng.gen_range(0.0..3.0), 0.0);
        let d_o = rng.gen_range(0.05..10.0);
        let ra = risk_scores(&region(th[0], th[1]), &region(th[2], th[3]), v, d_o, 0.1, &p);
        let rb = risk_scores(&region(th[1], th[0]), &region(th[3], th[2]), v, d_o, 0.1, &p);
        let r_bv = rng.gen_range(-PI..PI);
        let oa = observation_scores(Some(r_bv), 1.0, 1.2, &p);
        let ob = observation_scores(Some(-r_bv), 1.0, 1.2, &p);
        check(
            "mirror",
            ra.get(Tl) == rb.get(Tr) && ra.get(Tr) == rb.get(Tl) && oa.get(Tl) == ob.get(Tr) && oa.get(Tr) == ob.get(Tl),
        );

        let (l_lo, l_hi) = sorted(rng.gen_range(0.0..1.6), rng.gen_range(0.0..1.6));
        let ptl = |l1: f64| {
            let r = risk_scores(&region(th[0], th[1]), &region(l1, th[3]), v, d_o, 0.1, &p);
            IntentionDistribution::from_scores(r, oa, p.b0).p(Tl)
        };
        let (s_lo, s_hi) = sorted(rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let (d_lo, d_hi) = sorted(rng.gen_range(0.05..10.0), rng.gen_range(0.05..10.0));
        let pdec = |speed: f64, d: f64| {
            let r = risk_scores(&region(0.3, 0.3), &region(0.3, 0.3), Vec2::new(speed, 0.0), d, 0.1, &p);
            IntentionDistribution::from_scores(r, oa, p.b0).p(Dec)
        };
        let (p_lo, p_hi) = sorted(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let p_tr = rng.gen_range(0.0..1.0);
        let vis = Sector::new(apex, unit_from_heading(h), rng.gen_range(0.0..1.4), 2.4).expect("sector");
        let (a_lo, a_hi) = sorted(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
        check(
            "monotonicity",
            ptl(l_lo) <= ptl(l_hi)
                && pdec(s_lo, 2.0) <= pdec(s_hi, 2.0)
                && pdec(1.5, d_hi) <= pdec(1.5, d_lo)
                && desired_visible_region(&vis, p_hi, p_tr, 0.2, 0.6).0.half_angle
                    <= desired_visible_region(&vis, p_lo, p_tr, 0.2, 0.6).0.half_angle
                && (a_hi - a_lo < 1e-6 || activate(a_lo, 0.0, 0.5) < activate(a_hi, 0.0, 0.5)),
        );
    }
    let detail = if failures.is_empty() {
        format!("wrap, sector, mirror, monotonicity: {N} cases each")
    } else {
        format!("violated: {}", failures.join(", "))
    };
    verdict(failures.is_empty(), detail)
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn performance() -> Verdict {
    let cfg = turn_course(0, SPEED, COURSE_TURNS);
    let mut traces = Vec::new();
    let mut ms = Vec::new();
    for _ in 0..5 {
        let out = run(cfg.clone());
        ms.extend(out.plan_times.iter().map(|t| t.total() * 1e3));
        traces.push(write_csv(&out.rows));
    }
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let identical = traces.iter().all(|t| *t == traces[0]);
    verdict(
        mean < 50.0 && identical,
        format!("mean planning cycle {mean:.1} ms over {} cycles, 5 traces identical: {identical}", ms.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("gradient suite", gradients),
        ("parameterization suite", parameterization),
        ("search oracle", search_oracle),
        ("turning benchmark", turning),
        ("deceleration benchmark", deceleration),
        ("intention timing", intention_timing),
        ("property suites", properties),
        ("performance and determinism", performance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        println!("criterion {} {name}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
