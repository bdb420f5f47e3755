mod support;

use itrack_core::trajopt::minco::NCOEF;
use itrack_core::trajopt::Minco;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn banded_construction_matches_dense_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=12);
        let (q, t, bd) = support::random_minco_instance(&mut rng, m);
        let got = Minco::construct(&q, &t, bd).unwrap().traj.coeffs;
        let want = support::dense_kkt_coefficients(&q, &t, &bd);
        assert_eq!(got.shape(), want.shape());
        for (a, b) in got.iter().zip(want.iter()) {
            let e = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(e);
        }
    }
    assert!(worst <= 1e-8, "coefficient mismatch {worst:e}");
}

#[test]
fn junctions_are_c4_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let m = rng.gen_range(2..=12);
        let (q, t, bd) = support::random_minco_instance(&mut rng, m);
        let traj = Minco::construct(&q, &t, bd).unwrap().traj;
        for i in 0..m - 1 {
            for d in 0..=4 {
                let a = traj.eval_piece(i, t[i], d);
                let b = traj.eval_piece(i + 1, 0.0, d);
                let defect = (a - b).norm() / a.norm().max(b.norm()).max(1.0);
                assert!(defect <= 1e-6, "piece {i} derivative {d} defect {defect:e}");
            }
            assert!((traj.eval_piece(i, t[i], 0) - q[i]).norm() <= 1e-9);
        }
        assert_eq!(traj.coeffs.nrows(), NCOEF * m);
        let end = traj.eval_piece(m - 1, t[m - 1], 0);
        assert!((end - bd.end.pos).norm() <= 1e-8 * bd.end.pos.norm().max(1.0));
    }
}
