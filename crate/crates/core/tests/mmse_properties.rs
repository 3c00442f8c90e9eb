mod common;

use common::*;
use proptest::prelude::*;
use rrjio::mmse::{
    alternate_fixed_point, full_rank_wiener, joint_cost, krylov_projection, optimal_projection, range_condition,
    reduced_mmse, reduced_wiener, FixedPointOptions, ProjectionMatrix,
};
use rrjio::numerics::{orthonormalize_columns, CMatrix};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wiener_matches_elimination(seed in any::<u64>(), m in 1usize..12) {
        let mut g = rng(seed);
        let stats = random_stats(&mut g, m);
        let (w, mmse) = full_rank_wiener(&stats).unwrap();
        prop_assert!((mmse - mmse_oracle(&stats)).abs() < 1e-9 * stats.sigma_d2);
        prop_assert!((stats.mse(&w) - mmse).abs() < 1e-9 * stats.sigma_d2);
    }

    #[test]
    fn reduced_mmse_matches_elimination_and_bounds(seed in any::<u64>(), m in 2usize..12, d in 1usize..6) {
        let mut g = rng(seed);
        let d = d.min(m);
        let stats = random_stats(&mut g, m);
        let s = random_matrix(&mut g, m, d);
        let ps = ProjectionMatrix::new(s.clone()).unwrap();
        let ours = reduced_wiener(&stats, &ps).unwrap();
        let oracle = reduced_mmse_oracle(&stats, &s);
        prop_assert!((ours.mmse - oracle).abs() < 1e-8 * stats.sigma_d2);
        prop_assert!((reduced_mmse(&stats, &ps).unwrap() - oracle).abs() < 1e-8 * stats.sigma_d2);
        prop_assert!(ours.mmse >= full_rank_wiener(&stats).unwrap().1 - 1e-9 * stats.sigma_d2);
        prop_assert!(ours.mmse <= stats.sigma_d2 + 1e-9);
        // The design's cost equals its MMSE.
        prop_assert!((joint_cost(&stats, &ps, &ours.w_bar) - ours.mmse).abs() < 1e-8 * stats.sigma_d2);
    }

    #[test]
    fn mmse_depends_only_on_range(seed in any::<u64>(), m in 2usize..12, d in 1usize..6) {
        let mut g = rng(seed);
        let d = d.min(m);
        let stats = random_stats(&mut g, m);
        let s = random_matrix(&mut g, m, d);
        let t = random_matrix(&mut g, d, d) + CMatrix::identity(d, d).scale(2.0);
        let a = reduced_mmse(&stats, &ProjectionMatrix::new(s.clone()).unwrap()).unwrap();
        let b = reduced_mmse(&stats, &ProjectionMatrix::new(&s * t).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * stats.sigma_d2);
    }

    #[test]
    fn optimal_projection_minimizes_cost_for_fixed_filter(seed in any::<u64>(), m in 2usize..10, d in 1usize..5) {
        let mut g = rng(seed);
        let d = d.min(m);
        let stats = random_stats(&mut g, m);
        let w_bar = random_vector(&mut g, d);
        let best = optimal_projection(&stats, &w_bar).unwrap();
        let c_best = joint_cost(&stats, &best, &w_bar);
        for _ in 0..5 {
            let other = ProjectionMatrix::new(random_matrix(&mut g, m, d)).unwrap();
            prop_assert!(c_best <= joint_cost(&stats, &other, &w_bar) + 1e-9);
        }
        // Its effective filter is the full-rank Wiener solution.
        let (w_o, mmse) = full_rank_wiener(&stats).unwrap();
        prop_assert!((best.as_matrix() * &w_bar - &w_o).norm() < 1e-8 * (1.0 + w_o.norm()));
        prop_assert!((c_best - mmse).abs() < 1e-8 * stats.sigma_d2);
    }

    #[test]
    fn krylov_basis_spans_power_sequence(seed in any::<u64>(), m in 2usize..10, d in 1usize..6) {
        let mut g = rng(seed);
        let d = d.min(m);
        let stats = random_stats(&mut g, m);
        let s = krylov_projection(&stats, d).unwrap();
        let q = s.as_matrix();
        prop_assert!((q.adjoint() * q - CMatrix::identity(q.ncols(), q.ncols())).norm() < 1e-10);
        let mut cols = vec![stats.p.clone()];
        for k in 1..d {
            let next = stats.r.as_matrix() * &cols[k - 1];
            cols.push(next.unscale(next.norm()));
        }
        let k = orthonormalize_columns(&CMatrix::from_columns(&cols), 1e-10).unwrap().q;
        // Same subspace: projectors agree.
        let pa = q * q.adjoint();
        let pb = &k * k.adjoint();
        prop_assert!((pa - pb).norm() < 1e-6);
    }
}

#[test]
fn krylov_at_full_rank_is_wiener() {
    let mut g = rng(5);
    for m in [3, 6, 9] {
        let stats = random_stats(&mut g, m);
        let s = krylov_projection(&stats, m).unwrap();
        let full = full_rank_wiener(&stats).unwrap().1;
        assert!((reduced_mmse(&stats, &s).unwrap() - full).abs() < 1e-8);
    }
}

#[test]
fn range_condition_tracks_wiener_membership() {
    let mut g = rng(6);
    let m = 8;
    for _ in 0..20 {
        let stats = random_stats(&mut g, m);
        let s = random_matrix(&mut g, m, 3);
        let rc = range_condition(&stats, &ProjectionMatrix::new(s.clone()).unwrap()).unwrap();
        assert!(!rc.holds && rc.mmse_gap > 1e-8 * stats.sigma_d2);

        let w_o = gauss_solve(stats.r.as_matrix(), &stats.p);
        let mut with = s.clone();
        with.set_column(1, &w_o);
        let rc = range_condition(&stats, &ProjectionMatrix::new(with).unwrap()).unwrap();
        assert!(rc.holds && rc.mmse_gap.abs() <= 1e-8 * stats.sigma_d2);
    }
}

#[test]
fn fixed_point_trace_is_monotone() {
    let mut g = rng(7);
    for d in [1, 2, 4] {
        for _ in 0..10 {
            let stats = random_stats(&mut g, 12);
            let init = ProjectionMatrix::new(random_matrix(&mut g, 12, d)).unwrap();
            let out = alternate_fixed_point(&stats, &init, FixedPointOptions::default()).unwrap();
            assert!(out.converged);
            for pair in out.mmse_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * stats.sigma_d2);
            }
            assert!((out.design.mmse - mmse_oracle(&stats)).abs() < 1e-8);
        }
    }
}
