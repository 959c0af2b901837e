use oncovir::continuation::{continue_equilibrium, hopf_locus, BifurcationKind, BranchKind};
use oncovir::protocol::basin_slice;
use oncovir::stability::{self, Linspace, RegionGrid};
use oncovir::*;

fn p(m: f64, xi: f64, gamma: f64) -> ModelParams {
    ModelParams::new(m, xi, gamma, 100.0).unwrap()
}

#[test]
fn continued_hopf_points_lie_on_the_closed_form_locus() {
    for m in [0.1, 0.5] {
        let res = continue_equilibrium(
            &p(m, 0.01, 0.1),
            BranchKind::Coexistence,
            Param::Xi,
            (0.005, 0.2),
            &Default::default(),
        )
        .unwrap();
        let hopf = res
            .bifurcations
            .iter()
            .find(|b| b.kind == BifurcationKind::Hopf)
            .unwrap();
        let q = p(m, hopf.value1, 0.1);
        assert!(stability::charpoly_coexistence(&q).hopf_function().abs() < 1e-8);
        let curve = hopf_locus(&q, Param::M, &[m], Param::Xi, (1e-4, 1.0)).unwrap();
        assert!((curve.points[0].params.xi - hopf.value1).abs() < 1e-8);
    }
}

#[test]
fn coexistence_burden_grows_with_viral_decay() {
    let res = continue_equilibrium(
        &p(0.1, 0.01, 0.5),
        BranchKind::Coexistence,
        Param::Gamma,
        (0.05, 0.95),
        &Default::default(),
    )
    .unwrap();
    let mut pts = res.branch.points.clone();
    pts.sort_by(|a, b| a.param_value.total_cmp(&b.param_value));
    assert!(pts.len() > 10);
    for w in pts.windows(2) {
        assert!(w[1].state.u > w[0].state.u);
        assert!(rhs(&p(0.1, 0.01, w[0].param_value), &w[0].state)
            .unwrap()
            .iter()
            .all(|r| r.abs() < 1e-8));
    }
}

#[test]
fn basin_is_single_valued_outside_the_bistable_window() {
    let q = p(0.5, 0.1488, 0.1);
    let u0s = [20.0, 40.0, 60.0, 80.0];
    let v0s = [5.0, 20.0, 40.0];
    let cells = basin_slice(&q, 10.0, &u0s, &v0s, 20000.0, &IntegratorConfig::default()).unwrap();
    assert!(
        cells.iter().all(|c| c.outcome == cells[0].outcome),
        "{cells:?}"
    );
    assert_eq!(cells[0].outcome, Outcome::Eradication);
}

#[test]
fn region_scan_output_is_reproducible() {
    let grid = RegionGrid {
        m: Linspace::new(0.05, 0.5, 4),
        xi: Linspace::new(0.005, 0.15, 5),
        gamma: Linspace::new(0.05, 0.9, 3),
        k: 100.0,
    };
    let a = stability::region_table(&stability::scan_region(&grid).unwrap()).to_csv_string();
    let b = stability::region_table(&stability::scan_region(&grid).unwrap()).to_csv_string();
    assert_eq!(a, b);
    assert!(a.starts_with("m,xi,gamma,stable,class,Ustar\n"));
    assert_eq!(a.lines().count(), 1 + 4 * 5 * 3);
}

#[test]
fn dimensional_and_scaled_runs_agree() {
    let dim = DimensionalParams {
        r: 0.2,
        k: 100.0,
        beta: 2.0,
        alpha: 1.0,
        d_i: 0.02,
        d_v: 0.2,
    };
    let q = nondimensionalize(&dim, false).unwrap();
    let scaled = nondimensionalize(&dim, true).unwrap();
    let cfg = IntegratorConfig::default();
    let a = integrate(&q, State::new(50.0, 10.0, 10.0), 300.0, &cfg, None)
        .unwrap()
        .final_state();
    let b = integrate(&scaled, State::new(0.5, 0.1, 0.1), 300.0, &cfg, None)
        .unwrap()
        .final_state();
    assert!((a.u / 100.0 - b.u).abs() < 1e-7);
    assert!((a.i / 100.0 - b.i).abs() < 1e-7);
    assert!((a.v / 100.0 - b.v).abs() < 1e-7);
}
