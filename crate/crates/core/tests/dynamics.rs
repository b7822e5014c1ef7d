mod common;

use common::figure;
use lc_birkhoff::birkhoff::{build_energy, EvalError};
use lc_birkhoff::pipeline;
use lc_birkhoff::sim::{
    compare_oracle, five_point_derivative, min_period, simulate, Method, SimConfig,
};

#[test]
fn oscillator_tracks_cosine() {
    let sys = pipeline::build(&figure("osc.net"), false).unwrap().system;
    let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
    assert_eq!(prep.q0, vec![1.0]);
    let a = prep.reduced.inner.accel(0.0, &[1.0], &[0.0]).unwrap();
    assert_eq!(a[0], -1.0);
    let e = build_energy(&prep.reduced.inner).unwrap();
    assert_eq!(e.eval(0.0, &[1.0], &[0.0]).unwrap(), 0.5);
    let t1 = 20.0 * std::f64::consts::PI;
    let traj = simulate(
        &prep.reduced.inner,
        &prep.q0,
        &prep.qd0,
        &SimConfig::rk4(0.0, t1, 1e-3),
        Some(&e),
        &[],
    )
    .unwrap();
    let err = traj
        .times
        .iter()
        .zip(&traj.q)
        .map(|(t, q)| (q[0] - t.cos()).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-7, "max error {}", err);
    assert!(traj.energy_drift().unwrap() < 1e-9);
    assert!(traj.max_kcl_residual < 1e-10);
    assert!(compare_oracle(&figure("osc.net"), &prep.reduced.inner, &traj).unwrap() < 1e-9);
}

#[test]
fn unreduced_fig1_is_singular() {
    let sys = pipeline::build(&figure("fig1.net"), false).unwrap().system;
    let q0 = sys.initial_coordinates();
    assert!(matches!(
        sys.accel(0.0, &q0, &[0.0; 4]),
        Err(EvalError::SingularMassMatrix { .. })
    ));
}

#[test]
fn reduced_fig1_energy_and_oracle() {
    let c = figure("fig1.net");
    let sys = pipeline::build(&c, false).unwrap().system;
    let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
    let red = &prep.reduced.inner;
    let e = build_energy(red).unwrap();
    let traj = simulate(
        red,
        &prep.q0,
        &prep.qd0,
        &SimConfig::rk4(0.0, 10.0, 1e-3),
        Some(&e),
        &prep.conserved,
    )
    .unwrap();
    assert!(traj.error.is_none());
    assert!(
        traj.energy_drift().unwrap() < 1e-8,
        "{:?}",
        traj.energy_drift()
    );
    assert!(traj.max_kcl_residual < 1e-10);
    assert!(traj.conserved_drift(&prep.conserved)[0] < 1e-8);
    assert!(compare_oracle(&c, red, &traj).unwrap() < 1e-6);
}

#[test]
fn inductor_loop_reduction_preserves_dynamics() {
    let c = figure("fig1.net");
    let sys = pipeline::build(&c, false).unwrap().system;
    let a = pipeline::prepare(&sys, 0.0, false).unwrap();
    let b = pipeline::prepare(&sys, 0.0, true).unwrap();
    assert_eq!(b.reduced.inner.dof(), 2);
    let cfg = SimConfig::rk4(0.0, 5.0, 1e-3);
    let ta = simulate(&a.reduced.inner, &a.q0, &a.qd0, &cfg, None, &[]).unwrap();
    let tb = simulate(&b.reduced.inner, &b.q0, &b.qd0, &cfg, None, &[]).unwrap();
    let dev = ta
        .currents
        .iter()
        .zip(&tb.currents)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(dev < 1e-8, "{}", dev);
}

#[test]
fn fig2_linear_balance_law() {
    let c = figure("fig2_linear.net");
    let sys = pipeline::build(&c, false).unwrap().system;
    let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
    let red = &prep.reduced.inner;
    assert_eq!(red.dof(), 1);
    let e = build_energy(red).unwrap();
    let traj = simulate(
        red,
        &prep.q0,
        &prep.qd0,
        &SimConfig::rk4(0.0, 10.0, 1e-3),
        Some(&e),
        &[],
    )
    .unwrap();
    assert!(
        traj.max_balance_residual().unwrap() < 1e-6,
        "{:?}",
        traj.max_balance_residual()
    );
    assert!(traj.max_kcl_residual < 1e-10);
    assert!(compare_oracle(&c, red, &traj).unwrap() < 1e-6);
}

#[test]
fn rk45_matches_rk4_on_oscillator() {
    let sys = pipeline::build(&figure("osc.net"), false).unwrap().system;
    let mut cfg = SimConfig::rk4(0.0, 10.0, 0.1);
    cfg.method = Method::Rk45;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    let traj = simulate(&sys, &[1.0], &[0.0], &cfg, None, &[]).unwrap();
    let last = traj.len() - 1;
    assert_eq!(traj.times[last], 10.0);
    assert!((traj.q[last][0] - 10f64.cos()).abs() < 1e-7);
}

#[test]
fn five_point_derivative_is_exact_on_quartics() {
    let t: Vec<f64> = (0..9)
        .map(|k| 0.1 * k as f64 + 0.01 * (k * k) as f64)
        .collect();
    let y: Vec<f64> = t.iter().map(|x| x.powi(4) - 2.0 * x).collect();
    for (x, d) in t.iter().zip(five_point_derivative(&t, &y)) {
        assert!((d - (4.0 * x.powi(3) - 2.0)).abs() < 1e-9);
    }
}

#[test]
fn oscillator_period() {
    let sys = pipeline::build(&figure("osc.net"), false).unwrap().system;
    let t = min_period(&sys, 0.0, &[0.0], &[0.0]).unwrap();
    assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-6);
}

fn currents_with_coords(name: &str, coords: Option<&str>) -> Vec<Vec<f64>> {
    let text: String = common::figure_text(name)
        .lines()
        .filter(|l| !l.starts_with("coords"))
        .map(|l| format!("{}\n", l))
        .collect();
    let text = match coords {
        Some(c) => format!("{}coords {}\n", text, c),
        None => text,
    };
    let c = lc_birkhoff::netlist::parse_netlist(&text).unwrap();
    let sys = pipeline::build(&c, false).unwrap().system;
    let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
    let traj = simulate(
        &prep.reduced.inner,
        &prep.q0,
        &prep.qd0,
        &SimConfig::rk4(0.0, 3.0, 1e-3),
        None,
        &[],
    )
    .unwrap();
    assert!(traj.error.is_none());
    traj.currents
}

#[test]
fn branch_currents_do_not_depend_on_coordinates() {
    for name in ["fig1.net", "fig1_nonlinear.net"] {
        let a = currents_with_coords(name, Some("C3 L2 L3 L4"));
        for other in [None, Some("L3 L4 C2 C3"), Some("L1 L2 C1 C3")] {
            let b = currents_with_coords(name, other);
            let dev = a
                .iter()
                .zip(&b)
                .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
                .fold(0.0, f64::max);
            assert!(dev < 1e-8, "{} {:?}: {}", name, other, dev);
        }
    }
}

#[test]
fn swapped_fig2_balance_law_at_late_times() {
    let sys = pipeline::build(&figure("fig2_swapped.net"), false)
        .unwrap()
        .system;
    let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
    let red = &prep.reduced.inner;
    let e = build_energy(red).unwrap();
    let traj = simulate(
        red,
        &prep.q0,
        &prep.qd0,
        &SimConfig::rk4(0.0, 100.0, 1e-2),
        Some(&e),
        &[],
    )
    .unwrap();
    assert!(
        traj.max_balance_residual().unwrap() < 1e-6,
        "{:?}",
        traj.max_balance_residual()
    );
}
