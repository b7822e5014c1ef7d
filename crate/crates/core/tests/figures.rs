mod common;

use common::fig1::{check_symbolic, ex91, n9, Params};
use common::figure;
use lc_birkhoff::birkhoff::{
    check_conservative, check_regularity, symbolic_q, Conservativeness, LinearForms, Regularity,
    SampleBox, WitnessKind,
};
use lc_birkhoff::exact::{frac, rat, RatMatrix, Rational};
use lc_birkhoff::graph::{
    build_incidence, build_loop_basis, check_tellegen, classify_loops, IntMatrix,
};
use lc_birkhoff::pipeline;
use lc_birkhoff::reduce::{
    conserved_quantities, reduce_capacitor_loops, reduce_inductor_loops_linear, LoopKind, Method,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fig1_incidence_and_loops() {
    let c = figure("fig1.net");
    let (b, a) = ex91();
    let bm = build_incidence(&c);
    let am = build_loop_basis(&c).unwrap();
    assert_eq!(bm.entries, IntMatrix::from_rows(&b));
    assert_eq!(am.entries, IntMatrix::from_rows(&a));
    assert!(check_tellegen(&bm, &am).unwrap());
    let cls = classify_loops(&c, &am, &bm);
    assert_eq!(cls.capacitor_only_loops, vec![0]);
    assert_eq!(cls.inductor_only_loops, vec![2]);
    // Node V3 touches only L1, L3, L4.
    assert!(cls.inductor_current_cutsets_present);
}

#[test]
fn fig1_one_sign_flip_breaks_tellegen() {
    let c = figure("fig1.net");
    let bm = build_incidence(&c);
    let mut am = build_loop_basis(&c).unwrap();
    let mut rows = am.entries.to_rows();
    rows[2][2] = -rows[2][2];
    am.entries = IntMatrix::from_rows(&rows);
    assert!(!check_tellegen(&bm, &am).unwrap());
}

#[test]
fn fig1_auto_loops_span_same_space() {
    let text = common::figure_text("fig1.net");
    let stripped: String = text
        .lines()
        .filter(|l| !l.starts_with("loop"))
        .map(|l| format!("{}\n", l))
        .collect();
    let c = lc_birkhoff::netlist::parse_netlist(&stripped).unwrap();
    let auto = build_loop_basis(&c).unwrap().entries.to_rational();
    let (_, a) = ex91();
    assert_eq!(auto.rank(), 4);
    assert!(auto.same_column_space(&RatMatrix::from_ints(&a, 4)));
}

#[test]
fn fig1_config_matrices() {
    let p = pipeline::build(&figure("fig1.net"), false).unwrap();
    let (n, cm) = n9();
    assert_eq!(p.config.n, n);
    assert_eq!(p.config.c_transform, cm);
    assert!(lc_birkhoff::config::verify_kernel_identity(
        &p.config, &p.loops
    ));
}

#[test]
fn fig1_symbolic_q_at_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        check_symbolic(&Params::draw(&mut rng)).unwrap();
    }
}

fn m(rows: Vec<Vec<Rational>>) -> RatMatrix {
    RatMatrix::from_rows(rows)
}

#[test]
fn fig1_unit_values_regularity() {
    let sys = pipeline::build(&figure("fig1.net"), false).unwrap().system;
    match check_regularity(&sys, &SampleBox::default(), 10, 0) {
        Regularity::StructurallyNever {
            capacitor_loops,
            kernel_dimension,
        } => {
            assert_eq!(kernel_dimension, 1);
            assert_eq!(capacitor_loops, vec!["I1".to_string()]);
        }
        other => panic!("{:?}", other),
    }
    let red = reduce_capacitor_loops(&sys).unwrap();
    assert!(check_regularity(&red.inner, &SampleBox::default(), 10, 0).is_regular());
    let f = LinearForms::of(&red.inner).unwrap();
    // L2 [L1 L4 + L3 (L1 + L4)] with unit inductors.
    assert_eq!(f.mass.det(), rat(3));
    let q0 = red.inner.initial_coordinates();
    let qd0 = red.inner.initial_velocity(0.0).unwrap();
    let hat = reduce_inductor_loops_linear(red, 0.0, &q0, &qd0).unwrap();
    let f = LinearForms::of(&hat.inner).unwrap();
    assert_eq!(
        f.mass,
        m(vec![
            vec![frac(2, 3), frac(1, 3)],
            vec![frac(1, 3), frac(5, 3)]
        ])
    );
    assert_eq!(f.mass.det(), rat(1));
    assert!(check_regularity(&hat.inner, &SampleBox::default(), 10, 0).is_regular());
}

#[test]
fn fig1_conservativeness_and_raw_witness() {
    let c = figure("fig1.net");
    let sys = pipeline::build(&c, false).unwrap().system;
    assert!(check_conservative(&sys, &SampleBox::default(), 20, 0)
        .unwrap()
        .is_conservative());
    let raw = pipeline::build(&c, true).unwrap().system;
    match check_conservative(&raw, &SampleBox::default(), 20, 0).unwrap() {
        Conservativeness::No { witness } => {
            assert_eq!(witness.kind, WitnessKind::VelocityVelocity);
            assert_eq!((witness.j, witness.l), (1, 2));
            let (a, b) = witness.recompute(&raw).unwrap();
            assert!((a - witness.d_jl).abs() < 1e-9 && (b - witness.d_lj).abs() < 1e-9);
            assert!((a - b).abs() > 0.5);
        }
        other => panic!("{:?}", other),
    }
}

#[test]
fn fig1_symbolic_text() {
    let sys = pipeline::build(&figure("fig1.net"), false).unwrap().system;
    let q = symbolic_q(&sys).unwrap();
    assert_eq!(q.len(), 4);
    assert!(q[1].starts_with("Q2 = qdd2 - q1 + q2 + q3"), "{}", q[1]);
    assert!(q[0].starts_with("Q1 = 3*q1 - q2 - q3 + q4"), "{}", q[0]);
}

#[test]
fn fig1_ledger_and_conserved_quantity() {
    let sys = pipeline::build(&figure("fig1.net"), false).unwrap().system;
    let red = reduce_capacitor_loops(&sys).unwrap();
    assert_eq!(red.eliminated.len(), 1);
    assert_eq!(red.eliminated[0].kind, LoopKind::CapacitorLoop);
    assert_eq!(red.eliminated[0].loop_branches, "+C1 -C2 +C3");
    assert!(matches!(
        red.eliminated[0].method,
        Method::LinearPivot { pivot: 0, .. }
    ));
    let qd0 = red.inner.initial_velocity(0.0).unwrap();
    let cq = conserved_quantities(&red.inner, 0.0, &qd0);
    assert_eq!(cq.len(), 1);
    // L1 i1 - L2 i2 + L3 i3 with unit inductors and currents (0.3, -0.1, 0.1).
    assert!((cq[0].reference - 0.5).abs() < 1e-15);
    assert_eq!(cq[0].description, "+L1 -L2 +L3");
}

#[test]
fn two_capacitor_loop_reduces_to_nothing() {
    let c =
        lc_birkhoff::netlist::parse_netlist("branch C1 a b C 1\nbranch C2 b a C 2\ninit C1 1/2\n")
            .unwrap();
    let sys = pipeline::build(&c, false).unwrap().system;
    let red = reduce_capacitor_loops(&sys).unwrap();
    assert_eq!(red.inner.dof(), 0);
    assert_eq!(red.eliminated.len(), 1);
}

#[test]
fn fig2_matrices_and_verdicts() {
    let c = figure("fig2_linear.net");
    let p = pipeline::build(&c, false).unwrap();
    let b = vec![
        vec![-1, 1, 0, 0],
        vec![-1, 0, 0, 0],
        vec![0, 0, 0, -1],
        vec![0, 0, -1, 0],
        vec![0, -1, 0, 0],
        vec![1, 0, 0, -1],
        vec![1, 0, 0, 0],
        vec![0, -1, 1, 0],
    ];
    let a = vec![
        vec![0, 0, 1, 0],
        vec![1, -1, 0, 0],
        vec![-1, 0, 0, 0],
        vec![0, 0, 0, 1],
        vec![0, 0, 1, -1],
        vec![1, 0, 0, 0],
        vec![0, -1, 1, 0],
        vec![0, 0, 0, 1],
    ];
    assert_eq!(p.incidence.entries, IntMatrix::from_rows(&b));
    assert_eq!(p.loops.entries, IntMatrix::from_rows(&a));
    assert!(p.classification.inductor_current_cutsets_present);
    // N over L1, L2, L3, C1, C2, then the source rows.
    let lc = p.config.n_lc();
    assert_eq!(
        lc,
        RatMatrix::from_ints(
            &[vec![1, 0], vec![-1, 0], vec![0, 0], vec![0, 1], vec![1, -1]],
            2
        )
    );
    assert_eq!(p.config.c_transform, RatMatrix::identity(2));
    let terms = p.config.forcing_terms(&c);
    let find = |n: &str| terms.iter().find(|(b, _)| b == n).map(|(_, t)| t.clone());
    assert_eq!(find("L2").as_deref(), Some("P(SI1) + P(SI2)"));
    assert_eq!(find("L3").as_deref(), Some("-P(SI1)"));
    assert!(check_conservative(&p.system, &SampleBox::default(), 20, 0)
        .unwrap()
        .is_conservative());
    assert!(!check_regularity(&p.system, &SampleBox::default(), 5, 0).is_regular());

    let nl = pipeline::build(&figure("fig2.net"), false).unwrap().system;
    assert!(!check_conservative(&nl, &SampleBox::default(), 20, 0)
        .unwrap()
        .is_conservative());
    let sw = pipeline::build(&figure("fig2_swapped.net"), false)
        .unwrap()
        .system;
    assert!(check_conservative(&sw, &SampleBox::default(), 20, 0)
        .unwrap()
        .is_conservative());
    assert!(check_regularity(&sw, &SampleBox::default(), 20, 0).is_regular());
}

#[test]
fn fig2_linear_symbolic_forcing() {
    let sys = pipeline::build(&figure("fig2_linear.net"), false)
        .unwrap()
        .system;
    let f = LinearForms::of(&sys).unwrap();
    // Q1 = (L1 + L2) qdd1 + q1/C2 - q2/C2 - L2 f2'' ...
    assert_eq!(
        f.mass,
        m(vec![vec![frac(5, 2), rat(0)], vec![rat(0), rat(0)]])
    );
    assert_eq!(
        f.stiffness,
        m(vec![
            vec![frac(3, 5), frac(-3, 5)],
            vec![frac(-3, 5), frac(8, 5)]
        ])
    );
    // f2 = P(SI1) + P(SI2) enters row 1 through -L2 f2''.
    assert_eq!(f.w_time.row(0), &[frac(-3, 2), frac(-3, 2), rat(0)]);
    assert_eq!(f.v_time.row(1), &[rat(0), rat(0), rat(1)]);
}
