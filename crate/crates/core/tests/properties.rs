mod common;

use common::random_circuits::{random_circuit, Options};
use lc_birkhoff::birkhoff::{check_conservative, SampleBox};
use lc_birkhoff::config::verify_kernel_identity;
use lc_birkhoff::exact::{frac, RatMatrix};
use lc_birkhoff::graph::check_tellegen;
use lc_birkhoff::netlist::{parse_netlist, serialize_circuit};
use lc_birkhoff::pipeline;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn circuit(seed: u64, nonlinear: bool, capacitor_loop: bool) -> lc_birkhoff::netlist::Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = Options {
        nonlinear_fraction: if nonlinear { 0.5 } else { 0.0 },
        force_capacitor_loop: capacitor_loop,
        ..Options::default()
    };
    random_circuit(&mut rng, opts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>(), nonlinear in any::<bool>()) {
        let c = circuit(seed, nonlinear, false);
        let text = serialize_circuit(&c);
        let back = parse_netlist(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_circuit(&back), text);
    }

    #[test]
    fn loops_are_orthogonal_to_cuts(seed in any::<u64>(), cap in any::<bool>()) {
        let c = circuit(seed, false, cap);
        let p = pipeline::build(&c, false).unwrap();
        prop_assert!(check_tellegen(&p.incidence, &p.loops).unwrap());
        prop_assert_eq!(p.loops.entries.rank(), c.b() - p.incidence.entries.rank());
    }

    #[test]
    fn configuration_spans_loop_space(seed in any::<u64>(), cap in any::<bool>()) {
        let c = circuit(seed, false, cap);
        let p = pipeline::build(&c, false).unwrap();
        prop_assert!(verify_kernel_identity(&p.config, &p.loops));
        // N has full column rank and its columns satisfy KCL.
        prop_assert_eq!(p.config.n.rank(), p.config.dof());
        let b = p.incidence.entries.to_rational();
        prop_assert!(b.transpose().mul(&p.config.n).is_zero());
    }

    #[test]
    fn mass_matrix_is_symmetric(seed in any::<u64>(), qd in prop::collection::vec(-1.0f64..1.0, 16)) {
        let c = circuit(seed, true, false);
        let sys = pipeline::build(&c, false).unwrap().system;
        let f = sys.mass(0.0, &qd[..sys.dof()]);
        let asym = (&f - f.transpose()).amax();
        prop_assert!(asym <= 1e-14 * f.amax().max(1.0), "asymmetry {}", asym);
    }

    #[test]
    fn sourceless_circuits_are_conservative(seed in any::<u64>(), cap in any::<bool>()) {
        let c = circuit(seed, true, cap);
        let sys = pipeline::build(&c, false).unwrap().system;
        prop_assert!(check_conservative(&sys, &SampleBox::default(), 5, seed).unwrap().is_conservative());
    }

    #[test]
    fn energy_is_constant_along_short_runs(seed in any::<u64>()) {
        let c = circuit(seed, true, false);
        let sys = pipeline::build(&c, false).unwrap().system;
        let prep = pipeline::prepare(&sys, 0.0, false).unwrap();
        let red = &prep.reduced.inner;
        let e = lc_birkhoff::birkhoff::build_energy(red).unwrap();
        let cfg = lc_birkhoff::sim::SimConfig::rk4(0.0, 0.5, 1e-3);
        let traj = lc_birkhoff::sim::simulate(red, &prep.q0, &prep.qd0, &cfg, Some(&e), &prep.conserved).unwrap();
        prop_assert!(traj.error.is_none());
        prop_assert!(traj.energy_drift().unwrap() < 1e-8);
        prop_assert!(traj.max_kcl_residual < 1e-10);
        for d in traj.conserved_drift(&prep.conserved) {
            prop_assert!(d < 1e-8);
        }
    }

    #[test]
    fn kernel_is_annihilated(entries in prop::collection::vec(-3i64..=3, 20), rows in 1usize..5) {
        let cols = entries.len() / rows;
        let m = RatMatrix::from_rows(
            (0..rows).map(|r| (0..cols).map(|c| frac(entries[r * cols + c], 1)).collect()).collect(),
        );
        let k = m.kernel();
        prop_assert_eq!(k.cols() + m.rank(), cols);
        prop_assert!(m.mul(&k).is_zero());
        prop_assert_eq!(k.rank(), k.cols());
    }
}
