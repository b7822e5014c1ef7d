use std::fmt::Write as _;

use lc_birkhoff::birkhoff::{
    check_conservative, check_regularity, fcal, BirkhoffSystem, EnergyFunction, SampleBox,
};
use lc_birkhoff::config::verify_kernel_identity;
use lc_birkhoff::graph::check_tellegen;
use lc_birkhoff::sim::compare_oracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{Format, VerifyArgs};
use crate::report::{conservative_summary, json, regularity_summary, SAMPLES};
use crate::simulate::{integrate, setup};
use crate::{analysis, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Serialize)]
struct Property {
    name: &'static str,
    status: Status,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    conservative: &'static str,
    conservativeness: String,
    regularity: String,
    reduced_regularity: String,
    properties: Vec<Property>,
}

fn prop(name: &'static str, ok: bool, detail: String) -> Property {
    Property {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skip(name: &'static str, detail: &str) -> Property {
    Property {
        name,
        status: Status::Skip,
        detail: detail.into(),
    }
}

/// Largest deviation of a five-point difference of E from (Fcal, G + V + W), relative to the gradient.
fn gradient_error(
    sys: &BirkhoffSystem,
    e: &EnergyFunction,
    t: f64,
    q: &[f64],
    qd: &[f64],
) -> Result<f64, CliError> {
    let m = sys.dof();
    let h = 1e-3;
    let exact_qd = fcal(sys, t, qd);
    let exact_q = sys.forces(t, q, qd).map_err(analysis)?.total();
    let mut err = 0.0f64;
    for j in 0..m {
        for velocity in [false, true] {
            let at = |s: f64| {
                let (mut q, mut qd) = (q.to_vec(), qd.to_vec());
                if velocity {
                    qd[j] += s * h;
                } else {
                    q[j] += s * h;
                }
                e.eval(t, &q, &qd)
            };
            let fd = (at(-2.0).map_err(analysis)? - 8.0 * at(-1.0).map_err(analysis)?
                + 8.0 * at(1.0).map_err(analysis)?
                - at(2.0).map_err(analysis)?)
                / (12.0 * h);
            let exact = if velocity { exact_qd[j] } else { exact_q[j] };
            err = err.max((fd - exact).abs());
        }
    }
    Ok(err / exact_qd.amax().max(exact_q.amax()).max(1e-8))
}

pub fn run(a: &VerifyArgs) -> Result<String, CliError> {
    if a.format == Format::Csv {
        return Err(CliError::Usage(
            "--format csv is only available for simulate, not verify".into(),
        ));
    }
    let r = setup(&a.common, &a.sim)?;
    let (c, p) = (&r.circuit, &r.pipeline);
    let sample = SampleBox::default();
    let mut props = Vec::new();

    let tellegen = check_tellegen(&p.incidence, &p.loops).map_err(analysis)?;
    props.push(prop("tellegen", tellegen, "B^T A = 0".into()));
    props.push(prop(
        "kernel_identity",
        verify_kernel_identity(&p.config, &p.loops),
        "C A1^T = N^T".into(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut asym = 0.0f64;
    for _ in 0..SAMPLES {
        let pt = sample.draw(&mut rng, p.system.dof());
        let f = p.system.mass(pt.t, &pt.qd);
        asym = asym.max((&f - f.transpose()).amax() / f.amax().max(1.0));
    }
    props.push(prop(
        "mass_symmetry",
        asym <= 1e-12,
        format!("max asymmetry {:.1e}", asym),
    ));

    let conservativeness =
        check_conservative(&p.system, &sample, SAMPLES, a.common.seed).map_err(analysis)?;
    let regularity = check_regularity(&p.system, &sample, SAMPLES, a.common.seed);

    let red = &r.prepared.reduced.inner;
    let reduced_regularity = check_regularity(red, &sample, SAMPLES, a.common.seed);
    props.push(prop(
        "reduced_regular",
        reduced_regularity.is_regular(),
        format!(
            "{} degrees of freedom, {}",
            red.dof(),
            regularity_summary(&reduced_regularity)
        ),
    ));

    match &r.energy {
        Some(e) => {
            let mut worst = 0.0f64;
            for _ in 0..SAMPLES {
                let pt = sample.draw(&mut rng, red.dof());
                let q: Vec<f64> =
                    pt.q.iter()
                        .zip(&r.prepared.q0)
                        .map(|(x, y)| x + y)
                        .collect();
                worst = worst.max(gradient_error(red, e, pt.t, &q, &pt.qd)?);
            }
            props.push(prop(
                "energy_gradient",
                worst < 1e-6,
                format!("max relative error {:.1e}", worst),
            ));
        }
        None => props.push(skip("energy_gradient", "not conservative")),
    }

    let traj = integrate(&r)?;
    let span = format!(
        "t in [{}, {}], dt {:.3e}",
        r.config.t0, r.config.t1, r.config.dt
    );
    match &traj.error {
        Some(e) => props.push(prop("integration", false, e.clone())),
        None => props.push(prop(
            "integration",
            true,
            format!("{} samples, {}", traj.len(), span),
        )),
    }
    props.push(prop(
        "kcl",
        traj.max_kcl_residual < 1e-10,
        format!("max residual {:.1e}", traj.max_kcl_residual),
    ));

    match (&r.energy, red.is_autonomous()) {
        (None, _) => props.push(skip("energy_conservation", "not conservative")),
        (Some(_), true) => {
            let d = traj.energy_drift().unwrap_or(f64::INFINITY);
            props.push(prop(
                "energy_conservation",
                d < 1e-8,
                format!("relative drift {:.1e}", d),
            ));
        }
        (Some(_), false) => {
            let b = traj.max_balance_residual().unwrap_or(f64::INFINITY);
            props.push(prop(
                "balance_law",
                b < 1e-6,
                format!("max |dE/dt - dE/dt partial| {:.1e}", b),
            ));
        }
    }

    if r.prepared.conserved.is_empty() {
        props.push(skip("conserved_quantities", "no inductor-only loops"));
    } else {
        let d = traj
            .conserved_drift(&r.prepared.conserved)
            .into_iter()
            .fold(0.0, f64::max);
        let names: Vec<&str> = r
            .prepared
            .conserved
            .iter()
            .map(|q| q.description.as_str())
            .collect();
        props.push(prop(
            "conserved_quantities",
            d < 1e-8,
            format!("{} drift {:.1e}", names.join("; "), d),
        ));
    }

    if c.all_linear() {
        match compare_oracle(c, red, &traj) {
            Ok(d) => props.push(prop(
                "state_space_oracle",
                d < 1e-6,
                format!("max relative deviation {:.1e}", d),
            )),
            Err(e) => props.push(prop("state_space_oracle", false, e.to_string())),
        }
    } else {
        props.push(skip("state_space_oracle", "nonlinear devices"));
    }

    let report = VerifyReport {
        schema: "lcbirk.verify.v1",
        conservative: if conservativeness.is_conservative() {
            "Yes"
        } else {
            "No"
        },
        conservativeness: conservative_summary(&conservativeness),
        regularity: regularity_summary(&regularity),
        reduced_regularity: regularity_summary(&reduced_regularity),
        properties: props,
    };
    let out = match a.format {
        Format::Json => json(&report)?,
        _ => {
            let mut out = String::new();
            let _ = writeln!(out, "conservative: {}", report.conservativeness);
            let _ = writeln!(out, "regularity: {}", report.regularity);
            let _ = writeln!(out);
            let w = report
                .properties
                .iter()
                .map(|p| p.name.len())
                .max()
                .unwrap_or(0);
            for p in &report.properties {
                let status = match p.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Skip => "skip",
                };
                let _ = writeln!(out, "{:w$}  {}  {}", p.name, status, p.detail, w = w);
            }
            out
        }
    };
    let failed = report
        .properties
        .iter()
        .filter(|p| p.status == Status::Fail)
        .count();
    if failed > 0 {
        return Err(CliError::Partial(
            out,
            format!("{} properties failed", failed),
        ));
    }
    Ok(out)
}
