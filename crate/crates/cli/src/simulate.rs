use lc_birkhoff::birkhoff::{build_energy, EnergyError, EnergyFunction};
use lc_birkhoff::pipeline::{self, Pipeline, Prepared};
use lc_birkhoff::sim::{default_dt, min_period, simulate, Method, SimConfig, Trajectory};
use serde::Serialize;

use crate::args::{Common, Format, MethodArg, SimOptions, SimulateArgs};
use crate::report::{build, json};
use crate::{analysis, CliError};

/// Reduced system, initial state and settings for one run.
pub struct Run {
    pub circuit: lc_birkhoff::netlist::Circuit,
    pub pipeline: Pipeline,
    pub prepared: Prepared,
    pub energy: Option<EnergyFunction>,
    pub config: SimConfig,
}

pub fn setup(common: &Common, opts: &SimOptions) -> Result<Run, CliError> {
    let (circuit, p) = build(common)?;
    let prepared =
        pipeline::prepare(&p.system, opts.t0, opts.reduce_inductor_loops).map_err(analysis)?;
    let red = &prepared.reduced.inner;
    if red.dof() == 0 {
        return Err(CliError::Analysis(
            "no degrees of freedom left after reduction".into(),
        ));
    }
    let energy = match build_energy(red) {
        Ok(e) => Some(e),
        Err(EnergyError::NotConservative(_)) => {
            log::warn!("system is not conservative; energy columns left empty");
            None
        }
        Err(e) => return Err(analysis(e)),
    };
    let t1 = match opts.t1 {
        Some(t) => t,
        None => {
            let period =
                min_period(red, opts.t0, &prepared.q0, &prepared.qd0).ok_or_else(|| {
                    CliError::Usage("no oscillation to size the run; give --t1".into())
                })?;
            opts.t0 + 10.0 * period
        }
    };
    let dt = opts
        .dt
        .unwrap_or_else(|| default_dt(red, opts.t0, t1, &prepared.q0, &prepared.qd0));
    let config = SimConfig {
        t0: opts.t0,
        t1,
        dt,
        method: match opts.method {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Rk45 => Method::Rk45,
        },
        rtol: opts.rtol,
        atol: opts.atol,
        record_every: opts.record_every,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    log::info!(
        "t in [{}, {}], dt {}, {} degrees of freedom",
        config.t0,
        config.t1,
        config.dt,
        red.dof()
    );
    Ok(Run {
        circuit,
        pipeline: p,
        prepared,
        energy,
        config,
    })
}

pub fn integrate(run: &Run) -> Result<Trajectory, CliError> {
    let p = &run.prepared;
    simulate(
        &p.reduced.inner,
        &p.q0,
        &p.qd0,
        &run.config,
        run.energy.as_ref(),
        &p.conserved,
    )
    .map_err(analysis)
}

fn number(x: f64) -> String {
    format!("{:.16e}", x)
}

fn header(t: &Trajectory, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|i| format!("q{}", i)));
    h.extend((1..=m).map(|i| format!("qd{}", i)));
    h.push("E".into());
    h.push("balance_residual".into());
    h.extend((1..=t.conserved_names.len()).map(|i| format!("cq{}", i)));
    h.extend(t.branch_names.iter().map(|b| format!("i_{}", b)));
    h.extend(t.branch_names.iter().map(|b| format!("v_{}", b)));
    h
}

fn rows(t: &Trajectory) -> Vec<Vec<String>> {
    let optional = |v: &[f64], k: usize| v.get(k).map_or(String::new(), |x| number(*x));
    (0..t.len())
        .map(|k| {
            let mut r = vec![number(t.times[k])];
            r.extend(t.q[k].iter().map(|x| number(*x)));
            r.extend(t.qd[k].iter().map(|x| number(*x)));
            r.push(optional(&t.energy, k));
            r.push(optional(&t.balance_residual, k));
            r.extend(t.conserved.get(k).into_iter().flatten().map(|x| number(*x)));
            r.extend(t.currents[k].iter().map(|x| number(*x)));
            r.extend(t.voltages[k].iter().map(|x| number(*x)));
            r
        })
        .collect()
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    schema: &'static str,
    dof: usize,
    columns: Vec<String>,
    trajectory: &'a Trajectory,
}

pub fn render(t: &Trajectory, m: usize, format: Format) -> Result<String, CliError> {
    let head = header(t, m);
    match format {
        Format::Json => json(&SimulateReport {
            schema: "lcbirk.simulate.v1",
            dof: m,
            columns: head,
            trajectory: t,
        }),
        Format::Csv => {
            let mut out = head.join(",");
            out.push('\n');
            for r in rows(t) {
                out.push_str(&r.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        Format::Table => {
            let body = rows(t);
            let w = head
                .iter()
                .chain(body.iter().flatten())
                .map(|s| s.len())
                .max()
                .unwrap_or(1);
            let line = |cells: &[String]| {
                let mut s = cells
                    .iter()
                    .map(|c| format!("{:>w$}", c, w = w))
                    .collect::<Vec<_>>()
                    .join(" ");
                s.push('\n');
                s
            };
            let mut out = line(&head);
            for r in &body {
                out.push_str(&line(r));
            }
            Ok(out)
        }
    }
}

pub fn run(a: &SimulateArgs) -> Result<String, CliError> {
    let r = setup(&a.common, &a.sim)?;
    let t = integrate(&r)?;
    let out = render(&t, r.prepared.reduced.inner.dof(), a.format)?;
    match &t.error {
        Some(e) => Err(CliError::Partial(
            out,
            format!(
                "trajectory stopped at t = {}: {}",
                t.times.last().unwrap_or(&r.config.t0),
                e
            ),
        )),
        None => Ok(out),
    }
}
