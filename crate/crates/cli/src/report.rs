use std::fmt::Write as _;

use lc_birkhoff::birkhoff::{
    check_conservative, check_regularity, symbolic_q, BirkhoffSystem, Conservativeness, Regularity,
    SampleBox, Witness, WitnessKind,
};
use lc_birkhoff::config::ConfigReport;
use lc_birkhoff::graph::check_tellegen;
use lc_birkhoff::netlist::Circuit;
use lc_birkhoff::pipeline::{self, Pipeline};
use lc_birkhoff::reduce::{Elimination, LoopKind, Method};
use serde::Serialize;

use crate::args::{AnalyzeArgs, Format, ReduceArgs};
use crate::{analysis, load, CliError};

pub const SAMPLES: usize = 20;

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(analysis)?;
    s.push('\n');
    Ok(s)
}

fn no_csv(format: Format, what: &str) -> Result<(), CliError> {
    if format == Format::Csv {
        return Err(CliError::Usage(format!(
            "--format csv is only available for simulate, not {}",
            what
        )));
    }
    Ok(())
}

pub fn braces(names: &[String]) -> String {
    format!("{{{}}}", names.join(", "))
}

pub fn regularity_summary(r: &Regularity) -> String {
    match r {
        Regularity::Yes => "regular".into(),
        Regularity::StructurallyNever {
            capacitor_loops, ..
        } => {
            let noun = if capacitor_loops.len() == 1 {
                "loop"
            } else {
                "loops"
            };
            format!(
                "never regular: capacitor {} {}",
                noun,
                braces(capacitor_loops)
            )
        }
        Regularity::NumericallySingularAt { points, .. } => {
            format!("not regular: F singular at {} sampled points", points.len())
        }
    }
}

fn witness_text(w: &Witness) -> String {
    let (a, b) = match w.kind {
        WitnessKind::VelocityVelocity => ("dFcal{j}/dqd{l}", "dFcal{l}/dqd{j}"),
        WitnessKind::PositionPosition => ("dH{j}/dq{l}", "dH{l}/dq{j}"),
        WitnessKind::PositionVelocity => ("dH{j}/dqd{l}", "dFcal{l}/dq{j}"),
    };
    let fill = |s: &str| {
        s.replace("{j}", &(w.j + 1).to_string())
            .replace("{l}", &(w.l + 1).to_string())
    };
    format!(
        "{} = {:.6} but {} = {:.6} at t = {:.4}",
        fill(a),
        w.d_jl,
        fill(b),
        w.d_lj,
        w.point.t
    )
}

pub fn conservative_summary(c: &Conservativeness) -> String {
    match c {
        Conservativeness::Yes { reason } => format!("Yes ({})", reason),
        Conservativeness::No { witness } => format!("No ({})", witness_text(witness)),
    }
}

fn branch_names(c: &Circuit) -> Vec<String> {
    c.branches.iter().map(|b| b.name.clone()).collect()
}

fn coordinate_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("q{}", i)).collect()
}

#[derive(Serialize)]
struct Classification {
    capacitor_only_loops: Vec<String>,
    inductor_only_loops: Vec<String>,
    inductor_current_cutsets_present: bool,
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema: &'static str,
    branches: Vec<String>,
    nodes: Vec<String>,
    reference_node: String,
    loops: Vec<String>,
    incidence: Vec<Vec<i64>>,
    incidence_rank: usize,
    loop_matrix: Vec<Vec<i64>>,
    loop_rank: usize,
    tellegen: bool,
    classification: Classification,
    assembly: &'static str,
    config: ConfigReport,
    symbolic_q: Option<Vec<String>>,
    regularity: Regularity,
    regularity_summary: String,
    conservativeness: Conservativeness,
    conservative: bool,
}

pub fn build(common: &crate::args::Common) -> Result<(Circuit, Pipeline), CliError> {
    let c = load(common)?;
    let p = pipeline::build(&c, common.raw_at).map_err(analysis)?;
    Ok((c, p))
}

pub fn analyze(a: &AnalyzeArgs) -> Result<String, CliError> {
    no_csv(a.format, "analyze")?;
    let (c, p) = build(&a.common)?;
    let sample = SampleBox::default();
    let names = branch_names(&c);
    let loop_names = |idx: &[usize]| {
        idx.iter()
            .map(|&k| p.loops.names[k].clone())
            .collect::<Vec<_>>()
    };
    let report = AnalyzeReport {
        schema: "lcbirk.analyze.v1",
        nodes: p
            .incidence
            .nodes
            .iter()
            .map(|&n| c.nodes[n].clone())
            .collect(),
        reference_node: c.nodes[c.reference].clone(),
        loops: p.loops.names.clone(),
        incidence: p.incidence.entries.to_rows(),
        incidence_rank: p.incidence.entries.rank(),
        loop_matrix: p.loops.entries.to_rows(),
        loop_rank: p.loops.entries.rank(),
        tellegen: check_tellegen(&p.incidence, &p.loops).map_err(analysis)?,
        classification: Classification {
            capacitor_only_loops: loop_names(&p.classification.capacitor_only_loops),
            inductor_only_loops: loop_names(&p.classification.inductor_only_loops),
            inductor_current_cutsets_present: p.classification.inductor_current_cutsets_present,
        },
        assembly: if a.common.raw_at {
            "raw A^T"
        } else {
            "loop transform"
        },
        config: ConfigReport::new(&c, &p.config),
        symbolic_q: symbolic_q(&p.system),
        regularity: check_regularity(&p.system, &sample, SAMPLES, a.common.seed),
        regularity_summary: String::new(),
        conservativeness: check_conservative(&p.system, &sample, SAMPLES, a.common.seed)
            .map_err(analysis)?,
        conservative: false,
        branches: names,
    };
    let report = AnalyzeReport {
        regularity_summary: regularity_summary(&report.regularity),
        conservative: report.conservativeness.is_conservative(),
        ..report
    };
    match a.format {
        Format::Json => json(&report),
        _ => Ok(analyze_table(&p, &report)),
    }
}

fn analyze_table(p: &Pipeline, r: &AnalyzeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "branches: {}", r.branches.join(" "));
    let _ = writeln!(out, "reference node: {}", r.reference_node);
    let _ = writeln!(out);
    let _ = writeln!(out, "incidence matrix B (rank {})", r.incidence_rank);
    out.push_str(&p.incidence.entries.table(&r.branches, &r.nodes));
    let _ = writeln!(out);
    let _ = writeln!(out, "loop matrix A (rank {})", r.loop_rank);
    out.push_str(&p.loops.entries.table(&r.branches, &r.loops));
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Tellegen B^T A = 0: {}",
        if r.tellegen { "yes" } else { "NO" }
    );
    let k = &r.classification;
    let _ = writeln!(
        out,
        "capacitor-only loops: {}",
        braces(&k.capacitor_only_loops)
    );
    let _ = writeln!(
        out,
        "inductor-only loops: {}",
        braces(&k.inductor_only_loops)
    );
    let _ = writeln!(
        out,
        "inductor/current-source cutsets: {}",
        if k.inductor_current_cutsets_present {
            "present"
        } else {
            "none"
        }
    );
    let _ = writeln!(out);
    let d = p.config.dof();
    let _ = writeln!(out, "coordinates: {}", r.config.free_coordinates.join(" "));
    let _ = writeln!(out, "N");
    out.push_str(&rational_table(
        &p.config.n.to_strings(),
        &r.branches,
        &coordinate_labels(d),
    ));
    let _ = writeln!(out, "C");
    out.push_str(&p.config.c_transform.table());
    if r.config.kappa.iter().any(|k| k != "0") {
        let _ = writeln!(out, "kappa: {}", r.config.kappa.join(" "));
    }
    for (branch, term) in &r.config.forcing {
        let _ = writeln!(out, "f({}) = {}", branch, term);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "assembly: {}", r.assembly);
    match &r.symbolic_q {
        Some(q) => q.iter().for_each(|line| {
            let _ = writeln!(out, "{}", line);
        }),
        None => {
            let _ = writeln!(out, "Q: nonlinear devices, no symbolic form");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "regularity: {}", r.regularity_summary);
    let _ = writeln!(
        out,
        "conservative: {}",
        conservative_summary(&r.conservativeness)
    );
    out
}

fn rational_table(cells: &[Vec<String>], rows: &[String], cols: &[String]) -> String {
    let lw = rows.iter().map(|s| s.len()).max().unwrap_or(0);
    let cw = cells
        .iter()
        .flatten()
        .chain(cols)
        .map(|s| s.len())
        .max()
        .unwrap_or(1);
    let mut out = format!("{:lw$} ", "", lw = lw);
    for c in cols {
        out.push_str(&format!(" {:>cw$}", c, cw = cw));
    }
    out.push('\n');
    for (label, row) in rows.iter().zip(cells) {
        out.push_str(&format!("{:lw$} ", label, lw = lw));
        for x in row {
            out.push_str(&format!(" {:>cw$}", x, cw = cw));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Conserved {
    description: String,
    reference: f64,
}

#[derive(Serialize)]
struct ReduceReport {
    schema: &'static str,
    dof_before: usize,
    dof: usize,
    implicit_coordinates: usize,
    eliminated: Vec<Elimination>,
    symbolic_q: Option<Vec<String>>,
    regularity: Regularity,
    regularity_summary: String,
    conserved_quantities: Vec<Conserved>,
    q0: Vec<f64>,
    qd0: Vec<f64>,
}

fn method_text(m: &Method) -> String {
    match m {
        Method::LinearPivot {
            pivot,
            coefficients,
        } => {
            format!(
                "linear, solved for q{} (coefficients {})",
                pivot + 1,
                coefficients.join(" ")
            )
        }
        Method::ImplicitFunction { coordinates } => {
            let q: Vec<String> = coordinates.iter().map(|i| format!("q{}", i + 1)).collect();
            format!("implicit function in {}", q.join(" "))
        }
        Method::IntegratedConstraint {
            pivot,
            coefficients,
            c1,
            c2,
        } => format!(
            "integrated, solved for q{} (coefficients {}; = {} t + {})",
            pivot + 1,
            coefficients.join(" "),
            c1,
            c2
        ),
    }
}

pub fn reduce(a: &ReduceArgs) -> Result<String, CliError> {
    no_csv(a.format, "reduce")?;
    let (_, p) = build(&a.common)?;
    let prep = pipeline::prepare(&p.system, a.t0, a.reduce_inductor_loops).map_err(analysis)?;
    let red: &BirkhoffSystem = &prep.reduced.inner;
    let regularity = check_regularity(red, &SampleBox::default(), SAMPLES, a.common.seed);
    let report = ReduceReport {
        schema: "lcbirk.reduce.v1",
        dof_before: p.system.dof(),
        dof: red.dof(),
        implicit_coordinates: red.implicit_count(),
        eliminated: prep.reduced.eliminated.clone(),
        symbolic_q: symbolic_q(red),
        regularity_summary: regularity_summary(&regularity),
        regularity,
        conserved_quantities: prep
            .conserved
            .iter()
            .map(|q| Conserved {
                description: q.description.clone(),
                reference: q.reference,
            })
            .collect(),
        q0: prep.q0.clone(),
        qd0: prep.qd0.clone(),
    };
    if a.format == Format::Json {
        return json(&report);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "degrees of freedom: {} -> {}",
        report.dof_before, report.dof
    );
    if report.implicit_coordinates > 0 {
        let _ = writeln!(out, "implicit coordinates: {}", report.implicit_coordinates);
    }
    if report.eliminated.is_empty() {
        let _ = writeln!(out, "nothing to eliminate");
    }
    for (k, e) in report.eliminated.iter().enumerate() {
        let kind = match e.kind {
            LoopKind::CapacitorLoop => "capacitor loop",
            LoopKind::InductorLoop => "inductor loop",
        };
        let _ = writeln!(
            out,
            "{}. {} {}: {}",
            k + 1,
            kind,
            e.loop_branches,
            method_text(&e.method)
        );
    }
    let _ = writeln!(out);
    match &report.symbolic_q {
        Some(q) => q.iter().for_each(|line| {
            let _ = writeln!(out, "{}", line);
        }),
        None => {
            let _ = writeln!(out, "reduced Q: nonlinear devices, no symbolic form");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "regularity: {}", report.regularity_summary);
    for q in &report.conserved_quantities {
        let _ = writeln!(out, "conserved: {} = {}", q.description, q.reference);
    }
    Ok(out)
}
