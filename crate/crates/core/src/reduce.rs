//! Elimination of capacitor-only and inductor-only loops.
//!
//! Every step is an affine change of coordinates q = J q' + j0 + jt phi(t)
//! under which the Birkhoffian pulls back as Q' = J^T Q.

use nalgebra::DMatrix;
use num::{One, Signed, Zero};
use serde::Serialize;

use crate::birkhoff::{BirkhoffSystem, EvalError, ImplicitBlock};
use crate::exact::{fmt_rational, from_f64, to_f64, RatMatrix, Rational};
use crate::functions::BasisFn;
use crate::netlist::DeviceKind;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReduceError {
    #[error(transparent)]
    ImplicitSolveFailure(#[from] EvalError),
    #[error("degenerate pivot: constraint {0} has no nonzero coefficient")]
    DegeneratePivot(String),
    #[error("inductor loop {0} contains nonlinear inductors")]
    NonlinearInductorLoop(String),
    #[error(
        "capacitor constraint Jacobian is rank deficient at the initial point ({rank} < {needed})"
    )]
    JacobianRankDeficient { rank: usize, needed: usize },
    #[error("reduction is not defined for the diagnostic raw assembly")]
    MixedRows,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LoopKind {
    CapacitorLoop,
    InductorLoop,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Method {
    /// Constraint sum_i c_i q^i + ... = 0 solved for coordinate `pivot`.
    LinearPivot {
        pivot: usize,
        coefficients: Vec<String>,
    },
    /// Coordinates handed to the Newton block.
    ImplicitFunction { coordinates: Vec<usize> },
    /// sum_i c_i q^i + sum_a w_a L_a f^a(t) = c1 t + c2 solved for `pivot`.
    IntegratedConstraint {
        pivot: usize,
        coefficients: Vec<String>,
        c1: f64,
        c2: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Elimination {
    /// Signed branch set of the loop, e.g. `+C1 -C2 +C3`.
    pub loop_branches: String,
    pub kind: LoopKind,
    pub method: Method,
}

#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub inner: BirkhoffSystem,
    pub eliminated: Vec<Elimination>,
}

impl ReducedSystem {
    pub fn unreduced(sys: BirkhoffSystem) -> Self {
        ReducedSystem {
            inner: sys,
            eliminated: Vec::new(),
        }
    }
}

/// Applies q = J q' + j0 + jt phi and shrinks `dof` by `drop`.
fn reparametrize(
    sys: &mut BirkhoffSystem,
    j: &RatMatrix,
    j0: &[Rational],
    jt: &RatMatrix,
    dof: usize,
    q_init: Vec<Rational>,
) {
    let nj0 = sys.n.mul_vec(j0);
    sys.kappa = sys.kappa.iter().zip(&nj0).map(|(a, b)| a + b).collect();
    sys.forcing = sys.forcing.add(&sys.n.mul(jt));
    sys.n = sys.n.mul(j);
    sys.vmat = j.transpose().mul(&sys.vmat);
    let mj0 = sys.lift.m.mul_vec(j0);
    sys.lift.m0 = sys.lift.m0.iter().zip(&mj0).map(|(a, b)| a + b).collect();
    sys.lift.mt = sys.lift.mt.add(&sys.lift.m.mul(jt));
    sys.lift.m = sys.lift.m.mul(j);
    sys.dof = dof;
    sys.q_init = q_init;
    sys.refresh();
}

/// Adds the ramp t to the basis if missing; returns its column.
fn ensure_ramp(sys: &mut BirkhoffSystem) -> usize {
    if let Some(k) = sys.basis.ramp_index() {
        return k;
    }
    let k = sys.basis.push(BasisFn::Ramp, "t".into());
    let extend = |m: &RatMatrix| m.hstack(&RatMatrix::zeros(m.rows(), 1));
    sys.forcing = extend(&sys.forcing);
    sys.vmat = extend(&sys.vmat);
    sys.lift.mt = extend(&sys.lift.mt);
    sys.refresh();
    k
}

fn visible_cols(sys: &BirkhoffSystem) -> Vec<usize> {
    (0..sys.dof).collect()
}

fn rows_of(sys: &BirkhoffSystem, pred: impl Fn(DeviceKind) -> bool) -> Vec<usize> {
    (0..sys.devices.len())
        .filter(|&i| pred(sys.devices[i].kind()))
        .collect()
}

fn describe(sys: &BirkhoffSystem, y: &[Rational]) -> String {
    let full: Vec<Rational> = (0..sys.coordinate_count())
        .map(|i| y.get(i).cloned().unwrap_or_else(Rational::zero))
        .collect();
    let flows = sys.n.mul_vec(&full);
    let mut parts = Vec::new();
    for (i, f) in flows.iter().enumerate() {
        if f.is_zero() {
            continue;
        }
        let sign = if f.is_positive() { "+" } else { "-" };
        let mag = f.abs();
        if mag.is_one() {
            parts.push(format!("{}{}", sign, sys.names[i]));
        } else {
            parts.push(format!("{}{}*{}", sign, fmt_rational(&mag), sys.names[i]));
        }
    }
    parts.join(" ")
}

/// Transform taking the kernel vector y (1 at `f`) to the coordinate axis e_f.
fn axis_transform(sys: &mut BirkhoffSystem, y: &[Rational], f: usize) {
    let total = sys.coordinate_count();
    let mut t = RatMatrix::identity(total);
    for (i, v) in y.iter().enumerate() {
        t[(i, f)] = v.clone();
    }
    let t_inv = t.inverse().expect("unit diagonal");
    let q_init = t_inv.mul_vec(&sys.q_init);
    let nb = sys.basis.len();
    reparametrize(
        sys,
        &t,
        &vec![Rational::zero(); total],
        &RatMatrix::zeros(total, nb),
        sys.dof,
        q_init,
    );
}

/// Eliminates coordinate p using sum_i c_i q^i + c0 + ct . phi = 0.
fn eliminate(sys: &mut BirkhoffSystem, c: &[Rational], c0: &Rational, ct: &[Rational], p: usize) {
    let total = sys.coordinate_count();
    let keep: Vec<usize> = (0..total).filter(|&i| i != p).collect();
    let mut j = RatMatrix::zeros(total, total - 1);
    for (col, &i) in keep.iter().enumerate() {
        j[(i, col)] = Rational::one();
        if i < c.len() {
            j[(p, col)] = -&c[i] / &c[p];
        }
    }
    let mut j0 = vec![Rational::zero(); total];
    j0[p] = -c0 / &c[p];
    let mut jt = RatMatrix::zeros(total, sys.basis.len());
    for (k, v) in ct.iter().enumerate() {
        jt[(p, k)] = -v / &c[p];
    }
    let q_init = keep.iter().map(|&i| sys.q_init[i].clone()).collect();
    let dof = sys.dof - 1;
    reparametrize(sys, &j, &j0, &jt, dof, q_init);
}

fn pick_pivot(c: &[Rational]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in c.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        if best.is_none_or(|b| v.abs() > c[b].abs()) {
            best = Some(i);
        }
    }
    best
}

fn kernel_of_rows(sys: &BirkhoffSystem, rows: &[usize]) -> RatMatrix {
    let block = sys.n.select_rows(rows).select_cols(&visible_cols(sys));
    if rows.is_empty() {
        RatMatrix::identity(sys.dof)
    } else {
        block.kernel()
    }
}

fn first_unit(y: &[Rational]) -> usize {
    // kernel() puts a 1 at the free column; the last such entry is that column.
    (0..y.len())
        .rev()
        .find(|&i| y[i].is_one())
        .expect("kernel vector has a unit entry")
}

pub fn reduce_capacitor_loops(sys: &BirkhoffSystem) -> Result<ReducedSystem, ReduceError> {
    if sys.mix.is_some() {
        return Err(ReduceError::MixedRows);
    }
    let mut out = sys.clone();
    let mut eliminated = Vec::new();
    let inductors = rows_of(sys, |k| k == DeviceKind::Inductor);
    let capacitors = rows_of(sys, |k| k == DeviceKind::Capacitor);
    let kernel = kernel_of_rows(&out, &inductors);
    if kernel.cols() == 0 {
        return Ok(ReducedSystem {
            inner: out,
            eliminated,
        });
    }
    let nonlinear = (0..kernel.cols()).any(|k| {
        let y = kernel.col(k);
        let mut full = y.clone();
        full.resize(out.coordinate_count(), Rational::zero());
        let flows = out.n.mul_vec(&full);
        capacitors
            .iter()
            .any(|&a| !flows[a].is_zero() && !out.devices[a].is_linear())
    });
    if nonlinear {
        return reduce_nonlinear(out, kernel);
    }
    loop {
        let kernel = kernel_of_rows(&out, &inductors);
        if kernel.cols() == 0 {
            break;
        }
        let y = kernel.col(0);
        let f = first_unit(&y);
        let label = describe(&out, &y);
        axis_transform(&mut out, &y, f);
        // Row f of G + V, exact and linear in q.
        let total = out.coordinate_count();
        let nb = out.basis.len();
        let mut c = vec![Rational::zero(); total];
        let mut c0 = Rational::zero();
        let mut ct = vec![Rational::zero(); nb];
        for &a in &capacitors {
            let nf = out.n[(a, f)].clone();
            if nf.is_zero() {
                continue;
            }
            let e = out.devices[a]
                .linear_coefficient()
                .expect("linear capacitor");
            let w = &nf * &e;
            for i in 0..total {
                c[i] += &w * &out.n[(a, i)];
            }
            c0 += &w * &out.kappa[a];
            for k in 0..nb {
                ct[k] += &w * &out.forcing[(a, k)];
            }
        }
        for k in 0..nb {
            ct[k] += out.vmat[(f, k)].clone();
        }
        let p = pick_pivot(&c).ok_or_else(|| ReduceError::DegeneratePivot(label.clone()))?;
        let coefficients = c.iter().map(fmt_rational).collect();
        eliminate(&mut out, &c, &c0, &ct, p);
        eliminated.push(Elimination {
            loop_branches: label,
            kind: LoopKind::CapacitorLoop,
            method: Method::LinearPivot {
                pivot: p,
                coefficients,
            },
        });
    }
    out.capacitor_loops.clear();
    Ok(ReducedSystem {
        inner: out,
        eliminated,
    })
}

fn reduce_nonlinear(
    mut out: BirkhoffSystem,
    kernel: RatMatrix,
) -> Result<ReducedSystem, ReduceError> {
    let total = out.coordinate_count();
    let r = kernel.cols();
    let mut t = RatMatrix::identity(total);
    let mut axes = Vec::new();
    let mut labels = Vec::new();
    for k in 0..r {
        let y = kernel.col(k);
        let f = first_unit(&y);
        for (i, v) in y.iter().enumerate() {
            t[(i, f)] = v.clone();
        }
        axes.push(f);
        labels.push(describe(&out, &y));
    }
    // Move the kernel axes to the end.
    let order: Vec<usize> = (0..total)
        .filter(|i| !axes.contains(i))
        .chain(axes.iter().copied())
        .collect();
    let mut perm = RatMatrix::zeros(total, total);
    for (new, &old) in order.iter().enumerate() {
        perm[(old, new)] = Rational::one();
    }
    let j = t.mul(&perm);
    let q_init = j.inverse().expect("invertible").mul_vec(&out.q_init);
    let nb = out.basis.len();
    let dof = out.dof - r;
    reparametrize(
        &mut out,
        &j,
        &vec![Rational::zero(); total],
        &RatMatrix::zeros(total, nb),
        dof,
        q_init,
    );
    let start: Vec<f64> = out.q_init[dof..].iter().map(to_f64).collect();
    out.implicit = Some(ImplicitBlock::new(r, start));
    out.refresh();

    // Constraint Jacobian at the initial point.
    let qb: Vec<f64> = out.q_init.iter().map(to_f64).collect();
    let phi = out.phi(0.0, 0);
    let mut jac = DMatrix::<f64>::zeros(r, r);
    for &a in out.capacitor_rows() {
        let x: f64 = (0..total)
            .map(|i| to_f64(&out.n[(a, i)]) * qb[i])
            .sum::<f64>()
            + to_f64(&out.kappa[a])
            + (0..nb)
                .map(|k| to_f64(&out.forcing[(a, k)]) * phi[k])
                .sum::<f64>();
        let dv = out.devices[a].law(x, 1);
        for k in 0..r {
            for l in 0..r {
                jac[(k, l)] += to_f64(&out.n[(a, dof + k)]) * dv * to_f64(&out.n[(a, dof + l)]);
            }
        }
    }
    let rank = jac.rank(1e-12 * jac.amax().max(1e-300));
    if rank < r {
        return Err(ReduceError::JacobianRankDeficient { rank, needed: r });
    }
    out.full_coordinates(0.0, &qb[..dof])?;
    out.capacitor_loops.clear();
    let coordinates: Vec<usize> = (dof..total).collect();
    let eliminated = labels
        .into_iter()
        .map(|l| Elimination {
            loop_branches: l,
            kind: LoopKind::CapacitorLoop,
            method: Method::ImplicitFunction {
                coordinates: coordinates.clone(),
            },
        })
        .collect();
    Ok(ReducedSystem {
        inner: out,
        eliminated,
    })
}

/// Integrates each linear inductor-only loop to an affine constraint and eliminates a coordinate.
pub fn reduce_inductor_loops_linear(
    sys: ReducedSystem,
    t0: f64,
    q0: &[f64],
    qd0: &[f64],
) -> Result<ReducedSystem, ReduceError> {
    let ReducedSystem {
        inner: mut out,
        mut eliminated,
    } = sys;
    if out.mix.is_some() {
        return Err(ReduceError::MixedRows);
    }
    let inductors = rows_of(&out, |k| k == DeviceKind::Inductor);
    let others = rows_of(&out, |k| {
        matches!(k, DeviceKind::Capacitor | DeviceKind::VoltageSource)
    });
    let mut q: Vec<Rational> = q0.iter().map(|x| from_f64(*x)).collect();
    let mut qd: Vec<Rational> = qd0.iter().map(|x| from_f64(*x)).collect();
    loop {
        let kernel = kernel_of_rows(&out, &others);
        if kernel.cols() == 0 {
            break;
        }
        let y = kernel.col(0);
        let label = describe(&out, &y);
        let mut full = y.clone();
        full.resize(out.coordinate_count(), Rational::zero());
        let w = out.n.mul_vec(&full);
        if inductors
            .iter()
            .any(|&a| !w[a].is_zero() && !out.devices[a].is_linear())
        {
            return Err(ReduceError::NonlinearInductorLoop(label));
        }
        let f = first_unit(&y);
        // Coordinates of the state in the transformed frame.
        let mut t = RatMatrix::identity(out.dof);
        for (i, v) in y.iter().enumerate() {
            t[(i, f)] = v.clone();
        }
        let t_inv = t.inverse().expect("unit diagonal");
        q = t_inv.mul_vec(&q);
        qd = t_inv.mul_vec(&qd);
        axis_transform(&mut out, &y, f);
        let ramp = ensure_ramp(&mut out);
        let total = out.coordinate_count();
        let nb = out.basis.len();
        // sum_a w_a L_a (N^a q + f^a(t)) = c1 t + c2
        let mut c = vec![Rational::zero(); total];
        let mut ct = vec![Rational::zero(); nb];
        for &a in &inductors {
            if w[a].is_zero() {
                continue;
            }
            let coef = &w[a]
                * out.devices[a]
                    .linear_coefficient()
                    .expect("linear inductor");
            for i in 0..total {
                c[i] += &coef * &out.n[(a, i)];
            }
            for k in 0..nb {
                ct[k] += &coef * &out.forcing[(a, k)];
            }
        }
        let phi0: Vec<Rational> = out.basis.eval(t0, 0).iter().map(|x| from_f64(*x)).collect();
        let phi1: Vec<Rational> = out.basis.eval(t0, 1).iter().map(|x| from_f64(*x)).collect();
        let dot = |a: &[Rational], b: &[Rational]| crate::exact::dot(a, b);
        let c1 = dot(&c[..out.dof], &qd) + dot(&ct, &phi1);
        let value = dot(&c[..out.dof], &q) + dot(&ct, &phi0);
        let c2 = &value - &c1 * from_f64(t0);
        // Move c1 t + c2 to the left: constant -c2, ramp coefficient -c1.
        let mut ct_full = ct.clone();
        ct_full[ramp] -= &c1;
        let p =
            pick_pivot(&c[..out.dof]).ok_or_else(|| ReduceError::DegeneratePivot(label.clone()))?;
        let coefficients = c.iter().map(fmt_rational).collect();
        q.remove(p);
        qd.remove(p);
        eliminate(&mut out, &c, &-c2.clone(), &ct_full, p);
        eliminated.push(Elimination {
            loop_branches: label,
            kind: LoopKind::InductorLoop,
            method: Method::IntegratedConstraint {
                pivot: p,
                coefficients,
                c1: to_f64(&c1),
                c2: to_f64(&c2),
            },
        });
    }
    out.inductor_loops.clear();
    Ok(ReducedSystem {
        inner: out,
        eliminated,
    })
}

/// Sum_a w_a Lcal_a(eta_a), constant along solutions.
#[derive(Clone, Debug)]
pub struct ConservedQuantity {
    pub description: String,
    /// (branch, weight, N row over visible coordinates, forcing row)
    terms: Vec<(usize, f64, Vec<f64>, Vec<f64>)>,
    devices: Vec<crate::netlist::DeviceModel>,
    basis: crate::functions::TimeBasis,
    pub reference: f64,
}

impl ConservedQuantity {
    pub fn eval(&self, t: f64, qd: &[f64]) -> f64 {
        let phi1 = self.basis.eval(t, 1);
        self.terms
            .iter()
            .map(|(a, w, n, f)| {
                let eta: f64 = n.iter().zip(qd).map(|(x, y)| x * y).sum::<f64>()
                    + f.iter().zip(&phi1).map(|(x, y)| x * y).sum::<f64>();
                w * self.devices[*a].law_antiderivative(eta)
            })
            .sum()
    }
}

/// One quantity per independent inductor-only loop; reference taken at (t0, qd0).
pub fn conserved_quantities(sys: &BirkhoffSystem, t0: f64, qd0: &[f64]) -> Vec<ConservedQuantity> {
    let inductors = rows_of(sys, |k| k == DeviceKind::Inductor);
    let others = rows_of(sys, |k| {
        matches!(k, DeviceKind::Capacitor | DeviceKind::VoltageSource)
    });
    let kernel = kernel_of_rows(sys, &others);
    let mut out = Vec::new();
    for k in 0..kernel.cols() {
        let mut y = kernel.col(k);
        y.resize(sys.coordinate_count(), Rational::zero());
        let w = sys.n.mul_vec(&y);
        let terms: Vec<_> = inductors
            .iter()
            .filter(|&&a| !w[a].is_zero())
            .map(|&a| {
                let n = (0..sys.dof).map(|j| to_f64(&sys.n[(a, j)])).collect();
                let f = (0..sys.basis.len())
                    .map(|j| to_f64(&sys.forcing[(a, j)]))
                    .collect();
                (a, to_f64(&w[a]), n, f)
            })
            .collect();
        if terms.is_empty() {
            continue;
        }
        let mut cq = ConservedQuantity {
            description: describe(sys, &y),
            terms,
            devices: sys.devices.clone(),
            basis: sys.basis.clone(),
            reference: 0.0,
        };
        cq.reference = cq.eval(t0, qd0);
        out.push(cq);
    }
    out
}
