//! Time integration of the mass-matrix form F qdd = -(G + V + W).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::birkhoff::{BirkhoffSystem, EnergyFunction, EvalError};
use crate::netlist::{Circuit, DeviceKind, DeviceModel};
use crate::reduce::ConservedQuantity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub t0: f64,
    pub t1: f64,
    /// Fixed step for RK4, initial step for RK45.
    pub dt: f64,
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub record_every: usize,
}

impl SimConfig {
    pub fn rk4(t0: f64, t1: f64, dt: f64) -> Self {
        SimConfig {
            t0,
            t1,
            dt,
            method: Method::Rk4,
            rtol: 1e-9,
            atol: 1e-12,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(self.t1 > self.t0) {
            return bad("t1 must exceed t0");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("oracle requires linear devices; {0} is nonlinear")]
    NonlinearDevicePresent(String),
    #[error("oracle state-space model is singular")]
    OracleSingular,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub branch_names: Vec<String>,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub qd: Vec<Vec<f64>>,
    /// Empty when no energy function was supplied.
    pub energy: Vec<f64>,
    /// dE/dt - partial_t E; empty without energy.
    pub balance_residual: Vec<f64>,
    pub conserved_names: Vec<String>,
    /// One row per sample, one column per conserved quantity.
    pub conserved: Vec<Vec<f64>>,
    pub currents: Vec<Vec<f64>>,
    pub voltages: Vec<Vec<f64>>,
    pub max_kcl_residual: f64,
    /// Set when the run stopped early.
    pub error: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// max |E(t) - E(t0)| / max(|E(t0)|, 1).
    pub fn energy_drift(&self) -> Option<f64> {
        let e0 = *self.energy.first()?;
        Some(
            self.energy
                .iter()
                .map(|e| (e - e0).abs())
                .fold(0.0, f64::max)
                / e0.abs().max(1.0),
        )
    }

    pub fn max_balance_residual(&self) -> Option<f64> {
        if self.balance_residual.is_empty() {
            return None;
        }
        Some(
            self.balance_residual
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max),
        )
    }

    /// Relative drift of each conserved quantity from its reference.
    pub fn conserved_drift(&self, quantities: &[ConservedQuantity]) -> Vec<f64> {
        quantities
            .iter()
            .enumerate()
            .map(|(k, cq)| {
                let scale = cq.reference.abs().max(1.0);
                self.conserved
                    .iter()
                    .map(|row| (row[k] - cq.reference).abs())
                    .fold(0.0, f64::max)
                    / scale
            })
            .collect()
    }
}

/// Smallest linearized period 2 pi / sqrt(max |eig(F^-1 dG/dq)|) at (t0, q0, qd0).
pub fn min_period(sys: &BirkhoffSystem, t0: f64, q0: &[f64], qd0: &[f64]) -> Option<f64> {
    let m = sys.dof();
    if m == 0 {
        return None;
    }
    let f = sys.mass(t0, qd0);
    let mut k = DMatrix::zeros(m, m);
    for l in 0..m {
        let h = 1e-6 * q0[l].abs().max(1.0);
        let (mut p, mut n) = (q0.to_vec(), q0.to_vec());
        p[l] += h;
        n[l] -= h;
        let gp = sys.forces(t0, &p, qd0).ok()?.g;
        let gn = sys.forces(t0, &n, qd0).ok()?.g;
        k.set_column(l, &((gp - gn) / (2.0 * h)));
    }
    let a = f.lu().solve(&k)?;
    let lam = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if lam > 0.0 {
        Some(2.0 * PI / lam.sqrt())
    } else {
        None
    }
}

/// 1/1000 of the smallest linearized period, or of the time span when there is none.
pub fn default_dt(sys: &BirkhoffSystem, t0: f64, t1: f64, q0: &[f64], qd0: &[f64]) -> f64 {
    min_period(sys, t0, q0, qd0).unwrap_or(t1 - t0) / 1000.0
}

type State = (DVector<f64>, DVector<f64>);

fn deriv(sys: &BirkhoffSystem, t: f64, s: &State) -> Result<State, EvalError> {
    let a = sys.accel(t, s.0.as_slice(), s.1.as_slice())?;
    Ok((s.1.clone(), a))
}

fn axpy(s: &State, h: f64, k: &State) -> State {
    (&s.0 + &k.0 * h, &s.1 + &k.1 * h)
}

fn rk4_step(sys: &BirkhoffSystem, t: f64, s: &State, h: f64) -> Result<State, EvalError> {
    let k1 = deriv(sys, t, s)?;
    let k2 = deriv(sys, t + h / 2.0, &axpy(s, h / 2.0, &k1))?;
    let k3 = deriv(sys, t + h / 2.0, &axpy(s, h / 2.0, &k2))?;
    let k4 = deriv(sys, t + h, &axpy(s, h, &k3))?;
    Ok((
        &s.0 + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0),
        &s.1 + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (h / 6.0),
    ))
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dp_error_norm(s: &State, y: &State, err: &State, rtol: f64, atol: f64) -> f64 {
    let pairs = [(&s.0, &y.0, &err.0), (&s.1, &y.1, &err.1)];
    let mut acc = 0.0;
    let mut n = 0usize;
    for (a, b, e) in pairs {
        for i in 0..e.len() {
            let sc = atol + rtol * a[i].abs().max(b[i].abs());
            acc += (e[i] / sc).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64).sqrt()
    }
}

fn dp_step(
    sys: &BirkhoffSystem,
    t: f64,
    s: &State,
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<(State, f64), EvalError> {
    let mut k: Vec<State> = Vec::with_capacity(7);
    for i in 0..7 {
        let mut y = s.clone();
        for (j, kj) in k.iter().enumerate() {
            if DP_A[i][j] != 0.0 {
                y = axpy(&y, h * DP_A[i][j], kj);
            }
        }
        k.push(deriv(sys, t + DP_C[i] * h, &y)?);
    }
    let mut y = s.clone();
    let mut err = (DVector::zeros(s.0.len()), DVector::zeros(s.1.len()));
    for i in 0..7 {
        y = axpy(&y, h * DP_B[i], &k[i]);
        err = axpy(&err, h * DP_E[i], &k[i]);
    }
    let norm = dp_error_norm(s, &y, &err, rtol, atol);
    Ok((y, norm))
}

/// Integrates from (q0, qd0) and records the monitored quantities.
pub fn simulate(
    sys: &BirkhoffSystem,
    q0: &[f64],
    qd0: &[f64],
    cfg: &SimConfig,
    energy: Option<&EnergyFunction>,
    conserved: &[ConservedQuantity],
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let mut raw_t = vec![cfg.t0];
    let mut raw_s: Vec<State> = vec![(
        DVector::from_column_slice(q0),
        DVector::from_column_slice(qd0),
    )];
    // Fail early if the initial point is not solvable.
    deriv(sys, cfg.t0, &raw_s[0])?;
    let mut error = None;
    let span = cfg.t1 - cfg.t0;
    match cfg.method {
        Method::Rk4 => {
            let steps = ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
            let mut s = raw_s[0].clone();
            for k in 0..steps {
                let t = cfg.t0 + k as f64 * cfg.dt;
                let t_next = if k + 1 == steps {
                    cfg.t1
                } else {
                    cfg.t0 + (k + 1) as f64 * cfg.dt
                };
                match rk4_step(sys, t, &s, t_next - t) {
                    Ok(n) => s = n,
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
                if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
                    raw_t.push(t_next);
                    raw_s.push(s.clone());
                }
            }
        }
        Method::Rk45 => {
            let mut t = cfg.t0;
            let mut h = cfg.dt.min(span);
            let mut s = raw_s[0].clone();
            let mut accepted = 0usize;
            while t < cfg.t1 {
                if t + h > cfg.t1 {
                    h = cfg.t1 - t;
                }
                match dp_step(sys, t, &s, h, cfg.rtol, cfg.atol) {
                    Ok((y, norm)) => {
                        if norm <= 1.0 {
                            t = if t + h >= cfg.t1 { cfg.t1 } else { t + h };
                            s = y;
                            accepted += 1;
                            if accepted % cfg.record_every == 0 || t >= cfg.t1 {
                                raw_t.push(t);
                                raw_s.push(s.clone());
                            }
                        }
                        let factor = if norm == 0.0 {
                            5.0
                        } else {
                            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        h *= factor;
                        if h < 1e-14 * span {
                            error = Some(format!("step size underflow at t={}", t));
                            break;
                        }
                    }
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
        }
    }
    record(sys, cfg, raw_t, raw_s, energy, conserved, error)
}

fn record(
    sys: &BirkhoffSystem,
    cfg: &SimConfig,
    times: Vec<f64>,
    states: Vec<State>,
    energy: Option<&EnergyFunction>,
    conserved: &[ConservedQuantity],
    mut error: Option<String>,
) -> Result<Trajectory, SimError> {
    let mut traj = Trajectory {
        config: cfg.clone(),
        branch_names: sys.branch_names().to_vec(),
        times: Vec::with_capacity(times.len()),
        q: Vec::new(),
        qd: Vec::new(),
        energy: Vec::new(),
        balance_residual: Vec::new(),
        conserved_names: conserved.iter().map(|c| c.description.clone()).collect(),
        conserved: Vec::new(),
        currents: Vec::new(),
        voltages: Vec::new(),
        max_kcl_residual: 0.0,
        error: None,
    };
    let mut partials = Vec::new();
    for (t, s) in times.iter().zip(&states) {
        let (q, qd) = (s.0.as_slice(), s.1.as_slice());
        let sample = (|| -> Result<_, EvalError> {
            let qdd = sys.accel(*t, q, qd)?;
            let bs = sys.branch_state(*t, q, qd, qdd.as_slice())?;
            let e = match energy {
                Some(e) => Some((e.eval(*t, q, qd)?, e.partial_t(*t, q, qd)?)),
                None => None,
            };
            Ok((bs, e))
        })();
        let (bs, e) = match sample {
            Ok(x) => x,
            Err(err) => {
                error.get_or_insert_with(|| err.to_string());
                break;
            }
        };
        traj.max_kcl_residual = traj.max_kcl_residual.max(sys.kcl_residual(&bs.currents));
        traj.times.push(*t);
        traj.q.push(q.to_vec());
        traj.qd.push(qd.to_vec());
        traj.currents.push(bs.currents.iter().copied().collect());
        traj.voltages.push(bs.voltages.iter().copied().collect());
        traj.conserved
            .push(conserved.iter().map(|c| c.eval(*t, qd)).collect());
        if let Some((e, p)) = e {
            traj.energy.push(e);
            partials.push(p);
        }
    }
    if !traj.energy.is_empty() {
        let de = five_point_derivative(&traj.times, &traj.energy);
        traj.balance_residual = de.iter().zip(&partials).map(|(d, p)| d - p).collect();
    }
    traj.error = error;
    Ok(traj)
}

/// Derivative at each node from the Lagrange polynomial through the five nearest samples.
pub fn five_point_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let w = n.min(5);
    (0..n)
        .map(|k| {
            let start = k.saturating_sub(w / 2).min(n - w);
            let nodes = &t[start..start + w];
            let x = t[k];
            let mut d = 0.0;
            for i in 0..w {
                // l_i'(x) = l_i(x) sum_{j != i} 1/(x - x_j), evaluated without division by zero.
                let mut deriv = 0.0;
                for j in 0..w {
                    if j == i {
                        continue;
                    }
                    let mut term = 1.0 / (nodes[i] - nodes[j]);
                    for m in 0..w {
                        if m != i && m != j {
                            term *= (x - nodes[m]) / (nodes[i] - nodes[m]);
                        }
                    }
                    deriv += term;
                }
                d += deriv * y[start + i];
            }
            d
        })
        .collect()
}

/// Linear state-space model over capacitor charges and inductor currents, built
/// from B and A directly. Capacitor loops and inductor cutsets are handled by
/// differentiating the algebraic constraints once.
pub struct StateSpaceOracle {
    caps: Vec<usize>,
    inds: Vec<usize>,
    vsrc: Vec<usize>,
    isrc: Vec<usize>,
    devices: Vec<DeviceModel>,
    /// Solves [sdot; z] = lhs^-1 (p s + input(t)).
    lhs_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    p: DMatrix<f64>,
    /// Input rows, columns are [i_s, e, di_s/dt, de/dt].
    u: DMatrix<f64>,
}

impl StateSpaceOracle {
    pub fn new(c: &Circuit) -> Result<Self, SimError> {
        for br in &c.branches {
            if !br.device.is_linear() {
                return Err(SimError::NonlinearDevicePresent(br.name.clone()));
            }
        }
        let bmat = crate::graph::build_incidence(c)
            .entries
            .to_rational()
            .to_f64();
        let amat = crate::graph::build_loop_basis(c)
            .map_err(|_| SimError::OracleSingular)?
            .entries
            .to_rational()
            .to_f64();
        let caps = c.indices_of(DeviceKind::Capacitor);
        let inds = c.indices_of(DeviceKind::Inductor);
        let vsrc = c.indices_of(DeviceKind::VoltageSource);
        let isrc = c.indices_of(DeviceKind::CurrentSource);
        let (np, nk, nv, ni) = (caps.len(), inds.len(), vsrc.len(), isrc.len());
        let ns = np + nk;
        let nu = nv + ni;
        let (nn, nm) = (bmat.ncols(), amat.ncols());
        let coef = |a: usize| {
            crate::exact::to_f64(&c.branches[a].device.linear_coefficient().expect("linear"))
        };
        // Unknowns w = [qdot_C, idot_L, i_V, v_I]; rows KCL then KVL.
        let rows = nn + nm;
        let mut m = DMatrix::zeros(rows, ns + nu);
        let mut p = DMatrix::zeros(rows, ns);
        let mut u = DMatrix::zeros(rows, 2 * (ni + nv));
        for node in 0..nn {
            for (k, &a) in caps.iter().enumerate() {
                m[(node, k)] = bmat[(a, node)];
            }
            for (k, &a) in vsrc.iter().enumerate() {
                m[(node, ns + k)] = bmat[(a, node)];
            }
            for (k, &a) in inds.iter().enumerate() {
                p[(node, np + k)] = -bmat[(a, node)];
            }
            for (k, &a) in isrc.iter().enumerate() {
                u[(node, k)] = -bmat[(a, node)];
            }
        }
        for l in 0..nm {
            let r = nn + l;
            for (k, &a) in inds.iter().enumerate() {
                m[(r, np + k)] = amat[(a, l)] * coef(a);
            }
            for (k, &a) in isrc.iter().enumerate() {
                m[(r, ns + nv + k)] = amat[(a, l)];
            }
            for (k, &a) in caps.iter().enumerate() {
                p[(r, k)] = -amat[(a, l)] * coef(a);
            }
            for (k, &a) in vsrc.iter().enumerate() {
                u[(r, ni + k)] = -amat[(a, l)];
            }
        }
        // Split into range and left-null parts of M.
        let svd = m.clone().svd(true, false);
        let umat = svd.u.expect("left vectors");
        let smax = svd.singular_values.amax().max(1.0);
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax)
            .count();
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
            idx.sort_by(|&a, &b| {
                svd.singular_values[b]
                    .partial_cmp(&svd.singular_values[a])
                    .unwrap()
            });
            idx
        };
        // Full left basis: columns of U (thin SVD has min(rows, cols) columns) plus an orthogonal complement.
        let full_u = {
            let mut basis: Vec<DVector<f64>> =
                order.iter().map(|&i| umat.column(i).into_owned()).collect();
            for e in 0..rows {
                if basis.len() >= rows {
                    break;
                }
                let mut v = DVector::zeros(rows);
                v[e] = 1.0;
                for b in &basis {
                    let proj = b.dot(&v);
                    v -= b * proj;
                }
                if v.norm() > 1e-8 {
                    let nv = v.norm();
                    basis.push(v / nv);
                }
            }
            basis
        };
        let range: Vec<&DVector<f64>> = full_u[..rank].iter().collect();
        let null: Vec<&DVector<f64>> = full_u[rank..].iter().collect();
        let mut lhs = DMatrix::zeros(rank + null.len(), ns + nu);
        let mut p2 = DMatrix::zeros(rank + null.len(), ns);
        let mut u2 = DMatrix::zeros(rank + null.len(), 2 * (ni + nv));
        for (r, y) in range.iter().enumerate() {
            lhs.set_row(r, &(y.transpose() * &m));
            p2.set_row(r, &(y.transpose() * &p));
            u2.set_row(r, &(y.transpose() * &u));
        }
        // y^T (p s + u(t)) = 0  =>  y^T p sdot = -y^T u'(t).
        let half = ni + nv;
        for (r, y) in null.iter().enumerate() {
            let row = rank + r;
            let yp = y.transpose() * &p;
            for j in 0..ns {
                lhs[(row, j)] = yp[j];
            }
            let yu = y.transpose() * &u;
            for j in 0..half {
                u2[(row, half + j)] = -yu[j];
            }
        }
        if lhs.nrows() != lhs.ncols() {
            return Err(SimError::OracleSingular);
        }
        let lu = lhs.clone().lu();
        let det = lu.determinant();
        let scale = lhs.amax().max(1.0);
        if !(det.abs() > 1e-12 * scale.powi(lhs.nrows() as i32)) {
            return Err(SimError::OracleSingular);
        }
        Ok(StateSpaceOracle {
            caps,
            inds,
            vsrc,
            isrc,
            devices: c.branches.iter().map(|b| b.device.clone()).collect(),
            lhs_lu: lu,
            p: p2,
            u: u2,
        })
    }

    fn input(&self, t: f64) -> DVector<f64> {
        let mut v = Vec::new();
        for &a in &self.isrc {
            v.push(self.devices[a].source().unwrap().value(t));
        }
        for &a in &self.vsrc {
            v.push(self.devices[a].source().unwrap().value(t));
        }
        for &a in &self.isrc {
            v.push(self.devices[a].source().unwrap().derivative(t, 1));
        }
        for &a in &self.vsrc {
            v.push(self.devices[a].source().unwrap().derivative(t, 1));
        }
        DVector::from_vec(v)
    }

    fn solve(&self, t: f64, s: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.p * s + &self.u * self.input(t);
        self.lhs_lu.solve(&rhs).expect("checked nonsingular")
    }

    /// State [q_C, i_L] from branch charges and currents.
    pub fn state_from(&self, charges: &[f64], currents: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.caps.len() + self.inds.len(),
            self.caps
                .iter()
                .map(|&a| charges[a])
                .chain(self.inds.iter().map(|&a| currents[a])),
        )
    }

    /// Branch currents and voltages at (t, s).
    pub fn branch_quantities(&self, t: f64, s: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let w = self.solve(t, s);
        let b = self.devices.len();
        let (np, nk, nv) = (self.caps.len(), self.inds.len(), self.vsrc.len());
        let mut i = vec![0.0; b];
        let mut v = vec![0.0; b];
        let coef = |a: usize| crate::exact::to_f64(&self.devices[a].linear_coefficient().unwrap());
        for (k, &a) in self.caps.iter().enumerate() {
            i[a] = w[k];
            v[a] = s[k] * coef(a);
        }
        for (k, &a) in self.inds.iter().enumerate() {
            i[a] = s[np + k];
            v[a] = coef(a) * w[np + k];
        }
        for (k, &a) in self.vsrc.iter().enumerate() {
            i[a] = w[np + nk + k];
            v[a] = self.devices[a].source().unwrap().value(t);
        }
        for (k, &a) in self.isrc.iter().enumerate() {
            i[a] = self.devices[a].source().unwrap().value(t);
            v[a] = w[np + nk + nv + k];
        }
        (i, v)
    }

    fn rhs(&self, t: f64, s: &DVector<f64>) -> DVector<f64> {
        self.solve(t, s).rows(0, s.len()).into_owned()
    }

    pub fn step(&self, t: f64, s: &DVector<f64>, h: f64) -> DVector<f64> {
        let k1 = self.rhs(t, s);
        let k2 = self.rhs(t + h / 2.0, &(s + &k1 * (h / 2.0)));
        let k3 = self.rhs(t + h / 2.0, &(s + &k2 * (h / 2.0)));
        let k4 = self.rhs(t + h, &(s + &k3 * h));
        s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Max relative deviation of the trajectory's branch currents and voltages from
/// an independent RK4 integration of the state-space model started from the
/// same physical state. Each quantity is scaled by its largest magnitude over the run.
pub fn compare_oracle(
    c: &Circuit,
    sys: &BirkhoffSystem,
    traj: &Trajectory,
) -> Result<f64, SimError> {
    let oracle = StateSpaceOracle::new(c)?;
    if traj.is_empty() {
        return Ok(0.0);
    }
    let t0 = traj.times[0];
    let qdd0 = sys.accel(t0, &traj.q[0], &traj.qd[0])?;
    let bs = sys.branch_state(t0, &traj.q[0], &traj.qd[0], qdd0.as_slice())?;
    let charges: Vec<f64> = bs.charges.iter().copied().collect();
    let mut s = oracle.state_from(&charges, &traj.currents[0]);
    let b = traj.branch_names.len();
    let mut scale_i = vec![0.0f64; b];
    let mut scale_v = vec![0.0f64; b];
    for k in 0..traj.len() {
        for a in 0..b {
            scale_i[a] = scale_i[a].max(traj.currents[k][a].abs());
            scale_v[a] = scale_v[a].max(traj.voltages[k][a].abs());
        }
    }
    let floor_i = scale_i.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let floor_v = scale_v.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let dt = traj.config.dt;
    let mut worst = 0.0f64;
    let mut t = t0;
    for k in 0..traj.len() {
        let target = traj.times[k];
        let span = target - t;
        if span > 0.0 {
            let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for j in 0..n {
                s = oracle.step(t + j as f64 * h, &s, h);
            }
            t = target;
        }
        let (i, v) = oracle.branch_quantities(t, &s);
        for a in 0..b {
            let si = scale_i[a].max(1e-6 * floor_i);
            let sv = scale_v[a].max(1e-6 * floor_v);
            worst = worst.max((i[a] - traj.currents[k][a]).abs() / si);
            worst = worst.max((v[a] - traj.voltages[k][a]).abs() / sv);
        }
    }
    Ok(worst)
}
