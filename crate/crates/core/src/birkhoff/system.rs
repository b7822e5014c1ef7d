use std::collections::BTreeMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num::Zero;

use crate::config::ConfigSpace;
use crate::exact::{to_f64, RatMatrix, Rational};
use crate::functions::TimeBasis;
use crate::graph::{build_incidence, build_loop_basis, classify_loops};
use crate::netlist::{Circuit, DeviceKind, DeviceModel};

/// Singularity threshold relative to ||F||_inf^m.
pub const DET_TOLERANCE: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("singular mass matrix at t={t}: det={det:e}, qdot={qd:?}")]
    SingularMassMatrix { t: f64, qd: Vec<f64>, det: f64 },
    #[error("implicit solve failed at t={t}, q={q:?}: residual {residual:e}")]
    ImplicitSolveFailure { t: f64, q: Vec<f64>, residual: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AssembleError {
    #[error("missing device: {0}")]
    MissingDevice(String),
    #[error("inconsistent initial inductor currents: {0}")]
    InconsistentInitialCurrents(String),
}

/// Maps coordinates of this system back to the coordinates it was built from:
/// q_orig = m q_base + m0 + mt phi(t).
#[derive(Clone, Debug, PartialEq)]
pub struct Lift {
    pub m: RatMatrix,
    pub m0: Vec<Rational>,
    pub mt: RatMatrix,
}

impl Lift {
    fn identity(d: usize, nb: usize) -> Self {
        Lift {
            m: RatMatrix::identity(d),
            m0: vec![Rational::zero(); d],
            mt: RatMatrix::zeros(d, nb),
        }
    }
}

/// Newton settings and warm start for coordinates fixed by capacitor constraints.
#[derive(Debug)]
pub(crate) struct ImplicitBlock {
    pub count: usize,
    warm: Mutex<Vec<f64>>,
}

impl Clone for ImplicitBlock {
    fn clone(&self) -> Self {
        ImplicitBlock {
            count: self.count,
            warm: Mutex::new(self.warm.lock().unwrap().clone()),
        }
    }
}

impl ImplicitBlock {
    pub(crate) fn new(count: usize, start: Vec<f64>) -> Self {
        ImplicitBlock {
            count,
            warm: Mutex::new(start),
        }
    }
}

#[derive(Clone, Debug)]
struct Numeric {
    n: DMatrix<f64>,
    kappa: DVector<f64>,
    forcing: DMatrix<f64>,
    vmat: DMatrix<f64>,
    mix: Option<DMatrix<f64>>,
    inductors: Vec<usize>,
    capacitors: Vec<usize>,
}

/// Q = F(t,qd) qdd + G(t,q) + V(t) + W(t,qd), optionally row-mixed.
///
/// Coordinates past `dof` are implicit: they are solved from their own rows
/// of G + V = 0 by Newton and never appear in the mass matrix.
#[derive(Clone, Debug)]
pub struct BirkhoffSystem {
    pub(crate) names: Vec<String>,
    pub(crate) devices: Vec<DeviceModel>,
    pub(crate) incidence: DMatrix<f64>,
    pub(crate) dof: usize,
    pub(crate) n: RatMatrix,
    pub(crate) kappa: Vec<Rational>,
    pub(crate) forcing: RatMatrix,
    pub(crate) basis: TimeBasis,
    pub(crate) vmat: RatMatrix,
    pub(crate) mix: Option<RatMatrix>,
    pub(crate) q_init: Vec<Rational>,
    pub(crate) inductor_init: BTreeMap<usize, Rational>,
    pub(crate) lift: Lift,
    pub(crate) implicit: Option<ImplicitBlock>,
    pub(crate) source_voltage_loops: Vec<(usize, Vec<(usize, f64)>)>,
    pub(crate) capacitor_loops: Vec<String>,
    pub(crate) inductor_loops: Vec<String>,
    num: Numeric,
}

/// Force terms at a point, already row-mixed.
#[derive(Clone, Debug)]
pub struct Forces {
    pub g: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

impl Forces {
    pub fn total(&self) -> DVector<f64> {
        &self.g + &self.v + &self.w
    }
}

/// Branch charges, currents and voltages at one instant.
#[derive(Clone, Debug)]
pub struct BranchState {
    pub charges: DVector<f64>,
    pub currents: DVector<f64>,
    pub voltages: DVector<f64>,
}

pub fn assemble(cfg: &ConfigSpace, c: &Circuit) -> Result<BirkhoffSystem, AssembleError> {
    build(cfg, c, None)
}

/// Diagnostic assembly with rows A^T v instead of N^T v.
pub fn assemble_raw_at(cfg: &ConfigSpace, c: &Circuit) -> Result<BirkhoffSystem, AssembleError> {
    let inv = cfg
        .c_transform
        .inverse()
        .ok_or_else(|| AssembleError::MissingDevice("singular loop transform".into()))?;
    build(cfg, c, Some(inv))
}

fn build(
    cfg: &ConfigSpace,
    c: &Circuit,
    mix: Option<RatMatrix>,
) -> Result<BirkhoffSystem, AssembleError> {
    if cfg.n.rows() != c.b() {
        return Err(AssembleError::MissingDevice(format!(
            "configuration has {} branch rows, circuit has {} devices",
            cfg.n.rows(),
            c.b()
        )));
    }
    let b = build_incidence(c);
    let a = build_loop_basis(c).map_err(|e| AssembleError::MissingDevice(e.to_string()))?;
    let cls = classify_loops(c, &a, &b);
    let am = a.entries.to_rational();
    let isrc = c.indices_of(DeviceKind::CurrentSource);
    let mut source_voltage_loops = Vec::new();
    if !isrc.is_empty() {
        let ai = am.select_rows(&isrc);
        let y = ai
            .solve(&RatMatrix::identity(isrc.len()))
            .expect("current sources form no cutset");
        let loops = am.mul(&y);
        for (k, &s) in isrc.iter().enumerate() {
            let terms = (0..c.b())
                .filter(|&j| c.kind(j) != DeviceKind::CurrentSource && !loops[(j, k)].is_zero())
                .map(|j| (j, to_f64(&loops[(j, k)])))
                .collect();
            source_voltage_loops.push((s, terms));
        }
    }
    let d = cfg.dof();
    let nb = cfg.basis.len();
    let mut sys = BirkhoffSystem {
        names: c.branches.iter().map(|x| x.name.clone()).collect(),
        devices: c.branches.iter().map(|x| x.device.clone()).collect(),
        incidence: b.entries.to_rational().to_f64(),
        dof: d,
        n: cfg.n.clone(),
        kappa: cfg.kappa.clone(),
        forcing: cfg.forcing.clone(),
        basis: cfg.basis.clone(),
        vmat: cfg.v_matrix.clone(),
        mix,
        q_init: cfg.q0.clone(),
        inductor_init: c
            .initial
            .iter()
            .filter(|(i, _)| c.kind(**i) == DeviceKind::Inductor)
            .map(|(i, v)| (*i, v.clone()))
            .collect(),
        lift: Lift::identity(d, nb),
        implicit: None,
        source_voltage_loops,
        capacitor_loops: cls
            .capacitor_only_loops
            .iter()
            .map(|&j| a.names[j].clone())
            .collect(),
        inductor_loops: cls
            .inductor_only_loops
            .iter()
            .map(|&j| a.names[j].clone())
            .collect(),
        num: Numeric {
            n: DMatrix::zeros(0, 0),
            kappa: DVector::zeros(0),
            forcing: DMatrix::zeros(0, 0),
            vmat: DMatrix::zeros(0, 0),
            mix: None,
            inductors: Vec::new(),
            capacitors: Vec::new(),
        },
    };
    sys.refresh();
    Ok(sys)
}

impl BirkhoffSystem {
    /// Recomputes float caches after the exact data changed.
    pub(crate) fn refresh(&mut self) {
        let kinds: Vec<DeviceKind> = self.devices.iter().map(|d| d.kind()).collect();
        let active = |i: usize| !self.n.row_is_zero(i) || !self.forcing.row_is_zero(i);
        self.num = Numeric {
            n: self.n.to_f64(),
            kappa: DVector::from_iterator(self.kappa.len(), self.kappa.iter().map(to_f64)),
            forcing: self.forcing.to_f64(),
            vmat: self.vmat.to_f64(),
            mix: self.mix.as_ref().map(|m| m.to_f64()),
            inductors: (0..kinds.len())
                .filter(|&i| kinds[i] == DeviceKind::Inductor && active(i))
                .collect(),
            capacitors: (0..kinds.len())
                .filter(|&i| kinds[i] == DeviceKind::Capacitor && active(i))
                .collect(),
        };
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Visible plus implicit coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.n.cols()
    }

    pub fn implicit_count(&self) -> usize {
        self.implicit.as_ref().map_or(0, |b| b.count)
    }

    pub fn basis(&self) -> &TimeBasis {
        &self.basis
    }

    pub fn branch_names(&self) -> &[String] {
        &self.names
    }

    pub fn devices(&self) -> &[DeviceModel] {
        &self.devices
    }

    pub fn n_matrix(&self) -> &RatMatrix {
        &self.n
    }

    pub fn kappa(&self) -> &[Rational] {
        &self.kappa
    }

    pub fn forcing(&self) -> &RatMatrix {
        &self.forcing
    }

    pub fn v_matrix(&self) -> &RatMatrix {
        &self.vmat
    }

    pub fn mix(&self) -> Option<&RatMatrix> {
        self.mix.as_ref()
    }

    pub fn lift(&self) -> &Lift {
        &self.lift
    }

    pub fn capacitor_loop_names(&self) -> &[String] {
        &self.capacitor_loops
    }

    pub fn is_autonomous(&self) -> bool {
        self.basis.is_empty() || (self.forcing.is_zero() && self.vmat.is_zero())
    }

    /// All inductors and capacitors that touch the coordinates are linear.
    pub fn all_linear(&self) -> bool {
        self.num
            .inductors
            .iter()
            .chain(&self.num.capacitors)
            .all(|&i| self.devices[i].is_linear())
    }

    pub(crate) fn inductor_rows(&self) -> &[usize] {
        &self.num.inductors
    }

    pub(crate) fn capacitor_rows(&self) -> &[usize] {
        &self.num.capacitors
    }

    pub fn phi(&self, t: f64, order: usize) -> DVector<f64> {
        DVector::from_vec(self.basis.eval(t, order))
    }

    /// Coordinates at the netlist's initial instant, visible part.
    pub fn initial_coordinates(&self) -> Vec<f64> {
        self.q_init[..self.dof].iter().map(to_f64).collect()
    }

    fn row_dot(&self, a: usize, v: &DVector<f64>) -> f64 {
        let n = &self.num.n;
        (0..v.len()).map(|j| n[(a, j)] * v[j]).sum()
    }

    fn forcing_row(&self, a: usize, phi: &DVector<f64>) -> f64 {
        let f = &self.num.forcing;
        (0..phi.len()).map(|j| f[(a, j)] * phi[j]).sum()
    }

    fn apply_mix(&self, v: DVector<f64>) -> DVector<f64> {
        match &self.num.mix {
            Some(m) => m * v,
            None => v,
        }
    }

    fn pad(&self, qd: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.coordinate_count());
        for (i, x) in qd.iter().enumerate() {
            v[i] = *x;
        }
        v
    }

    /// Inductor currents eta_a = N^a qd + df^a/dt, by branch index.
    pub fn inductor_currents(&self, t: f64, qd: &[f64]) -> Vec<(usize, f64)> {
        let qd = self.pad(qd);
        let phi1 = self.phi(t, 1);
        self.num
            .inductors
            .iter()
            .map(|&a| (a, self.row_dot(a, &qd) + self.forcing_row(a, &phi1)))
            .collect()
    }

    /// Unmixed Gram matrix sum_a L_a(eta_a) N^a N^a^T over visible coordinates.
    pub fn mass_unmixed(&self, t: f64, qd: &[f64]) -> DMatrix<f64> {
        let d = self.dof;
        let mut f = DMatrix::zeros(d, d);
        for (a, eta) in self.inductor_currents(t, qd) {
            let l = self.devices[a].law(eta, 0);
            for i in 0..d {
                let ni = self.num.n[(a, i)];
                if ni == 0.0 {
                    continue;
                }
                for j in 0..d {
                    f[(i, j)] += l * ni * self.num.n[(a, j)];
                }
            }
        }
        f
    }

    /// dQ/dqdd, including any row mixing.
    pub fn mass(&self, t: f64, qd: &[f64]) -> DMatrix<f64> {
        let f = self.mass_unmixed(t, qd);
        match &self.num.mix {
            Some(m) => m * f,
            None => f,
        }
    }

    /// Capacitor term over all coordinates at a full coordinate vector.
    fn g_full(&self, qb: &DVector<f64>, phi0: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(qb.len());
        for &a in &self.num.capacitors {
            let x = self.row_dot(a, qb) + self.num.kappa[a] + self.forcing_row(a, phi0);
            let v = self.devices[a].law(x, 0);
            for j in 0..qb.len() {
                g[j] += self.num.n[(a, j)] * v;
            }
        }
        g
    }

    fn v_full(&self, phi0: &DVector<f64>) -> DVector<f64> {
        &self.num.vmat * phi0
    }

    /// Solves the implicit coordinates; returns the full coordinate vector.
    pub fn full_coordinates(&self, t: f64, q: &[f64]) -> Result<DVector<f64>, EvalError> {
        let mut qb = self.pad(q);
        let Some(block) = &self.implicit else {
            return Ok(qb);
        };
        let d = self.dof;
        let r = block.count;
        let phi0 = self.phi(t, 0);
        let v = self.v_full(&phi0);
        let mut warm = block.warm.lock().unwrap();
        for k in 0..r {
            qb[d + k] = warm[k];
        }
        let residual = |qb: &DVector<f64>| -> (DVector<f64>, f64) {
            let g = self.g_full(qb, &phi0);
            let res = DVector::from_iterator(r, (0..r).map(|k| g[d + k] + v[d + k]));
            let scale = self
                .num
                .capacitors
                .iter()
                .map(|&a| {
                    let x = self.row_dot(a, qb) + self.num.kappa[a] + self.forcing_row(a, &phi0);
                    self.devices[a].law(x, 0).abs()
                })
                .fold(1.0, f64::max);
            (res, scale)
        };
        let (mut res, mut scale) = residual(&qb);
        let mut norm = res.amax();
        let mut iter = 0;
        while norm > NEWTON_TOL * scale {
            if iter == NEWTON_MAX_ITER {
                return Err(EvalError::ImplicitSolveFailure {
                    t,
                    q: q.to_vec(),
                    residual: norm,
                });
            }
            iter += 1;
            let mut jac = DMatrix::zeros(r, r);
            for &a in &self.num.capacitors {
                let x = self.row_dot(a, &qb) + self.num.kappa[a] + self.forcing_row(a, &phi0);
                let dv = self.devices[a].law(x, 1);
                for k in 0..r {
                    for l in 0..r {
                        jac[(k, l)] += self.num.n[(a, d + k)] * dv * self.num.n[(a, d + l)];
                    }
                }
            }
            let Some(step) = jac.lu().solve(&(-&res)) else {
                return Err(EvalError::ImplicitSolveFailure {
                    t,
                    q: q.to_vec(),
                    residual: norm,
                });
            };
            let mut alpha = 1.0;
            loop {
                let mut trial = qb.clone();
                for k in 0..r {
                    trial[d + k] += alpha * step[k];
                }
                let (tr, ts) = residual(&trial);
                if tr.amax() < norm || alpha < 1e-10 {
                    qb = trial;
                    res = tr;
                    scale = ts;
                    break;
                }
                alpha *= 0.5;
            }
            norm = res.amax();
        }
        for k in 0..r {
            warm[k] = qb[d + k];
        }
        Ok(qb)
    }

    /// Derivative of the implicit coordinates along (qd, time).
    fn implicit_velocity(&self, t: f64, qb: &DVector<f64>, qd: &[f64]) -> DVector<f64> {
        let mut qdb = self.pad(qd);
        let Some(block) = &self.implicit else {
            return qdb;
        };
        let d = self.dof;
        let r = block.count;
        let phi0 = self.phi(t, 0);
        let phi1 = self.phi(t, 1);
        let vdot = &self.num.vmat * &phi1;
        let mut jac = DMatrix::zeros(r, r);
        let mut rhs = DVector::zeros(r);
        for k in 0..r {
            rhs[k] = -vdot[d + k];
        }
        for &a in &self.num.capacitors {
            let x = self.row_dot(a, qb) + self.num.kappa[a] + self.forcing_row(a, &phi0);
            let dv = self.devices[a].law(x, 1);
            let xdot_visible = self.row_dot(a, &qdb) + self.forcing_row(a, &phi1);
            for k in 0..r {
                rhs[k] -= self.num.n[(a, d + k)] * dv * xdot_visible;
                for l in 0..r {
                    jac[(k, l)] += self.num.n[(a, d + k)] * dv * self.num.n[(a, d + l)];
                }
            }
        }
        let hd = jac
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::from_element(r, f64::NAN));
        for k in 0..r {
            qdb[d + k] = hd[k];
        }
        qdb
    }

    /// G, V and W on the visible rows, row-mixed.
    pub fn forces(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<Forces, EvalError> {
        let d = self.dof;
        let qb = self.full_coordinates(t, q)?;
        let phi0 = self.phi(t, 0);
        let phi2 = self.phi(t, 2);
        let g = self.g_full(&qb, &phi0).rows(0, d).into_owned();
        let v = self.v_full(&phi0).rows(0, d).into_owned();
        let mut w = DVector::zeros(d);
        for (a, eta) in self.inductor_currents(t, qd) {
            let fdd = self.forcing_row(a, &phi2);
            if fdd == 0.0 {
                continue;
            }
            let l = self.devices[a].law(eta, 0);
            for j in 0..d {
                w[j] += self.num.n[(a, j)] * l * fdd;
            }
        }
        Ok(Forces {
            g: self.apply_mix(g),
            v: self.apply_mix(v),
            w: self.apply_mix(w),
        })
    }

    pub fn eval_q(
        &self,
        t: f64,
        q: &[f64],
        qd: &[f64],
        qdd: &[f64],
    ) -> Result<DVector<f64>, EvalError> {
        let f = self.mass(t, qd);
        Ok(f * DVector::from_column_slice(qdd) + self.forces(t, q, qd)?.total())
    }

    /// Solves F qdd = -(G + V + W).
    pub fn accel(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<DVector<f64>, EvalError> {
        let f = self.mass(t, qd);
        let m = self.dof;
        if m == 0 {
            return Ok(DVector::zeros(0));
        }
        let lu = f.clone().lu();
        let det = lu.determinant();
        let norm = f
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if !(det.abs() > DET_TOLERANCE * norm.powi(m as i32)) {
            return Err(EvalError::SingularMassMatrix {
                t,
                qd: qd.to_vec(),
                det,
            });
        }
        let rhs = -self.forces(t, q, qd)?.total();
        lu.solve(&rhs).ok_or(EvalError::SingularMassMatrix {
            t,
            qd: qd.to_vec(),
            det,
        })
    }

    /// Charges, currents and voltages of every branch.
    pub fn branch_state(
        &self,
        t: f64,
        q: &[f64],
        qd: &[f64],
        qdd: &[f64],
    ) -> Result<BranchState, EvalError> {
        let b = self.names.len();
        let qb = self.full_coordinates(t, q)?;
        let qdb = self.implicit_velocity(t, &qb, qd);
        let qddb = self.pad(qdd);
        let phi: Vec<DVector<f64>> = (0..3).map(|k| self.phi(t, k)).collect();
        let mut charges = DVector::zeros(b);
        let mut currents = DVector::zeros(b);
        let mut voltages = DVector::zeros(b);
        for a in 0..b {
            charges[a] = self.row_dot(a, &qb) + self.num.kappa[a] + self.forcing_row(a, &phi[0]);
            currents[a] = self.row_dot(a, &qdb) + self.forcing_row(a, &phi[1]);
        }
        for a in 0..b {
            voltages[a] = match &self.devices[a] {
                DeviceModel::LinearInductor(_) | DeviceModel::NonlinearInductor(_) => {
                    let didt = self.row_dot(a, &qddb) + self.forcing_row(a, &phi[2]);
                    self.devices[a].law(currents[a], 0) * didt
                }
                DeviceModel::LinearCapacitor(_) | DeviceModel::NonlinearCapacitor(_) => {
                    self.devices[a].law(charges[a], 0)
                }
                DeviceModel::VoltageSource(f) => f.value(t),
                DeviceModel::CurrentSource(_) => 0.0,
            };
        }
        for (s, terms) in &self.source_voltage_loops {
            voltages[*s] = -terms.iter().map(|(j, c)| c * voltages[*j]).sum::<f64>();
        }
        Ok(BranchState {
            charges,
            currents,
            voltages,
        })
    }

    /// max |B^T i| over non-reference nodes.
    pub fn kcl_residual(&self, currents: &DVector<f64>) -> f64 {
        (self.incidence.transpose() * currents).amax()
    }

    /// Maps coordinates of this system to the coordinates it was reduced from.
    pub fn lift_coordinates(&self, t: f64, q: &[f64]) -> Result<Vec<f64>, EvalError> {
        let qb = self.full_coordinates(t, q)?;
        let m = self.lift.m.to_f64();
        let mt = self.lift.mt.to_f64();
        let phi = self.phi(t, 0);
        let m0 = DVector::from_iterator(self.lift.m0.len(), self.lift.m0.iter().map(to_f64));
        let mt_phi = if mt.ncols() == phi.len() {
            &mt * &phi
        } else {
            DVector::zeros(m0.len())
        };
        Ok((m * qb + m0 + mt_phi).iter().copied().collect())
    }

    /// Lifts velocity (and acceleration when no implicit coordinates are present).
    pub fn lift_rates(
        &self,
        t: f64,
        q: &[f64],
        qd: &[f64],
        qdd: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>), EvalError> {
        let qb = self.full_coordinates(t, q)?;
        let qdb = self.implicit_velocity(t, &qb, qd);
        let m = self.lift.m.to_f64();
        let mt = self.lift.mt.to_f64();
        let v = &m * qdb + &mt * self.phi(t, 1);
        let a = match qdd {
            Some(qdd) if self.implicit.is_none() => Some(
                (&m * self.pad(qdd) + &mt * self.phi(t, 2))
                    .iter()
                    .copied()
                    .collect(),
            ),
            _ => None,
        };
        Ok((v.iter().copied().collect(), a))
    }

    /// Solves N_L qd = i_L(t0) - df_L/dt(t0) exactly; free directions get zero.
    pub fn initial_velocity(&self, t0: f64) -> Result<Vec<f64>, AssembleError> {
        let ind: Vec<usize> = (0..self.devices.len())
            .filter(|&i| self.devices[i].kind() == DeviceKind::Inductor)
            .collect();
        let visible: Vec<usize> = (0..self.dof).collect();
        let nl = self.n.select_rows(&ind).select_cols(&visible);
        let phi1 = self.basis.eval(t0, 1);
        let mut rhs = RatMatrix::zeros(ind.len(), 1);
        for (r, &a) in ind.iter().enumerate() {
            let i0 = self
                .inductor_init
                .get(&a)
                .cloned()
                .unwrap_or_else(Rational::zero);
            let fdot: f64 = (0..phi1.len())
                .map(|j| to_f64(&self.forcing[(a, j)]) * phi1[j])
                .sum();
            rhs[(r, 0)] = i0 - crate::exact::from_f64(fdot);
        }
        if let Some(sol) = nl.solve(&rhs) {
            return Ok((0..self.dof).map(|i| to_f64(&sol[(i, 0)])).collect());
        }
        // Constants carried in from floating-point states are not exact; accept a roundoff-level residual.
        let (a, b) = (nl.to_f64(), rhs.to_f64().column(0).into_owned());
        let x = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| AssembleError::InconsistentInitialCurrents(e.into()))?;
        let residual = (&a * &x - &b).amax();
        if residual > 1e-10 * b.amax().max(1.0) {
            return Err(AssembleError::InconsistentInitialCurrents(format!(
                "initial inductor currents violate KCL for this configuration (residual {:e})",
                residual
            )));
        }
        Ok(x.iter().copied().collect())
    }
}
