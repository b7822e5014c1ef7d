use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::system::{BirkhoffSystem, EvalError, DET_TOLERANCE};
use crate::exact::RatMatrix;

/// Relative tolerance for finite-difference symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

/// Ranges sampled by the numerical checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub q: (f64, f64),
    pub qd: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox {
            t: (0.0, 1.0),
            q: (-0.5, 0.5),
            qd: (-0.5, 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

impl SampleBox {
    pub fn draw(&self, rng: &mut ChaCha8Rng, dof: usize) -> SamplePoint {
        let mut u = |(a, b): (f64, f64)| if a == b { a } else { rng.gen_range(a..b) };
        let t = u(self.t);
        let q = (0..dof).map(|_| u(self.q)).collect();
        let qd = (0..dof).map(|_| u(self.qd)).collect();
        SamplePoint { t, q, qd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Regularity {
    Yes,
    /// N restricted to inductor rows has a kernel: some capacitor-only loop.
    StructurallyNever {
        kernel_dimension: usize,
        capacitor_loops: Vec<String>,
    },
    NumericallySingularAt {
        points: Vec<SamplePoint>,
        determinants: Vec<f64>,
    },
}

impl Regularity {
    pub fn is_regular(&self) -> bool {
        matches!(self, Regularity::Yes)
    }
}

/// Which symmetry condition failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessKind {
    /// dFcal_j/dqd^l against dFcal_l/dqd^j.
    VelocityVelocity,
    /// dH_j/dq^l against dH_l/dq^j, H = G + V + W.
    PositionPosition,
    /// dH_j/dqd^l against dFcal_l/dq^j.
    PositionVelocity,
}

/// Two mixed partials that should agree but do not. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub j: usize,
    pub l: usize,
    pub d_jl: f64,
    pub d_lj: f64,
    pub point: SamplePoint,
}

impl Witness {
    /// Recomputes both partials at the stored point.
    pub fn recompute(&self, sys: &BirkhoffSystem) -> Result<(f64, f64), EvalError> {
        let p = &self.point;
        let jac = jacobians(sys, p.t, &p.q, &p.qd)?;
        Ok(match self.kind {
            WitnessKind::VelocityVelocity => {
                (jac.fcal_qd[(self.j, self.l)], jac.fcal_qd[(self.l, self.j)])
            }
            WitnessKind::PositionPosition => (jac.h_q[(self.j, self.l)], jac.h_q[(self.l, self.j)]),
            WitnessKind::PositionVelocity => {
                (jac.h_qd[(self.j, self.l)], jac.fcal_q[(self.l, self.j)])
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Conservativeness {
    Yes { reason: String },
    No { witness: Witness },
}

impl Conservativeness {
    pub fn is_conservative(&self) -> bool {
        matches!(self, Conservativeness::Yes { .. })
    }
}

/// Fcal_j = sum_i F_ij qd^i, the velocity part of the 1-form.
pub fn fcal(sys: &BirkhoffSystem, t: f64, qd: &[f64]) -> DVector<f64> {
    sys.mass(t, qd).transpose() * DVector::from_column_slice(qd)
}

pub(crate) struct Jacobians {
    pub fcal_qd: DMatrix<f64>,
    pub fcal_q: DMatrix<f64>,
    pub h_q: DMatrix<f64>,
    pub h_qd: DMatrix<f64>,
}

fn step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

pub(crate) fn jacobians(
    sys: &BirkhoffSystem,
    t: f64,
    q: &[f64],
    qd: &[f64],
) -> Result<Jacobians, EvalError> {
    let m = sys.dof();
    let h_at = |q: &[f64], qd: &[f64]| sys.forces(t, q, qd).map(|f| f.total());
    let mut fcal_qd = DMatrix::zeros(m, m);
    let mut h_qd = DMatrix::zeros(m, m);
    let mut h_q = DMatrix::zeros(m, m);
    for l in 0..m {
        let h = step(qd[l]);
        let (mut p, mut n) = (qd.to_vec(), qd.to_vec());
        p[l] += h;
        n[l] -= h;
        fcal_qd.set_column(l, &((fcal(sys, t, &p) - fcal(sys, t, &n)) / (2.0 * h)));
        h_qd.set_column(l, &((h_at(q, &p)? - h_at(q, &n)?) / (2.0 * h)));
        let h = step(q[l]);
        let (mut p, mut n) = (q.to_vec(), q.to_vec());
        p[l] += h;
        n[l] -= h;
        h_q.set_column(l, &((h_at(&p, qd)? - h_at(&n, qd)?) / (2.0 * h)));
    }
    // Fcal depends on qd only.
    let fcal_q = DMatrix::zeros(m, m);
    Ok(Jacobians {
        fcal_qd,
        fcal_q,
        h_q,
        h_qd,
    })
}

fn mismatch(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() > SYMMETRY_TOLERANCE * a.abs().max(b.abs()).max(scale)
}

/// Finite-difference check of the exactness conditions; returns the first failure.
pub fn symmetry_check(
    sys: &BirkhoffSystem,
    sample: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<Option<Witness>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sys.dof();
    for _ in 0..n {
        let p = sample.draw(&mut rng, m);
        let jac = jacobians(sys, p.t, &p.q, &p.qd)?;
        let scale_v = jac.fcal_qd.amax();
        let scale_q = jac.h_q.amax();
        let scale_x = jac.h_qd.amax().max(scale_v).max(scale_q);
        let mk = |kind, j, l, d_jl, d_lj| Witness {
            kind,
            j,
            l,
            d_jl,
            d_lj,
            point: p.clone(),
        };
        // Velocity block first, then positions, then the mixed block.
        for j in 0..m {
            for l in j + 1..m {
                if mismatch(jac.fcal_qd[(j, l)], jac.fcal_qd[(l, j)], scale_v) {
                    return Ok(Some(mk(
                        WitnessKind::VelocityVelocity,
                        j,
                        l,
                        jac.fcal_qd[(j, l)],
                        jac.fcal_qd[(l, j)],
                    )));
                }
            }
        }
        for j in 0..m {
            for l in j + 1..m {
                if mismatch(jac.h_q[(j, l)], jac.h_q[(l, j)], scale_q) {
                    return Ok(Some(mk(
                        WitnessKind::PositionPosition,
                        j,
                        l,
                        jac.h_q[(j, l)],
                        jac.h_q[(l, j)],
                    )));
                }
            }
        }
        for j in 0..m {
            for l in 0..m {
                if mismatch(jac.h_qd[(j, l)], jac.fcal_q[(l, j)], scale_x) {
                    return Ok(Some(mk(
                        WitnessKind::PositionVelocity,
                        j,
                        l,
                        jac.h_qd[(j, l)],
                        jac.fcal_q[(l, j)],
                    )));
                }
            }
        }
    }
    Ok(None)
}

/// True when W vanishes identically: every driven inductor is linear or has affine forcing.
fn w_structurally_zero(sys: &BirkhoffSystem) -> bool {
    sys.inductor_rows().iter().all(|&a| {
        let visible = (0..sys.dof()).any(|j| !num::Zero::is_zero(&sys.n[(a, j)]));
        !visible
            || sys.devices[a].is_linear()
            || (0..sys.basis.len()).all(|k| {
                num::Zero::is_zero(&sys.forcing[(a, k)])
                    || sys.basis.functions[k].second_derivative_vanishes()
            })
    })
}

pub fn check_conservative(
    sys: &BirkhoffSystem,
    sample: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<Conservativeness, EvalError> {
    if sys.mix.is_none() {
        if sys.basis.is_empty() {
            return Ok(Conservativeness::Yes {
                reason: "sourceless".into(),
            });
        }
        if w_structurally_zero(sys) {
            let reason = if sys.all_linear() {
                "sourced, linear inductors"
            } else {
                "sourced, forcing term W vanishes"
            };
            return Ok(Conservativeness::Yes {
                reason: reason.into(),
            });
        }
    }
    Ok(match symmetry_check(sys, sample, n, seed)? {
        None => Conservativeness::Yes {
            reason: "finite-difference symmetry".into(),
        },
        Some(witness) => Conservativeness::No { witness },
    })
}

/// Inductor rows of N over the visible coordinates.
pub fn inductor_block(sys: &BirkhoffSystem) -> RatMatrix {
    let ind: Vec<usize> = (0..sys.devices.len())
        .filter(|&i| sys.devices[i].kind() == crate::netlist::DeviceKind::Inductor)
        .collect();
    let visible: Vec<usize> = (0..sys.dof()).collect();
    sys.n.select_rows(&ind).select_cols(&visible)
}

fn inf_norm(f: &DMatrix<f64>) -> f64 {
    f.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaled determinant test |det F| > tol ||F||^m.
pub fn mass_is_singular(f: &DMatrix<f64>, tol: f64) -> (bool, f64) {
    let m = f.nrows();
    if m == 0 {
        return (false, 1.0);
    }
    let det = f.clone().lu().determinant();
    (!(det.abs() > tol * inf_norm(f).powi(m as i32)), det)
}

pub fn check_regularity(
    sys: &BirkhoffSystem,
    sample: &SampleBox,
    n: usize,
    seed: u64,
) -> Regularity {
    let nl = inductor_block(sys);
    let kernel = sys.dof() - nl.rank();
    if kernel > 0 {
        return Regularity::StructurallyNever {
            kernel_dimension: kernel,
            capacitor_loops: sys.capacitor_loops.clone(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut dets = Vec::new();
    for _ in 0..n {
        let p = sample.draw(&mut rng, sys.dof());
        let (singular, det) = mass_is_singular(&sys.mass(p.t, &p.qd), DET_TOLERANCE);
        if singular {
            points.push(p);
            dets.push(det);
        }
    }
    if points.is_empty() {
        Regularity::Yes
    } else {
        Regularity::NumericallySingularAt {
            points,
            determinants: dets,
        }
    }
}
