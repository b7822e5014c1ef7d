use nalgebra::{DMatrix, DVector};
use num::Zero;

use super::analysis::{check_conservative, fcal, Conservativeness, SampleBox};
use super::system::{BirkhoffSystem, EvalError};
use crate::exact::{to_f64, RatMatrix, Rational};
use crate::quad::integrate;

const QUAD_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("system is not conservative")]
    NotConservative(Box<super::analysis::Witness>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Exact pieces of a linear Birkhoffian:
/// Q = M qdd + K q + g0 + (Gt + V) phi(t) + Wm phi''(t).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForms {
    pub mass: RatMatrix,
    pub stiffness: RatMatrix,
    pub constant: Vec<Rational>,
    /// Capacitor forcing through f(t), per basis column.
    pub g_time: RatMatrix,
    pub v_time: RatMatrix,
    /// Inductor forcing through f''(t), per basis column.
    pub w_time: RatMatrix,
}

impl LinearForms {
    /// `None` unless every active device is linear and no coordinate is implicit.
    pub fn of(sys: &BirkhoffSystem) -> Option<LinearForms> {
        if !sys.all_linear() || sys.implicit.is_some() {
            return None;
        }
        let d = sys.dof();
        let nb = sys.basis.len();
        let mut mass = RatMatrix::zeros(d, d);
        let mut stiffness = RatMatrix::zeros(d, d);
        let mut constant = vec![Rational::zero(); d];
        let mut g_time = RatMatrix::zeros(d, nb);
        let mut w_time = RatMatrix::zeros(d, nb);
        for (rows, is_l) in [(sys.inductor_rows(), true), (sys.capacitor_rows(), false)] {
            for &a in rows {
                let k = sys.devices[a].linear_coefficient().expect("linear device");
                for j in 0..d {
                    let nj = &sys.n[(a, j)];
                    if nj.is_zero() {
                        continue;
                    }
                    let w = nj * &k;
                    for i in 0..d {
                        let target = if is_l { &mut mass } else { &mut stiffness };
                        target[(j, i)] += &w * &sys.n[(a, i)];
                    }
                    for s in 0..nb {
                        let target = if is_l { &mut w_time } else { &mut g_time };
                        target[(j, s)] += &w * &sys.forcing[(a, s)];
                    }
                    if !is_l {
                        constant[j] += &w * &sys.kappa[a];
                    }
                }
            }
        }
        let visible: Vec<usize> = (0..d).collect();
        let v_time = sys.vmat.select_rows(&visible);
        let mut forms = LinearForms {
            mass,
            stiffness,
            constant,
            g_time,
            v_time,
            w_time,
        };
        if let Some(r) = &sys.mix {
            forms.mass = r.mul(&forms.mass);
            forms.stiffness = r.mul(&forms.stiffness);
            forms.constant = r.mul_vec(&forms.constant);
            forms.g_time = r.mul(&forms.g_time);
            forms.v_time = r.mul(&forms.v_time);
            forms.w_time = r.mul(&forms.w_time);
        }
        Some(forms)
    }
}

#[derive(Clone, Debug)]
struct LinearNumeric {
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    constant: DVector<f64>,
    drive: DMatrix<f64>,
    w_time: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub enum EnergyForm {
    LinearClosedForm(LinearForms),
    /// Straight-segment integral of the exact 1-form from (q_ref, 0).
    PathIntegral {
        reference: Vec<f64>,
    },
}

/// E(t, q, qd) with d/dt E = sum_j Q_j qd^j + dE/dt_partial along any curve.
#[derive(Clone, Debug)]
pub struct EnergyFunction {
    pub form: EnergyForm,
    sys: BirkhoffSystem,
    linear: Option<LinearNumeric>,
}

pub fn build_energy(sys: &BirkhoffSystem) -> Result<EnergyFunction, EnergyError> {
    if let Conservativeness::No { witness } = check_conservative(sys, &SampleBox::default(), 20, 0)?
    {
        return Err(EnergyError::NotConservative(Box::new(witness)));
    }
    Ok(energy_unchecked(sys))
}

/// Builds E without re-verifying conservativeness.
pub fn energy_unchecked(sys: &BirkhoffSystem) -> EnergyFunction {
    match LinearForms::of(sys) {
        Some(forms) => {
            let drive = forms.g_time.add(&forms.v_time).to_f64();
            let linear = LinearNumeric {
                mass: forms.mass.to_f64(),
                stiffness: forms.stiffness.to_f64(),
                constant: DVector::from_iterator(
                    forms.constant.len(),
                    forms.constant.iter().map(to_f64),
                ),
                drive,
                w_time: forms.w_time.to_f64(),
            };
            EnergyFunction {
                form: EnergyForm::LinearClosedForm(forms),
                sys: sys.clone(),
                linear: Some(linear),
            }
        }
        None => {
            let reference = if sys.implicit.is_some() {
                sys.initial_coordinates()
            } else {
                vec![0.0; sys.dof()]
            };
            EnergyFunction {
                form: EnergyForm::PathIntegral { reference },
                sys: sys.clone(),
                linear: None,
            }
        }
    }
}

impl EnergyFunction {
    pub fn system(&self) -> &BirkhoffSystem {
        &self.sys
    }

    /// Energy including the terms linear in q.
    pub fn eval(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<f64, EvalError> {
        match &self.linear {
            Some(l) => {
                let (q, qd) = (
                    DVector::from_column_slice(q),
                    DVector::from_column_slice(qd),
                );
                let phi = self.sys.phi(t, 0);
                let phi2 = self.sys.phi(t, 2);
                let affine = &l.constant + &l.drive * phi + &l.w_time * phi2;
                Ok(0.5 * qd.dot(&(&l.mass * &qd))
                    + 0.5 * q.dot(&(&l.stiffness * &q))
                    + affine.dot(&q))
            }
            None => self.path_integral(t, q, qd),
        }
    }

    /// Energy without the terms linear in q (closed form only; otherwise same as `eval`).
    pub fn eval_quadratic(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<f64, EvalError> {
        match &self.linear {
            Some(l) => {
                let (q, qd) = (
                    DVector::from_column_slice(q),
                    DVector::from_column_slice(qd),
                );
                Ok(0.5 * qd.dot(&(&l.mass * &qd)) + 0.5 * q.dot(&(&l.stiffness * &q)))
            }
            None => self.eval(t, q, qd),
        }
    }

    /// Explicit time derivative with (q, qd) held fixed.
    pub fn partial_t(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<f64, EvalError> {
        if self.sys.is_autonomous() {
            return Ok(0.0);
        }
        match &self.linear {
            Some(l) => {
                let q = DVector::from_column_slice(q);
                let rate = &l.drive * self.sys.phi(t, 1) + &l.w_time * self.sys.phi(t, 3);
                Ok(rate.dot(&q))
            }
            None => {
                let h = 1e-3;
                let e = |s: f64| self.eval(t + s * h, q, qd);
                Ok((e(-2.0)? - 8.0 * e(-1.0)? + 8.0 * e(1.0)? - e(2.0)?) / (12.0 * h))
            }
        }
    }

    fn path_integral(&self, t: f64, q: &[f64], qd: &[f64]) -> Result<f64, EvalError> {
        let EnergyForm::PathIntegral { reference } = &self.form else {
            unreachable!()
        };
        let m = q.len();
        let qd_v = DVector::from_column_slice(qd);
        let kinetic = integrate(
            |s| {
                let scaled: Vec<f64> = qd.iter().map(|x| s * x).collect();
                Ok::<f64, EvalError>(fcal(&self.sys, t, &scaled).dot(&qd_v))
            },
            0.0,
            1.0,
            QUAD_TOL,
        )?;
        let dq: Vec<f64> = (0..m).map(|i| q[i] - reference[i]).collect();
        let dq_v = DVector::from_column_slice(&dq);
        let zero = vec![0.0; m];
        let potential = integrate(
            |s| {
                let point: Vec<f64> = (0..m).map(|i| reference[i] + s * dq[i]).collect();
                Ok(self.sys.forces(t, &point, &zero)?.total().dot(&dq_v))
            },
            0.0,
            1.0,
            QUAD_TOL,
        )?;
        Ok(kinetic + potential)
    }
}
