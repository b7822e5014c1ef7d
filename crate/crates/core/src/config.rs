//! Configuration space: charges as affine functions of free coordinates and time.
//!
//! x = N q + kappa + Phi phi(t), where phi is the [`TimeBasis`] built from
//! the sources (current-source primitives, then source voltages).

use num::{One, Zero};
use serde::Serialize;

use crate::exact::{fmt_rational, RatMatrix, Rational};
use crate::functions::{BasisFn, TimeBasis};
use crate::graph::{IncidenceMatrix, LoopMatrix};
use crate::netlist::{Circuit, DeviceKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigSpace {
    /// Branch indices used as coordinates, in coordinate order.
    pub free_indices: Vec<usize>,
    /// b x d; current-source rows are zero, voltage-source rows give their currents.
    pub n: RatMatrix,
    pub kappa: Vec<Rational>,
    /// b x basis length.
    pub forcing: RatMatrix,
    pub basis: TimeBasis,
    /// d x d with C A1^T = N^T.
    pub c_transform: RatMatrix,
    pub c_vector: Vec<Rational>,
    /// Non-source branch indices in netlist order (rows of B1, A1).
    pub lc_branches: Vec<usize>,
    pub b1t: RatMatrix,
    pub b2t: RatMatrix,
    /// Loop matrix restricted to non-source branches, over loops free of current sources.
    pub a1: RatMatrix,
    /// Same loops restricted to voltage-source branches.
    pub a2: RatMatrix,
    /// Loop combinations (m x d) selecting loops free of current sources.
    pub loop_selection: RatMatrix,
    /// d x basis length: voltage-source term, C A2^T v_s.
    pub v_matrix: RatMatrix,
    /// Initial value of the coordinates.
    pub q0: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("rank deficiency: {0}")]
    RankDeficiency(String),
    #[error("no nonsingular loop transform exists")]
    SingularTransform,
    #[error("invalid coordinates: {0}")]
    InvalidCoordinates(String),
    #[error("incidence and loop matrices do not match this circuit")]
    DimensionMismatch,
}

impl ConfigSpace {
    pub fn dof(&self) -> usize {
        self.n.cols()
    }

    /// Rows of N for the non-source branches.
    pub fn n_lc(&self) -> RatMatrix {
        self.n.select_rows(&self.lc_branches)
    }

    /// Rows of the forcing matrix for the non-source branches.
    pub fn forcing_lc(&self) -> RatMatrix {
        self.forcing.select_rows(&self.lc_branches)
    }

    /// Human-readable f^a(t) for each branch with nonzero forcing.
    pub fn forcing_terms(&self, c: &Circuit) -> Vec<(String, String)> {
        (0..self.forcing.rows())
            .filter(|&r| !self.forcing.row_is_zero(r))
            .map(|r| {
                (
                    c.branches[r].name.clone(),
                    linear_combination(self.forcing.row(r), &self.basis.labels),
                )
            })
            .collect()
    }
}

pub(crate) fn linear_combination(coeffs: &[Rational], labels: &[String]) -> String {
    let mut out = String::new();
    for (c, l) in coeffs.iter().zip(labels) {
        if c.is_zero() {
            continue;
        }
        let neg = *c < Rational::zero();
        let mag = if neg { -c.clone() } else { c.clone() };
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if l.is_empty() {
            out.push_str(&fmt_rational(&mag));
            continue;
        }
        if !mag.is_one() {
            out.push_str(&fmt_rational(&mag));
            out.push('*');
        }
        out.push_str(l);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn indices(c: &Circuit, pred: impl Fn(DeviceKind) -> bool) -> Vec<usize> {
    (0..c.b()).filter(|&i| pred(c.kind(i))).collect()
}

pub fn build_config(
    c: &Circuit,
    b: &IncidenceMatrix,
    a: &LoopMatrix,
) -> Result<ConfigSpace, ConfigError> {
    if b.entries.rows != c.b() || a.entries.rows != c.b() {
        return Err(ConfigError::DimensionMismatch);
    }
    let bm = b.entries.to_rational();
    let am = a.entries.to_rational();
    let lc = indices(c, |k| {
        matches!(k, DeviceKind::Inductor | DeviceKind::Capacitor)
    });
    let isrc = indices(c, |k| k == DeviceKind::CurrentSource);
    let vsrc = indices(c, |k| k == DeviceKind::VoltageSource);

    // Node combinations free of voltage-source charges.
    let bv = bm.select_rows(&vsrc);
    if bv.rank() < vsrc.len() {
        return Err(ConfigError::RankDeficiency(
            "voltage sources form a loop".into(),
        ));
    }
    let yb = if vsrc.is_empty() {
        RatMatrix::identity(bm.cols())
    } else {
        bv.kernel()
    };
    let b1t = yb.transpose().mul(&bm.select_rows(&lc).transpose());
    let b2t = yb.transpose().mul(&bm.select_rows(&isrc).transpose());
    let rows = b1t.rows();
    if b1t.rank() < rows {
        return Err(ConfigError::RankDeficiency(format!(
            "rank(B1^T) < n - S_V = {}",
            rows
        )));
    }

    // Dependent and free columns of B1^T (positions within lc).
    let (free_pos, dep_pos) = match &c.coords {
        Some(coords) => {
            let mut free = Vec::new();
            for &i in coords {
                let p = lc.iter().position(|&x| x == i).ok_or_else(|| {
                    ConfigError::InvalidCoordinates(format!(
                        "{} is a source branch",
                        c.branches[i].name
                    ))
                })?;
                free.push(p);
            }
            let dep: Vec<usize> = (0..lc.len()).filter(|p| !free.contains(p)).collect();
            if dep.len() != rows || b1t.select_cols(&dep).rank() < rows {
                return Err(ConfigError::InvalidCoordinates(format!(
                    "need {} coordinates whose complement is independent in B1^T",
                    lc.len() - rows
                )));
            }
            (free, dep)
        }
        None => {
            let (_, pivots) = b1t.rref();
            (
                (0..lc.len()).filter(|p| !pivots.contains(p)).collect(),
                pivots,
            )
        }
    };
    let d = free_pos.len();
    let bdep_inv = b1t
        .select_cols(&dep_pos)
        .inverse()
        .ok_or(ConfigError::SingularTransform)?;
    let n_dep = bdep_inv
        .mul(&b1t.select_cols(&free_pos))
        .scale(&-Rational::one());

    // Time basis: current-source primitives, then source voltages.
    let mut basis = TimeBasis::default();
    let mut prim_col = Vec::new();
    for &s in &isrc {
        let f = c.branches[s].device.source().unwrap().clone();
        prim_col.push(basis.push(BasisFn::Primitive(f), format!("P({})", c.branches[s].name)));
    }
    let mut volt_col = Vec::new();
    for &s in &vsrc {
        let f = c.branches[s].device.source().unwrap().clone();
        volt_col.push(basis.push(BasisFn::Direct(f), format!("v({})", c.branches[s].name)));
    }
    let nb = basis.len();

    // Initial charges; inductors carry none.
    let mut x0 = vec![Rational::zero(); c.b()];
    for &i in &lc {
        match c.initial.get(&i) {
            Some(v) if c.kind(i) == DeviceKind::Capacitor => x0[i] = v.clone(),
            None if c.kind(i) == DeviceKind::Capacitor => {
                log::warn!("no initial charge for {}, using 0", c.branches[i].name)
            }
            None => log::warn!("no initial current for {}, using 0", c.branches[i].name),
            _ => {}
        }
    }
    let x0_lc: Vec<Rational> = lc.iter().map(|&i| x0[i].clone()).collect();
    let c_vector = b1t.mul_vec(&x0_lc);

    let mut n = RatMatrix::zeros(c.b(), d);
    let mut forcing = RatMatrix::zeros(c.b(), nb);
    for (j, &p) in free_pos.iter().enumerate() {
        n[(lc[p], j)] = Rational::one();
    }
    let src_part = bdep_inv.mul(&b2t).scale(&-Rational::one());
    for (r, &p) in dep_pos.iter().enumerate() {
        for j in 0..d {
            n[(lc[p], j)] = n_dep[(r, j)].clone();
        }
        for (s, &col) in prim_col.iter().enumerate() {
            forcing[(lc[p], col)] = src_part[(r, s)].clone();
        }
    }
    for (s, &i) in isrc.iter().enumerate() {
        forcing[(i, prim_col[s])] = Rational::one();
    }
    if !vsrc.is_empty() {
        // Full KCL fixes the voltage-source flows.
        let bvt = bv.transpose();
        let non_v: Vec<usize> = (0..c.b()).filter(|i| !vsrc.contains(i)).collect();
        let rest = bm.select_rows(&non_v).transpose();
        let rhs_n = rest.mul(&n.select_rows(&non_v)).scale(&-Rational::one());
        let rhs_f = rest
            .mul(&forcing.select_rows(&non_v))
            .scale(&-Rational::one());
        let nv = bvt.solve(&rhs_n).ok_or(ConfigError::SingularTransform)?;
        let fv = bvt.solve(&rhs_f).ok_or(ConfigError::SingularTransform)?;
        for (r, &i) in vsrc.iter().enumerate() {
            for j in 0..d {
                n[(i, j)] = nv[(r, j)].clone();
            }
            for j in 0..nb {
                forcing[(i, j)] = fv[(r, j)].clone();
            }
        }
    }

    let q0: Vec<Rational> = free_pos.iter().map(|&p| x0_lc[p].clone()).collect();
    let nq0 = n.mul_vec(&q0);
    let kappa: Vec<Rational> = (0..c.b())
        .map(|i| {
            if c.kind(i) == DeviceKind::CurrentSource {
                Rational::zero()
            } else {
                &x0[i] - &nq0[i]
            }
        })
        .collect();

    // Loops free of current sources and the transform C.
    let ai = am.select_rows(&isrc);
    if ai.rank() < isrc.len() {
        return Err(ConfigError::RankDeficiency(
            "current sources form a cutset".into(),
        ));
    }
    let ya = if isrc.is_empty() {
        RatMatrix::identity(am.cols())
    } else {
        ai.kernel()
    };
    let a_sel = am.mul(&ya);
    if a_sel.cols() != d {
        return Err(ConfigError::SingularTransform);
    }
    let ct = a_sel.solve(&n).ok_or(ConfigError::SingularTransform)?;
    let c_transform = ct.transpose();
    if c_transform.det().is_zero() {
        return Err(ConfigError::SingularTransform);
    }
    let a1 = a_sel.select_rows(&lc);
    let a2 = a_sel.select_rows(&vsrc);
    let mut v_matrix = RatMatrix::zeros(d, nb);
    let cv = c_transform.mul(&a2.transpose());
    for (s, &col) in volt_col.iter().enumerate() {
        for j in 0..d {
            v_matrix[(j, col)] = cv[(j, s)].clone();
        }
    }

    Ok(ConfigSpace {
        free_indices: free_pos.iter().map(|&p| lc[p]).collect(),
        n,
        kappa,
        forcing,
        basis,
        c_transform,
        c_vector,
        lc_branches: lc,
        b1t,
        b2t,
        a1,
        a2,
        loop_selection: ya,
        v_matrix,
        q0,
    })
}

/// True iff A1 and the non-source rows of N have the same column space.
pub fn verify_kernel_identity(cfg: &ConfigSpace, a: &LoopMatrix) -> bool {
    let am = a.entries.to_rational();
    if am.rows() != cfg.n.rows() || am.cols() != cfg.loop_selection.rows() {
        return false;
    }
    let a1 = am.mul(&cfg.loop_selection).select_rows(&cfg.lc_branches);
    a1.same_column_space(&cfg.n_lc())
}

/// JSON-friendly view with exact fractions as strings.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigReport {
    pub free_coordinates: Vec<String>,
    pub n: Vec<Vec<String>>,
    pub kappa: Vec<String>,
    pub c_transform: Vec<Vec<String>>,
    pub c_vector: Vec<String>,
    pub forcing: Vec<(String, String)>,
}

impl ConfigReport {
    pub fn new(c: &Circuit, cfg: &ConfigSpace) -> Self {
        ConfigReport {
            free_coordinates: cfg
                .free_indices
                .iter()
                .map(|&i| c.branches[i].name.clone())
                .collect(),
            n: cfg.n.to_strings(),
            kappa: cfg.kappa.iter().map(fmt_rational).collect(),
            c_transform: cfg.c_transform.to_strings(),
            c_vector: cfg.c_vector.iter().map(fmt_rational).collect(),
            forcing: cfg.forcing_terms(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::graph::{build_incidence, build_loop_basis};
    use crate::netlist::parse_netlist;

    #[test]
    fn minimal_loop() {
        let c = parse_netlist("branch L1 n1 n2 L 1\nbranch C1 n2 n1 C 1\ninit C1 1/2\n").unwrap();
        let (b, a) = (build_incidence(&c), build_loop_basis(&c).unwrap());
        let cfg = build_config(&c, &b, &a).unwrap();
        assert_eq!(cfg.n, RatMatrix::from_ints(&[vec![1], vec![1]], 1));
        assert_eq!(cfg.c_transform, RatMatrix::from_ints(&[vec![1]], 1));
        assert!(verify_kernel_identity(&cfg, &a));
        assert_eq!(cfg.free_indices, vec![1]);
        // x_C(0) = N q0 + kappa
        let x: Vec<Rational> = cfg
            .n
            .mul_vec(&cfg.q0)
            .iter()
            .zip(&cfg.kappa)
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(x[1], Rational::new(1.into(), 2.into()));
        assert_eq!(cfg.c_vector.len(), 1);
        let _ = rat(0);
    }

    #[test]
    fn bad_coordinates_rejected() {
        let c = parse_netlist(
            "branch L1 n1 n2 L 1\nbranch C1 n2 n1 C 1\nbranch C2 n2 n1 C 1\ncoords L1 C1 C2\n",
        );
        assert!(
            c.is_err() || {
                let c = c.unwrap();
                build_config(&c, &build_incidence(&c), &build_loop_basis(&c).unwrap()).is_err()
            }
        );
    }
}
