//! Exact fig1 expectations shared by the fixture tests and the acceptance harness.

use super::{fig1_with, random_rational};
use lc_birkhoff::birkhoff::LinearForms;
use lc_birkhoff::exact::{RatMatrix, Rational};
use lc_birkhoff::pipeline;
use lc_birkhoff::reduce::{reduce_capacitor_loops, reduce_inductor_loops_linear};
use num::{One, Zero};
use rand_chacha::ChaCha8Rng;

macro_rules! ensure_eq {
    ($a:expr, $b:expr, $what:expr) => {
        let (a, b) = (&$a, &$b);
        if a != b {
            return Err(format!("{}: got {:?}, expected {:?}", $what, a, b));
        }
    };
}

pub fn ex91() -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let b = vec![
        vec![0, 0, 1],
        vec![0, 1, 0],
        vec![0, 1, -1],
        vec![1, 0, -1],
        vec![-1, 0, 0],
        vec![0, -1, 0],
        vec![1, -1, 0],
    ];
    let a = vec![
        vec![0, 0, 1, -1],
        vec![0, 1, -1, 0],
        vec![0, 0, 1, 0],
        vec![0, 0, 0, -1],
        vec![1, 0, 0, -1],
        vec![-1, 1, 0, 0],
        vec![1, 0, 0, 0],
    ];
    (b, a)
}

/// N and the coordinate transform for coordinates (C3, L2, L3, L4).
pub fn n9() -> (RatMatrix, RatMatrix) {
    let n = RatMatrix::from_ints(
        &[
            vec![0, 0, 1, 1],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
            vec![1, 0, 0, 1],
            vec![-1, 1, 1, 0],
            vec![1, 0, 0, 0],
        ],
        4,
    );
    let cm = RatMatrix::from_ints(
        &[
            vec![1, 0, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 1, 1, 0],
            vec![0, 0, 0, -1],
        ],
        4,
    );
    (n, cm)
}

pub struct Params {
    pub l: [Rational; 4],
    pub c: [Rational; 3],
}

impl Params {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        Params {
            l: std::array::from_fn(|_| random_rational(rng)),
            c: std::array::from_fn(|_| random_rational(rng)),
        }
    }

    fn inv(&self, k: usize) -> Rational {
        Rational::one() / &self.c[k]
    }

    fn s(&self) -> Rational {
        self.inv(0) + self.inv(1) + self.inv(2)
    }

    // Reduced stiffness coefficients after eliminating the capacitor loop.
    pub fn c1(&self) -> Rational {
        self.inv(1) * (Rational::one() - self.inv(1) / self.s())
    }

    pub fn c2(&self) -> Rational {
        self.inv(1) * self.inv(0) / self.s()
    }

    pub fn c3(&self) -> Rational {
        self.inv(0) * (Rational::one() - self.inv(0) / self.s())
    }
}

fn m(rows: Vec<Vec<Rational>>) -> RatMatrix {
    RatMatrix::from_rows(rows)
}

/// Assembled, raw, capacitor-reduced and inductor-reduced linear forms against closed forms in L, C.
pub fn check_symbolic(p: &Params) -> Result<(), String> {
    let [l1, l2, l3, l4] = p.l.clone();
    let z = Rational::zero;
    let circuit = fig1_with(&p.l, &p.c);
    let sys = pipeline::build(&circuit, false)
        .map_err(|e| e.to_string())?
        .system;
    let f = LinearForms::of(&sys).ok_or("assembled system not linear")?;
    let mass = m(vec![
        vec![z(), z(), z(), z()],
        vec![z(), l2.clone(), z(), z()],
        vec![z(), z(), &l1 + &l3, l1.clone()],
        vec![z(), z(), l1.clone(), &l1 + &l4],
    ]);
    let (i1, i2) = (p.inv(0), p.inv(1));
    let stiff = m(vec![
        vec![p.s(), -i2.clone(), -i2.clone(), i1.clone()],
        vec![-i2.clone(), i2.clone(), i2.clone(), z()],
        vec![-i2.clone(), i2.clone(), i2.clone(), z()],
        vec![i1.clone(), z(), z(), i1.clone()],
    ]);
    ensure_eq!(f.mass, mass, "assembled mass");
    ensure_eq!(f.stiffness, stiff, "assembled stiffness");

    let raw = pipeline::build(&circuit, true)
        .map_err(|e| e.to_string())?
        .system;
    let r = LinearForms::of(&raw).ok_or("raw system not linear")?;
    let raw_mass = m(vec![
        vec![z(), z(), z(), z()],
        vec![z(), l2.clone(), z(), z()],
        vec![z(), -l2.clone(), &l1 + &l3, l1.clone()],
        vec![z(), z(), -l1.clone(), -(&l1 + &l4)],
    ]);
    let raw_stiff = m(vec![
        vec![p.s(), -i2.clone(), -i2.clone(), i1.clone()],
        vec![-i2.clone(), i2.clone(), i2.clone(), z()],
        vec![z(), z(), z(), z()],
        vec![-i1.clone(), z(), z(), -i1.clone()],
    ]);
    ensure_eq!(r.mass, raw_mass, "raw mass");
    ensure_eq!(r.stiffness, raw_stiff, "raw stiffness");

    let red = reduce_capacitor_loops(&sys).map_err(|e| e.to_string())?;
    ensure_eq!(red.inner.dof(), 3, "capacitor-reduced dof");
    let f = LinearForms::of(&red.inner).ok_or("reduced system not linear")?;
    let (c1, c2, c3) = (p.c1(), p.c2(), p.c3());
    ensure_eq!(
        f.mass,
        m(vec![
            vec![l2.clone(), z(), z()],
            vec![z(), &l1 + &l3, l1.clone()],
            vec![z(), l1.clone(), &l1 + &l4]
        ]),
        "reduced mass"
    );
    ensure_eq!(
        f.stiffness,
        m(vec![
            vec![c1.clone(), c1.clone(), c2.clone()],
            vec![c1.clone(), c1.clone(), c2.clone()],
            vec![c2.clone(), c2.clone(), c3.clone()]
        ]),
        "reduced stiffness"
    );

    let q0 = red.inner.initial_coordinates();
    let qd0 = red.inner.initial_velocity(0.0).map_err(|e| e.to_string())?;
    let hat = reduce_inductor_loops_linear(red, 0.0, &q0, &qd0).map_err(|e| e.to_string())?;
    ensure_eq!(hat.inner.dof(), 2, "inductor-reduced dof");
    let f = LinearForms::of(&hat.inner).ok_or("inductor-reduced system not linear")?;
    let sl = &l1 + &l2 + &l3;
    let mass = m(vec![
        vec![&l2 * (&l1 + &l3) / &sl, &l1 * &l2 / &sl],
        vec![
            &l1 * &l2 / &sl,
            ((&l1 + &l4) * (&l2 + &l3) + &l1 * &l4) / &sl,
        ],
    ]);
    ensure_eq!(f.mass, mass, "inductor-reduced mass");
    ensure_eq!(
        f.stiffness,
        m(vec![vec![c1.clone(), c2.clone()], vec![c2, c3]]),
        "inductor-reduced stiffness"
    );
    Ok(())
}
