//! Device laws and source waveforms.

use std::fmt;

/// Default domain for nonlinear device laws when none is given.
pub const DEFAULT_DOMAIN: (f64, f64) = (-10.0, 10.0);

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarForm {
    /// Ascending coefficients.
    Polynomial(Vec<f64>),
    /// `offset + slope*x + amplitude*sin(omega*x + phase)`.
    AffinePlusSinusoid {
        offset: f64,
        slope: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Breakpoints sorted by x; extrapolated linearly past the ends.
    PiecewiseLinear(Vec<(f64, f64)>),
}

/// A real function of one variable used for L(i) and C(q).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFunction {
    pub form: ScalarForm,
    pub domain: (f64, f64),
}

impl ScalarFunction {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        ScalarFunction {
            form: ScalarForm::Polynomial(coeffs),
            domain: DEFAULT_DOMAIN,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// n-th derivative; n = 0 is the value.
    pub fn derivative(&self, x: f64, n: usize) -> f64 {
        match &self.form {
            ScalarForm::Polynomial(c) => poly_derivative(c, x, n),
            ScalarForm::AffinePlusSinusoid {
                offset,
                slope,
                amplitude,
                omega,
                phase,
            } => {
                let s = sin_derivative(*amplitude, *omega, *phase, x, n);
                match n {
                    0 => offset + slope * x + s,
                    1 => slope + s,
                    _ => s,
                }
            }
            ScalarForm::PiecewiseLinear(pts) => {
                let (y, s) = pwl_linear_extrap(pts, x);
                match n {
                    0 => y,
                    1 => s,
                    _ => 0.0,
                }
            }
        }
    }

    /// Integral from 0 to x.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match &self.form {
            ScalarForm::Polynomial(c) => poly_integral(c, x),
            ScalarForm::AffinePlusSinusoid {
                offset,
                slope,
                amplitude,
                omega,
                phase,
            } => offset * x + 0.5 * slope * x * x + sin_integral(*amplitude, *omega, *phase, x),
            ScalarForm::PiecewiseLinear(pts) => pwl_pieces(pts, true)
                .iter()
                .map(|p| p.integral(0.0, x, |p, lo, hi| p.first(lo, hi)))
                .sum(),
        }
    }

    /// Checks that the function stays away from zero on a grid of the domain.
    pub fn nonvanishing_on_domain(&self) -> bool {
        self.keeps_sign(0)
    }

    /// Checks that the derivative stays away from zero on a grid of the domain.
    pub fn strictly_monotone_on_domain(&self) -> bool {
        self.keeps_sign(1)
    }

    fn keeps_sign(&self, order: usize) -> bool {
        let mut sign = 0.0;
        for x in self.sample_domain() {
            let d = self.derivative(x, order);
            if d == 0.0 || !d.is_finite() {
                return false;
            }
            if sign == 0.0 {
                sign = d.signum();
            } else if d.signum() != sign {
                return false;
            }
        }
        true
    }

    fn sample_domain(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.domain;
        let extra: Vec<f64> = match &self.form {
            ScalarForm::PiecewiseLinear(p) => p
                .iter()
                .map(|q| q.0)
                .filter(|x| *x >= a && *x <= b)
                .collect(),
            _ => Vec::new(),
        };
        (0..=1000)
            .map(move |k| a + (b - a) * k as f64 / 1000.0)
            .chain(extra)
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            ScalarForm::Polynomial(c) => write!(f, "poly({})", join(c))?,
            ScalarForm::AffinePlusSinusoid {
                offset,
                slope,
                amplitude,
                omega,
                phase,
            } => write!(
                f,
                "sin({})",
                join(&[*offset, *slope, *amplitude, *omega, *phase])
            )?,
            ScalarForm::PiecewiseLinear(p) => write!(f, "pwl({})", join_pairs(p))?,
        }
        if self.domain != DEFAULT_DOMAIN {
            write!(f, " on [{},{}]", self.domain.0, self.domain.1)?;
        }
        Ok(())
    }
}

/// Source waveform of time.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    /// `amplitude*sin(omega*t + phase)`, omega in rad/s.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    Polynomial(Vec<f64>),
    /// Held constant outside the breakpoints.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl TimeFunction {
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    pub fn derivative(&self, t: f64, n: usize) -> f64 {
        match self {
            TimeFunction::Constant(v) => {
                if n == 0 {
                    *v
                } else {
                    0.0
                }
            }
            TimeFunction::Sinusoid {
                amplitude,
                omega,
                phase,
            } => sin_derivative(*amplitude, *omega, *phase, t, n),
            TimeFunction::Polynomial(c) => poly_derivative(c, t, n),
            TimeFunction::PiecewiseLinear(p) => {
                let (y, s) = pwl_hold(p, t);
                match n {
                    0 => y,
                    1 => s,
                    _ => 0.0,
                }
            }
        }
    }

    /// First antiderivative vanishing at t = 0.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => v * t,
            TimeFunction::Sinusoid {
                amplitude,
                omega,
                phase,
            } => sin_integral(*amplitude, *omega, *phase, t),
            TimeFunction::Polynomial(c) => poly_integral(c, t),
            TimeFunction::PiecewiseLinear(p) => pwl_pieces(p, false)
                .iter()
                .map(|q| q.integral(0.0, t, |q, lo, hi| q.first(lo, hi)))
                .sum(),
        }
    }

    /// Second antiderivative with value and slope zero at t = 0.
    pub fn double_integral(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => 0.5 * v * t * t,
            TimeFunction::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                if *omega == 0.0 {
                    0.5 * amplitude * phase.sin() * t * t
                } else {
                    let w = *omega;
                    -amplitude / w * (((w * t + phase).sin() - phase.sin()) / w - t * phase.cos())
                }
            }
            TimeFunction::Polynomial(c) => {
                let once: Vec<f64> = std::iter::once(0.0)
                    .chain(c.iter().enumerate().map(|(k, a)| a / (k + 1) as f64))
                    .collect();
                poly_integral(&once, t)
            }
            // Cauchy: int_0^t (t - u) f(u) du
            TimeFunction::PiecewiseLinear(p) => pwl_pieces(p, false)
                .iter()
                .map(|q| q.integral(0.0, t, |q, lo, hi| q.weighted(t, lo, hi)))
                .sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeFunction::Constant(v) => *v == 0.0,
            TimeFunction::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            TimeFunction::Polynomial(c) => c.iter().all(|x| *x == 0.0),
            TimeFunction::PiecewiseLinear(p) => p.iter().all(|x| x.1 == 0.0),
        }
    }
}

impl fmt::Display for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFunction::Constant(v) => write!(f, "{}", v),
            TimeFunction::Sinusoid {
                amplitude,
                omega,
                phase,
            } => write!(f, "sin({})", join(&[*amplitude, *omega, *phase])),
            TimeFunction::Polynomial(c) => write!(f, "poly({})", join(c)),
            TimeFunction::PiecewiseLinear(p) => write!(f, "pwl({})", join_pairs(p)),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_pairs(p: &[(f64, f64)]) -> String {
    p.iter()
        .map(|(x, y)| format!("{}:{}", x, y))
        .collect::<Vec<_>>()
        .join(",")
}

fn poly_derivative(c: &[f64], x: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    for k in (n..c.len()).rev() {
        let mut factor = 1.0;
        for j in 0..n {
            factor *= (k - j) as f64;
        }
        acc = acc * x + c[k] * factor;
    }
    acc
}

fn poly_integral(c: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for k in (0..c.len()).rev() {
        acc = acc * x + c[k] / (k + 1) as f64;
    }
    acc * x
}

fn sin_derivative(a: f64, w: f64, p: f64, x: f64, n: usize) -> f64 {
    a * w.powi(n as i32) * (w * x + p + n as f64 * std::f64::consts::FRAC_PI_2).sin()
}

fn sin_integral(a: f64, w: f64, p: f64, x: f64) -> f64 {
    if w == 0.0 {
        a * p.sin() * x
    } else {
        -a / w * ((w * x + p).cos() - p.cos())
    }
}

/// Linear function `p + s*u` on `[lo, hi]`.
struct Piece {
    lo: f64,
    hi: f64,
    p: f64,
    s: f64,
}

impl Piece {
    fn first(&self, a: f64, b: f64) -> f64 {
        self.p * (b - a) + 0.5 * self.s * (b * b - a * a)
    }

    fn weighted(&self, t: f64, a: f64, b: f64) -> f64 {
        let h = |u: f64| {
            t * self.p * u + (t * self.s - self.p) * u * u / 2.0 - self.s * u * u * u / 3.0
        };
        h(b) - h(a)
    }

    /// Oriented integral from `from` to `to` of whatever `f` integrates over the overlap.
    fn integral(&self, from: f64, to: f64, f: impl Fn(&Piece, f64, f64) -> f64) -> f64 {
        let (a, b, sign) = if to >= from {
            (from, to, 1.0)
        } else {
            (to, from, -1.0)
        };
        let lo = a.max(self.lo);
        let hi = b.min(self.hi);
        if hi <= lo {
            0.0
        } else {
            sign * f(self, lo, hi)
        }
    }
}

fn pwl_pieces(pts: &[(f64, f64)], linear_ends: bool) -> Vec<Piece> {
    let mut out = Vec::new();
    if pts.is_empty() {
        return out;
    }
    if pts.len() == 1 {
        out.push(Piece {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            p: pts[0].1,
            s: 0.0,
        });
        return out;
    }
    let seg = |i: usize| {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[i + 1];
        let s = (y1 - y0) / (x1 - x0);
        (y0 - s * x0, s)
    };
    let n = pts.len();
    let (p0, s0) = if linear_ends { seg(0) } else { (pts[0].1, 0.0) };
    out.push(Piece {
        lo: f64::NEG_INFINITY,
        hi: pts[0].0,
        p: p0,
        s: s0,
    });
    for i in 0..n - 1 {
        let (p, s) = seg(i);
        out.push(Piece {
            lo: pts[i].0,
            hi: pts[i + 1].0,
            p,
            s,
        });
    }
    let (pl, sl) = if linear_ends {
        seg(n - 2)
    } else {
        (pts[n - 1].1, 0.0)
    };
    out.push(Piece {
        lo: pts[n - 1].0,
        hi: f64::INFINITY,
        p: pl,
        s: sl,
    });
    out
}

/// Segment index whose half-open interval `[x_i, x_{i+1})` holds x, clamped to the ends.
fn segment(pts: &[(f64, f64)], x: f64) -> usize {
    let n = pts.len();
    let k = pts.partition_point(|p| p.0 <= x);
    k.saturating_sub(1).min(n - 2)
}

fn pwl_linear_extrap(pts: &[(f64, f64)], x: f64) -> (f64, f64) {
    if pts.len() == 1 {
        return (pts[0].1, 0.0);
    }
    let i = segment(pts, x);
    let (x0, y0) = pts[i];
    let (x1, y1) = pts[i + 1];
    let s = (y1 - y0) / (x1 - x0);
    (y0 + s * (x - x0), s)
}

fn pwl_hold(pts: &[(f64, f64)], t: f64) -> (f64, f64) {
    let n = pts.len();
    if n == 1 || t < pts[0].0 {
        return (pts[0].1, 0.0);
    }
    if t >= pts[n - 1].0 {
        return (pts[n - 1].1, 0.0);
    }
    pwl_linear_extrap(pts, t)
}

/// One column of the time basis in which all forcing is expanded.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisFn {
    /// Running integral of a source current.
    Primitive(TimeFunction),
    /// A source voltage itself.
    Direct(TimeFunction),
    /// The function t.
    Ramp,
}

impl BasisFn {
    /// Value (order 0) or time derivative of the given order.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        match self {
            BasisFn::Primitive(f) => match order {
                0 => f.integral(t),
                k => f.derivative(t, k - 1),
            },
            BasisFn::Direct(f) => f.derivative(t, order),
            BasisFn::Ramp => match order {
                0 => t,
                1 => 1.0,
                _ => 0.0,
            },
        }
    }

    /// True when the second derivative vanishes identically.
    pub fn second_derivative_vanishes(&self) -> bool {
        match self {
            BasisFn::Ramp => true,
            BasisFn::Primitive(f) => match f {
                TimeFunction::Constant(_) => true,
                TimeFunction::Polynomial(c) => c.iter().skip(1).all(|x| *x == 0.0),
                other => other.is_zero(),
            },
            BasisFn::Direct(f) => match f {
                TimeFunction::Constant(_) => true,
                TimeFunction::Polynomial(c) => c.iter().skip(2).all(|x| *x == 0.0),
                other => other.is_zero(),
            },
        }
    }
}

/// Labeled time basis; forcing terms are rational combinations of its columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeBasis {
    pub functions: Vec<BasisFn>,
    pub labels: Vec<String>,
}

impl TimeBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn push(&mut self, f: BasisFn, label: String) -> usize {
        self.functions.push(f);
        self.labels.push(label);
        self.functions.len() - 1
    }

    pub fn ramp_index(&self) -> Option<usize> {
        self.functions.iter().position(|f| *f == BasisFn::Ramp)
    }

    pub fn eval(&self, t: f64, order: usize) -> Vec<f64> {
        self.functions.iter().map(|f| f.eval(t, order)).collect()
    }
}
