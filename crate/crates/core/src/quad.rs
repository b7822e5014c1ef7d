//! Adaptive Gauss–Legendre quadrature.

use std::sync::OnceLock;

const ORDER: usize = 8;
const MAX_DEPTH: usize = 30;

/// Nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<f64, E> {
    let (x, w) = rule();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(mid + half * xi)?;
    }
    Ok(s * half)
}

fn recurse<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, E> {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m)?;
    let right = panel(f, m, b)?;
    let both = left + right;
    if depth >= MAX_DEPTH || (both - whole).abs() <= tol * both.abs().max(1.0) {
        return Ok(both);
    }
    Ok(recurse(f, a, m, left, tol, depth + 1)? + recurse(f, m, b, right, tol, depth + 1)?)
}

/// Integral of a fallible integrand with relative tolerance `tol`.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, E> {
    let whole = panel(&mut f, a, b)?;
    recurse(&mut f, a, b, whole, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let r: Result<f64, ()> = integrate(|x| Ok(x.powi(7) - 3.0 * x * x), 0.0, 2.0, 1e-14);
        assert!((r.unwrap() - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_on_oscillatory() {
        let r: Result<f64, ()> = integrate(|x| Ok((20.0 * x).sin()), 0.0, 3.0, 1e-13);
        let exact = (1.0 - (60.0f64).cos()) / 20.0;
        assert!((r.unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
