//! Gauss–Legendre quadrature on intervals, with a dyadically graded
//! composite rule for integrands with an endpoint singularity.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

fn rule_cache() -> &'static Mutex<HashMap<usize, &'static GaussRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the `n`-point Gauss–Legendre rule, computed once and cached.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from the Chebyshev-based initial guess.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    assert!(n >= 1 && n <= 64, "unsupported Gauss-Legendre order {n}");
    let mut cache = rule_cache().lock().unwrap();
    cache.entry(n).or_insert_with(|| {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // initial guess for the i-th root (descending order)
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        nodes.reverse();
        weights.reverse();
        Box::leak(Box::new(GaussRule { nodes, weights }))
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    if n == 1 {
        return (x, 1.0);
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[a, b]` with a single `points`-point Gauss panel.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, points: usize, f: F) -> f64 {
    gauss_legendre(points).integrate(a, b, f)
}

/// Integrates `f` over `[a, b]` when `f` has an integrable singularity at
/// one endpoint. The interval is split into `levels` dyadic panels that
/// shrink geometrically towards the singular end, each handled by a
/// `points`-point Gauss rule; the innermost sliver is dropped (its
/// contribution is below round-off for algebraic singularities).
pub fn integrate_graded<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    singular_at_a: bool,
    points: usize,
    levels: usize,
    mut f: F,
) -> f64 {
    let rule = gauss_legendre(points);
    let len = b - a;
    let mut sum = 0.0;
    for j in 0..levels {
        let outer = len * 0.5f64.powi(j as i32);
        let inner = len * 0.5f64.powi(j as i32 + 1);
        let (lo, hi) = if singular_at_a {
            (a + inner, a + outer)
        } else {
            (b - outer, b - inner)
        };
        sum += rule.integrate(lo, hi, &mut f);
    }
    sum
}

/// Adaptive Simpson quadrature. Used as an independent oracle in tests and
/// nowhere on the production path.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        let s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        (m, fm, s)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_on_polynomials() {
        // an n-point rule integrates degree 2n-1 exactly
        for n in [1usize, 2, 3, 4, 8, 16] {
            let deg = 2 * n - 1;
            let got = integrate(0.0, 1.0, n, |x| x.powi(deg as i32));
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn gauss_matches_known_4_point_nodes() {
        let r = gauss_legendre(4);
        assert!((r.nodes[3] - 0.8611363115940526).abs() < 1e-15);
        assert!((r.weights[3] - 0.3478548451374538).abs() < 1e-15);
        assert!((r.nodes[2] - 0.3399810435848563).abs() < 1e-15);
        assert!((r.weights[2] - 0.6521451548625461).abs() < 1e-15);
    }

    #[test]
    fn graded_rule_handles_sqrt_singularity() {
        // int_0^1 sqrt(x) dx = 2/3, singular derivative at 0
        let got = integrate_graded(0.0, 1.0, true, 16, 40, |x| x.sqrt());
        assert!((got - 2.0 / 3.0).abs() < 1e-14, "got {got}");
        // and from the other side: int_0^1 sqrt(1-x) dx = 2/3
        let got = integrate_graded(0.0, 1.0, false, 16, 40, |x| (1.0 - x).sqrt());
        assert!((got - 2.0 / 3.0).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn adaptive_simpson_oracle_sanity() {
        let got = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-13);
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }
}
