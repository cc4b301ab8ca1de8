//! Shared test oracles: adaptive quadrature, density integrals, and a random
//! rigid motion. These stay independent of the implementation paths they
//! check: quadrature sees the densities only as black-box functions.

use idest::distributions::{gride_logpdf, GrideParams};
use idest::geometry::PointCloud;
use idest::rng::SeedStream;

/// Adaptive Simpson quadrature over a 64-panel uniform pre-split, so narrow
/// density bumps cannot slip between the initial sample points.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        m: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = simpson(f, a, lm, m);
        let right = simpson(f, m, rm, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, lm, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, rm, b, right, tol / 2.0, depth - 1)
        }
    }
    const PANELS: usize = 64;
    let width = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let lo = a + i as f64 * width;
        let hi = lo + width;
        let mid = 0.5 * (lo + hi);
        total += recurse(
            f,
            lo,
            mid,
            hi,
            simpson(f, lo, mid, hi),
            tol / PANELS as f64,
            34,
        );
    }
    total
}

/// Numeric integral of the generic-ratio density over its support (1, inf),
/// via the substitution y = ln(mu): integrand exp(logpdf(e^y) + y) on (0, Y)
/// with Y chosen so the dropped tail is below 1e-9.
pub fn gride_density_integral(params: &GrideParams) -> f64 {
    // Tail bound: density <= d/B * mu^(-n1 d - 1), so the mass beyond M is
    // at most M^(-n1 d) / (n1 B).
    let n1d = params.n1() as f64 * params.d();
    let ln_beta =
        statrs::function::beta::ln_beta((params.n2() - params.n1()) as f64, params.n1() as f64);
    let upper = ((9.0 * std::f64::consts::LN_10 - ln_beta - (params.n1() as f64).ln()) / n1d)
        .max(1.0 / n1d)
        + 5.0 / n1d;
    let integrand = |y: f64| {
        if y <= 0.0 {
            0.0
        } else {
            (gride_logpdf(y.exp(), params).expect("in support") + y).exp()
        }
    };
    adaptive_simpson(&integrand, 1e-12, upper, 1e-10)
}

/// Applies a seeded random rotation plus translation to a cloud.
pub fn random_rigid_motion(cloud: &PointCloud, seed: u64) -> PointCloud {
    let dim = cloud.dim();
    let mut stream = SeedStream::new(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| stream.normal()).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
        }
    }
    let shift: Vec<f64> = (0..dim).map(|_| 5.0 * stream.normal()).collect();
    let mut data = Vec::with_capacity(cloud.len() * dim);
    for row in cloud.rows() {
        for (axis, b) in basis.iter().enumerate() {
            let coord: f64 = row.iter().zip(b).map(|(x, y)| x * y).sum();
            data.push(coord + shift[axis]);
        }
    }
    PointCloud::new(data, dim).expect("rigid motion preserves validity")
}

#[allow(dead_code)]
pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: expected {expected}, got {actual} (tol {tol})"
    );
}
