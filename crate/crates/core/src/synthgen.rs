//! Synthetic dataset generators for validation experiments, plus exact-law
//! ratio fixtures that bypass the geometry pipeline and feed the estimators
//! directly.
//!
//! All generators are bit-reproducible per seed: each builds one
//! [`SeedStream`][crate::rng::SeedStream] and draws in the documented
//! per-point order.

use crate::distributions::{pareto_sample, unit_ball_volume};
use crate::error::{Error, Result};
use crate::geometry::{ConsecutiveRatios, PointCloud, RatioSample};
use crate::rng::SeedStream;

/// Default coordinate noise of [`spiral3d`]. The source construction adds
/// Gaussian noise of unstated magnitude; this default reproduces the
/// qualitative "noise inflates the estimate to about 3" behavior and is
/// overridable everywhere it is used.
pub const DEFAULT_SPIRAL_NOISE_SD: f64 = 0.01;

/// Spiral curve in three dimensions: `x = u cos u`, `y = u sin u`,
/// `z = x^2 + y^2` with `u ~ Uniform[1/(4 pi), 1]`, plus independent
/// Gaussian noise of standard deviation `noise_sd` on every coordinate.
/// One degree of freedom generates the data, so the noiseless intrinsic
/// dimension is 1. Draw order per point: `u`, then the three noise variates.
pub fn spiral3d(count: usize, noise_sd: f64, seed: u64) -> Result<PointCloud> {
    if count < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "need at least 2 points, got {count}"
        )));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be nonnegative, got {noise_sd}"
        )));
    }
    let lower = 1.0 / (4.0 * std::f64::consts::PI);
    let mut stream = SeedStream::new(seed);
    let mut data = Vec::with_capacity(count * 3);
    for _ in 0..count {
        let u = lower + (1.0 - lower) * stream.uniform();
        let x = u * u.cos();
        let y = u * u.sin();
        let z = x * x + y * y;
        data.push(x + noise_sd * stream.normal());
        data.push(y + noise_sd * stream.normal());
        data.push(z + noise_sd * stream.normal());
    }
    PointCloud::new(data, 3)
}

/// A realization of the homogeneous-process construction around a pivot at
/// the origin: `radii[j]` is the exact distance of point `j` from the pivot,
/// strictly increasing.
#[derive(Debug, Clone)]
pub struct PivotProcess {
    pub cloud: PointCloud,
    pub radii: Vec<f64>,
}

/// Generates `count` points around a pivot at the origin by drawing
/// hyperspherical shell volumes from Exponential(`rho`), accumulating them,
/// and inverting the ball-volume formula for the radius:
/// `r_j = (sum_{k<=j} v_k / w_d)^(1/d)`. Directions are uniform on the
/// sphere: a random sign for `d = 1`, a uniform angle in `[0, 2 pi)` for
/// `d = 2`, and a normalized Gaussian vector for `d >= 3`. Draw order per
/// point: the shell volume, then the direction draws.
pub fn pivot_process(count: usize, d: usize, rho: f64, seed: u64) -> Result<PivotProcess> {
    if count < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "need at least 2 points, got {count}"
        )));
    }
    if d < 1 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "process density must be positive, got {rho}"
        )));
    }
    let volume = unit_ball_volume(d as f64);
    let mut stream = SeedStream::new(seed);
    let mut data = Vec::with_capacity(count * d);
    let mut radii = Vec::with_capacity(count);
    let mut accumulated = 0.0;
    for _ in 0..count {
        accumulated += stream.exponential(rho);
        let radius = (accumulated / volume).powf(1.0 / d as f64);
        radii.push(radius);
        match d {
            1 => {
                let sign = if stream.uniform() < 0.5 { -1.0 } else { 1.0 };
                data.push(sign * radius);
            }
            2 => {
                let angle = std::f64::consts::TAU * stream.uniform();
                data.push(radius * angle.cos());
                data.push(radius * angle.sin());
            }
            _ => {
                let mut direction: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
                let mut norm: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                while norm == 0.0 {
                    direction = (0..d).map(|_| stream.normal()).collect();
                    norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                }
                data.extend(direction.iter().map(|x| radius * x / norm));
            }
        }
    }
    Ok(PivotProcess {
        cloud: PointCloud::new(data, d)?,
        radii,
    })
}

/// Standard Gaussian data on the first `signal_dim` columns, perturbed by
/// orthogonal Gaussian noise of variance `sigma2` on `noise_dim` extra
/// columns. Draw order per point: signal coordinates, then noise coordinates.
pub fn gaussian_orthonoise(
    count: usize,
    signal_dim: usize,
    noise_dim: usize,
    sigma2: f64,
    seed: u64,
) -> Result<PointCloud> {
    if count < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "need at least 2 points, got {count}"
        )));
    }
    if signal_dim < 1 {
        return Err(Error::InvalidArgument(
            "signal dimension must be at least 1".into(),
        ));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    let noise_sd = sigma2.sqrt();
    let mut stream = SeedStream::new(seed);
    let dim = signal_dim + noise_dim;
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for _ in 0..signal_dim {
            data.push(stream.normal());
        }
        for _ in 0..noise_dim {
            data.push(noise_sd * stream.normal());
        }
    }
    PointCloud::new(data, dim)
}

/// Uniform draws on the unit hypercube `[0, 1)^d`, row-major draw order.
pub fn uniform_hypercube(count: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if count < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "need at least 2 points, got {count}"
        )));
    }
    if d < 1 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let mut stream = SeedStream::new(seed);
    let data: Vec<f64> = (0..count * d).map(|_| stream.uniform()).collect();
    PointCloud::new(data, d)
}

/// Exact-law TWO-NN ratio fixture: `count` i.i.d. Pareto(1, `d`) ratios with
/// orders (1, 2). The mean scale is a placeholder 1.0 because no distances
/// exist. Used as an estimator oracle that bypasses geometry entirely.
pub fn pareto_ratio_fixture(count: usize, d: f64, seed: u64) -> Result<RatioSample> {
    RatioSample::new(pareto_sample(d, count, seed)?, 1, 2, 1.0)
}

/// Exact-law consecutive-ratio fixture: row `i` holds independent draws
/// `mu_{i,l} ~ Pareto(1, (l-1) d)` for `l = 2..=max_order`, drawn row-major.
pub fn consecutive_fixture(
    count: usize,
    max_order: usize,
    d: f64,
    seed: u64,
) -> Result<ConsecutiveRatios> {
    if max_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "consecutive ratios need L >= 2, got {max_order}"
        )));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dimension must be positive, got {d}"
        )));
    }
    let mut stream = SeedStream::new(seed);
    let mut values = Vec::with_capacity(count * (max_order - 1));
    for _ in 0..count {
        for l in 2..=max_order {
            values.push(stream.pareto((l - 1) as f64 * d));
        }
    }
    ConsecutiveRatios::new(values, max_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    #[test]
    fn noiseless_spiral_lies_on_the_surface() {
        let cloud = spiral3d(500, 0.0, 3).unwrap();
        let lower = 1.0 / (4.0 * std::f64::consts::PI);
        for row in cloud.rows() {
            let (x, y, z) = (row[0], row[1], row[2]);
            assert!((z - (x * x + y * y)).abs() < 1e-12);
            let u = (x * x + y * y).sqrt();
            assert!((lower - 1e-12..=1.0 + 1e-12).contains(&u), "u = {u}");
        }
    }

    #[test]
    fn spiral_is_reproducible_per_seed() {
        let a = spiral3d(100, DEFAULT_SPIRAL_NOISE_SD, 5).unwrap();
        let b = spiral3d(100, DEFAULT_SPIRAL_NOISE_SD, 5).unwrap();
        assert_eq!(a, b);
        let c = spiral3d(100, DEFAULT_SPIRAL_NOISE_SD, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pivot_radii_match_the_cloud_and_increase() {
        for d in [1usize, 2, 3, 5] {
            let process = pivot_process(200, d, 1.5, 11).unwrap();
            assert_eq!(process.cloud.dim(), d);
            let mut last = 0.0;
            for (row, &radius) in process.cloud.rows().zip(&process.radii) {
                let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - radius).abs() <= 1e-12 * radius.max(1.0));
                assert!(radius > last);
                last = radius;
            }
        }
    }

    #[test]
    fn gaussian_columns_have_the_requested_variances() {
        let cloud = gaussian_orthonoise(20_000, 2, 1, 1e-4, 9).unwrap();
        for column in 0..2 {
            let values: Vec<f64> = cloud.rows().map(|r| r[column]).collect();
            let var = crate::stats::variance(&values);
            assert!((var - 1.0).abs() < 0.05, "signal variance {var}");
        }
        let noise: Vec<f64> = cloud.rows().map(|r| r[2]).collect();
        let sd = crate::stats::std_dev(&noise);
        assert!((sd - 0.01).abs() < 0.0005, "noise sd {sd}");

        let pure = gaussian_orthonoise(5_000, 2, 0, 0.0, 9).unwrap();
        assert_eq!(pure.dim(), 2);
    }

    #[test]
    fn hypercube_stays_in_the_unit_box() {
        let cloud = uniform_hypercube(1_000, 3, 4).unwrap();
        assert!(cloud.rows().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn pareto_fixture_mean_matches_the_ratio_law() {
        let fixture = pareto_ratio_fixture(200_000, 3.0, 31).unwrap();
        // E[mu] = d/(d-1) = 1.5
        let m = mean(fixture.values());
        assert!((m - 1.5).abs() < 0.01, "mean {m}");
        assert_eq!((fixture.n1(), fixture.n2()), (1, 2));
    }

    #[test]
    fn consecutive_fixture_columns_are_uncorrelated() {
        let n = 20_000;
        let fixture = consecutive_fixture(n, 4, 2.0, 77).unwrap();
        let col = |l: usize| -> Vec<f64> { (0..n).map(|i| fixture.value(i, l)).collect() };
        for (a, b) in [(2usize, 3usize), (2, 4), (3, 4)] {
            let (xs, ys) = (col(a), col(b));
            let (mx, my) = (mean(&xs), mean(&ys));
            let cov: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let corr = cov / (crate::stats::std_dev(&xs) * crate::stats::std_dev(&ys));
            assert!(
                corr.abs() < 3.0 / (n as f64).sqrt(),
                "columns {a},{b} correlate: {corr}"
            );
        }
    }
}
