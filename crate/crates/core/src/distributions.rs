//! Probability kernels behind the ratio estimators.
//!
//! Under local homogeneity of the generating point process, the ratio of the
//! distances from a point to its `n2`-th and `n1`-th nearest neighbors has the
//! closed-form density implemented by [`gride_logpdf`]. Its special cases are
//! the Pareto law of consecutive ratios (`n2 = n1 + 1`) and the classic
//! second-to-first ratio law (`n1 = 1`, `n2 = 2`). The module also carries the
//! conjugate Gamma posterior machinery, the Lomax posterior predictive, the
//! hypoexponential form of the log-ratio used as an algebraic cross-check, the
//! Beta-prime transform, and the Generalized Gamma law of a single neighbor
//! distance under a homogeneous process.
//!
//! Everything is evaluated in log space through `ln_gamma`; no factorials are
//! ever formed, so neighbor orders in the hundreds are safe.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Parameters of the generic-ratio law: intrinsic dimension `d` and the two
/// neighbor orders `n1 < n2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrideParams {
    d: f64,
    n1: usize,
    n2: usize,
}

impl GrideParams {
    pub fn new(d: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dimension must be positive and finite, got {d}"
            )));
        }
        if n1 < 1 || n2 <= n1 {
            return Err(Error::InvalidArgument(format!(
                "neighbor orders must satisfy 1 <= n1 < n2, got n1={n1}, n2={n2}"
            )));
        }
        Ok(Self { d, n1, n2 })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of consecutive ratios telescoping into the generic ratio.
    pub fn order_gap(&self) -> usize {
        self.n2 - self.n1
    }
}

/// Shape/rate pair of a Gamma posterior over the intrinsic dimension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PosteriorParams {
    shape: f64,
    rate: f64,
}

impl PosteriorParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "posterior parameters must be positive, got shape={shape}, rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// ln(e^t - 1), stable both for tiny and large `t > 0`.
fn ln_expm1(t: f64) -> f64 {
    if t <= std::f64::consts::LN_2 {
        t.exp_m1().ln()
    } else {
        t + (-(-t).exp()).ln_1p()
    }
}

// ---------------------------------------------------------------------------
// Pareto with unit scale
// ---------------------------------------------------------------------------

fn check_shape(shape: f64) -> Result<()> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "shape must be positive and finite, got {shape}"
        )));
    }
    Ok(())
}

/// Log-density of Pareto(scale 1, `shape`) at `x >= 1`.
pub fn pareto_logpdf(x: f64, shape: f64) -> Result<f64> {
    check_shape(shape)?;
    if !(x >= 1.0) {
        return Err(Error::Domain(format!(
            "Pareto support is [1, inf), got {x}"
        )));
    }
    Ok(shape.ln() - (shape + 1.0) * x.ln())
}

/// CDF of Pareto(scale 1, `shape`) at `x >= 1`.
pub fn pareto_cdf(x: f64, shape: f64) -> Result<f64> {
    check_shape(shape)?;
    if !(x >= 1.0) {
        return Err(Error::Domain(format!(
            "Pareto support is [1, inf), got {x}"
        )));
    }
    Ok(-(-shape * x.ln()).exp_m1())
}

/// Draws from Pareto(1, `shape`) by inversion, one uniform per draw.
pub fn pareto_sample(shape: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    check_shape(shape)?;
    let mut stream = SeedStream::new(seed);
    Ok((0..count).map(|_| stream.pareto(shape)).collect())
}

// ---------------------------------------------------------------------------
// Gamma / Inverse-Gamma
// ---------------------------------------------------------------------------

/// Log-density of Gamma(`shape`, rate `rate`) at `x > 0`.
pub fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gamma parameters must be positive, got shape={shape}, rate={rate}"
        )));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Gamma support is (0, inf), got {x}")));
    }
    Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x)
}

/// CDF of Gamma(`shape`, rate `rate`); zero for nonpositive `x`.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(shape, rate * x)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    let standard = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(standard.inverse_cdf(p))
}

/// Quantile of Gamma(`shape`, rate `rate`): bisection on the regularized
/// lower incomplete Gamma, started from a Wilson-Hilferty guess.
pub fn gamma_quantile(p: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gamma parameters must be positive, got shape={shape}, rate={rate}"
        )));
    }
    let cdf = |x: f64| gamma_lr(shape, x);
    let z = normal_quantile(p)?;
    let c = 1.0 - 1.0 / (9.0 * shape);
    let mut guess = shape * (c + z * (1.0 / (9.0 * shape)).sqrt()).powi(3);
    if !guess.is_finite() || guess <= 0.0 {
        guess = shape;
    }
    let mut lo = guess;
    let mut hi = guess;
    while lo > 1e-300 && cdf(lo) > p {
        lo *= 0.5;
    }
    while hi < 1e300 && cdf(hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / rate)
}

/// Quantile of InverseGamma(`shape`, `rate`), where `rate` is the numerator
/// parameter of the density `rate^shape / Gamma(shape) x^(-shape-1) e^(-rate/x)`.
/// Uses the reciprocal relation `q_IG(p; a, b) = b / q_Gamma(1 - p; a, 1)`.
pub fn inverse_gamma_quantile(p: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    let q = gamma_quantile(1.0 - p, shape, 1.0)?;
    Ok(rate / q)
}

/// Conjugate update of a Gamma(`prior_shape`, `prior_rate`) prior with
/// `n_eff` exponential-rate observations whose sufficient statistic is
/// `sum_stat` (a sum of weighted log-ratios).
pub fn gamma_posterior(
    prior_shape: f64,
    prior_rate: f64,
    n_eff: usize,
    sum_stat: f64,
) -> Result<PosteriorParams> {
    if !(prior_shape > 0.0 && prior_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prior hyperparameters must be positive, got shape={prior_shape}, rate={prior_rate}"
        )));
    }
    if !(sum_stat >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sufficient statistic must be nonnegative, got {sum_stat}"
        )));
    }
    PosteriorParams::new(prior_shape + n_eff as f64, prior_rate + sum_stat)
}

// ---------------------------------------------------------------------------
// Lomax posterior predictive
// ---------------------------------------------------------------------------

/// Log-density of the posterior predictive ratio: with posterior
/// Gamma(`a*`, `b*`), a future ratio has density
/// `a*/(b* mu) (1 + ln(mu)/b*)^(-a*-1)` on `(1, inf)`.
pub fn lomax_logpdf(mu_tilde: f64, params: &PosteriorParams) -> Result<f64> {
    if !(mu_tilde > 1.0) {
        return Err(Error::Domain(format!(
            "predictive ratio support is (1, inf), got {mu_tilde}"
        )));
    }
    let a = params.shape();
    let b = params.rate();
    Ok(a.ln() - b.ln() - mu_tilde.ln() + (-a - 1.0) * (mu_tilde.ln() / b).ln_1p())
}

/// Draws from the posterior predictive ratio law: the log-ratio is
/// Lomax(`a*`, `b*`), sampled by inversion (one uniform per draw) and
/// exponentiated.
pub fn lomax_predictive_sample(params: &PosteriorParams, count: usize, seed: u64) -> Vec<f64> {
    let a = params.shape();
    let b = params.rate();
    let mut stream = SeedStream::new(seed);
    (0..count)
        .map(|_| {
            let e = stream.exponential(a);
            (b * e.exp_m1()).exp()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Generic-ratio law
// ---------------------------------------------------------------------------

/// Log-density of the generic ratio `r_{n2} / r_{n1}` at `mu_dot > 1`:
///
/// ```text
/// f(mu) = d (mu^d - 1)^(n2-n1-1) / ( mu^((n2-1)d + 1) B(n2-n1, n1) )
/// ```
pub fn gride_logpdf(mu_dot: f64, params: &GrideParams) -> Result<f64> {
    if !(mu_dot > 1.0) {
        return Err(Error::Domain(format!(
            "ratio support is (1, inf), got {mu_dot}"
        )));
    }
    let d = params.d();
    let gap = params.order_gap();
    let log_ratio = mu_dot.ln();
    let mut lp = d.ln()
        - ((params.n2() as f64 - 1.0) * d + 1.0) * log_ratio
        - ln_beta(gap as f64, params.n1() as f64);
    if gap > 1 {
        lp += (gap - 1) as f64 * ln_expm1(d * log_ratio);
    }
    Ok(lp)
}

/// Log-likelihood of a ratio sample at dimension `d`, given the log-ratios.
/// This is the sum of [`gride_logpdf`] over the sample with the logarithms
/// hoisted out; the likelihood optimizer iterates on it.
pub fn gride_loglik(log_ratios: &[f64], d: f64, n1: usize, n2: usize) -> f64 {
    let n = log_ratios.len() as f64;
    let gap = n2 - n1;
    let slope = (n2 as f64 - 1.0) * d + 1.0;
    let mut ll = n * (d.ln() - ln_beta(gap as f64, n1 as f64));
    if gap > 1 {
        let w = (gap - 1) as f64;
        for &x in log_ratios {
            ll += w * ln_expm1(d * x) - slope * x;
        }
    } else {
        let sum: f64 = log_ratios.iter().sum();
        ll -= slope * sum;
    }
    ll
}

/// `k`-th moment of the generic ratio, `B(n2-n1, n1-k/d) / B(n2-n1, n1)`,
/// finite only for `k < d * n1`. The value diverges as `k` approaches the
/// bound, so results within about 1e-3 of `d * n1` are numerically unstable
/// even though they are returned.
pub fn gride_moment(k: u32, params: &GrideParams) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let d = params.d();
    let n1 = params.n1() as f64;
    let n2 = params.n2() as f64;
    let bound = d * n1;
    if k as f64 >= bound {
        return Err(Error::MomentUndefined { k, bound });
    }
    let shift = k as f64 / d;
    Ok((ln_gamma(n1 - shift) - ln_gamma(n2 - shift) + ln_gamma(n2) - ln_gamma(n1)).exp())
}

/// Exact draws from the generic-ratio law: the log-ratio is the sum of
/// independent exponentials with rates `n1 d, (n1+1) d, ..., (n2-1) d`
/// (the telescoping decomposition), drawn in ascending rate-index order.
pub fn gride_exact_sample(params: &GrideParams, count: usize, seed: u64) -> Vec<f64> {
    let d = params.d();
    let mut stream = SeedStream::new(seed);
    (0..count)
        .map(|_| {
            let mut y = 0.0;
            for l in params.n1()..params.n2() {
                y += stream.exponential(l as f64 * d);
            }
            y.exp()
        })
        .collect()
}

/// Log-density of the *log* generic ratio `Y = ln(r_{n2}/r_{n1})` in its
/// hypoexponential form: a signed sum of exponential terms with rates
/// `n1 d, ..., (n2-1) d`. Algebraically equal to `gride_logpdf(e^y) + y`, but
/// evaluated through an entirely different expression, so it serves as a
/// cross-check of the ratio density. The alternating sum is accurate for
/// moderate order gaps (tests exercise `n2 - n1 <= 6`); a precision loss is
/// reported as an error rather than returned as a bogus value.
pub fn hypoexp_logpdf_logratio(y: f64, params: &GrideParams) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!(
            "log-ratio support is (0, inf), got {y}"
        )));
    }
    let d = params.d();
    let n1 = params.n1();
    let gap = params.order_gap();
    let mut log_max = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(gap);
    for j in 1..=gap {
        let log_term =
            -((n1 + j - 1) as f64) * d * y - ln_gamma(j as f64) - ln_gamma((gap - j + 1) as f64);
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        log_max = log_max.max(log_term);
        terms.push((log_term, sign));
    }
    let total: f64 = terms
        .iter()
        .map(|(log_term, sign)| sign * (log_term - log_max).exp())
        .sum();
    if !(total > 0.0) {
        return Err(Error::EstimationFailed(format!(
            "hypoexponential alternating sum lost precision at y={y}, n1={n1}, n2={}",
            params.n2()
        )));
    }
    Ok(d.ln() + ln_gamma(params.n2() as f64) - ln_gamma(n1 as f64) + log_max + total.ln())
}

/// CDF of the Beta-prime(`n2-n1`, `n1`) law of `Z = mu^d - 1`, expressed
/// through the regularized incomplete Beta function at `z / (1 + z)`.
pub fn beta_prime_cdf(z: f64, params: &GrideParams) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    beta_reg(params.order_gap() as f64, params.n1() as f64, z / (1.0 + z))
}

/// Kolmogorov-Smirnov statistic of the transformed sample `mu^d - 1` against
/// the Beta-prime law it must follow when `samples` are generic ratios drawn
/// at the parameters in `params`.
pub fn beta_prime_transform_check(samples: &[f64], params: &GrideParams) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "beta-prime check needs a nonempty sample".into(),
        ));
    }
    let d = params.d();
    let transformed: Vec<f64> = samples.iter().map(|&mu| (d * mu.ln()).exp_m1()).collect();
    crate::stats::ks_statistic(&transformed, |z| beta_prime_cdf(z, params))
}

// ---------------------------------------------------------------------------
// Neighbor-distance marginal under a homogeneous process
// ---------------------------------------------------------------------------

/// Volume of the unit ball in `d` dimensions, `pi^(d/2) / Gamma(d/2 + 1)`.
/// Meaningful for `d >= 0`; callers validate.
pub fn unit_ball_volume(d: f64) -> f64 {
    ((d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0)).exp()
}

/// Log-density of the distance to the `order`-th nearest neighbor under a
/// homogeneous process of density `rho` on a `d`-dimensional support: a
/// Generalized Gamma law with power `d`, scale `(rho w_d)^(-1/d)` and shape
/// exponent `order * d`.
pub fn gen_gamma_logpdf(r: f64, d: f64, rho: f64, order: usize) -> Result<f64> {
    if !(d > 0.0 && rho > 0.0) || order < 1 {
        return Err(Error::InvalidArgument(format!(
            "need d > 0, rho > 0, order >= 1; got d={d}, rho={rho}, order={order}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "distance support is (0, inf), got {r}"
        )));
    }
    let volume_rate = rho * unit_ball_volume(d);
    let l = order as f64;
    Ok(
        d.ln() + l * volume_rate.ln() - ln_gamma(l) + (l * d - 1.0) * r.ln()
            - volume_rate * (d * r.ln()).exp(),
    )
}
