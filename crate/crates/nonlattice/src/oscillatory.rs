//! Fourier and theta-function machinery behind the oscillatory correction.
//!
//! The centered fractional part has the sawtooth series
//! `frac(x) - 1/2 = -sum_k sin(2 pi k x)/(k pi)` at non-integral `x`;
//! pushing that through the theta-weighted correction sum and applying
//! Poisson summation collapses each harmonic to a closed Gaussian-damped
//! sine. The truncated result is the rapidly converging series evaluated
//! by [`lambda_series`], and its value at resonant points (where the
//! leading sine is exactly `+-1`) witnesses the lower bound on the
//! distance between the exact law and the plain normal limit.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::numerics::{frac_unchecked, std_normal_pdf, CompensatedSum};
use crate::{Error, Result};

const SQRT_3_HALVES: f64 = 1.224_744_871_391_589_1;

/// `sin(2 pi x)` with exact zeros at integer and half-integer `x`.
///
/// Reduction to `u = x - round(x)` keeps the argument small (so the libm
/// sine is accurate for huge phases) and makes resonance structure exact:
/// quarter-integer `u` gives `+-1.0` and half-integers give `0.0`.
#[inline]
pub(crate) fn sin_2pi(x: f64) -> f64 {
    let u = x - x.round();
    if u == 0.0 || u.abs() == 0.5 {
        return 0.0;
    }
    (std::f64::consts::TAU * u).sin()
}

#[inline]
fn cos_2pi(x: f64) -> f64 {
    let u = x - x.round();
    (std::f64::consts::TAU * u).cos()
}

/// Truncated sawtooth series `-sum_{k=1}^{K} sin(2 pi k x)/(k pi)`.
///
/// Converges to `frac(x) - 1/2` at non-integral `x >= 0`; at integers
/// every term vanishes and the sum sits at the midpoint 0 instead of the
/// one-sided value -1/2.
pub fn tau_series(x: f64, terms: u32) -> f64 {
    debug_assert!(x >= 0.0 && terms >= 1);
    let mut acc = CompensatedSum::new();
    for k in 1..=terms {
        acc.add(sin_2pi(k as f64 * x) / (k as f64 * std::f64::consts::PI));
    }
    -acc.value()
}

/// Both sides of the Gaussian Poisson summation identity
/// `sum_m exp(-z m^2 + i 2 pi m b) = sqrt(pi/z) sum_l exp(-pi^2 (l-b)^2 / z)`.
#[derive(Debug, Clone, Copy)]
pub struct PoissonPair {
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// summation radius used on the exponential-sum side
    pub lhs_radius: u32,
    /// summation radius used on the dual side
    pub rhs_radius: u32,
}

/// Evaluate both sides of Poisson's formula with truncation radii chosen
/// so the first omitted term is below `tol * 1e-2`; by construction the
/// two values then agree within `tol`.
pub fn poisson_theta_pair(z: f64, b: f64, tol: f64) -> Result<PoissonPair> {
    if !(z > 0.0) {
        return Err(Error::domain(format!(
            "poisson_theta_pair: z = {z} must be > 0"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "poisson_theta_pair: tol = {tol} must be > 0"
        )));
    }
    let cutoff = tol * 1e-2;
    // reduce b mod 1: both sides are exactly periodic in b
    let b = frac_unchecked(b.rem_euclid(1.0).max(0.0));

    // lhs: opposite m pair to keep the imaginary parts cancelling exactly
    let m_radius = ((cutoff.recip().ln() / z).sqrt().ceil() as u32).max(1);
    let mut re = CompensatedSum::new();
    re.add(1.0);
    for m in 1..=m_radius {
        let damp = (-z * (m as f64) * (m as f64)).exp();
        if damp == 0.0 {
            break;
        }
        re.add(2.0 * damp * cos_2pi(m as f64 * b));
    }
    let lhs = Complex64::new(re.value(), 0.0);

    // rhs: window centered on the closest integer to b
    let scale = (std::f64::consts::PI / z).sqrt();
    let per_term_cut = cutoff / scale;
    let spread = (z * per_term_cut.recip().ln()).sqrt() / std::f64::consts::PI;
    let l_radius = (spread.ceil() as i64).max(1);
    let center = b.round() as i64;
    let mut sum = CompensatedSum::new();
    for l in (center - l_radius)..=(center + l_radius) {
        let dev = l as f64 - b;
        sum.add((-std::f64::consts::PI.powi(2) * dev * dev / z).exp());
    }
    let rhs = Complex64::new(scale * sum.value(), 0.0);

    Ok(PoissonPair {
        lhs,
        rhs,
        lhs_radius: m_radius,
        rhs_radius: l_radius as u32,
    })
}

/// One harmonic of the correction in both representations.
#[derive(Debug, Clone, Copy)]
pub struct ThetaTerm {
    /// truncated theta sum `(3/sqrt(pi N)) sum_m exp(-9 m^2/N)
    /// sin(d0 + 2 pi d1 m)`
    pub exact: f64,
    /// the dominant dual term `exp(-pi^2 k^2 w^2 / 6) sin(d0)`
    pub closed: f64,
    /// symmetric truncation radius of the exact sum
    pub radius: u32,
}

/// Evaluate harmonic `k` of the correction at `w` both as the raw theta
/// sum and as its closed Poisson-dual principal term, for error
/// measurement. Terms are added symmetrically until they drop below
/// 1e-18.
pub fn theta_term(n_total: u64, k: u32, w: f64) -> ThetaTerm {
    debug_assert!(n_total >= 3 && k >= 1 && w > 0.0);
    let n = n_total as f64;
    // phases in turns: sin(2 pi x) with x = k w sqrt(2N/3) + k w sqrt(3/2)/sqrt(N) * m;
    // the k * (w * s) association matches lambda_series bit for bit
    let turns0 = k as f64 * (w * (2.0 * n / 3.0).sqrt());
    let dual_freq = k as f64 * (w * (1.5f64).sqrt() / n.sqrt());

    let radius = ((n * 1e-18f64.recip().ln() / 9.0).sqrt().ceil()) as i64;
    let mut acc = CompensatedSum::new();
    for m in -radius..=radius {
        let damp = (-9.0 * (m as f64) * (m as f64) / n).exp();
        acc.add(damp * sin_2pi(turns0 + dual_freq * m as f64));
    }
    let exact = 3.0 / (std::f64::consts::PI * n).sqrt() * acc.value();

    let closed =
        (-std::f64::consts::PI.powi(2) * (k as f64 * w).powi(2) / 6.0).exp() * sin_2pi(turns0);
    ThetaTerm {
        exact,
        closed,
        radius: radius as u32,
    }
}

/// A user-supplied truncation kernel `(k, M) -> factor`.
pub type KernelFn = Arc<dyn Fn(u32, u32) -> f64 + Send + Sync>;

/// Truncation kernel `f(k, M)` applied to each harmonic.
#[derive(Clone)]
pub enum KernelChoice {
    /// plain truncation, `f = 1`
    Unit,
    /// `exp(-(k/M)^(2/3))`, the smooth illustration kernel
    Figure1,
    Custom(KernelFn),
}

impl KernelChoice {
    pub fn evaluate(&self, k: u32, truncation: u32) -> f64 {
        match self {
            KernelChoice::Unit => 1.0,
            KernelChoice::Figure1 => (-(k as f64 / truncation as f64).powf(2.0 / 3.0)).exp(),
            KernelChoice::Custom(f) => f(k, truncation),
        }
    }
}

impl fmt::Debug for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelChoice::Unit => write!(f, "Unit"),
            KernelChoice::Figure1 => write!(f, "Figure1"),
            KernelChoice::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Truncation order and kernel for the harmonic series.
#[derive(Debug, Clone)]
pub struct SeriesConfig {
    pub truncation: u32,
    pub kernel: KernelChoice,
}

impl SeriesConfig {
    /// Default configuration for sample size `N`: `M = floor(log N)` and
    /// the unit kernel.
    pub fn for_sample_size(n_total: u64) -> Self {
        SeriesConfig {
            truncation: ((n_total as f64).ln().floor() as u32).max(1),
            kernel: KernelChoice::Unit,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelChoice) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_truncation(mut self, truncation: u32) -> Self {
        assert!(truncation >= 1);
        self.truncation = truncation;
        self
    }
}

/// Truncated harmonic series for the correction term:
/// `sqrt(3/2) pdf(w) sum_{k=1}^{M} f(k,M)/(pi k) exp(-pi^2 k^2 w^2/6)
/// sin(2 pi k w sqrt(2N/3))`.
pub fn lambda_series(n_total: u64, w: f64, cfg: &SeriesConfig) -> f64 {
    debug_assert!(n_total >= 3 && w > 0.0);
    let base_turns = w * (2.0 * n_total as f64 / 3.0).sqrt();
    let mut acc = CompensatedSum::new();
    for k in 1..=cfg.truncation {
        let kf = k as f64;
        let damp = (-std::f64::consts::PI.powi(2) * kf * kf * w * w / 6.0).exp();
        acc.add(
            cfg.kernel.evaluate(k, cfg.truncation) / (std::f64::consts::PI * kf)
                * damp
                * sin_2pi(kf * base_turns),
        );
    }
    SQRT_3_HALVES * std_normal_pdf(w) * acc.value()
}

/// A resonance witness: the scan point maximizing `|lambda|` and bounds
/// on the leading harmonic there.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Witness {
    pub n: u64,
    pub w_star: f64,
    /// `|lambda(w_star)|`
    pub value: f64,
    /// magnitude of the `k = 1` term at `w_star` (its sine is exactly 1)
    pub k1_envelope: f64,
    /// sum of the `k >= 2` term magnitudes at `w_star`
    pub tail_bound: f64,
}

/// Scan the resonant points `w = j / (4 sqrt(2N/3))`, `j` odd, over
/// `w in [1, 3]`: there the `k = 1` sine is exactly `+-1` and `|lambda|`
/// is bounded away from zero. Requires `N` divisible by 3.
pub fn lower_bound_witness(n_total: u64, cfg: &SeriesConfig) -> Result<Witness> {
    if !n_total.is_multiple_of(3) || n_total == 0 {
        return Err(Error::domain(format!(
            "lower_bound_witness: N = {n_total} must be divisible by 3"
        )));
    }
    let s = (2.0 * n_total as f64 / 3.0).sqrt();
    let mut j = (4.0 * s).ceil() as u64;
    if j.is_multiple_of(2) {
        j += 1;
    }
    let mut best: Option<(f64, f64)> = None;
    loop {
        let w = j as f64 / (4.0 * s);
        if w > 3.0 {
            break;
        }
        let value = lambda_series(n_total, w, cfg).abs();
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((w, value));
        }
        j += 2;
    }
    let (w_star, value) =
        best.ok_or_else(|| Error::domain("lower_bound_witness: empty scan range".to_string()))?;

    let damp = |k: f64| (-std::f64::consts::PI.powi(2) * k * k * w_star * w_star / 6.0).exp();
    let envelope_scale = SQRT_3_HALVES * std_normal_pdf(w_star);
    let k1_envelope =
        envelope_scale * cfg.kernel.evaluate(1, cfg.truncation) * damp(1.0) / std::f64::consts::PI;
    let mut tail = 0.0;
    for k in 2..=cfg.truncation {
        tail += envelope_scale * cfg.kernel.evaluate(k, cfg.truncation) * damp(k as f64)
            / (std::f64::consts::PI * k as f64);
    }
    Ok(Witness {
        n: n_total,
        w_star,
        value,
        k1_envelope,
        tail_bound: tail,
    })
}

/// CSV export `w,lambda` of the harmonic series over a uniform grid.
pub fn write_lambda_csv<W: Write>(
    n_total: u64,
    cfg: &SeriesConfig,
    w_min: f64,
    w_max: f64,
    step: f64,
    mut out: W,
) -> Result<()> {
    if !(step > 0.0) || !(w_max >= w_min) || !(w_min > 0.0) {
        return Err(Error::domain(format!(
            "lambda csv: need 0 < w_min <= w_max and step > 0, got [{w_min}, {w_max}] step {step}"
        )));
    }
    use crate::exact_law::fmt17;
    writeln!(out, "w,lambda")?;
    let count = ((w_max - w_min) / step).round() as u64;
    for i in 0..=count {
        let w = w_min + i as f64 * step;
        if w <= w_max + step * 1e-9 {
            writeln!(
                out,
                "{},{}",
                fmt17(w),
                fmt17(lambda_series(n_total, w, cfg))
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::frac_unchecked;
    use rand::{Rng, SeedableRng};

    #[test]
    fn tau_vanishes_at_half_integers() {
        for terms in [1u32, 10, 100_000] {
            assert_eq!(tau_series(0.5, terms), 0.0);
        }
        // frac(0.5) - 1/2 = 0: the series hits it exactly
    }

    #[test]
    fn tau_converges_at_quarter() {
        let got = tau_series(0.25, 100_000);
        assert!((got - (-0.25)).abs() < 2e-5, "{got}");
    }

    #[test]
    fn tau_midpoint_at_integers() {
        // all terms vanish at integer x; the one-sided value -1/2 is not
        // reproduced — the series converges to the midpoint 0
        let got = tau_series(2.0, 100_000);
        assert!(got.abs() < 1e-12, "{got}");
    }

    #[test]
    fn tau_convergence_rate() {
        // |partial sum error| <= C / (K dist(x, Z)) for one fitted C
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..100)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..10.0);
                // keep a minimum distance from integers so dist is meaningful
                let d = (x - x.round()).abs();
                if d < 1e-3 {
                    x + 0.01
                } else {
                    x
                }
            })
            .collect();
        let dist = |x: f64| (x - x.round()).abs();
        let c_at = |k: u32| -> f64 {
            xs.iter()
                .map(|&x| {
                    let err = (tau_series(x, k) - (frac_unchecked(x) - 0.5)).abs();
                    err * k as f64 * dist(x)
                })
                .fold(0.0, f64::max)
        };
        let c = c_at(1000);
        for k in [10_000u32, 100_000] {
            let ck = c_at(k);
            assert!(ck <= c * 1.6 + 0.02, "K={k}: fitted {ck} vs base {c}");
        }
    }

    #[test]
    fn poisson_self_dual_point() {
        let pair = poisson_theta_pair(std::f64::consts::PI, 0.0, 1e-12).unwrap();
        assert!((pair.lhs - pair.rhs).norm() < 1e-14);
        // theta constant sum_m exp(-pi m^2)
        assert!((pair.lhs.re - 1.086_434_8).abs() < 1e-6);
        assert_eq!(pair.lhs.im, 0.0);
    }

    #[test]
    fn poisson_identity_small_z() {
        let pair = poisson_theta_pair(9.0 / 300.0, 0.2, 1e-12).unwrap();
        assert!((pair.lhs - pair.rhs).norm() <= 1e-12);
    }

    #[test]
    fn poisson_periodic_in_b() {
        // dyadic b so that b + 1 is exact in floating point
        let a = poisson_theta_pair(0.7, 0.25, 1e-12).unwrap();
        let b = poisson_theta_pair(0.7, 1.25, 1e-12).unwrap();
        assert_eq!(a.lhs, b.lhs);
        assert!((a.rhs - b.rhs).norm() < 1e-15);
    }

    #[test]
    fn poisson_identity_random_inputs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let z = 10f64.powf(rng.random_range(-3.0..1.0));
            let b: f64 = rng.random_range(0.0..1.0);
            let pair = poisson_theta_pair(z, b, 1e-12).unwrap();
            assert!(
                (pair.lhs - pair.rhs).norm() <= 1e-12,
                "z={z} b={b}: {} vs {}",
                pair.lhs.re,
                pair.rhs.re
            );
        }
    }

    #[test]
    fn poisson_rejects_bad_domain() {
        assert!(poisson_theta_pair(0.0, 0.1, 1e-12).is_err());
        assert!(poisson_theta_pair(-1.0, 0.1, 1e-12).is_err());
        assert!(poisson_theta_pair(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn theta_term_gaussian_damping() {
        let t = theta_term(300, 1, 6.0);
        // the closed form is damped below 1e-25 outright; the raw sum
        // reaches the same value only up to the f64 cancellation floor of
        // its O(1)-sized terms
        assert!(t.closed.abs() < 1e-25);
        assert!(t.exact.abs() < 1e-13);
    }

    #[test]
    fn theta_term_residual_shrinks_with_n() {
        let residual = |n: u64| -> f64 {
            let m = (n as f64).ln().floor() as u32;
            let mut worst: f64 = 0.0;
            for k in 1..=m {
                for w in [0.5, 1.0, 2.0] {
                    let t = theta_term(n, k, w);
                    worst = worst.max((t.exact - t.closed).abs());
                }
            }
            worst
        };
        let r300 = residual(300);
        let r1000 = residual(1000);
        let r3000 = residual(3000);
        assert!(r1000 <= r300 && r3000 <= r1000, "{r300} {r1000} {r3000}");
        assert!(r3000 < r300 / 2.0);
    }

    #[test]
    fn theta_term_periodic_collapse() {
        // when the dual frequency is an integer the sine arguments repeat
        // mod 1 and the sum collapses onto sin(d0) times the damp total
        let n = 3000u64;
        let k = 1u32;
        // d1 = k w sqrt(3/2)/sqrt(N) = 1  =>  w = sqrt(N)/sqrt(3/2)
        let w = (n as f64).sqrt() / (1.5f64).sqrt();
        let t = theta_term(n, k, w);
        let turns0 = k as f64 * w * (2.0 * n as f64 / 3.0).sqrt();
        let mut total = 0.0;
        let r = t.radius as i64;
        for m in -r..=r {
            total += (-9.0 * (m as f64) * (m as f64) / n as f64).exp();
        }
        let want = 3.0 / (std::f64::consts::PI * n as f64).sqrt() * sin_2pi(turns0) * total;
        assert!((t.exact - want).abs() < 1e-12);
    }

    #[test]
    fn lambda_series_exact_zero_at_integer_resonance() {
        // N = 24: sqrt(2N/3) = 4 exactly; w = 3/4 makes every k w sqrt(2N/3)
        // a multiple of 1/2, where the reduced sine vanishes exactly
        let cfg = SeriesConfig::for_sample_size(24);
        assert_eq!(lambda_series(24, 0.75, &cfg), 0.0);
        let cfg10 = cfg.with_truncation(10);
        assert_eq!(lambda_series(24, 1.5, &cfg10), 0.0);
    }

    #[test]
    fn lambda_series_k1_dominates_at_w_ge_1() {
        let n = 300u64;
        let cfg = SeriesConfig::for_sample_size(n);
        for w in [1.0f64, 1.3, 2.0] {
            let full = lambda_series(n, w, &cfg);
            let k1 = {
                let one = SeriesConfig {
                    truncation: 1,
                    kernel: KernelChoice::Unit,
                };
                lambda_series(n, w, &one)
            };
            let bound = 0.02 * std_normal_pdf(w);
            assert!((full - k1).abs() <= bound, "w={w}");
        }
    }

    #[test]
    fn kernels_bounded_and_near_one() {
        let m = 10;
        for k in 1..=m {
            let unit = KernelChoice::Unit.evaluate(k, m);
            let fig = KernelChoice::Figure1.evaluate(k, m);
            assert_eq!(unit, 1.0);
            assert!(fig > 0.0 && fig <= 1.0);
        }
        // quadratic smallness near k << M holds for the unit kernel only;
        // the illustration kernel has a (k/M)^(2/3) deficit by design
        let big_m = 1000;
        let deficit = 1.0 - KernelChoice::Figure1.evaluate(1, big_m);
        assert!(deficit > 1.0 / (big_m as f64).powi(2) * 100.0);
    }

    #[test]
    fn witness_requires_divisibility() {
        let cfg = SeriesConfig::for_sample_size(100);
        assert!(lower_bound_witness(100, &cfg).is_err());
    }

    #[test]
    fn witness_at_n300() {
        let cfg = SeriesConfig::for_sample_size(300);
        let w = lower_bound_witness(300, &cfg).unwrap();
        assert!(w.value > 0.0);
        assert!(w.w_star >= 1.0 && w.w_star <= 3.0);
        // j/(4 sqrt(200)) with odd j
        let s = (200f64).sqrt();
        let j = w.w_star * 4.0 * s;
        assert!((j - j.round()).abs() < 1e-9);
        assert_eq!(j.round() as u64 % 2, 1);
        // the k = 1 sine is exactly +-1 there
        let turns = w.w_star * s;
        let sine = sin_2pi(turns);
        assert_eq!(sine.abs(), 1.0);
        // explicit k=1 term minus geometric tail is a valid floor
        assert!(w.value >= 0.9 * w.k1_envelope - w.tail_bound);
    }

    #[test]
    fn witness_envelope_independent_of_n() {
        // the k=1 envelope at fixed w does not involve N
        let w = 1.37f64;
        let env = |_n: u64| {
            SQRT_3_HALVES * std_normal_pdf(w) * (-std::f64::consts::PI.powi(2) * w * w / 6.0).exp()
                / std::f64::consts::PI
        };
        assert_eq!(env(300), env(1200));
    }

    #[test]
    fn series_wired_back_through_theta_terms() {
        // wiring check: replace frac by its K=M sawtooth inside the direct
        // correction sum, collapse each harmonic through the theta
        // identity, and compare against the closed-form series. With the
        // linearized phase the gap is exactly the per-harmonic residual
        // budget; against the true phases it is the coarser remainder of
        // the harmonic representation itself.
        let n = 3000u64;
        let w = 1.0f64;
        let cfg = SeriesConfig::for_sample_size(n);
        let m = cfg.truncation;
        let series = lambda_series(n, w, &cfg);
        let scale = SQRT_3_HALVES * std_normal_pdf(w);

        // harmonic-by-harmonic theta collapse
        let mut collapsed = 0.0;
        let mut budget = 0.0;
        for k in 1..=m {
            let t = theta_term(n, k, w);
            collapsed += scale * t.exact / (std::f64::consts::PI * k as f64);
            budget += scale * (t.exact - t.closed).abs() / (std::f64::consts::PI * k as f64);
        }
        assert!(
            (series - collapsed).abs() <= budget + 1e-13,
            "series={series} collapsed={collapsed} budget={budget}"
        );

        // direct two-index sum with the true sqrt(2n) phases: agreement at
        // the order of the dropped remainder, far looser
        let tw = crate::expansion::ThetaWeights::new(n);
        let mut s = 0.0;
        for k in 1..=m {
            let mut inner = CompensatedSum::new();
            for (i, &wt) in tw.weights().iter().enumerate() {
                inner.add(wt * sin_2pi(k as f64 * (w * (2.0 * i as f64).sqrt())));
            }
            s += inner.value() / (std::f64::consts::PI * k as f64);
        }
        let wired = scale * s;
        assert!(
            (series - wired).abs() <= 0.05,
            "series={series} wired={wired}"
        );
    }

    #[test]
    fn lambda_csv_shape() {
        let cfg = SeriesConfig {
            truncation: 10,
            kernel: KernelChoice::Figure1,
        };
        let mut buf = Vec::new();
        write_lambda_csv(100, &cfg, 0.05, 2.34, 1e-3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "w,lambda");
        assert_eq!(lines.len(), 1 + 2291);
    }
}
