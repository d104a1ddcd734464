//! Closed-form limit quantities for the growing-group rules.

use crate::error::{Error, Result};
use crate::rules::{RuleKind, RuleSpec};

fn check_unit(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} = {x} outside [0, 1]")))
    }
}

/// Probability that the next majority admission lies below `q` when the median sits at `q`.
pub fn f_majority(q: f64) -> Result<f64> {
    check_unit(q, "q")?;
    Ok(if q <= 0.5 { 2.0 * q - 2.0 * q * q } else { 1.0 - 2.0 * q + 2.0 * q * q })
}

/// Probability that a veto step admits anyone when the driving quantile sits at `q`.
pub fn accept_any_veto(q: f64) -> Result<f64> {
    check_unit(q, "q")?;
    Ok(if q <= 0.5 { 2.0 * q * q } else { 1.0 - 2.0 * (1.0 - q) * (1.0 - q) })
}

/// Probability that an admitted veto candidate lies below `q`, given an
/// admission and a driving quantile at `q`. Defined for `q > 1/2` only.
pub fn f_veto(q: f64) -> Result<f64> {
    if !(q > 0.5 && q <= 1.0) {
        return Err(Error::domain(format!("f_veto needs q in (1/2, 1], got {q}")));
    }
    Ok(q * q / (1.0 - 2.0 * (1.0 - q) * (1.0 - q)))
}

/// Fixed point of [`f_veto`]: the limit of the `p`-quantile for `p > 1/2`.
pub fn tau(p: f64) -> Result<f64> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::domain(format!("tau needs p in (1/2, 1], got {p}")));
    }
    Ok((2.0 * p + (2.0 * p * p - p).sqrt()) / (1.0 + 2.0 * p))
}

/// CDF of the triangle law with density `4x` on `[0, 1/2]` and `4 − 4x` above.
pub fn triangle_cdf(x: f64) -> Result<f64> {
    check_unit(x, "x")?;
    Ok(if x <= 0.5 { 2.0 * x * x } else { 1.0 - 2.0 * (1.0 - x) * (1.0 - x) })
}

pub fn triangle_pdf(x: f64) -> Result<f64> {
    check_unit(x, "x")?;
    Ok(if x <= 0.5 { 4.0 * x } else { 4.0 - 4.0 * x })
}

fn check_truncation(x: f64, q: f64) -> Result<f64> {
    check_unit(x, "x")?;
    if !(q > 0.5 && q <= 1.0) {
        return Err(Error::domain(format!("truncated triangle needs q in (1/2, 1], got {q}")));
    }
    Ok(1.0 - 2.0 * (1.0 - q) * (1.0 - q))
}

/// Limit density of admitted veto members when the driving quantile is `q > 1/2`.
pub fn truncated_triangle_pdf(x: f64, q: f64) -> Result<f64> {
    let z = check_truncation(x, q)?;
    Ok(if x <= q { 2.0 * x / z } else { (4.0 * q - 2.0 * x) / z })
}

pub fn truncated_triangle_cdf(x: f64, q: f64) -> Result<f64> {
    let z = check_truncation(x, q)?;
    Ok(if x <= q {
        x * x / z
    } else {
        (q * q + 4.0 * q * (x - q) - (x * x - q * q)) / z
    })
}

/// A linear-gap constant below the fixed point for veto rules with `p ∈ (1/2, 1)`:
/// half of `√(2p² − p) + 1/2 − p`.
pub fn phi1_bound(p: f64) -> Result<f64> {
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::domain(format!("phi1 needs p in (1/2, 1), got {p}")));
    }
    Ok(((2.0 * p * p - p).sqrt() + 0.5 - p) / 2.0)
}

/// A linear-gap constant above the fixed point: `f_veto(τ + Δ) − p ≥ φ₂ Δ`
/// holds with `φ₂ = √(2p² − p)` (half the slope the algebra gives).
pub fn phi2_bound(p: f64) -> Result<f64> {
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::domain(format!("phi2 needs p in (1/2, 1), got {p}")));
    }
    Ok((2.0 * p * p - p).sqrt())
}

/// Which acceptance function a context evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptFn {
    Majority,
    Veto,
}

/// Closed forms for one smooth rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleContext {
    pub p: f64,
    pub tau: f64,
    pub f: AcceptFn,
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
}

impl OracleContext {
    pub fn majority() -> Self {
        Self {
            p: 0.5,
            tau: 0.5,
            f: AcceptFn::Majority,
            phi1: None,
            phi2: None,
        }
    }

    /// Veto with `r < 1/2`, i.e. `p = 1 − r > 1/2`.
    pub fn veto(r: f64) -> Result<Self> {
        let p = 1.0 - r;
        if !(p > 0.5 && p < 1.0) {
            return Err(Error::domain(format!(
                "veto closed forms need r in (0, 1/2), got {r}"
            )));
        }
        Ok(Self {
            p,
            tau: tau(p)?,
            f: AcceptFn::Veto,
            phi1: Some(phi1_bound(p)?),
            phi2: Some(phi2_bound(p)?),
        })
    }

    pub fn for_rule(rule: &RuleSpec) -> Result<Self> {
        match rule.kind() {
            RuleKind::Majority => Ok(Self::majority()),
            RuleKind::Veto { r } => Self::veto(*r),
            RuleKind::Consensus => Err(Error::unsupported("consensus has no closed-form acceptance function")),
            RuleKind::QuantileDriven { .. } => {
                Err(Error::unsupported("custom quantile-driven rules have no closed-form acceptance function"))
            }
        }
    }

    pub fn f(&self, q: f64) -> Result<f64> {
        match self.f {
            AcceptFn::Majority => f_majority(q),
            AcceptFn::Veto => f_veto(q),
        }
    }

    /// Lower end of `f`'s domain, its value there (a limit for veto), and the upper end.
    fn domain(&self) -> (f64, f64, f64) {
        match self.f {
            AcceptFn::Majority => (0.0, 0.0, 1.0),
            AcceptFn::Veto => (0.5, 0.5, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaps {
    pub g_r: f64,
    pub g_l: f64,
    /// Set when `τ ± Δ` left the domain of `f` and was clamped to its edge.
    pub clamped: bool,
}

/// `g_r(Δ) = p − f(τ − Δ)` and `g_l(Δ) = f(τ + Δ) − p`.
pub fn gap_functions(ctx: &OracleContext, delta: f64) -> Result<Gaps> {
    if !(delta >= 0.0) {
        return Err(Error::domain(format!("gap Δ = {delta} must be non-negative")));
    }
    let (lo, f_lo, hi) = ctx.domain();
    let mut clamped = false;
    let below = ctx.tau - delta;
    let f_below = if below <= lo {
        clamped = below < lo;
        f_lo
    } else {
        ctx.f(below)?
    };
    let above = ctx.tau + delta;
    let f_above = if above > hi {
        clamped = true;
        ctx.f(hi)?
    } else {
        ctx.f(above)?
    };
    Ok(Gaps {
        g_r: ctx.p - f_below,
        g_l: f_above - ctx.p,
        clamped,
    })
}

/// Where the driving quantile of `rule` ends up, when the theory pins it down.
///
/// Majority tends to `1/2`, veto with `p > 1/2` to `τ_p`, veto with `p < 1/2`
/// to `0`. Consensus and custom rules have no limit here.
pub fn limit_quantile(rule: &RuleSpec) -> Option<f64> {
    match rule.kind() {
        RuleKind::Majority => Some(0.5),
        RuleKind::Veto { r } => {
            let p = 1.0 - r;
            if p > 0.5 {
                tau(p).ok()
            } else if p < 0.5 {
                Some(0.0)
            } else {
                None
            }
        }
        RuleKind::Consensus | RuleKind::QuantileDriven { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn f_majority_values() {
        assert_eq!(f_majority(0.5).unwrap(), 0.5);
        assert_eq!(f_majority(0.0).unwrap(), 0.0);
        assert_eq!(f_majority(1.0).unwrap(), 1.0);
        assert!((f_majority(0.25).unwrap() - 0.375).abs() < 1e-15);
        assert!(f_majority(1.1).is_err());
    }

    #[test]
    fn accept_any_veto_values() {
        assert_eq!(accept_any_veto(0.5).unwrap(), 0.5);
        assert!((accept_any_veto(0.3).unwrap() - 0.18).abs() < 1e-15);
        assert!((accept_any_veto(0.8).unwrap() - 0.92).abs() < 1e-15);
        assert!(accept_any_veto(-0.1).is_err());
    }

    #[test]
    fn f_veto_values() {
        assert_eq!(f_veto(1.0).unwrap(), 1.0);
        assert!((f_veto(0.75).unwrap() - 0.5625 / 0.875).abs() < 1e-15);
        assert!(f_veto(0.5).is_err());
        assert!(f_veto(0.3).is_err());
    }

    #[test]
    fn tau_matches_bisection() {
        let t = tau(0.75).unwrap();
        let root = bisect(0.5 + 1e-12, 1.0, |q| f_veto(q).unwrap() - 0.75);
        assert!((t - root).abs() < 1e-12);
        assert!((t - 0.844_948_974_3).abs() < 1e-10);
        assert_eq!(tau(1.0).unwrap(), 1.0);
        assert!((tau(0.5 + 1e-12).unwrap() - 0.5).abs() < 1e-5);
        assert!(tau(0.5).is_err());
    }

    #[test]
    fn fixed_point_identity_on_grid() {
        for i in 1..=100 {
            let p = 0.5 + 0.5 * i as f64 / 100.0;
            let t = tau(p).unwrap();
            assert!((f_veto(t).unwrap() - p).abs() <= 1e-12, "p = {p}");
        }
    }

    #[test]
    fn triangle_cdf_values() {
        assert_eq!(triangle_cdf(0.5).unwrap(), 0.5);
        assert_eq!(triangle_cdf(0.0).unwrap(), 0.0);
        assert_eq!(triangle_cdf(1.0).unwrap(), 1.0);
        let integral = simpson(0.0, 0.25, 1000, |x| triangle_pdf(x).unwrap());
        assert!((triangle_cdf(0.25).unwrap() - integral).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let v = triangle_cdf(i as f64 / 10_000.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn truncated_triangle_consistency() {
        assert!((truncated_triangle_cdf(0.75, 0.75).unwrap() - f_veto(0.75).unwrap()).abs() < 1e-15);
        let t = tau(0.75).unwrap();
        assert!((truncated_triangle_cdf(t, t).unwrap() - 0.75).abs() < 1e-9);
        for i in 1..=49 {
            let q = 0.51 + 0.49 * i as f64 / 49.0;
            assert!((truncated_triangle_cdf(1.0, q).unwrap() - 1.0).abs() < 1e-12, "q = {q}");
            // density splits at q; integrate both pieces separately
            let mass = simpson(0.0, q, 2000, |x| truncated_triangle_pdf(x, q).unwrap())
                + simpson(q, 1.0, 2000, |x| truncated_triangle_pdf(x, q).unwrap());
            assert!((mass - 1.0).abs() < 1e-9);
            let x = 0.5 * (q + 1.0);
            let partial = simpson(0.0, q, 2000, |x| truncated_triangle_pdf(x, q).unwrap())
                + simpson(q, x, 2000, |x| truncated_triangle_pdf(x, q).unwrap());
            assert!((truncated_triangle_cdf(x, q).unwrap() - partial).abs() < 1e-9);
        }
        assert!(truncated_triangle_cdf(0.3, 0.5).is_err());
    }

    #[test]
    fn triangle_density_integrates_to_one() {
        let mass = simpson(0.0, 0.5, 1000, |x| triangle_pdf(x).unwrap()) + simpson(0.5, 1.0, 1000, |x| triangle_pdf(x).unwrap());
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_on_grid() {
        let mut prev = -1.0;
        for i in 0..=10_000 {
            let v = f_majority(i as f64 / 10_000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = -1.0;
        for i in 1..=10_000 {
            let v = f_veto(0.5 + 0.5 * i as f64 / 10_000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn gap_function_values() {
        let maj = OracleContext::majority();
        let g = gap_functions(&maj, 0.0).unwrap();
        assert_eq!((g.g_r, g.g_l), (0.0, 0.0));
        let g = gap_functions(&maj, 0.1).unwrap();
        assert!((g.g_r - 0.02).abs() < 1e-15);
        assert!((g.g_l - 0.02).abs() < 1e-15);
        assert!(gap_functions(&maj, -0.1).is_err());

        let veto = OracleContext::veto(0.25).unwrap();
        let t = veto.tau;
        let h = 1e-6;
        let slope = (f_veto(t + h).unwrap() - f_veto(t - h).unwrap()) / (2.0 * h);
        let g = gap_functions(&veto, 1e-7).unwrap();
        assert!((g.g_r / 1e-7 - slope).abs() < 1e-3);
        assert!((slope - 1.29).abs() < 0.01);
    }

    #[test]
    fn gap_functions_increase_and_clamp() {
        for ctx in [OracleContext::majority(), OracleContext::veto(0.25).unwrap(), OracleContext::veto(0.1).unwrap()] {
            let mut prev = gap_functions(&ctx, 0.0).unwrap();
            for i in 1..=1000 {
                let d = i as f64 * 1e-4;
                let g = gap_functions(&ctx, d).unwrap();
                assert!(g.g_r >= 0.0 && g.g_l >= 0.0);
                if !g.clamped {
                    assert!(g.g_r > prev.g_r && g.g_l > prev.g_l, "Δ = {d}");
                }
                prev = g;
            }
        }
        let veto = OracleContext::veto(0.25).unwrap();
        let g = gap_functions(&veto, 0.5).unwrap();
        assert!(g.clamped);
        assert!((g.g_r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn phi1_values_and_inequality() {
        let ceiling = 0.375f64.sqrt() + 0.5 - 0.75;
        assert!((ceiling - 0.3624).abs() < 1e-4);
        assert!((phi1_bound(0.75).unwrap() - ceiling / 2.0).abs() < 1e-15);
        assert!(phi1_bound(0.5 + 1e-9).unwrap() < 1e-4);
        assert!(phi1_bound(0.5).is_err() && phi1_bound(1.0).is_err());

        for p in [0.6, 0.75, 0.9] {
            let t = tau(p).unwrap();
            let phi = phi1_bound(p).unwrap();
            for i in 1..1000 {
                let d = (t - 0.5) * i as f64 / 1000.0;
                assert!(f_veto(t - d).unwrap() <= p - phi * d, "p = {p}, Δ = {d}");
            }
        }
        let p = 0.9;
        let t = tau(p).unwrap();
        let d = (t - 0.5) / 2.0;
        assert!(f_veto(t - d).unwrap() <= p - phi1_bound(p).unwrap() * d);
    }

    #[test]
    fn phi2_inequality_on_grid() {
        for p in [0.55, 0.6, 0.75, 0.9, 0.99] {
            let t = tau(p).unwrap();
            let phi = phi2_bound(p).unwrap();
            for i in 1..=1000 {
                let d = (1.0 - t) * i as f64 / 1000.0;
                assert!(f_veto(t + d).unwrap() - p >= phi * d, "p = {p}, Δ = {d}");
            }
        }
    }

    #[test]
    fn limit_quantiles() {
        assert_eq!(limit_quantile(&RuleSpec::majority()), Some(0.5));
        assert_eq!(limit_quantile(&RuleSpec::veto(0.75).unwrap()), Some(0.0));
        assert_eq!(limit_quantile(&RuleSpec::veto(0.25).unwrap()), Some(tau(0.75).unwrap()));
        assert_eq!(limit_quantile(&RuleSpec::consensus()), None);
    }
}
