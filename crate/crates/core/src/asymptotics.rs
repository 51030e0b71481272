//! Leading-order threshold expansions for a small net gain `g` and for a
//! large profit boost `b`.
//!
//! Both are reported in the gap coordinates used by the solver:
//! `delta_e0 = xi_E - xi0` and `delta_ie = xi_I - xi_E`.

use crate::analysis::exponent_derivatives;
use crate::error::{Error, Result};
use crate::model::{investment_terms, InvestmentTerms, ModelParams};
use crate::roots::bisect;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SmallG,
    LargeB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport<T = f64> {
    pub regime: Regime,
    pub delta_e0: T,
    pub delta_ie: T,
    /// Large-b offset constant; `None` for the small-g regime.
    pub theta: Option<T>,
    /// `-lambda (theta + alpha k + 1/gamma_n - 1/lambda)`, large-b only.
    pub z: Option<T>,
    /// Small-g prefactor `C(delta)`.
    pub c_delta: Option<T>,
}

fn require_gain<T: Scalar>(p: &ModelParams<T>) -> Result<()> {
    let g = p.g();
    if g > T::zero() {
        Ok(())
    } else {
        Err(Error::domain(
            "g",
            g.to_f64_lossy(),
            "expansion needs g > 0",
        ))
    }
}

struct ThetaEquation<T> {
    gamma_n: T,
    lambda: T,
    /// `alpha k - delta/alpha + xi0 - xi1`.
    shift: T,
}

impl<T: Scalar> ThetaEquation<T> {
    fn new(p: &ModelParams<T>, t: &InvestmentTerms<T>) -> Self {
        ThetaEquation {
            gamma_n: t.gamma_n,
            lambda: t.lambda,
            shift: p.alpha() * p.k() - p.delta() / p.alpha() + t.xi0 - t.xi1,
        }
    }

    /// Right-hand side of `theta = -1/gamma_n + exp(lambda (theta + shift)) / lambda`.
    fn rhs(&self, theta: T) -> T {
        -self.gamma_n.recip()
            + self.lambda.recip() * (self.lambda * (theta + self.shift)).exp_clamped()
    }
}

/// Positive root of the large-b offset equation.
pub fn solve_theta<T: Scalar>(p: &ModelParams<T>) -> Result<T> {
    let terms = investment_terms(p)?;
    theta_from_terms(p, &terms)
}

fn theta_from_terms<T: Scalar>(p: &ModelParams<T>, terms: &InvestmentTerms<T>) -> Result<T> {
    let eq = ThetaEquation::new(p, terms);
    let f = |th: T| th - eq.rhs(th);
    // f is convex with its minimum -alpha k < 0 at theta = -shift, and
    // f(-1/gamma_n) > 0, so the larger root lies between the two.
    let lo = -eq.shift;
    let hi = -terms.gamma_n.recip();
    if !(f(lo) < T::zero()) {
        return Err(Error::Convergence {
            stage: "theta bracket",
            detail: format!("no sign change on [{lo:e}, {hi:e}]"),
        });
    }
    let r = bisect(f, lo, hi, T::zero(), T::zero(), 400).ok_or_else(|| Error::Convergence {
        stage: "theta bisection",
        detail: "lost bracket".into(),
    })?;
    let resid = f(r.root).abs();
    let tol = T::lit(1e-12).max(T::lit(64.0) * T::epsilon()) * r.root.abs().max(T::one());
    if resid > tol {
        return Err(Error::Convergence {
            stage: "theta bisection",
            detail: format!("residual {resid:e}"),
        });
    }
    Ok(r.root)
}

/// Small-g leading order:
/// `delta_e0 ~ -g^(1 - gamma_p/gamma_n) C(delta)` and
/// `delta_ie ~ -ln(1/g) / gamma_n`.
pub fn small_g_expansion<T: Scalar>(p: &ModelParams<T>) -> Result<AsymptoticReport<T>> {
    require_gain(p)?;
    let t = investment_terms(p)?;
    Ok(small_g_from_terms(p, &t))
}

fn small_g_from_terms<T: Scalar>(
    p: &ModelParams<T>,
    t: &InvestmentTerms<T>,
) -> AsymptoticReport<T> {
    let ratio = t.gamma_p / t.gamma_n;
    let spread = t.gamma_p.recip() - t.gamma_n.recip();
    let base = if p.delta() > T::zero() {
        spread
    } else {
        spread * (T::one() - (t.gamma_n * p.b()).exp_clamped())
    };
    let c_delta = base.powf(ratio);
    let g = t.g;
    // g^(1 - ratio) C in log space; the power underflows long before g does.
    let log_mag = (T::one() - ratio) * g.ln() + ratio * base.ln();
    AsymptoticReport {
        regime: Regime::SmallG,
        delta_e0: -log_mag.exp(),
        delta_ie: -t.gamma_n.recip() * g.recip().ln(),
        theta: None,
        z: None,
        c_delta: Some(c_delta),
    }
}

/// Large-b leading order: `delta_e0 ~ -g + theta`,
/// `delta_ie ~ -(1 - lambda theta - lambda/gamma_n) / (g gamma_p gamma_n)`.
pub fn large_b_expansion<T: Scalar>(p: &ModelParams<T>) -> Result<AsymptoticReport<T>> {
    require_gain(p)?;
    let t = investment_terms(p)?;
    large_b_from_terms(p, &t)
}

fn large_b_from_terms<T: Scalar>(
    p: &ModelParams<T>,
    t: &InvestmentTerms<T>,
) -> Result<AsymptoticReport<T>> {
    let theta = theta_from_terms(p, t)?;
    let g = t.g;
    let z = z_of(p, t, theta);
    let limit =
        -(t.gamma_p * t.gamma_n).recip() * (T::one() - t.lambda * theta - t.lambda / t.gamma_n);
    Ok(AsymptoticReport {
        regime: Regime::LargeB,
        delta_e0: -g + theta,
        delta_ie: limit / g,
        theta: Some(theta),
        z: Some(z),
        c_delta: None,
    })
}

fn z_of<T: Scalar>(p: &ModelParams<T>, t: &InvestmentTerms<T>, theta: T) -> T {
    -t.lambda * (theta + p.alpha() * p.k() + t.gamma_n.recip() - t.lambda.recip())
}

/// Initial `delta_ie` guess for the threshold solver, with the regime it
/// came from. Between the regimes there is no guess.
pub(crate) fn initial_guess<T: Scalar>(
    p: &ModelParams<T>,
    t: &InvestmentTerms<T>,
) -> Option<(Regime, T)> {
    let g = t.g;
    if !(g > T::zero()) {
        return None;
    }
    if g < T::lit(0.1) {
        let r = small_g_from_terms(p, t);
        (r.delta_ie > T::zero()).then_some((Regime::SmallG, r.delta_ie))
    } else if g > T::lit(10.0) {
        let r = large_b_from_terms(p, t).ok()?;
        (r.delta_ie > T::zero()).then_some((Regime::LargeB, r.delta_ie))
    } else {
        None
    }
}

/// Implicit derivatives of `theta` in `sigma2` and `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDerivatives<T = f64> {
    pub theta: T,
    pub d_sigma2: T,
    pub d_mu: T,
}

pub fn theta_derivatives<T: Scalar>(p: &ModelParams<T>) -> Result<ThetaDerivatives<T>> {
    let t = investment_terms(p)?;
    let theta = theta_from_terms(p, &t)?;
    let base = exponent_derivatives(p.mu(), p.alpha(), p.sigma2());
    let boosted = exponent_derivatives(p.mu_plus(), p.alpha(), p.sigma2());
    let gap = theta + p.alpha() * p.k() + t.gamma_n.recip() - t.lambda.recip();
    let e = (t.lambda * gap).exp_clamped();
    let weight = e / (T::one() - e) * gap / t.lambda;
    let inv_gn2 = (t.gamma_n * t.gamma_n).recip();
    Ok(ThetaDerivatives {
        theta,
        d_sigma2: inv_gn2 * base.dphi_dsigma2 + weight * boosted.dphi_dsigma2,
        // lambda depends on mu only through nu = mu + delta.
        d_mu: inv_gn2 * base.dphi_dnu + weight * boosted.dphi_dnu,
    })
}

/// Leading-order threshold slopes for large `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeBSlopes<T = f64> {
    pub z: T,
    /// `d xi_E / d sigma2` (and, to the same order, `d xi_I / d sigma2`).
    pub dxi_e_dsigma2: T,
    pub dxi_i_dmu: T,
}

pub fn large_b_slopes<T: Scalar>(p: &ModelParams<T>) -> Result<LargeBSlopes<T>> {
    let t = investment_terms(p)?;
    let theta = theta_from_terms(p, &t)?;
    let z = z_of(p, &t, theta);
    let boosted = exponent_derivatives(p.mu_plus(), p.alpha(), p.sigma2());
    let w = z / z.exp_m1() / (t.lambda * t.lambda);
    Ok(LargeBSlopes {
        z,
        dxi_e_dsigma2: -w * boosted.dphi_dsigma2,
        dxi_i_dmu: -p.alpha().recip() - w * boosted.dphi_dnu,
    })
}
