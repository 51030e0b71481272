//! Parameters and closed forms for the single-drift exit problem and the
//! investment reward.
//!
//! A profit rate `X_t = x + nu t + sigma B_t` is run until an exit time; the
//! optimal exit rule is a threshold `xi(nu) < 0` and the value is known in
//! closed form. The investment problem reuses that solution twice: once with
//! the pre-investment drift `mu`, once with the boosted drift `mu + delta`.

use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::scalar::Scalar;

/// The six model primitives.
///
/// `alpha` is the discount rate, `mu` the pre-investment drift, `sigma2`
/// the variance rate of the profit stream, `delta` the drift boost from
/// investing, `b` the jump in the profit rate and `k` the investment cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T = f64> {
    alpha: T,
    mu: T,
    sigma2: T,
    delta: T,
    b: T,
    k: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(alpha: T, mu: T, sigma2: T, delta: T, b: T, k: T) -> Result<Self> {
        let p = ModelParams {
            alpha,
            mu,
            sigma2,
            delta,
            b,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the net gain `g` instead of the boost `b`,
    /// inverting `g = b + delta/alpha - k alpha`.
    pub fn from_gain(alpha: T, mu: T, sigma2: T, delta: T, g: T, k: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(Error::domain("alpha", alpha.to_f64_lossy(), "must be > 0"));
        }
        let b = g - delta / alpha + k * alpha;
        Self::new(alpha, mu, sigma2, delta, b, k)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("mu", self.mu),
            ("sigma2", self.sigma2),
            ("delta", self.delta),
            ("b", self.b),
            ("k", self.k),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::domain(name, v.to_f64_lossy(), "must be finite"));
            }
        }
        if !(self.alpha > T::zero()) {
            return Err(Error::domain(
                "alpha",
                self.alpha.to_f64_lossy(),
                "must be > 0",
            ));
        }
        if !(self.sigma2 > T::zero()) {
            return Err(Error::domain(
                "sigma2",
                self.sigma2.to_f64_lossy(),
                "must be > 0",
            ));
        }
        if !(self.k > T::zero()) {
            return Err(Error::domain("k", self.k.to_f64_lossy(), "must be > 0"));
        }
        if self.delta < T::zero() {
            return Err(Error::domain(
                "delta",
                self.delta.to_f64_lossy(),
                "must be >= 0",
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn mu(&self) -> T {
        self.mu
    }
    pub fn sigma2(&self) -> T {
        self.sigma2
    }
    pub fn sigma(&self) -> T {
        self.sigma2.sqrt()
    }
    pub fn delta(&self) -> T {
        self.delta
    }
    pub fn b(&self) -> T {
        self.b
    }
    pub fn k(&self) -> T {
        self.k
    }

    /// Post-investment drift `mu + delta`.
    pub fn mu_plus(&self) -> T {
        self.mu + self.delta
    }

    /// Net discounted gain rate from investing if exit never happened.
    pub fn g(&self) -> T {
        self.b + self.delta / self.alpha - self.k * self.alpha
    }

    /// True when the stream declines both before and after investment.
    pub fn declining(&self) -> bool {
        self.mu < T::zero() && self.mu_plus() < T::zero()
    }

    pub(crate) fn require_declining(&self) -> Result<()> {
        if self.declining() {
            Ok(())
        } else {
            Err(Error::NotDeclining {
                mu: self.mu.to_f64_lossy(),
                mu_plus: self.mu_plus().to_f64_lossy(),
            })
        }
    }

    pub fn with_alpha(self, alpha: T) -> Result<Self> {
        Self::new(alpha, self.mu, self.sigma2, self.delta, self.b, self.k)
    }
    pub fn with_mu(self, mu: T) -> Result<Self> {
        Self::new(self.alpha, mu, self.sigma2, self.delta, self.b, self.k)
    }
    pub fn with_sigma2(self, sigma2: T) -> Result<Self> {
        Self::new(self.alpha, self.mu, sigma2, self.delta, self.b, self.k)
    }
    pub fn with_delta(self, delta: T) -> Result<Self> {
        Self::new(self.alpha, self.mu, self.sigma2, delta, self.b, self.k)
    }
    pub fn with_b(self, b: T) -> Result<Self> {
        Self::new(self.alpha, self.mu, self.sigma2, self.delta, b, self.k)
    }
    pub fn with_k(self, k: T) -> Result<Self> {
        Self::new(self.alpha, self.mu, self.sigma2, self.delta, self.b, k)
    }
    /// Moves `b` so that the net gain becomes `g`, all else fixed.
    pub fn with_gain(self, g: T) -> Result<Self> {
        Self::from_gain(self.alpha, self.mu, self.sigma2, self.delta, g, self.k)
    }

    /// Exit problem with the pre-investment drift `mu`.
    pub fn base_exit(&self) -> ExitModel<T> {
        ExitModel::build(self.mu, self.alpha, self.sigma2)
    }

    /// Exit problem with the boosted drift `mu + delta`.
    pub fn boosted_exit(&self) -> ExitModel<T> {
        ExitModel::build(self.mu_plus(), self.alpha, self.sigma2)
    }
}

impl ModelParams<f64> {
    /// `alpha = 1, sigma2 = 0.5, mu = -1, delta = 0.1, k = 0.5` with the
    /// given boost `b`.
    pub fn reference(b: f64) -> Self {
        ModelParams::new(1.0, -1.0, 0.5, 0.1, b, 0.5).expect("reference parameters are valid")
    }
}

/// The exit problem with constant drift `nu`: the two exponents of the
/// homogeneous ODE and the optimal exit threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitModel<T = f64> {
    pub nu: T,
    pub alpha: T,
    pub sigma2: T,
    /// Positive root of `-alpha + nu m + sigma2 m^2 / 2 = 0`.
    pub psi: T,
    /// Negative root of the same quadratic.
    pub phi: T,
    /// Optimal exit threshold, always negative.
    pub xi: T,
}

/// Validating constructor for [`ExitModel`].
pub fn make_exit_model<T: Scalar>(nu: T, alpha: T, sigma2: T) -> Result<ExitModel<T>> {
    if !nu.is_finite() {
        return Err(Error::domain("nu", nu.to_f64_lossy(), "must be finite"));
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::domain("alpha", alpha.to_f64_lossy(), "must be > 0"));
    }
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::domain(
            "sigma2",
            sigma2.to_f64_lossy(),
            "must be > 0",
        ));
    }
    Ok(ExitModel::build(nu, alpha, sigma2))
}

impl<T: Scalar> ExitModel<T> {
    pub(crate) fn build(nu: T, alpha: T, sigma2: T) -> Self {
        let r = (nu * nu + T::two() * alpha * sigma2).sqrt();
        // psi * phi = -2 alpha / sigma2; take the cancellation-free root first.
        let (psi, phi) = if nu <= T::zero() {
            let s = r - nu;
            (s / sigma2, -(T::two() * alpha) / s)
        } else {
            let s = nu + r;
            (T::two() * alpha / s, -s / sigma2)
        };
        ExitModel {
            nu,
            alpha,
            sigma2,
            psi,
            phi,
            xi: -psi.recip(),
        }
    }

    /// `sqrt(nu^2 + 2 alpha sigma2)`.
    pub fn radical(&self) -> T {
        (self.nu * self.nu + T::two() * self.alpha * self.sigma2).sqrt()
    }

    /// Residual of the characteristic quadratic at `m`.
    pub fn characteristic(&self, m: T) -> T {
        -self.alpha + self.nu * m + T::half() * self.sigma2 * m * m
    }

    /// `E[int_0^inf e^{-alpha t} X_t dt]` from `x`: the value of never exiting.
    pub fn perpetual(&self, x: T) -> T {
        x / self.alpha + self.nu / (self.alpha * self.alpha)
    }

    /// Optimal return `V(x; nu)`.
    pub fn value(&self, x: T) -> T {
        if x <= self.xi {
            return T::zero();
        }
        self.perpetual(x)
            - (self.alpha * self.phi).recip() * (self.phi * (x - self.xi)).exp_clamped()
    }

    pub fn value_d1(&self, x: T) -> T {
        if x <= self.xi {
            return T::zero();
        }
        (T::one() - (self.phi * (x - self.xi)).exp_clamped()) / self.alpha
    }

    pub fn value_d2(&self, x: T) -> T {
        if x <= self.xi {
            return T::zero();
        }
        -self.phi / self.alpha * (self.phi * (x - self.xi)).exp_clamped()
    }
}

/// Free function form of [`ExitModel::value`].
pub fn exit_value<T: Scalar>(model: &ExitModel<T>, x: T) -> T {
    model.value(x)
}

/// Quantities of the investment reward that do not depend on the
/// pre-investment thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestmentTerms<T = f64> {
    pub g: T,
    /// Break-even rate: investing at `x_plus` yields exactly zero.
    pub x_plus: T,
    /// `g <= 0`: waiting to exit always beats investing.
    pub never_invest: bool,
    pub xi0: T,
    pub xi1: T,
    pub gamma_p: T,
    pub gamma_n: T,
    pub lambda: T,
}

pub fn investment_terms<T: Scalar>(p: &ModelParams<T>) -> Result<InvestmentTerms<T>> {
    let base = p.base_exit();
    let boosted = p.boosted_exit();
    let g = p.g();
    let x_plus = break_even(p, &boosted)?;
    Ok(InvestmentTerms {
        g,
        x_plus,
        never_invest: !(g > T::zero()),
        xi0: base.xi,
        xi1: boosted.xi,
        gamma_p: base.psi,
        gamma_n: base.phi,
        lambda: boosted.phi,
    })
}

/// Solves `V0+(x + b) = k`. The map is `-k` at `xi1 - b` and strictly
/// increasing to the right, so a rightward geometric expansion brackets it.
fn break_even<T: Scalar>(p: &ModelParams<T>, boosted: &ExitModel<T>) -> Result<T> {
    let f = |x: T| boosted.value(x + p.b()) - p.k();
    let lo = boosted.xi - p.b();
    let mut width = T::one();
    let mut hi = lo + width;
    let mut expansions = 0;
    while f(hi) <= T::zero() {
        width = width * T::two();
        hi = lo + width;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::Convergence {
                stage: "break-even bracket",
                detail: format!("no sign change up to x = {hi}"),
            });
        }
    }
    let r = bisect(f, lo, hi, T::zero(), T::zero(), 400).ok_or_else(|| Error::Convergence {
        stage: "break-even bisection",
        detail: "lost bracket".into(),
    })?;
    let tol = T::lit(1e-12) * p.k().max(T::one());
    let resid = f(r.root).abs();
    // In reduced precision, bisection stops at the representable neighbour.
    let floor = T::lit(64.0) * T::epsilon() * (T::one() + r.root.abs() + p.b().abs()) / p.alpha();
    if resid > tol.max(floor) {
        return Err(Error::Convergence {
            stage: "break-even bisection",
            detail: format!("residual {resid} above tolerance"),
        });
    }
    Ok(r.root)
}

/// Lump-sum reward at stopping: `max(0, V0+(x + b) - k)`.
pub fn reward_h<T: Scalar>(p: &ModelParams<T>, x: T) -> T {
    let v = p.boosted_exit().value(x + p.b()) - p.k();
    v.max(T::zero())
}

/// Closed-form derivatives of the reward, for use by the optimality checks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reward<T> {
    boosted: ExitModel<T>,
    b: T,
    k: T,
    pub x_plus: T,
}

impl<T: Scalar> Reward<T> {
    pub fn new(p: &ModelParams<T>, x_plus: T) -> Self {
        Reward {
            boosted: p.boosted_exit(),
            b: p.b(),
            k: p.k(),
            x_plus,
        }
    }

    pub fn value(&self, x: T) -> T {
        (self.boosted.value(x + self.b) - self.k).max(T::zero())
    }

    /// Right derivative at the kink `x_plus`.
    pub fn d1(&self, x: T) -> T {
        if x < self.x_plus {
            T::zero()
        } else {
            self.boosted.value_d1(x + self.b)
        }
    }

    pub fn d2(&self, x: T) -> T {
        if x < self.x_plus {
            T::zero()
        } else {
            self.boosted.value_d2(x + self.b)
        }
    }
}

/// Gain from investing now over waiting to exit:
/// `[V0+(x + b) - k] - V0(x)` for `x > x_plus`.
pub fn delta_v<T: Scalar>(p: &ModelParams<T>, terms: &InvestmentTerms<T>, x: T) -> Result<T> {
    if !(x > terms.x_plus) {
        return Err(Error::domain(
            "x",
            x.to_f64_lossy(),
            "must exceed the break-even rate",
        ));
    }
    let a = p.alpha();
    let boost =
        -(terms.lambda * a).recip() * (terms.lambda * (x + p.b() - terms.xi1)).exp_clamped();
    if x > terms.xi0 {
        let base = (terms.gamma_n * a).recip() * (terms.gamma_n * (x - terms.xi0)).exp_clamped();
        Ok(terms.g / a + boost + base)
    } else {
        // V0 vanishes below its threshold; only the investment side remains.
        Ok(p.boosted_exit().value(x + p.b()) - p.k())
    }
}

/// Maps a demand process to the profit stream `X = price * D - cost`.
/// Returns `(mu, x0)`.
pub fn demand_to_params<T: Scalar>(
    price: T,
    cost: T,
    demand_drift: T,
    demand0: T,
) -> Result<(T, T)> {
    if !(price > T::zero()) {
        return Err(Error::domain("price", price.to_f64_lossy(), "must be > 0"));
    }
    Ok((price * demand_drift, price * demand0 - cost))
}
