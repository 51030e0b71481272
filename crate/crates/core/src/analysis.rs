//! Comparative statics, the probability of investing before exiting, and
//! the salvage-value shifts.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ExitModel, ModelParams};
use crate::roots::bisect;
use crate::scalar::Scalar;
use crate::solver::{solve_thresholds, Outcome, SolverConfig, ThresholdSolution};

/// Partial derivatives of the exit-problem exponents `psi(nu)` and `phi(nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentDerivatives<T = f64> {
    pub dpsi_dsigma2: T,
    pub dphi_dsigma2: T,
    pub dpsi_dnu: T,
    pub dphi_dnu: T,
    pub dpsi_dalpha: T,
    pub dphi_dalpha: T,
}

/// Closed-form exponent derivatives. Written in terms of the exponents
/// themselves, which avoids the cancellation in the textbook quotients
/// (e.g. `(nu r - nu^2 - alpha sigma2) / (sigma2^2 r) = -psi^2 / (2 r)`).
pub fn exponent_derivatives<T: Scalar>(nu: T, alpha: T, sigma2: T) -> ExponentDerivatives<T> {
    let m = ExitModel::build(nu, alpha, sigma2);
    let r = m.radical();
    let two_r = T::two() * r;
    ExponentDerivatives {
        dpsi_dsigma2: -m.psi * m.psi / two_r,
        dphi_dsigma2: m.phi * m.phi / two_r,
        dpsi_dnu: -m.psi / r,
        dphi_dnu: m.phi / r,
        dpsi_dalpha: r.recip(),
        dphi_dalpha: -r.recip(),
    }
}

/// Central-difference settings for threshold derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference<T = f64> {
    /// Step relative to `max(1, |v|)` for the perturbed parameter `v`.
    pub relative: T,
    /// Combine steps `h` and `h/2` to cancel the `O(h^2)` error term.
    pub richardson: bool,
}

impl<T: Scalar> Default for FiniteDifference<T> {
    fn default() -> Self {
        FiniteDifference {
            relative: T::lit(1e-4),
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Converged,
    NeverInvest,
    /// Solved to tolerance but an inequality check failed.
    VerificationFailed,
    /// The base point solved but a perturbed one did not.
    PerturbedFailed(Error),
    Failed(Error),
}

impl RowStatus {
    /// True for errors from the root finders rather than from the inputs.
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            RowStatus::PerturbedFailed(_) => true,
            RowStatus::Failed(e) => matches!(
                e,
                Error::Convergence { .. } | Error::DegenerateInterval { .. }
            ),
            _ => false,
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Converged => f.write_str("ok"),
            RowStatus::NeverInvest => f.write_str("never_invest"),
            RowStatus::VerificationFailed => f.write_str("verification_failed"),
            RowStatus::PerturbedFailed(e) => write!(f, "perturbed_failure: {e}"),
            RowStatus::Failed(e) => write!(f, "error: {e}"),
        }
    }
}

/// Thresholds at one parameter point and their sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticsRow<T = f64> {
    pub params: ModelParams<T>,
    pub g: T,
    pub xi0: T,
    pub xi1: T,
    pub xi_e: T,
    pub xi_i: T,
    pub d_xi_e_dsigma2: T,
    pub d_xi_i_dsigma2: T,
    pub d_xi_e_dmu: T,
    pub d_xi_i_dmu: T,
    /// Absolute steps used for the `sigma2` and `mu` differences.
    pub step_sigma2: T,
    pub step_mu: T,
    pub status: RowStatus,
}

fn thresholds_at<T: Scalar>(
    p: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    which: &'static str,
) -> Result<(T, T)> {
    let wrap = |source: Error| Error::Perturbed {
        which,
        source: Box::new(source),
    };
    let solved = solve_thresholds(p, cfg)
        .and_then(Outcome::into_solved)
        .map_err(wrap)?;
    Ok((solved.solution.xi_e, solved.solution.xi_i))
}

/// `(d xi_E, d xi_I)` by central differences along one parameter.
fn central<T: Scalar>(
    p: &ModelParams<T>,
    h: T,
    cfg: &SolverConfig<T>,
    shift: impl Fn(&ModelParams<T>, T) -> Result<ModelParams<T>>,
    names: (&'static str, &'static str),
) -> Result<(T, T)> {
    let perturb = |d: T, name| {
        shift(p, d).map_err(|e| Error::Perturbed {
            which: name,
            source: Box::new(e),
        })
    };
    let (e_up, i_up) = thresholds_at(&perturb(h, names.0)?, cfg, names.0)?;
    let (e_dn, i_dn) = thresholds_at(&perturb(-h, names.1)?, cfg, names.1)?;
    let two_h = T::two() * h;
    Ok(((e_up - e_dn) / two_h, (i_up - i_dn) / two_h))
}

fn derivative_pair<T: Scalar>(
    p: &ModelParams<T>,
    h: T,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
    shift: impl Fn(&ModelParams<T>, T) -> Result<ModelParams<T>> + Copy,
    names: (&'static str, &'static str),
) -> Result<(T, T)> {
    let coarse = central(p, h, cfg, shift, names)?;
    if !fd.richardson {
        return Ok(coarse);
    }
    let fine = central(p, h * T::half(), cfg, shift, names)?;
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    Ok((
        (four * fine.0 - coarse.0) / three,
        (four * fine.1 - coarse.1) / three,
    ))
}

fn steps<T: Scalar>(p: &ModelParams<T>, fd: &FiniteDifference<T>) -> (T, T) {
    // Keep sigma2 - h well inside the admissible range.
    let hs = (fd.relative * T::one().max(p.sigma2().abs())).min(p.sigma2() * T::half());
    let hm = fd.relative * T::one().max(p.mu().abs());
    (hs, hm)
}

fn sensitivities<T: Scalar>(
    p: &ModelParams<T>,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
) -> Result<[T; 4]> {
    let (hs, hm) = steps(p, fd);
    let (de_s, di_s) = derivative_pair(
        p,
        hs,
        fd,
        cfg,
        |q, d| q.with_sigma2(q.sigma2() + d),
        ("sigma2+", "sigma2-"),
    )?;
    let (de_m, di_m) =
        derivative_pair(p, hm, fd, cfg, |q, d| q.with_mu(q.mu() + d), ("mu+", "mu-"))?;
    Ok([de_s, di_s, de_m, di_m])
}

/// Central-difference threshold sensitivities to `sigma2` and `mu`.
/// Fails if investing is never optimal or any perturbed solve fails; the
/// error names the perturbation.
pub fn threshold_derivatives<T: Scalar>(
    p: &ModelParams<T>,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
) -> Result<StaticsRow<T>> {
    let solved = solve_thresholds(p, cfg)?.into_solved()?;
    let [de_s, di_s, de_m, di_m] = sensitivities(p, fd, cfg)?;
    let (hs, hm) = steps(p, fd);
    let sol = &solved.solution;
    Ok(StaticsRow {
        params: *p,
        g: sol.terms.g,
        xi0: sol.terms.xi0,
        xi1: sol.xi1,
        xi_e: sol.xi_e,
        xi_i: sol.xi_i,
        d_xi_e_dsigma2: de_s,
        d_xi_i_dsigma2: di_s,
        d_xi_e_dmu: de_m,
        d_xi_i_dmu: di_m,
        step_sigma2: hs,
        step_mu: hm,
        status: if solved.report.passed() {
            RowStatus::Converged
        } else {
            RowStatus::VerificationFailed
        },
    })
}

/// Like [`threshold_derivatives`] but never fails: problems are recorded in
/// the row status and the affected entries are NaN (never-invest rows get
/// `xi_E = xi0` and `xi_I = +inf`).
pub fn sweep_row<T: Scalar>(
    p: &ModelParams<T>,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
) -> StaticsRow<T> {
    let (hs, hm) = steps(p, fd);
    let nan = T::nan();
    let mut row = StaticsRow {
        params: *p,
        g: p.g(),
        xi0: p.base_exit().xi,
        xi1: p.boosted_exit().xi,
        xi_e: nan,
        xi_i: nan,
        d_xi_e_dsigma2: nan,
        d_xi_i_dsigma2: nan,
        d_xi_e_dmu: nan,
        d_xi_i_dmu: nan,
        step_sigma2: hs,
        step_mu: hm,
        status: RowStatus::Converged,
    };
    let solved = match solve_thresholds(p, cfg) {
        Ok(Outcome::Invest(s)) => s,
        Ok(Outcome::NeverInvest { xi0, .. }) => {
            row.xi_e = xi0;
            row.xi_i = T::infinity();
            row.status = RowStatus::NeverInvest;
            return row;
        }
        Err(e) => {
            row.status = RowStatus::Failed(e);
            return row;
        }
    };
    row.xi_e = solved.solution.xi_e;
    row.xi_i = solved.solution.xi_i;
    if !solved.report.passed() {
        row.status = RowStatus::VerificationFailed;
    }
    match sensitivities(p, fd, cfg) {
        Ok([de_s, di_s, de_m, di_m]) => {
            row.d_xi_e_dsigma2 = de_s;
            row.d_xi_i_dsigma2 = di_s;
            row.d_xi_e_dmu = de_m;
            row.d_xi_i_dmu = di_m;
        }
        Err(e) => row.status = RowStatus::PerturbedFailed(e),
    }
    row
}

/// The net gain `g` in `[0.5, 1.5]` at which `d xi_I / d sigma2` changes sign,
/// holding everything but `b` fixed. Requires a declining stream.
pub fn locate_sigma2_sign_change<T: Scalar>(
    p: &ModelParams<T>,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    p.require_declining()?;
    let slope = |g: T| -> Result<T> {
        let q = p.with_gain(g)?;
        Ok(threshold_derivatives(&q, fd, cfg)?.d_xi_i_dsigma2)
    };
    let (lo, hi) = (T::half(), T::lit(1.5));
    let (s_lo, s_hi) = (slope(lo)?, slope(hi)?);
    if (s_lo > T::zero()) == (s_hi > T::zero()) {
        return Err(Error::Convergence {
            stage: "sigma2 sign change",
            detail: format!("no sign change on [0.5, 1.5]: slopes {s_lo:e} and {s_hi:e}"),
        });
    }
    let mut failure = None;
    let r = bisect(
        |g| match slope(g) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::nan()
            }
        },
        lo,
        hi,
        T::lit(1e-6),
        T::zero(),
        cfg.max_iter,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    r.map(|b| b.root).ok_or_else(|| Error::Convergence {
        stage: "sigma2 sign change",
        detail: "bracket lost".into(),
    })
}

/// Probability that the rate reaches `xi_I` before `xi_E` starting from `x`.
pub fn p_invest<T: Scalar>(sol: &ThresholdSolution<T>, x: T) -> Result<T> {
    if !(x >= sol.xi_e && x <= sol.xi_i) {
        return Err(Error::domain(
            "x",
            x.to_f64_lossy(),
            "must lie in [xi_E, xi_I]",
        ));
    }
    let p = &sol.params;
    let width = sol.xi_i - sol.xi_e;
    let u = x - sol.xi_e;
    if p.mu().abs() < T::lit(1e-12) {
        return Ok(u / width);
    }
    // Ratio of scale-function increments, s(x) = exp(c x).
    let c = -T::two() * p.mu() / p.sigma2();
    let prob = if c * width > T::lit(500.0) {
        (c * (x - sol.xi_i)).exp() * (-c * u).exp_m1() / (-c * width).exp_m1()
    } else {
        (c * u).exp_m1() / (c * width).exp_m1()
    };
    Ok(prob.max(T::zero()).min(T::one()))
}

/// Central difference of `p_invest(x)` with respect to `sigma2`, re-solving
/// the thresholds at each perturbed volatility.
pub fn p_invest_sigma2_slope<T: Scalar>(
    p: &ModelParams<T>,
    x: T,
    fd: &FiniteDifference<T>,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    let (h, _) = steps(p, fd);
    let at = |d: T, which| -> Result<T> {
        let q = p.with_sigma2(p.sigma2() + d)?;
        let solved = solve_thresholds(&q, cfg)
            .and_then(Outcome::into_solved)
            .map_err(|e| Error::Perturbed {
                which,
                source: Box::new(e),
            })?;
        p_invest(&solved.solution, x)
    };
    Ok((at(h, "sigma2+")? - at(-h, "sigma2-")?) / (T::two() * h))
}

/// A lump sum received on exit (any sign).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalvageParams<T = f64> {
    pub s: T,
}

impl<T: Scalar> SalvageParams<T> {
    pub fn new(s: T) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::domain("s", s.to_f64_lossy(), "must be finite"));
        }
        Ok(SalvageParams { s })
    }
}

/// Exit value and threshold when exiting pays `s`: the problem is the
/// plain exit problem shifted by `alpha s`.
pub fn salvage_exit<T: Scalar>(model: &ExitModel<T>, s: &SalvageParams<T>, x: T) -> (T, T) {
    let shift = model.alpha * s.s;
    (s.s + model.value(x - shift), model.xi + shift)
}

/// Value, investment threshold and exit threshold when exit pays `s`.
pub fn tech_switch<T: Scalar>(sol: &ThresholdSolution<T>, s: &SalvageParams<T>, x: T) -> (T, T, T) {
    let shift = sol.params.alpha() * s.s;
    (
        s.s + sol.value(x - shift),
        sol.xi_i + shift,
        sol.xi_e + shift,
    )
}
