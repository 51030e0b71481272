//! Free-boundary solver for the pre-investment exit and investment
//! thresholds, and the numerical optimality checks for its output.
//!
//! The four boundary conditions (value matching and smooth pasting at
//! `xi_E` and `xi_I`) are reduced to two equations in the gaps
//! `delta_e0 = xi_E - xi0` and `delta_ie = xi_I - xi_E`:
//!
//! ```text
//! delta_e0 = -g e^{-gp D} + (1/lam - 1/gn) e^{lam (D + delta_e0 + s)} e^{-gp D}
//!          = -g e^{-gn D} + (1/gp - 1/gn) + (1/lam - 1/gp) e^{lam (D + delta_e0 + s)} e^{-gn D}
//! ```
//!
//! with `D = delta_ie` and `s = b + xi0 - xi1`. For fixed `D` the first line
//! has exactly one root in `delta_e0` (left side increasing, right side
//! decreasing). The outer search looks for a sign change in `D` of the
//! difference between the two right-hand sides evaluated at that root.
//!
//! The value-function coefficients are stored anchored at the boundaries,
//! `a1 e^{gp xi_I}` and `a2 e^{gn xi_E}`, which stay O(1) even when the
//! thresholds themselves are large and the raw coefficients overflow.

use std::fmt;

use crate::asymptotics::{initial_guess, Regime};
use crate::error::{Error, Result};
use crate::model::{investment_terms, InvestmentTerms, ModelParams, Reward};
use crate::roots::bisect;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T = f64> {
    /// Relative accuracy demanded of the inner `delta_e0` root.
    pub inner_tol: T,
    /// Absolute accuracy demanded of the outer `delta_ie` root.
    pub outer_tol: T,
    /// Largest accepted boundary-condition residual (profit units).
    pub residual_tol: T,
    /// Slack allowed in the inequality checks, relative to the value scale.
    pub inequality_tol: T,
    pub max_iter: usize,
    /// Log-spaced probes used to locate (and count) outer sign changes.
    pub scan_points: usize,
    /// Points per verification grid.
    pub grid_points: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        SolverConfig {
            inner_tol: T::lit(1e-12).max(T::lit(16.0) * eps),
            outer_tol: T::lit(1e-11).max(T::lit(16.0) * eps),
            residual_tol: T::lit(1e-9).max(T::lit(2048.0) * eps),
            inequality_tol: T::lit(1e-9).max(T::lit(2048.0) * eps),
            max_iter: 2000,
            scan_points: 64,
            grid_points: 2000,
        }
    }
}

/// A candidate or solved pair of thresholds with the value function they
/// induce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution<T = f64> {
    pub params: ModelParams<T>,
    pub terms: InvestmentTerms<T>,
    pub xi_e: T,
    pub xi_i: T,
    pub xi1: T,
    pub x_plus: T,
    /// Raw coefficient of `e^{gamma_p x}`; may overflow for extreme thresholds.
    pub a1: T,
    /// Raw coefficient of `e^{gamma_n x}`.
    pub a2: T,
    pub delta_ie: T,
    pub delta_e0: T,
    /// `a1 e^{gamma_p xi_I}`.
    a1_at_i: T,
    /// `a2 e^{gamma_n xi_E}`.
    a2_at_e: T,
}

/// Raw and boundary-anchored coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients<T = f64> {
    pub a1: T,
    pub a2: T,
    pub a1_at_i: T,
    pub a2_at_e: T,
}

fn check_interval<T: Scalar>(
    p: &ModelParams<T>,
    t: &InvestmentTerms<T>,
    xi_e: T,
    width: T,
) -> Result<()> {
    let xi_i = xi_e + width;
    let floor = T::lit(64.0) * T::epsilon() * (T::one() + xi_e.abs().max(xi_i.abs()));
    if !(width > floor) {
        return Err(Error::DegenerateInterval {
            width: width.to_f64_lossy(),
        });
    }
    if !(xi_i + p.b() - t.xi1 > T::zero()) {
        return Err(Error::domain(
            "xi_I",
            xi_i.to_f64_lossy(),
            "boosted rate xi_I + b must exceed the post-investment exit threshold",
        ));
    }
    Ok(())
}

/// Coefficients fitted to the two smooth-pasting conditions.
pub fn coefficients<T: Scalar>(p: &ModelParams<T>, xi_e: T, xi_i: T) -> Result<Coefficients<T>> {
    let t = investment_terms(p)?;
    coefficients_with(p, &t, xi_e, xi_i - xi_e)
}

/// The gap `d = xi_I - xi_E` is passed separately: for large thresholds
/// `xi_I - xi_E` recomputed from rounded values can lose most of its digits.
fn coefficients_with<T: Scalar>(
    p: &ModelParams<T>,
    t: &InvestmentTerms<T>,
    xi_e: T,
    d: T,
) -> Result<Coefficients<T>> {
    check_interval(p, t, xi_e, d)?;
    let a = p.alpha();
    let (gp, gn) = (t.gamma_p, t.gamma_n);
    let xi_i = xi_e + d;
    let l = (t.lambda * (xi_i + p.b() - t.xi1)).exp();
    // 1 - e^{-(gp - gn) d}, the anchored form of the positive determinant.
    let den = -(-(gp - gn) * d).exp_m1();
    let a1_at_i = ((gn * d).exp() - l) / (a * gp * den);
    let a2_at_e = -(T::one() - l * (-gp * d).exp()) / (a * gn * den);
    Ok(Coefficients {
        a1: a1_at_i * (-gp * xi_i).exp(),
        a2: a2_at_e * (-gn * xi_e).exp(),
        a1_at_i,
        a2_at_e,
    })
}

impl<T: Scalar> ThresholdSolution<T> {
    /// Thresholds with coefficients from the smooth-pasting conditions.
    pub fn from_thresholds(p: &ModelParams<T>, xi_e: T, xi_i: T) -> Result<Self> {
        Self::from_gap(p, xi_e, xi_i - xi_e)
    }

    /// Exit threshold and the width of the continuation region.
    pub fn from_gap(p: &ModelParams<T>, xi_e: T, delta_ie: T) -> Result<Self> {
        let t = investment_terms(p)?;
        let c = coefficients_with(p, &t, xi_e, delta_ie)?;
        Ok(Self::assemble(p, t, xi_e, delta_ie, c))
    }

    /// Thresholds with coefficients fitted to value matching only. Useful for
    /// checking that arbitrary thresholds fail the smooth-pasting test.
    pub fn value_matched(p: &ModelParams<T>, xi_e: T, xi_i: T) -> Result<Self> {
        let t = investment_terms(p)?;
        let d = xi_i - xi_e;
        check_interval(p, &t, xi_e, d)?;
        let reward = Reward::new(p, t.x_plus);
        let (gp, gn) = (t.gamma_p, t.gamma_n);
        let base = p.base_exit();
        // [e^{-gp d}  1      ] [A1]   [-P(xi_E)          ]
        // [1          e^{gn d}] [A2] = [h(xi_I) - P(xi_I)]
        let (m11, m22) = ((-gp * d).exp(), (gn * d).exp());
        let r1 = -base.perpetual(xi_e);
        let r2 = reward.value(xi_i) - base.perpetual(xi_i);
        let det = m11 * m22 - T::one();
        let a1_at_i = (r1 * m22 - r2) / det;
        let a2_at_e = (m11 * r2 - r1) / det;
        let c = Coefficients {
            a1: a1_at_i * (-gp * xi_i).exp(),
            a2: a2_at_e * (-gn * xi_e).exp(),
            a1_at_i,
            a2_at_e,
        };
        Ok(Self::assemble(p, t, xi_e, d, c))
    }

    fn assemble(
        p: &ModelParams<T>,
        t: InvestmentTerms<T>,
        xi_e: T,
        d: T,
        c: Coefficients<T>,
    ) -> Self {
        let xi_i = xi_e + d;
        ThresholdSolution {
            params: *p,
            terms: t,
            xi_e,
            xi_i,
            xi1: t.xi1,
            x_plus: t.x_plus,
            a1: c.a1,
            a2: c.a2,
            delta_ie: d,
            delta_e0: xi_e - t.xi0,
            a1_at_i: c.a1_at_i,
            a2_at_e: c.a2_at_e,
        }
    }

    pub fn coefficients(&self) -> Coefficients<T> {
        Coefficients {
            a1: self.a1,
            a2: self.a2,
            a1_at_i: self.a1_at_i,
            a2_at_e: self.a2_at_e,
        }
    }

    pub fn xi0(&self) -> T {
        self.terms.xi0
    }

    fn exp_p(&self, x: T) -> T {
        (self.terms.gamma_p * (x - self.xi_i)).exp()
    }

    fn exp_n(&self, x: T) -> T {
        (self.terms.gamma_n * (x - self.xi_e)).exp()
    }

    /// The continuation-region formula `x/alpha + mu/alpha^2 + a1 e^{gp x} +
    /// a2 e^{gn x}`, evaluated at any `x`.
    pub fn continuation(&self, x: T) -> T {
        self.jet(x, self.exp_p(x), self.exp_n(x))[0]
    }

    pub fn continuation_d1(&self, x: T) -> T {
        self.jet(x, self.exp_p(x), self.exp_n(x))[1]
    }

    pub fn continuation_d2(&self, x: T) -> T {
        self.jet(x, self.exp_p(x), self.exp_n(x))[2]
    }

    /// Value and first two derivatives given the two exponential factors.
    fn jet(&self, x: T, ep: T, en: T) -> [T; 3] {
        let (gp, gn) = (self.terms.gamma_p, self.terms.gamma_n);
        let (u, v) = (self.a1_at_i * ep, self.a2_at_e * en);
        [
            self.params.base_exit().perpetual(x) + u + v,
            self.params.alpha().recip() + gp * u + gn * v,
            gp * gp * u + gn * gn * v,
        ]
    }

    /// Continuation jets at `xi_E` and `xi_I`, with the exponentials taken
    /// from the stored gap rather than from differences of rounded thresholds.
    fn boundary_jets(&self) -> ([T; 3], [T; 3]) {
        let d = self.delta_ie;
        (
            self.jet(self.xi_e, (-self.terms.gamma_p * d).exp(), T::one()),
            self.jet(self.xi_i, T::one(), (self.terms.gamma_n * d).exp()),
        )
    }

    pub(crate) fn reward(&self) -> Reward<T> {
        Reward::new(&self.params, self.x_plus)
    }

    /// Optimal value `V1(x)`: the continuation formula inside
    /// `(xi_E, xi_I)` and the stopping reward outside.
    pub fn value(&self, x: T) -> T {
        if x > self.xi_e && x < self.xi_i {
            self.continuation(x)
        } else {
            self.reward().value(x)
        }
    }

    /// `(-alpha + mu d/dx + sigma2/2 d^2/dx^2) V1` away from the boundaries.
    pub fn generator(&self, x: T) -> T {
        let p = &self.params;
        let (v, d1, d2) = if x > self.xi_e && x < self.xi_i {
            (
                self.continuation(x),
                self.continuation_d1(x),
                self.continuation_d2(x),
            )
        } else {
            let r = self.reward();
            (r.value(x), r.d1(x), r.d2(x))
        };
        -p.alpha() * v + p.mu() * d1 + T::half() * p.sigma2() * d2
    }

    /// Residuals of value matching at `xi_E`, smooth pasting at `xi_E`,
    /// value matching at `xi_I` and smooth pasting at `xi_I`, in that order.
    pub fn residuals(&self) -> [T; 4] {
        let r = self.reward();
        let (je, ji) = self.boundary_jets();
        [
            je[0],
            je[1],
            ji[0] - r.value(self.xi_i),
            ji[1] - r.d1(self.xi_i),
        ]
    }
}

/// Free function form of [`ThresholdSolution::value`].
pub fn value_v1<T: Scalar>(sol: &ThresholdSolution<T>, x: T) -> T {
    sol.value(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T = f64> {
    pub residuals: [T; 4],
    pub residual_tol: T,
    pub value_matching: bool,
    pub smooth_pasting: bool,
    /// `min (V1 - h)` over a grid strictly inside the continuation region.
    pub min_dominance_gap: T,
    pub dominance: bool,
    /// `V1'' - h''` just inside each boundary.
    pub curvature_gap_e: T,
    pub curvature_gap_i: T,
    pub curvature: bool,
    /// `max (A V1 + x)` over a grid outside the continuation region.
    pub max_generator_excess: T,
    pub generator: bool,
    /// `xi_E < x_plus < xi_I`, `xi_I + b > xi1` and `xi_E <= xi0`.
    pub ordering: bool,
    /// Both coefficients positive.
    pub coefficient_signs: bool,
}

impl<T: Scalar> VerificationReport<T> {
    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let checks = [
            (self.value_matching, "value matching"),
            (self.smooth_pasting, "smooth pasting"),
            (self.dominance, "dominance V1 >= h"),
            (self.curvature, "boundary curvature"),
            (self.generator, "generator inequality"),
            (self.ordering, "threshold ordering"),
            (self.coefficient_signs, "coefficient signs"),
        ];
        checks
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, name)| *name)
            .collect()
    }
}

impl<T: Scalar> fmt::Display for VerificationReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let r = &self.residuals;
        writeln!(
            f,
            "  value matching     {}  |r1| = {:.3e}, |r3| = {:.3e}",
            flag(self.value_matching),
            r[0].abs(),
            r[2].abs()
        )?;
        writeln!(
            f,
            "  smooth pasting     {}  |r2| = {:.3e}, |r4| = {:.3e}",
            flag(self.smooth_pasting),
            r[1].abs(),
            r[3].abs()
        )?;
        writeln!(
            f,
            "  V1 >= h inside     {}  min gap = {:.3e}",
            flag(self.dominance),
            self.min_dominance_gap
        )?;
        writeln!(
            f,
            "  curvature          {}  at xi_E {:.3e}, at xi_I {:.3e}",
            flag(self.curvature),
            self.curvature_gap_e,
            self.curvature_gap_i
        )?;
        writeln!(
            f,
            "  A V1 <= -x outside {}  max excess = {:.3e}",
            flag(self.generator),
            self.max_generator_excess
        )?;
        writeln!(f, "  ordering           {}", flag(self.ordering))?;
        write!(f, "  a1 > 0, a2 > 0     {}", flag(self.coefficient_signs))
    }
}

fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> impl Iterator<Item = T> {
    let n = n.max(2);
    let step = (hi - lo) / T::from_usize(n - 1).expect("grid size fits the scalar");
    (0..n).map(move |i| lo + step * T::from_usize(i).expect("grid index fits the scalar"))
}

/// Checks every sufficient optimality condition for a candidate solution.
/// Never fails: violations are reported.
pub fn verify<T: Scalar>(
    sol: &ThresholdSolution<T>,
    cfg: &SolverConfig<T>,
) -> VerificationReport<T> {
    let p = &sol.params;
    let t = &sol.terms;
    let reward = sol.reward();
    let residuals = sol.residuals();
    let scale = T::one().max(reward.value(sol.xi_i).abs());
    let tol = cfg.residual_tol;
    let ineq = cfg.inequality_tol * scale;

    let n = cfg.grid_points.max(3);
    let min_dominance_gap = linspace(sol.xi_e, sol.xi_i, n)
        .skip(1)
        .take(n - 2)
        .map(|x| sol.continuation(x) - reward.value(x))
        .fold(T::infinity(), T::min);

    let (je, ji) = sol.boundary_jets();
    let curvature_gap_e = je[2] - reward.d2(sol.xi_e);
    let curvature_gap_i = ji[2] - reward.d2(sol.xi_i);
    let curv_tol = cfg.inequality_tol * T::one().max(reward.d2(sol.xi_i).abs());

    let lo = sol.xi_e - T::two() / t.gamma_n.abs();
    let hi = sol.xi_i + T::two() / t.lambda.abs();
    let max_generator_excess = linspace(lo, hi, n)
        .filter(|&x| x < sol.xi_e || x > sol.xi_i)
        .map(|x| sol.generator(x) + x)
        .fold(T::neg_infinity(), T::max);

    VerificationReport {
        residuals,
        residual_tol: tol,
        value_matching: residuals[0].abs() < tol && residuals[2].abs() < tol,
        smooth_pasting: residuals[1].abs() < tol && residuals[3].abs() < tol,
        min_dominance_gap,
        dominance: !(min_dominance_gap < -ineq),
        curvature_gap_e,
        curvature_gap_i,
        curvature: curvature_gap_e >= -curv_tol && curvature_gap_i >= -curv_tol,
        max_generator_excess,
        generator: !(max_generator_excess > ineq),
        ordering: sol.xi_e < sol.x_plus
            && sol.x_plus < sol.xi_i
            && sol.xi_i + p.b() - t.xi1 > T::zero()
            && sol.delta_e0 <= T::zero(),
        coefficient_signs: sol.a1_at_i > T::zero() && sol.a2_at_e > T::zero(),
    }
}

/// A solved problem: thresholds, their verification and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved<T = f64> {
    pub solution: ThresholdSolution<T>,
    pub report: VerificationReport<T>,
    /// Number of sign changes of the outer function found while scanning.
    /// More than one means the reduced system has several roots; the first
    /// one passing verification is returned.
    pub sign_changes: usize,
    /// Asymptotic regime that seeded the outer bracket, if any.
    pub seeded_by: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T = f64> {
    /// Investing is worth it for high enough profit rates.
    Invest(Box<Solved<T>>),
    /// `g <= 0`: the policy reduces to exiting at `xi0`.
    NeverInvest { xi0: T, terms: InvestmentTerms<T> },
}

impl<T: Scalar> Outcome<T> {
    pub fn solved(&self) -> Option<&Solved<T>> {
        match self {
            Outcome::Invest(s) => Some(s),
            Outcome::NeverInvest { .. } => None,
        }
    }

    /// Unwraps the solved thresholds, treating never-invest as an error.
    pub fn into_solved(self) -> Result<Solved<T>> {
        match self {
            Outcome::Invest(s) => Ok(*s),
            Outcome::NeverInvest { terms, .. } => Err(Error::NeverInvest {
                g: terms.g.to_f64_lossy(),
            }),
        }
    }
}

/// The reduced two-equation system in gap coordinates.
struct GapSystem<T> {
    g: T,
    gp: T,
    gn: T,
    lam: T,
    /// `1/lam - 1/gn >= 0`.
    c11: T,
    /// `1/gp - 1/gn`.
    spread: T,
    /// `1/lam - 1/gp`.
    c12: T,
    /// `b + xi0 - xi1`.
    shift: T,
}

impl<T: Scalar> GapSystem<T> {
    fn new(p: &ModelParams<T>, t: &InvestmentTerms<T>) -> Self {
        GapSystem {
            g: t.g,
            gp: t.gamma_p,
            gn: t.gamma_n,
            lam: t.lambda,
            c11: t.lambda.recip() - t.gamma_n.recip(),
            spread: t.gamma_p.recip() - t.gamma_n.recip(),
            c12: t.lambda.recip() - t.gamma_p.recip(),
            shift: p.b() + t.xi0 - t.xi1,
        }
    }

    fn first_rhs(&self, d: T, e: T) -> T {
        -self.g * (-self.gp * d).exp()
            + self.c11 * (self.lam * (d + e + self.shift) - self.gp * d).exp()
    }

    /// Root of the first equation in `delta_e0` for fixed `delta_ie`.
    fn inner(&self, d: T, cfg: &SolverConfig<T>) -> Result<T> {
        let lo = -self.g * (-self.gp * d).exp();
        // RHS is decreasing in e and RHS(lo) >= lo, so RHS(hi) <= hi.
        let hi = self.first_rhs(d, lo);
        if !(hi > lo) {
            return Ok(lo);
        }
        let f = |e: T| e - self.first_rhs(d, e);
        let r = bisect(f, lo, hi, T::zero(), T::zero(), cfg.max_iter).ok_or_else(|| {
            Error::Convergence {
                stage: "inner gap root",
                detail: format!("no bracket at delta_ie = {d:e}"),
            }
        })?;
        if r.width > cfg.inner_tol * r.root.abs() && r.iterations >= cfg.max_iter {
            return Err(Error::Convergence {
                stage: "inner gap root",
                detail: format!(
                    "bracket width {:e} after {} iterations",
                    r.width, r.iterations
                ),
            });
        }
        Ok(r.root)
    }

    /// Second RHS minus first RHS at the inner root, scaled by `e^{gn D} > 0`
    /// so it stays finite for large `D`.
    fn outer(&self, d: T, cfg: &SolverConfig<T>) -> Result<T> {
        let e = self.inner(d, cfg)?;
        Ok(-self.g
            + (self.spread - e) * (self.gn * d).exp()
            + self.c12 * (self.lam * (d + e + self.shift)).exp())
    }
}

fn nonfinite<T: Scalar>(what: &str, v: T) -> Error {
    Error::Convergence {
        stage: "outer bracket",
        detail: format!("{what} reached {v:e} without a sign change"),
    }
}

/// Solves for the optimal thresholds, or reports that investing is never
/// optimal.
pub fn solve_thresholds<T: Scalar>(
    p: &ModelParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Outcome<T>> {
    let terms = investment_terms(p)?;
    if terms.never_invest {
        return Ok(Outcome::NeverInvest {
            xi0: terms.xi0,
            terms,
        });
    }
    let sys = GapSystem::new(p, &terms);
    let guess = initial_guess(p, &terms);
    let (mut lo, mut hi) = match guess {
        Some((_, d)) => (d / T::lit(4.0), d * T::lit(4.0)),
        None => (T::lit(1e-6), T::lit(50.0)),
    };

    // The outer function is positive as delta_ie -> 0+ and negative for
    // large delta_ie, so both ends can be pushed until the signs are right.
    let mut steps = 0;
    while sys.outer(lo, cfg)? <= T::zero() {
        lo = lo / T::lit(16.0);
        steps += 1;
        if steps > 200 || lo <= T::min_positive_value() {
            return Err(nonfinite("lower delta_ie", lo));
        }
    }
    steps = 0;
    while sys.outer(hi, cfg)? >= T::zero() {
        hi = hi * T::two();
        steps += 1;
        if steps > 200 || !hi.is_finite() {
            return Err(nonfinite("upper delta_ie", hi));
        }
    }

    // Probe the bracket on a log grid so that multiple roots are noticed.
    let n = cfg.scan_points.max(2);
    let ratio = (hi / lo).ln() / T::from_usize(n - 1).expect("scan size fits the scalar");
    let mut probes = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i + 1 == n {
            hi
        } else {
            lo * (ratio * T::from_usize(i).expect("scan index fits the scalar")).exp()
        };
        probes.push((d, sys.outer(d, cfg)?));
    }
    let intervals: Vec<(T, T)> = probes
        .windows(2)
        .filter(|w| (w[0].1 > T::zero()) != (w[1].1 > T::zero()))
        .map(|w| (w[0].0, w[1].0))
        .collect();
    let sign_changes = intervals.len();

    let mut first_within_tolerance: Option<(ThresholdSolution<T>, VerificationReport<T>)> = None;
    let mut diagnostics = Vec::new();
    for (a, b) in intervals {
        let mut failure = None;
        let r = bisect(
            |d| match sys.outer(d, cfg) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::nan()
                }
            },
            a,
            b,
            T::zero(),
            T::zero(),
            cfg.max_iter,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let Some(r) = r else {
            diagnostics.push(format!("lost bracket on [{a:e}, {b:e}]"));
            continue;
        };
        if r.width > cfg.outer_tol {
            diagnostics.push(format!(
                "outer width {:e} after {} iterations",
                r.width, r.iterations
            ));
            continue;
        }
        let d = r.root;
        let e = sys.inner(d, cfg)?;
        let sol = match ThresholdSolution::from_gap(p, terms.xi0 + e, d) {
            // Keep the unrounded gap: for small g it is far below ulp(xi0).
            Ok(s) => ThresholdSolution { delta_e0: e, ..s },
            Err(err) => {
                diagnostics.push(format!("delta_ie = {d:e}: {err}"));
                continue;
            }
        };
        let report = verify(&sol, cfg);
        if !(report.value_matching && report.smooth_pasting) {
            let res = report.residuals.map(|v| v.to_f64_lossy());
            diagnostics.push(format!("delta_ie = {d:e}: residuals {res:?}"));
            continue;
        }
        if report.passed() {
            return Ok(Outcome::Invest(Box::new(Solved {
                solution: sol,
                report,
                sign_changes,
                seeded_by: guess.map(|(r, _)| r),
            })));
        }
        first_within_tolerance.get_or_insert((sol, report));
    }
    match first_within_tolerance {
        Some((solution, report)) => Ok(Outcome::Invest(Box::new(Solved {
            solution,
            report,
            sign_changes,
            seeded_by: guess.map(|(r, _)| r),
        }))),
        None => Err(Error::Convergence {
            stage: "threshold system",
            detail: if diagnostics.is_empty() {
                "no sign change of the outer function".into()
            } else {
                diagnostics.join("; ")
            },
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve_ref(b: f64) -> Solved {
        solve_thresholds(&ModelParams::reference(b), &SolverConfig::default())
            .unwrap()
            .into_solved()
            .unwrap()
    }

    #[test]
    fn reference_solution() {
        let s = solve_ref(1.0);
        let sol = &s.solution;
        // Frozen from an independent scipy brentq solve of the same two gap
        // equations, followed by the textbook (non-anchored) coefficient formulas.
        assert_relative_eq!(sol.xi_e, -0.255410052136528, epsilon = 1e-10);
        assert_relative_eq!(sol.xi_i, 0.258440270232516, epsilon = 1e-10);
        assert_relative_eq!(sol.a1, 0.024279533331117, epsilon = 1e-10);
        assert_relative_eq!(sol.a2, 1.010275444580547, epsilon = 1e-10);
        assert!(s.report.passed(), "{}", s.report);
        assert_eq!(s.sign_changes, 1);
        for r in sol.residuals() {
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn never_invest_when_gain_nonpositive() {
        let out = solve_thresholds(&ModelParams::reference(0.4), &SolverConfig::default()).unwrap();
        match out {
            Outcome::NeverInvest { xi0, .. } => {
                assert_relative_eq!(xi0, -0.207106781186548, epsilon = 1e-12)
            }
            _ => panic!("expected never-invest"),
        }
        assert!(matches!(
            solve_thresholds(&ModelParams::reference(0.1), &SolverConfig::default())
                .unwrap()
                .into_solved(),
            Err(Error::NeverInvest { .. })
        ));
    }

    #[test]
    fn value_at_boundaries() {
        let s = solve_ref(1.0).solution;
        assert!(value_v1(&s, s.xi_e).abs() < 1e-12);
        let h_i = s.reward().value(s.xi_i);
        assert!(h_i > 0.0);
        assert_relative_eq!(s.value(s.xi_i), h_i, epsilon = 1e-12);
        assert!(s.value(s.x_plus) > 0.0);
        assert_eq!(s.value(s.xi_e - 1.0), 0.0);
    }

    #[test]
    fn coefficient_formulas_agree_with_raw_exponentials() {
        let s = solve_ref(1.0).solution;
        let c = coefficients(&s.params, s.xi_e, s.xi_i).unwrap();
        let (gp, gn) = (s.terms.gamma_p, s.terms.gamma_n);
        assert_relative_eq!(c.a1 * (gp * s.xi_i).exp(), c.a1_at_i, epsilon = 1e-14);
        assert_relative_eq!(c.a2 * (gn * s.xi_e).exp(), c.a2_at_e, epsilon = 1e-14);
        let x = 0.1;
        let raw = x / 1.0 - 1.0 + c.a1 * (gp * x).exp() + c.a2 * (gn * x).exp();
        assert_relative_eq!(raw, s.continuation(x), epsilon = 1e-13);
    }

    #[test]
    fn degenerate_interval_rejected() {
        let p = ModelParams::reference(1.0);
        assert!(matches!(
            coefficients(&p, 0.1, 0.1),
            Err(Error::DegenerateInterval { .. })
        ));
        assert!(coefficients(&p, 0.2, 0.1).is_err());
    }

    #[test]
    fn perturbed_investment_threshold_fails_smooth_pasting() {
        let cfg = SolverConfig::default();
        let s = solve_ref(1.0).solution;
        let bad = ThresholdSolution::value_matched(&s.params, s.xi_e, s.xi_i + 1e-2).unwrap();
        let rep = verify(&bad, &cfg);
        assert!(rep.value_matching, "{rep}");
        assert!(rep.residuals[3].abs() > cfg.residual_tol);
        assert!(!rep.smooth_pasting);
        assert!(!rep.passed());
        // At the true thresholds the value-matched fit is the solution itself.
        let same = ThresholdSolution::value_matched(&s.params, s.xi_e, s.xi_i).unwrap();
        assert!(verify(&same, &cfg).passed());
    }

    #[test]
    fn generator_below_exit_threshold() {
        let s = solve_ref(1.0).solution;
        for x in [s.xi_e - 0.01, s.xi_e - 1.0, -5.0] {
            assert_eq!(s.generator(x), 0.0);
            assert!(s.generator(x) <= -x);
        }
        // Inside, the value function solves the ODE with source x.
        let x = 0.0;
        assert!((s.generator(x) + x).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_boost_solves() {
        let p = ModelParams::reference(1.0).with_delta(0.0).unwrap();
        let s = solve_thresholds(&p, &SolverConfig::default())
            .unwrap()
            .into_solved()
            .unwrap();
        assert!(s.report.passed(), "{}", s.report);
    }

    #[test]
    fn extreme_boost_keeps_anchored_coefficients_finite() {
        let s = solve_ref(2000.0);
        assert!(s.report.passed(), "{}", s.report);
        let c = s.solution.coefficients();
        assert!(c.a1_at_i.is_finite() && c.a2_at_e.is_finite());
        assert!(s.solution.xi_e < -1000.0);
    }

    #[test]
    fn tiny_gain_resolves_tiny_gap() {
        let p = ModelParams::reference(1.0).with_gain(1e-4).unwrap();
        let s = solve_thresholds(&p, &SolverConfig::default())
            .unwrap()
            .into_solved()
            .unwrap();
        assert!(s.report.passed(), "{}", s.report);
        assert_eq!(s.seeded_by, Some(Regime::SmallG));
        assert!(s.solution.delta_e0 < 0.0 && s.solution.delta_e0 > -1e-20);
    }

    #[test]
    fn single_precision_solve_tracks_double() {
        let p32 = ModelParams::<f32>::new(1.0, -1.0, 0.5, 0.1, 1.0, 0.5).unwrap();
        let s32 = solve_thresholds(&p32, &SolverConfig::default())
            .unwrap()
            .into_solved()
            .unwrap();
        let s64 = solve_ref(1.0);
        assert!((s32.solution.xi_e as f64 - s64.solution.xi_e).abs() < 1e-3);
        assert!((s32.solution.xi_i as f64 - s64.solution.xi_i).abs() < 1e-3);
    }
}
