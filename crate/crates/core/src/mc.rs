//! Monte Carlo evaluation of threshold policies on discretized paths.
//!
//! Each path draws its Gaussian increments from its own ChaCha stream
//! (`seed`, stream = path index), so results do not depend on how paths are
//! scheduled across threads. Paths are processed in fixed-size blocks whose
//! compensated sums are merged in block order.
//!
//! A single evaluator handles a whole grid of policies at once. The
//! pre-investment path is shared by every policy; each investment level gets
//! one post-investment scan that serves all post-investment exit levels.
//! A single policy is the 1x1x1 grid, so grid cells reproduce
//! [`simulate_policy`] bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::ThresholdSolution;

const BLOCK: usize = 256;

/// Exit before investing at `exit_pre`, invest at `invest` (may be `+inf`),
/// exit after investing at `exit_post`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub exit_pre: f64,
    pub invest: f64,
    pub exit_post: f64,
}

impl PolicySpec {
    pub fn new(exit_pre: f64, invest: f64, exit_post: f64) -> Result<Self> {
        if !exit_pre.is_finite() {
            return Err(Error::Config(format!(
                "exit_pre must be finite, got {exit_pre}"
            )));
        }
        if !(invest > exit_pre) {
            return Err(Error::Config(format!(
                "invest ({invest}) must exceed exit_pre ({exit_pre})"
            )));
        }
        if exit_post.is_nan() || exit_post == f64::INFINITY {
            return Err(Error::Config(format!(
                "exit_post must be finite or -inf, got {exit_post}"
            )));
        }
        Ok(PolicySpec {
            exit_pre,
            invest,
            exit_post,
        })
    }

    /// Never invest; exit at `exit`.
    pub fn exit_only(exit: f64) -> Result<Self> {
        Self::new(exit, f64::INFINITY, f64::NEG_INFINITY)
    }

    pub fn from_solution(sol: &ThresholdSolution) -> Self {
        PolicySpec {
            exit_pre: sol.xi_e,
            invest: sol.xi_i,
            exit_post: sol.xi1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub x0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PathConfig {
    /// `dt = 1e-4 / alpha` and `horizon = 40 / alpha`.
    pub fn new(alpha: f64, x0: f64, n_paths: usize, seed: u64) -> Self {
        PathConfig {
            x0,
            dt: 1e-4 / alpha,
            horizon: 40.0 / alpha,
            n_paths,
            seed,
        }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::Config(format!("x0 must be finite, got {}", self.x0)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= 10.0 / alpha) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be at least 10/alpha = {}, got {}",
                10.0 / alpha,
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(Error::Config("dt exceeds the horizon".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("at least one path is required".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Fraction of paths that invested before exiting.
    pub p_invest_hat: f64,
    /// Bound on the discounted profit beyond the horizon.
    pub tail_bound: f64,
    pub n_paths: usize,
}

/// Bound on the contribution of `[T, inf)` to the discounted integral.
pub fn tail_bound(p: &ModelParams, cfg: &PathConfig) -> f64 {
    let t = cfg.horizon;
    let a = p.alpha();
    (-a * t).exp()
        * (cfg.x0.abs() + p.mu().abs() * t + p.sigma() * (2.0 * t / std::f64::consts::PI).sqrt())
        / a
}

/// Barrier shift that approximately corrects discrete monitoring of a
/// continuous crossing: `0.5826 sigma sqrt(dt)`.
pub fn crossing_shift(sigma: f64, dt: f64) -> f64 {
    0.5826 * sigma * dt.sqrt()
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.add(other.carry);
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CellStats {
    v: Compensated,
    v2: Compensated,
    /// Paired difference against the reference cell.
    d: Compensated,
    d2: Compensated,
    invested: u64,
}

impl CellStats {
    fn merge(&mut self, o: &CellStats) {
        self.v.merge(&o.v);
        self.v2.merge(&o.v2);
        self.d.merge(&o.d);
        self.d2.merge(&o.d2);
        self.invested += o.invested;
    }
}

fn mean_se(sum: &Compensated, sum2: &Compensated, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum.value() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum2.value() / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Sorted threshold levels defining a grid of policies.
struct Levels {
    exit_pre: Vec<f64>,
    invest: Vec<f64>,
    exit_post: Vec<f64>,
}

impl Levels {
    fn cells(&self) -> usize {
        self.exit_pre.len() * self.invest.len() * self.exit_post.len()
    }

    fn index(&self, a: usize, c: usize, r: usize) -> usize {
        (a * self.invest.len() + c) * self.exit_post.len() + r
    }
}

/// Lazily generated Brownian increments of one path.
struct Noise {
    rng: ChaCha8Rng,
    scale: f64,
    dw: Vec<f64>,
}

impl Noise {
    fn at(&mut self, i: usize) -> f64 {
        while self.dw.len() <= i {
            let z: f64 = self.rng.sample(StandardNormal);
            self.dw.push(self.scale * z);
        }
        self.dw[i]
    }
}

struct Engine<'a> {
    levels: &'a Levels,
    x0: f64,
    b: f64,
    k: f64,
    drift_dt: f64,
    drift_plus_dt: f64,
    decay: f64,
    half_dt: f64,
    steps: usize,
    sqrt_dt_sigma: f64,
    seed: u64,
    reference: usize,
}

/// State at the step an investment level is first reached.
#[derive(Clone, Copy)]
struct Hit {
    step: usize,
    integral: f64,
    disc: f64,
    x: f64,
}

impl Engine<'_> {
    /// Values of every cell on path `idx`, written into `out` and `inv`.
    fn path(
        &self,
        idx: u64,
        noise_buf: &mut Vec<f64>,
        out: &mut [f64],
        inv: &mut [bool],
        post: &mut [f64],
    ) {
        let lv = self.levels;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(idx);
        noise_buf.clear();
        let mut noise = Noise {
            rng,
            scale: self.sqrt_dt_sigma,
            dw: std::mem::take(noise_buf),
        };

        let (m, n_inv, q) = (lv.exit_pre.len(), lv.invest.len(), lv.exit_post.len());
        let mut exit_hit: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut inv_hit: Vec<Option<Hit>> = vec![None; n_inv];

        let (mut x, mut s, mut disc, mut i) = (self.x0, 0.0, 1.0, 0usize);
        let mut next_e = m;
        let mut next_l = 0;
        loop {
            while next_e > 0 && x <= lv.exit_pre[next_e - 1] {
                next_e -= 1;
                exit_hit[next_e] = Some((i, s));
            }
            while next_l < n_inv && x >= lv.invest[next_l] {
                inv_hit[next_l] = Some(Hit {
                    step: i,
                    integral: s,
                    disc,
                    x,
                });
                next_l += 1;
            }
            if next_e == 0 || next_l == n_inv || i == self.steps {
                break;
            }
            let x_new = x + self.drift_dt + noise.at(i);
            let disc_new = disc * self.decay;
            s += self.half_dt * (disc * x + disc_new * x_new);
            x = x_new;
            disc = disc_new;
            i += 1;
        }
        let horizon_integral = s;

        for (c, hit) in inv_hit.iter().enumerate() {
            let Some(h) = hit else {
                for (a, ex) in exit_hit.iter().enumerate().take(m) {
                    let v = ex.map_or(horizon_integral, |(_, se)| se);
                    for r in 0..q {
                        let j = lv.index(a, c, r);
                        out[j] = v;
                        inv[j] = false;
                    }
                }
                continue;
            };
            let invests = |a: usize| exit_hit[a].is_none_or(|(e, _)| h.step < e);
            if (0..m).any(invests) {
                self.post_scan(h, &mut noise, post);
            }
            for (a, ex) in exit_hit.iter().enumerate().take(m) {
                let investing = invests(a);
                for (r, &pv) in post.iter().enumerate().take(q) {
                    let j = lv.index(a, c, r);
                    if investing {
                        out[j] = pv - self.k * h.disc;
                    } else {
                        out[j] = ex.map_or(horizon_integral, |(_, se)| se);
                    }
                    inv[j] = investing;
                }
            }
        }
        *noise_buf = noise.dw;
    }

    /// Discounted integral at each post-investment exit level.
    fn post_scan(&self, h: &Hit, noise: &mut Noise, post: &mut [f64]) {
        let lv = &self.levels.exit_post;
        let (mut y, mut s, mut disc, mut i) = (h.x + self.b, h.integral, h.disc, h.step);
        let mut next_p = lv.len();
        loop {
            while next_p > 0 && y <= lv[next_p - 1] {
                next_p -= 1;
                post[next_p] = s;
            }
            if next_p == 0 || i == self.steps {
                break;
            }
            let y_new = y + self.drift_plus_dt + noise.at(i);
            let disc_new = disc * self.decay;
            s += self.half_dt * (disc * y + disc_new * y_new);
            y = y_new;
            disc = disc_new;
            i += 1;
        }
        for v in &mut post[..next_p] {
            *v = s;
        }
    }

    fn block(&self, first: usize, last: usize) -> Vec<CellStats> {
        let n = self.levels.cells();
        let mut stats = vec![CellStats::default(); n];
        let mut out = vec![0.0; n];
        let mut inv = vec![false; n];
        let mut post = vec![0.0; self.levels.exit_post.len()];
        let mut buf = Vec::new();
        for idx in first..last {
            self.path(idx as u64, &mut buf, &mut out, &mut inv, &mut post);
            let reference = out[self.reference];
            for ((st, &v), &invested) in stats.iter_mut().zip(&out).zip(&inv) {
                st.v.add(v);
                st.v2.add(v * v);
                let d = v - reference;
                st.d.add(d);
                st.d2.add(d * d);
                st.invested += u64::from(invested);
            }
        }
        stats
    }

    fn run(&self, n_paths: usize) -> Vec<CellStats> {
        let blocks = n_paths.div_ceil(BLOCK);
        let parts: Vec<Vec<CellStats>> = (0..blocks)
            .into_par_iter()
            .map(|blk| self.block(blk * BLOCK, ((blk + 1) * BLOCK).min(n_paths)))
            .collect();
        let mut total = vec![CellStats::default(); self.levels.cells()];
        for part in &parts {
            for (t, s) in total.iter_mut().zip(part) {
                t.merge(s);
            }
        }
        total
    }
}

fn evaluate(
    p: &ModelParams,
    levels: &Levels,
    reference: usize,
    cfg: &PathConfig,
) -> Result<Vec<CellStats>> {
    cfg.validate(p.alpha())?;
    let engine = Engine {
        levels,
        x0: cfg.x0,
        b: p.b(),
        k: p.k(),
        drift_dt: p.mu() * cfg.dt,
        drift_plus_dt: p.mu_plus() * cfg.dt,
        decay: (-p.alpha() * cfg.dt).exp(),
        half_dt: 0.5 * cfg.dt,
        steps: cfg.steps(),
        sqrt_dt_sigma: p.sigma() * cfg.dt.sqrt(),
        seed: cfg.seed,
        reference,
    };
    Ok(engine.run(cfg.n_paths))
}

fn estimate(stats: &CellStats, p: &ModelParams, cfg: &PathConfig) -> SimEstimate {
    let (mean, std_error) = mean_se(&stats.v, &stats.v2, cfg.n_paths);
    SimEstimate {
        mean,
        std_error,
        p_invest_hat: stats.invested as f64 / cfg.n_paths as f64,
        tail_bound: tail_bound(p, cfg),
        n_paths: cfg.n_paths,
    }
}

/// Expected discounted net profit of following `pol` from `cfg.x0`.
pub fn simulate_policy(p: &ModelParams, pol: &PolicySpec, cfg: &PathConfig) -> Result<SimEstimate> {
    let levels = Levels {
        exit_pre: vec![pol.exit_pre],
        invest: vec![pol.invest],
        exit_post: vec![pol.exit_post],
    };
    let stats = evaluate(p, &levels, 0, cfg)?;
    Ok(estimate(&stats[0], p, cfg))
}

/// Frequency of investing before exiting, with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub p_hat: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Fraction of paths from `cfg.x0` that reach `pol.invest` before
/// `pol.exit_pre`. Paths stop at either threshold.
pub fn estimate_p_invest(p: &ModelParams, pol: &PolicySpec, cfg: &PathConfig) -> Result<Frequency> {
    if !(cfg.x0 > pol.exit_pre && cfg.x0 < pol.invest) {
        return Err(Error::domain(
            "x0",
            cfg.x0,
            "must lie strictly between exit_pre and invest",
        ));
    }
    let levels = Levels {
        exit_pre: vec![pol.exit_pre],
        invest: vec![pol.invest],
        // Exiting immediately after the investment ends the path there.
        exit_post: vec![f64::MAX],
    };
    let stats = evaluate(p, &levels, 0, cfg)?;
    let n = cfg.n_paths as f64;
    let p_hat = stats[0].invested as f64 / n;
    Ok(Frequency {
        p_hat,
        std_error: (p_hat * (1.0 - p_hat) / n).sqrt(),
        n_paths: cfg.n_paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub policy: PolicySpec,
    pub estimate: SimEstimate,
    /// Mean of `cell - center` over common paths.
    pub diff_mean: f64,
    pub diff_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: PolicySpec,
    pub best_index: usize,
    pub center_index: usize,
    /// Cells in `(exit_pre, invest, exit_post)` lexicographic order;
    /// `None` where `exit_pre >= invest`.
    pub surface: Vec<Option<GridCell>>,
}

impl GridResult {
    pub fn center(&self) -> &GridCell {
        self.surface[self.center_index]
            .as_ref()
            .expect("the center is always a valid policy")
    }

    /// Largest `(cell - center) / paired SE` over all cells.
    pub fn max_paired_z(&self) -> f64 {
        self.surface
            .iter()
            .flatten()
            .enumerate()
            .filter(|(i, _)| *i != self.center_index)
            .map(|(_, c)| {
                if c.diff_se > 0.0 {
                    c.diff_mean / c.diff_se
                } else {
                    0.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn axis(center: f64, radius: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 || radius == 0.0 || !center.is_finite() {
        return vec![center];
    }
    (0..steps)
        .map(|i| center + radius * (2.0 * i as f64 / (steps - 1) as f64 - 1.0))
        .collect()
}

/// Evaluates every policy on a `steps^3` grid of half-width `radius` around
/// `center`, all on the same paths.
pub fn grid_search(
    p: &ModelParams,
    center: &PolicySpec,
    radius: f64,
    steps: usize,
    cfg: &PathConfig,
) -> Result<GridResult> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!(
            "radius must be finite and >= 0, got {radius}"
        )));
    }
    if steps == 0 {
        return Err(Error::Config("grid needs at least one step".into()));
    }
    let levels = Levels {
        exit_pre: axis(center.exit_pre, radius, steps),
        invest: axis(center.invest, radius, steps),
        exit_post: axis(center.exit_post, radius, steps),
    };
    let mid = |v: &Vec<f64>| v.len() / 2;
    let center_index = levels.index(
        mid(&levels.exit_pre),
        mid(&levels.invest),
        mid(&levels.exit_post),
    );
    let stats = evaluate(p, &levels, center_index, cfg)?;

    let mut surface = Vec::with_capacity(stats.len());
    for (a, &e) in levels.exit_pre.iter().enumerate() {
        for (c, &l) in levels.invest.iter().enumerate() {
            for (r, &x) in levels.exit_post.iter().enumerate() {
                let st = &stats[levels.index(a, c, r)];
                surface.push((e < l).then(|| {
                    let (diff_mean, diff_se) = mean_se(&st.d, &st.d2, cfg.n_paths);
                    GridCell {
                        policy: PolicySpec {
                            exit_pre: e,
                            invest: l,
                            exit_post: x,
                        },
                        estimate: estimate(st, p, cfg),
                        diff_mean,
                        diff_se,
                    }
                }));
            }
        }
    }
    let best_index = surface
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c.estimate.mean)))
        .fold((center_index, f64::NEG_INFINITY), |acc, (i, m)| {
            if m > acc.1 {
                (i, m)
            } else {
                acc
            }
        })
        .0;
    let best = surface[best_index]
        .expect("best index refers to a valid cell")
        .policy;
    Ok(GridResult {
        best,
        best_index,
        center_index,
        surface,
    })
}
