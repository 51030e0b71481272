//! Optimal exit and one-time investment for a firm whose profit rate follows
//! an arithmetic Brownian motion.
//!
//! The firm may exit (value 0) or pay `k` once to raise the profit rate by
//! `b` and its drift by `delta`. [`solve_thresholds`] finds the exit
//! threshold `xi_E` and investment threshold `xi_I` and checks them against
//! the sufficient optimality conditions; [`mc`] provides an independent
//! Monte Carlo oracle for any threshold policy.
//!
//! Everything except the simulator is generic over the scalar type; the
//! aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod asymptotics;
mod error;
pub mod mc;
pub mod model;
mod roots;
mod scalar;
pub mod solver;

pub use analysis::{
    exponent_derivatives, locate_sigma2_sign_change, p_invest, p_invest_sigma2_slope, salvage_exit,
    sweep_row, tech_switch, threshold_derivatives, ExponentDerivatives, FiniteDifference,
    RowStatus, SalvageParams, StaticsRow,
};
pub use asymptotics::{
    large_b_expansion, large_b_slopes, small_g_expansion, solve_theta, theta_derivatives,
    AsymptoticReport, Regime,
};
pub use error::{Error, Result};
pub use mc::{
    estimate_p_invest, grid_search, simulate_policy, PathConfig, PolicySpec, SimEstimate,
};
pub use model::{
    delta_v, demand_to_params, exit_value, investment_terms, make_exit_model, reward_h, ExitModel,
    InvestmentTerms, ModelParams,
};
pub use scalar::Scalar;
pub use solver::{
    coefficients, solve_thresholds, value_v1, verify, Coefficients, Outcome, Solved, SolverConfig,
    ThresholdSolution, VerificationReport,
};

pub type Params = ModelParams<f64>;
pub type Exit = ExitModel<f64>;
pub type Terms = InvestmentTerms<f64>;
pub type Solution = ThresholdSolution<f64>;
pub type Report = VerificationReport<f64>;
pub type Config = SolverConfig<f64>;
pub type Statics = StaticsRow<f64>;
pub type Salvage = SalvageParams<f64>;
