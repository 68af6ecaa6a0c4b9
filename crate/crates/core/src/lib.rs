//! Equilibria for binary-issue public decision markets.
//!
//! A public decision market (PDM) has `n` agents voting on `m` binary issues.
//! Pairwise issue expansion turns it into a Fisher market whose equilibria
//! project back to pairwise-pricing equilibria of the PDM. The crate provides
//! utilities and demand oracles, the expansion, convex-program solvers,
//! tâtonnement, equilibrium checkers and scripted experiments.

pub mod checkers;
pub mod cli;
pub mod demand;
pub mod error;
pub mod expansion;
pub mod experiments;
pub mod generate;
pub mod io;
pub mod model;
pub mod solver;
pub mod tatonnement;

pub use checkers::{
    check_delta_eq, check_delta_pme, check_ime, check_lindahl, check_me, check_pme, EquilibriumReport,
};
pub use demand::{demand, DemandRequest};
pub use error::{Error, Result};
pub use expansion::{lift_bundle, project_bundle, project_prices, reduce_instance, FisherInstance, GoodId};
pub use model::{
    build_phi, evaluate_utility, welfare, Bundle, Outcome, PdmInstance, PriceSystem, UtilityClass, UtilitySpec,
    WelfareFunction,
};
pub use solver::{brute_force_max_welfare, solve_fisher_eg, solve_pdm_nash, SolveResult};
pub use tatonnement::{run_fisher_tatonnement, run_lifted_tatonnement, TatonnementConfig};
