//! Equilibrium verification. Every checker returns a verdict together with
//! the residual of each condition it tested.

use serde::{Deserialize, Serialize};

use crate::demand::{demand, DemandRequest};
use crate::error::{Error, Result};
use crate::expansion::FisherInstance;
use crate::model::{dot, Outcome, PdmInstance, UtilitySpec};

pub const DEFAULT_TOL: f64 = 1e-6;

/// Environment variable that overrides [`DEFAULT_TOL`] for the CLI.
pub const TOL_ENV: &str = "PDM_TOL";

pub fn default_tol() -> f64 {
    std::env::var(TOL_ENV)
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(DEFAULT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub verdict: bool,
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Outcome>,
}

impl EquilibriumReport {
    fn new() -> Self {
        Self { verdict: true, conditions: Vec::new(), witness: None }
    }

    /// Record `residual <= threshold`.
    fn at_most(&mut self, name: impl Into<String>, residual: f64, threshold: f64) {
        self.push(name, residual, threshold, residual <= threshold);
    }

    fn push(&mut self, name: impl Into<String>, residual: f64, threshold: f64, pass: bool) {
        let pass = pass && !residual.is_nan();
        self.verdict &= pass;
        self.conditions.push(Condition { name: name.into(), residual, threshold, pass });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Value-certified demand membership: affordability, then utility against
/// the oracle optimum. The oracle runs uncapped when every desired good is
/// priced, and capped at the unit supply otherwise.
fn certify_demand(
    report: &mut EquilibriumReport,
    who: &str,
    spec: &UtilitySpec,
    budget: f64,
    prices: &[f64],
    bundle: &[f64],
    tol: f64,
) -> Result<()> {
    let spend = dot(bundle, prices);
    report.at_most(format!("{who} affordability"), (spend - budget).max(0.0), tol * (1.0 + budget));
    let all_priced = (0..prices.len()).all(|l| !spec.desires(l) || prices[l] > 0.0);
    let ceiling = if all_priced { None } else { Some(1.0) };
    let best = demand(&DemandRequest { spec, budget, prices, ceiling })?;
    let u_best = spec.evaluate(&best)?;
    let u = spec.evaluate(bundle)?;
    report.at_most(format!("{who} optimality"), (u_best - u).max(0.0), tol * (1.0 + u_best.abs()));
    Ok(())
}

fn check_dims(rows: &[Vec<f64>], n: usize, len: usize) -> Result<()> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
    }
    for r in rows {
        if r.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: r.len() });
        }
    }
    Ok(())
}

/// Fisher market equilibrium.
pub fn check_me(
    fisher: &FisherInstance,
    alloc: &[Vec<f64>],
    prices: &[f64],
    tol: f64,
) -> Result<EquilibriumReport> {
    let goods = fisher.good_count();
    check_dims(alloc, fisher.n, goods)?;
    check_dims(&[prices.to_vec()], 1, goods)?;
    let mut r = EquilibriumReport::new();
    for i in 0..fisher.n {
        certify_demand(
            &mut r,
            &format!("agent {i}"),
            &fisher.utilities[i],
            fisher.budgets[i],
            prices,
            &alloc[i],
            tol,
        )?;
    }
    for l in 0..goods {
        let sold: f64 = alloc.iter().map(|x| x[l]).sum();
        r.at_most(format!("good {l} oversell"), (sold - 1.0).max(0.0), tol);
        if prices[l] > tol {
            r.at_most(format!("good {l} clearing"), (1.0 - sold).max(0.0), tol);
        }
    }
    Ok(r)
}

fn linear_weights(spec: &UtilitySpec) -> Option<&[f64]> {
    match spec {
        UtilitySpec::Linear { weights } => Some(weights),
        UtilitySpec::Ces { weights, rho } if *rho == 1.0 => Some(weights),
        _ => None,
    }
}

/// Issue-pricing equilibrium: `bundles` are private purchases over issues.
pub fn check_ime(
    pdm: &PdmInstance,
    bundles: &[Vec<f64>],
    prices: &[f64],
    tol: f64,
) -> Result<EquilibriumReport> {
    check_dims(bundles, pdm.n, pdm.m)?;
    check_dims(&[prices.to_vec()], 1, pdm.m)?;
    for u in &pdm.utilities {
        if matches!(u, UtilitySpec::Leontief { .. } | UtilitySpec::NestedLeontief { .. }) {
            return Err(Error::UnsupportedClass(u.class_name().into()));
        }
    }
    if pdm.utilities.iter().all(|u| linear_weights(u).is_some()) {
        // Linear agents ignore what others buy, so this is the Fisher market
        // with the same weights.
        let fisher = FisherInstance::plain(pdm.m, pdm.budgets.clone(), pdm.utilities.clone())?;
        return check_me(&fisher, bundles, prices, tol);
    }

    let mut r = EquilibriumReport::new();
    for i in 0..pdm.n {
        let spec = &pdm.utilities[i];
        let who = format!("agent {i}");
        if linear_weights(spec).is_some() {
            certify_demand(&mut r, &who, spec, pdm.budgets[i], prices, &bundles[i], tol)?;
            continue;
        }
        let (weights, c, wpow) = match spec {
            UtilitySpec::CobbDouglas { weights } => (weights, 1.0, 1.0),
            UtilitySpec::Ces { weights, rho } => (weights, 1.0 - rho, *rho),
            _ => unreachable!(),
        };
        let spend = dot(&bundles[i], prices);
        let b = pdm.budgets[i];
        r.at_most(format!("{who} budget exhaustion"), (spend - b).abs(), tol * (1.0 + b));
        // Public amount agent i enjoys on each issue: everything bought on her side.
        let x: Vec<f64> = (0..pdm.m)
            .map(|j| {
                (0..pdm.n)
                    .filter(|&k| pdm.preferred[k][j] == pdm.preferred[i][j])
                    .map(|k| bundles[k][j])
                    .sum()
            })
            .collect();
        let q: Vec<Option<f64>> = (0..pdm.m)
            .map(|j| (weights[j] > 0.0).then(|| x[j].powf(c) * prices[j] / weights[j].powf(wpow)))
            .collect();
        let qmin = q.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let mut worst: f64 = 0.0;
        for j in 0..pdm.m {
            if bundles[i][j] > tol {
                let qj = q[j].unwrap_or(f64::INFINITY);
                let gap = if qmin > 0.0 { qj / qmin - 1.0 } else { f64::INFINITY };
                worst = worst.max(gap);
            }
        }
        r.at_most(format!("{who} equal product"), worst, tol);
    }
    for j in 0..pdm.m {
        let sold: f64 = bundles.iter().map(|y| y[j]).sum();
        r.at_most(format!("issue {j} oversell"), (sold - 1.0).max(0.0), tol);
        if prices[j] > tol {
            r.at_most(format!("issue {j} clearing"), (1.0 - sold).max(0.0), tol);
        }
    }
    let negative = bundles.iter().flatten().fold(0.0f64, |m, v| m.max(-v));
    r.at_most("nonnegative bundles", negative, 0.0);
    Ok(r)
}

/// Outcome induced by issue-pricing purchases: each side gets what its members bought.
pub fn issue_pricing_outcome(pdm: &PdmInstance, bundles: &[Vec<f64>]) -> Outcome {
    let z = (0..pdm.m)
        .map(|j| {
            let mut pair = [0.0; 2];
            for i in 0..pdm.n {
                pair[pdm.preferred[i][j] as usize] += bundles[i][j];
            }
            pair
        })
        .collect();
    Outcome { z }
}

/// Range of side-0 probabilities compatible with `y_ij <= z^{j,a_ij}` and
/// `z^{j,0} + z^{j,1} = 1`, per issue. Unanimous issues are pinned.
pub fn pme_witness_interval(pdm: &PdmInstance, bundles: &[Vec<f64>]) -> Vec<(f64, f64)> {
    (0..pdm.m)
        .map(|j| match pdm.unanimous(j) {
            Some(0) => (1.0, 1.0),
            Some(_) => (0.0, 0.0),
            None => {
                let m0 = side_max(pdm, bundles, j, 0);
                let m1 = side_max(pdm, bundles, j, 1);
                (m0, 1.0 - m1)
            }
        })
        .collect()
}

fn side_max(pdm: &PdmInstance, bundles: &[Vec<f64>], j: usize, a: u8) -> f64 {
    (0..pdm.n)
        .filter(|&i| pdm.preferred[i][j] == a)
        .map(|i| bundles[i][j])
        .fold(0.0, f64::max)
}

/// Pairwise-pricing equilibrium with personalized prices `prices[i][j]`.
pub fn check_pme(
    pdm: &PdmInstance,
    bundles: &[Vec<f64>],
    prices: &[Vec<f64>],
    tol: f64,
) -> Result<EquilibriumReport> {
    check_dims(bundles, pdm.n, pdm.m)?;
    check_dims(prices, pdm.n, pdm.m)?;
    let mut r = EquilibriumReport::new();
    for i in 0..pdm.n {
        certify_demand(
            &mut r,
            &format!("agent {i}"),
            &pdm.utilities[i],
            pdm.budgets[i],
            &prices[i],
            &bundles[i],
            tol,
        )?;
    }
    let mut z = Vec::with_capacity(pdm.m);
    for j in 0..pdm.m {
        let pair = match pdm.unanimous(j) {
            Some(0) => [1.0, 0.0],
            Some(_) => [0.0, 1.0],
            None => {
                // Side-0 maximum, unless only side 1 carries prices: then pin
                // side 1 to its maximum instead.
                let priced = |a: u8| (0..pdm.n).any(|i| pdm.preferred[i][j] == a && prices[i][j] > tol);
                let z0 = if priced(0) || !priced(1) {
                    side_max(pdm, bundles, j, 0)
                } else {
                    1.0 - side_max(pdm, bundles, j, 1)
                };
                [z0, 1.0 - z0]
            }
        };
        let mut cover: f64 = 0.0;
        let mut tight: f64 = 0.0;
        for i in 0..pdm.n {
            let zi = pair[pdm.preferred[i][j] as usize];
            cover = cover.max(bundles[i][j] - zi);
            if prices[i][j] > tol {
                tight = tight.max((bundles[i][j] - zi).abs());
            }
        }
        r.at_most(format!("issue {j} complement"), (pair[0] + pair[1] - 1.0).abs(), tol);
        r.at_most(format!("issue {j} cover"), cover.max(0.0), tol);
        r.at_most(format!("issue {j} tight"), tight, tol);
        z.push(pair);
    }
    r.witness = Some(Outcome { z });
    Ok(r)
}

/// Membership tolerance used by the δ-checkers: the δ slack also covers how
/// far a bundle may fall short of the demand optimum.
pub fn delta_membership_tol(delta: f64) -> f64 {
    DEFAULT_TOL.max(delta)
}

/// δ-equilibrium of a Fisher market.
pub fn check_delta_eq(
    fisher: &FisherInstance,
    alloc: &[Vec<f64>],
    prices: &[f64],
    delta: f64,
) -> Result<EquilibriumReport> {
    check_delta_eq_with(fisher, alloc, prices, delta, delta_membership_tol(delta))
}

pub fn check_delta_eq_with(
    fisher: &FisherInstance,
    alloc: &[Vec<f64>],
    prices: &[f64],
    delta: f64,
    membership_tol: f64,
) -> Result<EquilibriumReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must be >= 0")));
    }
    let goods = fisher.good_count();
    check_dims(alloc, fisher.n, goods)?;
    check_dims(&[prices.to_vec()], 1, goods)?;
    let mut r = EquilibriumReport::new();
    for i in 0..fisher.n {
        certify_demand(
            &mut r,
            &format!("agent {i}"),
            &fisher.utilities[i],
            fisher.budgets[i],
            prices,
            &alloc[i],
            membership_tol,
        )?;
    }
    for l in 0..goods {
        let sold: f64 = alloc.iter().map(|x| x[l]).sum();
        if prices[l] > delta {
            let residual = (1.0 - delta) - sold;
            // Non-strict, so an exact equilibrium also passes at delta = 0.
            r.at_most(format!("good {l} undersell"), residual, 0.0);
        }
        r.at_most(format!("good {l} oversell"), sold - 1.0, delta);
    }
    Ok(r)
}

/// δ-approximate pairwise equilibrium with the clamped witness.
pub fn check_delta_pme(
    pdm: &PdmInstance,
    bundles: &[Vec<f64>],
    prices: &[Vec<f64>],
    delta: f64,
) -> Result<EquilibriumReport> {
    check_delta_pme_with(pdm, bundles, prices, delta, delta_membership_tol(delta))
}

pub fn check_delta_pme_with(
    pdm: &PdmInstance,
    bundles: &[Vec<f64>],
    prices: &[Vec<f64>],
    delta: f64,
    membership_tol: f64,
) -> Result<EquilibriumReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} must be >= 0")));
    }
    check_dims(bundles, pdm.n, pdm.m)?;
    check_dims(prices, pdm.n, pdm.m)?;
    let mut r = EquilibriumReport::new();
    for i in 0..pdm.n {
        certify_demand(
            &mut r,
            &format!("agent {i}"),
            &pdm.utilities[i],
            pdm.budgets[i],
            &prices[i],
            &bundles[i],
            membership_tol,
        )?;
    }
    let price_floor = pdm.n as f64 * delta;
    let mut z = Vec::with_capacity(pdm.m);
    for j in 0..pdm.m {
        let pair = match pdm.unanimous(j) {
            Some(0) => [1.0, 0.0],
            Some(_) => [0.0, 1.0],
            None => {
                let z0 = side_max(pdm, bundles, j, 0);
                [z0, (1.0 - z0).max(0.0)]
            }
        };
        r.at_most(format!("issue {j} mass"), pair[0] + pair[1] - 1.0, delta);
        let mut cover = f64::NEG_INFINITY;
        let mut shortfall = f64::NEG_INFINITY;
        for i in 0..pdm.n {
            let zi = pair[pdm.preferred[i][j] as usize];
            cover = cover.max(bundles[i][j] - zi);
            if prices[i][j] > price_floor {
                shortfall = shortfall.max(zi - bundles[i][j]);
            }
        }
        r.at_most(format!("issue {j} cover"), cover, delta);
        if shortfall > f64::NEG_INFINITY {
            r.at_most(format!("issue {j} tight"), shortfall, delta);
        }
        z.push(pair);
    }
    r.witness = Some(Outcome { z });
    Ok(r)
}

/// Per agent, per issue, per side prices.
pub type LindahlPrices = Vec<Vec<[f64; 2]>>;

/// Each agent pays her personalized price for her own side and nothing for the other.
pub fn lindahl_prices(pdm: &PdmInstance, personalized: &[Vec<f64>]) -> LindahlPrices {
    (0..pdm.n)
        .map(|i| {
            (0..pdm.m)
                .map(|j| {
                    let mut pair = [0.0; 2];
                    pair[pdm.preferred[i][j] as usize] = personalized[i][j];
                    pair
                })
                .collect()
        })
        .collect()
}

/// Lindahl conditions for a PDM outcome.
pub fn check_lindahl(
    pdm: &PdmInstance,
    outcome: &Outcome,
    prices: &LindahlPrices,
    tol: f64,
) -> Result<EquilibriumReport> {
    if outcome.m() != pdm.m {
        return Err(Error::DimensionMismatch { expected: pdm.m, got: outcome.m() });
    }
    if prices.len() != pdm.n || prices.iter().any(|row| row.len() != pdm.m) {
        return Err(Error::DimensionMismatch { expected: pdm.n, got: prices.len() });
    }
    let mut r = EquilibriumReport::new();
    for j in 0..pdm.m {
        let [z0, z1] = outcome.z[j];
        r.at_most(format!("issue {j} feasibility"), (z0 + z1 - 1.0).max(0.0), tol);
    }
    for i in 0..pdm.n {
        let who = format!("agent {i}");
        let own: Vec<f64> = (0..pdm.m).map(|j| prices[i][j][pdm.preferred[i][j] as usize]).collect();
        let x = crate::model::public_quantities(pdm, outcome, i);
        let spend: f64 = (0..pdm.m)
            .map(|j| prices[i][j][0] * outcome.z[j][0] + prices[i][j][1] * outcome.z[j][1])
            .sum();
        let b = pdm.budgets[i];
        r.at_most(format!("{who} affordability"), (spend - b).max(0.0), tol * (1.0 + b));
        let spec = &pdm.utilities[i];
        let all_priced = (0..pdm.m).all(|j| !spec.desires(j) || own[j] > 0.0);
        let ceiling = if all_priced { None } else { Some(1.0) };
        let best = demand(&DemandRequest { spec, budget: b, prices: &own, ceiling })?;
        let u_best = spec.evaluate(&best)?;
        let u = spec.evaluate(&x)?;
        r.at_most(format!("{who} optimality"), (u_best - u).max(0.0), tol * (1.0 + u_best.abs()));
        // A positive price on the side she opposes means she wants none of it.
        let off: f64 = (0..pdm.m)
            .filter(|&j| prices[i][j][1 - pdm.preferred[i][j] as usize] > tol)
            .map(|j| outcome.z[j][1 - pdm.preferred[i][j] as usize])
            .fold(0.0, f64::max);
        r.at_most(format!("{who} off-side"), off, tol);
    }
    for j in 0..pdm.m {
        let s0: f64 = prices.iter().map(|row| row[j][0]).sum();
        let s1: f64 = prices.iter().map(|row| row[j][1]).sum();
        let [z0, z1] = outcome.z[j];
        r.at_most(format!("issue {j} side balance"), (s0 - s1).abs(), tol);
        let profit_gap = s0.max(s1) - (s0 * z0 + s1 * z1);
        r.at_most(format!("issue {j} producer profit"), profit_gap.max(0.0), tol);
    }
    Ok(r)
}
