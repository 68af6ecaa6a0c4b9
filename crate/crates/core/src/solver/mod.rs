//! Maximum Nash welfare: the PDM program, the Fisher EG program, price
//! recovery, and a grid-search oracle.

pub mod barrier;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{FisherInstance, PairwiseIndex};
use crate::model::{
    agent_utilities, aggregate_welfare, nash_welfare, Outcome, PdmInstance, PriceSystem,
    UtilitySpec, WelfareFunction,
};
use barrier::{Affine, Aggregator, BarrierOptions, BarrierSolution, Constraint, LogTerm, Program};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Infinity norm of the Lagrangian gradient.
    pub stationarity: f64,
    /// Largest violation of a feasibility constraint.
    pub feasibility: f64,
    /// Barrier duality gap bound on the log objective.
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Set for PDM solves and for reduced markets.
    pub outcome: Option<Outcome>,
    /// PDM: one demand bundle per agent over issues. Fisher: per agent over goods.
    pub allocation: Vec<Vec<f64>>,
    pub prices: PriceSystem,
    /// PDM solves also report supporting prices on the pairwise goods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_prices: Option<Vec<f64>>,
    /// Budget-weighted Nash welfare.
    pub objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Agents that cannot reach positive utility and were left out of the product.
    #[serde(default)]
    pub excluded_agents: Vec<usize>,
}

/// Options shared by both solvers.
fn barrier_options(tol: f64, total_budget: f64) -> BarrierOptions {
    let tol = if tol.is_finite() && tol > 0.0 { tol } else { crate::checkers::DEFAULT_TOL };
    // Below about 1e-8 per unit budget the slacks lose their relative precision
    // and the recovered prices drift.
    let scale = total_budget.max(1e-12);
    BarrierOptions { gap: (tol.min(1e-6) * 1e-3).max(1e-8) * scale, ..Default::default() }
}

/// How an agent's utility was encoded: which term, and for Leontief pieces
/// which constraints carry the marginal values of each input.
#[derive(Debug, Clone)]
enum Encoding {
    Smooth { term: usize, slots: Vec<usize> },
    Leontief { constraints: Vec<(usize, usize)> },
    Nested { groups: Vec<(usize, Vec<(usize, usize)>)> },
}

struct Builder {
    prog: Program,
    start: Vec<f64>,
}

impl Builder {
    fn new(dim: usize, start: Vec<f64>) -> Self {
        Self { prog: Program::new(dim), start }
    }

    fn aux(&mut self, value: f64) -> usize {
        self.start.push(value);
        self.prog.add_var()
    }

    fn constrain(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.prog.constraints.push(Constraint { terms, rhs });
        self.prog.constraints.len() - 1
    }

    /// Encode `weight * ln u(inputs)`; `None` inputs are coordinates the spec ignores.
    fn agent(&mut self, weight: f64, spec: &UtilitySpec, inputs: &[Option<Affine>]) -> Encoding {
        let smooth = |agg: fn(Vec<f64>, Option<f64>) -> Aggregator,
                      w: &[f64],
                      rho: Option<f64>,
                      me: &mut Builder| {
            let slots: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0 && inputs[j].is_some()).collect();
            let weights = slots.iter().map(|&j| w[j]).collect();
            let ins = slots.iter().map(|&j| inputs[j].clone().unwrap()).collect();
            me.prog.terms.push(LogTerm { weight, agg: agg(weights, rho), inputs: ins });
            Encoding::Smooth { term: me.prog.terms.len() - 1, slots }
        };
        match spec {
            UtilitySpec::Linear { weights } => {
                smooth(|w, _| Aggregator::Linear(w), weights, None, self)
            }
            UtilitySpec::Ces { weights, rho } if *rho == 1.0 => {
                smooth(|w, _| Aggregator::Linear(w), weights, None, self)
            }
            UtilitySpec::CobbDouglas { weights } => {
                smooth(|w, _| Aggregator::CobbDouglas(w), weights, None, self)
            }
            UtilitySpec::Ces { weights, rho } => {
                smooth(|w, r| Aggregator::Ces(w, r.unwrap()), weights, Some(*rho), self)
            }
            UtilitySpec::Leontief { weights } => {
                let slots: Vec<usize> =
                    (0..weights.len()).filter(|&j| weights[j] > 0.0 && inputs[j].is_some()).collect();
                let init = slots
                    .iter()
                    .map(|&j| inputs[j].as_ref().unwrap().eval(&self.start) / weights[j])
                    .fold(f64::INFINITY, f64::min);
                let s = self.aux(0.5 * init);
                self.prog.terms.push(LogTerm {
                    weight,
                    agg: Aggregator::Linear(vec![1.0]),
                    inputs: vec![Affine::var(s)],
                });
                let mut constraints = Vec::new();
                for &j in &slots {
                    let a = inputs[j].as_ref().unwrap();
                    // w s - input < 0
                    let mut terms = vec![(s, weights[j])];
                    terms.extend(a.terms.iter().map(|&(k, c)| (k, -c)));
                    constraints.push((j, self.constrain(terms, a.constant)));
                }
                Encoding::Leontief { constraints }
            }
            UtilitySpec::NestedLeontief { outer, groups, .. } => {
                let mut outer_inputs = vec![None; groups.len()];
                let mut encoded = Vec::new();
                for (g, members) in groups.iter().enumerate() {
                    if !outer.desires(g) || members.iter().any(|&l| inputs[l].is_none()) {
                        continue;
                    }
                    let init = members
                        .iter()
                        .map(|&l| inputs[l].as_ref().unwrap().eval(&self.start))
                        .fold(f64::INFINITY, f64::min);
                    let s = self.aux(0.5 * init);
                    self.constrain(vec![(s, -1.0)], 0.0);
                    let mut cons = Vec::new();
                    for &l in members {
                        let a = inputs[l].as_ref().unwrap();
                        let mut terms = vec![(s, 1.0)];
                        terms.extend(a.terms.iter().map(|&(k, c)| (k, -c)));
                        cons.push((l, self.constrain(terms, a.constant)));
                    }
                    outer_inputs[g] = Some(Affine::var(s));
                    encoded.push((g, cons));
                }
                // Marginals come from the group constraints, not the outer term.
                self.agent(weight, outer, &outer_inputs);
                Encoding::Nested { groups: encoded }
            }
        }
    }
}

/// Marginal value `weight * d ln u / d input` per input coordinate.
fn marginals(enc: &Encoding, sol: &BarrierSolution, grads: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    match enc {
        Encoding::Smooth { term, slots } => {
            for (a, &j) in slots.iter().enumerate() {
                out[j] = grads[*term][a];
            }
        }
        Encoding::Leontief { constraints } => {
            for &(j, c) in constraints {
                out[j] = sol.multipliers[c];
            }
        }
        Encoding::Nested { groups } => {
            for (_, cons) in groups {
                for &(l, c) in cons {
                    out[l] = sol.multipliers[c];
                }
            }
        }
    }
    out
}

/// Maximize budget-weighted Nash welfare over valid PDM outcomes.
pub fn solve_pdm_nash(pdm: &PdmInstance, tol: f64) -> Result<SolveResult> {
    pdm.validate()?;
    let idx = PairwiseIndex::new(pdm);
    let nc = idx.contested.len();
    let mut var_of = vec![None; pdm.m];
    for (c, &j) in idx.contested.iter().enumerate() {
        var_of[j] = Some(c);
    }
    let mut b = Builder::new(nc, vec![0.5; nc]);
    for c in 0..nc {
        b.constrain(vec![(c, -1.0)], 0.0);
        b.constrain(vec![(c, 1.0)], 1.0);
    }
    let mut encodings = Vec::with_capacity(pdm.n);
    for i in 0..pdm.n {
        let inputs: Vec<Option<Affine>> = (0..pdm.m)
            .map(|j| {
                Some(match (var_of[j], pdm.preferred[i][j]) {
                    (None, _) => Affine::constant(1.0),
                    (Some(c), 0) => Affine::var(c),
                    (Some(c), _) => Affine { terms: vec![(c, -1.0)], constant: 1.0 },
                })
            })
            .collect();
        encodings.push(b.agent(pdm.budgets[i], &pdm.utilities[i], &inputs));
    }
    let opts = barrier_options(tol, pdm.total_budget());
    let sol = if b.prog.dim == 0 {
        BarrierSolution {
            v: vec![],
            multipliers: vec![],
            objective: b.prog.objective(&[]).unwrap_or(f64::NEG_INFINITY),
            iterations: 0,
            mu: 0.0,
            stationarity: 0.0,
        }
    } else {
        b.prog.solve(b.start.clone(), &opts)?
    };

    let z: Vec<[f64; 2]> = (0..pdm.m)
        .map(|j| match var_of[j] {
            Some(c) => {
                let t = sol.v[c].clamp(0.0, 1.0);
                [t, 1.0 - t]
            }
            None if pdm.preferred[0][j] == 0 => [1.0, 0.0],
            None => [0.0, 1.0],
        })
        .collect();
    let outcome = Outcome { z };
    let utilities = agent_utilities(pdm, &outcome)?;

    let grads = b.prog.input_gradients(&sol.v).unwrap_or_default();
    let g: Vec<Vec<f64>> = encodings.iter().map(|e| marginals(e, &sol, &grads, pdm.m)).collect();
    let (personal, pairwise) = balance_prices(pdm, &idx, &g);

    let allocation = (0..pdm.n)
        .map(|i| {
            let x = crate::model::public_quantities(pdm, &outcome, i);
            match &pdm.utilities[i] {
                UtilitySpec::Leontief { weights } => weights.iter().map(|w| w * utilities[i]).collect(),
                _ => x,
            }
        })
        .collect();
    Ok(SolveResult {
        objective: nash_welfare(&utilities, &pdm.budgets),
        outcome: Some(outcome),
        allocation,
        prices: PriceSystem::Personalized(personal),
        pairwise_prices: Some(pairwise),
        iterations: sol.iterations,
        residuals: Residuals {
            stationarity: sol.stationarity,
            feasibility: 0.0,
            duality_gap: sol.mu * b.prog.constraints.len() as f64,
        },
        excluded_agents: Vec::new(),
    })
}

/// Split each issue's marginal values into nonnegative pairwise prices whose
/// per-agent sums reproduce them. The lighter side is scaled up to the heavier
/// one; at an optimum the sides balance unless the issue sits at a corner, and
/// then the scaled side holds nothing of it.
fn balance_prices(pdm: &PdmInstance, idx: &PairwiseIndex, g: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut personal = vec![vec![0.0; pdm.m]; pdm.n];
    let mut pairwise = vec![0.0; idx.good_count()];
    for &j in &idx.contested {
        let s0 = pdm.side(j, 0);
        let s1 = pdm.side(j, 1);
        let mut r: Vec<f64> = s0.iter().map(|&i| g[i][j].max(0.0)).collect();
        let mut c: Vec<f64> = s1.iter().map(|&k| g[k][j].max(0.0)).collect();
        let (t0, t1) = (r.iter().sum::<f64>(), c.iter().sum::<f64>());
        let t = t0.max(t1);
        if t <= 0.0 {
            continue;
        }
        for (side, total) in [(&mut r, t0), (&mut c, t1)] {
            if total < t {
                if total > 0.0 {
                    side.iter_mut().for_each(|v| *v *= t / total);
                } else {
                    let share = t / side.len() as f64;
                    side.iter_mut().for_each(|v| *v = share);
                }
            }
        }
        for (a, &i) in s0.iter().enumerate() {
            personal[i][j] = r[a];
            for (b, &k) in s1.iter().enumerate() {
                let l = idx.index_of(i, k, j).expect("disagreeing pair has a good");
                pairwise[l] = r[a] * c[b] / t;
            }
        }
        for (b, &k) in s1.iter().enumerate() {
            personal[k][j] = c[b];
        }
    }
    (personal, pairwise)
}

/// Eisenberg-Gale: maximize budget-weighted Nash welfare subject to unit supply.
pub fn solve_fisher_eg(fisher: &FisherInstance, tol: f64) -> Result<SolveResult> {
    fisher.validate()?;
    let goods = fisher.good_count();
    let mut excluded = Vec::new();
    let mut relevant = vec![vec![false; goods]; fisher.n];
    for i in 0..fisher.n {
        let spec = &fisher.utilities[i];
        if spec.validate().is_err() {
            excluded.push(i);
            continue;
        }
        for l in 0..goods {
            relevant[i][l] = spec.desires(l);
        }
        if !relevant[i].iter().any(|r| *r) {
            excluded.push(i);
        }
    }
    let mut var = vec![vec![None; goods]; fisher.n];
    let mut start = Vec::new();
    let counts: Vec<usize> = (0..goods)
        .map(|l| (0..fisher.n).filter(|i| !excluded.contains(i) && relevant[*i][l]).count())
        .collect();
    for i in 0..fisher.n {
        if excluded.contains(&i) {
            continue;
        }
        for l in 0..goods {
            if relevant[i][l] {
                var[i][l] = Some(start.len());
                start.push(1.0 / (counts[l] as f64 + 1.0));
            }
        }
    }
    let nx = start.len();
    let mut b = Builder::new(nx, start);
    for k in 0..nx {
        b.constrain(vec![(k, -1.0)], 0.0);
    }
    let mut supply = vec![None; goods];
    for l in 0..goods {
        let terms: Vec<(usize, f64)> = (0..fisher.n).filter_map(|i| var[i][l].map(|k| (k, 1.0))).collect();
        if !terms.is_empty() {
            supply[l] = Some(b.constrain(terms, 1.0));
        }
    }
    for i in 0..fisher.n {
        if excluded.contains(&i) {
            continue;
        }
        let inputs: Vec<Option<Affine>> = var[i].iter().map(|v| v.map(Affine::var)).collect();
        b.agent(fisher.budgets[i], &fisher.utilities[i], &inputs);
    }
    let total: f64 = (0..fisher.n).filter(|i| !excluded.contains(i)).map(|i| fisher.budgets[i]).sum();
    let opts = barrier_options(tol, total.max(1e-12));
    let sol = if b.prog.dim == 0 {
        BarrierSolution { v: vec![], multipliers: vec![], objective: 0.0, iterations: 0, mu: 0.0, stationarity: 0.0 }
    } else {
        b.prog.solve(b.start.clone(), &opts)?
    };

    let allocation: Vec<Vec<f64>> = (0..fisher.n)
        .map(|i| (0..goods).map(|l| var[i][l].map_or(0.0, |k| sol.v[k].max(0.0))).collect())
        .collect();
    let prices: Vec<f64> = supply.iter().map(|c| c.map_or(0.0, |c| sol.multipliers[c])).collect();
    let feasibility = (0..goods)
        .map(|l| allocation.iter().map(|x| x[l]).sum::<f64>() - 1.0)
        .fold(0.0, f64::max);

    let included: Vec<usize> = (0..fisher.n).filter(|i| !excluded.contains(i)).collect();
    let utilities: Vec<f64> = included
        .iter()
        .map(|&i| fisher.utilities[i].evaluate(&allocation[i]))
        .collect::<Result<_>>()?;
    let budgets: Vec<f64> = included.iter().map(|&i| fisher.budgets[i]).collect();
    let outcome = fisher
        .provenance
        .as_ref()
        .map(|p| p.index.outcome(&p.pdm, &allocation));
    Ok(SolveResult {
        outcome,
        objective: nash_welfare(&utilities, &budgets),
        allocation,
        prices: PriceSystem::PerGood(prices),
        pairwise_prices: None,
        iterations: sol.iterations,
        residuals: Residuals {
            stationarity: sol.stationarity,
            feasibility,
            duality_gap: sol.mu * b.prog.constraints.len() as f64,
        },
        excluded_agents: excluded,
    })
}

/// Default cap on grid points for [`brute_force_max_welfare`].
pub const GRID_CAP: u128 = 20_000_000;

/// Exhaustive search over `z^{j,0}` on the grid `{0, 1/G, ..., 1}`.
pub fn brute_force_max_welfare(
    pdm: &PdmInstance,
    psi: WelfareFunction,
    grid: usize,
) -> Result<(Outcome, f64)> {
    brute_force_with_cap(pdm, psi, grid, GRID_CAP)
}

pub fn brute_force_with_cap(
    pdm: &PdmInstance,
    psi: WelfareFunction,
    grid: usize,
    cap: u128,
) -> Result<(Outcome, f64)> {
    if grid == 0 {
        return Err(Error::InvalidConfig("grid needs at least one step".into()));
    }
    let points = (grid as u128 + 1).checked_pow(pdm.m as u32).unwrap_or(u128::MAX);
    if points > cap {
        return Err(Error::GridTooLarge { points, cap });
    }
    let mut digits = vec![0usize; pdm.m];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut x = vec![0.0; pdm.m];
    let mut u = vec![0.0; pdm.n];
    loop {
        for i in 0..pdm.n {
            for j in 0..pdm.m {
                let t = digits[j] as f64 / grid as f64;
                x[j] = if pdm.preferred[i][j] == 0 { t } else { 1.0 - t };
            }
            u[i] = pdm.utilities[i].evaluate(&x)?;
        }
        let value = aggregate_welfare(&u, &pdm.budgets, psi);
        if best.as_ref().map_or(true, |(_, v)| value > *v) {
            best = Some((digits.clone(), value));
        }
        let mut j = 0;
        while j < pdm.m {
            digits[j] += 1;
            if digits[j] <= grid {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
        if j == pdm.m {
            break;
        }
    }
    let (d, value) = best.unwrap();
    let t: Vec<f64> = d.iter().map(|&k| k as f64 / grid as f64).collect();
    Ok((Outcome::from_side0(&t), value))
}
