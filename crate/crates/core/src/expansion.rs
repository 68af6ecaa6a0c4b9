//! Pairwise issue expansion: one Fisher good per disagreeing pair per issue,
//! with the maps between PDM bundles/prices and reduced-market ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bundle, Outcome, PdmInstance, PriceSystem, UtilitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodId {
    Plain(usize),
    /// `(i, k, j)` with `i < k`.
    Pairwise(usize, usize, usize),
}

impl GoodId {
    pub fn pairwise(i: usize, k: usize, j: usize) -> Self {
        if i < k {
            Self::Pairwise(i, k, j)
        } else {
            Self::Pairwise(k, i, j)
        }
    }
}

/// Sum of prices over a group, in group order. Both the nested demand and
/// price projection go through here so that their arithmetic agrees bit for bit.
pub fn group_price(group: &[usize], p: &[f64]) -> f64 {
    group.iter().map(|&l| p[l]).sum()
}

/// The good layout of R(M) for one PDM instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseIndex {
    pub n: usize,
    pub m: usize,
    /// Goods ordered by issue, then by the smaller agent, then the larger.
    pub goods: Vec<(usize, usize, usize)>,
    /// Issues with agents on both sides, ascending.
    pub contested: Vec<usize>,
    /// Issues where everyone agrees, with the shared alternative.
    pub unanimous: Vec<(usize, u8)>,
    /// `own[i][j]`: agent i's goods on issue j, by ascending opponent.
    pub own: Vec<Vec<Vec<usize>>>,
}

impl PairwiseIndex {
    pub fn new(pdm: &PdmInstance) -> Self {
        let (n, m) = (pdm.n, pdm.m);
        let mut goods = Vec::new();
        let mut own = vec![vec![Vec::new(); m]; n];
        let mut contested = Vec::new();
        let mut unanimous = Vec::new();
        for j in 0..m {
            if let Some(a) = pdm.unanimous(j) {
                unanimous.push((j, a));
                continue;
            }
            contested.push(j);
            for i in 0..n {
                for k in i + 1..n {
                    if pdm.preferred[i][j] != pdm.preferred[k][j] {
                        let l = goods.len();
                        goods.push((i, k, j));
                        own[i][j].push(l);
                        own[k][j].push(l);
                    }
                }
            }
        }
        // Pushes happen with i ascending, so own[k][j] lists opponents below k
        // first and own[i][j] lists those above i; both end up ascending.
        Self { n, m, goods, contested, unanimous, own }
    }

    pub fn good_count(&self) -> usize {
        self.goods.len()
    }

    pub fn good_ids(&self) -> Vec<GoodId> {
        self.goods.iter().map(|&(i, k, j)| GoodId::Pairwise(i, k, j)).collect()
    }

    pub fn index_of(&self, i: usize, k: usize, j: usize) -> Option<usize> {
        let key = if i < k { (i, k, j) } else { (k, i, j) };
        self.goods.binary_search_by(|g| (g.2, g.0, g.1).cmp(&(key.2, key.0, key.1))).ok()
    }

    fn resolution(&self, j: usize) -> Option<u8> {
        self.unanimous.iter().find(|(u, _)| *u == j).map(|(_, a)| *a)
    }

    /// R: issue bundle to goods bundle.
    pub fn lift(&self, agent: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.goods.len()];
        for j in 0..self.m {
            for &l in &self.own[agent][j] {
                out[l] = y[j];
            }
        }
        out
    }

    /// R^-1: goods bundle to issue bundle. Unanimous issues report 1, the
    /// probability the auto-resolved alternative receives.
    pub fn project(&self, agent: usize, y: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| {
                if self.resolution(j).is_some() {
                    1.0
                } else {
                    self.own[agent][j].iter().map(|&l| y[l]).fold(f64::INFINITY, f64::min)
                }
            })
            .collect()
    }

    /// Personalized prices: sum of the agent's pairwise prices per issue.
    pub fn project_prices(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.m).map(|j| group_price(&self.own[i][j], p)).collect())
            .collect()
    }

    /// Personalized prices of one agent restricted to contested issues.
    pub fn project_agent_contested(&self, agent: usize, p: &[f64]) -> Vec<f64> {
        self.contested.iter().map(|&j| group_price(&self.own[agent][j], p)).collect()
    }

    /// R applied to a bundle over contested issues only.
    pub fn lift_contested(&self, agent: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.goods.len()];
        for (c, &j) in self.contested.iter().enumerate() {
            for &l in &self.own[agent][j] {
                out[l] = y[c];
            }
        }
        out
    }

    /// Outcome read off a reduced allocation: max over side 0, clamped
    /// complement on side 1, unanimous issues fully to the shared side.
    pub fn outcome(&self, pdm: &PdmInstance, alloc: &[Vec<f64>]) -> Outcome {
        let projected: Vec<Vec<f64>> =
            (0..self.n).map(|i| self.project(i, &alloc[i])).collect();
        let z = (0..self.m)
            .map(|j| match self.resolution(j) {
                Some(0) => [1.0, 0.0],
                Some(_) => [0.0, 1.0],
                None => {
                    let z0 = (0..self.n)
                        .filter(|&i| pdm.preferred[i][j] == 0)
                        .map(|i| projected[i][j])
                        .fold(0.0, f64::max);
                    [z0, (1.0 - z0).max(0.0)]
                }
            })
            .collect();
        Outcome { z }
    }
}

/// Everything a reduced market remembers about where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PdmInstance", into = "PdmInstance")]
pub struct Provenance {
    pub pdm: PdmInstance,
    pub index: PairwiseIndex,
    /// Each agent's PDM utility restricted to contested issues.
    pub restricted: Vec<UtilitySpec>,
}

impl From<PdmInstance> for Provenance {
    fn from(pdm: PdmInstance) -> Self {
        let index = PairwiseIndex::new(&pdm);
        let restricted = pdm
            .utilities
            .iter()
            .map(|u| restrict(u, &index.contested))
            .collect();
        Self { pdm, index, restricted }
    }
}

impl From<Provenance> for PdmInstance {
    fn from(p: Provenance) -> Self {
        p.pdm
    }
}

impl Provenance {
    pub fn project_agent_prices(&self, agent: usize, p: &[f64]) -> Vec<f64> {
        self.index.project_agent_contested(agent, p)
    }

    pub fn lift_contested(&self, agent: usize, y: &[f64]) -> Vec<f64> {
        self.index.lift_contested(agent, y)
    }

    /// Agents whose restricted utility is constant (they only value unanimous issues).
    pub fn degenerate_agents(&self) -> Vec<usize> {
        (0..self.pdm.n)
            .filter(|&i| self.restricted[i].weights().map_or(true, |w| w.iter().all(|x| *x <= 0.0)))
            .collect()
    }
}

fn restrict(spec: &UtilitySpec, keep: &[usize]) -> UtilitySpec {
    let pick = |w: &Vec<f64>| keep.iter().map(|&j| w[j]).collect::<Vec<f64>>();
    match spec {
        UtilitySpec::Linear { weights } => UtilitySpec::Linear { weights: pick(weights) },
        UtilitySpec::Leontief { weights } => UtilitySpec::Leontief { weights: pick(weights) },
        UtilitySpec::CobbDouglas { weights } => UtilitySpec::CobbDouglas { weights: pick(weights) },
        UtilitySpec::Ces { weights, rho } => UtilitySpec::Ces { weights: pick(weights), rho: *rho },
        UtilitySpec::NestedLeontief { .. } => spec.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInstance {
    pub n: usize,
    pub goods: Vec<GoodId>,
    pub budgets: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FisherInstance {
    pub fn new(goods: Vec<GoodId>, budgets: Vec<f64>, utilities: Vec<UtilitySpec>) -> Result<Self> {
        let f = Self { n: budgets.len(), goods, budgets, utilities, provenance: None };
        f.validate()?;
        Ok(f)
    }

    /// Market with `count` plain goods.
    pub fn plain(count: usize, budgets: Vec<f64>, utilities: Vec<UtilitySpec>) -> Result<Self> {
        Self::new((0..count).map(GoodId::Plain).collect(), budgets, utilities)
    }

    pub fn good_count(&self) -> usize {
        self.goods.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.budgets.len() != self.n || self.utilities.len() != self.n {
            return Err(Error::InvalidInstance("per-agent arrays must have length n".into()));
        }
        if self.budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidInstance("budgets must be positive".into()));
        }
        for (i, u) in self.utilities.iter().enumerate() {
            if u.dimension() != self.goods.len() {
                return Err(Error::InvalidInstance(format!(
                    "agent {i}: utility dimension {} != good count {}",
                    u.dimension(),
                    self.goods.len()
                )));
            }
        }
        Ok(())
    }

    pub fn provenance(&self) -> Result<&Provenance> {
        self.provenance.as_ref().ok_or(Error::MissingProvenance)
    }
}

/// Expand a PDM into its pairwise Fisher market.
pub fn reduce_instance(pdm: &PdmInstance) -> FisherInstance {
    let prov = Provenance::from(pdm.clone());
    let idx = &prov.index;
    let dim = idx.good_count();
    let utilities = (0..pdm.n)
        .map(|i| {
            let groups: Vec<Vec<usize>> =
                idx.contested.iter().map(|&j| idx.own[i][j].clone()).collect();
            match &prov.restricted[i] {
                // A min of mins is a min: flatten to one Leontief over goods.
                UtilitySpec::Leontief { weights } => {
                    let mut w = vec![0.0; dim];
                    for (g, members) in groups.iter().enumerate() {
                        for &l in members {
                            w[l] = weights[g];
                        }
                    }
                    UtilitySpec::Leontief { weights: w }
                }
                outer => UtilitySpec::NestedLeontief {
                    outer: Box::new(outer.clone()),
                    groups,
                    dim,
                },
            }
        })
        .collect();
    FisherInstance {
        n: pdm.n,
        goods: idx.good_ids(),
        budgets: pdm.budgets.clone(),
        utilities,
        provenance: Some(prov),
    }
}

pub fn lift_bundle(pdm: &PdmInstance, agent: usize, y: &Bundle) -> Bundle {
    Bundle::goods(PairwiseIndex::new(pdm).lift(agent, &y.quantities))
}

pub fn project_bundle(pdm: &PdmInstance, agent: usize, y: &Bundle) -> Bundle {
    Bundle::issues(PairwiseIndex::new(pdm).project(agent, &y.quantities))
}

pub fn project_prices(pdm: &PdmInstance, p: &[f64]) -> PriceSystem {
    PriceSystem::Personalized(PairwiseIndex::new(pdm).project_prices(p))
}

/// `tol` is accepted for interface symmetry with the checkers; the max and
/// clamp rule needs none.
pub fn outcome_from_reduced_equilibrium(
    pdm: &PdmInstance,
    alloc: &[Vec<f64>],
    _tol: f64,
) -> Outcome {
    PairwiseIndex::new(pdm).outcome(pdm, alloc)
}
