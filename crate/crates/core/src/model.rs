//! Instances, outcomes, bundles, prices, utilities and welfare.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Utilities below this are treated as zero inside the Nash product.
pub const NASH_ZERO: f64 = 1e-300;

/// Outcomes may exceed unit mass by at most this much.
pub const OUTCOME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum UtilitySpec {
    Linear {
        weights: Vec<f64>,
    },
    Leontief {
        weights: Vec<f64>,
    },
    CobbDouglas {
        weights: Vec<f64>,
    },
    Ces {
        weights: Vec<f64>,
        rho: f64,
    },
    /// `outer` is evaluated on the per-group minima. `dim` is the number of goods.
    NestedLeontief {
        outer: Box<UtilitySpec>,
        groups: Vec<Vec<usize>>,
        dim: usize,
    },
}

/// Tag used by generators and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum UtilityClass {
    Linear,
    Leontief,
    CobbDouglas,
    Ces,
}

impl std::str::FromStr for UtilityClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" => Ok(Self::Linear),
            "leontief" => Ok(Self::Leontief),
            "cobb_douglas" | "cobbdouglas" | "cd" => Ok(Self::CobbDouglas),
            "ces" => Ok(Self::Ces),
            other => Err(Error::InvalidSpec(format!("unknown utility class `{other}`"))),
        }
    }
}

impl UtilityClass {
    pub fn spec(self, weights: Vec<f64>, rho: Option<f64>) -> Result<UtilitySpec> {
        let spec = match self {
            Self::Linear => UtilitySpec::Linear { weights },
            Self::Leontief => UtilitySpec::Leontief { weights },
            Self::CobbDouglas => UtilitySpec::CobbDouglas { weights },
            Self::Ces => {
                let rho = rho.ok_or_else(|| Error::InvalidSpec("CES needs rho".into()))?;
                UtilitySpec::Ces { weights, rho }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl UtilitySpec {
    pub fn dimension(&self) -> usize {
        match self {
            Self::Linear { weights }
            | Self::Leontief { weights }
            | Self::CobbDouglas { weights }
            | Self::Ces { weights, .. } => weights.len(),
            Self::NestedLeontief { dim, .. } => *dim,
        }
    }

    /// Base weights, `None` for nested specs.
    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            Self::Linear { weights }
            | Self::Leontief { weights }
            | Self::CobbDouglas { weights }
            | Self::Ces { weights, .. } => Some(weights),
            Self::NestedLeontief { .. } => None,
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Leontief { .. } => "leontief",
            Self::CobbDouglas { .. } => "cobb_douglas",
            Self::Ces { .. } => "ces",
            Self::NestedLeontief { .. } => "nested_leontief",
        }
    }

    /// Whether the utility depends on coordinate `j`.
    pub fn desires(&self, j: usize) -> bool {
        match self {
            Self::NestedLeontief { outer, groups, .. } => groups
                .iter()
                .enumerate()
                .any(|(g, members)| members.contains(&j) && outer.desires(g)),
            _ => self.weights().map_or(false, |w| w.get(j).copied().unwrap_or(0.0) > 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::NestedLeontief { outer, groups, dim } => {
                outer.validate()?;
                if outer.dimension() != groups.len() {
                    return Err(Error::InvalidSpec(format!(
                        "outer spec has dimension {} but there are {} groups",
                        outer.dimension(),
                        groups.len()
                    )));
                }
                let mut seen = vec![false; *dim];
                for g in groups {
                    if g.is_empty() {
                        return Err(Error::InvalidSpec("empty group".into()));
                    }
                    for &l in g {
                        if l >= *dim {
                            return Err(Error::InvalidSpec(format!("good {l} out of range")));
                        }
                        if seen[l] {
                            return Err(Error::InvalidSpec(format!("good {l} in two groups")));
                        }
                        seen[l] = true;
                    }
                }
                Ok(())
            }
            _ => {
                let w = self.weights().unwrap();
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::InvalidSpec("weights must be finite and >= 0".into()));
                }
                if !w.iter().any(|x| *x > 0.0) {
                    return Err(Error::AllZeroWeights);
                }
                if let Self::Ces { rho, .. } = self {
                    if !rho.is_finite() || *rho == 0.0 || *rho > 1.0 {
                        return Err(Error::InvalidSpec(format!("rho = {rho} not in (-inf,0)u(0,1]")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Utility of a bundle given as a plain slice.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: x.len() });
        }
        match self {
            Self::Linear { weights } => {
                nonconstant(weights)?;
                Ok(weights.iter().zip(x).map(|(w, v)| w * v).sum())
            }
            Self::Leontief { weights } => {
                nonconstant(weights)?;
                Ok(weights
                    .iter()
                    .zip(x)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, v)| v / w)
                    .fold(f64::INFINITY, f64::min))
            }
            Self::CobbDouglas { weights } => {
                let total = nonconstant(weights)?;
                let mut acc = 0.0;
                for (w, v) in weights.iter().zip(x) {
                    if *w > 0.0 {
                        if *v <= 0.0 {
                            return Ok(0.0);
                        }
                        acc += w * v.ln();
                    }
                }
                Ok((acc / total).exp())
            }
            Self::Ces { weights, rho } => {
                nonconstant(weights)?;
                let rho = *rho;
                if rho == 1.0 {
                    return Ok(weights.iter().zip(x).map(|(w, v)| w * v).sum());
                }
                let mut s = 0.0;
                for (w, v) in weights.iter().zip(x) {
                    if *w > 0.0 {
                        if *v <= 0.0 {
                            if rho < 0.0 {
                                return Ok(0.0);
                            }
                            continue;
                        }
                        s += (w * v).powf(rho);
                    }
                }
                if s <= 0.0 {
                    return Ok(0.0);
                }
                Ok(s.powf(1.0 / rho))
            }
            Self::NestedLeontief { outer, groups, .. } => {
                let inner: Vec<f64> = groups
                    .iter()
                    .map(|g| g.iter().map(|&l| x[l]).fold(f64::INFINITY, f64::min))
                    .collect();
                outer.evaluate(&inner)
            }
        }
    }
}

fn nonconstant(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| *w > 0.0) {
        Ok(total)
    } else {
        Err(Error::AllZeroWeights)
    }
}

/// Which index space a bundle lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Issues,
    Goods,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub space: Space,
    pub quantities: Vec<f64>,
}

impl Bundle {
    pub fn issues(quantities: Vec<f64>) -> Self {
        Self { space: Space::Issues, quantities }
    }

    pub fn goods(quantities: Vec<f64>) -> Self {
        Self { space: Space::Goods, quantities }
    }

    pub fn cost(&self, prices: &[f64]) -> f64 {
        dot(&self.quantities, prices)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn evaluate_utility(spec: &UtilitySpec, bundle: &Bundle) -> Result<f64> {
    spec.evaluate(&bundle.quantities)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdmInstance {
    pub n: usize,
    pub m: usize,
    /// `preferred[i][j]` is agent i's alternative on issue j.
    pub preferred: Vec<Vec<u8>>,
    pub budgets: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
}

impl PdmInstance {
    pub fn new(
        preferred: Vec<Vec<u8>>,
        budgets: Vec<f64>,
        utilities: Vec<UtilitySpec>,
    ) -> Result<Self> {
        let n = preferred.len();
        let m = preferred.first().map_or(0, Vec::len);
        let inst = Self { n, m, preferred, budgets, utilities };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidInstance(s));
        if self.n == 0 || self.m == 0 {
            return bad("need n >= 1 and m >= 1".into());
        }
        if self.preferred.len() != self.n
            || self.budgets.len() != self.n
            || self.utilities.len() != self.n
        {
            return bad("per-agent arrays must have length n".into());
        }
        for (i, row) in self.preferred.iter().enumerate() {
            if row.len() != self.m {
                return bad(format!("preferred row {i} has length {}", row.len()));
            }
            if row.iter().any(|a| *a > 1) {
                return bad(format!("preferred row {i} has an entry outside {{0,1}}"));
            }
        }
        for (i, b) in self.budgets.iter().enumerate() {
            if !(b.is_finite() && *b > 0.0) {
                return bad(format!("budget of agent {i} must be positive"));
            }
        }
        for (i, u) in self.utilities.iter().enumerate() {
            if matches!(u, UtilitySpec::NestedLeontief { .. }) {
                return bad(format!("agent {i}: nested specs live in Fisher markets"));
            }
            if u.dimension() != self.m {
                return bad(format!("agent {i}: utility dimension {} != m", u.dimension()));
            }
            u.validate()?;
        }
        Ok(())
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// Agents on side `a` of issue `j`, ascending.
    pub fn side(&self, j: usize, a: u8) -> Vec<usize> {
        (0..self.n).filter(|&i| self.preferred[i][j] == a).collect()
    }

    /// The shared alternative if everyone agrees on issue `j`.
    pub fn unanimous(&self, j: usize) -> Option<u8> {
        let a = self.preferred[0][j];
        self.preferred.iter().all(|row| row[j] == a).then_some(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// `z[j] = (z^{j,0}, z^{j,1})`.
    pub z: Vec<[f64; 2]>,
}

impl Outcome {
    pub fn new(z: Vec<[f64; 2]>) -> Result<Self> {
        for (j, p) in z.iter().enumerate() {
            let ok = p.iter().all(|v| v.is_finite() && (0.0..=1.0 + OUTCOME_SLACK).contains(v));
            if !ok || p[0] + p[1] > 1.0 + OUTCOME_SLACK {
                return Err(Error::InvalidInstance(format!("issue {j}: invalid pair {p:?}")));
            }
        }
        Ok(Self { z })
    }

    /// Build from side-0 probabilities with the complement on side 1.
    pub fn from_side0(t: &[f64]) -> Self {
        Self { z: t.iter().map(|&t| [t, 1.0 - t]).collect() }
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }
}

pub fn midpoint_outcome(pdm: &PdmInstance) -> Outcome {
    Outcome { z: vec![[0.5, 0.5]; pdm.m] }
}

pub fn public_bundle(pdm: &PdmInstance, outcome: &Outcome, agent: usize) -> Bundle {
    Bundle::issues(public_quantities(pdm, outcome, agent))
}

pub(crate) fn public_quantities(pdm: &PdmInstance, outcome: &Outcome, agent: usize) -> Vec<f64> {
    pdm.preferred[agent]
        .iter()
        .zip(&outcome.z)
        .map(|(&a, pair)| pair[a as usize])
        .collect()
}

pub fn agent_utilities(pdm: &PdmInstance, outcome: &Outcome) -> Result<Vec<f64>> {
    (0..pdm.n)
        .map(|i| pdm.utilities[i].evaluate(&public_quantities(pdm, outcome, i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareFunction {
    Nash,
    Utilitarian,
    Egalitarian,
}

/// Apply a welfare function to utilities with the given budgets.
pub fn aggregate_welfare(utilities: &[f64], budgets: &[f64], psi: WelfareFunction) -> f64 {
    match psi {
        WelfareFunction::Nash => nash_welfare(utilities, budgets),
        WelfareFunction::Utilitarian => utilities.iter().sum(),
        WelfareFunction::Egalitarian => utilities.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

pub fn nash_welfare(utilities: &[f64], budgets: &[f64]) -> f64 {
    let total: f64 = budgets.iter().sum();
    let mut acc = 0.0;
    for (u, b) in utilities.iter().zip(budgets) {
        if *u <= NASH_ZERO {
            return 0.0;
        }
        acc += b * u.ln();
    }
    (acc / total).exp()
}

pub fn welfare(pdm: &PdmInstance, outcome: &Outcome, psi: WelfareFunction) -> Result<f64> {
    let u = agent_utilities(pdm, outcome)?;
    Ok(aggregate_welfare(&u, &pdm.budgets, psi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "prices", rename_all = "snake_case")]
pub enum PriceSystem {
    PerGood(Vec<f64>),
    PerIssue(Vec<f64>),
    Personalized(Vec<Vec<f64>>),
}

impl PriceSystem {
    /// The price row agent `i` faces.
    pub fn row(&self, i: usize) -> &[f64] {
        match self {
            Self::PerGood(p) | Self::PerIssue(p) => p,
            Self::Personalized(rows) => &rows[i],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: &[f64]| p.iter().all(|v| v.is_finite() && *v >= 0.0);
        let good = match self {
            Self::PerGood(p) | Self::PerIssue(p) => ok(p),
            Self::Personalized(rows) => rows.iter().all(|r| ok(r)),
        };
        if good {
            Ok(())
        } else {
            Err(Error::InvalidInstance("prices must be finite and >= 0".into()))
        }
    }
}

/// The n-agent family where agent i stands alone on issue i.
pub fn build_phi(n: usize, w: f64, class: UtilityClass, rho: Option<f64>) -> Result<PdmInstance> {
    if n < 2 {
        return Err(Error::InvalidInstance("build_phi needs n >= 2".into()));
    }
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::InvalidSpec(format!("w = {w} must be >= 0")));
    }
    let mut preferred = vec![vec![1u8; n]; n];
    let mut utilities = Vec::with_capacity(n);
    for (i, row) in preferred.iter_mut().enumerate() {
        row[i] = 0;
        let mut weights = vec![1.0; n];
        weights[i] = w;
        utilities.push(class.spec(weights, rho)?);
    }
    PdmInstance::new(preferred, vec![1.0; n], utilities)
}
