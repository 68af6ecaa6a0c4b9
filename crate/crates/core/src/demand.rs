//! Demand oracles: one utility-maximizing affordable bundle per request.

use crate::error::{Error, Result};
use crate::expansion::{group_price, FisherInstance};
use crate::model::{Bundle, UtilitySpec};

/// Default per-good cap: the unit supply.
pub const DEFAULT_CEILING: f64 = 1.0;

/// Relative gap below which two bang-per-buck ratios count as tied.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct DemandRequest<'a> {
    pub spec: &'a UtilitySpec,
    pub budget: f64,
    pub prices: &'a [f64],
    /// `None` disables the cap; zero-priced desired goods then error.
    pub ceiling: Option<f64>,
}

impl<'a> DemandRequest<'a> {
    pub fn new(spec: &'a UtilitySpec, budget: f64, prices: &'a [f64]) -> Self {
        Self { spec, budget, prices, ceiling: Some(DEFAULT_CEILING) }
    }

    pub fn uncapped(mut self) -> Self {
        self.ceiling = None;
        self
    }

    pub fn with_ceiling(mut self, ceiling: Option<f64>) -> Self {
        self.ceiling = ceiling;
        self
    }
}

/// A representative demand bundle.
pub fn demand(req: &DemandRequest) -> Result<Vec<f64>> {
    if req.prices.len() != req.spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: req.spec.dimension(),
            got: req.prices.len(),
        });
    }
    if !(req.budget.is_finite() && req.budget > 0.0) {
        return Err(Error::InvalidInstance(format!("budget {} must be > 0", req.budget)));
    }
    if req.prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInstance("prices must be finite and >= 0".into()));
    }
    if let Some(c) = req.ceiling {
        if !(c >= 1.0) {
            return Err(Error::InvalidConfig(format!("ceiling {c} must be >= 1")));
        }
    }
    raw_demand(req.spec, req.budget, req.prices, req.ceiling)
}

/// Same as [`demand`] but wrapped as a bundle tagged with `space`.
pub fn demand_bundle(req: &DemandRequest, space: crate::model::Space) -> Result<Bundle> {
    Ok(Bundle { space, quantities: demand(req)? })
}

fn raw_demand(spec: &UtilitySpec, b: f64, p: &[f64], cap: Option<f64>) -> Result<Vec<f64>> {
    match spec {
        UtilitySpec::Linear { weights } => linear(weights, b, p, cap),
        UtilitySpec::Ces { weights, rho } if *rho == 1.0 => linear(weights, b, p, cap),
        UtilitySpec::Leontief { weights } => leontief(weights, b, p, cap),
        UtilitySpec::CobbDouglas { weights } => {
            any_positive(weights)?;
            let coef: Vec<f64> = weights
                .iter()
                .zip(p)
                .map(|(w, pj)| if *w > 0.0 { w / pj } else { 0.0 })
                .collect();
            power_form(weights, &coef, b, p, cap)
        }
        UtilitySpec::Ces { weights, rho } => {
            any_positive(weights)?;
            let e = 1.0 / (1.0 - rho);
            let coef: Vec<f64> = weights
                .iter()
                .zip(p)
                .map(|(w, pj)| if *w > 0.0 { (w.powf(*rho) / pj).powf(e) } else { 0.0 })
                .collect();
            power_form(weights, &coef, b, p, cap)
        }
        UtilitySpec::NestedLeontief { outer, groups, dim } => {
            let group_prices: Vec<f64> = groups.iter().map(|g| group_price(g, p)).collect();
            let f = raw_demand(outer, b, &group_prices, cap)?;
            let mut y = vec![0.0; *dim];
            for (g, members) in groups.iter().enumerate() {
                for &l in members {
                    y[l] = f[g];
                }
            }
            Ok(y)
        }
    }
}

fn any_positive(w: &[f64]) -> Result<()> {
    if w.iter().any(|x| *x > 0.0) {
        Ok(())
    } else {
        Err(Error::AllZeroWeights)
    }
}

/// Zero-priced desired goods take the cap for free.
fn fill_free(w: &[f64], p: &[f64], cap: Option<f64>, y: &mut [f64]) -> Result<()> {
    for j in 0..w.len() {
        if w[j] > 0.0 && p[j] == 0.0 {
            y[j] = cap.ok_or(Error::UnboundedDemand { good: j })?;
        }
    }
    Ok(())
}

fn linear(w: &[f64], b: f64, p: &[f64], cap: Option<f64>) -> Result<Vec<f64>> {
    any_positive(w)?;
    let mut y = vec![0.0; w.len()];
    fill_free(w, p, cap, &mut y)?;
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0 && p[j] > 0.0).collect();
    let bpb = |j: usize| w[j] / p[j];
    order.sort_by(|&a, &c| bpb(c).total_cmp(&bpb(a)).then(a.cmp(&c)));

    let mut money = b;
    let mut start = 0;
    while start < order.len() && money > 0.0 {
        let best = bpb(order[start]);
        let mut end = start + 1;
        while end < order.len() && bpb(order[end]) >= best * (1.0 - TIE_RTOL) {
            end += 1;
        }
        let mut tier: Vec<usize> = order[start..end].to_vec();
        match cap {
            None => {
                let share = money / tier.len() as f64;
                for &j in &tier {
                    y[j] = share / p[j];
                }
                money = 0.0;
            }
            Some(c) => {
                // Equal spending, goods that hit the cap release their share.
                tier.sort_by(|&a, &d| (c * p[a]).total_cmp(&(c * p[d])).then(a.cmp(&d)));
                let mut left = tier.len();
                for &j in &tier {
                    let share = money / left as f64;
                    if c * p[j] <= share {
                        y[j] = c;
                        money -= c * p[j];
                    } else {
                        y[j] = share / p[j];
                        money -= share;
                    }
                    left -= 1;
                }
                money = money.max(0.0);
            }
        }
        start = end;
    }
    Ok(y)
}

fn leontief(w: &[f64], b: f64, p: &[f64], cap: Option<f64>) -> Result<Vec<f64>> {
    any_positive(w)?;
    let cost: f64 = w.iter().zip(p).map(|(wj, pj)| wj * pj).sum();
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let mut t = if cost > 0.0 { b / cost } else { f64::INFINITY };
    if let Some(c) = cap {
        t = t.min(c / wmax);
    }
    if !t.is_finite() {
        let good = (0..w.len()).find(|&j| w[j] > 0.0).unwrap_or(0);
        return Err(Error::UnboundedDemand { good });
    }
    Ok(w.iter().map(|wj| t * wj).collect())
}

/// Demands of the form `y_j = min(cap, coef_j * L)` with a common level `L`
/// fixed by the budget. Covers Cobb-Douglas and CES with rho < 1.
fn power_form(
    w: &[f64],
    coef: &[f64],
    b: f64,
    p: &[f64],
    cap: Option<f64>,
) -> Result<Vec<f64>> {
    let mut y = vec![0.0; w.len()];
    fill_free(w, p, cap, &mut y)?;
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0 && p[j] > 0.0).collect();
    order.sort_by(|&a, &c| coef[c].total_cmp(&coef[a]).then(a.cmp(&c)));
    let Some(c) = cap else {
        let s: f64 = order.iter().map(|&j| p[j] * coef[j]).sum();
        for &j in &order {
            y[j] = coef[j] * b / s;
        }
        return Ok(y);
    };
    let mut money = b;
    let mut s: f64 = order.iter().map(|&j| p[j] * coef[j]).sum();
    for k in 0..order.len() {
        let level = money / s;
        if coef[order[k]] * level <= c {
            for &j in &order[k..] {
                y[j] = coef[j] * level;
            }
            return Ok(y);
        }
        // coef * level > c implies money > c * p_j, so the budget stays positive.
        let j = order[k];
        y[j] = c;
        money -= c * p[j];
        s -= p[j] * coef[j];
    }
    Ok(y)
}

/// Demand in a reduced market computed through the originating PDM:
/// project prices, take PDM demand, lift back.
pub fn demand_reduced(
    fisher: &FisherInstance,
    agent: usize,
    prices: &[f64],
    ceiling: Option<f64>,
) -> Result<Vec<f64>> {
    let prov = fisher.provenance.as_ref().ok_or(Error::MissingProvenance)?;
    let issue_prices = prov.project_agent_prices(agent, prices);
    let spec = &prov.restricted[agent];
    let y = demand(&DemandRequest {
        spec,
        budget: fisher.budgets[agent],
        prices: &issue_prices,
        ceiling,
    })?;
    Ok(prov.lift_contested(agent, &y))
}
