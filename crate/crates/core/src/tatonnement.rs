//! Projected SGD tâtonnement on a Fisher market, and the lifted loop that runs
//! it behind a PDM through the pairwise expansion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::checkers::{check_delta_eq, check_delta_pme, EquilibriumReport};
use crate::demand::{demand, DemandRequest, DEFAULT_CEILING};
use crate::error::{Error, Result};
use crate::expansion::{reduce_instance, FisherInstance, Provenance};
use crate::model::{Outcome, PdmInstance};

/// `eta_t = scale / (t + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub scale: f64,
    pub offset: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { scale: 1.0, offset: 0.0 }
    }
}

impl StepSchedule {
    pub fn eta(&self, t: usize) -> f64 {
        self.scale / (t as f64 + self.offset)
    }
}

/// Zero-mean perturbation added to every reported demand entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Off,
    Gaussian { variance: f64 },
    /// Uniform on a symmetric interval with the given variance.
    Uniform { variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TatonnementConfig {
    pub step: StepSchedule,
    /// Lower end of the price box.
    pub p_min: f64,
    /// Upper end of the price box; `None` means twice the largest budget.
    pub p_max: Option<f64>,
    /// Raise a good's floor when some agent's demand hits the ceiling, and
    /// relax it when the good goes unsold.
    pub adaptive_floor: bool,
    pub noise: Noise,
    /// Bias `e_t = bias / t^2` on every demand entry (summable).
    pub bias: f64,
    pub max_iters: usize,
    pub delta: f64,
    /// Defaults to all ones, clipped to the box.
    pub initial_prices: Option<Vec<f64>>,
    pub seed: u64,
    /// Demand cap used inside the loop.
    pub ceiling: Option<f64>,
    /// Run the δ-check every this many steps.
    pub check_every: usize,
    /// Keep every k-th step in the trace.
    pub thin: usize,
}

impl Default for TatonnementConfig {
    fn default() -> Self {
        Self {
            step: StepSchedule::default(),
            p_min: 1e-3,
            p_max: None,
            adaptive_floor: false,
            noise: Noise::Off,
            bias: 0.0,
            max_iters: 200_000,
            delta: 0.05,
            initial_prices: None,
            seed: 0,
            ceiling: Some(DEFAULT_CEILING),
            check_every: 50,
            thin: 1,
        }
    }
}

impl TatonnementConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidConfig(s.into()));
        if !(self.step.scale > 0.0) || !(self.step.offset >= 0.0) {
            return bad("step schedule needs scale > 0 and offset >= 0");
        }
        if !(self.p_min >= 0.0) {
            return bad("p_min must be >= 0");
        }
        if let Some(hi) = self.p_max {
            if !(hi > self.p_min) {
                return bad("p_max must exceed p_min");
            }
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be >= 0");
        }
        if self.check_every == 0 || self.thin == 0 {
            return bad("check_every and thin must be >= 1");
        }
        match self.noise {
            Noise::Gaussian { variance } | Noise::Uniform { variance } if !(variance >= 0.0) => {
                bad("noise variance must be >= 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub prices: Vec<f64>,
    pub aggregate_demand: Vec<f64>,
    pub dual_objective: f64,
    pub excess_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TatonnementTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub final_prices: Vec<f64>,
    /// Allocation that certified the last δ-check.
    pub final_allocation: Vec<Vec<f64>>,
    pub report: EquilibriumReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TatonnementSummary {
    pub converged: bool,
    pub iterations: usize,
    pub delta: f64,
    pub final_prices: Vec<f64>,
    pub report: EquilibriumReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pme_report: Option<EquilibriumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

impl TatonnementTrace {
    pub fn summary(&self, delta: f64) -> TatonnementSummary {
        TatonnementSummary {
            converged: self.converged,
            iterations: self.iterations,
            delta,
            final_prices: self.final_prices.clone(),
            report: self.report.clone(),
            pme_report: None,
            outcome: None,
        }
    }

    /// Columns: t, one price per good, one excess demand per good, dual objective, excess norm.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let goods = self.final_prices.len();
        let mut header = vec!["t".to_string()];
        header.extend((0..goods).map(|l| format!("p{l}")));
        header.extend((0..goods).map(|l| format!("excess{l}")));
        header.push("dual".into());
        header.push("excess_norm".into());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.t.to_string()];
            row.extend(r.prices.iter().map(|p| p.to_string()));
            row.extend(r.aggregate_demand.iter().map(|d| (d - 1.0).to_string()));
            row.push(r.dual_objective.to_string());
            row.push(r.excess_norm.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn active_agents(fisher: &FisherInstance) -> Vec<usize> {
    (0..fisher.n).filter(|&i| fisher.utilities[i].validate().is_ok()).collect()
}

fn fisher_demands(fisher: &FisherInstance, p: &[f64], ceiling: Option<f64>) -> Result<Vec<Vec<f64>>> {
    (0..fisher.n)
        .map(|i| {
            if fisher.utilities[i].validate().is_err() {
                return Ok(vec![0.0; p.len()]);
            }
            demand(&DemandRequest {
                spec: &fisher.utilities[i],
                budget: fisher.budgets[i],
                prices: p,
                ceiling,
            })
        })
        .collect()
}

/// `1 - sum_i demand_i(p)` per good.
pub fn dual_gradient(fisher: &FisherInstance, prices: &[f64], ceiling: Option<f64>) -> Result<Vec<f64>> {
    let d = fisher_demands(fisher, prices, ceiling)?;
    Ok((0..prices.len()).map(|l| 1.0 - d.iter().map(|y| y[l]).sum::<f64>()).collect())
}

/// EG dual `sum_l p_l + sum_i B_i ln(u_i(demand_i(p)) / B_i)`.
pub fn dual_objective(fisher: &FisherInstance, prices: &[f64], ceiling: Option<f64>) -> Result<f64> {
    let d = fisher_demands(fisher, prices, ceiling)?;
    dual_from_demands(fisher, prices, &d)
}

fn dual_from_demands(fisher: &FisherInstance, prices: &[f64], d: &[Vec<f64>]) -> Result<f64> {
    let mut total: f64 = prices.iter().sum();
    for i in active_agents(fisher) {
        let u = fisher.utilities[i].evaluate(&d[i])?;
        total += fisher.budgets[i] * (u / fisher.budgets[i]).ln();
    }
    Ok(total)
}

/// How one step obtains per-agent demands over the Fisher goods.
trait DemandSource {
    fn demands(&self, p: &[f64], ceiling: Option<f64>) -> Result<Vec<Vec<f64>>>;
}

struct Direct<'a>(&'a FisherInstance);

impl DemandSource for Direct<'_> {
    fn demands(&self, p: &[f64], ceiling: Option<f64>) -> Result<Vec<Vec<f64>>> {
        fisher_demands(self.0, p, ceiling)
    }
}

/// Project prices, ask the PDM agents, lift their answers.
struct Lifted<'a>(&'a Provenance);

impl DemandSource for Lifted<'_> {
    fn demands(&self, p: &[f64], ceiling: Option<f64>) -> Result<Vec<Vec<f64>>> {
        let prov = self.0;
        (0..prov.pdm.n)
            .map(|i| {
                let spec = &prov.restricted[i];
                if spec.validate().is_err() {
                    return Ok(vec![0.0; p.len()]);
                }
                let issue_prices = prov.project_agent_prices(i, p);
                let y = demand(&DemandRequest {
                    spec,
                    budget: prov.pdm.budgets[i],
                    prices: &issue_prices,
                    ceiling,
                })?;
                Ok(prov.lift_contested(i, &y))
            })
            .collect()
    }
}

fn sample_noise(noise: Noise, rng: &mut ChaCha8Rng) -> f64 {
    match noise {
        Noise::Off => 0.0,
        Noise::Gaussian { variance } => {
            Normal::new(0.0, variance.sqrt()).map(|d| d.sample(rng)).unwrap_or(0.0)
        }
        Noise::Uniform { variance } => {
            let half = (3.0 * variance).sqrt();
            if half > 0.0 {
                Uniform::new_inclusive(-half, half).sample(rng)
            } else {
                0.0
            }
        }
    }
}

/// Step-weighted average of demands over the last one to two doubling epochs.
struct EpochAverage {
    prev: Vec<Vec<f64>>,
    prev_w: f64,
    cur: Vec<Vec<f64>>,
    cur_w: f64,
    next_epoch: usize,
}

impl EpochAverage {
    fn new(n: usize, goods: usize) -> Self {
        Self {
            prev: vec![vec![0.0; goods]; n],
            prev_w: 0.0,
            cur: vec![vec![0.0; goods]; n],
            cur_w: 0.0,
            next_epoch: 2,
        }
    }

    fn add(&mut self, t: usize, eta: f64, d: &[Vec<f64>]) {
        if t >= self.next_epoch {
            std::mem::swap(&mut self.prev, &mut self.cur);
            self.prev_w = self.cur_w;
            self.cur.iter_mut().flatten().for_each(|v| *v = 0.0);
            self.cur_w = 0.0;
            self.next_epoch *= 2;
        }
        for (acc, row) in self.cur.iter_mut().zip(d) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += eta * v;
            }
        }
        self.cur_w += eta;
    }

    fn mean(&self) -> Vec<Vec<f64>> {
        let w = self.prev_w + self.cur_w;
        self.prev
            .iter()
            .zip(&self.cur)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y) / w).collect())
            .collect()
    }
}

fn run(
    fisher: &FisherInstance,
    source: &dyn DemandSource,
    config: &TatonnementConfig,
) -> Result<TatonnementTrace> {
    config.validate()?;
    let goods = fisher.good_count();
    let n = fisher.n;
    let hi = config
        .p_max
        .unwrap_or_else(|| 2.0 * fisher.budgets.iter().copied().fold(0.0, f64::max));
    let mut floor = vec![config.p_min; goods];
    let mut p: Vec<f64> = match &config.initial_prices {
        Some(p0) if p0.len() != goods => {
            return Err(Error::DimensionMismatch { expected: goods, got: p0.len() })
        }
        Some(p0) => p0.clone(),
        None => vec![1.0; goods],
    };
    for (pl, f) in p.iter_mut().zip(&floor) {
        *pl = pl.clamp(*f, hi);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut avg = EpochAverage::new(n, goods);
    let mut records = Vec::new();
    let mut last: Option<(EquilibriumReport, Vec<Vec<f64>>)> = None;
    let mut t = 0;
    let mut converged = false;

    while t < config.max_iters {
        t += 1;
        let d = source.demands(&p, config.ceiling)?;
        let eta = config.step.eta(t);
        avg.add(t, eta, &d);
        let aggregate: Vec<f64> = (0..goods).map(|l| d.iter().map(|y| y[l]).sum()).collect();
        if t % config.thin == 0 || t == 1 {
            let excess_norm = (0..goods)
                .map(|l| {
                    let e = aggregate[l] - 1.0;
                    if p[l] <= floor[l] && e < 0.0 {
                        0.0
                    } else {
                        e * e
                    }
                })
                .sum::<f64>()
                .sqrt();
            records.push(TraceRecord {
                t,
                prices: p.clone(),
                aggregate_demand: aggregate.clone(),
                dual_objective: dual_from_demands(fisher, &p, &d).unwrap_or(f64::NAN),
                excess_norm,
            });
        }
        let bias = config.bias / (t as f64 * t as f64);
        let mut noisy = aggregate.clone();
        if config.noise != Noise::Off || bias != 0.0 {
            for l in 0..goods {
                for _ in 0..n {
                    noisy[l] += sample_noise(config.noise, &mut rng) + bias;
                }
            }
        }
        if config.adaptive_floor {
            if let Some(c) = config.ceiling {
                for l in 0..goods {
                    if d.iter().any(|y| y[l] >= c * (1.0 - 1e-12)) {
                        floor[l] = floor[l].max(p[l]).min(hi);
                    } else if aggregate[l] == 0.0 {
                        floor[l] = (floor[l] * 0.5).max(config.p_min);
                    }
                }
            }
        }
        for l in 0..goods {
            p[l] = (p[l] - eta * (1.0 - noisy[l])).clamp(floor[l], hi);
        }

        if t % config.check_every == 0 || t == config.max_iters {
            let (ok, report, alloc) = delta_check(fisher, source, &p, &avg, config.delta)?;
            last = Some((report, alloc));
            if ok {
                converged = true;
                break;
            }
        }
    }
    let (report, final_allocation) = match last {
        Some(x) => x,
        None => {
            let (_, r, a) = delta_check(fisher, source, &p, &avg, config.delta)?;
            (r, a)
        }
    };
    Ok(TatonnementTrace { records, iterations: t, converged, final_prices: p, final_allocation, report })
}

/// Try the exact demand at `p`, then the running average of past demands.
fn delta_check(
    fisher: &FisherInstance,
    source: &dyn DemandSource,
    p: &[f64],
    avg: &EpochAverage,
    delta: f64,
) -> Result<(bool, EquilibriumReport, Vec<Vec<f64>>)> {
    let ceiling = if p.iter().all(|x| *x > 0.0) { None } else { Some(DEFAULT_CEILING) };
    let exact = source.demands(p, ceiling)?;
    let first = check_delta_eq(fisher, &exact, p, delta)?;
    if first.verdict {
        return Ok((true, first, exact));
    }
    if avg.prev_w + avg.cur_w > 0.0 {
        let mean = avg.mean();
        let second = check_delta_eq(fisher, &mean, p, delta)?;
        if second.verdict {
            return Ok((true, second, mean));
        }
    }
    Ok((false, first, exact))
}

pub fn run_fisher_tatonnement(fisher: &FisherInstance, config: &TatonnementConfig) -> Result<TatonnementTrace> {
    fisher.validate()?;
    run(fisher, &Direct(fisher), config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedRun {
    /// The hidden Fisher-price trace.
    pub trace: TatonnementTrace,
    /// δ-PME check at three times the configured δ.
    pub pme_report: EquilibriumReport,
    pub bundles: Vec<Vec<f64>>,
    pub personalized_prices: Vec<Vec<f64>>,
    pub outcome: Outcome,
}

impl LiftedRun {
    pub fn summary(&self, delta: f64) -> TatonnementSummary {
        let mut s = self.trace.summary(delta);
        s.pme_report = Some(self.pme_report.clone());
        s.outcome = Some(self.outcome.clone());
        s
    }
}

pub fn run_lifted_tatonnement(pdm: &PdmInstance, config: &TatonnementConfig) -> Result<LiftedRun> {
    pdm.validate()?;
    let reduced = reduce_instance(pdm);
    let prov = reduced.provenance()?;
    let trace = run(&reduced, &Lifted(prov), config)?;
    let idx = &prov.index;
    let bundles: Vec<Vec<f64>> =
        (0..pdm.n).map(|i| idx.project(i, &trace.final_allocation[i])).collect();
    let personalized_prices = idx.project_prices(&trace.final_prices);
    let pme_report = check_delta_pme(pdm, &bundles, &personalized_prices, 3.0 * config.delta)?;
    let outcome = pme_report
        .witness
        .clone()
        .unwrap_or_else(|| idx.outcome(pdm, &trace.final_allocation));
    Ok(LiftedRun { trace, pme_report, bundles, personalized_prices, outcome })
}
