//! Seeded random PDM instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{PdmInstance, UtilityClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub m_min: usize,
    pub m_max: usize,
    /// Classes drawn uniformly per agent.
    pub classes: Vec<UtilityClass>,
    /// CES exponents drawn uniformly when the class is CES.
    pub rhos: Vec<f64>,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Redraw an issue's preferences until both sides are nonempty.
    pub contested_only: bool,
    pub unit_budgets: bool,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            n_min: 2,
            n_max: 5,
            m_min: 1,
            m_max: 4,
            classes: vec![
                UtilityClass::Linear,
                UtilityClass::Leontief,
                UtilityClass::CobbDouglas,
                UtilityClass::Ces,
            ],
            rhos: vec![-2.0, -1.0, -0.5, 0.25, 0.5, 0.75],
            weight_min: 0.1,
            weight_max: 2.0,
            contested_only: true,
            unit_budgets: true,
        }
    }
}

impl RandomConfig {
    pub fn sized(n_max: usize, m_max: usize) -> Self {
        Self { n_max, m_max, ..Self::default() }
    }
}

/// Deterministic in `(seed, config)`.
pub fn random_instance(seed: u64, cfg: &RandomConfig) -> PdmInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(cfg.n_min..=cfg.n_max.max(cfg.n_min));
    let m = rng.gen_range(cfg.m_min.max(1)..=cfg.m_max.max(cfg.m_min.max(1)));
    let mut preferred = vec![vec![0u8; m]; n];
    for j in 0..m {
        loop {
            for row in preferred.iter_mut() {
                row[j] = rng.gen_bool(0.5) as u8;
            }
            let ones = preferred.iter().filter(|r| r[j] == 1).count();
            if !cfg.contested_only || n < 2 || (ones > 0 && ones < n) {
                break;
            }
        }
    }
    let budgets = (0..n)
        .map(|_| if cfg.unit_budgets { 1.0 } else { rng.gen_range(0.5..2.0) })
        .collect();
    let utilities = (0..n)
        .map(|_| {
            let class = cfg.classes[rng.gen_range(0..cfg.classes.len())];
            let weights = (0..m).map(|_| rng.gen_range(cfg.weight_min..=cfg.weight_max)).collect();
            let rho = (class == UtilityClass::Ces).then(|| cfg.rhos[rng.gen_range(0..cfg.rhos.len())]);
            class.spec(weights, rho).expect("generated weights are positive")
        })
        .collect();
    PdmInstance::new(preferred, budgets, utilities).expect("generated instance is valid")
}
