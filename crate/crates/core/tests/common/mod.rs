//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solvers or demand code under test.
#![allow(dead_code)]

use pdm_core::model::{Outcome, PdmInstance, UtilitySpec, WelfareFunction};
use pdm_core::welfare;

/// All spend-share vectors on the simplex with step `1/g`.
pub fn simplex_grid(dim: usize, g: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, g: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == dim {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / g as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dim, left - k, g, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, g, g, &mut Vec::new(), &mut out);
    out
}

/// Best utility over budget splits on a grid. Spending `s_j B` on good j buys
/// `s_j B / p_j`, capped at `ceiling`; zero-priced goods are taken at the cap.
pub fn grid_best_utility(spec: &UtilitySpec, budget: f64, prices: &[f64], ceiling: f64, g: usize) -> f64 {
    let dim = prices.len();
    simplex_grid(dim, g)
        .into_iter()
        .map(|s| {
            let x: Vec<f64> = (0..dim)
                .map(|j| if prices[j] <= 0.0 { ceiling } else { (s[j] * budget / prices[j]).min(ceiling) })
                .collect();
            spec.evaluate(&x).unwrap()
        })
        .fold(0.0, f64::max)
}

/// Golden-section search for the maximum of a unimodal function.
pub fn maximize_1d(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Cost of one unit of utility at prices `p`, from the textbook closed forms.
pub fn expenditure(spec: &UtilitySpec, p: &[f64]) -> f64 {
    let live = |w: &[f64]| -> Vec<usize> { (0..w.len()).filter(|&j| w[j] > 0.0).collect() };
    match spec {
        UtilitySpec::Linear { weights } => {
            live(weights).into_iter().map(|j| p[j] / weights[j]).fold(f64::INFINITY, f64::min)
        }
        UtilitySpec::Ces { weights, rho } if *rho == 1.0 => {
            live(weights).into_iter().map(|j| p[j] / weights[j]).fold(f64::INFINITY, f64::min)
        }
        UtilitySpec::Leontief { weights } => live(weights).into_iter().map(|j| weights[j] * p[j]).sum(),
        UtilitySpec::CobbDouglas { weights } => {
            let total: f64 = weights.iter().sum();
            live(weights)
                .into_iter()
                .map(|j| {
                    let a = weights[j] / total;
                    (p[j] * total / weights[j]).powf(a)
                })
                .product()
        }
        UtilitySpec::Ces { weights, rho } => {
            let r = rho / (rho - 1.0);
            live(weights).into_iter().map(|j| (p[j] / weights[j]).powf(r)).sum::<f64>().powf(1.0 / r)
        }
        UtilitySpec::NestedLeontief { outer, groups, .. } => {
            let composite: Vec<f64> = groups.iter().map(|g| g.iter().map(|&l| p[l]).sum()).collect();
            expenditure(outer, &composite)
        }
    }
}

/// EG dual `sum p - sum B_i ln e_i(p)`, built from the expenditure oracle.
pub fn dual_oracle(budgets: &[f64], specs: &[UtilitySpec], p: &[f64]) -> f64 {
    let spend: f64 = p.iter().sum();
    spend - budgets.iter().zip(specs).map(|(b, s)| b * expenditure(s, p).ln()).sum::<f64>()
}

/// Nash welfare as a function of the side-0 probabilities.
pub fn nw_at(pdm: &PdmInstance, t: &[f64]) -> f64 {
    welfare(pdm, &Outcome::from_side0(t), WelfareFunction::Nash).unwrap()
}

/// Largest l1 norm of the NW gradient (central differences) sampled on the
/// segment between two side-0 vectors; a Lipschitz constant for the
/// mean-value bound along that segment.
pub fn nw_lipschitz_on_segment(pdm: &PdmInstance, a: &[f64], b: &[f64]) -> f64 {
    let h = 1e-6;
    let mut best: f64 = 0.0;
    for s in 0..=20 {
        let lam = s as f64 / 20.0;
        let t: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - lam) * x + lam * y).collect();
        let mut norm = 0.0;
        for j in 0..t.len() {
            let mut up = t.clone();
            let mut dn = t.clone();
            up[j] = (t[j] + h).min(1.0);
            dn[j] = (t[j] - h).max(0.0);
            norm += ((nw_at(pdm, &up) - nw_at(pdm, &dn)) / (up[j] - dn[j])).abs();
        }
        best = best.max(norm);
    }
    best
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}

/// The sampled utility axioms: normalization, homogeneity, concavity and
/// monotonicity at one draw. Returns the names of violated axioms.
pub fn axiom_violations(spec: &UtilitySpec, x: &[f64], y: &[f64], lam: f64, mix: f64, bump: &[f64], tol: f64) -> Vec<&'static str> {
    let u = |v: &[f64]| spec.evaluate(v).unwrap();
    let mut bad = Vec::new();
    let zero = vec![0.0; x.len()];
    if u(&zero) != 0.0 {
        bad.push("normalization");
    }
    let (ux, uy) = (u(x), u(y));
    let scaled: Vec<f64> = x.iter().map(|v| lam * v).collect();
    if (u(&scaled) - lam * ux).abs() > tol * (1.0 + lam * ux) {
        bad.push("homogeneity");
    }
    let mixed: Vec<f64> = x.iter().zip(y).map(|(a, b)| mix * a + (1.0 - mix) * b).collect();
    if u(&mixed) < mix * ux + (1.0 - mix) * uy - tol * (1.0 + ux.max(uy)) {
        bad.push("concavity");
    }
    let bigger: Vec<f64> = x.iter().zip(bump).map(|(a, b)| a + b).collect();
    if u(&bigger) < ux - tol * (1.0 + ux) {
        bad.push("monotonicity");
    }
    if !(ux >= 0.0 && ux.is_finite()) {
        bad.push("range");
    }
    bad
}
