//! Log-barrier Newton method for maximizing a sum of weighted log-utilities
//! under strict linear inequalities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(k, a)| a * v[*k]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregator {
    Linear(Vec<f64>),
    CobbDouglas(Vec<f64>),
    Ces(Vec<f64>, f64),
}

/// `weight * ln h(inputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    pub weight: f64,
    pub agg: Aggregator,
    pub inputs: Vec<Affine>,
}

/// `a . v < rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn slack(&self, v: &[f64]) -> f64 {
        self.rhs - self.terms.iter().map(|(k, a)| a * v[*k]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    pub dim: usize,
    pub terms: Vec<LogTerm>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct BarrierOptions {
    pub mu_start: f64,
    pub mu_shrink: f64,
    /// Stop once `mu * constraints` falls below this.
    pub gap: f64,
    /// Centering stops when the Newton decrement is below `newton_tol * mu`.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { mu_start: 1.0, mu_shrink: 0.2, gap: 1e-10, newton_tol: 1e-12, max_newton: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub v: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Sum of `weight * ln h` at `v`.
    pub objective: f64,
    pub iterations: usize,
    pub mu: f64,
    /// Infinity norm of the Lagrangian gradient with `multipliers`.
    pub stationarity: f64,
}

/// Value, gradient and Hessian of `ln h` in input space.
fn log_aggregate(agg: &Aggregator, x: &[f64]) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let k = x.len();
    if x.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let mut hess = vec![vec![0.0; k]; k];
    match agg {
        Aggregator::Linear(w) => {
            let s: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            if !(s > 0.0) {
                return None;
            }
            let g: Vec<f64> = w.iter().map(|a| a / s).collect();
            for a in 0..k {
                for b in 0..k {
                    hess[a][b] = -g[a] * g[b];
                }
            }
            Some((s.ln(), g, hess))
        }
        Aggregator::CobbDouglas(w) => {
            let total: f64 = w.iter().sum();
            let mut val = 0.0;
            let mut g = vec![0.0; k];
            for a in 0..k {
                let e = w[a] / total;
                val += e * x[a].ln();
                g[a] = e / x[a];
                hess[a][a] = -e / (x[a] * x[a]);
            }
            Some((val, g, hess))
        }
        Aggregator::Ces(w, rho) => {
            let rho = *rho;
            let terms: Vec<f64> = w.iter().zip(x).map(|(a, b)| (a * b).powf(rho)).collect();
            let s: f64 = terms.iter().sum();
            if !(s > 0.0 && s.is_finite()) {
                return None;
            }
            let g: Vec<f64> = (0..k).map(|a| terms[a] / (x[a] * s)).collect();
            for a in 0..k {
                for b in 0..k {
                    hess[a][b] = -rho * g[a] * g[b];
                }
                hess[a][a] += (rho - 1.0) * g[a] / x[a];
            }
            Some((s.ln() / rho, g, hess))
        }
    }
}

impl Program {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn add_var(&mut self) -> usize {
        self.dim += 1;
        self.dim - 1
    }

    /// Objective without barrier, `None` outside the domain.
    pub fn objective(&self, v: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let x: Vec<f64> = t.inputs.iter().map(|a| a.eval(v)).collect();
            total += t.weight * log_aggregate(&t.agg, &x)?.0;
        }
        Some(total)
    }

    /// Per-term gradients of `weight * ln h` with respect to the term inputs.
    pub fn input_gradients(&self, v: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.terms
            .iter()
            .map(|t| {
                let x: Vec<f64> = t.inputs.iter().map(|a| a.eval(v)).collect();
                let (_, g, _) = log_aggregate(&t.agg, &x)?;
                Some(g.into_iter().map(|gi| t.weight * gi).collect())
            })
            .collect()
    }

    fn barrier_value(&self, v: &[f64], mu: f64) -> Option<f64> {
        let mut total = self.objective(v)?;
        for c in &self.constraints {
            let s = c.slack(v);
            if !(s > 0.0) {
                return None;
            }
            total += mu * s.ln();
        }
        Some(total)
    }

    fn derivatives(&self, v: &[f64], mu: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for t in &self.terms {
            let x: Vec<f64> = t.inputs.iter().map(|a| a.eval(v)).collect();
            let (_, g, h) = log_aggregate(&t.agg, &x)?;
            for (a, ia) in t.inputs.iter().enumerate() {
                for &(ka, ca) in &ia.terms {
                    grad[ka] += t.weight * g[a] * ca;
                    for (b, ib) in t.inputs.iter().enumerate() {
                        if h[a][b] == 0.0 {
                            continue;
                        }
                        for &(kb, cb) in &ib.terms {
                            hess[(ka, kb)] += t.weight * h[a][b] * ca * cb;
                        }
                    }
                }
            }
        }
        for c in &self.constraints {
            let s = c.slack(v);
            if !(s > 0.0) {
                return None;
            }
            for &(ka, ca) in &c.terms {
                grad[ka] -= mu * ca / s;
                for &(kb, cb) in &c.terms {
                    hess[(ka, kb)] -= mu * ca * cb / (s * s);
                }
            }
        }
        Some((grad, hess))
    }

    fn lagrangian_gradient(&self, v: &[f64], lambda: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim];
        for t in &self.terms {
            let x: Vec<f64> = t.inputs.iter().map(|a| a.eval(v)).collect();
            if let Some((_, g, _)) = log_aggregate(&t.agg, &x) {
                for (a, ia) in t.inputs.iter().enumerate() {
                    for &(k, c) in &ia.terms {
                        grad[k] += t.weight * g[a] * c;
                    }
                }
            }
        }
        for (c, l) in self.constraints.iter().zip(lambda) {
            for &(k, a) in &c.terms {
                grad[k] -= l * a;
            }
        }
        grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Largest step up to 1 keeping every slack above 1% of its current value.
    fn max_step(&self, v: &[f64], d: &DVector<f64>) -> f64 {
        let mut alpha: f64 = 1.0;
        for c in &self.constraints {
            let rate: f64 = c.terms.iter().map(|&(k, a)| a * d[k]).sum();
            if rate > 0.0 {
                alpha = alpha.min(0.99 * c.slack(v) / rate);
            }
        }
        alpha
    }

    /// Maximize from the strictly feasible point `start`.
    pub fn solve(&self, start: Vec<f64>, opts: &BarrierOptions) -> Result<BarrierSolution> {
        if self.barrier_value(&start, opts.mu_start).is_none() {
            return Err(Error::InvalidConfig("barrier start point is not strictly feasible".into()));
        }
        let mut v = start;
        let mut mu = opts.mu_start;
        let mut iterations = 0;
        let mut centered: Option<(Vec<f64>, f64)> = None;
        let target = opts.gap / self.constraints.len().max(1) as f64;
        loop {
            let mut converged = false;
            for _ in 0..opts.max_newton {
                iterations += 1;
                let (grad, hess) = self
                    .derivatives(&v, mu)
                    .ok_or(Error::NonConvergence { iterations, residual: f64::NAN })?;
                let step = newton_step(&grad, &hess);
                let decrement = grad.dot(&step);
                if !(decrement.is_finite()) {
                    return Err(Error::NonConvergence { iterations, residual: decrement });
                }
                if decrement <= opts.newton_tol * mu || decrement <= 1e-20 {
                    converged = true;
                    break;
                }
                let mut alpha = self.max_step(&v, &step);
                if decrement < 0.1 * mu {
                    // Quadratic region: function differences are below rounding.
                    let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                    if trial == v {
                        converged = true;
                        break;
                    }
                    if self.derivatives(&trial, mu).is_some() {
                        v = trial;
                        continue;
                    }
                }
                let f0 = self.barrier_value(&v, mu).unwrap();
                let mut moved = false;
                while alpha > 1e-20 {
                    let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                    if let Some(f1) = self.barrier_value(&trial, mu) {
                        if f1 >= f0 + 0.25 * alpha * decrement {
                            v = trial;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    // Line search stalled at numerical precision.
                    converged = true;
                    break;
                }
            }
            if !converged {
                match centered.take() {
                    // Keep the last point that was on the central path.
                    Some((cv, cmu)) => {
                        v = cv;
                        mu = cmu;
                        break;
                    }
                    None => return Err(Error::NonConvergence { iterations, residual: mu }),
                }
            }
            centered = Some((v.clone(), mu));
            if mu <= target {
                break;
            }
            mu = (mu * opts.mu_shrink).max(target);
        }
        let multipliers: Vec<f64> = self.constraints.iter().map(|c| mu / c.slack(&v)).collect();
        let objective = self.objective(&v).unwrap();
        let stationarity = self.lagrangian_gradient(&v, &multipliers);
        Ok(BarrierSolution { v, multipliers, objective, iterations, mu, stationarity })
    }
}

/// Solve `(-H) d = g`, regularizing if the factorization fails.
fn newton_step(grad: &DVector<f64>, hess: &DMatrix<f64>) -> DVector<f64> {
    let neg = -hess.clone();
    let scale = neg.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut reg = 0.0;
    loop {
        let mut m = neg.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(grad);
        }
        reg = if reg == 0.0 { scale * 1e-14 } else { reg * 10.0 };
    }
}
