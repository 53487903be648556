//! Derivative-free maximization of the key rate over `(mu, p_s)`.
//!
//! Every run starts with a fixed log-spaced grid. The best grid point seeds
//! either a differential-evolution population (default) or a compass pattern
//! search, so the result can never be worse than the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::analytic_rate;
use crate::params::ProtocolParams;

pub const GRID_MU: usize = 50;
pub const GRID_P_S: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub mu_min: f64,
    pub mu_max: f64,
    pub p_s_min: f64,
    pub p_s_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            mu_min: 1e-6,
            mu_max: 0.1,
            p_s_min: 0.01,
            p_s_max: 0.5,
        }
    }
}

impl Bounds {
    /// Pins `p_s` to a single value.
    pub fn with_fixed_p_s(self, p_s: f64) -> Self {
        Self {
            p_s_min: p_s,
            p_s_max: p_s,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu_max && self.mu_max.is_finite()) {
            return Err(Error::usage(
                "mu bounds",
                format!("need 0 < mu_min <= mu_max, got [{}, {}]", self.mu_min, self.mu_max),
            ));
        }
        if !(self.p_s_min > 0.0 && self.p_s_min <= self.p_s_max && self.p_s_max < 1.0) {
            return Err(Error::usage(
                "p_s bounds",
                format!("need 0 < p_s_min <= p_s_max < 1, got [{}, {}]", self.p_s_min, self.p_s_max),
            ));
        }
        Ok(())
    }

    fn fixed_p_s(&self) -> bool {
        self.p_s_min == self.p_s_max
    }

    /// Unit-square coordinates to `(mu, p_s)`, both log-scaled.
    fn decode(&self, x: [f64; 2]) -> (f64, f64) {
        let lerp_log = |lo: f64, hi: f64, t: f64| (lo.ln() + t.clamp(0.0, 1.0) * (hi / lo).ln()).exp();
        (
            lerp_log(self.mu_min, self.mu_max, x[0]).clamp(self.mu_min, self.mu_max),
            lerp_log(self.p_s_min, self.p_s_max, x[1]).clamp(self.p_s_min, self.p_s_max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Evolution,
    Pattern,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "evolution" | "de" | "ga" => Ok(Self::Evolution),
            "pattern" => Ok(Self::Pattern),
            other => Err(format!("unknown strategy `{other}` (expected evolution or pattern)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub population: usize,
    pub generations: usize,
    /// Differential weight.
    pub weight: f64,
    pub crossover: f64,
    /// Smallest pattern-search step, in unit-square coordinates.
    pub min_step: f64,
    /// Keep every evaluation in the result.
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Evolution,
            seed: 0x5eed,
            population: 24,
            generations: 40,
            weight: 0.7,
            crossover: 0.9,
            min_step: 1e-4,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub mu: f64,
    pub p_s: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub mu_opt: f64,
    pub p_s_opt: f64,
    pub rate_opt: f64,
    /// Best value on the pre-scan grid.
    pub grid_rate: f64,
    pub evaluations: usize,
    /// No candidate produced key.
    pub infeasible: bool,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<Candidate>,
}

struct Search<'a> {
    base: &'a ProtocolParams,
    bounds: Bounds,
    record: bool,
    trace: Vec<Candidate>,
    evaluations: usize,
}

impl Search<'_> {
    fn params(&self, mu: f64, p_s: f64) -> ProtocolParams {
        ProtocolParams {
            mu,
            p_s,
            ..*self.base
        }
    }

    /// Evaluates points in parallel; results keep input order.
    fn eval(&mut self, points: &[[f64; 2]]) -> Vec<f64> {
        let rates: Vec<Candidate> = points
            .par_iter()
            .map(|&x| {
                let (mu, p_s) = self.bounds.decode(x);
                Candidate {
                    mu,
                    p_s,
                    rate: analytic_rate(&self.params(mu, p_s)),
                }
            })
            .collect();
        self.evaluations += rates.len();
        let out = rates.iter().map(|c| c.rate).collect();
        if self.record {
            self.trace.extend(rates);
        }
        out
    }
}

fn grid_axis(n: usize) -> Vec<f64> {
    if n == 1 {
        vec![0.5]
    } else {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

fn best_index(values: &[f64]) -> usize {
    // First maximum, so ties resolve to the earliest candidate.
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn evolve(
    search: &mut Search<'_>,
    grid: &[[f64; 2]],
    grid_rates: &[f64],
    config: &OptimizerConfig,
    dims: usize,
) -> ([f64; 2], f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let np = config.population.max(4);

    // Seed with the best grid points, then random fill.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid_rates[b].total_cmp(&grid_rates[a]).then(a.cmp(&b)));
    let mut pop: Vec<[f64; 2]> = order.iter().take(np / 2).map(|&i| grid[i]).collect();
    let mut fit: Vec<f64> = order.iter().take(np / 2).map(|&i| grid_rates[i]).collect();
    let fresh: Vec<[f64; 2]> = (pop.len()..np)
        .map(|_| {
            let x0 = rng.random::<f64>();
            let x1 = if dims == 2 { rng.random::<f64>() } else { 0.5 };
            [x0, x1]
        })
        .collect();
    fit.extend(search.eval(&fresh));
    pop.extend(fresh);

    for _ in 0..config.generations {
        let trials: Vec<[f64; 2]> = (0..np)
            .map(|i| {
                let pick = |rng: &mut ChaCha8Rng, not: &[usize]| loop {
                    let j = rng.random_range(0..np);
                    if !not.contains(&j) {
                        break j;
                    }
                };
                let a = pick(&mut rng, &[i]);
                let b = pick(&mut rng, &[i, a]);
                let c = pick(&mut rng, &[i, a, b]);
                let forced = rng.random_range(0..dims);
                let mut t = pop[i];
                for d in 0..dims {
                    if d == forced || rng.random::<f64>() < config.crossover {
                        let v = pop[a][d] + config.weight * (pop[b][d] - pop[c][d]);
                        // Reflect back into the unit interval.
                        t[d] = if v < 0.0 {
                            (-v).min(1.0)
                        } else if v > 1.0 {
                            (2.0 - v).max(0.0)
                        } else {
                            v
                        };
                    }
                }
                t
            })
            .collect();
        let trial_fit = search.eval(&trials);
        for i in 0..np {
            if trial_fit[i] >= fit[i] {
                pop[i] = trials[i];
                fit[i] = trial_fit[i];
            }
        }
    }
    let i = best_index(&fit);
    (pop[i], fit[i])
}

fn pattern(
    search: &mut Search<'_>,
    start: [f64; 2],
    start_rate: f64,
    config: &OptimizerConfig,
    dims: usize,
) -> ([f64; 2], f64) {
    let (mut x, mut fx) = (start, start_rate);
    let mut step = 1.0 / GRID_MU as f64;
    while step >= config.min_step {
        let mut probes = Vec::with_capacity(2 * dims);
        for d in 0..dims {
            for s in [step, -step] {
                let mut p = x;
                p[d] = (p[d] + s).clamp(0.0, 1.0);
                probes.push(p);
            }
        }
        let rates = search.eval(&probes);
        let i = best_index(&rates);
        if rates[i] > fx {
            x = probes[i];
            fx = rates[i];
        } else {
            step /= 2.0;
        }
    }
    (x, fx)
}

/// Maximizes the analytic key rate of `base` over `mu` and `p_s`.
///
/// All other fields of `base` (channel, `N`, `M`, budget, `f`) stay fixed.
pub fn optimize(
    base: &ProtocolParams,
    bounds: &Bounds,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    bounds.validate()?;
    ProtocolParams {
        mu: bounds.mu_min,
        p_s: bounds.p_s_min,
        ..*base
    }
    .validate()?;

    let dims = if bounds.fixed_p_s() { 1 } else { 2 };
    let mut search = Search {
        base,
        bounds: *bounds,
        record: config.record_trace,
        trace: Vec::new(),
        evaluations: 0,
    };

    let p_axis = if dims == 1 { vec![0.5] } else { grid_axis(GRID_P_S) };
    let grid: Vec<[f64; 2]> = grid_axis(GRID_MU)
        .into_iter()
        .flat_map(|m| p_axis.iter().map(move |&p| [m, p]))
        .collect();
    let grid_rates = search.eval(&grid);
    let g = best_index(&grid_rates);
    let grid_rate = grid_rates[g];

    let (mut x, mut fx) = (grid[g], grid_rate);
    if grid_rate > 0.0 {
        let found = match config.strategy {
            Strategy::Evolution => {
                let (xe, fe) = evolve(&mut search, &grid, &grid_rates, config, dims);
                pattern(&mut search, xe, fe, config, dims)
            }
            Strategy::Pattern => pattern(&mut search, x, fx, config, dims),
        };
        if found.1 > fx {
            (x, fx) = found;
        }
    }

    let (mu_opt, p_s_opt) = bounds.decode(x);
    let rate_opt = analytic_rate(&search.params(mu_opt, p_s_opt));
    debug_assert_eq!(rate_opt, fx);
    Ok(OptimizationResult {
        mu_opt,
        p_s_opt,
        rate_opt,
        grid_rate,
        evaluations: search.evaluations + 1,
        infeasible: !(rate_opt > 0.0),
        strategy: config.strategy,
        trace: search.trace,
    })
}
