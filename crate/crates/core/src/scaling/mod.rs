//! Scaling-law estimation: fit L(N, D) = E + A/N^a + B/D^b to observed
//! (params, states-seen, validation-loss) triples by minimizing mean squared
//! error in raw loss space with L-BFGS from a grid of initializations, then
//! derive compute-optimal (N, D) allocations under the dense-layer budget
//! C = 3 N D.

mod lbfgs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trained model: parameter count N, training states seen D, and the
/// validation loss L it reached.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingObservation {
    pub params: f64,
    pub states_seen: f64,
    pub loss: f64,
    #[serde(default)]
    pub tag: String,
}

impl ScalingObservation {
    /// Training compute under C = 3 N D.
    pub fn compute(&self) -> f64 {
        3.0 * self.params * self.states_seen
    }
}

/// Fitted parameters of the loss surface.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub e: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub fit_mse: f64,
    /// Largest training compute among the fitted observations; allocation
    /// requests beyond it are extrapolations.
    pub max_observed_compute: f64,
}

/// Evaluate the fitted loss surface at (N, D).
pub fn predict_loss(fit: &ScalingFit, params: f64, states_seen: f64) -> f64 {
    fit.e + fit.a / params.powf(fit.alpha) + fit.b / states_seen.powf(fit.beta)
}

const MIN_OBSERVATIONS: usize = 6;
const ALPHA_MIN: f64 = 1e-4;
const ALPHA_MAX: f64 = 2.0 - 1e-4;
const LOG_AB_BOUND: f64 = 27.6; // ln 1e12

/// x = [E, ln A, ln B, alpha, beta]
fn objective(x: &[f64], obs: &[ScalingObservation]) -> (f64, Vec<f64>) {
    let (e, ln_a, ln_b, alpha, beta) = (x[0], x[1], x[2], x[3], x[4]);
    let (a, b) = (ln_a.exp(), ln_b.exp());
    let n_obs = obs.len() as f64;
    let mut mse = 0.0;
    let mut grad = vec![0.0f64; 5];
    for o in obs {
        let na = a / o.params.powf(alpha);
        let db = b / o.states_seen.powf(beta);
        let r = e + na + db - o.loss;
        mse += r * r;
        let w = 2.0 * r / n_obs;
        grad[0] += w;
        grad[1] += w * na;
        grad[2] += w * db;
        grad[3] += w * (-na * o.params.ln());
        grad[4] += w * (-db * o.states_seen.ln());
    }
    (mse / n_obs, grad)
}

fn project(x: &mut [f64]) {
    x[0] = x[0].max(0.0);
    x[1] = x[1].clamp(-LOG_AB_BOUND, LOG_AB_BOUND);
    x[2] = x[2].clamp(-LOG_AB_BOUND, LOG_AB_BOUND);
    x[3] = x[3].clamp(ALPHA_MIN, ALPHA_MAX);
    x[4] = x[4].clamp(ALPHA_MIN, ALPHA_MAX);
}

/// Fit the loss surface. L-BFGS runs from every grid initialization
/// (A, B in 1..=10; alpha, beta in 0.1..=0.5 step 0.1; E at the minimum
/// observed loss) and the lowest-MSE result wins, with the grid index
/// breaking ties. Deterministic given the observations.
pub fn fit(observations: &[ScalingObservation]) -> Result<ScalingFit> {
    if observations.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            need: MIN_OBSERVATIONS,
            got: observations.len(),
        });
    }
    if observations
        .iter()
        .any(|o| o.params <= 0.0 || o.states_seen <= 0.0 || o.loss < 0.0 || !o.loss.is_finite())
    {
        return Err(Error::Parse(
            "observations need positive N, D and finite non-negative loss".into(),
        ));
    }

    let e0 = observations.iter().map(|o| o.loss).fold(f64::INFINITY, f64::min);
    let mut starts = Vec::new();
    for a in 1..=10 {
        for b in 1..=10 {
            for ai in 1..=5 {
                for bi in 1..=5 {
                    starts.push([
                        e0,
                        (a as f64).ln(),
                        (b as f64).ln(),
                        ai as f64 * 0.1,
                        bi as f64 * 0.1,
                    ]);
                }
            }
        }
    }

    let opts = lbfgs::LbfgsOptions::default();
    let results: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| {
            let (x, fx) = lbfgs::minimize(&|x| objective(x, observations), &project, x0, &opts);
            (fx, x)
        })
        .collect();

    let best = results
        .iter()
        .enumerate()
        .filter(|(_, (fx, _))| fx.is_finite())
        .min_by(|(i, (fa, _)), (j, (fb, _))| fa.total_cmp(fb).then(i.cmp(j)))
        .map(|(_, r)| r)
        .ok_or(Error::FitDiverged)?;

    let x = &best.1;
    let max_observed_compute = observations
        .iter()
        .map(|o| o.compute())
        .fold(0.0f64, f64::max);
    Ok(ScalingFit {
        e: x[0],
        a: x[1].exp(),
        b: x[2].exp(),
        alpha: x[3],
        beta: x[4],
        fit_mse: best.0,
        max_observed_compute,
    })
}

/// Compute-optimal split of a budget: minimize the predicted loss subject
/// to 3 N D = C. Closed form from the first-order condition
/// alpha A N^-alpha = beta B D^-beta.
pub fn optimal_allocation(fit: &ScalingFit, budget: f64) -> (f64, f64) {
    let s = fit.alpha + fit.beta;
    let coeff = (fit.alpha * fit.a) / (fit.beta * fit.b);
    let n = coeff.powf(1.0 / s) * (budget / 3.0).powf(fit.beta / s);
    let d = budget / (3.0 * n);
    (n, d)
}

/// Growth exponents of (N_opt, D_opt) in the budget: C^(beta/(alpha+beta))
/// and C^(alpha/(alpha+beta)).
pub fn allocation_exponents(fit: &ScalingFit) -> (f64, f64) {
    let s = fit.alpha + fit.beta;
    (fit.beta / s, fit.alpha / s)
}

/// Allocation recommendation for the next scaling step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProgressivePlan {
    pub params: f64,
    pub states_seen: f64,
    pub budget: f64,
    /// next budget / largest compute the latest fit has seen (1 = pure
    /// interpolation).
    pub extrapolation_factor: f64,
}

/// Recommend (N, D) for `next_budget` under the most recent fit.
pub fn progressive_plan(fits_so_far: &[ScalingFit], next_budget: f64) -> Result<ProgressivePlan> {
    let fit = fits_so_far.last().ok_or(Error::InsufficientData { need: 1, got: 0 })?;
    let (params, states_seen) = optimal_allocation(fit, next_budget);
    Ok(ProgressivePlan {
        params,
        states_seen,
        budget: next_budget,
        extrapolation_factor: next_budget / fit.max_observed_compute,
    })
}

/// Parse observation rows: `N,D,L[,tag]` per line, `#` comments ignored.
pub fn parse_observations(text: &str) -> Result<Vec<ScalingObservation>> {
    let mut obs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::Parse(format!(
                "line {}: expected N,D,L[,tag]",
                lineno + 1
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        obs.push(ScalingObservation {
            params: num(fields[0])?,
            states_seen: num(fields[1])?,
            loss: num(fields[2])?,
            tag: fields.get(3).unwrap_or(&"").to_string(),
        });
    }
    Ok(obs)
}

pub fn format_observations(obs: &[ScalingObservation]) -> String {
    let mut out = String::from("# N,D,L,tag\n");
    for o in obs {
        out.push_str(&format!("{},{},{},{}\n", o.params, o.states_seen, o.loss, o.tag));
    }
    out
}

/// Compute-optimal frontier rows for plotting: budget, N_opt, D_opt,
/// predicted loss.
pub fn format_frontier(fit: &ScalingFit, budgets: &[f64]) -> String {
    let mut out = String::from("# budget,n_opt,d_opt,predicted_loss\n");
    for &c in budgets {
        let (n, d) = optimal_allocation(fit, c);
        out.push_str(&format!("{c},{n},{d},{}\n", predict_loss(fit, n, d)));
    }
    out
}
