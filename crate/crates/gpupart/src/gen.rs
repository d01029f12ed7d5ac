//! Synthetic taskset generation: UUniFast-Discard utilizations, periods
//! drawn from a small-LCM menu, deadlines at 0.75 T, and the two
//! execution-time curves derived from the per-type floor and conflict
//! factors.

use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ExecCurve, Frac, ModelError, Task, TaskId, TaskSet, TaskType, Time};
use crate::sched::min_sms_single;

/// Micro-units per model time unit. The period menu and all derived
/// durations are stored in micro-units so fractional floors like
/// `0.02 a` stay representable as integers.
pub const MICRO: Time = 1_000_000;

/// Default period menu in model units: endpoints 50 and 4000, interior
/// values chosen for small pairwise LCMs (every entry divides 4000).
pub const DEFAULT_PERIOD_MENU_UNITS: [Time; 8] = [50, 100, 200, 400, 500, 1000, 2000, 4000];

/// Bounded retries when a task cannot be given a representable
/// execution time even at the largest period.
const MAX_TASK_RETRIES: usize = 64;
/// Whole-vector rejections allowed before UUniFast-Discard gives up.
/// Acceptance bottoms out around U = n/2 (a few accepts per million
/// draws at n = 50), so the cap is generous.
const MAX_DISCARDS: usize = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("UUniFast-Discard exhausted {0} rejections; U too close to n")]
    DiscardExhausted(usize),
    #[error("task {0} infeasible at every period after retries")]
    TaskInfeasible(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of tasks.
    pub n: usize,
    /// Target total utilization.
    pub u_total: f64,
    /// Probability that a task is memory-intensive.
    pub prm: f64,
    /// Period menu in micro-units, sorted ascending.
    pub period_menu: Vec<Time>,
    /// D = deadline_factor * T.
    pub deadline_factor: Frac,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n: usize, u_total: f64, prm: f64, seed: u64) -> Self {
        GenConfig {
            n,
            u_total,
            prm,
            period_menu: DEFAULT_PERIOD_MENU_UNITS.iter().map(|&p| p * MICRO).collect(),
            deadline_factor: Ratio::new(3, 4),
            seed,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        if !(0.0..=1.0).contains(&self.prm) {
            return Err(GenError::InvalidConfig(format!("prm={} not in [0,1]", self.prm)));
        }
        if self.u_total < 0.0 || self.u_total > self.n as f64 {
            return Err(GenError::InvalidConfig(format!(
                "U={} must satisfy 0 <= U <= n={}",
                self.u_total, self.n
            )));
        }
        let zero = Frac::from_integer(0);
        let one = Frac::from_integer(1);
        if self.deadline_factor <= zero || self.deadline_factor > one {
            return Err(GenError::InvalidConfig("deadline factor must be in (0,1]".into()));
        }
        if self.period_menu.is_empty() || self.period_menu.windows(2).any(|w| w[0] > w[1]) {
            return Err(GenError::InvalidConfig(
                "period menu must be non-empty and sorted ascending".into(),
            ));
        }
        Ok(())
    }
}

/// UUniFast with whole-vector rejection: draws `n` utilizations summing
/// to `u_total` with every entry at most 1.
pub fn uunifast_discard<R: Rng>(
    n: usize,
    u_total: f64,
    rng: &mut R,
) -> Result<Vec<f64>, GenError> {
    if u_total < 0.0 || u_total > n as f64 {
        return Err(GenError::InvalidConfig(format!(
            "U={u_total} must satisfy 0 <= U <= n={n}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if u_total == n as f64 {
        // The simplex degenerates to a single point.
        return Ok(vec![1.0; n]);
    }
    // Rejection is hopeless when U approaches n (almost every raw
    // UUniFast vector has some u_i > 1). The capped simplex is
    // symmetric under u -> 1 - u, so for U > n/2 we draw the
    // complement vector with sum n - U instead; the accepted
    // distribution is identical to plain whole-vector rejection.
    if u_total > n as f64 / 2.0 {
        let v = uunifast_reject(n, n as f64 - u_total, rng)?;
        return Ok(v.into_iter().map(|x| 1.0 - x).collect());
    }
    uunifast_reject(n, u_total, rng)
}

fn uunifast_reject<R: Rng>(n: usize, u_total: f64, rng: &mut R) -> Result<Vec<f64>, GenError> {
    let mut u = vec![0.0; n];
    'draw: for _ in 0..MAX_DISCARDS {
        let mut remaining = u_total;
        for i in (1..n).rev() {
            let s = remaining * rng.random::<f64>().powf(1.0 / i as f64);
            u[i] = remaining - s;
            if u[i] > 1.0 {
                // A later value can only shrink the remainder, so the
                // vector is already lost; discard without finishing it.
                // The skipped RNG draws do not affect the accepted
                // distribution (each attempt starts fresh).
                continue 'draw;
            }
            remaining = s;
        }
        u[0] = remaining;
        if u[0] <= 1.0 {
            return Ok(u);
        }
    }
    Err(GenError::DiscardExhausted(MAX_DISCARDS))
}

fn round_frac(x: f64) -> Time {
    x.round() as Time
}

/// Scales a curve by the conflict factor k, rounding to micro-units.
fn inflate(curve: ExecCurve, k: Frac) -> ExecCurve {
    let scale = |t: Time| (Frac::from_integer(t as i128) * k).round().to_integer() as Time;
    ExecCurve {
        a: scale(curve.a).max(curve.a),
        b: scale(curve.b).max(curve.b),
    }
}

/// Generates a full taskset for a platform of `total_sms` SMs.
pub fn generate_taskset(config: &GenConfig, total_sms: u32) -> Result<TaskSet, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let utils = uunifast_discard(config.n, config.u_total, &mut rng)?;

    let mut tasks = Vec::with_capacity(config.n);
    for (idx, &u0) in utils.iter().enumerate() {
        let mut u = u0;
        let mut placed = None;
        'retry: for retry in 0..MAX_TASK_RETRIES {
            let start = rng.random_range(0..config.period_menu.len());
            // The period may only be bumped upward through the menu.
            for &period in &config.period_menu[start..] {
                if let Some(task) = build_task(idx as u32, u, period, config, total_sms, &mut rng)? {
                    placed = Some(task);
                    break 'retry;
                }
            }
            // Infeasible even at the largest period: redraw this task's
            // utilization.
            u = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let _ = retry;
        }
        match placed {
            Some(t) => tasks.push(t),
            None => return Err(GenError::TaskInfeasible(idx)),
        }
    }
    Ok(TaskSet::new(tasks, total_sms)?)
}

/// Builds one task at the given utilization and period, or `None` when
/// the execution time is not reasonable there (no feasible size at
/// full platform size, or below one micro-unit).
fn build_task<R: Rng>(
    id: u32,
    u: f64,
    period: Time,
    config: &GenConfig,
    total_sms: u32,
    rng: &mut R,
) -> Result<Option<Task>, GenError> {
    let a = round_frac(u * period as f64);
    if a < 1 {
        return Ok(None);
    }
    let deadline = (Frac::from_integer(period as i128) * config.deadline_factor).to_integer() as Time;

    let ttype = if rng.random::<f64>() < config.prm {
        TaskType::Memory
    } else {
        TaskType::Compute
    };
    let (floor_frac, k) = match ttype {
        TaskType::Memory => (Ratio::new(1i128, 10), Ratio::new(23i128, 10)),
        TaskType::Compute => (Ratio::new(1i128, 50), Ratio::new(6i128, 5)),
    };
    let b = (Frac::from_integer(a as i128) * floor_frac).round().to_integer() as Time;
    let curve_n = ExecCurve { a, b };
    let curve_c = inflate(curve_n, k);

    let task = Task::new(TaskId(id), period, deadline, ttype, curve_n, curve_c)?;
    if min_sms_single(&task, total_sms).is_none() {
        return Ok(None);
    }
    Ok(Some(task))
}
