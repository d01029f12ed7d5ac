//! Schedulability tests: the fast necessary test over single-SM WCETs,
//! per-task minimal partition sizing, the preemptive-EDF processor-demand
//! test used inside every partition, and a discrete-event EDF simulator
//! kept as an independent oracle.

use num_integer::Integer;
use num_rational::Ratio;

use crate::model::{
    self, eval_curve, frac, Frac, ModelError, Task, TaskSet, Time,
};

/// Outcome of a demand-bound test. `witness` is the first absolute
/// deadline at which demand exceeds supply, present iff unschedulable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedVerdict {
    pub schedulable: bool,
    pub witness: Option<Time>,
}

impl SchedVerdict {
    fn pass() -> Self {
        SchedVerdict {
            schedulable: true,
            witness: None,
        }
    }

    fn fail(witness: Time) -> Self {
        SchedVerdict {
            schedulable: false,
            witness: Some(witness),
        }
    }
}

/// One task as seen by the demand test: WCET already resolved for the
/// partition size and conflict state it will run under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandTask {
    pub wcet: Frac,
    pub deadline: Time,
    pub period: Time,
}

impl DemandTask {
    pub fn new(wcet: Frac, deadline: Time, period: Time) -> Self {
        debug_assert!(deadline <= period && deadline > 0);
        DemandTask {
            wcet,
            deadline,
            period,
        }
    }

    pub fn from_times(wcet: Time, deadline: Time, period: Time) -> Self {
        Self::new(frac(wcet), deadline, period)
    }
}

/// Fast rejection from single-SM utilizations: returns false iff
/// the summed no-conflict single-SM load already exceeds the platform's
/// M SMs. True only means "not proven unschedulable".
pub fn necessary_test(taskset: &TaskSet) -> bool {
    let mut sum = Frac::from_integer(0);
    for t in &taskset.tasks {
        let c1 = frac(t.curve_n.a + t.curve_n.b);
        sum += c1 / frac(t.period);
    }
    sum <= Frac::from_integer(taskset.total_sms as i128)
}

/// Smallest partition size in `1..=max_sms` at which the no-conflict
/// WCET meets the deadline; `None` if even `max_sms` SMs are not enough.
pub fn min_sms_single(task: &Task, max_sms: u32) -> Option<u32> {
    // eval_curve is strictly decreasing in m, so the ascending scan
    // stops at the same size a binary search would find.
    (1..=max_sms).find(|&m| {
        eval_curve(task.curve_n, m).expect("m >= 1") <= frac(task.deadline)
    })
}

/// Exact preemptive-EDF test for synchronous constrained-deadline
/// periodic tasks on one partition-resource.
///
/// Schedulable iff the total utilization is at most 1 and, at every
/// absolute deadline `t` up to the hyperperiod, the cumulative demand
/// of jobs with deadlines in `[0, t]` fits in `t`.
pub fn edf_demand_test(entries: &[DemandTask]) -> Result<SchedVerdict, ModelError> {
    if entries.is_empty() {
        return Ok(SchedVerdict::pass());
    }

    let hyper = model::periods_hyperperiod(entries.iter().map(|e| e.period))?;

    let mut util = Frac::from_integer(0);
    for e in entries {
        util += e.wcet / frac(e.period);
    }
    let over_utilized = util > Frac::from_integer(1);

    // Scale all WCETs to a common denominator so the per-deadline sums
    // stay in integer arithmetic.
    let mut denom: i128 = 1;
    for e in entries {
        denom = denom.lcm(e.wcet.denom());
    }
    let scaled: Vec<i128> = entries
        .iter()
        .map(|e| e.wcet.numer() * (denom / e.wcet.denom()))
        .collect();

    // Demand only changes at absolute deadlines k*T + D <= H.
    let mut deadlines: Vec<Time> = Vec::new();
    for e in entries {
        let mut t = e.deadline;
        while t <= hyper {
            deadlines.push(t);
            t += e.period;
        }
    }
    deadlines.sort_unstable();
    deadlines.dedup();

    for &t in &deadlines {
        let mut demand: i128 = 0;
        for (e, &w) in entries.iter().zip(&scaled) {
            if t >= e.deadline {
                let jobs = (t - e.deadline) / e.period + 1;
                demand += jobs as i128 * w;
            }
        }
        if demand > t as i128 * denom {
            return Ok(SchedVerdict::fail(t));
        }
    }

    if over_utilized {
        // Demand exceeds supply eventually; report the horizon as witness
        // when no enumerated deadline already exposed it.
        return Ok(SchedVerdict::fail(hyper));
    }
    Ok(SchedVerdict::pass())
}

/// Discrete-event preemptive-EDF simulation on one partition-resource,
/// synchronous release at time 0. Returns true iff no job misses its
/// absolute deadline within `horizon`.
///
/// Independent oracle for [`edf_demand_test`]: for synchronous
/// constrained-deadline periodic tasks the two must agree when the
/// horizon covers one hyperperiod.
pub fn simulate_edf(entries: &[DemandTask], horizon: Time) -> bool {
    #[derive(Clone)]
    struct Job {
        abs_deadline: Time,
        remaining: Frac,
    }

    let mut now = Frac::from_integer(0);
    let horizon_f = frac(horizon);
    let mut next_release: Vec<Time> = vec![0; entries.len()];
    let mut ready: Vec<Job> = Vec::new();

    loop {
        // Release every job due at or before `now`.
        for (i, e) in entries.iter().enumerate() {
            while frac(next_release[i]) <= now && next_release[i] < horizon {
                ready.push(Job {
                    abs_deadline: next_release[i] + e.deadline,
                    remaining: e.wcet,
                });
                next_release[i] += e.period;
            }
        }
        ready.retain(|j| j.remaining > Frac::from_integer(0));

        let upcoming = next_release
            .iter()
            .copied()
            .filter(|&r| r < horizon)
            .min();

        let Some(job_idx) = ready
            .iter()
            .enumerate()
            .min_by_key(|(_, j)| j.abs_deadline)
            .map(|(i, _)| i)
        else {
            // Idle until the next release, or done.
            match upcoming {
                Some(r) => {
                    now = frac(r);
                    continue;
                }
                None => return true,
            }
        };

        let job = &ready[job_idx];
        let finish = now + job.remaining;
        let preempt_at = upcoming.map(frac).filter(|r| *r < finish);
        let run_until = preempt_at.unwrap_or(finish).min(horizon_f);

        let deadline = frac(ready[job_idx].abs_deadline);
        if run_until > deadline || (finish > deadline && run_until >= horizon_f) {
            return false;
        }

        let delta = run_until - now;
        ready[job_idx].remaining -= delta;
        now = run_until;

        if now >= horizon_f {
            // Any job with a deadline within the horizon must be done.
            return ready
                .iter()
                .all(|j| j.remaining == Frac::from_integer(0) || frac(j.abs_deadline) > horizon_f);
        }
    }
}

/// One randomly drawn small instance for the oracle-equivalence suite.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub entries: Vec<DemandTask>,
    pub hyperperiod: Time,
}

/// Draws a random instance with at most `max_tasks` tasks whose
/// hyperperiod stays small (periods from a divisor-friendly menu).
pub fn random_oracle_instance<R: rand::Rng>(rng: &mut R, max_tasks: usize) -> OracleInstance {
    const PERIODS: [Time; 8] = [4, 5, 8, 10, 20, 25, 40, 50];
    let n = rng.random_range(1..=max_tasks);
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let period = PERIODS[rng.random_range(0..PERIODS.len())];
        let deadline = rng.random_range(1..=period);
        // Fractional WCETs with small denominators exercise the exact
        // arithmetic paths.
        let denom = [1i128, 2, 4][rng.random_range(0..3)];
        let max_num = (deadline as i128 * denom).max(1) * 2;
        let numer = rng.random_range(1..=max_num);
        entries.push(DemandTask::new(Ratio::new(numer, denom), deadline, period));
    }
    let hyperperiod = model::periods_hyperperiod(entries.iter().map(|e| e.period))
        .expect("menu periods cannot overflow");
    OracleInstance {
        entries,
        hyperperiod,
    }
}

/// Runs `count` random instances through both the demand test and the
/// EDF simulator; returns the first disagreement, if any.
pub fn oracle_equivalence_run(
    seed: u64,
    count: usize,
    max_tasks: usize,
) -> Result<(), OracleInstance> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let inst = random_oracle_instance(&mut rng, max_tasks);
        let verdict = edf_demand_test(&inst.entries).expect("small hyperperiods");
        let simulated = simulate_edf(&inst.entries, inst.hyperperiod);
        if verdict.schedulable != simulated {
            return Err(inst);
        }
    }
    Ok(())
}
