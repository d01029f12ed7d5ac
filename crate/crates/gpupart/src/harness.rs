//! Experiment sweeps over the utilization grid: per-variant
//! schedulability rate, efficiency with its per-taskset bounds,
//! partition counts, and analysis times, aggregated per grid point.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gen::{generate_taskset, GenConfig};
use crate::model::{Frac, TaskSet};
use crate::partitioner::{
    one_g, partition_and_allocate, ForbiddenMode, HeuristicConfig, MergeOrder, Solution,
};
use crate::sched::necessary_test;

/// An allocation strategy under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    OneG,
    SmsAct,
    SmsIna,
    BfAct,
    BfIna,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::OneG,
        Variant::SmsAct,
        Variant::SmsIna,
        Variant::BfAct,
        Variant::BfIna,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::OneG => "1G",
            Variant::SmsAct => "SMS_ACT",
            Variant::SmsIna => "SMS_INA",
            Variant::BfAct => "BF_ACT",
            Variant::BfIna => "BF_INA",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_uppercase().as_str() {
            "1G" => Some(Variant::OneG),
            "SMS_ACT" => Some(Variant::SmsAct),
            "SMS_INA" => Some(Variant::SmsIna),
            "BF_ACT" => Some(Variant::BfAct),
            "BF_INA" => Some(Variant::BfIna),
            _ => None,
        }
    }

    pub fn heuristic_config(self) -> Option<HeuristicConfig> {
        let cfg = |order| {
            let mode = match self {
                Variant::SmsAct | Variant::BfAct => ForbiddenMode::Act,
                _ => ForbiddenMode::Ina,
            };
            // Bisection returns the same partition sizes as the linear
            // scan (verified by property test) but keeps wide merges
            // cheap, so the sweeps use it throughout.
            let mut cfg = HeuristicConfig::new(order, mode);
            cfg.binary_search_merge = true;
            Some(cfg)
        };
        match self {
            Variant::OneG => None,
            Variant::SmsAct | Variant::SmsIna => cfg(MergeOrder::Sms),
            Variant::BfAct | Variant::BfIna => cfg(MergeOrder::Bf),
        }
    }

    pub fn run(self, ts: &TaskSet) -> Option<Solution> {
        match self.heuristic_config() {
            None => one_g(ts).expect("model errors cannot arise from generated tasksets"),
            Some(cfg) => partition_and_allocate(ts, &cfg)
                .expect("model errors cannot arise from generated tasksets"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub total_sms: u32,
    pub n_tasks: usize,
    pub prm: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub u_step: f64,
    pub reps: usize,
    pub variants: Vec<Variant>,
    pub base_seed: u64,
    /// Worker threads; 1 keeps the run strictly sequential for
    /// undistorted timing.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.u_min > self.u_max {
            return Err("U_min must not exceed U_max".into());
        }
        if self.u_step <= 0.0 {
            return Err("U_step must be positive".into());
        }
        if self.reps == 0 {
            return Err("reps must be at least 1".into());
        }
        if self.variants.is_empty() {
            return Err("at least one variant required".into());
        }
        Ok(())
    }

    /// Grid points, skipping any U that UUniFast-Discard cannot satisfy.
    pub fn grid(&self) -> Vec<f64> {
        let mut points = Vec::new();
        let mut u = self.u_min;
        let mut i = 0u32;
        while u <= self.u_max + 1e-9 {
            if u <= self.n_tasks as f64 {
                points.push(u);
            } else {
                eprintln!("skipping grid point U={u}: exceeds task count {}", self.n_tasks);
            }
            i += 1;
            u = self.u_min + i as f64 * self.u_step;
        }
        points
    }
}

/// One aggregated grid point for one variant. Efficiency columns and
/// the partition count average over solved instances only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub u_nominal: f64,
    pub sched_rate: f64,
    pub eff_lower: f64,
    pub eff_upper: f64,
    pub eff_achieved: f64,
    pub avg_partitions: f64,
    pub avg_time_ms: f64,
}

/// Efficiency of an allocation: `lower` is the baseline load, `upper`
/// the all-conflict load, `achieved` applies each task's conflict
/// factor only where the allocation left it in conflict. Bounds depend
/// on the taskset alone, not on the found partitions.
pub fn efficiency(solution: &Solution, ts: &TaskSet) -> (Frac, Frac, Frac) {
    let one = Frac::from_integer(1);
    let mut lower = Frac::from_integer(0);
    let mut upper = Frac::from_integer(0);
    let mut achieved = Frac::from_integer(0);
    for t in &ts.tasks {
        let u = t.baseline_utilization();
        let k = t.conflict_factor();
        lower += u;
        upper += k * u;
        let in_conflict = solution.per_task_conflict.get(&t.id).copied().unwrap_or(false);
        achieved += if in_conflict { k * u } else { one * u };
    }
    (lower, upper, achieved)
}

/// Per-instance record kept while sweeping; aggregation happens after
/// all instances completed so the parallel order never matters.
#[derive(Debug, Clone)]
struct InstanceOutcome {
    solved: bool,
    eff: Option<(f64, f64, f64)>,
    partitions: usize,
    time_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    /// Instances rejected by the necessary test yet solved by some
    /// variant; must stay at zero.
    pub necessary_test_violations: usize,
    /// Grid instances whose taskset generation failed; counted as
    /// unschedulable for every variant.
    pub generation_failures: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for one (U, rep) instance; identical across variants so every
/// variant analyzes the same taskset.
pub fn instance_seed(base_seed: u64, u_nominal: f64, rep: usize) -> u64 {
    let mut s = splitmix64(base_seed ^ 0xa076_1d64_78bd_642f);
    s = splitmix64(s ^ u_nominal.to_bits());
    splitmix64(s ^ rep as u64)
}

fn frac_to_f64(f: Frac) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

fn run_instance(
    config: &SweepConfig,
    u: f64,
    rep: usize,
) -> (Vec<(Variant, InstanceOutcome)>, bool, bool) {
    let seed = instance_seed(config.base_seed, u, rep);
    let gen_config = GenConfig {
        prm: config.prm,
        ..GenConfig::new(config.n_tasks, u, config.prm, seed)
    };
    let taskset = match generate_taskset(&gen_config, config.total_sms) {
        Ok(ts) => ts,
        Err(_) => {
            let failed = config
                .variants
                .iter()
                .map(|&v| {
                    (
                        v,
                        InstanceOutcome {
                            solved: false,
                            eff: None,
                            partitions: 0,
                            time_ms: 0.0,
                        },
                    )
                })
                .collect();
            return (failed, false, true);
        }
    };

    let passes_necessary = necessary_test(&taskset);
    let mut any_solved = false;
    let outcomes = config
        .variants
        .iter()
        .map(|&v| {
            // Failed attempts cost analysis time too, so time the whole
            // run here rather than relying on the solution's own clock.
            let started = std::time::Instant::now();
            let solution = v.run(&taskset);
            let time_ms = started.elapsed().as_secs_f64() * 1e3;
            let outcome = match solution {
                Some(sol) => {
                    any_solved = true;
                    let (lo, hi, ach) = efficiency(&sol, &taskset);
                    InstanceOutcome {
                        solved: true,
                        eff: Some((frac_to_f64(lo), frac_to_f64(hi), frac_to_f64(ach))),
                        partitions: sol.partitions.len(),
                        time_ms,
                    }
                }
                None => InstanceOutcome {
                    solved: false,
                    eff: None,
                    partitions: 0,
                    time_ms,
                },
            };
            (v, outcome)
        })
        .collect();
    let violation = !passes_necessary && any_solved;
    (outcomes, violation, false)
}

/// Runs the full sweep: for each grid U and repetition, generates one
/// taskset shared by all variants and aggregates the outcomes to means.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult, String> {
    config.validate()?;
    let grid = config.grid();

    let instances: Vec<(f64, usize)> = grid
        .iter()
        .flat_map(|&u| (0..config.reps).map(move |rep| (u, rep)))
        .collect();

    let results: Vec<((f64, usize), (Vec<(Variant, InstanceOutcome)>, bool, bool))> =
        if config.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.jobs)
                .build()
                .map_err(|e| e.to_string())?;
            pool.install(|| {
                instances
                    .par_iter()
                    .map(|&(u, rep)| ((u, rep), run_instance(config, u, rep)))
                    .collect()
            })
        } else {
            instances
                .iter()
                .map(|&(u, rep)| ((u, rep), run_instance(config, u, rep)))
                .collect()
        };

    let mut necessary_test_violations = 0usize;
    let mut generation_failures = 0usize;
    let mut rows = Vec::new();
    for &variant in &config.variants {
        for &u in &grid {
            let mut solved = 0usize;
            let mut eff_sums = (0.0, 0.0, 0.0);
            let mut partition_sum = 0usize;
            let mut time_sum = 0.0;
            let mut count = 0usize;
            for ((iu, _), (outcomes, _, _)) in &results {
                if *iu != u {
                    continue;
                }
                count += 1;
                let (_, o) = outcomes
                    .iter()
                    .find(|(v, _)| *v == variant)
                    .expect("every variant runs on every instance");
                time_sum += o.time_ms;
                if o.solved {
                    solved += 1;
                    let (lo, hi, ach) = o.eff.expect("solved instances carry efficiency");
                    eff_sums.0 += lo;
                    eff_sums.1 += hi;
                    eff_sums.2 += ach;
                    partition_sum += o.partitions;
                }
            }
            let s = solved as f64;
            rows.push(SweepRow {
                variant,
                u_nominal: u,
                sched_rate: solved as f64 / count.max(1) as f64,
                eff_lower: if solved > 0 { eff_sums.0 / s } else { f64::NAN },
                eff_upper: if solved > 0 { eff_sums.1 / s } else { f64::NAN },
                eff_achieved: if solved > 0 { eff_sums.2 / s } else { f64::NAN },
                avg_partitions: if solved > 0 {
                    partition_sum as f64 / s
                } else {
                    f64::NAN
                },
                avg_time_ms: time_sum / count.max(1) as f64,
            });
        }
    }
    for (_, (_, violation, gen_failed)) in &results {
        if *violation {
            necessary_test_violations += 1;
        }
        if *gen_failed {
            generation_failures += 1;
        }
    }

    Ok(SweepResult {
        config: config.clone(),
        rows,
        necessary_test_violations,
        generation_failures,
    })
}

impl SweepResult {
    pub fn rows_for(&self, variant: Variant) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    /// Whitespace-separated table for one variant, one row per grid
    /// point, `#`-prefixed header.
    pub fn dat_table(&self, variant: Variant) -> String {
        let mut out = String::from(
            "# U_nominal sched_rate eff_lower eff_upper eff_achieved avg_partitions avg_time_ms\n",
        );
        for r in self.rows_for(variant) {
            out.push_str(&format!(
                "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}\n",
                r.u_nominal,
                r.sched_rate,
                r.eff_lower,
                r.eff_upper,
                r.eff_achieved,
                r.avg_partitions,
                r.avg_time_ms,
            ));
        }
        out
    }
}

pub fn frac_ratio(n: i64, d: i64) -> Frac {
    Ratio::new(n as i128, d as i128)
}
