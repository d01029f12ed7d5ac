//! Domain types and the contention-aware execution-time model.
//!
//! Durations are 64-bit integers in micro-units so that every demand
//! comparison is exact. Quantities that are inherently fractional
//! (a per-size execution time `a/m + b`, utilizations) are carried as
//! exact rationals, see [`Frac`].

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Duration or time instant in integer micro-units.
pub type Time = i64;

/// Exact rational duration/utilization.
pub type Frac = Ratio<i128>;

/// Builds a [`Frac`] from an integer duration.
pub fn frac(t: Time) -> Frac {
    Frac::from_integer(t as i128)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hyperperiod overflow while combining periods")]
    HyperperiodOverflow,
}

/// Whether a kernel predominantly stresses the memory hierarchy or the
/// compute pipelines. Two co-located tasks of the same type conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Memory,
    Compute,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskType::Memory => write!(f, "memory"),
            TaskType::Compute => write!(f, "compute"),
        }
    }
}

/// Semi-linear execution-time curve: evaluating at partition size `m`
/// yields `a/m + b`. `a` is the portion that scales with added SMs,
/// `b` the non-parallel floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecCurve {
    pub a: Time,
    pub b: Time,
}

impl ExecCurve {
    pub fn new(a: Time, b: Time) -> Result<Self, ModelError> {
        if a <= 0 {
            return Err(ModelError::InvalidArgument(format!(
                "curve parameter a must be positive, got {a}"
            )));
        }
        if b < 0 {
            return Err(ModelError::InvalidArgument(format!(
                "curve parameter b must be non-negative, got {b}"
            )));
        }
        Ok(ExecCurve { a, b })
    }
}

/// Evaluates `curve` on a partition of `m` SMs, returning `a/m + b` exactly.
pub fn eval_curve(curve: ExecCurve, m: u32) -> Result<Frac, ModelError> {
    if m == 0 {
        return Err(ModelError::InvalidArgument(
            "partition size m must be at least 1".into(),
        ));
    }
    Ok(Frac::new(curve.a as i128, m as i128) + frac(curve.b))
}

/// Dense task identifier assigned at generation/load time.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A periodic compute kernel with two execution-time curves: `curve_n`
/// applies when the task has no same-type cohabitant in its partition,
/// `curve_c` when it does.
///
/// Serializes to the flat on-disk form
/// `{id, period, deadline, type, a_n, b_n, a_c, b_c}` and re-validates
/// the constructor invariants when deserialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TaskWire", try_from = "TaskWire")]
pub struct Task {
    pub id: TaskId,
    pub period: Time,
    pub deadline: Time,
    pub ttype: TaskType,
    pub curve_n: ExecCurve,
    pub curve_c: ExecCurve,
}

/// Flat JSON representation of a [`Task`].
#[derive(Serialize, Deserialize)]
struct TaskWire {
    id: TaskId,
    period: Time,
    deadline: Time,
    #[serde(rename = "type")]
    ttype: TaskType,
    a_n: Time,
    b_n: Time,
    a_c: Time,
    b_c: Time,
}

impl From<Task> for TaskWire {
    fn from(t: Task) -> Self {
        TaskWire {
            id: t.id,
            period: t.period,
            deadline: t.deadline,
            ttype: t.ttype,
            a_n: t.curve_n.a,
            b_n: t.curve_n.b,
            a_c: t.curve_c.a,
            b_c: t.curve_c.b,
        }
    }
}

impl TryFrom<TaskWire> for Task {
    type Error = String;

    fn try_from(w: TaskWire) -> Result<Self, String> {
        let curve_n = ExecCurve::new(w.a_n, w.b_n).map_err(|e| e.to_string())?;
        let curve_c = ExecCurve::new(w.a_c, w.b_c).map_err(|e| e.to_string())?;
        Task::new(w.id, w.period, w.deadline, w.ttype, curve_n, curve_c)
            .map_err(|e| e.to_string())
    }
}

impl Task {
    pub fn new(
        id: TaskId,
        period: Time,
        deadline: Time,
        ttype: TaskType,
        curve_n: ExecCurve,
        curve_c: ExecCurve,
    ) -> Result<Self, ModelError> {
        if period <= 0 || deadline <= 0 || deadline > period {
            return Err(ModelError::InvalidArgument(format!(
                "task {id}: need 0 < D <= T, got D={deadline}, T={period}"
            )));
        }
        // curve_c(m) >= curve_n(m) for all m >= 1. The gap is linear in
        // 1/m, so checking m=1 and the m->inf limit suffices.
        if curve_c.b < curve_n.b || curve_c.a + curve_c.b < curve_n.a + curve_n.b {
            return Err(ModelError::InvalidArgument(format!(
                "task {id}: conflict curve must dominate no-conflict curve"
            )));
        }
        Ok(Task {
            id,
            period,
            deadline,
            ttype,
            curve_n,
            curve_c,
        })
    }

    /// Baseline utilization `a_n / T` used by the efficiency metric.
    pub fn baseline_utilization(&self) -> Frac {
        Frac::new(self.curve_n.a as i128, self.period as i128)
    }

    /// Conflict inflation factor by type: 2.3 for memory, 1.2 for compute.
    pub fn conflict_factor(&self) -> Frac {
        match self.ttype {
            TaskType::Memory => Frac::new(23, 10),
            TaskType::Compute => Frac::new(6, 5),
        }
    }
}

/// Opaque partition identifier, unique within one allocation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionId(pub u32);

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A group of `size` SMs with the tasks exclusively allocated to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub id: PartitionId,
    pub size: u32,
    pub tasks: BTreeSet<TaskId>,
}

impl Partition {
    pub fn new(id: PartitionId, size: u32, tasks: BTreeSet<TaskId>) -> Result<Self, ModelError> {
        if size == 0 && !tasks.is_empty() {
            return Err(ModelError::InvalidArgument(format!(
                "partition {id}: non-empty partition needs at least 1 SM"
            )));
        }
        Ok(Partition { id, size, tasks })
    }
}

/// An ordered collection of tasks plus the platform's total SM count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tasks: Vec<Task>,
    /// Total SM count of the platform, M.
    #[serde(rename = "M")]
    pub total_sms: u32,
}

impl TaskSet {
    pub fn new(tasks: Vec<Task>, total_sms: u32) -> Result<Self, ModelError> {
        if total_sms == 0 {
            return Err(ModelError::InvalidArgument(
                "platform must have at least 1 SM".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for t in &tasks {
            if !seen.insert(t.id) {
                return Err(ModelError::InvalidArgument(format!(
                    "duplicate task id {}",
                    t.id
                )));
            }
        }
        Ok(TaskSet { tasks, total_sms })
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// LCM of all task periods; 1 for an empty set. Fails loudly on overflow
/// rather than wrapping.
pub fn hyperperiod(taskset: &TaskSet) -> Result<Time, ModelError> {
    periods_hyperperiod(taskset.tasks.iter().map(|t| t.period))
}

/// Hyperperiod of an arbitrary iterator of periods.
pub fn periods_hyperperiod<I: IntoIterator<Item = Time>>(periods: I) -> Result<Time, ModelError> {
    let mut h: Time = 1;
    for p in periods {
        if p <= 0 {
            return Err(ModelError::InvalidArgument(format!(
                "period must be positive, got {p}"
            )));
        }
        let g = h.gcd(&p);
        h = (h / g)
            .checked_mul(p)
            .ok_or(ModelError::HyperperiodOverflow)?;
    }
    Ok(h)
}

/// True iff some cohabitant shares `task`'s type.
pub fn has_conflict<'a, I>(task: &Task, cohabitants: I) -> bool
where
    I: IntoIterator<Item = &'a Task>,
{
    cohabitants.into_iter().any(|o| o.ttype == task.ttype)
}

/// Conflict state of `task` within `partition`, recomputed from the
/// current membership.
pub fn conflict_in_partition(
    task: &Task,
    partition: &Partition,
    all_tasks: &TaskSet,
) -> Result<bool, ModelError> {
    if !partition.tasks.contains(&task.id) {
        return Err(ModelError::InvalidArgument(format!(
            "task {} is not a member of partition {}",
            task.id, partition.id
        )));
    }
    let cohabitants = partition
        .tasks
        .iter()
        .filter(|&&id| id != task.id)
        .filter_map(|&id| all_tasks.task(id));
    Ok(has_conflict(task, cohabitants))
}

/// WCET of `task` inside `partition`: the conflict curve when a same-type
/// cohabitant is present, the no-conflict curve otherwise, both evaluated
/// at the partition size.
pub fn wcet_in_partition(
    task: &Task,
    partition: &Partition,
    all_tasks: &TaskSet,
) -> Result<Frac, ModelError> {
    let conflict = conflict_in_partition(task, partition, all_tasks)?;
    let curve = if conflict { task.curve_c } else { task.curve_n };
    eval_curve(curve, partition.size)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mem_task(id: u32, period: Time, deadline: Time, a: Time, b: Time) -> Task {
        Task::new(
            TaskId(id),
            period,
            deadline,
            TaskType::Memory,
            ExecCurve::new(a, b).unwrap(),
            ExecCurve::new(a * 23 / 10, b * 23 / 10).unwrap(),
        )
        .unwrap()
    }

    fn partition_of(id: u32, size: u32, ids: &[u32]) -> Partition {
        Partition::new(
            PartitionId(id),
            size,
            ids.iter().map(|&i| TaskId(i)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_curve_direct() {
        let c = ExecCurve::new(100, 2).unwrap();
        assert_eq!(eval_curve(c, 10).unwrap(), Frac::from_integer(12));
        assert_eq!(eval_curve(c, 1).unwrap(), Frac::from_integer(102));
        let c = ExecCurve::new(40, 4).unwrap();
        assert_eq!(eval_curve(c, 8).unwrap(), Frac::from_integer(9));
    }

    #[test]
    fn eval_curve_rejects_zero_sms() {
        let c = ExecCurve::new(100, 2).unwrap();
        assert!(matches!(
            eval_curve(c, 0),
            Err(ModelError::InvalidArgument(_))
        ));
    }

    #[test]
    fn eval_curve_strictly_decreasing() {
        let c = ExecCurve::new(7, 3).unwrap();
        let mut prev = eval_curve(c, 1).unwrap();
        for m in 2..64 {
            let cur = eval_curve(c, m).unwrap();
            assert!(cur < prev, "not decreasing at m={m}");
            prev = cur;
        }
    }

    #[test]
    fn conflict_requires_same_type() {
        let mem = mem_task(0, 100, 75, 100, 10);
        let mem2 = mem_task(1, 100, 75, 50, 5);
        let comp = Task::new(
            TaskId(2),
            100,
            75,
            TaskType::Compute,
            ExecCurve::new(10, 1).unwrap(),
            ExecCurve::new(12, 1).unwrap(),
        )
        .unwrap();

        assert!(!has_conflict(&mem, [&comp]));
        assert!(!has_conflict(&mem, []));
        assert!(has_conflict(&mem, [&comp, &mem2]));
        // Symmetry: same type both directions.
        assert!(has_conflict(&mem2, [&mem]));
    }

    #[test]
    fn wcet_picks_curve_by_conflict_state() {
        let t0 = mem_task(0, 1000, 750, 100, 10);
        let t1 = mem_task(1, 1000, 750, 100, 10);
        let comp = Task::new(
            TaskId(2),
            1000,
            750,
            TaskType::Compute,
            ExecCurve::new(10, 1).unwrap(),
            ExecCurve::new(12, 1).unwrap(),
        )
        .unwrap();
        let ts = TaskSet::new(vec![t0.clone(), t1, comp], 68).unwrap();

        let alone = partition_of(0, 10, &[0]);
        assert_eq!(
            wcet_in_partition(&t0, &alone, &ts).unwrap(),
            Frac::from_integer(20)
        );

        let with_mem = partition_of(1, 10, &[0, 1]);
        assert_eq!(
            wcet_in_partition(&t0, &with_mem, &ts).unwrap(),
            Frac::from_integer(46)
        );

        let with_comp = partition_of(2, 10, &[0, 2]);
        assert_eq!(
            wcet_in_partition(&t0, &with_comp, &ts).unwrap(),
            Frac::from_integer(20)
        );
    }

    #[test]
    fn wcet_rejects_non_member() {
        let t0 = mem_task(0, 1000, 750, 100, 10);
        let ts = TaskSet::new(vec![t0.clone()], 68).unwrap();
        let other = partition_of(0, 4, &[1]);
        assert!(wcet_in_partition(&t0, &other, &ts).is_err());
    }

    #[test]
    fn hyperperiod_lcm() {
        assert_eq!(periods_hyperperiod([50, 100, 200]).unwrap(), 200);
        assert_eq!(periods_hyperperiod([]).unwrap(), 1);
        assert_eq!(periods_hyperperiod([50, 4000]).unwrap(), 4000);
    }

    #[test]
    fn hyperperiod_overflow_is_an_error() {
        let primes = [
            1_000_000_007,
            1_000_000_009,
            1_000_000_021,
        ];
        assert_eq!(
            periods_hyperperiod(primes),
            Err(ModelError::HyperperiodOverflow)
        );
    }

    #[test]
    fn task_invariants_enforced() {
        let n = ExecCurve::new(100, 10).unwrap();
        let weaker_c = ExecCurve::new(50, 5).unwrap();
        assert!(Task::new(TaskId(0), 100, 75, TaskType::Memory, n, weaker_c).is_err());
        assert!(Task::new(TaskId(0), 100, 150, TaskType::Memory, n, n).is_err());
        assert!(Task::new(TaskId(0), 100, 0, TaskType::Memory, n, n).is_err());
        assert!(ExecCurve::new(0, 1).is_err());
        assert!(ExecCurve::new(10, -1).is_err());
    }

    #[test]
    fn taskset_rejects_duplicate_ids() {
        let t = mem_task(3, 100, 75, 10, 1);
        assert!(TaskSet::new(vec![t.clone(), t], 4).is_err());
    }
}
