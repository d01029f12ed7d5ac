//! The greedy partition-and-allocate heuristic: per-task initial
//! partitions, merge attempts with a strict size-reduction requirement,
//! candidate selection under the SMS and BF orderings, forbidden-list
//! bookkeeping, and the 1G single-partition baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{
    eval_curve, frac, Frac, ModelError, Partition, PartitionId, TaskId, TaskSet,
};
use crate::sched::{edf_demand_test, min_sms_single, necessary_test, DemandTask};

/// Ordering used to pick the next merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeOrder {
    /// Evaluate every eligible merge and keep the one with the smallest
    /// merged partition.
    Sms,
    /// Best fit: attempt partners in decreasing utilization order and
    /// commit the first success.
    Bf,
}

/// Whether the forbidden task-pair list is prefilled exhaustively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForbiddenMode {
    /// Every task pair is pre-tested; failing pairs prune eligibility
    /// for the whole run.
    Act,
    /// Only merge failures observed during the run are recorded.
    Ina,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialSort {
    DecreasingUtilization,
    IncreasingUtilization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub order: MergeOrder,
    pub forbidden_mode: ForbiddenMode,
    pub initial_sort: InitialSort,
    /// Replace the linear size scan in merges by a binary search over
    /// the same bounds. Equal results by resource monotonicity.
    pub binary_search_merge: bool,
}

impl HeuristicConfig {
    pub fn new(order: MergeOrder, forbidden_mode: ForbiddenMode) -> Self {
        HeuristicConfig {
            order,
            forbidden_mode,
            initial_sort: InitialSort::DecreasingUtilization,
            binary_search_merge: false,
        }
    }
}

/// Record of merge attempts known to fail, at task-pair granularity
/// (ACT prefill) and at the granularity of exact partition contents
/// (runtime failures).
#[derive(Debug, Clone, Default)]
pub struct ForbiddenList {
    task_pairs: HashSet<(TaskId, TaskId)>,
    partition_pairs: HashSet<(Vec<TaskId>, Vec<TaskId>)>,
}

fn ordered_pair(a: TaskId, b: TaskId) -> (TaskId, TaskId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn snapshot_pair(p: &Partition, q: &Partition) -> (Vec<TaskId>, Vec<TaskId>) {
    let a: Vec<TaskId> = p.tasks.iter().copied().collect();
    let b: Vec<TaskId> = q.tasks.iter().copied().collect();
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ForbiddenList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_task_pair(&mut self, a: TaskId, b: TaskId) {
        assert_ne!(a, b, "a forbidden pair never contains the same task twice");
        self.task_pairs.insert(ordered_pair(a, b));
    }

    pub fn contains_task_pair(&self, a: TaskId, b: TaskId) -> bool {
        self.task_pairs.contains(&ordered_pair(a, b))
    }

    pub fn add_partition_pair(&mut self, p: &Partition, q: &Partition) {
        self.partition_pairs.insert(snapshot_pair(p, q));
    }

    pub fn contains_partition_pair(&self, p: &Partition, q: &Partition) -> bool {
        self.partition_pairs.contains(&snapshot_pair(p, q))
    }

    pub fn task_pairs(&self) -> impl Iterator<Item = (TaskId, TaskId)> + '_ {
        self.task_pairs.iter().copied()
    }

    pub fn task_pair_count(&self) -> usize {
        self.task_pairs.len()
    }

    /// Whether `mode` blocks merging `p` with `q`. Under ACT a partition
    /// is blocked as soon as one of its tasks forms a forbidden pair with
    /// one of `p`'s; exact partition snapshots block under both modes.
    pub fn blocks(&self, p: &Partition, q: &Partition, mode: ForbiddenMode) -> bool {
        if mode == ForbiddenMode::Act {
            for &a in &p.tasks {
                for &b in &q.tasks {
                    if self.contains_task_pair(a, b) {
                        return true;
                    }
                }
            }
        }
        self.contains_partition_pair(p, q)
    }
}

/// A successfully allocated taskset: disjoint partitions covering every
/// task, each individually EDF-schedulable at its size.
#[derive(Debug, Clone)]
pub struct Solution {
    pub partitions: Vec<Partition>,
    pub per_task_conflict: BTreeMap<TaskId, bool>,
    pub analysis_time: std::time::Duration,
}

/// Total SM count demanded by a partition list, Pi.
pub fn required_resources(par_list: &[Partition]) -> u64 {
    par_list.iter().map(|p| p.size as u64).sum()
}

/// Success condition: the demanded SM count fits the platform.
pub fn global_test(par_list: &[Partition], total_sms: u32) -> bool {
    required_resources(par_list) <= total_sms as u64
}

/// Conflict flags for a task subset placed together: a task conflicts
/// iff another member shares its type.
fn conflict_flags(tasks: &BTreeSet<TaskId>, ts: &TaskSet) -> Result<Vec<(TaskId, bool)>, ModelError> {
    let mut mem = 0usize;
    let mut comp = 0usize;
    let mut members = Vec::with_capacity(tasks.len());
    for &id in tasks {
        let t = ts.task(id).ok_or_else(|| {
            ModelError::InvalidArgument(format!("unknown task id {id} in partition"))
        })?;
        match t.ttype {
            crate::model::TaskType::Memory => mem += 1,
            crate::model::TaskType::Compute => comp += 1,
        }
        members.push(t);
    }
    Ok(members
        .iter()
        .map(|t| {
            let same = match t.ttype {
                crate::model::TaskType::Memory => mem,
                crate::model::TaskType::Compute => comp,
            };
            (t.id, same >= 2)
        })
        .collect())
}

/// Demand-test entries for a task subset on `m` SMs, conflict states
/// resolved within the subset.
fn demand_entries(tasks: &BTreeSet<TaskId>, m: u32, ts: &TaskSet) -> Result<Vec<DemandTask>, ModelError> {
    conflict_flags(tasks, ts)?
        .into_iter()
        .map(|(id, conflict)| {
            let t = ts.task(id).expect("validated above");
            let curve = if conflict { t.curve_c } else { t.curve_n };
            Ok(DemandTask::new(eval_curve(curve, m)?, t.deadline, t.period))
        })
        .collect()
}

fn subset_schedulable(tasks: &BTreeSet<TaskId>, m: u32, ts: &TaskSet) -> Result<bool, ModelError> {
    let entries = demand_entries(tasks, m, ts)?;
    Ok(edf_demand_test(&entries)?.schedulable)
}

/// Utilization of a partition: sum over members of the conflict-resolved
/// WCET divided by the period.
pub fn partition_utilization(p: &Partition, ts: &TaskSet) -> Result<Frac, ModelError> {
    let entries = demand_entries(&p.tasks, p.size, ts)?;
    let mut u = Frac::from_integer(0);
    for e in &entries {
        u += e.wcet / frac(e.period);
    }
    Ok(u)
}

/// Attempts to fuse two partitions. Scans sizes from the larger operand
/// upward, strictly below the sum of both, and returns the first size at
/// which the union is schedulable — so every returned merge frees at
/// least one SM.
pub fn try_merge(
    p1: &Partition,
    p2: &Partition,
    ts: &TaskSet,
    new_id: PartitionId,
    binary_search: bool,
) -> Result<Option<Partition>, ModelError> {
    let union: BTreeSet<TaskId> = p1.tasks.union(&p2.tasks).copied().collect();
    let lo = p1.size.max(p2.size).max(1);
    let hi = p1.size + p2.size; // exclusive: a valid merge must shrink
    if lo >= hi {
        return Ok(None);
    }

    let found = if binary_search {
        // Schedulability is monotone in m, so bisect for the smallest
        // admissible size.
        if !subset_schedulable(&union, hi - 1, ts)? {
            None
        } else {
            let (mut lo, mut hi) = (lo, hi - 1);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if subset_schedulable(&union, mid, ts)? {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Some(lo)
        }
    } else if !subset_schedulable(&union, hi - 1, ts)? {
        // Monotone in m: infeasible at the largest admissible size
        // means infeasible everywhere below it.
        None
    } else {
        let mut found = Some(hi - 1);
        for m in lo..hi - 1 {
            if subset_schedulable(&union, m, ts)? {
                found = Some(m);
                break;
            }
        }
        found
    };

    Ok(found.map(|m| Partition {
        id: new_id,
        size: m,
        tasks: union,
    }))
}

/// One evaluated merge candidate: the partner partition and the merge
/// result.
#[derive(Debug, Clone)]
pub struct MergeCandidate {
    pub partner: PartitionId,
    pub merged: Partition,
}

/// Picks the best of several valid merges sharing the same first
/// operand: smallest merged size, then smallest merged utilization,
/// then lowest partner id.
pub fn compare_sms<'a>(
    candidates: &'a [MergeCandidate],
    ts: &TaskSet,
) -> Result<&'a MergeCandidate, ModelError> {
    if candidates.is_empty() {
        return Err(ModelError::InvalidArgument(
            "compare_sms needs at least one candidate".into(),
        ));
    }
    let mut best = &candidates[0];
    let mut best_util = partition_utilization(&best.merged, ts)?;
    for c in &candidates[1..] {
        let util = partition_utilization(&c.merged, ts)?;
        let better = (c.merged.size, &util, c.partner) < (best.merged.size, &best_util, best.partner);
        if better {
            best = c;
            best_util = util;
        }
    }
    Ok(best)
}

/// One partition per task, sized minimally for its no-conflict curve,
/// sorted by the configured utilization order. `None` when some task is
/// infeasible even with all M SMs to itself.
pub fn init_partitions(
    ts: &TaskSet,
    sort: InitialSort,
) -> Result<Option<Vec<Partition>>, ModelError> {
    let mut list = Vec::with_capacity(ts.len());
    for (idx, t) in ts.tasks.iter().enumerate() {
        let Some(m) = min_sms_single(t, ts.total_sms) else {
            return Ok(None);
        };
        list.push(Partition {
            id: PartitionId(idx as u32),
            size: m,
            tasks: BTreeSet::from([t.id]),
        });
    }
    sort_par_list(&mut list, sort, ts)?;
    Ok(Some(list))
}

fn sort_par_list(list: &mut [Partition], sort: InitialSort, ts: &TaskSet) -> Result<(), ModelError> {
    let mut keyed: Vec<(Frac, PartitionId)> = Vec::with_capacity(list.len());
    for p in list.iter() {
        keyed.push((partition_utilization(p, ts)?, p.id));
    }
    let key_of = |p: &Partition, keyed: &[(Frac, PartitionId)]| {
        keyed.iter().find(|(_, id)| *id == p.id).unwrap().0
    };
    list.sort_by(|a, b| {
        let (ka, kb) = (key_of(a, &keyed), key_of(b, &keyed));
        match sort {
            InitialSort::DecreasingUtilization => kb.cmp(&ka).then(a.id.cmp(&b.id)),
            InitialSort::IncreasingUtilization => ka.cmp(&kb).then(a.id.cmp(&b.id)),
        }
    });
    Ok(())
}

/// Inserts `p` into the sorted list, keeping the global key order.
fn insert_sorted(
    list: &mut Vec<Partition>,
    p: Partition,
    sort: InitialSort,
    ts: &TaskSet,
) -> Result<(), ModelError> {
    let key = partition_utilization(&p, ts)?;
    let mut pos = list.len();
    for (i, other) in list.iter().enumerate() {
        let ok = partition_utilization(other, ts)?;
        let after = match sort {
            InitialSort::DecreasingUtilization => (ok, other.id) < (key, p.id),
            InitialSort::IncreasingUtilization => (ok, other.id) > (key, p.id),
        };
        if after {
            pos = i;
            break;
        }
    }
    list.insert(pos, p);
    Ok(())
}

/// Pre-tests every unordered task pair as a pair of minimal singleton
/// partitions; failing pairs are recorded at task granularity.
pub fn fill_forbidden_list(ts: &TaskSet) -> Result<ForbiddenList, ModelError> {
    let mut forbidden = ForbiddenList::new();
    let singleton = |idx: usize| -> Result<Option<Partition>, ModelError> {
        let t = &ts.tasks[idx];
        Ok(min_sms_single(t, ts.total_sms).map(|m| Partition {
            id: PartitionId(idx as u32),
            size: m,
            tasks: BTreeSet::from([t.id]),
        }))
    };
    for i in 0..ts.len() {
        let Some(pi) = singleton(i)? else {
            for j in i + 1..ts.len() {
                forbidden.add_task_pair(ts.tasks[i].id, ts.tasks[j].id);
            }
            continue;
        };
        for j in i + 1..ts.len() {
            let Some(pj) = singleton(j)? else {
                forbidden.add_task_pair(ts.tasks[i].id, ts.tasks[j].id);
                continue;
            };
            if try_merge(&pi, &pj, ts, PartitionId(u32::MAX), false)?.is_none() {
                forbidden.add_task_pair(ts.tasks[i].id, ts.tasks[j].id);
            }
        }
    }
    Ok(forbidden)
}

/// Picks the first partition (in list order) that still has eligible
/// merge partners, together with the partner indices. BF partners come
/// sorted by decreasing utilization; SMS partners stay in list order
/// since every merge gets evaluated anyway.
pub fn select_partitions(
    par_list: &[Partition],
    forbidden: &ForbiddenList,
    config: &HeuristicConfig,
    ts: &TaskSet,
) -> Result<Option<(usize, Vec<usize>)>, ModelError> {
    for (pi, p) in par_list.iter().enumerate() {
        let mut elig: Vec<usize> = Vec::new();
        for (qi, q) in par_list.iter().enumerate() {
            if qi == pi {
                continue;
            }
            if !forbidden.blocks(p, q, config.forbidden_mode) {
                elig.push(qi);
            }
        }
        if elig.is_empty() {
            continue;
        }
        if config.order == MergeOrder::Bf {
            let mut keyed: Vec<(Frac, usize)> = Vec::with_capacity(elig.len());
            for &qi in &elig {
                keyed.push((partition_utilization(&par_list[qi], ts)?, qi));
            }
            keyed.sort_by(|a, b| b.0.cmp(&a.0).then(par_list[a.1].id.cmp(&par_list[b.1].id)));
            elig = keyed.into_iter().map(|(_, qi)| qi).collect();
        }
        return Ok(Some((pi, elig)));
    }
    Ok(None)
}

/// Runs the full heuristic on a taskset. `None` means no allocation was
/// found; a returned solution certifies `required_resources <= M` with
/// every partition individually schedulable.
pub fn partition_and_allocate(
    ts: &TaskSet,
    config: &HeuristicConfig,
) -> Result<Option<Solution>, ModelError> {
    let start = Instant::now();

    if !necessary_test(ts) {
        return Ok(None);
    }
    let Some(mut par_list) = init_partitions(ts, config.initial_sort)? else {
        return Ok(None);
    };
    let mut forbidden = match config.forbidden_mode {
        ForbiddenMode::Act => fill_forbidden_list(ts)?,
        ForbiddenMode::Ina => ForbiddenList::new(),
    };
    let mut next_id = par_list.len() as u32;

    while !global_test(&par_list, ts.total_sms) {
        let Some((pi, elig)) = select_partitions(&par_list, &forbidden, config, ts)? else {
            return Ok(None);
        };

        let mut committed: Option<(usize, usize, Partition)> = None;
        match config.order {
            MergeOrder::Sms => {
                let mut candidates: Vec<(usize, MergeCandidate)> = Vec::new();
                for &qi in &elig {
                    let merged = try_merge(
                        &par_list[pi],
                        &par_list[qi],
                        ts,
                        PartitionId(next_id),
                        config.binary_search_merge,
                    )?;
                    match merged {
                        Some(m) => candidates.push((
                            qi,
                            MergeCandidate {
                                partner: par_list[qi].id,
                                merged: m,
                            },
                        )),
                        None => record_failure(&mut forbidden, &par_list[pi], &par_list[qi], config),
                    }
                }
                if !candidates.is_empty() {
                    let best = compare_sms(
                        &candidates.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
                        ts,
                    )?
                    .partner;
                    let (qi, cand) = candidates
                        .into_iter()
                        .find(|(_, c)| c.partner == best)
                        .expect("winner comes from the candidate list");
                    committed = Some((pi, qi, cand.merged));
                }
            }
            MergeOrder::Bf => {
                for &qi in &elig {
                    let merged = try_merge(
                        &par_list[pi],
                        &par_list[qi],
                        ts,
                        PartitionId(next_id),
                        config.binary_search_merge,
                    )?;
                    match merged {
                        Some(m) => {
                            committed = Some((pi, qi, m));
                            break;
                        }
                        None => record_failure(&mut forbidden, &par_list[pi], &par_list[qi], config),
                    }
                }
            }
        }

        if let Some((pi, qi, merged)) = committed {
            debug_assert!(merged.size < par_list[pi].size + par_list[qi].size);
            next_id += 1;
            let (first, second) = (pi.min(qi), pi.max(qi));
            par_list.remove(second);
            par_list.remove(first);
            insert_sorted(&mut par_list, merged, config.initial_sort, ts)?;
        }
        // On no commit the forbidden list grew, so selection makes
        // progress next round or eventually returns none.
    }

    let per_task_conflict = solution_conflicts(&par_list, ts)?;
    Ok(Some(Solution {
        partitions: par_list,
        per_task_conflict,
        analysis_time: start.elapsed(),
    }))
}

fn record_failure(
    forbidden: &mut ForbiddenList,
    p: &Partition,
    q: &Partition,
    config: &HeuristicConfig,
) {
    if config.forbidden_mode == ForbiddenMode::Act && p.tasks.len() == 1 && q.tasks.len() == 1 {
        let (&a, &b) = (
            p.tasks.iter().next().unwrap(),
            q.tasks.iter().next().unwrap(),
        );
        forbidden.add_task_pair(a, b);
    }
    forbidden.add_partition_pair(p, q);
}

fn solution_conflicts(
    par_list: &[Partition],
    ts: &TaskSet,
) -> Result<BTreeMap<TaskId, bool>, ModelError> {
    let mut map = BTreeMap::new();
    for p in par_list {
        for (id, conflict) in conflict_flags(&p.tasks, ts)? {
            map.insert(id, conflict);
        }
    }
    Ok(map)
}

/// Baseline: the whole GPU as one non-partitionable resource. All tasks
/// share a single partition of M SMs with conflict states resolved over
/// the full set.
pub fn one_g(ts: &TaskSet) -> Result<Option<Solution>, ModelError> {
    let start = Instant::now();
    if ts.is_empty() {
        return Ok(Some(Solution {
            partitions: Vec::new(),
            per_task_conflict: BTreeMap::new(),
            analysis_time: start.elapsed(),
        }));
    }
    let tasks: BTreeSet<TaskId> = ts.tasks.iter().map(|t| t.id).collect();
    if !subset_schedulable(&tasks, ts.total_sms, ts)? {
        return Ok(None);
    }
    let partition = Partition {
        id: PartitionId(0),
        size: ts.total_sms,
        tasks,
    };
    let per_task_conflict = solution_conflicts(std::slice::from_ref(&partition), ts)?;
    Ok(Some(Solution {
        partitions: vec![partition],
        per_task_conflict,
        analysis_time: start.elapsed(),
    }))
}

/// Re-checks a solution's certificate: disjoint coverage of the taskset,
/// `required_resources <= M`, and per-partition schedulability.
pub fn verify_solution(solution: &Solution, ts: &TaskSet) -> Result<(), String> {
    let mut covered: BTreeSet<TaskId> = BTreeSet::new();
    for p in &solution.partitions {
        for &id in &p.tasks {
            if !covered.insert(id) {
                return Err(format!("task {id} allocated to more than one partition"));
            }
        }
    }
    let all: BTreeSet<TaskId> = ts.tasks.iter().map(|t| t.id).collect();
    if covered != all {
        return Err("allocated task ids do not match the taskset".into());
    }
    if !global_test(&solution.partitions, ts.total_sms) {
        return Err(format!(
            "required resources {} exceed M={}",
            required_resources(&solution.partitions),
            ts.total_sms
        ));
    }
    for p in &solution.partitions {
        match subset_schedulable(&p.tasks, p.size, ts) {
            Ok(true) => {}
            Ok(false) => return Err(format!("partition {} fails the demand test", p.id)),
            Err(e) => return Err(format!("partition {}: {e}", p.id)),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExecCurve, Task, TaskType, Time};

    fn task(id: u32, ttype: TaskType, a: Time, b: Time, period: Time, deadline: Time) -> Task {
        let k = match ttype {
            TaskType::Memory => (23, 10),
            TaskType::Compute => (6, 5),
        };
        Task::new(
            TaskId(id),
            period,
            deadline,
            ttype,
            ExecCurve::new(a, b).unwrap(),
            ExecCurve::new(a * k.0 / k.1, b * k.0 / k.1).unwrap(),
        )
        .unwrap()
    }

    // The spec-style two-task fixtures, scaled x10 so every duration is
    // an integer: T=1000, D=750.
    fn mergeable_pair(m: u32) -> TaskSet {
        TaskSet::new(
            vec![
                task(0, TaskType::Compute, 100, 2, 1000, 750),
                task(1, TaskType::Memory, 100, 10, 1000, 750),
            ],
            m,
        )
        .unwrap()
    }

    fn unmergeable_pair(m: u32) -> TaskSet {
        TaskSet::new(
            vec![
                task(0, TaskType::Compute, 400, 8, 1000, 750),
                task(1, TaskType::Memory, 400, 40, 1000, 750),
            ],
            m,
        )
        .unwrap()
    }

    fn singleton(id: u32, size: u32, tid: u32) -> Partition {
        Partition {
            id: PartitionId(id),
            size,
            tasks: BTreeSet::from([TaskId(tid)]),
        }
    }

    #[test]
    fn init_partitions_examples() {
        // One task (a=100, b=2, D=27): minimal-size scan gives size 4.
        let ts = TaskSet::new(vec![task(0, TaskType::Compute, 100, 2, 200, 27)], 68).unwrap();
        let list = init_partitions(&ts, InitialSort::DecreasingUtilization)
            .unwrap()
            .unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].size, 4);

        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Compute, 100, 2, 200, 27),
                task(1, TaskType::Compute, 100, 2, 200, 27),
            ],
            68,
        )
        .unwrap();
        let list = init_partitions(&ts, InitialSort::DecreasingUtilization)
            .unwrap()
            .unwrap();
        assert_eq!(required_resources(&list), 8);

        // b > D: no feasible size.
        let ts = TaskSet::new(vec![task(0, TaskType::Compute, 100, 30, 200, 27)], 68).unwrap();
        assert!(init_partitions(&ts, InitialSort::DecreasingUtilization)
            .unwrap()
            .is_none());
    }

    #[test]
    fn required_resources_sums_sizes() {
        let list = vec![singleton(0, 4, 0), singleton(1, 4, 1)];
        assert_eq!(required_resources(&list), 8);
        assert_eq!(required_resources(&[]), 0);
        assert_eq!(required_resources(&[singleton(0, 68, 0)]), 68);
    }

    #[test]
    fn global_test_boundary() {
        let list = vec![singleton(0, 68, 0)];
        assert!(global_test(&list, 68));
        let list = vec![singleton(0, 68, 0), singleton(1, 1, 1)];
        assert!(!global_test(&list, 68));
    }

    #[test]
    fn try_merge_success_and_failure() {
        // Mixed types, m=1 demand 102 + 110 = 212 <= 750: merges at size 1.
        let ts = mergeable_pair(2);
        let p1 = singleton(0, 1, 0);
        let p2 = singleton(1, 1, 1);
        let merged = try_merge(&p1, &p2, &ts, PartitionId(9), false)
            .unwrap()
            .unwrap();
        assert_eq!(merged.size, 1);
        assert_eq!(merged.tasks.len(), 2);

        // Only m=1 is admissible (m=2 would not shrink) and demand
        // 408 + 440 = 848 > 750 there: fail.
        let ts = unmergeable_pair(2);
        let p1 = singleton(0, 1, 0);
        let p2 = singleton(1, 1, 1);
        assert!(try_merge(&p1, &p2, &ts, PartitionId(9), false)
            .unwrap()
            .is_none());

        // Two memory tasks whose conflict curves overrun the deadline at
        // every admissible size.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Memory, 400, 40, 1000, 750),
                task(1, TaskType::Memory, 400, 40, 1000, 750),
            ],
            4,
        )
        .unwrap();
        let p1 = singleton(0, 1, 0);
        let p2 = singleton(1, 1, 1);
        assert!(try_merge(&p1, &p2, &ts, PartitionId(9), false)
            .unwrap()
            .is_none());
    }

    #[test]
    fn binary_search_matches_linear_scan() {
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Memory, 900, 30, 1000, 750),
                task(1, TaskType::Memory, 700, 20, 1000, 750),
            ],
            68,
        )
        .unwrap();
        let p1 = singleton(0, 2, 0);
        let p2 = singleton(1, 2, 1);
        let linear = try_merge(&p1, &p2, &ts, PartitionId(9), false).unwrap();
        let binary = try_merge(&p1, &p2, &ts, PartitionId(9), true).unwrap();
        assert_eq!(linear, binary);
    }

    #[test]
    fn partition_utilization_examples() {
        // Single task, wcet 200 at m=10, T=1000.
        let ts = TaskSet::new(vec![task(0, TaskType::Memory, 1900, 10, 1000, 750)], 68).unwrap();
        let p = singleton(0, 10, 0);
        assert_eq!(partition_utilization(&p, &ts).unwrap(), Frac::new(1, 5));

        // Two no-conflict tasks: 100/1000 + 200/1000.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Compute, 98, 2, 1000, 750),
                task(1, TaskType::Memory, 190, 10, 1000, 750),
            ],
            68,
        )
        .unwrap();
        let p = Partition {
            id: PartitionId(0),
            size: 1,
            tasks: BTreeSet::from([TaskId(0), TaskId(1)]),
        };
        assert_eq!(partition_utilization(&p, &ts).unwrap(), Frac::new(3, 10));

        // Two memory tasks in conflict: wcets 460 each at m=10, T=1000.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Memory, 1000, 100, 1000, 1000),
                task(1, TaskType::Memory, 1000, 100, 1000, 1000),
            ],
            68,
        )
        .unwrap();
        let p = Partition {
            id: PartitionId(0),
            size: 10,
            tasks: BTreeSet::from([TaskId(0), TaskId(1)]),
        };
        assert_eq!(partition_utilization(&p, &ts).unwrap(), Frac::new(23, 25));
    }

    #[test]
    fn compare_sms_ordering() {
        let ts = mergeable_pair(68);
        let merged = |id: u32, size: u32| Partition {
            id: PartitionId(id),
            size,
            tasks: BTreeSet::from([TaskId(0), TaskId(1)]),
        };
        let cands = vec![
            MergeCandidate {
                partner: PartitionId(1),
                merged: merged(10, 5),
            },
            MergeCandidate {
                partner: PartitionId(2),
                merged: merged(11, 4),
            },
            MergeCandidate {
                partner: PartitionId(3),
                merged: merged(12, 6),
            },
        ];
        assert_eq!(compare_sms(&cands, &ts).unwrap().partner, PartitionId(2));

        let single = vec![cands[0].clone()];
        assert_eq!(compare_sms(&single, &ts).unwrap().partner, PartitionId(1));
        assert!(compare_sms(&[], &ts).is_err());
    }

    #[test]
    fn compare_sms_breaks_size_ties_by_utilization() {
        // Same merged size, different loads: the lighter merge wins.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Compute, 100, 2, 1000, 750),
                task(1, TaskType::Memory, 300, 30, 1000, 750),
                task(2, TaskType::Memory, 100, 10, 1000, 750),
            ],
            68,
        )
        .unwrap();
        let pair = |id: u32, a: u32, b: u32| Partition {
            id: PartitionId(id),
            size: 1,
            tasks: BTreeSet::from([TaskId(a), TaskId(b)]),
        };
        let cands = vec![
            MergeCandidate {
                partner: PartitionId(1),
                merged: pair(10, 0, 1),
            },
            MergeCandidate {
                partner: PartitionId(2),
                merged: pair(11, 0, 2),
            },
        ];
        assert_eq!(compare_sms(&cands, &ts).unwrap().partner, PartitionId(2));
    }

    #[test]
    fn select_partitions_respects_forbidden_list() {
        let ts = mergeable_pair(2);
        let list = vec![singleton(0, 1, 0), singleton(1, 1, 1)];
        let config = HeuristicConfig::new(MergeOrder::Sms, ForbiddenMode::Act);

        let empty = ForbiddenList::new();
        let (pi, elig) = select_partitions(&list, &empty, &config, &ts)
            .unwrap()
            .unwrap();
        assert_eq!((pi, elig.as_slice()), (0, &[1][..]));

        let mut forbidden = ForbiddenList::new();
        forbidden.add_task_pair(TaskId(0), TaskId(1));
        assert!(select_partitions(&list, &forbidden, &config, &ts)
            .unwrap()
            .is_none());
    }

    #[test]
    fn select_partitions_subtracts_forbidden_partners() {
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Compute, 100, 2, 1000, 750),
                task(1, TaskType::Memory, 100, 10, 1000, 750),
                task(2, TaskType::Compute, 120, 2, 1000, 750),
            ],
            3,
        )
        .unwrap();
        let list = vec![singleton(0, 1, 0), singleton(1, 1, 1), singleton(2, 1, 2)];
        let mut forbidden = ForbiddenList::new();
        forbidden.add_task_pair(TaskId(0), TaskId(1));
        let config = HeuristicConfig::new(MergeOrder::Sms, ForbiddenMode::Act);
        let (pi, elig) = select_partitions(&list, &forbidden, &config, &ts)
            .unwrap()
            .unwrap();
        assert_eq!((pi, elig.as_slice()), (0, &[2][..]));
    }

    #[test]
    fn fill_forbidden_list_records_failures_only() {
        let ts = mergeable_pair(2);
        let forbidden = fill_forbidden_list(&ts).unwrap();
        assert!(!forbidden.contains_task_pair(TaskId(0), TaskId(1)));

        let ts = unmergeable_pair(2);
        let forbidden = fill_forbidden_list(&ts).unwrap();
        assert!(forbidden.contains_task_pair(TaskId(0), TaskId(1)));

        let ts = TaskSet::new(vec![task(0, TaskType::Compute, 100, 2, 1000, 750)], 2).unwrap();
        let forbidden = fill_forbidden_list(&ts).unwrap();
        assert_eq!(forbidden.task_pair_count(), 0);
    }

    #[test]
    fn partition_and_allocate_traces() {
        let config = HeuristicConfig::new(MergeOrder::Sms, ForbiddenMode::Ina);

        // Two tasks of different types each fitting on 1 SM: success
        // without any merge.
        let ts = mergeable_pair(2);
        let sol = partition_and_allocate(&ts, &config).unwrap().unwrap();
        assert_eq!(sol.partitions.len(), 2);
        verify_solution(&sol, &ts).unwrap();

        // Same tasks, M=1: one merge to a single size-1 partition.
        let ts = mergeable_pair(1);
        let sol = partition_and_allocate(&ts, &config).unwrap().unwrap();
        assert_eq!(sol.partitions.len(), 1);
        assert_eq!(sol.partitions[0].size, 1);
        verify_solution(&sol, &ts).unwrap();

        // Unmergeable tasks, M=1: fail.
        let ts = unmergeable_pair(1);
        assert!(partition_and_allocate(&ts, &config).unwrap().is_none());
    }

    #[test]
    fn one_g_examples() {
        let ts = TaskSet::new(vec![task(0, TaskType::Compute, 100, 2, 1000, 750)], 4).unwrap();
        let sol = one_g(&ts).unwrap().unwrap();
        assert_eq!(sol.partitions.len(), 1);
        assert_eq!(sol.partitions[0].size, 4);
        verify_solution(&sol, &ts).unwrap();

        // Two memory + two compute heavy tasks: all-conflict wcets do
        // not fit one resource.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Memory, 400, 40, 1000, 750),
                task(1, TaskType::Memory, 400, 40, 1000, 750),
                task(2, TaskType::Compute, 400, 8, 1000, 750),
                task(3, TaskType::Compute, 400, 8, 1000, 750),
            ],
            4,
        )
        .unwrap();
        let sol = one_g(&ts).unwrap();
        assert!(sol.is_none());

        let ts = TaskSet::new(vec![], 4).unwrap();
        let sol = one_g(&ts).unwrap().unwrap();
        assert!(sol.partitions.is_empty());
    }

    #[test]
    fn one_g_conflicts_everywhere_with_two_of_each_type() {
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Memory, 50, 5, 1000, 750),
                task(1, TaskType::Memory, 50, 5, 1000, 750),
                task(2, TaskType::Compute, 50, 1, 1000, 750),
                task(3, TaskType::Compute, 50, 1, 1000, 750),
            ],
            8,
        )
        .unwrap();
        let sol = one_g(&ts).unwrap().unwrap();
        assert!(sol.per_task_conflict.values().all(|&c| c));
    }

    #[test]
    fn necessary_test_gates_allocation() {
        // Overloaded set: necessary-test reject, no allocation attempted.
        let ts = TaskSet::new(
            vec![
                task(0, TaskType::Compute, 5000, 0, 1000, 1000),
                task(1, TaskType::Compute, 5000, 0, 1000, 1000),
            ],
            8,
        )
        .unwrap();
        assert!(!necessary_test(&ts));
        let config = HeuristicConfig::new(MergeOrder::Bf, ForbiddenMode::Ina);
        assert!(partition_and_allocate(&ts, &config).unwrap().is_none());
    }
}
