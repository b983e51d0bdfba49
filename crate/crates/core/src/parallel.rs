//! Parallel construction: members of a stage are planned one after another, each against
//! the already merged schedules of the members before it, on a shared stage clock.

use std::collections::VecDeque;
use std::time::Instant;

use crate::decompose::Substructure;
use crate::milp::{plan_until, Attempt, PlanError, PlanOptions, PlanningInstance, SolverAdapter, SubstructurePlan};
use crate::ordering::ParallelSchedule;
use crate::simulate::{replay, touched_columns, ActionSchedule};
use crate::world::HeightMap;

#[derive(Debug, Clone, PartialEq)]
pub struct MemberPlan {
    pub index: usize,
    pub plan: SubstructurePlan,
    /// Attempts spent on the unconstrained plan used to cap the horizon.
    pub solo_attempts: Vec<Attempt>,
}

impl MemberPlan {
    pub fn total_solve_seconds(&self) -> f64 {
        self.plan.total_solve_seconds() + self.solo_attempts.iter().map(|a| a.solve_seconds).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    /// Members planned in this stage, in planning order.
    pub stage: Vec<usize>,
    /// Members pushed to the next stage.
    pub deferred: Vec<usize>,
    pub member_schedules: Vec<MemberPlan>,
    pub merged: ActionSchedule,
    pub start_env: HeightMap,
    pub end_env: HeightMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPlan {
    pub stages: Vec<StagePlan>,
    pub schedule: ActionSchedule,
    pub final_env: HeightMap,
}

fn raised(env: &HeightMap, s: &Substructure) -> Result<HeightMap, PlanError> {
    let mut out = env.clone();
    for b in s.blocks.iter() {
        if b.z as u32 > out.get(b.x, b.y) {
            out.set(b.x, b.y, b.z as u32).map_err(|e| PlanError::Invalid(e.to_string()))?;
        }
    }
    Ok(out)
}

fn stands_on(env: &HeightMap, s: &Substructure) -> bool {
    let mut all = env.to_block_set();
    all.extend(&s.blocks);
    all.is_valid_structure()
}

/// Plans one stage starting from `env`.
///
/// A member is deferred when its blocks do not rest on `env`, when it must change a column
/// an earlier member writes (even only for scaffolding), or when no plan exists within the stage makespan so far plus
/// its own unconstrained makespan.
pub fn plan_stage(
    members: &[&Substructure],
    env: &HeightMap,
    adapter: &dyn SolverAdapter,
    max_robots: usize,
    opts: &PlanOptions,
) -> Result<StagePlan, PlanError> {
    stage_until(members, env, adapter, max_robots, opts, Instant::now() + opts.budget)
}

fn stage_until(
    members: &[&Substructure],
    env: &HeightMap,
    adapter: &dyn SolverAdapter,
    max_robots: usize,
    opts: &PlanOptions,
    deadline: Instant,
) -> Result<StagePlan, PlanError> {
    let mut merged = ActionSchedule::empty();
    let mut written: Vec<bool> = vec![false; env.dims().cells()];
    let mut planned = Vec::new();
    let mut deferred = Vec::new();
    let mut member_schedules = Vec::new();

    for s in members {
        if !stands_on(env, s) {
            deferred.push(s.index);
            continue;
        }
        let target = raised(env, s)?;
        let solo_inst = PlanningInstance::new(env.clone(), target.clone(), max_robots)?;
        if solo_inst.changed_columns().iter().any(|&c| written[c]) {
            deferred.push(s.index);
            continue;
        }
        let solo = match plan_until(&solo_inst, adapter, opts, deadline) {
            Ok(p) => p,
            // a later stage may add the scaffolding support it lacks now
            Err(PlanError::Infeasible { .. }) if !merged.robots.is_empty() || members.len() > 1 => {
                deferred.push(s.index);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (plan, solo_attempts) = if merged.robots.is_empty() {
            (solo, Vec::new())
        } else {
            let capped = PlanOptions {
                tmax: opts.tmax.min(merged.makespan + solo.makespan),
                ..opts.clone()
            };
            let inst = solo_inst.clone().with_frozen(merged.clone());
            match plan_until(&inst, adapter, &capped, deadline) {
                Ok(p) => (p, solo.attempts),
                Err(PlanError::Infeasible { .. }) => {
                    deferred.push(s.index);
                    continue;
                }
                Err(e) => return Err(e),
            }
        };
        merged = ActionSchedule::overlay(&[&merged, &plan.schedule]).map_err(PlanError::Decode)?;
        for c in touched_columns(env, &merged).map_err(PlanError::Replay)? {
            written[c] = true;
        }
        planned.push(s.index);
        member_schedules.push(MemberPlan {
            index: s.index,
            plan,
            solo_attempts,
        });
    }

    if merged.robot_count() > max_robots {
        return Err(PlanError::Decode(format!(
            "stage uses {} robots, {max_robots} allowed",
            merged.robot_count()
        )));
    }
    let end_env = replay(env, &merged).map_err(PlanError::Replay)?;
    let mut expected = env.clone();
    for m in &member_schedules {
        let s = members.iter().find(|s| s.index == m.index).expect("planned member");
        expected = raised(&expected, s)?;
    }
    if end_env != expected {
        return Err(PlanError::Mismatch);
    }
    Ok(StagePlan {
        stage: planned,
        deferred,
        member_schedules,
        merged,
        start_env: env.clone(),
        end_env,
    })
}

/// Concatenates stage schedules on the global clock and checks the replay of each stage.
pub fn assemble_global(start: &HeightMap, stages: &[StagePlan]) -> Result<ActionSchedule, (usize, PlanError)> {
    let mut env = start.clone();
    let mut global = ActionSchedule::empty();
    for (i, stage) in stages.iter().enumerate() {
        env = replay(&env, &stage.merged).map_err(|e| (i, PlanError::Replay(e)))?;
        if env != stage.end_env {
            return Err((i, PlanError::Mismatch));
        }
        global = global.then(&stage.merged);
    }
    match replay(start, &global) {
        Ok(out) if out == env => Ok(global),
        Ok(_) => Err((stages.len().saturating_sub(1), PlanError::Mismatch)),
        Err(e) => Err((stages.len().saturating_sub(1), PlanError::Replay(e))),
    }
}

pub fn plan_parallel(
    schedule: &ParallelSchedule,
    start: &HeightMap,
    max_robots: usize,
    adapter: &dyn SolverAdapter,
    opts: &PlanOptions,
) -> Result<ParallelPlan, PlanError> {
    let deadline = Instant::now() + opts.budget;
    let mut queue: VecDeque<Vec<usize>> = schedule.stages.iter().cloned().collect();
    let mut env = start.clone();
    let mut stages = Vec::new();
    while let Some(stage) = queue.pop_front() {
        let members: Vec<&Substructure> = stage
            .iter()
            .map(|&i| {
                schedule
                    .get(i)
                    .ok_or_else(|| PlanError::Invalid(format!("unknown substructure {i}")))
            })
            .collect::<Result<_, _>>()?;
        let plan = stage_until(&members, &env, adapter, max_robots, opts, deadline)?;
        if plan.stage.is_empty() {
            return Err(PlanError::Invalid(format!("no member of stage {stage:?} can be built")));
        }
        if !plan.deferred.is_empty() {
            match queue.front_mut() {
                Some(next) => {
                    let mut front = plan.deferred.clone();
                    front.append(next);
                    *next = front;
                }
                None => queue.push_back(plan.deferred.clone()),
            }
        }
        env = plan.end_env.clone();
        stages.push(plan);
    }
    let global = assemble_global(start, &stages).map_err(|(_, e)| e)?;
    Ok(ParallelPlan {
        stages,
        schedule: global,
        final_env: env,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::Tower;
    use crate::milp::HighsSolver;
    use crate::world::{BlockCell, BlockSet, GridDims};

    fn sub(index: usize, cells: &[(usize, usize, usize)]) -> Substructure {
        let blocks: BlockSet = cells.iter().map(|&(x, y, z)| BlockCell::new(x, y, z)).collect();
        let top = blocks.iter().max_by_key(|b| b.z).copied().unwrap();
        Substructure {
            index,
            anchor: Tower {
                x: top.x,
                y: top.y,
                height: top.z,
            },
            blocks,
        }
    }

    #[test]
    fn singleton_stage_matches_solo_plan() {
        let env = HeightMap::empty(GridDims::new(3, 3, 2).unwrap());
        let s = sub(1, &[(1, 1, 1)]);
        let p = plan_stage(&[&s], &env, &HighsSolver, 2, &PlanOptions::default()).unwrap();
        assert_eq!(p.stage, vec![1]);
        assert_eq!(p.merged.metrics().makespan, 3);
        assert_eq!(p.end_env.get(1, 1), 1);
    }

    #[test]
    fn far_apart_members_overlap_in_time() {
        let env = HeightMap::empty(GridDims::new(5, 3, 2).unwrap());
        let a = sub(1, &[(0, 1, 1)]);
        let b = sub(2, &[(4, 1, 1)]);
        let p = plan_stage(&[&a, &b], &env, &HighsSolver, 2, &PlanOptions::default()).unwrap();
        assert_eq!(p.stage, vec![1, 2]);
        let solo: Vec<usize> = p.member_schedules.iter().map(|m| m.plan.makespan).collect();
        assert_eq!(p.merged.makespan, *solo.iter().max().unwrap());
        let g = assemble_global(&env, &[p]).unwrap();
        let out = replay(&env, &g).unwrap();
        assert_eq!(out.total_blocks(), 2);
    }

    #[test]
    fn single_robot_serialises_a_stage() {
        let env = HeightMap::empty(GridDims::new(5, 3, 2).unwrap());
        let a = sub(1, &[(0, 1, 1)]);
        let b = sub(2, &[(4, 1, 1)]);
        let p = plan_stage(&[&a, &b], &env, &HighsSolver, 1, &PlanOptions::default()).unwrap();
        assert_eq!(p.stage, vec![1, 2]);
        assert_eq!(p.merged.robot_count(), 1);
        // the second robot trip can only start once the first has left
        assert_eq!(p.merged.makespan, 6);
        assert_eq!(p.end_env.total_blocks(), 2);
    }

    #[test]
    fn unsupported_member_is_deferred() {
        let env = HeightMap::empty(GridDims::new(3, 3, 3).unwrap());
        let floating = sub(1, &[(1, 1, 2)]);
        let p = plan_stage(&[&floating], &env, &HighsSolver, 2, &PlanOptions::default()).unwrap();
        assert!(p.stage.is_empty());
        assert_eq!(p.deferred, vec![1]);
    }
}
