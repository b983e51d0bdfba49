//! Deterministic grid-world simulator, schedule replay, metrics and a brute-force planner
//! for one-robot instances.
//!
//! World rules applied by [`step`]:
//! - a robot inside the grid stands on top of its column; moves go to a 4-neighbour whose
//!   height differs by at most one (heights before the step);
//! - a robot standing at height `k` picks the top block of a neighbour of height `k + 1`
//!   or places a block onto a neighbour of height `k`; placing never exceeds `z_size`;
//! - robots enter onto, and exit from, border cells of height at most one; a robot that
//!   enters may bring a block from the outside supply, and a robot that exits disposes of
//!   whatever it carries;
//! - after the step no two robots share a cell, no two robots swap cells, a column is
//!   written by at most one robot, and a written column has no robot on it before or after
//!   the step.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::PlanningInstance;
use crate::world::{Dir, GridDims, HeightMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Wait,
    Move(Dir),
    Pick(Dir),
    Place(Dir),
    Enter { x: usize, y: usize, carrying: bool },
    Exit,
}

impl Action {
    pub fn is_wait(&self) -> bool {
        matches!(self, Action::Wait)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Wait => write!(f, "wait"),
            Action::Move(d) => write!(f, "move {}", d.as_char()),
            Action::Pick(d) => write!(f, "pick {}", d.as_char()),
            Action::Place(d) => write!(f, "place {}", d.as_char()),
            Action::Enter { x, y, carrying } => {
                write!(f, "enter {x} {y}{}", if *carrying { " +" } else { "" })
            }
            Action::Exit => write!(f, "exit"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let dir = |p: Option<&&str>| {
            p.and_then(|d| {
                let mut it = d.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Dir::from_char(c),
                    _ => None,
                }
            })
            .ok_or_else(|| format!("bad direction in `{s}`"))
        };
        match parts.first().copied() {
            Some("wait") if parts.len() == 1 => Ok(Action::Wait),
            Some("exit") if parts.len() == 1 => Ok(Action::Exit),
            Some("move") if parts.len() == 2 => Ok(Action::Move(dir(parts.get(1))?)),
            Some("pick") if parts.len() == 2 => Ok(Action::Pick(dir(parts.get(1))?)),
            Some("place") if parts.len() == 2 => Ok(Action::Place(dir(parts.get(1))?)),
            Some("enter") if parts.len() == 3 || parts.len() == 4 => {
                let x = parts[1].parse().map_err(|e| format!("`{s}`: {e}"))?;
                let y = parts[2].parse().map_err(|e| format!("`{s}`: {e}"))?;
                let carrying = match parts.get(3) {
                    None => false,
                    Some(&"+") => true,
                    Some(other) => return Err(format!("unexpected `{other}` in `{s}`")),
                };
                Ok(Action::Enter { x, y, carrying })
            }
            _ => Err(format!("unrecognised action `{s}`")),
        }
    }
}

/// Per-robot action lists, all of length `makespan`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionSchedule {
    pub makespan: usize,
    pub robots: Vec<Vec<Action>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub makespan: usize,
    pub sum_of_costs: usize,
}

/// One continuous stay of a robot inside the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trip {
    /// Step at which the robot enters.
    pub start: usize,
    /// Actions from the enter up to and including the exit.
    pub actions: Vec<Action>,
}

impl Trip {
    /// Last step of the trip (the exit).
    pub fn end(&self) -> usize {
        self.start + self.actions.len() - 1
    }
}

impl ActionSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }

    pub fn joint_action(&self, t: usize) -> Vec<Action> {
        self.robots.iter().map(|r| r[t]).collect()
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }

    /// Splits every robot's list into trips. Actions outside trips must be waits.
    pub fn trips(&self) -> Result<Vec<Trip>, String> {
        let mut trips = Vec::new();
        for (rid, actions) in self.robots.iter().enumerate() {
            let mut current: Option<Trip> = None;
            for (t, a) in actions.iter().enumerate() {
                match (&mut current, a) {
                    (None, Action::Wait) => {}
                    (None, Action::Enter { .. }) => {
                        current = Some(Trip {
                            start: t,
                            actions: vec![*a],
                        })
                    }
                    (None, other) => {
                        return Err(format!("robot {rid} acts ({other}) outside the grid at t={t}"))
                    }
                    (Some(trip), Action::Exit) => {
                        trip.actions.push(*a);
                        trips.push(current.take().expect("trip in progress"));
                    }
                    (Some(_), Action::Enter { .. }) => {
                        return Err(format!("robot {rid} enters twice at t={t}"))
                    }
                    (Some(trip), other) => trip.actions.push(*other),
                }
            }
            if current.is_some() {
                return Err(format!("robot {rid} never exits"));
            }
        }
        trips.sort_by_key(|t| t.start);
        Ok(trips)
    }

    /// Packs trips onto as few robots as possible. A robot that exits at step `t` may enter
    /// again at step `t + 1`.
    pub fn from_trips(makespan: usize, mut trips: Vec<Trip>) -> Self {
        trips.sort_by_key(|t| t.start);
        let mut robots: Vec<Vec<Action>> = Vec::new();
        let mut free_at: Vec<usize> = Vec::new();
        for trip in trips {
            let lane = free_at.iter().position(|&f| f <= trip.start);
            let lane = match lane {
                Some(l) => l,
                None => {
                    robots.push(vec![Action::Wait; makespan]);
                    free_at.push(0);
                    robots.len() - 1
                }
            };
            for (k, a) in trip.actions.iter().enumerate() {
                robots[lane][trip.start + k] = *a;
            }
            free_at[lane] = trip.end() + 1;
        }
        ActionSchedule { makespan, robots }
    }

    /// Runs `self` then `next` on one clock.
    pub fn then(&self, next: &ActionSchedule) -> ActionSchedule {
        let makespan = self.makespan + next.makespan;
        let n = self.robots.len().max(next.robots.len());
        let robots = (0..n)
            .map(|r| {
                let mut row = Vec::with_capacity(makespan);
                match self.robots.get(r) {
                    Some(a) => row.extend_from_slice(a),
                    None => row.extend(std::iter::repeat(Action::Wait).take(self.makespan)),
                }
                match next.robots.get(r) {
                    Some(a) => row.extend_from_slice(a),
                    None => row.extend(std::iter::repeat(Action::Wait).take(next.makespan)),
                }
                row
            })
            .collect();
        ActionSchedule { makespan, robots }
    }

    /// Overlays several schedules on a shared clock starting at t = 0.
    pub fn overlay(parts: &[&ActionSchedule]) -> Result<ActionSchedule, String> {
        let makespan = parts.iter().map(|p| p.makespan).max().unwrap_or(0);
        let mut trips = Vec::new();
        for p in parts {
            trips.extend(p.trips()?);
        }
        Ok(ActionSchedule::from_trips(makespan, trips))
    }

    pub fn to_json(&self) -> String {
        let steps: Vec<Vec<String>> = (0..self.makespan)
            .map(|t| self.robots.iter().map(|r| r[t].to_string()).collect())
            .collect();
        let doc = ScheduleDoc {
            makespan: self.makespan,
            robots: self.robots.len(),
            steps,
        };
        serde_json::to_string_pretty(&doc).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: ScheduleDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if doc.steps.len() != doc.makespan {
            return Err(format!(
                "makespan {} but {} step rows",
                doc.makespan,
                doc.steps.len()
            ));
        }
        let mut robots = vec![Vec::with_capacity(doc.makespan); doc.robots];
        for (t, row) in doc.steps.iter().enumerate() {
            if row.len() != doc.robots {
                return Err(format!("step {t} has {} actions, expected {}", row.len(), doc.robots));
            }
            for (r, a) in row.iter().enumerate() {
                robots[r].push(a.parse()?);
            }
        }
        Ok(ActionSchedule {
            makespan: doc.makespan,
            robots,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleDoc {
    makespan: usize,
    robots: usize,
    steps: Vec<Vec<String>>,
}

pub fn metrics(schedule: &ActionSchedule) -> Metrics {
    Metrics {
        makespan: schedule.makespan,
        sum_of_costs: schedule
            .robots
            .iter()
            .flatten()
            .filter(|a| !a.is_wait())
            .count(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotPose {
    pub id: usize,
    /// `None` while outside the grid.
    pub location: Option<(usize, usize)>,
    pub carrying: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub heights: HeightMap,
    pub robots: Vec<RobotPose>,
    pub t: usize,
}

impl WorldState {
    pub fn new(heights: HeightMap, robots: usize) -> Self {
        WorldState {
            heights,
            robots: (0..robots)
                .map(|id| RobotPose {
                    id,
                    location: None,
                    carrying: false,
                })
                .collect(),
            t: 0,
        }
    }

    pub fn robots_inside(&self) -> usize {
        self.robots.iter().filter(|r| r.location.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    ClimbLimit,
    OffGrid,
    PickHeightMismatch,
    PlaceHeightMismatch,
    PlaceAboveCeiling,
    NotCarrying,
    AlreadyCarrying,
    NotOnBorder,
    BorderTooHigh,
    AlreadyInside,
    NotInside,
    VertexConflict,
    SwapConflict,
    ColumnConflict,
    WriteOnOccupiedCell,
    WrongArity,
    RobotsLeftInside,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("t={t} robot={robot:?}: {rule:?}")]
pub struct SimError {
    pub t: usize,
    pub robot: Option<usize>,
    pub rule: Rule,
}

/// Applies one joint action.
pub fn step(state: &WorldState, joint: &[Action]) -> Result<WorldState, SimError> {
    let t = state.t;
    let fail = |robot: Option<usize>, rule: Rule| SimError { t, robot, rule };
    if joint.len() != state.robots.len() {
        return Err(fail(None, Rule::WrongArity));
    }
    let dims = state.heights.dims();
    let h = |x: usize, y: usize| state.heights.get(x, y);

    let mut next = state.clone();
    next.t += 1;
    // (robot, column index, +1 place / -1 pick)
    let mut writes: Vec<(usize, usize, i32)> = Vec::new();
    let mut moves: Vec<(usize, (usize, usize), (usize, usize))> = Vec::new();

    for (rid, (pose, action)) in state.robots.iter().zip(joint).enumerate() {
        let here = pose.location;
        match (here, *action) {
            (_, Action::Wait) => {}
            (Some(_), Action::Enter { .. }) => return Err(fail(Some(rid), Rule::AlreadyInside)),
            (None, Action::Enter { x, y, carrying }) => {
                if !dims.contains(x as i64, y as i64) {
                    return Err(fail(Some(rid), Rule::OffGrid));
                }
                if !dims.is_border(x, y) {
                    return Err(fail(Some(rid), Rule::NotOnBorder));
                }
                if h(x, y) > 1 {
                    return Err(fail(Some(rid), Rule::BorderTooHigh));
                }
                next.robots[rid].location = Some((x, y));
                next.robots[rid].carrying = carrying;
            }
            (None, _) => return Err(fail(Some(rid), Rule::NotInside)),
            (Some((x, y)), Action::Exit) => {
                if !dims.is_border(x, y) {
                    return Err(fail(Some(rid), Rule::NotOnBorder));
                }
                if h(x, y) > 1 {
                    return Err(fail(Some(rid), Rule::BorderTooHigh));
                }
                next.robots[rid].location = None;
                next.robots[rid].carrying = false;
            }
            (Some((x, y)), Action::Move(d)) => {
                let (nx, ny) = dims.step(x, y, d).ok_or(fail(Some(rid), Rule::OffGrid))?;
                if h(nx, ny).abs_diff(h(x, y)) > 1 {
                    return Err(fail(Some(rid), Rule::ClimbLimit));
                }
                next.robots[rid].location = Some((nx, ny));
                moves.push((rid, (x, y), (nx, ny)));
            }
            (Some((x, y)), Action::Pick(d)) => {
                let (px, py) = dims.step(x, y, d).ok_or(fail(Some(rid), Rule::OffGrid))?;
                if pose.carrying {
                    return Err(fail(Some(rid), Rule::AlreadyCarrying));
                }
                if h(px, py) != h(x, y) + 1 {
                    return Err(fail(Some(rid), Rule::PickHeightMismatch));
                }
                next.robots[rid].carrying = true;
                writes.push((rid, dims.index(px, py), -1));
            }
            (Some((x, y)), Action::Place(d)) => {
                let (px, py) = dims.step(x, y, d).ok_or(fail(Some(rid), Rule::OffGrid))?;
                if !pose.carrying {
                    return Err(fail(Some(rid), Rule::NotCarrying));
                }
                if h(px, py) != h(x, y) {
                    return Err(fail(Some(rid), Rule::PlaceHeightMismatch));
                }
                if h(px, py) as usize + 1 > dims.z_size {
                    return Err(fail(Some(rid), Rule::PlaceAboveCeiling));
                }
                next.robots[rid].carrying = false;
                writes.push((rid, dims.index(px, py), 1));
            }
        }
    }

    let mut after: HashMap<(usize, usize), usize> = HashMap::new();
    for r in &next.robots {
        if let Some(cell) = r.location {
            if after.insert(cell, r.id).is_some() {
                return Err(fail(Some(r.id), Rule::VertexConflict));
            }
        }
    }
    for (i, (rid, from, to)) in moves.iter().enumerate() {
        if moves[i + 1..].iter().any(|(_, f2, t2)| f2 == to && t2 == from) {
            return Err(fail(Some(*rid), Rule::SwapConflict));
        }
    }
    let before: HashMap<(usize, usize), usize> = state
        .robots
        .iter()
        .filter_map(|r| r.location.map(|c| (c, r.id)))
        .collect();
    for (i, &(rid, col, delta)) in writes.iter().enumerate() {
        if writes[i + 1..].iter().any(|w| w.1 == col) {
            return Err(fail(Some(rid), Rule::ColumnConflict));
        }
        let cell = dims.coords(col);
        if before.contains_key(&cell) || after.contains_key(&cell) {
            return Err(fail(Some(rid), Rule::WriteOnOccupiedCell));
        }
        let cur = next.heights.at(col) as i32;
        next.heights.set_at(col, (cur + delta) as u32);
    }
    Ok(next)
}

/// Every world state from t = 0 to t = makespan, inclusive.
pub fn replay_trace(start: &HeightMap, schedule: &ActionSchedule) -> Result<Vec<WorldState>, SimError> {
    let mut states = Vec::with_capacity(schedule.makespan + 1);
    states.push(WorldState::new(start.clone(), schedule.robots.len()));
    for t in 0..schedule.makespan {
        let joint = schedule.joint_action(t);
        let next = step(states.last().expect("non-empty"), &joint)?;
        states.push(next);
    }
    Ok(states)
}

/// Replays a schedule and returns the final heights; robots must all be outside at the end.
/// Columns whose height changes at some step of the replay, scaffolding included.
pub fn touched_columns(start: &HeightMap, schedule: &ActionSchedule) -> Result<Vec<usize>, SimError> {
    let trace = replay_trace(start, schedule)?;
    Ok((0..start.dims().cells())
        .filter(|&c| trace.windows(2).any(|w| w[0].heights.at(c) != w[1].heights.at(c)))
        .collect())
}

pub fn replay(start: &HeightMap, schedule: &ActionSchedule) -> Result<HeightMap, SimError> {
    let states = replay_trace(start, schedule)?;
    let last = states.into_iter().last().expect("initial state present");
    if let Some(r) = last.robots.iter().find(|r| r.location.is_some()) {
        return Err(SimError {
            t: last.t,
            robot: Some(r.id),
            rule: Rule::RobotsLeftInside,
        });
    }
    Ok(last.heights)
}

/// Per-timestep snapshot rows for plotting tools: `t,x,y,height,robot` with `robot` the id
/// standing on the cell or `-` when empty.
pub fn snapshot_rows(states: &[WorldState]) -> Vec<String> {
    let mut rows = vec!["t,x,y,height,robot".to_string()];
    for s in states {
        let dims = s.heights.dims();
        for idx in 0..dims.cells() {
            let (x, y) = dims.coords(idx);
            let robot = s
                .robots
                .iter()
                .find(|r| r.location == Some((x, y)))
                .map_or("-".to_string(), |r| r.id.to_string());
            rows.push(format!("{},{x},{y},{},{robot}", s.t, s.heights.at(idx)));
        }
    }
    rows
}

// ---------------------------------------------------------------------------------------
// Brute-force planner

/// Packed one-robot world: column heights with `bits` bits each, then the pose.
#[derive(Clone, Copy)]
struct Packing {
    bits: u32,
    cells: usize,
}

impl Packing {
    fn new(dims: GridDims) -> Option<Self> {
        let bits = usize::BITS - dims.z_size.leading_zeros();
        let pose_bits = usize::BITS - (dims.cells() + 1).leading_zeros() + 1;
        (bits as usize * dims.cells() + pose_bits as usize <= 64).then_some(Packing {
            bits,
            cells: dims.cells(),
        })
    }

    fn height(&self, s: u64, idx: usize) -> u32 {
        ((s >> (idx as u32 * self.bits)) & ((1 << self.bits) - 1)) as u32
    }

    fn with_height(&self, s: u64, idx: usize, h: u32) -> u64 {
        let shift = idx as u32 * self.bits;
        let mask = ((1u64 << self.bits) - 1) << shift;
        (s & !mask) | ((h as u64) << shift)
    }

    fn pose_shift(&self) -> u32 {
        self.cells as u32 * self.bits
    }

    /// 0 = outside, otherwise cell index + 1; bit 0 is the carry flag.
    fn pose(&self, s: u64) -> (Option<usize>, bool) {
        let p = s >> self.pose_shift();
        let carrying = p & 1 == 1;
        let loc = (p >> 1) as usize;
        ((loc > 0).then(|| loc - 1), carrying)
    }

    fn with_pose(&self, s: u64, loc: Option<usize>, carrying: bool) -> u64 {
        let heights = s & ((1u64 << self.pose_shift()) - 1);
        let p = ((loc.map_or(0, |l| l + 1) as u64) << 1) | carrying as u64;
        heights | (p << self.pose_shift())
    }

    fn pack_map(&self, m: &HeightMap) -> u64 {
        (0..self.cells).fold(0, |s, i| self.with_height(s, i, m.at(i)))
    }
}

/// Minimal-makespan plan for a single robot, cheapest among those of minimal makespan.
///
/// Layered search over exact world states: layer `t` holds every state reachable in exactly
/// `t` steps with its cheapest cost. Columns may not drop below their starting height.
/// Returns `None` when more than `state_limit` states would be stored, when no plan exists
/// within `max_makespan` steps, or when the grid is too large to pack.
pub fn oracle_plan(
    inst: &PlanningInstance,
    max_makespan: usize,
    state_limit: usize,
) -> Option<ActionSchedule> {
    let dims = inst.dims;
    let pk = Packing::new(dims)?;
    let floor: Vec<u32> = inst.start_env.heights().to_vec();
    let start = pk.with_pose(pk.pack_map(&inst.start_env), None, false);
    let goal = pk.with_pose(pk.pack_map(&inst.target_env), None, false);
    if start == goal {
        return Some(ActionSchedule::empty());
    }

    // per layer: state -> (cost, parent state, action)
    let mut layers: Vec<HashMap<u64, (usize, u64, Action)>> = Vec::new();
    let mut first = HashMap::new();
    first.insert(start, (0usize, start, Action::Wait));
    layers.push(first);
    let mut stored = 1usize;

    for _ in 0..max_makespan {
        let prev = layers.last().expect("non-empty");
        let mut next: HashMap<u64, (usize, u64, Action)> = HashMap::with_capacity(prev.len() * 2);
        for (&s, &(cost, _, _)) in prev {
            for (ns, action) in successors(&pk, dims, &floor, s) {
                let c = cost + usize::from(!action.is_wait());
                match next.get(&ns) {
                    Some(&(old, _, _)) if old <= c => {}
                    _ => {
                        next.insert(ns, (c, s, action));
                    }
                }
            }
        }
        stored += next.len();
        if stored > state_limit {
            return None;
        }
        let done = next.contains_key(&goal);
        layers.push(next);
        if done {
            let makespan = layers.len() - 1;
            let mut actions = vec![Action::Wait; makespan];
            let mut s = goal;
            for t in (1..=makespan).rev() {
                let (_, parent, a) = layers[t][&s];
                actions[t - 1] = a;
                s = parent;
            }
            return Some(ActionSchedule {
                makespan,
                robots: vec![actions],
            });
        }
    }
    None
}

fn successors(pk: &Packing, dims: GridDims, floor: &[u32], s: u64) -> Vec<(u64, Action)> {
    let mut out = vec![(s, Action::Wait)];
    let (loc, carrying) = pk.pose(s);
    match loc {
        None => {
            for idx in 0..dims.cells() {
                let (x, y) = dims.coords(idx);
                if dims.is_border(x, y) && pk.height(s, idx) <= 1 {
                    for c in [false, true] {
                        out.push((pk.with_pose(s, Some(idx), c), Action::Enter { x, y, carrying: c }));
                    }
                }
            }
        }
        Some(idx) => {
            let (x, y) = dims.coords(idx);
            let here = pk.height(s, idx);
            if dims.is_border(x, y) && here <= 1 {
                out.push((pk.with_pose(s, None, false), Action::Exit));
            }
            for (d, nx, ny) in dims.neighbors(x, y) {
                let n = dims.index(nx, ny);
                let hn = pk.height(s, n);
                if hn.abs_diff(here) <= 1 {
                    out.push((pk.with_pose(s, Some(n), carrying), Action::Move(d)));
                }
                if !carrying && hn == here + 1 && hn > floor[n] {
                    let ns = pk.with_height(s, n, hn - 1);
                    out.push((pk.with_pose(ns, Some(idx), true), Action::Pick(d)));
                }
                if carrying && hn == here && (hn as usize) < dims.z_size {
                    let ns = pk.with_height(s, n, hn + 1);
                    out.push((pk.with_pose(ns, Some(idx), false), Action::Place(d)));
                }
            }
        }
    }
    out
}
