//! Time-expanded flow MILP for building one substructure, the makespan iteration around it,
//! solver adapters, and decoding of solutions into action schedules.
//!
//! Robots form one flow through nodes `(t, cell, standing height, carrying)`. Each arc is one
//! action during step `t -> t + 1`; binary indicators `y[t][c][z]` give column heights.
//! Heights under a robot cannot change while it stands there (a written column must be free
//! before and after the step), so the standing height in a node also pins the column height
//! one step either side of it.

pub mod mps;

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordering::BuildOrder;
use crate::simulate::{replay, replay_trace, Action, ActionSchedule, SimError, Trip};
use crate::world::{GridDims, HeightMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningInstance {
    pub dims: GridDims,
    pub start_env: HeightMap,
    pub target_env: HeightMap,
    pub max_robots: usize,
    /// Schedule of robots already committed on the same clock, starting at t = 0 from
    /// `start_env`. Columns they write are off limits.
    pub frozen: Option<ActionSchedule>,
}

impl PlanningInstance {
    pub fn new(start_env: HeightMap, target_env: HeightMap, max_robots: usize) -> Result<Self, PlanError> {
        if start_env.dims() != target_env.dims() {
            return Err(PlanError::Invalid("start and target dimensions differ".into()));
        }
        if max_robots == 0 {
            return Err(PlanError::Invalid("max_robots must be positive".into()));
        }
        Ok(PlanningInstance {
            dims: start_env.dims(),
            start_env,
            target_env,
            max_robots,
            frozen: None,
        })
    }

    pub fn with_frozen(mut self, frozen: ActionSchedule) -> Self {
        self.frozen = Some(frozen);
        self
    }

    /// Columns whose height must change.
    pub fn changed_columns(&self) -> Vec<usize> {
        (0..self.dims.cells())
            .filter(|&c| self.start_env.at(c) != self.target_env.at(c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub cell: usize,
    pub z: u32,
    pub carrying: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    /// `y[t][cell][z]`: column `cell` has height `z` at time `t`.
    Height { t: usize, cell: usize, z: u32 },
    /// One robot takes `action` during step `t`; `from`/`to` are `None` outside the grid.
    Arc {
        t: usize,
        from: Option<Node>,
        to: Option<Node>,
        action: Action,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub kind: VarKind,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `lower <= sum(coef * var) <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub horizon: usize,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Set when some constraint without variables already fails.
    pub infeasible: bool,
}

impl MilpModel {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    /// Checks a 0/1 assignment against every bound and constraint.
    pub fn is_satisfied_by(&self, values: &[f64]) -> bool {
        const EPS: f64 = 1e-6;
        if self.infeasible || values.len() != self.variables.len() {
            return false;
        }
        let bounds_ok = self
            .variables
            .iter()
            .zip(values)
            .all(|(v, &x)| x >= v.lower - EPS && x <= v.upper + EPS && (x - x.round()).abs() < EPS);
        bounds_ok
            && self.constraints.iter().all(|c| {
                let lhs: f64 = c.terms.iter().map(|&(i, a)| a * values[i]).sum();
                lhs >= c.lower - EPS && lhs <= c.upper + EPS
            })
    }

    pub fn objective_of(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }
}

// ---------------------------------------------------------------------------------------
// Model construction

#[derive(Clone, Copy)]
enum Lit {
    Var(usize),
    True,
    False,
}

/// What the committed robots do, indexed by time.
struct FrozenView {
    occupied: Vec<HashSet<usize>>,
    writes: Vec<HashSet<usize>>,
    moves: Vec<HashSet<(usize, usize)>>,
    in_use: Vec<usize>,
    written: HashSet<usize>,
    heights: Vec<HeightMap>,
}

impl FrozenView {
    fn new(inst: &PlanningInstance, frozen: &ActionSchedule) -> Result<Self, PlanError> {
        let dims = inst.dims;
        let trace = replay_trace(&inst.start_env, frozen).map_err(PlanError::Replay)?;
        let mut occupied = Vec::with_capacity(trace.len());
        let mut heights = Vec::with_capacity(trace.len());
        for s in &trace {
            occupied.push(
                s.robots
                    .iter()
                    .filter_map(|r| r.location.map(|(x, y)| dims.index(x, y)))
                    .collect(),
            );
            heights.push(s.heights.clone());
        }
        let mut writes = Vec::new();
        let mut moves = Vec::new();
        let mut in_use = Vec::new();
        let mut written = HashSet::new();
        for t in 0..frozen.makespan {
            let mut w = HashSet::new();
            let mut m = HashSet::new();
            let mut used = 0;
            for (r, actions) in frozen.robots.iter().enumerate() {
                let pose = &trace[t].robots[r];
                if pose.location.is_some() || matches!(actions[t], Action::Enter { .. }) {
                    used += 1;
                }
                let Some((x, y)) = pose.location else { continue };
                match actions[t] {
                    Action::Pick(d) | Action::Place(d) => {
                        let (px, py) = dims.step(x, y, d).expect("replayed action stays in grid");
                        w.insert(dims.index(px, py));
                    }
                    Action::Move(d) => {
                        let (nx, ny) = dims.step(x, y, d).expect("replayed action stays in grid");
                        m.insert((dims.index(x, y), dims.index(nx, ny)));
                    }
                    _ => {}
                }
            }
            written.extend(w.iter().copied());
            writes.push(w);
            moves.push(m);
            in_use.push(used);
        }
        Ok(FrozenView {
            occupied,
            writes,
            moves,
            in_use,
            written,
            heights,
        })
    }

    fn occupied_at(&self, t: usize, c: usize) -> bool {
        self.occupied.get(t).is_some_and(|s| s.contains(&c))
    }

    fn written_at(&self, step: usize, c: usize) -> bool {
        self.writes.get(step).is_some_and(|s| s.contains(&c))
    }

    fn moves_at(&self, step: usize, from: usize, to: usize) -> bool {
        self.moves.get(step).is_some_and(|s| s.contains(&(from, to)))
    }

    fn in_use_at(&self, step: usize) -> usize {
        self.in_use.get(step).copied().unwrap_or(0)
    }

    fn height(&self, t: usize, c: usize) -> u32 {
        self.heights[t.min(self.heights.len() - 1)].at(c)
    }
}

struct Builder {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    infeasible: bool,
}

impl Builder {
    fn var(&mut self, kind: VarKind, cost: f64) -> usize {
        self.variables.push(Variable {
            kind,
            cost,
            lower: 0.0,
            upper: 1.0,
        });
        self.variables.len() - 1
    }

    fn row(&mut self, terms: Vec<(usize, f64)>, constant: f64, lower: f64, upper: f64) {
        if terms.is_empty() {
            if constant < lower - 1e-9 || constant > upper + 1e-9 {
                self.infeasible = true;
            }
            return;
        }
        self.constraints.push(Constraint {
            terms,
            lower: lower - constant,
            upper: upper - constant,
        });
    }
}

fn min_neighbor_border_distance(dims: GridDims, c: usize) -> usize {
    let (x, y) = dims.coords(c);
    dims.neighbors(x, y)
        .map(|(_, nx, ny)| dims.border_distance(nx, ny))
        .min()
        .unwrap_or(0)
}

/// Cheap admissible makespan bound: a robot has to walk from the border to a neighbour of
/// every changed column, climb to the writing level, and walk back out.
pub fn lower_bound(inst: &PlanningInstance) -> usize {
    inst.changed_columns()
        .into_iter()
        .map(|c| {
            let d = min_neighbor_border_distance(inst.dims, c);
            let k = inst.start_env.at(c).max(inst.target_env.at(c)) as usize - 1;
            2 * d.max(k.saturating_sub(1)) + 3
        })
        .max()
        .unwrap_or(0)
}

/// Builds the model for horizon `horizon` (number of steps).
pub fn build_model(inst: &PlanningInstance, horizon: usize) -> Result<MilpModel, PlanError> {
    let dims = inst.dims;
    let big_t = horizon;
    let z_max = dims.z_size as u32;
    let cells = dims.cells();
    let frozen = match &inst.frozen {
        Some(f) => Some(FrozenView::new(inst, f)?),
        None => None,
    };
    let frozen_written = |c: usize| frozen.as_ref().is_some_and(|f| f.written.contains(&c));
    let frozen_on = |t: usize, c: usize| frozen.as_ref().is_some_and(|f| f.occupied_at(t, c));
    let frozen_writes = |step: usize, c: usize| frozen.as_ref().is_some_and(|f| f.written_at(step, c));

    let mut b = Builder {
        variables: Vec::new(),
        constraints: Vec::new(),
        infeasible: false,
    };

    // committed robots still walking after our horizon need the start heights
    if let Some(f) = &frozen {
        for t in big_t..f.occupied.len() {
            for &c in &f.occupied[t] {
                if !f.written.contains(&c) && inst.start_env.at(c) != inst.target_env.at(c) {
                    b.infeasible = true;
                }
            }
        }
    }

    // a column the frozen robots touch is theirs; it must already end where we need it
    if let Some(f) = &frozen {
        let last = f.heights.last().expect("trace has a start state");
        for &c in &f.written {
            let s = inst.start_env.at(c);
            if last.at(c) == s && inst.target_env.at(c) != s {
                b.infeasible = true;
            }
        }
    }

    // height domains
    let mut dom = vec![vec![(1u32, 0u32); cells]; big_t + 1];
    for c in 0..cells {
        let e = 1 + min_neighbor_border_distance(dims, c);
        let s = inst.start_env.at(c);
        let g = inst.target_env.at(c);
        for (t, row) in dom.iter_mut().enumerate() {
            let (mut lo, mut hi) = if frozen_written(c) {
                let h = frozen.as_ref().expect("frozen view").height(t, c);
                (h, h)
            } else {
                let a = t.saturating_sub(e) as u32;
                let bb = big_t.saturating_sub(e).saturating_sub(t) as u32;
                let lo = s.min(g).max(s.saturating_sub(a)).max(g.saturating_sub(bb));
                let hi = z_max.min(s + a).min(g + bb);
                if t == big_t {
                    (lo.max(g), hi.min(g))
                } else {
                    (lo, hi)
                }
            };
            if !frozen_written(c) && frozen_on(t, c) {
                let h = inst.start_env.at(c);
                lo = lo.max(h);
                hi = hi.min(h);
            }
            if lo > hi {
                b.infeasible = true;
            }
            row[c] = (lo, hi);
        }
    }
    if b.infeasible {
        return Ok(MilpModel {
            horizon,
            variables: Vec::new(),
            constraints: Vec::new(),
            infeasible: true,
        });
    }

    // height indicators
    let mut yvar: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); cells]; big_t + 1];
    for t in 0..=big_t {
        for c in 0..cells {
            let (lo, hi) = dom[t][c];
            if lo < hi {
                let vars: Vec<usize> = (lo..=hi)
                    .map(|z| b.var(VarKind::Height { t, cell: c, z }, 0.0))
                    .collect();
                b.row(vars.iter().map(|&v| (v, 1.0)).collect(), 0.0, 1.0, 1.0);
                yvar[t][c] = vars;
            }
        }
    }
    let ylit = |t: usize, c: usize, z: u32| -> Lit {
        let (lo, hi) = dom[t][c];
        if z < lo || z > hi {
            Lit::False
        } else if lo == hi {
            Lit::True
        } else {
            Lit::Var(yvar[t][c][(z - lo) as usize])
        }
    };
    let in_dom = |t: usize, c: usize, z: u32| {
        let (lo, hi) = dom[t][c];
        lo <= z && z <= hi
    };

    let node_ok = |t: usize, c: usize, z: u32| -> bool {
        if t == 0 || t >= big_t {
            return false;
        }
        let (x, y) = dims.coords(c);
        let bd = dims.border_distance(x, y);
        if t < 1 + bd || t + 1 + bd > big_t {
            return false;
        }
        if z as usize > t.min(big_t - t) {
            return false;
        }
        if !(in_dom(t - 1, c, z) && in_dom(t, c, z) && in_dom(t + 1, c, z)) {
            return false;
        }
        !(frozen_on(t, c) || frozen_writes(t, c) || frozen_writes(t - 1, c))
    };

    let mut inflow: HashMap<(usize, Node), Vec<usize>> = HashMap::new();
    let mut outflow: HashMap<(usize, Node), Vec<usize>> = HashMap::new();
    // (arc, +1 place / -1 pick, level of the block)
    let mut writes: HashMap<(usize, usize), Vec<(usize, f64, u32)>> = HashMap::new();
    let mut edge_moves: HashMap<(usize, usize, usize), Vec<usize>> = HashMap::new();
    let mut enters: Vec<Vec<usize>> = vec![Vec::new(); big_t];
    let mut links: Vec<(usize, usize, Lit)> = Vec::new();

    for t in 0..big_t {
        for c in 0..cells {
            let (x, y) = dims.coords(c);
            let border = dims.is_border(x, y);
            for z in 0..=z_max {
                for carrying in [false, true] {
                    let here = Node { cell: c, z, carrying };
                    if border && z <= 1 && node_ok(t + 1, c, z) {
                        let v = b.var(
                            VarKind::Arc {
                                t,
                                from: None,
                                to: Some(here),
                                action: Action::Enter { x, y, carrying },
                            },
                            1.0,
                        );
                        inflow.entry((t + 1, here)).or_default().push(v);
                        enters[t].push(v);
                    }
                    if !node_ok(t, c, z) {
                        continue;
                    }
                    let mut arc = |b: &mut Builder, to: Option<Node>, action: Action| -> usize {
                        let cost = if action.is_wait() { 0.0 } else { 1.0 };
                        let v = b.var(
                            VarKind::Arc {
                                t,
                                from: Some(here),
                                to,
                                action,
                            },
                            cost,
                        );
                        outflow.entry((t, here)).or_default().push(v);
                        if let Some(n) = to {
                            inflow.entry((t + 1, n)).or_default().push(v);
                        }
                        v
                    };
                    if border && z <= 1 {
                        arc(&mut b, None, Action::Exit);
                    }
                    if node_ok(t + 1, c, z) {
                        arc(&mut b, Some(here), Action::Wait);
                    }
                    for (d, nx, ny) in dims.neighbors(x, y) {
                        let n = dims.index(nx, ny);
                        if frozen.as_ref().is_some_and(|f| f.moves_at(t, n, c)) {
                            continue;
                        }
                        for z2 in z.saturating_sub(1)..=(z + 1) {
                            if node_ok(t + 1, n, z2) {
                                let to = Node { cell: n, z: z2, carrying };
                                let v = arc(&mut b, Some(to), Action::Move(d));
                                edge_moves.entry((t, c.min(n), c.max(n))).or_default().push(v);
                            }
                        }
                        let writable = !frozen_written(n)
                            && !frozen_on(t, n)
                            && !frozen_on(t + 1, n)
                            && node_ok(t + 1, c, z);
                        if !writable {
                            continue;
                        }
                        if !carrying && in_dom(t, n, z + 1) && in_dom(t + 1, n, z) {
                            let to = Node { cell: c, z, carrying: true };
                            let v = arc(&mut b, Some(to), Action::Pick(d));
                            writes.entry((t, n)).or_default().push((v, -1.0, z + 1));
                            links.push((v, n, ylit(t, n, z + 1)));
                        }
                        if carrying && z < z_max && in_dom(t, n, z) && in_dom(t + 1, n, z + 1) {
                            let to = Node { cell: c, z, carrying: false };
                            let v = arc(&mut b, Some(to), Action::Place(d));
                            writes.entry((t, n)).or_default().push((v, 1.0, z + 1));
                            links.push((v, n, ylit(t, n, z)));
                        }
                    }
                }
            }
        }
    }

    // pick/place height preconditions
    for (v, _, lit) in links {
        match lit {
            Lit::Var(yv) => b.row(vec![(v, 1.0), (yv, -1.0)], 0.0, f64::NEG_INFINITY, 0.0),
            Lit::True => {}
            Lit::False => b.variables[v].upper = 0.0,
        }
    }

    // flow conservation and node-height links
    let mut node_keys: Vec<(usize, Node)> = inflow.keys().chain(outflow.keys()).copied().collect();
    node_keys.sort_by_key(|(t, n)| (*t, n.cell, n.z, n.carrying));
    node_keys.dedup();
    let mut occ: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut by_height: HashMap<(usize, usize, u32), Vec<usize>> = HashMap::new();
    for key in &node_keys {
        let ins = inflow.get(key).cloned().unwrap_or_default();
        let outs = outflow.get(key).cloned().unwrap_or_default();
        let mut terms: Vec<(usize, f64)> = ins.iter().map(|&v| (v, 1.0)).collect();
        terms.extend(outs.iter().map(|&v| (v, -1.0)));
        b.row(terms, 0.0, 0.0, 0.0);
        let (t, n) = *key;
        occ.entry((t, n.cell)).or_default().extend(ins.iter().copied());
        by_height.entry((t, n.cell, n.z)).or_default().extend(ins);
    }
    let mut height_keys: Vec<_> = by_height.keys().copied().collect();
    height_keys.sort_unstable();
    for key @ (t, c, z) in height_keys {
        if let Lit::Var(yv) = ylit(t, c, z) {
            let mut terms: Vec<(usize, f64)> = by_height[&key].iter().map(|&v| (v, 1.0)).collect();
            terms.push((yv, -1.0));
            b.row(terms, 0.0, f64::NEG_INFINITY, 0.0);
        }
    }

    // vertex conflicts, and writes only on free columns
    let occ_terms = |t: usize, c: usize| -> Vec<(usize, f64)> {
        occ.get(&(t, c))
            .map(|vs| vs.iter().map(|&v| (v, 1.0)).collect())
            .unwrap_or_default()
    };
    for t in 1..big_t {
        for c in 0..cells {
            let terms = occ_terms(t, c);
            if terms.len() > 1 {
                b.row(terms, 0.0, f64::NEG_INFINITY, 1.0);
            }
        }
    }
    let mut write_keys: Vec<_> = writes.keys().copied().collect();
    write_keys.sort_unstable();
    for (t, p) in write_keys {
        let w: Vec<(usize, f64)> = writes[&(t, p)].iter().map(|&(v, _, _)| (v, 1.0)).collect();
        for tt in [t, t + 1] {
            let mut terms = w.clone();
            terms.extend(occ_terms(tt, p));
            b.row(terms, 0.0, f64::NEG_INFINITY, 1.0);
        }
    }

    // height dynamics, level by level: the indicator "column reaches level z" changes
    // exactly by the places and picks of a block at level z
    let at_least = |t: usize, c: usize, z: u32| -> (Vec<(usize, f64)>, f64) {
        let (lo, hi) = dom[t][c];
        if z <= lo {
            (Vec::new(), 1.0)
        } else if z > hi {
            (Vec::new(), 0.0)
        } else {
            ((z..=hi).map(|zz| (yvar[t][c][(zz - lo) as usize], 1.0)).collect(), 0.0)
        }
    };
    for c in 0..cells {
        if frozen_written(c) {
            continue;
        }
        for t in 0..big_t {
            let top = dom[t][c].1.max(dom[t + 1][c].1);
            for z in 1..=top {
                let (next, k1) = at_least(t + 1, c, z);
                let (cur, k0) = at_least(t, c, z);
                let mut terms = next;
                terms.extend(cur.into_iter().map(|(v, a)| (v, -a)));
                if let Some(w) = writes.get(&(t, c)) {
                    terms.extend(w.iter().filter(|e| e.2 == z).map(|&(v, sign, _)| (v, -sign)));
                }
                b.row(terms, k1 - k0, 0.0, 0.0);
            }
        }
    }

    // no swaps along an edge
    let mut edge_keys: Vec<_> = edge_moves.keys().copied().collect();
    edge_keys.sort_unstable();
    for key @ (t, lo, hi) in edge_keys {
        let vars = &edge_moves[&key];
        let forward = vars.iter().any(|&v| match b.variables[v].kind {
            VarKind::Arc { from: Some(f), .. } => f.cell == lo,
            _ => false,
        });
        let backward = vars.iter().any(|&v| match b.variables[v].kind {
            VarKind::Arc { from: Some(f), .. } => f.cell == hi,
            _ => false,
        });
        let _ = t;
        if forward && backward {
            b.row(vars.iter().map(|&v| (v, 1.0)).collect(), 0.0, f64::NEG_INFINITY, 1.0);
        }
    }

    // robots in use per step: inside the grid plus entering
    for (t, entering) in enters.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = entering.iter().map(|&v| (v, 1.0)).collect();
        for c in 0..cells {
            terms.extend(occ_terms(t, c));
        }
        let used = frozen.as_ref().map_or(0, |f| f.in_use_at(t));
        let cap = inst.max_robots as f64 - used as f64;
        b.row(terms, 0.0, f64::NEG_INFINITY, cap);
    }

    Ok(MilpModel {
        horizon,
        variables: b.variables,
        constraints: b.constraints,
        infeasible: b.infeasible,
    })
}

// ---------------------------------------------------------------------------------------
// Solvers

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverVerdict {
    pub status: SolveStatus,
    /// One value per model variable when optimal, otherwise empty.
    pub assignment: Vec<f64>,
    pub objective_value: Option<i64>,
    pub solve_seconds: f64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Duration,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: Duration::from_secs(10_000),
            seed: 0,
        }
    }
}

pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<SolverVerdict, SolverError>;
}

/// Answers models that need no search: infeasible by construction, or without variables.
fn trivial_verdict(model: &MilpModel) -> Option<SolverVerdict> {
    if model.infeasible {
        return Some(SolverVerdict {
            status: SolveStatus::Infeasible,
            assignment: Vec::new(),
            objective_value: None,
            solve_seconds: 0.0,
        });
    }
    if model.variables.is_empty() {
        let ok = model.constraints.iter().all(|c| c.lower <= 0.0 && 0.0 <= c.upper);
        return Some(SolverVerdict {
            status: if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            assignment: Vec::new(),
            objective_value: ok.then_some(0),
            solve_seconds: 0.0,
        });
    }
    None
}

fn configure(model: &mut highs::Model, opts: &SolveOptions) {
    if std::env::var_os("MACC_SOLVER_LOG").is_none() {
        model.make_quiet();
    } else {
        model.set_option("output_flag", true);
        model.set_option("log_to_console", true);
    }
    model.set_option("threads", 1);
    // presolve probing dominates run time on these models while the search itself is cheap
    model.set_option("presolve", "off");
    model.set_option("mip_rel_gap", 0.0);
    model.set_option("mip_abs_gap", 0.0);
    model.set_option("time_limit", opts.time_limit.as_secs_f64().max(0.001));
    model.set_option("random_seed", (opts.seed % i32::MAX as u64) as i32);
}

fn finish(
    model: &MilpModel,
    solved: highs::SolvedModel,
    started: Instant,
) -> Result<SolverVerdict, SolverError> {
    use highs::HighsModelStatus as S;
    let solve_seconds = started.elapsed().as_secs_f64();
    let status = match solved.status() {
        S::Optimal => SolveStatus::Optimal,
        S::Infeasible | S::UnboundedOrInfeasible => SolveStatus::Infeasible,
        S::ReachedTimeLimit | S::ReachedInterrupt => SolveStatus::Timeout,
        other => return Err(SolverError::Backend(format!("unexpected HiGHS status {other:?}"))),
    };
    if status != SolveStatus::Optimal {
        return Ok(SolverVerdict {
            status,
            assignment: Vec::new(),
            objective_value: None,
            solve_seconds,
        });
    }
    let assignment: Vec<f64> = solved.get_solution().columns().iter().map(|x| x.round()).collect();
    if assignment.len() != model.variables.len() {
        return Err(SolverError::Backend(format!(
            "solution has {} columns, model has {}",
            assignment.len(),
            model.variables.len()
        )));
    }
    let objective = model.objective_of(&assignment).round() as i64;
    Ok(SolverVerdict {
        status,
        assignment,
        objective_value: Some(objective),
        solve_seconds,
    })
}

/// In-process branch and bound through the HiGHS library.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsSolver;

impl SolverAdapter for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<SolverVerdict, SolverError> {
        if let Some(v) = trivial_verdict(model) {
            return Ok(v);
        }
        let started = Instant::now();
        let mut pb = highs::RowProblem::default();
        let cols: Vec<highs::Col> = model
            .variables
            .iter()
            .map(|v| pb.add_integer_column(v.cost, v.lower..=v.upper))
            .collect();
        for c in &model.constraints {
            pb.add_row(c.lower..=c.upper, c.terms.iter().map(|&(i, a)| (cols[i], a)));
        }
        let mut m = pb
            .try_optimise(highs::Sense::Minimise)
            .map_err(|s| SolverError::Backend(format!("loading model: {s:?}")))?;
        configure(&mut m, opts);
        let solved = m
            .try_solve()
            .map_err(|s| SolverError::Backend(format!("solving: {s:?}")))?;
        finish(model, solved, started)
    }
}

/// Goes through the interchange file: writes the model as fixed-field MPS and has HiGHS
/// read it back from disk, as an external solver would.
#[derive(Debug, Clone, Copy, Default)]
pub struct MpsFileSolver;

impl SolverAdapter for MpsFileSolver {
    fn name(&self) -> &'static str {
        "mps"
    }

    fn solve(&self, model: &MilpModel, opts: &SolveOptions) -> Result<SolverVerdict, SolverError> {
        if let Some(v) = trivial_verdict(model) {
            return Ok(v);
        }
        let started = Instant::now();
        let file = tempfile::Builder::new().suffix(".mps").tempfile()?;
        mps::write_mps(model, file.path())?;
        let path = std::ffi::CString::new(file.path().to_string_lossy().as_bytes())
            .map_err(|e| SolverError::Backend(e.to_string()))?;
        let mut m = highs::Model::new(highs::ColProblem::default());
        configure(&mut m, opts);
        let status = unsafe { highs_sys::Highs_readModel(m.as_mut_ptr(), path.as_ptr()) };
        if status == highs_sys::STATUS_ERROR {
            return Err(SolverError::Backend("HiGHS could not read the model file".into()));
        }
        if m.num_cols() != model.variables.len() {
            return Err(SolverError::Backend(format!(
                "model file has {} columns, expected {}",
                m.num_cols(),
                model.variables.len()
            )));
        }
        let solved = m
            .try_solve()
            .map_err(|s| SolverError::Backend(format!("solving: {s:?}")))?;
        finish(model, solved, started)
    }
}

pub fn solver_by_name(name: &str) -> Option<Box<dyn SolverAdapter>> {
    match name {
        "highs" => Some(Box::new(HighsSolver)),
        "mps" => Some(Box::new(MpsFileSolver)),
        _ => None,
    }
}

pub fn solve(
    model: &MilpModel,
    adapter: &dyn SolverAdapter,
    time_budget: Duration,
    seed: u64,
) -> Result<SolverVerdict, SolverError> {
    adapter.solve(
        model,
        &SolveOptions {
            time_limit: time_budget,
            seed,
        },
    )
}

pub fn export_model(model: &MilpModel, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
    mps::write_mps(model, path.as_ref())
}

// ---------------------------------------------------------------------------------------
// Decoding

/// Traces unit flows from entry to exit and packs the trips onto robots.
pub fn decode(model: &MilpModel, verdict: &SolverVerdict) -> Result<ActionSchedule, PlanError> {
    if verdict.status != SolveStatus::Optimal {
        return Err(PlanError::Decode("verdict is not optimal".into()));
    }
    if verdict.assignment.len() != model.variables.len() {
        return Err(PlanError::Decode("assignment length differs from model".into()));
    }
    let mut starts = Vec::new();
    let mut outgoing: HashMap<(usize, Node), Vec<(Option<Node>, Action)>> = HashMap::new();
    for (v, &x) in model.variables.iter().zip(&verdict.assignment) {
        if x < 0.5 {
            continue;
        }
        if let VarKind::Arc { t, from, to, action } = v.kind {
            match from {
                None => starts.push((t, to.expect("enter arcs lead into the grid"), action)),
                Some(f) => outgoing.entry((t, f)).or_default().push((to, action)),
            }
        }
    }
    starts.sort_by_key(|(t, n, _)| (*t, n.cell, n.carrying));
    let mut trips = Vec::new();
    for (t0, first, enter) in starts {
        let mut actions = vec![enter];
        let (mut t, mut node) = (t0 + 1, first);
        loop {
            let next = outgoing
                .get_mut(&(t, node))
                .and_then(|v| v.pop())
                .ok_or_else(|| PlanError::Decode(format!("flow stops at t={t} node={node:?}")))?;
            actions.push(next.1);
            match next.0 {
                None => break,
                Some(n) => {
                    node = n;
                    t += 1;
                }
            }
        }
        trips.push(Trip { start: t0, actions });
    }
    if let Some(((t, n), _)) = outgoing.iter().find(|(_, v)| !v.is_empty()) {
        return Err(PlanError::Decode(format!("flow not decomposable at t={t} node={n:?}")));
    }
    let schedule = ActionSchedule::from_trips(model.horizon, trips);
    let cost = schedule.metrics().sum_of_costs as i64;
    if Some(cost) != verdict.objective_value {
        return Err(PlanError::Decode(format!(
            "decoded cost {cost} differs from objective {:?}",
            verdict.objective_value
        )));
    }
    Ok(schedule)
}

// ---------------------------------------------------------------------------------------
// Makespan iteration

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("no plan with makespan up to {tmax}")]
    Infeasible { tmax: usize },
    #[error("solver budget exhausted at makespan {horizon}")]
    Timeout { horizon: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("decode: {0}")]
    Decode(String),
    #[error("replay: {0}")]
    Replay(SimError),
    #[error("replay reached a different heightmap than the target")]
    Mismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub tmax: usize,
    /// Wall-clock budget for a whole plan (all substructures of a structure).
    pub budget: Duration,
    pub seed: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            tmax: 200,
            budget: Duration::from_secs(10_000),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub horizon: usize,
    pub variables: usize,
    pub constraints: usize,
    pub status: SolveStatus,
    pub objective: Option<i64>,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstructurePlan {
    pub schedule: ActionSchedule,
    pub makespan: usize,
    pub sum_of_costs: usize,
    /// Variables in the model of the final, feasible horizon.
    pub variables: usize,
    pub attempts: Vec<Attempt>,
}

impl SubstructurePlan {
    /// Time spent on the final model.
    pub fn solve_seconds(&self) -> f64 {
        self.attempts.last().map_or(0.0, |a| a.solve_seconds)
    }

    /// Time spent on every horizon tried.
    pub fn total_solve_seconds(&self) -> f64 {
        self.attempts.iter().map(|a| a.solve_seconds).sum()
    }
}

/// Heights the world must have after `inst` is carried out alongside its frozen robots.
pub fn expected_final(inst: &PlanningInstance) -> Result<HeightMap, PlanError> {
    let Some(frozen) = &inst.frozen else {
        return Ok(inst.target_env.clone());
    };
    let after = replay(&inst.start_env, frozen).map_err(PlanError::Replay)?;
    let mut out = inst.target_env.clone();
    for c in 0..inst.dims.cells() {
        if after.at(c) != inst.start_env.at(c) {
            out.set_at(c, after.at(c));
        }
    }
    Ok(out)
}

pub fn plan_substructure(
    inst: &PlanningInstance,
    adapter: &dyn SolverAdapter,
    opts: &PlanOptions,
) -> Result<SubstructurePlan, PlanError> {
    plan_until(inst, adapter, opts, Instant::now() + opts.budget)
}

pub(crate) fn plan_until(
    inst: &PlanningInstance,
    adapter: &dyn SolverAdapter,
    opts: &PlanOptions,
    deadline: Instant,
) -> Result<SubstructurePlan, PlanError> {
    if inst.start_env.dims() != inst.dims || inst.target_env.dims() != inst.dims {
        return Err(PlanError::Invalid("dimension mismatch".into()));
    }
    if inst.changed_columns().is_empty() {
        return Ok(SubstructurePlan {
            schedule: ActionSchedule::empty(),
            makespan: 0,
            sum_of_costs: 0,
            variables: 0,
            attempts: Vec::new(),
        });
    }
    let mut attempts = Vec::new();
    for horizon in lower_bound(inst)..=opts.tmax {
        let now = Instant::now();
        if now >= deadline {
            return Err(PlanError::Timeout { horizon });
        }
        let model = build_model(inst, horizon)?;
        let verdict = solve(&model, adapter, deadline - now, opts.seed)?;
        log::info!(
            "T={horizon} vars={} rows={} status={:?} objective={:?} solve_s={:.3}",
            model.num_variables(),
            model.num_constraints(),
            verdict.status,
            verdict.objective_value,
            verdict.solve_seconds
        );
        attempts.push(Attempt {
            horizon,
            variables: model.num_variables(),
            constraints: model.num_constraints(),
            status: verdict.status,
            objective: verdict.objective_value,
            solve_seconds: verdict.solve_seconds,
        });
        match verdict.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Timeout => return Err(PlanError::Timeout { horizon }),
            SolveStatus::Optimal => {}
        }
        let schedule = decode(&model, &verdict)?;
        verify(inst, &schedule)?;
        let metrics = schedule.metrics();
        return Ok(SubstructurePlan {
            makespan: metrics.makespan,
            sum_of_costs: metrics.sum_of_costs,
            variables: model.num_variables(),
            schedule,
            attempts,
        });
    }
    Err(PlanError::Infeasible { tmax: opts.tmax })
}

/// Replays the plan (together with any frozen robots) and checks the outcome and robot cap.
fn verify(inst: &PlanningInstance, schedule: &ActionSchedule) -> Result<(), PlanError> {
    let combined = match &inst.frozen {
        Some(f) => ActionSchedule::overlay(&[f, schedule]).map_err(PlanError::Decode)?,
        None => schedule.clone(),
    };
    if combined.robot_count() > inst.max_robots {
        return Err(PlanError::Decode(format!(
            "{} robots needed, {} allowed",
            combined.robot_count(),
            inst.max_robots
        )));
    }
    let out = replay(&inst.start_env, &combined).map_err(PlanError::Replay)?;
    if out != expected_final(inst)? {
        return Err(PlanError::Mismatch);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialPlan {
    /// Substructure index and its plan, in build order.
    pub steps: Vec<(usize, SubstructurePlan)>,
    pub schedule: ActionSchedule,
    pub final_env: HeightMap,
}

/// Plans each substructure on top of the ones before it and concatenates the schedules.
pub fn plan_sequential(
    order: &BuildOrder,
    start: &HeightMap,
    max_robots: usize,
    adapter: &dyn SolverAdapter,
    opts: &PlanOptions,
) -> Result<SequentialPlan, PlanError> {
    let deadline = Instant::now() + opts.budget;
    let dims = start.dims();
    let mut env = start.clone();
    let mut schedule = ActionSchedule::empty();
    let mut steps = Vec::new();
    for s in order.in_order() {
        let mut target = env.clone();
        for b in s.blocks.iter() {
            if b.z as u32 > target.get(b.x, b.y) {
                target.set(b.x, b.y, b.z as u32).map_err(|e| PlanError::Invalid(e.to_string()))?;
            }
        }
        let inst = PlanningInstance::new(env.clone(), target.clone(), max_robots)?;
        let plan = plan_until(&inst, adapter, opts, deadline)?;
        schedule = schedule.then(&plan.schedule);
        steps.push((s.index, plan));
        env = target;
    }
    let out = replay(start, &schedule).map_err(PlanError::Replay)?;
    if out != env || out.dims() != dims {
        return Err(PlanError::Mismatch);
    }
    Ok(SequentialPlan {
        steps,
        schedule,
        final_env: out,
    })
}

/// Plans the whole structure as one instance from the empty world.
pub fn plan_whole(
    target: &HeightMap,
    max_robots: usize,
    adapter: &dyn SolverAdapter,
    opts: &PlanOptions,
) -> Result<SubstructurePlan, PlanError> {
    let inst = PlanningInstance::new(HeightMap::empty(target.dims()), target.clone(), max_robots)?;
    plan_substructure(&inst, adapter, opts)
}
