//! Reachability of grid cells from outside, unreachable regions, and the removability test
//! used when disassembling a structure.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::decompose::Substructure;
use crate::world::{BlockCell, GridDims, HeightMap};

/// `reachable[idx]` is true when a robot can walk from outside the grid onto the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversabilityMatrix {
    pub dims: GridDims,
    pub reachable: Vec<bool>,
    pub base: HeightMap,
}

impl TraversabilityMatrix {
    pub fn is_reachable(&self, x: usize, y: usize) -> bool {
        self.reachable[self.dims.index(x, y)]
    }

    /// True if some in-grid 4-neighbour of `(x, y)` is reachable.
    pub fn has_reachable_neighbor(&self, x: usize, y: usize) -> bool {
        self.dims
            .neighbors(x, y)
            .any(|(_, nx, ny)| self.is_reachable(nx, ny))
    }

    /// Text grid, top row printed first: `.` reachable, `#` unreachable.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for y in (0..self.dims.y_size).rev() {
            for x in 0..self.dims.x_size {
                out.push(if self.is_reachable(x, y) { '.' } else { '#' });
            }
            out.push('\n');
        }
        out
    }
}

/// Breadth-first propagation from boundary cells of height at most one; a step between
/// neighbours is allowed when their heights differ by less than two.
pub fn traversability(env: &HeightMap) -> TraversabilityMatrix {
    let dims = env.dims();
    let mut reachable = vec![false; dims.cells()];
    let mut queue = VecDeque::new();
    for idx in 0..dims.cells() {
        let (x, y) = dims.coords(idx);
        if dims.is_border(x, y) && env.at(idx) <= 1 {
            reachable[idx] = true;
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let h = env.get(x, y);
        for (_, nx, ny) in dims.neighbors(x, y) {
            let n = dims.index(nx, ny);
            if !reachable[n] && env.at(n).abs_diff(h) < 2 {
                reachable[n] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    TraversabilityMatrix {
        dims,
        reachable,
        base: env.clone(),
    }
}

/// A maximal 4-connected set of unreachable cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnreachableContour {
    pub cells: Vec<(usize, usize)>,
}

impl UnreachableContour {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.cells.binary_search(&(x, y)).is_ok()
    }

    /// Member cells with no reachable in-grid neighbour: the region the contour walls off,
    /// as opposed to the wall cells on its rim.
    pub fn encloses(&self, x: usize, y: usize, m: &TraversabilityMatrix) -> bool {
        self.contains(x, y) && !m.has_reachable_neighbor(x, y)
    }
}

pub fn contours(m: &TraversabilityMatrix) -> Vec<UnreachableContour> {
    let dims = m.dims;
    let mut seen = vec![false; dims.cells()];
    let mut out = Vec::new();
    for start in 0..dims.cells() {
        if m.reachable[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cells = Vec::new();
        let mut stack = vec![start];
        while let Some(idx) = stack.pop() {
            let (x, y) = dims.coords(idx);
            cells.push((x, y));
            for (_, nx, ny) in dims.neighbors(x, y) {
                let n = dims.index(nx, ny);
                if !m.reachable[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        cells.sort_unstable();
        out.push(UnreachableContour { cells });
    }
    out
}

/// Text dump of the matrix followed by one line per contour.
pub fn dump(m: &TraversabilityMatrix) -> String {
    let mut out = m.render();
    for (i, c) in contours(m).iter().enumerate() {
        let cells: Vec<String> = c.cells.iter().map(|(x, y)| format!("({x},{y})")).collect();
        let _ = writeln!(out, "contour {}: {}", i + 1, cells.join(" "));
    }
    out
}

/// Block ownership among the substructures still standing.
pub(crate) struct Occupancy3d {
    owner: HashMap<BlockCell, usize>,
    env: HeightMap,
}

impl Occupancy3d {
    pub(crate) fn new<'a>(dims: GridDims, remaining: impl IntoIterator<Item = &'a Substructure>) -> Self {
        let mut owner = HashMap::new();
        let mut env = HeightMap::empty(dims);
        for s in remaining {
            for b in &s.blocks {
                owner.insert(*b, s.index);
                if b.z as u32 > env.get(b.x, b.y) {
                    env.set(b.x, b.y, b.z as u32).expect("block inside grid");
                }
            }
        }
        Occupancy3d { owner, env }
    }

    fn owned_by_other(&self, b: &BlockCell, me: usize) -> bool {
        self.owner.get(b).is_some_and(|&o| o != me)
    }
}

/// Heuristic test for removing `s` while every substructure in `remaining` still stands.
///
/// Fails if a block of `s` carries a block of another substructure, if a block is boxed in
/// on all sides at its own level by other substructures or the grid edge, if its blocks
/// cannot be taken away one by one from standable neighbours (see [`self_disassembles`]),
/// or if a block sits inside a walled-off unreachable region.
pub fn is_removable(s: &Substructure, remaining: &[&Substructure], dims: GridDims) -> bool {
    let occ = Occupancy3d::new(dims, remaining.iter().copied().chain(std::iter::once(s)));
    removable_in(s, &occ, dims)
}

pub(crate) fn removable_in(s: &Substructure, occ: &Occupancy3d, dims: GridDims) -> bool {
    for b in &s.blocks {
        if occ.owned_by_other(&b.above(), s.index) {
            return false;
        }
    }
    for b in &s.blocks {
        let boxed_in = crate::world::Dir::ALL.into_iter().all(|d| match dims.step(b.x, b.y, d) {
            Some((nx, ny)) => occ.owned_by_other(&BlockCell::new(nx, ny, b.z), s.index),
            // robots cannot act from outside the grid
            None => true,
        });
        if boxed_in {
            return false;
        }
    }
    if !self_disassembles(s, occ, dims) {
        return false;
    }
    let matrix = traversability(&occ.env);
    let walls = contours(&matrix);
    for b in &s.blocks {
        if walls.iter().any(|c| c.encloses(b.x, b.y, &matrix)) {
            return false;
        }
    }
    true
}

/// Takes the blocks of `s` away one column top at a time, each needing a neighbour a robot
/// can stand on one level below it with the rest of the world in place. Read backwards this
/// is a placement order for `s` on top of everything else.
fn self_disassembles(s: &Substructure, occ: &Occupancy3d, dims: GridDims) -> bool {
    let mut env = HeightMap::empty(dims);
    for (b, &o) in &occ.owner {
        if o != s.index && b.z as u32 > env.get(b.x, b.y) {
            env.set(b.x, b.y, b.z as u32).expect("block inside grid");
        }
    }
    let mut left: Vec<BlockCell> = s.blocks.iter().copied().collect();
    for b in &left {
        if b.z as u32 > env.get(b.x, b.y) {
            env.set(b.x, b.y, b.z as u32).expect("block inside grid");
        }
    }
    while !left.is_empty() {
        // the robot gets in with the block absent and back out with it in place
        let with_block = Standing::new(&env);
        let next = left.iter().position(|b| {
            if env.get(b.x, b.y) != b.z as u32 {
                return false;
            }
            let mut lowered = env.clone();
            lowered.set(b.x, b.y, b.z as u32 - 1).expect("block inside grid");
            let stand = Standing::new(&lowered);
            dims.neighbors(b.x, b.y).any(|(_, nx, ny)| {
                let n = dims.index(nx, ny);
                stand.can_stand(n, b.z as u32 - 1) && with_block.can_stand(n, b.z as u32 - 1)
            })
        });
        let Some(i) = next else {
            return false;
        };
        let b = left.swap_remove(i);
        env.set(b.x, b.y, b.z as u32 - 1).expect("block inside grid");
    }
    true
}

/// Where a robot can get to stand when it may add scaffolding on top of `base`.
///
/// A state `(cell, h)` is reachable when the column can be brought to `h` (each missing
/// level placed from a neighbour standing one lower) and a robot can step onto it, either
/// from outside the grid at height at most one or from a reachable neighbour state within
/// one level. Each state is judged on its own, so scaffolds needed by different states are
/// assumed not to get in each other's way.
struct Standing {
    z_max: usize,
    reach: Vec<bool>,
}

impl Standing {
    fn new(base: &HeightMap) -> Self {
        let dims = base.dims();
        let z_max = dims.z_size;
        let slot = |c: usize, h: usize| c * (z_max + 1) + h;
        let mut reach = vec![false; dims.cells() * (z_max + 1)];
        let neighbours: Vec<Vec<usize>> = (0..dims.cells())
            .map(|c| {
                let (x, y) = dims.coords(c);
                dims.neighbors(x, y).map(|(_, nx, ny)| dims.index(nx, ny)).collect()
            })
            .collect();
        let mut changed = true;
        while changed {
            changed = false;
            for c in 0..dims.cells() {
                let (x, y) = dims.coords(c);
                let floor = base.at(c) as usize;
                for h in floor..=z_max {
                    if reach[slot(c, h)] {
                        continue;
                    }
                    let raisable = (floor + 1..=h).all(|l| neighbours[c].iter().any(|&m| reach[slot(m, l - 1)]));
                    if !raisable {
                        break;
                    }
                    let enter = dims.is_border(x, y) && h <= 1;
                    let step = neighbours[c].iter().any(|&m| {
                        (h.saturating_sub(1)..=(h + 1).min(z_max)).any(|hm| reach[slot(m, hm)])
                    });
                    if enter || step {
                        reach[slot(c, h)] = true;
                        changed = true;
                    }
                }
            }
        }
        Standing { z_max, reach }
    }

    fn can_stand(&self, cell: usize, h: u32) -> bool {
        let h = h as usize;
        h <= self.z_max && self.reach[cell * (self.z_max + 1) + h]
    }
}

/// Every block of `s` has an in-grid neighbour that a robot can walk to in `built`.
pub fn is_traversable(s: &Substructure, built: &HeightMap) -> bool {
    let matrix = traversability(built);
    s.blocks.iter().all(|b| matrix.has_reachable_neighbor(b.x, b.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::Tower;
    use crate::world::BlockSet;

    fn dims(x: usize, y: usize, z: usize) -> GridDims {
        GridDims::new(x, y, z).unwrap()
    }

    fn ring(d: GridDims, lo: usize, hi: usize, h: u32) -> HeightMap {
        let mut m = HeightMap::empty(d);
        for x in lo..=hi {
            for y in lo..=hi {
                if x == lo || x == hi || y == lo || y == hi {
                    m.set(x, y, h).unwrap();
                }
            }
        }
        m
    }

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
    fn empty_map_is_fully_reachable() {
        for (x, y) in [(1, 1), (3, 5), (7, 7)] {
            let m = traversability(&HeightMap::empty(dims(x, y, 3)));
            assert!(m.reachable.iter().all(|&r| r));
            assert!(contours(&m).is_empty());
        }
    }

    #[test]
    fn ring_wall_seals_interior() {
        let d = dims(7, 7, 3);
        let m = traversability(&ring(d, 1, 5, 2));
        for x in 2..=4 {
            for y in 2..=4 {
                assert!(!m.is_reachable(x, y));
            }
        }
        assert!(m.is_reachable(0, 0));
        let cs = contours(&m);
        assert_eq!(cs.len(), 1);
        // 16 wall cells plus 9 interior cells
        assert_eq!(cs[0].cells.len(), 25);
        assert!(cs[0].encloses(3, 3, &m));
        assert!(!cs[0].encloses(1, 3, &m));
    }

    #[test]
    fn isolated_tower_cell_is_unreachable() {
        let mut env = HeightMap::empty(dims(5, 5, 3));
        env.set(2, 2, 2).unwrap();
        let m = traversability(&env);
        assert!(!m.is_reachable(2, 2));
        assert_eq!(m.reachable.iter().filter(|&&r| r).count(), 24);
    }

    #[test]
    fn boundary_tower_needs_a_climb() {
        let mut env = HeightMap::empty(dims(3, 1, 3));
        env.set(0, 0, 2).unwrap();
        env.set(1, 0, 1).unwrap();
        let m = traversability(&env);
        // entered from (1,0) or (2,0), then climbed
        assert!(m.is_reachable(0, 0));
    }

    #[test]
    fn two_courtyards_give_two_contours() {
        let d = dims(11, 5, 3);
        let mut env = ring(d, 0, 4, 2);
        for x in 6..=10 {
            for y in 0..=4 {
                if x == 6 || x == 10 || y == 0 || y == 4 {
                    env.set(x, y, 2).unwrap();
                }
            }
        }
        let cs = contours(&traversability(&env));
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn sole_substructure_in_open_field_is_removable() {
        let s = sub(1, &[(2, 2, 1), (2, 2, 2), (3, 2, 1)]);
        assert!(is_removable(&s, &[&s], dims(5, 5, 3)));
        let tower = sub(1, &[(2, 2, 1), (2, 2, 2), (2, 2, 3)]);
        assert!(is_removable(&tower, &[&tower], dims(5, 5, 3)));
    }

    #[test]
    fn covered_substructure_is_not_removable() {
        let low = sub(1, &[(2, 2, 1)]);
        let high = sub(2, &[(2, 2, 2), (3, 2, 1)]);
        let d = dims(5, 5, 3);
        assert!(!is_removable(&low, &[&low, &high], d));
        assert!(is_removable(&high, &[&low, &high], d));
    }

    #[test]
    fn boxed_in_block_is_not_removable() {
        let d = dims(5, 5, 3);
        let centre = sub(1, &[(2, 2, 1)]);
        let walls = sub(2, &[(1, 2, 1), (3, 2, 1), (2, 1, 1), (2, 3, 1)]);
        assert!(!is_removable(&centre, &[&centre, &walls], d));
    }

    #[test]
    fn corner_block_between_neighbours_is_not_removable() {
        let d = dims(4, 4, 2);
        let corner = sub(1, &[(3, 3, 1)]);
        let west = sub(2, &[(2, 3, 1)]);
        let south = sub(3, &[(3, 2, 1)]);
        assert!(!is_removable(&corner, &[&corner, &west, &south], d));
        assert!(is_removable(&corner, &[&corner, &south], d));
    }

    #[test]
    fn block_without_a_standing_cell_is_not_removable() {
        // (1,2,2) needs a robot at height 1 next to it; (2,2) is empty but every
        // neighbour of (2,2) is already at height one or more
        let d = dims(5, 3, 2);
        let top = sub(1, &[(1, 2, 2)]);
        let under = sub(2, &[(1, 2, 1), (0, 2, 1), (0, 2, 2), (1, 1, 1), (1, 1, 2)]);
        let right = sub(3, &[(3, 2, 1), (2, 1, 1), (2, 1, 2)]);
        assert!(!is_removable(&top, &[&top, &under, &right], d));
        assert!(is_removable(&top, &[&top, &under], d));
    }

    #[test]
    fn self_blocking_corner_is_not_removable() {
        // the last of (2,3), (3,2), (3,3) to be placed has no neighbour at ground level
        let d = dims(4, 4, 2);
        let corner = sub(1, &[(2, 3, 1), (3, 2, 1), (3, 3, 1)]);
        let wall = sub(2, &[(1, 3, 1), (2, 2, 1), (3, 1, 1)]);
        assert!(!is_removable(&corner, &[&corner, &wall], d));
        assert!(is_removable(&corner, &[&corner], d));
    }

    #[test]
    fn courtyard_substructure_is_not_removable() {
        let d = dims(7, 7, 3);
        let wall_map = ring(d, 1, 5, 2);
        let mut cells = Vec::new();
        for idx in 0..d.cells() {
            let (x, y) = d.coords(idx);
            for z in 1..=wall_map.at(idx) as usize {
                cells.push((x, y, z));
            }
        }
        let wall = sub(1, &cells);
        let inner = sub(2, &[(3, 3, 1)]);
        assert!(!is_removable(&inner, &[&wall, &inner], d));
        assert!(is_removable(&wall, &[&wall], d));
    }
}
