//! Build ordering by reverse disassembly, dependency edges, and parallel stages.

use serde::{Deserialize, Serialize};

use crate::decompose::{Decomposition, Substructure};
use crate::reachability::{is_traversable, removable_in, Occupancy3d};
use crate::world::{union_heightmap, BlockSet, GridDims, HeightMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    /// Surviving index (the smaller of the two).
    pub kept: usize,
    pub absorbed: usize,
    /// Disassembly pass in which the merge happened, counting from 1.
    pub pass: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOrder {
    /// Construction order of substructure indices.
    pub sequence: Vec<usize>,
    pub merges: Vec<MergeEvent>,
    /// Substructures after merging, sorted by index.
    pub substructures: Vec<Substructure>,
}

impl BuildOrder {
    pub fn get(&self, index: usize) -> Option<&Substructure> {
        self.substructures.iter().find(|s| s.index == index)
    }

    pub fn in_order(&self) -> impl Iterator<Item = &Substructure> + '_ {
        self.sequence
            .iter()
            .map(|&i| self.get(i).expect("sequence refers to known substructures"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub dependent: usize,
    pub prerequisite: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelSchedule {
    /// Construction stages; members of one stage may be built together.
    pub stages: Vec<Vec<usize>>,
    pub substructures: Vec<Substructure>,
}

impl ParallelSchedule {
    pub fn get(&self, index: usize) -> Option<&Substructure> {
        self.substructures.iter().find(|s| s.index == index)
    }

    pub fn flatten(&self) -> Vec<usize> {
        self.stages.iter().flatten().copied().collect()
    }
}

fn merge_into(keep: &mut Substructure, other: Substructure) {
    keep.blocks.extend(&other.blocks);
    if other.anchor.height > keep.anchor.height {
        keep.anchor = other.anchor;
    }
}

/// Reverse-disassembly ordering.
///
/// Walks the discovery order backwards, removing every substructure that passes the
/// removability test against those still standing. A pass that removes nothing merges the
/// two latest-discovered substructures that remain. The construction order is the reverse
/// of the removal order.
pub fn order_substructures(d: &Decomposition) -> BuildOrder {
    let dims = d.dims();
    let mut pending: Vec<Substructure> = d.substructures.clone();
    let mut removed: Vec<Substructure> = Vec::new();
    let mut merges = Vec::new();
    let mut pass = 0;

    while !pending.is_empty() {
        pass += 1;
        let mut progressed = false;
        let mut i = pending.len();
        while i > 0 {
            i -= 1;
            let occ = Occupancy3d::new(dims, pending.iter());
            if removable_in(&pending[i], &occ, dims) {
                removed.push(pending.remove(i));
                progressed = true;
            }
        }
        if progressed {
            continue;
        }
        if pending.len() == 1 {
            removed.push(pending.pop().expect("one left"));
            continue;
        }
        let last = pending.pop().expect("at least two pending");
        let keep = pending.last_mut().expect("at least one pending");
        merges.push(MergeEvent {
            kept: keep.index,
            absorbed: last.index,
            pass,
        });
        log::warn!("merging substructure {} into {}", last.index, keep.index);
        merge_into(keep, last);
    }

    let sequence: Vec<usize> = removed.iter().rev().map(|s| s.index).collect();
    removed.sort_by_key(|s| s.index);
    BuildOrder {
        sequence,
        merges,
        substructures: removed,
    }
}

/// Edge `i -> j` when some block of `S_i` loses its support once `S_j` is taken out of the
/// prefix union `S_1 ∪ … ∪ S_i`.
pub fn dependencies(d: &Decomposition) -> Vec<DependencyEdge> {
    let mut edges = Vec::new();
    for (pos, si) in d.substructures.iter().enumerate() {
        for sj in &d.substructures[..pos] {
            let mut union = BlockSet::new();
            for sk in &d.substructures[..=pos] {
                if sk.index != sj.index {
                    union.extend(&sk.blocks);
                }
            }
            let unsupported = si
                .blocks
                .iter()
                .any(|b| b.below().is_some_and(|s| !union.contains(&s)));
            if unsupported {
                edges.push(DependencyEdge {
                    dependent: si.index,
                    prerequisite: sj.index,
                });
            }
        }
    }
    edges
}

/// Round-based disassembly: each round removes everything removable at the start of the
/// round. Stages are the rounds in construction order.
///
/// Simultaneous removal can strand the rounds (nothing removable while the sequential order
/// still had a way through). In that case, or when the flattened rounds fail
/// [`check_sequence`], the stages are consecutive runs of the sequential removal order
/// instead, so flattening always gives back a feasible order.
pub fn parallel_schedule(d: &Decomposition) -> ParallelSchedule {
    let order = order_substructures(d);
    let dims = d.dims();
    let removal: Vec<usize> = order.sequence.iter().rev().copied().collect();
    let by_index = |i: usize| {
        order
            .substructures
            .iter()
            .find(|s| s.index == i)
            .expect("ordered substructure")
    };
    let position = |i: usize| order.sequence.iter().position(|&x| x == i).unwrap_or(usize::MAX);

    let rounds = removal_rounds(&order.substructures, dims).unwrap_or_else(|| {
        log::debug!("removal rounds stranded; grouping the sequential order");
        sequential_runs(&removal, &order.substructures, dims)
    });
    let mut stages: Vec<Vec<usize>> = rounds.into_iter().rev().collect();
    for stage in &mut stages {
        stage.sort_by_key(|&i| position(i));
    }
    let flat: Vec<&Substructure> = stages.iter().flatten().map(|&i| by_index(i)).collect();
    if check_sequence(dims, &flat).is_err() {
        log::debug!("removal rounds flatten to an infeasible order; grouping the sequential order");
        stages = sequential_runs(&removal, &order.substructures, dims)
            .into_iter()
            .rev()
            .collect();
        for stage in &mut stages {
            stage.sort_by_key(|&i| position(i));
        }
    }
    ParallelSchedule {
        stages,
        substructures: order.substructures,
    }
}

/// Every-removable-at-once rounds; `None` when a round finds nothing removable.
fn removal_rounds(subs: &[Substructure], dims: GridDims) -> Option<Vec<Vec<usize>>> {
    let mut pending: Vec<&Substructure> = subs.iter().collect();
    let mut rounds = Vec::new();
    while !pending.is_empty() {
        let occ = Occupancy3d::new(dims, pending.iter().copied());
        let round: Vec<usize> = pending
            .iter()
            .filter(|s| removable_in(s, &occ, dims))
            .map(|s| s.index)
            .collect();
        if round.is_empty() {
            if pending.len() == 1 {
                // the sequential order places the first substructure without a check too
                rounds.push(vec![pending[0].index]);
                break;
            }
            return None;
        }
        pending.retain(|s| !round.contains(&s.index));
        rounds.push(round);
    }
    Some(rounds)
}

/// Splits the sequential removal order into runs whose members are all removable with the
/// whole run still standing.
fn sequential_runs(removal: &[usize], subs: &[Substructure], dims: GridDims) -> Vec<Vec<usize>> {
    let mut pending: Vec<&Substructure> = subs.iter().collect();
    let mut rounds: Vec<Vec<usize>> = Vec::new();
    let mut rest = removal;
    while let Some((&first, _)) = rest.split_first() {
        let occ = Occupancy3d::new(dims, pending.iter().copied());
        let mut run = vec![first];
        for &i in &rest[1..] {
            let s = pending.iter().find(|s| s.index == i).expect("pending");
            if !removable_in(s, &occ, dims) {
                break;
            }
            run.push(i);
        }
        rest = &rest[run.len()..];
        pending.retain(|s| !run.contains(&s.index));
        rounds.push(run);
    }
    rounds
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceViolation {
    /// The prefix ending at this position is not a valid structure.
    InvalidPrefix { position: usize, index: usize },
    /// The substructure cannot be reached in the environment of its predecessors.
    NotTraversable { position: usize, index: usize },
}

/// Direct check that a construction sequence keeps every prefix valid and that each
/// substructure is traversable given the ones built before it.
pub fn check_sequence(dims: GridDims, seq: &[&Substructure]) -> Result<(), SequenceViolation> {
    let mut union = BlockSet::new();
    let mut built = HeightMap::empty(dims);
    for (position, s) in seq.iter().enumerate() {
        if !is_traversable(s, &built) {
            return Err(SequenceViolation::NotTraversable {
                position,
                index: s.index,
            });
        }
        union.extend(&s.blocks);
        built = union_heightmap(dims, [&union]).map_err(|_| SequenceViolation::InvalidPrefix {
            position,
            index: s.index,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose, Tower};
    use crate::world::BlockCell;

    fn dims(x: usize, y: usize, z: usize) -> GridDims {
        GridDims::new(x, y, z).unwrap()
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

    fn decomposition(d: GridDims, subs: Vec<Substructure>) -> Decomposition {
        let mut all = BlockSet::new();
        for s in &subs {
            all.extend(&s.blocks);
        }
        Decomposition {
            source: union_heightmap(d, [&all]).unwrap(),
            substructures: subs,
        }
    }

    #[test]
    fn single_substructure_order() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 2).unwrap();
        let o = order_substructures(&decompose(&m));
        assert_eq!(o.sequence, vec![1]);
        assert!(o.merges.is_empty());
    }

    #[test]
    fn stacked_pair_is_built_bottom_first() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 2).unwrap();
        m.set(2, 3, 2).unwrap();
        let d = decompose(&m);
        let o = order_substructures(&d);
        assert_eq!(o.sequence, vec![1, 2]);
        let seq: Vec<&Substructure> = o.in_order().collect();
        assert_eq!(check_sequence(d.dims(), &seq), Ok(()));
    }

    #[test]
    fn dependency_examples() {
        let d = dims(6, 6, 4);
        let flat = decomposition(d, vec![sub(1, &[(1, 1, 1)]), sub(2, &[(4, 4, 1)])]);
        assert!(dependencies(&flat).is_empty());

        let stacked = decomposition(d, vec![sub(1, &[(2, 2, 1)]), sub(2, &[(2, 2, 2), (3, 2, 1)])]);
        assert_eq!(
            dependencies(&stacked),
            vec![DependencyEdge {
                dependent: 2,
                prerequisite: 1
            }]
        );

        let chain = decomposition(
            d,
            vec![
                sub(1, &[(2, 2, 1)]),
                sub(2, &[(2, 2, 2)]),
                sub(3, &[(2, 2, 3)]),
            ],
        );
        let edges: Vec<(usize, usize)> = dependencies(&chain)
            .iter()
            .map(|e| (e.dependent, e.prerequisite))
            .collect();
        assert_eq!(edges, vec![(2, 1), (3, 2)]);

        // S3 rests directly on S1 as well as on S2
        let direct = decomposition(
            d,
            vec![
                sub(1, &[(2, 2, 1), (3, 2, 1)]),
                sub(2, &[(2, 2, 2)]),
                sub(3, &[(2, 2, 3), (3, 2, 2)]),
            ],
        );
        let edges: Vec<(usize, usize)> = dependencies(&direct)
            .iter()
            .map(|e| (e.dependent, e.prerequisite))
            .collect();
        assert_eq!(edges, vec![(2, 1), (3, 1), (3, 2)]);
    }

    #[test]
    fn independent_substructures_share_one_stage() {
        let d = dims(9, 9, 3);
        let subs = vec![
            sub(1, &[(1, 1, 1)]),
            sub(2, &[(4, 4, 1)]),
            sub(3, &[(7, 7, 1)]),
        ];
        let p = parallel_schedule(&decomposition(d, subs));
        assert_eq!(p.stages, vec![vec![1, 2, 3]]);
    }

    #[test]
    fn chain_gives_singleton_stages() {
        let d = dims(6, 6, 4);
        let chain = decomposition(
            d,
            vec![
                sub(1, &[(2, 2, 1), (2, 3, 1)]),
                sub(2, &[(2, 2, 2)]),
                sub(3, &[(2, 2, 3), (2, 3, 2)]),
            ],
        );
        let p = parallel_schedule(&chain);
        assert_eq!(p.stages, vec![vec![1], vec![2], vec![3]]);
        let o = order_substructures(&chain);
        assert_eq!(o.sequence, p.flatten());
    }

    #[test]
    fn two_independent_pairs_give_two_stages() {
        let d = dims(9, 9, 3);
        let subs = vec![
            sub(1, &[(1, 1, 1), (1, 2, 1)]),
            sub(2, &[(6, 6, 1), (6, 7, 1)]),
            sub(3, &[(1, 1, 2)]),
            sub(4, &[(6, 6, 2)]),
        ];
        let p = parallel_schedule(&decomposition(d, subs));
        assert_eq!(p.stages, vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn courtyard_is_filled_before_its_wall() {
        let d = dims(7, 7, 3);
        let mut wall = Vec::new();
        for x in 1..=5 {
            for y in 1..=5 {
                if x == 1 || x == 5 || y == 1 || y == 5 {
                    wall.push((x, y, 1));
                    wall.push((x, y, 2));
                }
            }
        }
        let dec = decomposition(d, vec![sub(1, &[(3, 3, 1)]), sub(2, &wall)]);
        let o = order_substructures(&dec);
        assert!(o.merges.is_empty());
        assert_eq!(o.sequence, vec![1, 2]);
    }

    #[test]
    fn mutual_cover_forces_a_merge() {
        let d = dims(5, 5, 3);
        let dec = decomposition(
            d,
            vec![sub(1, &[(2, 2, 1), (1, 2, 2)]), sub(2, &[(1, 2, 1), (2, 2, 2)])],
        );
        let o = order_substructures(&dec);
        assert_eq!(
            o.merges,
            vec![MergeEvent {
                kept: 1,
                absorbed: 2,
                pass: 1
            }]
        );
        assert_eq!(o.sequence, vec![1]);
        assert_eq!(o.substructures[0].blocks.len(), 4);
    }

    #[test]
    fn dense_corpus_regressions_stay_feasible() {
        use crate::world::{generate_random_structure, OccupancyBand};
        // 3261: a block only reachable from a pit its own placement seals off
        // 3286: simultaneous removal rounds strand before the sequential order does
        let d = dims(7, 7, 4);
        for seed in [3261, 3286] {
            let m = generate_random_structure(d, OccupancyBand::new(61.0, 85.0), seed).unwrap();
            let dec = decompose(&m);
            let order = order_substructures(&dec);
            let seq: Vec<_> = order.in_order().collect();
            assert_eq!(check_sequence(d, &seq), Ok(()), "seed {seed}");
            let par = parallel_schedule(&dec);
            let flat: Vec<_> = par.flatten().iter().map(|&i| par.get(i).unwrap()).collect();
            assert_eq!(check_sequence(d, &flat), Ok(()), "seed {seed}");
        }
    }
}
