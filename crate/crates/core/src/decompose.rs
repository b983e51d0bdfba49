//! Shadow regions and the basin-of-attraction decomposition.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::world::{union_heightmap, BlockCell, BlockSet, GridDims, HeightMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tower {
    pub x: usize,
    pub y: usize,
    pub height: usize,
}

/// A block set claimed by one tower. Indices are 1-based in discovery order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substructure {
    pub index: usize,
    pub anchor: Tower,
    pub blocks: BlockSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub substructures: Vec<Substructure>,
    pub source: HeightMap,
}

/// Every cell `(x', y', z')` with `d = |x-x'| + |y-y'| < h` and `1 <= z' <= h - d`,
/// clipped to the grid.
pub fn shadow_region(tower: Tower, dims: GridDims) -> BlockSet {
    let h = tower.height as i64;
    let mut out = BlockSet::new();
    if h == 0 {
        return out;
    }
    for dx in -(h - 1)..=(h - 1) {
        for dy in -(h - 1)..=(h - 1) {
            let d = dx.abs() + dy.abs();
            if d >= h {
                continue;
            }
            let (x, y) = (tower.x as i64 + dx, tower.y as i64 + dy);
            if !dims.contains(x, y) {
                continue;
            }
            for z in 1..=(h - d) {
                out.insert(BlockCell::new(x as usize, y as usize, z as usize));
            }
        }
    }
    out
}

/// Nonzero columns by decreasing height; ties go to the smaller `(x, y)`.
pub fn towers(map: &HeightMap) -> Vec<Tower> {
    let dims = map.dims();
    let mut towers: Vec<Tower> = (0..dims.cells())
        .filter(|&i| map.at(i) > 0)
        .map(|i| {
            let (x, y) = dims.coords(i);
            Tower {
                x,
                y,
                height: map.at(i) as usize,
            }
        })
        .collect();
    towers.sort_by(|a, b| b.height.cmp(&a.height).then((a.x, a.y).cmp(&(b.x, b.y))));
    towers
}

pub fn decompose(map: &HeightMap) -> Decomposition {
    let dims = map.dims();
    let mut claimed: HashMap<BlockCell, usize> = HashMap::new();
    let mut substructures: Vec<Substructure> = Vec::new();

    for tower in towers(map) {
        let top = BlockCell::new(tower.x, tower.y, tower.height);
        if claimed.contains_key(&top) {
            continue;
        }
        let index = substructures.len() + 1;
        let blocks: BlockSet = shadow_region(tower, dims)
            .iter()
            .filter(|b| b.z as u32 <= map.get(b.x, b.y) && !claimed.contains_key(b))
            .copied()
            .collect();
        for b in &blocks {
            claimed.insert(*b, index);
        }
        substructures.push(Substructure {
            index,
            anchor: tower,
            blocks,
        });
    }

    Decomposition {
        substructures,
        source: map.clone(),
    }
}

/// True when every prefix union of the substructures, in list order, is a valid structure.
pub fn verify_valid_prefixes(d: &Decomposition) -> bool {
    let mut union = BlockSet::new();
    d.substructures.iter().all(|s| {
        union.extend(&s.blocks);
        union.is_valid_structure()
    })
}

impl Decomposition {
    pub fn dims(&self) -> GridDims {
        self.source.dims()
    }

    pub fn len(&self) -> usize {
        self.substructures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.substructures.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Substructure> {
        self.substructures.iter().find(|s| s.index == index)
    }

    /// Checks that the substructures partition the source blocks.
    pub fn is_partition(&self) -> bool {
        let total: usize = self.substructures.iter().map(|s| s.blocks.len()).sum();
        let mut union = BlockSet::new();
        for s in &self.substructures {
            union.extend(&s.blocks);
        }
        total == union.len() && union == self.source.to_block_set()
    }

    pub fn union_heightmap(&self) -> Result<HeightMap, crate::world::WorldError> {
        union_heightmap(self.dims(), self.substructures.iter().map(|s| &s.blocks))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            dims: [usize; 3],
            substructures: &'a [Substructure],
        }
        let d = self.dims();
        serde_json::to_string_pretty(&Doc {
            dims: [d.x_size, d.y_size, d.z_size],
            substructures: &self.substructures,
        })
        .expect("decomposition serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(x: usize, y: usize, z: usize) -> GridDims {
        GridDims::new(x, y, z).unwrap()
    }

    /// Direct enumeration of the shadow inequality over the whole grid.
    fn shadow_brute(t: Tower, d: GridDims) -> BlockSet {
        let mut out = BlockSet::new();
        for x in 0..d.x_size {
            for y in 0..d.y_size {
                for z in 1..=d.z_size.max(t.height) {
                    let dist = x.abs_diff(t.x) + y.abs_diff(t.y);
                    if dist < t.height && z + dist <= t.height {
                        out.insert(BlockCell::new(x, y, z));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn shadow_examples() {
        let big = dims(20, 20, 5);
        let s = shadow_region(Tower { x: 3, y: 3, height: 1 }, big);
        assert_eq!(s.len(), 1);
        assert!(s.contains(&BlockCell::new(3, 3, 1)));

        let s = shadow_region(Tower { x: 5, y: 5, height: 3 }, big);
        assert_eq!(s.len(), 19);
        assert_eq!(s.iter().filter(|b| (b.x, b.y) == (5, 5)).count(), 3);
        assert_eq!(s.iter().filter(|b| (b.x, b.y) == (6, 5)).count(), 2);
        assert_eq!(s.iter().filter(|b| (b.x, b.y) == (7, 5)).count(), 1);
        assert_eq!(s.iter().filter(|b| (b.x, b.y) == (6, 6)).count(), 1);

        let s = shadow_region(Tower { x: 0, y: 0, height: 2 }, dims(10, 10, 4));
        let expected: BlockSet = [(0, 0, 1), (0, 0, 2), (1, 0, 1), (0, 1, 1)]
            .into_iter()
            .map(|(x, y, z)| BlockCell::new(x, y, z))
            .collect();
        assert_eq!(s, expected);
    }

    #[test]
    fn shadow_matches_enumeration() {
        let d = dims(6, 5, 4);
        for x in 0..6 {
            for y in 0..5 {
                for h in 1..=4 {
                    let t = Tower { x, y, height: h };
                    assert_eq!(shadow_region(t, d), shadow_brute(t, d), "{t:?}");
                }
            }
        }
    }

    #[test]
    fn single_tower_is_one_substructure() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 2).unwrap();
        let d = decompose(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d.substructures[0].blocks.len(), 2);
        assert!(verify_valid_prefixes(&d));
    }

    #[test]
    fn adjacent_equal_towers_split_by_tie_break() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 2).unwrap();
        m.set(2, 3, 2).unwrap();
        let d = decompose(&m);
        assert_eq!(d.len(), 2);
        let first: Vec<_> = d.substructures[0].blocks.iter().map(|b| (b.x, b.y, b.z)).collect();
        assert_eq!(first, vec![(2, 2, 1), (2, 2, 2), (2, 3, 1)]);
        let second: Vec<_> = d.substructures[1].blocks.iter().map(|b| (b.x, b.y, b.z)).collect();
        assert_eq!(second, vec![(2, 3, 2)]);
        assert_eq!(d.substructures[1].anchor, Tower { x: 2, y: 3, height: 2 });
        assert!(d.is_partition());
        assert!(verify_valid_prefixes(&d));
    }

    #[test]
    fn reversed_stacked_order_is_invalid() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 2).unwrap();
        m.set(2, 3, 2).unwrap();
        let mut d = decompose(&m);
        d.substructures.reverse();
        assert!(!verify_valid_prefixes(&d));
    }

    #[test]
    fn dominated_columns_are_skipped() {
        let mut m = HeightMap::empty(dims(5, 5, 3));
        m.set(2, 2, 3).unwrap();
        m.set(2, 3, 2).unwrap();
        m.set(1, 2, 1).unwrap();
        let d = decompose(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d.substructures[0].blocks.len(), 6);
    }
}
