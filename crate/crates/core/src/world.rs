//! Grid dimensions, heightmaps, block sets and the structure file formats.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("grid dimensions must be positive, got {0}x{1}x{2}")]
    InvalidDims(usize, usize, usize),
    #[error("height {height} at ({x},{y}) exceeds z_size {z_size}")]
    HeightOverflow {
        x: usize,
        y: usize,
        height: i64,
        z_size: usize,
    },
    #[error("negative height {height} at ({x},{y})")]
    NegativeHeight { x: usize, y: usize, height: i64 },
    #[error("cell ({x},{y}) is outside the grid")]
    OutOfBounds { x: usize, y: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block ({x},{y},{z}) has no support beneath it")]
    Unsupported { x: usize, y: usize, z: usize },
    #[error("occupancy band ({lo}%, {hi}%) is invalid")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("occupancy band ({lo}%, {hi}%) admits no non-empty structure in {dims}")]
    BandUnreachable { lo: f64, hi: f64, dims: GridDims },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Compass directions on the (x, y) plane. North is +y, east is +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir {
    N,
    S,
    E,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::S, Dir::E, Dir::W];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Dir::N => (0, 1),
            Dir::S => (0, -1),
            Dir::E => (1, 0),
            Dir::W => (-1, 0),
        }
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::N => Dir::S,
            Dir::S => Dir::N,
            Dir::E => Dir::W,
            Dir::W => Dir::E,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Dir::N => 'N',
            Dir::S => 'S',
            Dir::E => 'E',
            Dir::W => 'W',
        }
    }

    pub fn from_char(c: char) -> Option<Dir> {
        match c {
            'N' => Some(Dir::N),
            'S' => Some(Dir::S),
            'E' => Some(Dir::E),
            'W' => Some(Dir::W),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub x_size: usize,
    pub y_size: usize,
    pub z_size: usize,
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x_size, self.y_size, self.z_size)
    }
}

impl GridDims {
    pub fn new(x_size: usize, y_size: usize, z_size: usize) -> Result<Self, WorldError> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(WorldError::InvalidDims(x_size, y_size, z_size));
        }
        Ok(GridDims {
            x_size,
            y_size,
            z_size,
        })
    }

    /// Number of (x, y) columns.
    pub fn cells(&self) -> usize {
        self.x_size * self.y_size
    }

    /// Number of block cells, x·y·z.
    pub fn volume(&self) -> usize {
        self.cells() * self.z_size
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.x_size && (y as usize) < self.y_size
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.x_size && y < self.y_size);
        y * self.x_size + x
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.x_size, idx / self.x_size)
    }

    pub fn is_border(&self, x: usize, y: usize) -> bool {
        x == 0 || y == 0 || x + 1 == self.x_size || y + 1 == self.y_size
    }

    /// Number of moves from the nearest border cell; zero on the border.
    pub fn border_distance(&self, x: usize, y: usize) -> usize {
        x.min(y)
            .min(self.x_size - 1 - x)
            .min(self.y_size - 1 - y)
    }

    /// The neighbour of `(x, y)` in direction `dir`, if it lies inside the grid.
    pub fn step(&self, x: usize, y: usize, dir: Dir) -> Option<(usize, usize)> {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        self.contains(nx, ny).then(|| (nx as usize, ny as usize))
    }

    /// In-grid 4-neighbours together with the direction leading to them.
    pub fn neighbors(&self, x: usize, y: usize) -> impl Iterator<Item = (Dir, usize, usize)> + '_ {
        Dir::ALL
            .into_iter()
            .filter_map(move |d| self.step(x, y, d).map(|(nx, ny)| (d, nx, ny)))
    }

    /// Direction from `from` to an adjacent cell `to`.
    pub fn direction(&self, from: (usize, usize), to: (usize, usize)) -> Option<Dir> {
        Dir::ALL
            .into_iter()
            .find(|&d| self.step(from.0, from.1, d) == Some(to))
    }
}

/// A single block, 0-based in x and y, 1-based in z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockCell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl BlockCell {
    pub fn new(x: usize, y: usize, z: usize) -> Self {
        BlockCell { x, y, z }
    }

    pub fn below(&self) -> Option<BlockCell> {
        (self.z > 1).then(|| BlockCell::new(self.x, self.y, self.z - 1))
    }

    pub fn above(&self) -> BlockCell {
        BlockCell::new(self.x, self.y, self.z + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockSet {
    blocks: BTreeSet<BlockCell>,
}

impl BlockSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, b: BlockCell) -> bool {
        self.blocks.insert(b)
    }

    pub fn remove(&mut self, b: &BlockCell) -> bool {
        self.blocks.remove(b)
    }

    pub fn contains(&self, b: &BlockCell) -> bool {
        self.blocks.contains(b)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BlockCell> + '_ {
        self.blocks.iter()
    }

    pub fn extend<'a>(&mut self, other: impl IntoIterator<Item = &'a BlockCell>) {
        self.blocks.extend(other.into_iter().copied());
    }

    pub fn is_disjoint(&self, other: &BlockSet) -> bool {
        self.blocks.is_disjoint(&other.blocks)
    }

    /// Distinct (x, y) columns touched by the set.
    pub fn columns(&self) -> BTreeSet<(usize, usize)> {
        self.blocks.iter().map(|b| (b.x, b.y)).collect()
    }

    pub fn is_valid_structure(&self) -> bool {
        is_valid_structure(self)
    }
}

impl FromIterator<BlockCell> for BlockSet {
    fn from_iter<I: IntoIterator<Item = BlockCell>>(iter: I) -> Self {
        BlockSet {
            blocks: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a BlockSet {
    type Item = &'a BlockCell;
    type IntoIter = std::collections::btree_set::Iter<'a, BlockCell>;

    fn into_iter(self) -> Self::IntoIter {
        self.blocks.iter()
    }
}

/// Every block above level 1 rests on a block of the same set.
pub fn is_valid_structure(blocks: &BlockSet) -> bool {
    blocks
        .iter()
        .all(|b| b.below().map_or(true, |s| blocks.contains(&s)))
}

/// Per-column topmost-block heights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeightMap {
    dims: GridDims,
    heights: Vec<u32>,
}

impl HeightMap {
    pub fn empty(dims: GridDims) -> Self {
        HeightMap {
            dims,
            heights: vec![0; dims.cells()],
        }
    }

    /// Builds a map from rows indexed `rows[y][x]`.
    pub fn from_rows(dims: GridDims, rows: &[Vec<i64>]) -> Result<Self, WorldError> {
        if rows.len() != dims.y_size {
            return Err(WorldError::DimensionMismatch(format!(
                "expected {} rows, found {}",
                dims.y_size,
                rows.len()
            )));
        }
        let mut map = HeightMap::empty(dims);
        for (y, row) in rows.iter().enumerate() {
            if row.len() != dims.x_size {
                return Err(WorldError::DimensionMismatch(format!(
                    "row {y} has {} entries, expected {}",
                    row.len(),
                    dims.x_size
                )));
            }
            for (x, &h) in row.iter().enumerate() {
                map.set_checked(x, y, h)?;
            }
        }
        Ok(map)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.heights[self.dims.index(x, y)]
    }

    pub fn at(&self, idx: usize) -> u32 {
        self.heights[idx]
    }

    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    pub fn set(&mut self, x: usize, y: usize, h: u32) -> Result<(), WorldError> {
        self.set_checked(x, y, h as i64)
    }

    fn set_checked(&mut self, x: usize, y: usize, h: i64) -> Result<(), WorldError> {
        if x >= self.dims.x_size || y >= self.dims.y_size {
            return Err(WorldError::OutOfBounds { x, y });
        }
        if h < 0 {
            return Err(WorldError::NegativeHeight { x, y, height: h });
        }
        if h as usize > self.dims.z_size {
            return Err(WorldError::HeightOverflow {
                x,
                y,
                height: h,
                z_size: self.dims.z_size,
            });
        }
        let idx = self.dims.index(x, y);
        self.heights[idx] = h as u32;
        Ok(())
    }

    pub(crate) fn set_at(&mut self, idx: usize, h: u32) {
        debug_assert!(h as usize <= self.dims.z_size);
        self.heights[idx] = h;
    }

    pub fn total_blocks(&self) -> usize {
        self.heights.iter().map(|&h| h as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.iter().all(|&h| h == 0)
    }

    pub fn max_height(&self) -> u32 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// Columns filled from level 1 up to their height.
    pub fn to_block_set(&self) -> BlockSet {
        let mut set = BlockSet::new();
        for (idx, &h) in self.heights.iter().enumerate() {
            let (x, y) = self.dims.coords(idx);
            for z in 1..=h as usize {
                set.insert(BlockCell::new(x, y, z));
            }
        }
        set
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.heights
            .chunks(self.dims.x_size)
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn occupancy(&self) -> Occupancy {
        occupancy(self)
    }
}

/// Blocks over block cells, kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub blocks: usize,
    pub volume: usize,
}

impl Occupancy {
    pub fn as_f64(&self) -> f64 {
        self.blocks as f64 / self.volume as f64
    }
}

pub fn occupancy(map: &HeightMap) -> Occupancy {
    Occupancy {
        blocks: map.total_blocks(),
        volume: map.dims().volume(),
    }
}

/// Stacks the union of `parts` into a heightmap. Columns with a gap are rejected.
pub fn union_heightmap<'a>(
    dims: GridDims,
    parts: impl IntoIterator<Item = &'a BlockSet>,
) -> Result<HeightMap, WorldError> {
    let mut levels: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dims.cells()];
    for part in parts {
        for b in part {
            if b.x >= dims.x_size || b.y >= dims.y_size {
                return Err(WorldError::OutOfBounds { x: b.x, y: b.y });
            }
            if b.z == 0 || b.z > dims.z_size {
                return Err(WorldError::HeightOverflow {
                    x: b.x,
                    y: b.y,
                    height: b.z as i64,
                    z_size: dims.z_size,
                });
            }
            levels[dims.index(b.x, b.y)].insert(b.z);
        }
    }
    let mut map = HeightMap::empty(dims);
    for (idx, col) in levels.iter().enumerate() {
        let top = col.iter().next_back().copied().unwrap_or(0);
        if col.len() != top {
            let (x, y) = dims.coords(idx);
            let z = (1..=top).rev().find(|z| col.contains(z) && !col.contains(&(z - 1)) && *z > 1);
            return Err(WorldError::Unsupported {
                x,
                y,
                z: z.unwrap_or(top),
            });
        }
        map.set_at(idx, top as u32);
    }
    Ok(map)
}

#[derive(Serialize, Deserialize)]
struct StructureDoc {
    dims: [usize; 3],
    heights: Vec<Vec<i64>>,
}

impl HeightMap {
    /// Plain-text form: `dims X Y Z`, then one row of X heights per y.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dims {} {} {}\n",
            self.dims.x_size, self.dims.y_size, self.dims.z_size
        );
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|h| h.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, WorldError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(WorldError::Parse {
            line: 1,
            msg: "empty structure file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "dims" {
            return Err(WorldError::Parse {
                line: hline + 1,
                msg: format!("expected `dims X Y Z`, found `{header}`"),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| WorldError::Parse {
                line: hline + 1,
                msg: format!("bad dimension `{s}`: {e}"),
            })
        };
        let dims = GridDims::new(
            parse_dim(fields[1])?,
            parse_dim(fields[2])?,
            parse_dim(fields[3])?,
        )?;
        let mut rows = Vec::with_capacity(dims.y_size);
        for (ln, line) in lines {
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>().map_err(|e| WorldError::Parse {
                        line: ln + 1,
                        msg: format!("bad height `{tok}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        HeightMap::from_rows(dims, &rows)
    }

    pub fn to_json(&self) -> String {
        let doc = StructureDoc {
            dims: [self.dims.x_size, self.dims.y_size, self.dims.z_size],
            heights: self
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(i64::from).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("structure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let doc: StructureDoc = serde_json::from_str(text)?;
        let dims = GridDims::new(doc.dims[0], doc.dims[1], doc.dims[2])?;
        HeightMap::from_rows(dims, &doc.heights)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a structure; `.json` files use the structured form, anything else the text grid.
pub fn load_structure(path: impl AsRef<Path>) -> Result<HeightMap, WorldError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if is_json(path) {
        HeightMap::from_json(&text)
    } else {
        HeightMap::from_text(&text)
    }
}

pub fn save_structure(map: &HeightMap, path: impl AsRef<Path>) -> Result<(), WorldError> {
    let path = path.as_ref();
    let body = if is_json(path) {
        map.to_json()
    } else {
        map.to_text()
    };
    fs::write(path, body)?;
    Ok(())
}

/// Target occupancy range in percent, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyBand {
    pub lo: f64,
    pub hi: f64,
}

impl OccupancyBand {
    pub fn new(lo: f64, hi: f64) -> Self {
        OccupancyBand { lo, hi }
    }

    /// Inclusive range of block counts whose occupancy falls in the band.
    pub fn block_range(&self, dims: GridDims) -> Result<(usize, usize), WorldError> {
        if !(0.0..=100.0).contains(&self.lo) || !(0.0..=100.0).contains(&self.hi) || self.lo >= self.hi
        {
            return Err(WorldError::InvalidBand {
                lo: self.lo,
                hi: self.hi,
            });
        }
        let volume = dims.volume() as f64;
        let lo = ((self.lo * volume) / 100.0 - 1e-9).ceil().max(1.0) as usize;
        let hi = ((self.hi * volume) / 100.0 + 1e-9).floor() as usize;
        if lo > hi {
            return Err(WorldError::BandUnreachable {
                lo: self.lo,
                hi: self.hi,
                dims,
            });
        }
        Ok((lo, hi))
    }

    pub fn contains(&self, occ: Occupancy) -> bool {
        let pct = occ.as_f64() * 100.0;
        pct >= self.lo - 1e-9 && pct <= self.hi + 1e-9
    }
}

/// Seeded random heightmap whose occupancy falls inside `band`.
///
/// A block count is drawn from the band, column heights are drawn uniformly and then
/// nudged one block at a time until they sum to that count, and finally the columns are
/// shuffled. Full columns keep every result a valid structure.
pub fn generate_random_structure(
    dims: GridDims,
    band: OccupancyBand,
    seed: u64,
) -> Result<HeightMap, WorldError> {
    let (lo, hi) = band.block_range(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(lo..=hi);
    let z = dims.z_size as u32;
    let mut heights: Vec<u32> = (0..dims.cells()).map(|_| rng.gen_range(0..=z)).collect();
    let mut total: usize = heights.iter().map(|&h| h as usize).sum();
    while total != target {
        let i = rng.gen_range(0..heights.len());
        if total > target && heights[i] > 0 {
            heights[i] -= 1;
            total -= 1;
        } else if total < target && heights[i] < z {
            heights[i] += 1;
            total += 1;
        }
    }
    heights.shuffle(&mut rng);
    Ok(HeightMap { dims, heights })
}

/// Occupancy band of the `i`-th benchmark structure: a quarter sparse (below 40%), half in
/// 40–60%, a quarter dense (above 60%), interleaved so any prefix keeps roughly that mix.
pub fn corpus_band(i: usize) -> OccupancyBand {
    match i % 4 {
        0 => OccupancyBand::new(10.0, 39.0),
        3 => OccupancyBand::new(61.0, 85.0),
        _ => OccupancyBand::new(40.0, 60.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cells: &[(usize, usize, usize)]) -> BlockSet {
        cells.iter().map(|&(x, y, z)| BlockCell::new(x, y, z)).collect()
    }

    fn dims(x: usize, y: usize, z: usize) -> GridDims {
        GridDims::new(x, y, z).unwrap()
    }

    #[test]
    fn validity_examples() {
        assert!(is_valid_structure(&BlockSet::new()));
        assert!(is_valid_structure(&set(&[(2, 2, 1), (2, 2, 2)])));
        assert!(!is_valid_structure(&set(&[(2, 2, 2)])));
    }

    #[test]
    fn union_examples() {
        let d = dims(3, 3, 3);
        let m = union_heightmap(d, [&set(&[(0, 0, 1)])]).unwrap();
        assert_eq!(m.get(0, 0), 1);
        assert_eq!(m.total_blocks(), 1);

        let m = union_heightmap(d, [&set(&[(1, 1, 1)]), &set(&[(1, 1, 2)])]).unwrap();
        assert_eq!(m.get(1, 1), 2);

        let err = union_heightmap(d, [&set(&[(1, 1, 2)])]).unwrap_err();
        assert!(matches!(err, WorldError::Unsupported { x: 1, y: 1, z: 2 }));
    }

    #[test]
    fn text_parse_rejects_bad_heights() {
        assert!(matches!(
            HeightMap::from_text("dims 2 1 4\n5 0\n"),
            Err(WorldError::HeightOverflow { height: 5, .. })
        ));
        assert!(matches!(
            HeightMap::from_text("dims 2 1 4\n-1 0\n"),
            Err(WorldError::NegativeHeight { .. })
        ));
        assert!(matches!(
            HeightMap::from_text("dims 2 2 4\n1 0\n"),
            Err(WorldError::DimensionMismatch(_))
        ));
        assert!(matches!(
            HeightMap::from_text("dims 2 1 4\n1 0 3\n"),
            Err(WorldError::DimensionMismatch(_))
        ));
        assert!(matches!(
            HeightMap::from_text("size 2 1 4\n1 0\n"),
            Err(WorldError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn text_rows_are_y_major() {
        let m = HeightMap::from_text("dims 3 2 2\n0 1 2\n2 0 0\n").unwrap();
        assert_eq!(m.get(1, 0), 1);
        assert_eq!(m.get(2, 0), 2);
        assert_eq!(m.get(0, 1), 2);
        assert_eq!(m.to_text(), "dims 3 2 2\n0 1 2\n2 0 0\n");
    }

    #[test]
    fn occupancy_examples() {
        let d = dims(7, 7, 4);
        assert_eq!(occupancy(&HeightMap::empty(d)).as_f64(), 0.0);
        let full = HeightMap {
            dims: d,
            heights: vec![4; 49],
        };
        assert_eq!(occupancy(&full).as_f64(), 1.0);
        let mut m = HeightMap::empty(d);
        let mut left = 59u32;
        for idx in 0..49 {
            let h = left.min(4);
            m.set_at(idx, h);
            left -= h;
        }
        let occ = occupancy(&m);
        assert_eq!((occ.blocks, occ.volume), (59, 196));
        assert!((occ.as_f64() - 0.301).abs() < 1e-3);
    }

    #[test]
    fn generator_respects_band_and_seed() {
        let d = dims(7, 7, 4);
        let band = OccupancyBand::new(40.0, 60.0);
        for seed in 0..20 {
            let m = generate_random_structure(d, band, seed).unwrap();
            let occ = m.occupancy().as_f64();
            assert!((0.40..=0.60).contains(&occ), "seed {seed}: {occ}");
            assert!(is_valid_structure(&m.to_block_set()));
            assert_eq!(m, generate_random_structure(d, band, seed).unwrap());
        }
    }

    #[test]
    fn degenerate_bands_are_rejected() {
        let d = dims(7, 7, 4);
        assert!(matches!(
            generate_random_structure(d, OccupancyBand::new(0.0, 0.0), 1),
            Err(WorldError::InvalidBand { .. })
        ));
        assert!(matches!(
            generate_random_structure(d, OccupancyBand::new(60.0, 40.0), 1),
            Err(WorldError::InvalidBand { .. })
        ));
        // 2x1x1 has occupancies 0, 50 and 100 only
        assert!(matches!(
            generate_random_structure(dims(2, 1, 1), OccupancyBand::new(10.0, 40.0), 1),
            Err(WorldError::BandUnreachable { .. })
        ));
    }

    #[test]
    fn border_distance_and_neighbors() {
        let d = dims(5, 4, 2);
        assert_eq!(d.border_distance(0, 2), 0);
        assert_eq!(d.border_distance(2, 1), 1);
        assert_eq!(d.border_distance(2, 2), 1);
        assert_eq!(d.neighbors(0, 0).count(), 2);
        assert_eq!(d.neighbors(2, 2).count(), 4);
        assert_eq!(d.direction((1, 1), (1, 2)), Some(Dir::N));
    }
}
