//! Cell workspace: a rectangular grid of equal cells, some of them land.
//!
//! Cells are numbered row-major starting at the south-west corner, so row 0 is
//! the southernmost row and moving "north" increases the row. Indices are
//! zero-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(pub usize);

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Compass reading: one of the eight headings or idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
    #[serde(rename = "I")]
    Idle,
}

impl Direction {
    pub const ALL: [Direction; 9] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
        Direction::Idle,
    ];

    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Self::ALL.get(i).copied()
    }

    /// Grid displacement as `(drow, dcol)`.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::N => (1, 0),
            Direction::NE => (1, 1),
            Direction::E => (0, 1),
            Direction::SE => (-1, 1),
            Direction::S => (-1, 0),
            Direction::SW => (-1, -1),
            Direction::W => (0, -1),
            Direction::NW => (1, -1),
            Direction::Idle => (0, 0),
        }
    }

    pub fn from_offset(drow: isize, dcol: isize) -> Option<Direction> {
        Self::ALL.into_iter().find(|d| d.offset() == (drow, dcol))
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::N => "N",
            Direction::NE => "NE",
            Direction::E => "E",
            Direction::SE => "SE",
            Direction::S => "S",
            Direction::SW => "SW",
            Direction::W => "W",
            Direction::NW => "NW",
            Direction::Idle => "I",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.symbol() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown compass symbol {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    rows: usize,
    cols: usize,
    /// Geographic center (lon, lat) of cell 0.
    origin: (f64, f64),
    /// Cell extent (dlon, dlat) in degrees.
    cell_size: (f64, f64),
    land: Vec<bool>,
    free: Vec<CellIndex>,
    state_of: Vec<Option<usize>>,
}

impl Workspace {
    pub fn new(rows: usize, cols: usize, origin: (f64, f64), cell_size: (f64, f64), land: Vec<bool>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Dimension(format!("grid must be at least 2x2, got {rows}x{cols}")));
        }
        if land.len() != rows * cols {
            return Err(Error::Dimension(format!("land mask has {} entries, expected {}", land.len(), rows * cols)));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::Parameter("origin must be finite".into()));
        }
        if !(cell_size.0 > 0.0 && cell_size.1 > 0.0 && cell_size.0.is_finite() && cell_size.1.is_finite()) {
            return Err(Error::Parameter("cell size must be positive and finite".into()));
        }
        let mut free = Vec::new();
        let mut state_of = vec![None; land.len()];
        for (i, &is_land) in land.iter().enumerate() {
            if !is_land {
                state_of[i] = Some(free.len());
                free.push(CellIndex(i));
            }
        }
        if free.is_empty() {
            return Err(Error::Dimension("workspace has no water cells".into()));
        }
        Ok(Workspace { rows, cols, origin, cell_size, land, free, state_of })
    }

    /// All-water grid with unit cells at the origin.
    pub fn open(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, (0.0, 0.0), (1.0, 1.0), vec![false; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> (f64, f64) {
        self.cell_size
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn land_mask(&self) -> &[bool] {
        &self.land
    }

    /// Water cells in ascending index order; position in this list is the state id.
    pub fn free_cells(&self) -> &[CellIndex] {
        &self.free
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// State id of a water cell, `None` for land.
    pub fn state_of(&self, z: CellIndex) -> Option<usize> {
        self.state_of.get(z.0).copied().flatten()
    }

    pub fn cell_of_state(&self, s: usize) -> CellIndex {
        self.free[s]
    }

    pub fn check(&self, z: CellIndex) -> Result<()> {
        if z.0 < self.num_cells() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: z.0, cells: self.num_cells() })
        }
    }

    pub fn check_water(&self, z: CellIndex) -> Result<()> {
        self.check(z)?;
        if self.land[z.0] {
            Err(Error::LandCell(z))
        } else {
            Ok(())
        }
    }

    pub fn is_land(&self, z: CellIndex) -> bool {
        self.land.get(z.0).copied().unwrap_or(true)
    }

    pub fn index(&self, row: usize, col: usize) -> Option<CellIndex> {
        (row < self.rows && col < self.cols).then(|| CellIndex(row * self.cols + col))
    }

    pub fn row_col(&self, z: CellIndex) -> (usize, usize) {
        (z.0 / self.cols, z.0 % self.cols)
    }

    /// Cell center in continuous grid coordinates `(x = col, y = row)`.
    pub fn center(&self, z: CellIndex) -> (f64, f64) {
        let (r, c) = self.row_col(z);
        (c as f64, r as f64)
    }

    /// Geographic center `(lon, lat)`.
    pub fn geo_center(&self, z: CellIndex) -> (f64, f64) {
        let (r, c) = self.row_col(z);
        (self.origin.0 + c as f64 * self.cell_size.0, self.origin.1 + r as f64 * self.cell_size.1)
    }

    fn offset_cell(&self, z: CellIndex, drow: isize, dcol: isize) -> Option<CellIndex> {
        let (r, c) = self.row_col(z);
        let r2 = r.checked_add_signed(drow)?;
        let c2 = c.checked_add_signed(dcol)?;
        self.index(r2, c2)
    }

    /// Water cells of the Moore neighborhood of `z`, ascending, excluding `z`.
    pub fn neighbors(&self, z: CellIndex) -> Result<Vec<CellIndex>> {
        self.check(z)?;
        let mut out = Vec::with_capacity(8);
        for drow in -1..=1 {
            for dcol in -1..=1 {
                if drow == 0 && dcol == 0 {
                    continue;
                }
                if let Some(n) = self.offset_cell(z, drow, dcol) {
                    if !self.land[n.0] {
                        out.push(n);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `neighbors(z) ∪ {z}` in ascending order.
    pub fn closed_neighborhood(&self, z: CellIndex) -> Result<Vec<CellIndex>> {
        let mut cells = self.neighbors(z)?;
        if !self.land[z.0] {
            let pos = cells.partition_point(|c| *c < z);
            cells.insert(pos, z);
        }
        Ok(cells)
    }

    /// A cell on the grid edge or next to land. Such cells lack a full set of
    /// eight water neighbors.
    pub fn is_boundary(&self, z: CellIndex) -> Result<bool> {
        Ok(self.neighbors(z)?.len() < 8)
    }

    pub fn direction_between(&self, z: CellIndex, z2: CellIndex) -> Result<Direction> {
        self.check(z)?;
        self.check(z2)?;
        let (r1, c1) = self.row_col(z);
        let (r2, c2) = self.row_col(z2);
        let drow = r2 as isize - r1 as isize;
        let dcol = c2 as isize - c1 as isize;
        if drow.abs() > 1 || dcol.abs() > 1 || (z != z2 && self.land[z2.0]) {
            return Err(Error::NonAdjacentCells { from: z, to: z2 });
        }
        Ok(Direction::from_offset(drow, dcol).expect("offset within the Moore neighborhood"))
    }

    /// Cell reached by stepping from `z` in direction `d`, if it is on the grid.
    pub fn step(&self, z: CellIndex, d: Direction) -> Option<CellIndex> {
        let (dr, dc) = d.offset();
        self.offset_cell(z, dr, dc)
    }

    /// Euclidean distance between cell centers, in cell units.
    pub fn cell_distance(&self, z: CellIndex, z2: CellIndex) -> Result<f64> {
        self.check(z)?;
        self.check(z2)?;
        let (x1, y1) = self.center(z);
        let (x2, y2) = self.center(z2);
        Ok((x1 - x2).hypot(y1 - y2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with_land(rows: usize, cols: usize, land: &[(usize, usize)]) -> Workspace {
        let mut mask = vec![false; rows * cols];
        for &(r, c) in land {
            mask[r * cols + c] = true;
        }
        Workspace::new(rows, cols, (0.0, 0.0), (1.0, 1.0), mask).unwrap()
    }

    #[test]
    fn moore_neighborhood_sizes() {
        let w = Workspace::open(3, 3).unwrap();
        assert_eq!(w.neighbors(CellIndex(4)).unwrap().len(), 8);
        assert_eq!(w.neighbors(CellIndex(0)).unwrap(), vec![CellIndex(1), CellIndex(3), CellIndex(4)]);
        let w = grid_with_land(3, 3, &[(1, 2)]);
        let n = w.neighbors(CellIndex(4)).unwrap();
        assert_eq!(n.len(), 7);
        assert!(!n.contains(&CellIndex(5)));
        assert!(!n.contains(&CellIndex(4)));
    }

    #[test]
    fn out_of_range_index() {
        let w = Workspace::open(3, 3).unwrap();
        assert_eq!(w.neighbors(CellIndex(9)), Err(Error::IndexOutOfRange { index: 9, cells: 9 }));
    }

    #[test]
    fn directions() {
        let w = Workspace::open(3, 3).unwrap();
        let c = CellIndex(4);
        assert_eq!(w.direction_between(c, CellIndex(7)).unwrap(), Direction::N);
        assert_eq!(w.direction_between(c, c).unwrap(), Direction::Idle);
        assert_eq!(w.direction_between(c, CellIndex(8)).unwrap(), Direction::NE);
        assert_eq!(w.direction_between(c, CellIndex(0)).unwrap(), Direction::SW);
        let w5 = Workspace::open(5, 5).unwrap();
        assert!(matches!(w5.direction_between(CellIndex(0), CellIndex(2)), Err(Error::NonAdjacentCells { .. })));
    }

    #[test]
    fn distances() {
        let w = Workspace::open(3, 3).unwrap();
        assert_eq!(w.cell_distance(CellIndex(4), CellIndex(4)).unwrap(), 0.0);
        assert_eq!(w.cell_distance(CellIndex(3), CellIndex(4)).unwrap(), 1.0);
        assert!((w.cell_distance(CellIndex(0), CellIndex(4)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn boundary_cells() {
        let w = grid_with_land(5, 5, &[(2, 3)]);
        assert!(w.is_boundary(CellIndex(0)).unwrap());
        assert!(w.is_boundary(CellIndex(12)).unwrap());
        assert!(!w.is_boundary(CellIndex(6)).unwrap());
    }

    #[test]
    fn symbols_round_trip() {
        for d in Direction::ALL {
            assert_eq!(d.symbol().parse::<Direction>().unwrap(), d);
            assert_eq!(Direction::from_offset(d.offset().0, d.offset().1), Some(d));
        }
        assert!("X".parse::<Direction>().is_err());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Workspace::open(1, 5).is_err());
        assert!(Workspace::new(2, 2, (0.0, 0.0), (1.0, 1.0), vec![true; 4]).is_err());
    }
}
