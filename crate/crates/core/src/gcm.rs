//! Generalized cell-to-cell mapping: the stochastic one-step chain over water
//! cells and its decomposition into persistent groups (attractors) and
//! transient groups keyed by the attractors they can reach.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::CellMap;
use crate::grid::{CellIndex, Workspace};

const ROW_SUM_TOL: f64 = 1e-12;

/// Mapped-cell sets `A(z)` with their probabilities, one row per water cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticCellMap {
    r: f64,
    cells: Vec<CellIndex>,
    boundary: Vec<bool>,
    rows: Vec<Vec<(CellIndex, f64)>>,
}

impl StochasticCellMap {
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Water cells, in state order.
    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    /// `A(z)` with probabilities, ascending by cell, for state `s`.
    pub fn mapped_set(&self, s: usize) -> &[(CellIndex, f64)] {
        &self.rows[s]
    }

    pub fn is_boundary(&self, s: usize) -> bool {
        self.boundary[s]
    }
}

/// Adds motion uncertainty to the deterministic map.
///
/// Interior cells keep their Euler image with probability `r` and spread
/// `1 - r` evenly over the rest of their closed Moore neighborhood. Boundary
/// cells (grid edge or next to land) move uniformly within their closed
/// neighborhood. Zero-probability members are dropped, so `r = 1` gives a
/// singleton set for every interior cell.
pub fn build_stochastic_map(w: &Workspace, cm: &CellMap, r: f64) -> Result<StochasticCellMap> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Parameter(format!("perfect-motion probability must lie in (0, 1], got {r}")));
    }
    if cm.images().len() != w.num_cells() {
        return Err(Error::Dimension(format!(
            "cell map has {} entries, workspace has {}",
            cm.images().len(),
            w.num_cells()
        )));
    }
    let n = w.num_free();
    let mut rows = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for &z in w.free_cells() {
        let hood = w.closed_neighborhood(z)?;
        let is_boundary = hood.len() < 9;
        let row: Vec<(CellIndex, f64)> = if is_boundary {
            let p = 1.0 / hood.len() as f64;
            hood.iter().map(|&c| (c, p)).collect()
        } else {
            let image = cm.image(z).ok_or_else(|| Error::Inconsistent(format!("water cell {z} has no image")))?;
            if !hood.contains(&image) {
                return Err(Error::NonAdjacentCells { from: z, to: image });
            }
            let other = (1.0 - r) / (hood.len() - 1) as f64;
            hood.iter().map(|&c| (c, if c == image { r } else { other })).filter(|&(_, p)| p > 0.0).collect()
        };
        rows.push(row);
        boundary.push(is_boundary);
    }
    Ok(StochasticCellMap { r, cells: w.free_cells().to_vec(), boundary, rows })
}

/// Sparse row-stochastic matrix over states `0..n`. Each state is labelled
/// with the cell it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    cells: Vec<CellIndex>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit rows of `(state, probability)`. Rows must
    /// be stochastic and entries strictly positive.
    pub fn from_rows(cells: Vec<CellIndex>, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = cells.len();
        if rows.len() != n {
            return Err(Error::Dimension(format!("{} rows for {} states", rows.len(), n)));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Parameter(format!("row {i} repeats a column")));
            }
            if let Some(&(j, p)) = row.iter().find(|&&(j, p)| j >= n || !(p > 0.0) || !p.is_finite()) {
                return Err(Error::Parameter(format!("row {i} has invalid entry ({j}, {p})")));
            }
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Parameter(format!("row {i} sums to {sum}")));
            }
        }
        Ok(TransitionMatrix { cells, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].binary_search_by_key(&j, |&(k, _)| k).map(|pos| self.rows[i][pos].1).unwrap_or(0.0)
    }

    pub fn cell(&self, i: usize) -> CellIndex {
        self.cells[i]
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn state_of(&self, z: CellIndex) -> Option<usize> {
        self.cells.binary_search(&z).ok()
    }
}

pub fn transition_matrix(s: &StochasticCellMap) -> TransitionMatrix {
    let rows = s
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(c, p)| {
                    let j = s.cells.binary_search(&c).expect("mapped cells are water cells");
                    (j, p)
                })
                .collect()
        })
        .collect();
    TransitionMatrix { cells: s.cells.clone(), rows }
}

/// Tarjan's algorithm, iterative. Components come out sinks-first.
fn tarjan(p: &TransitionMatrix) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = p.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    // (node, position in its adjacency row)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let row = p.row(v);
            if *pos < row.len() {
                let w = row[*pos].0;
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Strongly connected components of the support graph of `p`, as sorted state
/// lists ordered by their smallest member.
pub fn strongly_connected_components(p: &TransitionMatrix) -> Vec<Vec<usize>> {
    let mut comps = tarjan(p);
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Transitive closure of the support graph, stored per component of the
/// condensation DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    n: usize,
    comp_of: Vec<usize>,
    words: usize,
    /// Bitset of components reachable in one or more steps, per component.
    reach: Vec<Vec<u64>>,
}

impl Reachability {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// True iff `i` leads to `j` in at least one step.
    pub fn leads_to(&self, i: usize, j: usize) -> bool {
        let cj = self.comp_of[j];
        self.reach[self.comp_of[i]][cj / 64] >> (cj % 64) & 1 == 1
    }

    pub fn communicates(&self, i: usize, j: usize) -> bool {
        self.leads_to(i, j) && self.leads_to(j, i)
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.leads_to(i, j)).collect()).collect()
    }
}

pub fn reachability(p: &TransitionMatrix) -> Reachability {
    let n = p.len();
    let comps = tarjan(p);
    let k = comps.len();
    let words = k.div_ceil(64).max(1);
    let mut comp_of = vec![0; n];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut reach = vec![vec![0u64; words]; k];
    // Tarjan emits sinks first, so every successor component is already final.
    for (c, members) in comps.iter().enumerate() {
        let mut acc = vec![0u64; words];
        let cyclic = members.len() > 1 || p.row(members[0]).iter().any(|&(j, _)| j == members[0]);
        if cyclic {
            acc[c / 64] |= 1 << (c % 64);
        }
        for &v in members {
            for &(w, _) in p.row(v) {
                let cw = comp_of[w];
                if cw != c {
                    acc[cw / 64] |= 1 << (cw % 64);
                    for (a, b) in acc.iter_mut().zip(&reach[cw]) {
                        *a |= *b;
                    }
                }
            }
        }
        reach[c] = acc;
    }
    Reachability { n, comp_of, words, reach }
}

/// Components with no edge leaving them, i.e. the sinks of the condensation.
pub fn find_persistent_groups(p: &TransitionMatrix, sccs: &[Vec<usize>], c: &Reachability) -> Vec<Vec<usize>> {
    sccs.iter()
        .filter(|comp| {
            let closed = comp.iter().all(|&v| p.row(v).iter().all(|&(w, _)| comp.binary_search(&w).is_ok()));
            // a closed component always communicates internally; a closed
            // singleton has its self-loop because the row is stochastic
            closed && comp.iter().all(|&v| c.leads_to(v, v))
        })
        .cloned()
        .collect()
}

/// Groups transient states by their domicile set, the indices of the
/// persistent groups they lead to. Returned sorted by (set size, set).
pub fn find_transient_groups(
    groups: &[Vec<usize>],
    transient: &[usize],
    c: &Reachability,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut by_key: BTreeMap<(usize, Vec<usize>), Vec<usize>> = BTreeMap::new();
    for &j in transient {
        let dom: Vec<usize> = groups.iter().enumerate().filter(|(_, g)| c.leads_to(j, g[0])).map(|(i, _)| i).collect();
        if dom.is_empty() {
            return Err(Error::Inconsistent(format!("transient state {j} reaches no persistent group")));
        }
        by_key.entry((dom.len(), dom)).or_default().push(j);
    }
    Ok(by_key.into_iter().map(|((_, d), cells)| (d, cells)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransientGroup {
    /// Zero-based indices into the persistent group list.
    pub domiciles: Vec<usize>,
    pub cells: Vec<CellIndex>,
}

/// Long-term structure of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowDecomposition {
    pub persistent_groups: Vec<Vec<CellIndex>>,
    pub transient_groups: Vec<TransientGroup>,
    pub persistent_cells: Vec<CellIndex>,
    pub transient_cells: Vec<CellIndex>,
}

/// Region a cell belongs to in a decomposition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Persistent(usize),
    Transient(Vec<usize>),
}

impl Region {
    /// `B_1` for attractors, `B(1)` / `B(1,2)` for transient groups (one-based).
    pub fn label(&self) -> String {
        match self {
            Region::Persistent(i) => format!("B_{}", i + 1),
            Region::Transient(d) => {
                let ids: Vec<String> = d.iter().map(|i| (i + 1).to_string()).collect();
                format!("B({})", ids.join(","))
            }
        }
    }
}

impl FlowDecomposition {
    pub fn regions(&self) -> Vec<Region> {
        (0..self.persistent_groups.len())
            .map(Region::Persistent)
            .chain(self.transient_groups.iter().map(|t| Region::Transient(t.domiciles.clone())))
            .collect()
    }

    pub fn cells_of(&self, region: &Region) -> &[CellIndex] {
        match region {
            Region::Persistent(i) => &self.persistent_groups[*i],
            Region::Transient(d) => {
                self.transient_groups.iter().find(|t| &t.domiciles == d).map(|t| t.cells.as_slice()).unwrap_or(&[])
            }
        }
    }

    pub fn region_of(&self, z: CellIndex) -> Option<Region> {
        if let Some(i) = self.persistent_groups.iter().position(|g| g.binary_search(&z).is_ok()) {
            return Some(Region::Persistent(i));
        }
        self.transient_groups
            .iter()
            .find(|t| t.cells.binary_search(&z).is_ok())
            .map(|t| Region::Transient(t.domiciles.clone()))
    }

    pub fn to_report(&self) -> DecompositionReport {
        DecompositionReport {
            persistent_group_count: self.persistent_groups.len(),
            transient_group_count: self.transient_groups.len(),
            persistent_cell_count: self.persistent_cells.len(),
            transient_cell_count: self.transient_cells.len(),
            persistent_groups: self
                .persistent_groups
                .iter()
                .enumerate()
                .map(|(i, g)| GroupReport {
                    label: Region::Persistent(i).label(),
                    domiciles: None,
                    size: g.len(),
                    cells: g.clone(),
                })
                .collect(),
            transient_groups: self
                .transient_groups
                .iter()
                .map(|t| GroupReport {
                    label: Region::Transient(t.domiciles.clone()).label(),
                    domiciles: Some(t.domiciles.iter().map(|i| i + 1).collect()),
                    size: t.cells.len(),
                    cells: t.cells.clone(),
                })
                .collect(),
        }
    }
}

/// JSON form of a decomposition. Domicile numbers are one-based to match the
/// group labels; cell indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub persistent_group_count: usize,
    pub transient_group_count: usize,
    pub persistent_cell_count: usize,
    pub transient_cell_count: usize,
    pub persistent_groups: Vec<GroupReport>,
    pub transient_groups: Vec<GroupReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub domiciles: Option<Vec<usize>>,
    pub size: usize,
    pub cells: Vec<CellIndex>,
}

/// Full decomposition of the support graph of `p`.
pub fn decompose(p: &TransitionMatrix) -> Result<FlowDecomposition> {
    let sccs = strongly_connected_components(p);
    let c = reachability(p);
    let groups = find_persistent_groups(p, &sccs, &c);
    let mut is_persistent = vec![false; p.len()];
    for g in &groups {
        for &v in g {
            is_persistent[v] = true;
        }
    }
    let transient: Vec<usize> = (0..p.len()).filter(|&v| !is_persistent[v]).collect();
    let tgroups = find_transient_groups(&groups, &transient, &c)?;

    let to_cells = |states: &[usize]| states.iter().map(|&s| p.cell(s)).collect::<Vec<_>>();
    Ok(FlowDecomposition {
        persistent_cells: (0..p.len()).filter(|&v| is_persistent[v]).map(|s| p.cell(s)).collect(),
        transient_cells: to_cells(&transient),
        persistent_groups: groups.iter().map(|g| to_cells(g)).collect(),
        transient_groups: tgroups
            .into_iter()
            .map(|(domiciles, states)| TransientGroup { domiciles, cells: to_cells(&states) })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_cell_map, EulerStep, VectorField};

    fn graph(edges: &[&[usize]]) -> TransitionMatrix {
        let n = edges.len();
        let rows = edges.iter().map(|succ| succ.iter().map(|&j| (j, 1.0 / succ.len() as f64)).collect()).collect();
        TransitionMatrix::from_rows((0..n).map(CellIndex).collect(), rows).unwrap()
    }

    fn brute_reach(p: &TransitionMatrix) -> Vec<Vec<bool>> {
        let n = p.len();
        let mut out = vec![vec![false; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            let mut stack: Vec<usize> = p.row(i).iter().map(|&(j, _)| j).collect();
            while let Some(v) = stack.pop() {
                if !row[v] {
                    row[v] = true;
                    stack.extend(p.row(v).iter().map(|&(j, _)| j));
                }
            }
        }
        out
    }

    #[test]
    fn deterministic_limit() {
        let w = Workspace::open(3, 3).unwrap();
        let mut images: Vec<_> = (0..9).map(|i| Some(CellIndex(i))).collect();
        images[4] = Some(CellIndex(5));
        let cm = CellMap::from_images(&w, images).unwrap();
        let s = build_stochastic_map(&w, &cm, 1.0).unwrap();
        assert_eq!(s.mapped_set(4), &[(CellIndex(5), 1.0)]);
    }

    #[test]
    fn interior_spread() {
        let w = Workspace::open(3, 3).unwrap();
        let mut images: Vec<_> = (0..9).map(|i| Some(CellIndex(i))).collect();
        images[4] = Some(CellIndex(8));
        let cm = CellMap::from_images(&w, images).unwrap();
        let s = build_stochastic_map(&w, &cm, 0.9).unwrap();
        let row = s.mapped_set(4);
        assert_eq!(row.len(), 9);
        for &(c, p) in row {
            // (1 - 0.9) / 8 = 0.0125
            let expect = if c == CellIndex(8) { 0.9 } else { 0.0125 };
            assert!((p - expect).abs() < 1e-15, "{c}: {p}");
        }
        // corner: self + 3 neighbors, uniform
        assert_eq!(
            s.mapped_set(0),
            &[(CellIndex(0), 0.25), (CellIndex(1), 0.25), (CellIndex(3), 0.25), (CellIndex(4), 0.25)]
        );
        assert!(s.is_boundary(0) && !s.is_boundary(4));
    }

    #[test]
    fn rejects_bad_r() {
        let w = Workspace::open(3, 3).unwrap();
        let cm = CellMap::identity(&w);
        for r in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(build_stochastic_map(&w, &cm, r), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn transition_matrix_examples() {
        // interior identity at r = 1 on an open grid: only the center is
        // interior, boundary cells are uniform
        let w = Workspace::open(3, 3).unwrap();
        let p = transition_matrix(&build_stochastic_map(&w, &CellMap::identity(&w), 1.0).unwrap());
        assert_eq!(p.row(4), &[(4, 1.0)]);
        for i in 0..p.len() {
            let s: f64 = p.row(i).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() <= ROW_SUM_TOL);
        }
        let swap = graph(&[&[1], &[0]]);
        assert_eq!(swap.get(0, 1), 1.0);
        assert_eq!(swap.get(0, 0), 0.0);
    }

    #[test]
    fn from_rows_validation() {
        let cells = vec![CellIndex(0), CellIndex(1)];
        assert!(TransitionMatrix::from_rows(cells.clone(), vec![vec![(0, 0.5)], vec![(1, 1.0)]]).is_err());
        assert!(TransitionMatrix::from_rows(cells.clone(), vec![vec![(2, 1.0)], vec![(1, 1.0)]]).is_err());
        assert!(TransitionMatrix::from_rows(cells, vec![vec![(0, 1.0)]]).is_err());
    }

    #[test]
    fn scc_examples() {
        let id = graph(&[&[0], &[1], &[2]]);
        assert_eq!(strongly_connected_components(&id), vec![vec![0], vec![1], vec![2]]);
        let cycle = graph(&[&[1], &[2], &[3], &[0]]);
        assert_eq!(strongly_connected_components(&cycle), vec![vec![0, 1, 2, 3]]);
        // cycles {0,1,2} and {3,4,5}, joined by 2 -> 3
        let joined = graph(&[&[1], &[2], &[0, 3], &[4], &[5], &[3]]);
        let sccs = strongly_connected_components(&joined);
        assert_eq!(sccs, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let reach = brute_reach(&joined);
        for (ci, a) in sccs.iter().enumerate() {
            for (cj, b) in sccs.iter().enumerate() {
                for &i in a {
                    for &j in b {
                        assert_eq!(ci == cj, reach[i][j] && reach[j][i]);
                    }
                }
            }
        }
    }

    #[test]
    fn reachability_examples() {
        let id = graph(&[&[0], &[1], &[2]]);
        let c = reachability(&id);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.leads_to(i, j), i == j);
            }
        }
        let chain = graph(&[&[1], &[2], &[2]]);
        assert_eq!(
            reachability(&chain).to_matrix(),
            vec![vec![false, true, true], vec![false, false, true], vec![false, false, true]]
        );
    }

    #[test]
    fn persistent_and_transient_examples() {
        let absorbing = graph(&[&[0]]);
        let d = decompose(&absorbing).unwrap();
        assert_eq!(d.persistent_groups, vec![vec![CellIndex(0)]]);
        assert!(d.transient_groups.is_empty());

        // A=0 <-> B=1, c=2 -> A
        let g = graph(&[&[1], &[0], &[0]]);
        let d = decompose(&g).unwrap();
        assert_eq!(d.persistent_groups, vec![vec![CellIndex(0), CellIndex(1)]]);
        assert_eq!(d.transient_groups, vec![TransientGroup { domiciles: vec![0], cells: vec![CellIndex(2)] }]);

        // two absorbing cells, 2 feeds both, 3 feeds only 1
        let g = graph(&[&[0], &[1], &[0, 1], &[1]]);
        let d = decompose(&g).unwrap();
        assert_eq!(d.persistent_groups.len(), 2);
        assert_eq!(
            d.transient_groups,
            vec![
                TransientGroup { domiciles: vec![1], cells: vec![CellIndex(3)] },
                TransientGroup { domiciles: vec![0, 1], cells: vec![CellIndex(2)] },
            ]
        );
        assert_eq!(d.region_of(CellIndex(2)).unwrap().label(), "B(1,2)");
        assert_eq!(d.region_of(CellIndex(1)).unwrap().label(), "B_2");
    }

    #[test]
    fn zero_field_gives_singletons_at_r1() {
        let w = Workspace::open(4, 4).unwrap();
        let cm = build_cell_map(&w, &VectorField::zeros(16), EulerStep::new(1.0).unwrap()).unwrap();
        let p = transition_matrix(&build_stochastic_map(&w, &cm, 1.0).unwrap());
        let d = decompose(&p).unwrap();
        // the 4 interior cells are absorbing; the edge ring is transient
        assert_eq!(d.persistent_groups.len(), 4);
        assert!(d.persistent_groups.iter().all(|g| g.len() == 1));
        assert_eq!(d.transient_cells.len(), 12);
    }
}
