//! Reference implementations written straight from the model definitions,
//! with dense matrices and no shared code paths with the library.

#![allow(dead_code)]

use driftloc::{CellIndex, CellMap, Workspace};
use rand::Rng;

pub const OFFSETS: [(isize, isize); 9] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (0, 0)];

pub fn water(w: &Workspace, r: isize, c: isize) -> Option<usize> {
    if r < 0 || c < 0 || r >= w.rows() as isize || c >= w.cols() as isize {
        return None;
    }
    let z = r as usize * w.cols() + c as usize;
    (!w.land_mask()[z]).then_some(z)
}

/// Dense `P` over water cells (in ascending cell order) built from the
/// perfect-motion rule.
pub fn dense_p(w: &Workspace, images: &[Option<CellIndex>], r: f64) -> Vec<Vec<f64>> {
    let free: Vec<usize> = (0..w.num_cells()).filter(|&z| !w.land_mask()[z]).collect();
    let pos = |z: usize| free.iter().position(|&f| f == z).unwrap();
    let mut p = vec![vec![0.0; free.len()]; free.len()];
    for (i, &z) in free.iter().enumerate() {
        let (row, col) = ((z / w.cols()) as isize, (z % w.cols()) as isize);
        let hood: Vec<usize> = OFFSETS.iter().filter_map(|&(dr, dc)| water(w, row + dr, col + dc)).collect();
        if hood.len() < 9 {
            for &n in &hood {
                p[i][pos(n)] += 1.0 / hood.len() as f64;
            }
        } else {
            let img = images[z].unwrap().0;
            for &n in &hood {
                p[i][pos(n)] += if n == img { r } else { (1.0 - r) / 8.0 };
            }
        }
    }
    p
}

/// Index into the compass alphabet N NE E SE S SW W NW I.
pub fn heading(w: &Workspace, from: usize, to: usize) -> usize {
    let dr = (to / w.cols()) as isize - (from / w.cols()) as isize;
    let dc = (to % w.cols()) as isize - (from % w.cols()) as isize;
    OFFSETS.iter().position(|&o| o == (dr, dc)).expect("adjacent cells")
}

pub fn dense_q(w: &Workspace, p: &[Vec<f64>]) -> Vec<[f64; 9]> {
    let free: Vec<usize> = (0..w.num_cells()).filter(|&z| !w.land_mask()[z]).collect();
    p.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut q = [0.0; 9];
            for (j, &x) in row.iter().enumerate() {
                if x > 0.0 {
                    q[heading(w, free[i], free[j])] += x;
                }
            }
            q
        })
        .collect()
}

/// Transitive closure (paths of length >= 1) by repeated boolean products.
pub fn power_closure(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut reach = adj.to_vec();
    loop {
        let mut next = reach.clone();
        for i in 0..n {
            for k in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if adj[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == reach {
            return reach;
        }
        reach = next;
    }
}

pub struct BruteForce {
    pub best: f64,
    /// Lexicographically smallest path within `tie_tol` of `best`.
    pub path: Option<Vec<usize>>,
}

/// Enumerates every state sequence of length `obs.len() + 1` and scores it
/// as `π(x0) Π Q(x_{t-1}, y_t) P(x_{t-1}, x_t)`.
pub fn brute_viterbi(p: &[Vec<f64>], q: &[[f64; 9]], pi: &[f64], obs: &[usize], tie_tol: f64) -> BruteForce {
    let n = p.len();
    let mut scored: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut path = Vec::with_capacity(obs.len() + 1);
    fn rec(
        p: &[Vec<f64>],
        q: &[[f64; 9]],
        obs: &[usize],
        path: &mut Vec<usize>,
        prob: f64,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        let t = path.len() - 1;
        if t == obs.len() {
            out.push((prob.ln(), path.clone()));
            return;
        }
        let last = *path.last().unwrap();
        for j in 0..p.len() {
            let f = q[last][obs[t]] * p[last][j];
            if f > 0.0 {
                path.push(j);
                rec(p, q, obs, path, prob * f, out);
                path.pop();
            }
        }
    }
    for x0 in 0..n {
        if pi[x0] > 0.0 {
            path.push(x0);
            rec(p, q, obs, &mut path, pi[x0], &mut scored);
            path.pop();
        }
    }
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let path = scored.into_iter().filter(|(lp, _)| best - lp <= tie_tol).map(|(_, p)| p).min();
    BruteForce { best, path }
}

/// Random workspace up to `max_rows x max_cols` with some land.
pub fn random_workspace<R: Rng>(rng: &mut R, max_rows: usize, max_cols: usize, land_rate: f64) -> Workspace {
    loop {
        let rows = rng.gen_range(2..=max_rows);
        let cols = rng.gen_range(2..=max_cols);
        let land: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(land_rate)).collect();
        if let Ok(w) = Workspace::new(rows, cols, (0.0, 0.0), (1.0, 1.0), land) {
            return w;
        }
    }
}

/// Random image for every water cell, drawn from its closed neighborhood.
pub fn random_images<R: Rng>(rng: &mut R, w: &Workspace) -> Vec<Option<CellIndex>> {
    (0..w.num_cells())
        .map(|z| {
            if w.land_mask()[z] {
                return None;
            }
            let (row, col) = ((z / w.cols()) as isize, (z % w.cols()) as isize);
            let hood: Vec<usize> = OFFSETS.iter().filter_map(|&(dr, dc)| water(w, row + dr, col + dc)).collect();
            Some(CellIndex(hood[rng.gen_range(0..hood.len())]))
        })
        .collect()
}

pub fn random_cell_map<R: Rng>(rng: &mut R, w: &Workspace) -> CellMap {
    CellMap::from_images(w, random_images(rng, w)).expect("images lie in closed neighborhoods")
}

pub fn support(p: &[Vec<f64>]) -> Vec<Vec<bool>> {
    p.iter().map(|row| row.iter().map(|&x| x > 0.0).collect()).collect()
}

/// Transitive closure (paths of length >= 1) by a search from every vertex.
pub fn search_closure(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = adj[s].clone();
            while let Some(v) = stack.pop() {
                if !seen[v] {
                    seen[v] = true;
                    stack.extend(&adj[v]);
                }
            }
            seen
        })
        .collect()
}
