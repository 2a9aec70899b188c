//! Hidden Markov model over water cells with compass observations.
//!
//! The observation at step `t` is the heading of the move out of `x_{t-1}`,
//! so it is emitted by the departing state: the joint probability of a path
//! is `π[x_0] · Π_t Q[x_{t-1}][y_t] · P[x_{t-1}][x_t]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcm::{StochasticCellMap, TransitionMatrix};
use crate::grid::{CellIndex, Direction, Workspace};

const SUM_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

pub type StateTrajectory = Vec<CellIndex>;

/// Per-state distribution over the nine compass symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    rows: Vec<[f64; Direction::COUNT]>,
}

impl EmissionMatrix {
    pub fn from_rows(rows: Vec<[f64; Direction::COUNT]>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Parameter(format!("emission row {i} has an invalid entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::Parameter(format!("emission row {i} sums to {s}")));
            }
        }
        Ok(EmissionMatrix { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, state: usize, y: Direction) -> f64 {
        self.rows[state][y.index()]
    }

    pub fn row(&self, state: usize) -> &[f64; Direction::COUNT] {
        &self.rows[state]
    }
}

/// `Q[z][y]` is the total probability of the moves out of `z` whose heading is `y`.
pub fn emission_matrix(s: &StochasticCellMap, w: &Workspace) -> Result<EmissionMatrix> {
    let mut rows = Vec::with_capacity(s.cells().len());
    for (i, &z) in s.cells().iter().enumerate() {
        let mut row = [0.0; Direction::COUNT];
        for &(z2, p) in s.mapped_set(i) {
            row[w.direction_between(z, z2)?.index()] += p;
        }
        rows.push(row);
    }
    Ok(EmissionMatrix { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Point mass at the deployment cell.
    #[serde(alias = "det")]
    Deterministic,
    /// Uniform over the deployment cell and its water neighbors.
    #[serde(alias = "prob")]
    Probabilistic,
}

impl PriorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorMode::Deterministic => "deterministic",
            PriorMode::Probabilistic => "probabilistic",
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(PriorMode::Deterministic),
            "prob" | "probabilistic" => Ok(PriorMode::Probabilistic),
            _ => Err(Error::Parameter(format!("unknown prior mode {s:?}"))),
        }
    }
}

/// Initial distribution over states (water cells in index order).
pub fn initial_distribution(w: &Workspace, start: CellIndex, mode: PriorMode) -> Result<Vec<f64>> {
    w.check_water(start)?;
    let mut pi = vec![0.0; w.num_free()];
    let support = match mode {
        PriorMode::Deterministic => vec![start],
        PriorMode::Probabilistic => w.closed_neighborhood(start)?,
    };
    let p = 1.0 / support.len() as f64;
    for z in support {
        pi[w.state_of(z).expect("water cell")] = p;
    }
    Ok(pi)
}

/// Compass observation history `y_1..y_T`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationHistory(pub Vec<Direction>);

impl ObservationHistory {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Direction] {
        &self.0
    }
}

impl fmt::Display for ObservationHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(d.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for ObservationHistory {
    type Err = Error;

    /// Symbols separated by whitespace or commas, e.g. `"N NE I E"`.
    fn from_str(s: &str) -> Result<Self> {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(ObservationHistory)
    }
}

/// `λ = (P, Q, π)` with log-space copies for decoding.
#[derive(Debug, Clone)]
pub struct HmmModel {
    p: TransitionMatrix,
    q: EmissionMatrix,
    pi: Vec<f64>,
    log_p: Vec<Vec<(usize, f64)>>,
    log_q: Vec<[f64; Direction::COUNT]>,
    log_pi: Vec<f64>,
}

impl HmmModel {
    pub fn new(p: TransitionMatrix, q: EmissionMatrix, pi: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || pi.len() != p.len() {
            return Err(Error::Dimension(format!("P has {} states, Q has {}, π has {}", p.len(), q.len(), pi.len())));
        }
        if pi.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Parameter("π has a negative or NaN entry".into()));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::Parameter(format!("π sums to {s}")));
        }
        let log_p = (0..p.len()).map(|i| p.row(i).iter().map(|&(j, x)| (j, x.ln())).collect()).collect();
        let log_q = q.rows.iter().map(|row| row.map(f64::ln)).collect();
        let log_pi = pi.iter().map(|x| x.ln()).collect();
        Ok(HmmModel { p, q, pi, log_p, log_q, log_pi })
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.p
    }

    pub fn emissions(&self) -> &EmissionMatrix {
        &self.q
    }

    pub fn initial(&self) -> &[f64] {
        &self.pi
    }

    pub fn num_states(&self) -> usize {
        self.p.len()
    }

    /// Joint log-probability of a state path and its observations; `-inf` if
    /// any factor is zero or a cell is not a state.
    pub fn path_log_prob(&self, path: &[CellIndex], obs: &ObservationHistory) -> f64 {
        if path.len() != obs.len() + 1 {
            return f64::NEG_INFINITY;
        }
        let Some(states) = path.iter().map(|&z| self.p.state_of(z)).collect::<Option<Vec<_>>>() else {
            return f64::NEG_INFINITY;
        };
        let mut lp = self.log_pi[states[0]];
        for (t, y) in obs.symbols().iter().enumerate() {
            let (a, b) = (states[t], states[t + 1]);
            lp += self.log_q[a][y.index()] + self.p.get(a, b).ln();
        }
        lp
    }
}

impl PartialEq for HmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q && self.pi == other.pi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub path: StateTrajectory,
    pub log_prob: f64,
}

impl Decoded {
    pub fn final_state(&self) -> CellIndex {
        *self.path.last().expect("decoded paths are non-empty")
    }
}

/// Log-probabilities that differ only by rounding. Products such as
/// `1/4 * 1/9` and `1/6 * 1/6` are equal but their log sums need not be.
fn ties(v: f64, max: f64) -> bool {
    v > f64::NEG_INFINITY && max - v <= TIE_TOL * (1.0 + max.abs())
}

/// Most likely state path for `obs`.
///
/// Runs a backward max-product pass, then picks states front to back so that
/// among equally likely paths the lexicographically smallest one is returned.
pub fn viterbi(model: &HmmModel, obs: &ObservationHistory) -> Result<Decoded> {
    let t_len = obs.len();
    if t_len == 0 {
        return Err(Error::Parameter("observation history is empty".into()));
    }
    let n = model.num_states();
    let ys = obs.symbols();

    // forward feasibility, to report the first step that kills every path
    let mut alive: Vec<bool> = model.pi.iter().map(|&p| p > 0.0).collect();
    for (t, y) in ys.iter().enumerate() {
        let mut next = vec![false; n];
        let mut any = false;
        for x in (0..n).filter(|&x| alive[x] && model.q.get(x, *y) > 0.0) {
            for &(j, _) in model.p.row(x) {
                next[j] = true;
                any = true;
            }
        }
        if !any {
            return Err(Error::ZeroProbability { step: t + 1 });
        }
        alive = next;
    }

    // beta[t][x]: best log-probability of y_{t+1..T} and the states after x_t = x
    let mut beta = vec![vec![0.0f64; n]; t_len + 1];
    for t in (0..t_len).rev() {
        let y = ys[t].index();
        let (head, tail) = beta.split_at_mut(t + 1);
        let next = &tail[0];
        for (x, slot) in head[t].iter_mut().enumerate() {
            let best = model.log_p[x].iter().map(|&(j, lp)| lp + next[j]).fold(f64::NEG_INFINITY, f64::max);
            *slot = model.log_q[x][y] + best;
        }
    }

    let mut path = Vec::with_capacity(t_len + 1);
    let best = (0..n).map(|x| model.log_pi[x] + beta[0][x]).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability { step: t_len });
    }
    let x0 = (0..n).find(|&x| ties(model.log_pi[x] + beta[0][x], best)).expect("the maximum is attained");
    path.push(x0);
    let mut cur = x0;
    for next_beta in &beta[1..] {
        let row = &model.log_p[cur];
        let top = row.iter().map(|&(j, lp)| lp + next_beta[j]).fold(f64::NEG_INFINITY, f64::max);
        cur = row
            .iter()
            .find(|&&(j, lp)| ties(lp + next_beta[j], top))
            .map(|&(j, _)| j)
            .expect("the maximum is attained");
        path.push(cur);
    }
    Ok(Decoded { path: path.into_iter().map(|s| model.p.cell(s)).collect(), log_prob: best })
}

pub fn viterbi_final_state(model: &HmmModel, obs: &ObservationHistory) -> Result<CellIndex> {
    viterbi(model, obs).map(|d| d.final_state())
}
