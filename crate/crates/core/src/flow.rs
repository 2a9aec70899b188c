//! Current field and the deterministic one-step cell mapping obtained by an
//! Euler step along the flow line out of each cell center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, Workspace};

/// Horizontal velocity per cell, in cell widths (u, east) and cell heights
/// (v, north) per unit time. Land cells carry zero velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    u: Vec<f64>,
    v: Vec<f64>,
    /// Free-form layer labels carried through the field file.
    pub depth: String,
    pub time: String,
}

impl VectorField {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension(format!("u has {} samples but v has {}", u.len(), v.len())));
        }
        if let Some(i) = u.iter().zip(&v).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Parameter(format!("non-finite velocity at cell {i}")));
        }
        Ok(VectorField { u, v, depth: String::new(), time: String::new() })
    }

    pub fn zeros(cells: usize) -> Self {
        VectorField::new(vec![0.0; cells], vec![0.0; cells]).expect("zeros are finite")
    }

    pub fn with_labels(mut self, depth: impl Into<String>, time: impl Into<String>) -> Self {
        self.depth = depth.into();
        self.time = time.into();
        self
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn velocity(&self, z: CellIndex) -> (f64, f64) {
        (self.u[z.0], self.v[z.0])
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Largest speed over water cells.
    pub fn max_speed(&self, w: &Workspace) -> f64 {
        w.free_cells()
            .iter()
            .map(|&z| {
                let (u, v) = self.velocity(z);
                u.hypot(v)
            })
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, w: &Workspace) -> Result<()> {
        if self.len() != w.num_cells() {
            return Err(Error::Dimension(format!("field has {} cells, workspace has {}", self.len(), w.num_cells())));
        }
        Ok(())
    }
}

/// Integration step `dt > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EulerStep(f64);

impl EulerStep {
    pub fn new(dt: f64) -> Result<Self> {
        if dt > 0.0 && dt.is_finite() {
            Ok(EulerStep(dt))
        } else {
            Err(Error::Parameter(format!("time step must be positive and finite, got {dt}")))
        }
    }

    /// Time for the fastest water cell to cross one cell; 1 for a still field.
    pub fn cell_crossing(w: &Workspace, f: &VectorField) -> Self {
        let vmax = f.max_speed(w);
        if vmax > 0.0 {
            EulerStep(1.0 / vmax)
        } else {
            EulerStep(1.0)
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EulerStep {
    type Error = Error;
    fn try_from(dt: f64) -> Result<Self> {
        EulerStep::new(dt)
    }
}

impl From<EulerStep> for f64 {
    fn from(dt: EulerStep) -> f64 {
        dt.0
    }
}

pub fn euler_endpoint(w: &Workspace, f: &VectorField, z: CellIndex, dt: EulerStep) -> Result<(f64, f64)> {
    f.check_shape(w)?;
    w.check_water(z)?;
    let (x, y) = w.center(z);
    let (u, v) = f.velocity(z);
    Ok((x + dt.0 * u, y + dt.0 * v))
}

/// Water cell of `neighbors(z) ∪ {z}` nearest to the Euler endpoint. Ties go to
/// the smaller index.
pub fn mapped_cell(w: &Workspace, f: &VectorField, z: CellIndex, dt: EulerStep) -> Result<CellIndex> {
    let (ex, ey) = euler_endpoint(w, f, z, dt)?;
    let mut best = z;
    let mut best_d2 = f64::INFINITY;
    // closed_neighborhood is ascending, so strict `<` keeps the smallest index on ties
    for c in w.closed_neighborhood(z)? {
        let (cx, cy) = w.center(c);
        let d2 = (cx - ex) * (cx - ex) + (cy - ey) * (cy - ey);
        if d2 < best_d2 {
            best_d2 = d2;
            best = c;
        }
    }
    Ok(best)
}

/// Deterministic image of every water cell; land entries are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMap {
    images: Vec<Option<CellIndex>>,
}

impl CellMap {
    /// Builds a map from explicit images. Every water cell needs an image in
    /// its closed Moore neighborhood.
    pub fn from_images(w: &Workspace, images: Vec<Option<CellIndex>>) -> Result<Self> {
        if images.len() != w.num_cells() {
            return Err(Error::Dimension(format!(
                "cell map has {} entries, workspace has {}",
                images.len(),
                w.num_cells()
            )));
        }
        for (i, img) in images.iter().enumerate() {
            let z = CellIndex(i);
            match (w.is_land(z), img) {
                (true, None) => {}
                (true, Some(_)) => return Err(Error::LandCell(z)),
                (false, None) => return Err(Error::Inconsistent(format!("water cell {z} has no image"))),
                (false, Some(t)) => {
                    w.check_water(*t)?;
                    w.direction_between(z, *t)?;
                }
            }
        }
        Ok(CellMap { images })
    }

    pub fn identity(w: &Workspace) -> Self {
        let images = (0..w.num_cells()).map(|i| (!w.is_land(CellIndex(i))).then_some(CellIndex(i))).collect();
        CellMap { images }
    }

    pub fn image(&self, z: CellIndex) -> Option<CellIndex> {
        self.images.get(z.0).copied().flatten()
    }

    pub fn images(&self) -> &[Option<CellIndex>] {
        &self.images
    }
}

pub fn build_cell_map(w: &Workspace, f: &VectorField, dt: EulerStep) -> Result<CellMap> {
    f.check_shape(w)?;
    let mut images = vec![None; w.num_cells()];
    for &z in w.free_cells() {
        images[z.0] = Some(mapped_cell(w, f, z, dt)?);
    }
    Ok(CellMap { images })
}
