use crate::error::Result;
use crate::flow::{build_cell_map, CellMap, EulerStep, VectorField};
use crate::gcm::{
    build_stochastic_map, decompose, transition_matrix, FlowDecomposition, StochasticCellMap, TransitionMatrix,
};
use crate::grid::{CellIndex, Workspace};
use crate::hmm::{emission_matrix, initial_distribution, EmissionMatrix, HmmModel, PriorMode};

/// Everything derived from one field at one perfect-motion probability.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub workspace: Workspace,
    pub field: VectorField,
    pub dt: EulerStep,
    pub cell_map: CellMap,
    pub stochastic: StochasticCellMap,
    pub transitions: TransitionMatrix,
    pub emissions: EmissionMatrix,
}

impl FlowModel {
    pub fn build(workspace: Workspace, field: VectorField, dt: Option<EulerStep>, r: f64) -> Result<Self> {
        let dt = dt.unwrap_or_else(|| EulerStep::cell_crossing(&workspace, &field));
        let cell_map = build_cell_map(&workspace, &field, dt)?;
        let stochastic = build_stochastic_map(&workspace, &cell_map, r)?;
        let transitions = transition_matrix(&stochastic);
        let emissions = emission_matrix(&stochastic, &workspace)?;
        Ok(FlowModel { workspace, field, dt, cell_map, stochastic, transitions, emissions })
    }

    pub fn r(&self) -> f64 {
        self.stochastic.r()
    }

    /// Same field and cell map with a different `r`.
    pub fn with_r(&self, r: f64) -> Result<Self> {
        let stochastic = build_stochastic_map(&self.workspace, &self.cell_map, r)?;
        let transitions = transition_matrix(&stochastic);
        let emissions = emission_matrix(&stochastic, &self.workspace)?;
        Ok(FlowModel { stochastic, transitions, emissions, ..self.clone() })
    }

    pub fn decompose(&self) -> Result<FlowDecomposition> {
        decompose(&self.transitions)
    }

    pub fn hmm(&self, start: CellIndex, mode: PriorMode) -> Result<HmmModel> {
        let pi = initial_distribution(&self.workspace, start, mode)?;
        HmmModel::new(self.transitions.clone(), self.emissions.clone(), pi)
    }
}
