//! Fisher information for the canonical multiband model: summation and
//! Dirichlet-compact builders, EFIM reduction, delay-separation CRB, DEB,
//! the two-path closed-form CRB with its carrier-extreme bounds, and the
//! single-path FIM used by the ZZB machinery.

mod closed_form;
mod compact;
mod dirichlet;
mod efim;
mod single_path;
mod summation;

pub use closed_form::{crb_closed_form, ClosedFormCrb};
pub use compact::{fim_compact_relaxed, fim_compact_two_path, RelaxedBand};
pub use dirichlet::{dirichlet_gamma, DirichletTriple};
pub use efim::{crb_delay_separation, deb, efim};
pub use single_path::{fim_single_path, single_path_crb_tau};
pub use summation::fim_summation;

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Condition-number guard: inversions abort with [`Error::NearSingular`]
/// above this threshold instead of propagating NaNs.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Which nuisance blocks the parameter vector carries. The observation model
/// always contains the delays and complex gains; phase offsets `phi'_2..M`
/// and timing offsets `delta_1..M` are included per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FimScenario {
    /// Delays and gains only (the 3K-parameter ideal model).
    DistortionFree,
    /// Adds the M-1 phase offsets.
    PhaseOnly,
    /// Adds the M timing offsets (with their Gaussian prior).
    TimingOnly,
    /// Adds both distortion families: the full 3K+2M-1 vector.
    Full,
}

impl FimScenario {
    pub fn has_phase(self) -> bool {
        matches!(self, FimScenario::PhaseOnly | FimScenario::Full)
    }

    pub fn has_timing(self) -> bool {
        matches!(self, FimScenario::TimingOnly | FimScenario::Full)
    }
}

/// Block offsets of the canonical parameter ordering
/// `eta = [tau_1..K, alpha_R1..K, alpha_I1..K, phi'_2..M, delta_1..M]`,
/// restricted to the blocks present in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub num_paths: usize,
    pub num_subbands: usize,
    pub scenario: FimScenario,
}

impl ParamLayout {
    pub fn new(num_paths: usize, num_subbands: usize, scenario: FimScenario) -> Self {
        Self { num_paths, num_subbands, scenario }
    }

    pub fn dim(&self) -> usize {
        let (k, m) = (self.num_paths, self.num_subbands);
        3 * k
            + if self.scenario.has_phase() { m - 1 } else { 0 }
            + if self.scenario.has_timing() { m } else { 0 }
    }

    pub fn tau(&self, k: usize) -> usize {
        debug_assert!(k < self.num_paths);
        k
    }

    pub fn alpha_re(&self, k: usize) -> usize {
        debug_assert!(k < self.num_paths);
        self.num_paths + k
    }

    pub fn alpha_im(&self, k: usize) -> usize {
        debug_assert!(k < self.num_paths);
        2 * self.num_paths + k
    }

    /// Column of `phi'_{m+1}` for subband index `m >= 1` (0-based).
    pub fn phase(&self, m: usize) -> Option<usize> {
        if self.scenario.has_phase() && m >= 1 {
            Some(3 * self.num_paths + (m - 1))
        } else {
            None
        }
    }

    /// Column of `delta_m` for subband index `m` (0-based).
    pub fn timing(&self, m: usize) -> Option<usize> {
        if self.scenario.has_timing() {
            let base = 3 * self.num_paths
                + if self.scenario.has_phase() { self.num_subbands - 1 } else { 0 };
            Some(base + m)
        } else {
            None
        }
    }
}

/// An immutable Fisher information matrix with its parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    matrix: DMatrix<f64>,
    layout: ParamLayout,
}

impl FisherMatrix {
    pub(crate) fn from_parts(matrix: DMatrix<f64>, layout: ParamLayout) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::InvalidInput("FIM dimensions do not match layout".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Fisher information entry"));
        }
        Ok(Self { matrix, layout })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn num_paths(&self) -> usize {
        self.layout.num_paths
    }

    pub fn scenario(&self) -> FimScenario {
        self.layout.scenario
    }
}

/// 2-norm condition estimate from the singular values.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve `m x = rhs` behind the condition guard.
pub fn guarded_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_estimate(m);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::NearSingular { cond });
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::NearSingular { cond })
}

/// Dense inverse behind the condition guard.
pub(crate) fn guarded_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eye = DMatrix::identity(m.nrows(), m.ncols());
    guarded_solve(m, &eye)
}
