//! Qualitative checks on computed solutions.
//!
//! Each check is a pure function of its inputs and returns a serializable report
//! with a `passed` flag. Whether a failure counts is decided by the caller via
//! [`Status::gate`]: checks run outside the hypotheses of the property they test
//! are reported, not asserted.

mod bounds;
mod maxprin;
mod normal;
mod planes;
mod symmetry;

pub use bounds::*;
pub use maxprin::*;
pub use normal::*;
pub use planes::*;
pub use symmetry::*;

use crate::grid::UniformGrid;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

impl Status {
    pub fn gate(passed: bool, asserted: bool) -> Self {
        match (asserted, passed) {
            (false, _) => Status::ReportOnly,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        }
    }

    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }
}

/// Cells between a node and the nearest truncation face: both lateral faces of
/// every horizontal axis and the top face. The bottom face is ignored since it
/// lies outside the domain or on its boundary in every epigraph scenario.
pub fn truncation_margin(grid: &UniformGrid, idx: usize) -> usize {
    let m = grid.multi_index(idx);
    let n = grid.dim();
    let c = grid.counts();
    let top = c[n - 1] - 1 - m[n - 1] as usize;
    (0..n - 1)
        .map(|a| (m[a] as usize).min(c[a] - 1 - m[a] as usize))
        .fold(top, usize::min)
}
