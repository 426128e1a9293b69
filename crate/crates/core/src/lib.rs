//! Post-processing of probabilistic sensitivity analysis (PSA) output.
//!
//! Given paired samples of effects and costs for competing interventions,
//! [`Analysis`] computes the cost-effectiveness decision statistics over a
//! willingness-to-pay grid. [`extensions`] adds multi-way comparisons, risk
//! aversion and mixed strategies, [`voi`] estimates partial value of
//! information, [`io`] reads and writes datasets and archives, and
//! [`render`] turns results into plot specifications, SVG and reports.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod extensions;
pub mod io;
pub mod render;
pub mod stats;
pub mod summary;
pub mod voi;

pub use analysis::{Analysis, AnalysisBuilder, SimSlice};
pub use dataset::{PsaDataset, WtpGrid};
pub use error::{Error, Result};
pub use extensions::Extensions;
pub use stats::{Icer, Utility};
pub use summary::{sim_table, summarize, SimTable, SummaryBlock};
