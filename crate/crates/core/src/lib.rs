//! Markov transition dynamics of size categories estimated from longitudinal
//! panels: balanced-panel construction, classification, relative-frequency
//! transition matrices, trend and entropy analytics, two-step consistency
//! checks, and a seeded simulator for synthetic panels.

pub mod analytics;
pub mod classifier;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod matrix;
pub mod panel;
pub mod report;
pub mod simulator;

pub use analytics::{
    chapman_kolmogorov_chain, chapman_kolmogorov_check, column_entropy, entropy_nats, entropy_table,
    group_entropy, matrix_power, propagate_path, transition_trend, CkReport, EntropyTable,
    GroupEntropy, Grouping, TrendOptions, TrendPoint, TrendWeight,
};
pub use classifier::{classify_panel, default_scheme, CategoryScheme, StateGrid};
pub use error::{Error, ErrorCategory, Result};
pub use estimator::{
    count_transitions, count_transitions_window, empirical_marginal, estimate_first_order_chain,
    parse_table_csv, CountMatrix, MarginalDistribution, TransitionMatrix,
};
pub use matrix::ProbMatrix;
pub use panel::{
    ingest_panel, read_panel_csv, rectangularize, summarize, ColumnMapping, PanelRecord,
    PanelSummary, RectangularPanel, YearRange,
};
pub use simulator::{paired_swap_matrix, simulate_panel, GroundTruthChain, SimulatedPanel};
