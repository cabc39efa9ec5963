//! Size categories.
//!
//! A scheme with boundaries `b_0 = 0 < b_1 < ... < b_{K-1}` has `K + 1`
//! states. State 0 is reserved for size 0 (non-existence); state `k` in
//! `1..K` covers `[b_{k-1}, b_k)` and state `K` covers `[b_{K-1}, inf)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{RectangularPanel, YearRange};

/// Employee-count boundaries of the 13-state firm size classification.
pub const DEFAULT_BOUNDARIES: [f64; 12] = [
    0.0, 20.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2500.0, 5000.0, 10000.0, 25000.0, 50000.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeFile", into = "SchemeFile")]
pub struct CategoryScheme {
    boundaries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SchemeFile {
    boundaries: Vec<f64>,
}

impl TryFrom<SchemeFile> for CategoryScheme {
    type Error = Error;
    fn try_from(f: SchemeFile) -> Result<Self> {
        CategoryScheme::new(f.boundaries)
    }
}

impl From<CategoryScheme> for SchemeFile {
    fn from(s: CategoryScheme) -> Self {
        SchemeFile {
            boundaries: s.boundaries,
        }
    }
}

impl Default for CategoryScheme {
    fn default() -> Self {
        default_scheme()
    }
}

pub fn default_scheme() -> CategoryScheme {
    CategoryScheme {
        boundaries: DEFAULT_BOUNDARIES.to_vec(),
    }
}

impl CategoryScheme {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        match boundaries.first() {
            None => return Err(Error::InvalidScheme("no boundaries".into())),
            Some(&b) if b != 0.0 => {
                return Err(Error::InvalidScheme(format!("first boundary must be 0, got {b}")))
            }
            _ => {}
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidScheme("boundaries must be finite".into()));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScheme(format!(
                "boundaries must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(CategoryScheme { boundaries })
    }

    /// Parses a TOML document of the form `boundaries = [0, 20, 50]`.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidScheme(e.message().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scheme serializes")
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn n_states(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Highest state index.
    pub fn top_state(&self) -> usize {
        self.boundaries.len()
    }

    pub fn classify(&self, size: f64) -> Result<usize> {
        if size.is_nan() || size < 0.0 {
            return Err(Error::NegativeSize(size));
        }
        if size == 0.0 {
            return Ok(0);
        }
        // number of boundaries <= size; b_0 = 0 < size so this is >= 1
        Ok(self.boundaries.partition_point(|&b| b <= size))
    }

    /// Half-open interval `[lo, hi)` of state `k >= 1`; `hi` is `None` for the top state.
    pub fn interval(&self, state: usize) -> Option<(f64, Option<f64>)> {
        if state == 0 || state > self.top_state() {
            return None;
        }
        Some((self.boundaries[state - 1], self.boundaries.get(state).copied()))
    }
}

/// Classified panel: one state per entity-year, entity-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGrid {
    entities: Vec<String>,
    years: YearRange,
    n_states: usize,
    states: Vec<usize>,
}

impl StateGrid {
    pub fn new(entities: Vec<String>, years: YearRange, n_states: usize, states: Vec<usize>) -> Result<Self> {
        if states.len() != entities.len() * years.len() {
            return Err(Error::DimensionMismatch {
                expected: entities.len() * years.len(),
                found: states.len(),
            });
        }
        if let Some(&s) = states.iter().find(|&&s| s >= n_states) {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                found: s + 1,
            });
        }
        Ok(StateGrid {
            entities,
            years,
            n_states,
            states,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn years(&self) -> YearRange {
        self.years
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn row(&self, entity: usize) -> &[usize] {
        let w = self.years.len();
        &self.states[entity * w..(entity + 1) * w]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, usize> {
        self.states.chunks_exact(self.years.len())
    }

    pub fn state(&self, entity: usize, year: i32) -> Result<usize> {
        Ok(self.row(entity)[self.years.offset(year)?])
    }
}

pub fn classify_panel(panel: &RectangularPanel, scheme: &CategoryScheme) -> Result<StateGrid> {
    let states = panel
        .cells()
        .iter()
        .map(|&c| scheme.classify(c))
        .collect::<Result<Vec<_>>>()?;
    StateGrid::new(panel.entities().to_vec(), panel.years(), scheme.n_states(), states)
}
