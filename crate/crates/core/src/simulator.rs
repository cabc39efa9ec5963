//! Synthetic panels drawn from a known chain.
//!
//! Randomness is fully specified so runs reproduce across platforms and
//! languages:
//!
//! * entity `e` gets its own xoshiro256** generator, whose 256-bit state is
//!   four consecutive SplitMix64 outputs starting from `seed + e * 0x9E3779B97F4A7C15`
//!   (wrapping), packed little-endian;
//! * a uniform `u` in `[0, 1)` is `(next_u64 >> 11) * 2^-53`;
//! * a state is drawn from a column by inverse CDF: the first `j` with
//!   `u < f_0 + ... + f_j`;
//! * a size for state `k` is an integer drawn from the category's integer
//!   range with `lo + (next_u64 * span) >> 64`.
//!
//! Each trajectory consumes: one uniform for the initial state, then one
//! uniform per step, then one draw per present year for the sizes.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{CategoryScheme, StateGrid};
use crate::error::{Error, Result};
use crate::matrix::ProbMatrix;
use crate::panel::{RectangularPanel, YearRange};

const STREAM_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepMatrices {
    Homogeneous(ProbMatrix),
    /// One matrix per step; step `t` moves year `t` to `t + 1`.
    PerStep(Vec<ProbMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthChain {
    steps: StepMatrices,
    initial: Vec<f64>,
    seed: u64,
}

impl GroundTruthChain {
    pub fn homogeneous(matrix: ProbMatrix, initial: Vec<f64>, seed: u64) -> Result<Self> {
        Self::build(StepMatrices::Homogeneous(matrix), initial, seed)
    }

    pub fn per_step(matrices: Vec<ProbMatrix>, initial: Vec<f64>, seed: u64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Config("a per-step chain needs at least one matrix".into()));
        }
        Self::build(StepMatrices::PerStep(matrices), initial, seed)
    }

    fn build(steps: StepMatrices, initial: Vec<f64>, seed: u64) -> Result<Self> {
        let n = initial.len();
        let mats: Vec<&ProbMatrix> = match &steps {
            StepMatrices::Homogeneous(m) => vec![m],
            StepMatrices::PerStep(ms) => ms.iter().collect(),
        };
        for m in mats {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.n(),
                });
            }
            m.check_stochastic(STOCHASTIC_TOL)?;
        }
        let sum: f64 = initial.iter().sum();
        if initial.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotDistribution(sum));
        }
        Ok(GroundTruthChain { steps, initial, seed })
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Matrix moving year offset `t` to `t + 1`. Per-step chains reuse their
    /// last matrix past the end.
    pub fn step(&self, t: usize) -> &ProbMatrix {
        match &self.steps {
            StepMatrices::Homogeneous(m) => m,
            StepMatrices::PerStep(ms) => &ms[t.min(ms.len() - 1)],
        }
    }
}

/// Reference chain used by the consistency checks: entrants join state 1,
/// states pair up as (1,2), (3,4), ... and swap partners every year, and
/// every state except 1 exits with probability `exit`. Columns are nearly
/// deterministic while upward and downward mass are both large.
pub fn paired_swap_matrix(n_states: usize, exit: f64) -> Result<ProbMatrix> {
    if n_states < 3 || n_states.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "paired swap chain needs an odd number of states >= 3, got {n_states}"
        )));
    }
    if !(0.0..1.0).contains(&exit) {
        return Err(Error::Config(format!("exit probability {exit} outside [0, 1)")));
    }
    let mut m = ProbMatrix::zeros(n_states);
    m.set(1, 0, 1.0);
    for i in 1..n_states {
        let partner = if i % 2 == 1 { i + 1 } else { i - 1 };
        let leave = if i == 1 { 0.0 } else { exit };
        m.set(0, i, leave);
        m.set(partner, i, 1.0 - leave);
    }
    Ok(m)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(STREAM_STRIDE);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn entity_rng(seed: u64, entity: u64) -> Xoshiro256StarStar {
    let mut sm = seed.wrapping_add(entity.wrapping_mul(STREAM_STRIDE));
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut sm).to_le_bytes());
    }
    Xoshiro256StarStar::from_seed(bytes)
}

fn uniform(rng: &mut impl Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn draw(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return k;
        }
    }
    last_positive
}

fn trajectory(chain: &GroundTruthChain, n_years: usize, rng: &mut Xoshiro256StarStar) -> Vec<usize> {
    let mut states = Vec::with_capacity(n_years);
    if n_years == 0 {
        return states;
    }
    let mut s = draw(chain.initial.iter().copied(), uniform(rng));
    states.push(s);
    for t in 1..n_years {
        let m = chain.step(t - 1);
        s = draw((0..m.n()).map(|j| m.get(j, s)), uniform(rng));
        states.push(s);
    }
    states
}

/// Trajectory of entity 0 of the chain's seed stream.
pub fn sample_trajectory(chain: &GroundTruthChain, n_years: usize) -> Vec<usize> {
    sample_entity_trajectory(chain, n_years, 0)
}

pub fn sample_entity_trajectory(chain: &GroundTruthChain, n_years: usize, entity: u64) -> Vec<usize> {
    trajectory(chain, n_years, &mut entity_rng(chain.seed, entity))
}

/// Integer sizes inside the category when it holds any, else its midpoint.
fn render_size(scheme: &CategoryScheme, state: usize, rng: &mut impl Rng) -> f64 {
    let (lo, hi) = scheme.interval(state).expect("state >= 1 within scheme");
    let hi = hi.unwrap_or(if lo > 0.0 { 2.0 * lo } else { 2.0 });
    let first = lo.ceil().max(1.0);
    let last = hi.ceil() - 1.0;
    if first <= last {
        let span = (last - first) as u64 + 1;
        let offset = ((rng.next_u64() as u128 * span as u128) >> 64) as u64;
        first + offset as f64
    } else {
        (lo + hi) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: RectangularPanel,
    pub truth: StateGrid,
}

/// Entity ids are `E` plus the zero-padded stream index. Entities that never
/// leave state 0 have no observations and are dropped from both outputs.
pub fn simulate_panel(
    chain: &GroundTruthChain,
    n_entities: usize,
    years: YearRange,
    scheme: &CategoryScheme,
) -> Result<SimulatedPanel> {
    if n_entities == 0 {
        return Err(Error::Config("need at least one entity".into()));
    }
    if scheme.n_states() != chain.n_states() {
        return Err(Error::DimensionMismatch {
            expected: chain.n_states(),
            found: scheme.n_states(),
        });
    }
    let width = years.len();
    let rows: Vec<Option<(usize, Vec<usize>, Vec<f64>)>> = (0..n_entities)
        .into_par_iter()
        .map(|e| {
            let mut rng = entity_rng(chain.seed, e as u64);
            let states = trajectory(chain, width, &mut rng);
            if states.iter().all(|&s| s == 0) {
                return None;
            }
            let sizes = states
                .iter()
                .map(|&s| if s == 0 { 0.0 } else { render_size(scheme, s, &mut rng) })
                .collect();
            Some((e, states, sizes))
        })
        .collect();

    let digits = (n_entities - 1).max(1).to_string().len().max(6);
    let mut entities = Vec::new();
    let mut states = Vec::new();
    let mut cells = Vec::new();
    for (e, s, c) in rows.into_iter().flatten() {
        entities.push(format!("E{e:0digits$}"));
        states.extend(s);
        cells.extend(c);
    }
    if entities.is_empty() {
        return Err(Error::NoObservations);
    }
    Ok(SimulatedPanel {
        truth: StateGrid::new(entities.clone(), years, chain.n_states(), states)?,
        panel: RectangularPanel::from_cells(entities, years, cells)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify_panel, default_scheme};

    fn uniform_initial(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn identity_is_constant() {
        let chain = GroundTruthChain::homogeneous(ProbMatrix::identity(5), vec![0.0, 0.0, 0.0, 1.0, 0.0], 7).unwrap();
        assert_eq!(sample_trajectory(&chain, 6), vec![3; 6]);
    }

    #[test]
    fn absorbing_zero() {
        let mut m = ProbMatrix::from_fn(3, |_, _| 1.0 / 3.0);
        for j in 0..3 {
            m.set(j, 0, if j == 0 { 1.0 } else { 0.0 });
        }
        m.normalize_columns();
        for seed in 0..50 {
            let chain = GroundTruthChain::homogeneous(m.clone(), uniform_initial(3), seed).unwrap();
            let t = sample_trajectory(&chain, 20);
            if let Some(first) = t.iter().position(|&s| s == 0) {
                assert!(t[first..].iter().all(|&s| s == 0));
            }
        }
    }

    #[test]
    fn flip_alternates() {
        let flip = ProbMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let chain = GroundTruthChain::homogeneous(flip, vec![0.0, 1.0], 1).unwrap();
        assert_eq!(sample_trajectory(&chain, 5), vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn identity_panel_classifies_to_start() {
        let mut initial = vec![0.0; 13];
        initial[3] = 1.0;
        let chain = GroundTruthChain::homogeneous(ProbMatrix::identity(13), initial, 3).unwrap();
        let sim = simulate_panel(&chain, 50, YearRange::new(2000, 2003).unwrap(), &default_scheme()).unwrap();
        let grid = classify_panel(&sim.panel, &default_scheme()).unwrap();
        assert!(grid.states().iter().all(|&s| s == 3));
        assert!(sim.panel.cells().iter().all(|&c| (50.0..100.0).contains(&c)));
    }

    #[test]
    fn never_present_entities_are_dropped() {
        let chain = GroundTruthChain::homogeneous(ProbMatrix::identity(3), vec![0.5, 0.5, 0.0], 11).unwrap();
        let scheme = CategoryScheme::new(vec![0.0, 10.0]).unwrap();
        let sim = simulate_panel(&chain, 200, YearRange::new(1, 3).unwrap(), &scheme).unwrap();
        assert!(sim.panel.n_entities() < 200);
        assert!(sim.truth.states().iter().all(|&s| s == 1));
    }

    #[test]
    fn chain_validation() {
        let bad = ProbMatrix::from_rows(&[vec![0.5, 0.0], vec![0.4, 1.0]]).unwrap();
        assert!(GroundTruthChain::homogeneous(bad, vec![0.5, 0.5], 0).is_err());
        assert!(GroundTruthChain::homogeneous(ProbMatrix::identity(2), vec![0.6, 0.6], 0).is_err());
        assert!(GroundTruthChain::homogeneous(ProbMatrix::identity(2), vec![1.0, 0.0, 0.0], 0).is_err());
        assert!(paired_swap_matrix(4, 0.1).is_err());
        let m = paired_swap_matrix(13, 0.004).unwrap();
        m.check_stochastic(1e-15).unwrap();
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(2, 1), 1.0);
        assert_eq!(m.get(11, 12), 0.996);
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let m = paired_swap_matrix(13, 0.2).unwrap();
        let a = GroundTruthChain::homogeneous(m.clone(), uniform_initial(13), 42).unwrap();
        let years = YearRange::new(2000, 2005).unwrap();
        let s1 = simulate_panel(&a, 500, years, &default_scheme()).unwrap();
        let s2 = simulate_panel(&a, 500, years, &default_scheme()).unwrap();
        assert_eq!(s1, s2);
        let b = a.clone().with_seed(43);
        assert_ne!(simulate_panel(&b, 500, years, &default_scheme()).unwrap(), s1);
    }

    #[test]
    fn known_first_draws() {
        let mut sm = 0u64;
        assert_eq!(splitmix64(&mut sm), 0xE220_A839_7B1D_CDAF);
        let mut rng = entity_rng(0, 0);
        assert_eq!(rng.next_u64(), 0x99EC_5F36_CB75_F2B4);
        assert_eq!(rng.next_u64(), 0xBF6E_1F78_4956_452A);
        let mut rng = entity_rng(42, 1);
        assert_eq!(rng.next_u64(), 0xBE15_272C_DF80_B6C2);
        assert_eq!(rng.next_u64(), 0xAF6E_2EE4_9FF5_D0E3);
    }
}
