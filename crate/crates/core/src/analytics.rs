//! Transition paths, trend ratios, entropies and the two-step consistency check.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{MarginalDistribution, TransitionMatrix};
use crate::matrix::ProbMatrix;

/// Marginals below this are treated as zero mass when checking undefined columns.
const MASS_EPS: f64 = 1e-15;

/// Pushes `initial` through the matrices in order: `P(d) = F(d-1, d) P(d-1)`.
///
/// The returned path starts with `initial` and has one entry per matrix after it.
pub fn propagate_path(
    initial: &MarginalDistribution,
    matrices: &[TransitionMatrix],
) -> Result<Vec<MarginalDistribution>> {
    let mut path = vec![initial.clone()];
    let mut current = initial.clone();
    for m in matrices {
        if m.origin_year() != current.year {
            return Err(Error::YearMismatch {
                expected: current.year,
                found: m.origin_year(),
            });
        }
        if m.n_states() != current.n_states() {
            return Err(Error::DimensionMismatch {
                expected: current.n_states(),
                found: m.n_states(),
            });
        }
        if let Some(&state) = m
            .undefined_columns()
            .iter()
            .find(|&&i| current.p[i] > MASS_EPS)
        {
            return Err(Error::UndefinedColumn {
                state,
                year: m.origin_year(),
            });
        }
        let p = m.probs().apply(&current.p)?;
        current = MarginalDistribution {
            year: m.dest_year(),
            p,
        };
        path.push(current.clone());
    }
    Ok(path)
}

/// `F^d` for a matrix without undefined columns.
pub fn matrix_power(matrix: &TransitionMatrix, d: u32) -> Result<ProbMatrix> {
    if let Some(&state) = matrix.undefined_columns().iter().next() {
        return Err(Error::UndefinedColumn {
            state,
            year: matrix.origin_year(),
        });
    }
    if d == 0 {
        return Err(Error::Config("matrix power must be at least 1".into()));
    }
    Ok(matrix.probs().power(d))
}

/// Which marginal weights `f_ji` in the trend sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendWeight {
    /// `p_j(d)`, the destination-year share of the destination state.
    #[default]
    Dest,
    /// `p_i(d-1)`, the origin-year share of the origin state.
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrendOptions {
    pub weight: TrendWeight,
    /// Drop every pair touching state 0 (entry and exit).
    pub exclude_entry_exit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub end_year: i32,
    /// Upward mass, destination above origin.
    pub l: f64,
    /// Downward mass, destination below origin.
    pub r: f64,
    /// `l / r`, absent when `r == 0`.
    pub q: Option<f64>,
    pub skipped_columns: Vec<usize>,
}

/// `R = sum_{j<i} f_ji w`, `L = sum_{j>i} f_ji w`, `Q = L / R`, where the
/// weight `w` is `p_j(d)` by default. Undefined columns are skipped.
pub fn transition_trend(
    matrix: &TransitionMatrix,
    marginal: &MarginalDistribution,
    options: TrendOptions,
) -> Result<TrendPoint> {
    let expected_year = match options.weight {
        TrendWeight::Dest => matrix.dest_year(),
        TrendWeight::Origin => matrix.origin_year(),
    };
    if marginal.year != expected_year {
        return Err(Error::YearMismatch {
            expected: expected_year,
            found: marginal.year,
        });
    }
    let n = matrix.n_states();
    if marginal.n_states() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: marginal.n_states(),
        });
    }
    let first = usize::from(options.exclude_entry_exit);
    let (mut l, mut r) = (0.0, 0.0);
    for i in matrix.defined_columns().filter(|&i| i >= first) {
        for j in first..n {
            let w = match options.weight {
                TrendWeight::Dest => marginal.p[j],
                TrendWeight::Origin => marginal.p[i],
            };
            let mass = matrix.prob(j, i) * w;
            if j > i {
                l += mass;
            } else if j < i {
                r += mass;
            }
        }
    }
    Ok(TrendPoint {
        end_year: matrix.dest_year(),
        l,
        r,
        q: (r > 0.0).then(|| l / r),
        skipped_columns: matrix.undefined_columns().iter().copied().collect(),
    })
}

/// Shannon entropy in nats over the positive entries.
pub fn entropy_nats(column: &[f64]) -> f64 {
    column
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `I_i = -sum_j f_ji ln f_ji` over positive entries.
pub fn column_entropy(matrix: &TransitionMatrix, state: usize) -> Result<f64> {
    if state >= matrix.n_states() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n_states(),
            found: state + 1,
        });
    }
    if !matrix.is_defined(state) {
        return Err(Error::UndefinedColumn {
            state,
            year: matrix.origin_year(),
        });
    }
    Ok(entropy_nats(&matrix.probs().column(state)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub end_year: i32,
    /// One entry per state; `None` for undefined columns.
    pub values: Vec<Option<f64>>,
}

impl EntropyTable {
    pub fn undefined_states(&self) -> BTreeSet<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn entropy_table(matrix: &TransitionMatrix) -> EntropyTable {
    EntropyTable {
        end_year: matrix.dest_year(),
        values: (0..matrix.n_states())
            .map(|i| column_entropy(matrix, i).ok())
            .collect(),
    }
}

/// Named, disjoint sets of states covering `1..n_states`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    groups: Vec<(String, Vec<usize>)>,
}

impl Grouping {
    pub fn new(n_states: usize, groups: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, states) in &groups {
            if states.is_empty() {
                return Err(Error::InvalidGrouping(format!("group `{name}` is empty")));
            }
            for &s in states {
                if s == 0 || s >= n_states {
                    return Err(Error::InvalidGrouping(format!("state {s} in `{name}` is not in 1..{n_states}")));
                }
                if !seen.insert(s) {
                    return Err(Error::InvalidGrouping(format!("state {s} appears in more than one group")));
                }
            }
        }
        if seen.len() != n_states - 1 {
            return Err(Error::InvalidGrouping(format!(
                "groups cover {} of the {} non-zero states",
                seen.len(),
                n_states - 1
            )));
        }
        Ok(Grouping { groups })
    }

    /// Small {1-3}, medium {4-6}, large {7-12} on the 13-state scheme.
    pub fn small_medium_large() -> Self {
        Grouping {
            groups: vec![
                ("small".into(), (1..=3).collect()),
                ("medium".into(), (4..=6).collect()),
                ("large".into(), (7..=12).collect()),
            ],
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|(n, _)| n.as_str())
    }

    pub fn groups(&self) -> &[(String, Vec<usize>)] {
        &self.groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntropy {
    pub end_year: i32,
    /// `(group name, mean entropy)`; `None` when every state of the group is undefined.
    pub values: Vec<(String, Option<f64>)>,
}

impl GroupEntropy {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }
}

/// Unweighted mean of the defined entropies in each group.
pub fn group_entropy(table: &EntropyTable, grouping: &Grouping) -> Result<GroupEntropy> {
    let values = grouping
        .groups
        .iter()
        .map(|(name, states)| {
            let defined: Vec<f64> = states
                .iter()
                .map(|&s| {
                    table.values.get(s).copied().ok_or_else(|| Error::DimensionMismatch {
                        expected: table.values.len(),
                        found: s + 1,
                    })
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            Ok((name.clone(), mean))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupEntropy {
        end_year: table.end_year,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkReport {
    pub origin_year: i32,
    pub dest_year: i32,
    /// Ordered product of the one-step matrices.
    pub product: ProbMatrix,
    /// `|product - direct|` per entry; `None` in excluded columns.
    pub deviations: Vec<Vec<Option<f64>>>,
    pub max_deviation: f64,
    /// `(dest, origin)` of the largest deviation.
    pub worst_entry: Option<(usize, usize)>,
    pub excluded_columns: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares `second * first` with the directly estimated two-step matrix.
pub fn chapman_kolmogorov_check(
    first: &TransitionMatrix,
    second: &TransitionMatrix,
    direct: &TransitionMatrix,
    tolerance: f64,
) -> Result<CkReport> {
    chapman_kolmogorov_chain(&[first.clone(), second.clone()], direct, tolerance)
}

/// Generalization to any number of contiguous steps spanning `direct`.
pub fn chapman_kolmogorov_chain(
    steps: &[TransitionMatrix],
    direct: &TransitionMatrix,
    tolerance: f64,
) -> Result<CkReport> {
    let first = steps.first().ok_or(Error::TooFewYears { needed: 2, got: 0 })?;
    if steps.len() < 2 {
        return Err(Error::TooFewYears {
            needed: 3,
            got: steps.len() + 1,
        });
    }
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let n = direct.n_states();
    for pair in steps.windows(2) {
        if pair[1].origin_year() != pair[0].dest_year() {
            return Err(Error::YearMismatch {
                expected: pair[0].dest_year(),
                found: pair[1].origin_year(),
            });
        }
    }
    let last = steps.last().expect("non-empty");
    if first.origin_year() != direct.origin_year() {
        return Err(Error::YearMismatch {
            expected: direct.origin_year(),
            found: first.origin_year(),
        });
    }
    if last.dest_year() != direct.dest_year() {
        return Err(Error::YearMismatch {
            expected: direct.dest_year(),
            found: last.dest_year(),
        });
    }
    if let Some(m) = steps.iter().find(|m| m.n_states() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.n_states(),
        });
    }

    // Origin columns whose mass reaches an undefined column at some step.
    let mut excluded: BTreeSet<usize> = direct.undefined_columns().clone();
    let mut product = ProbMatrix::identity(n);
    for m in steps {
        for i in 0..n {
            if m.undefined_columns().iter().any(|&k| product.get(k, i) > 0.0) {
                excluded.insert(i);
            }
        }
        product = m.probs().mul(&product)?;
    }

    let mut deviations = vec![vec![None; n]; n];
    let mut max_deviation = 0.0;
    let mut worst_entry = None;
    for i in (0..n).filter(|i| !excluded.contains(i)) {
        for j in 0..n {
            let d = (product.get(j, i) - direct.prob(j, i)).abs();
            deviations[j][i] = Some(d);
            if d > max_deviation || worst_entry.is_none() {
                max_deviation = d;
                worst_entry = Some((j, i));
            }
        }
    }
    Ok(CkReport {
        origin_year: direct.origin_year(),
        dest_year: direct.dest_year(),
        product,
        deviations,
        max_deviation,
        worst_entry,
        excluded_columns: excluded.into_iter().collect(),
        tolerance,
        pass: max_deviation <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::CountMatrix;
    use proptest::prelude::*;

    fn tm(origin: i32, m: ProbMatrix) -> TransitionMatrix {
        TransitionMatrix::from_probabilities(origin, origin + 1, m).unwrap()
    }

    fn flip() -> ProbMatrix {
        ProbMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn random_stochastic(n: usize, raw: &[f64]) -> ProbMatrix {
        let mut m = ProbMatrix::from_fn(n, |j, i| raw[j * n + i] + 1e-3);
        m.normalize_columns();
        m
    }

    #[test]
    fn identity_path_is_constant() {
        let p0 = MarginalDistribution::new(2000, vec![0.2, 0.3, 0.5]).unwrap();
        let chain: Vec<_> = (0..4).map(|k| tm(2000 + k, ProbMatrix::identity(3))).collect();
        let path = propagate_path(&p0, &chain).unwrap();
        assert_eq!(path.len(), 5);
        assert!(path.iter().all(|p| p.p == p0.p));
        assert_eq!(path.last().unwrap().year, 2004);
    }

    #[test]
    fn indicator_extracts_column() {
        let m = ProbMatrix::from_rows(&[vec![0.1, 0.0, 0.3], vec![0.6, 1.0, 0.3], vec![0.3, 0.0, 0.4]]).unwrap();
        let path = propagate_path(&MarginalDistribution::indicator(1, 3, 2), &[tm(1, m.clone())]).unwrap();
        assert_eq!(path[1].p, m.column(2));
    }

    #[test]
    fn two_steps_equal_ordered_product() {
        let a = ProbMatrix::from_rows(&[vec![0.5, 0.2], vec![0.5, 0.8]]).unwrap();
        let b = ProbMatrix::from_rows(&[vec![0.9, 0.3], vec![0.1, 0.7]]).unwrap();
        let p0 = MarginalDistribution::new(0, vec![0.4, 0.6]).unwrap();
        let path = propagate_path(&p0, &[tm(0, a.clone()), tm(1, b.clone())]).unwrap();
        // hand expansion of b * a * p0
        let ap = [0.5 * 0.4 + 0.2 * 0.6, 0.5 * 0.4 + 0.8 * 0.6];
        let bap = [0.9 * ap[0] + 0.3 * ap[1], 0.1 * ap[0] + 0.7 * ap[1]];
        assert!((path[2].p[0] - bap[0]).abs() < 1e-15 && (path[2].p[1] - bap[1]).abs() < 1e-15);
        let direct = b.mul(&a).unwrap().apply(&p0.p).unwrap();
        assert!((path[2].p[0] - direct[0]).abs() < 1e-15);
    }

    #[test]
    fn path_errors() {
        let p0 = MarginalDistribution::indicator(2000, 2, 0);
        assert!(matches!(
            propagate_path(&p0, &[tm(2001, ProbMatrix::identity(2))]),
            Err(Error::YearMismatch { expected: 2000, found: 2001 })
        ));
        let counts = CountMatrix::from_rows(&[vec![0, 0], vec![0, 4]]).unwrap();
        let undefined = TransitionMatrix::from_counts(2000, 2001, counts).unwrap();
        assert!(matches!(
            propagate_path(&p0, std::slice::from_ref(&undefined)),
            Err(Error::UndefinedColumn { state: 0, year: 2000 })
        ));
        // no mass on the undefined column is fine
        propagate_path(&MarginalDistribution::indicator(2000, 2, 1), &[undefined]).unwrap();
    }

    #[test]
    fn powers() {
        let f = tm(0, flip());
        assert_eq!(matrix_power(&f, 1).unwrap(), flip());
        assert_eq!(matrix_power(&f, 2).unwrap(), ProbMatrix::identity(2));
        assert_eq!(matrix_power(&tm(0, ProbMatrix::identity(4)), 7).unwrap(), ProbMatrix::identity(4));
        let counts = CountMatrix::from_rows(&[vec![0, 0], vec![0, 4]]).unwrap();
        let undefined = TransitionMatrix::from_counts(0, 1, counts).unwrap();
        assert!(matches!(matrix_power(&undefined, 2), Err(Error::UndefinedColumn { .. })));
        assert!(matrix_power(&f, 0).is_err());
    }

    #[test]
    fn trend_identity_and_symmetry() {
        let id = TransitionMatrix::from_probabilities(0, 1, ProbMatrix::identity(3)).unwrap();
        let p = MarginalDistribution::new(1, vec![0.2, 0.5, 0.3]).unwrap();
        let t = transition_trend(&id, &p, TrendOptions::default()).unwrap();
        assert_eq!((t.l, t.r, t.q), (0.0, 0.0, None));

        let sym = ProbMatrix::from_rows(&[vec![0.8, 0.1, 0.0], vec![0.2, 0.8, 0.2], vec![0.0, 0.1, 0.8]]).unwrap();
        let sym = TransitionMatrix::from_probabilities(0, 1, sym).unwrap();
        let p = MarginalDistribution::new(1, vec![0.3, 0.4, 0.3]).unwrap();
        let t = transition_trend(&sym, &p, TrendOptions::default()).unwrap();
        assert!((t.q.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trend_by_hand() {
        // f = [[0, .5], [1, .5]], p(d) = (.25, .75)
        // L = f_10 p_1 = .75 ; R = f_01 p_0 = .125
        let f = ProbMatrix::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.5]]).unwrap();
        let m = TransitionMatrix::from_probabilities(5, 6, f).unwrap();
        let p = MarginalDistribution::new(6, vec![0.25, 0.75]).unwrap();
        let t = transition_trend(&m, &p, TrendOptions::default()).unwrap();
        assert_eq!((t.l, t.r), (0.75, 0.125));
        assert_eq!(t.q, Some(6.0));
        // origin weights: L = f_10 p_0, R = f_01 p_1
        let po = MarginalDistribution::new(5, vec![0.4, 0.6]).unwrap();
        let opts = TrendOptions { weight: TrendWeight::Origin, ..Default::default() };
        let t = transition_trend(&m, &po, opts).unwrap();
        assert_eq!((t.l, t.r), (0.4, 0.3));
        // entry/exit masked: only the 1x1 block remains
        let opts = TrendOptions { exclude_entry_exit: true, ..Default::default() };
        let t = transition_trend(&m, &p, opts).unwrap();
        assert_eq!((t.l, t.r, t.q), (0.0, 0.0, None));
        assert!(matches!(
            transition_trend(&m, &po, TrendOptions::default()),
            Err(Error::YearMismatch { expected: 6, found: 5 })
        ));
    }

    #[test]
    fn entropy_extremes() {
        let id = TransitionMatrix::from_probabilities(0, 1, ProbMatrix::identity(4)).unwrap();
        assert_eq!(column_entropy(&id, 2).unwrap(), 0.0);
        assert!(entropy_table(&id).values.iter().all(|v| *v == Some(0.0)));
        let uniform = vec![0.25; 4];
        assert!((entropy_nats(&uniform) - 4f64.ln()).abs() < 1e-15);
        let counts = CountMatrix::from_rows(&[vec![0, 0], vec![0, 4]]).unwrap();
        let undefined = TransitionMatrix::from_counts(0, 1, counts).unwrap();
        assert!(matches!(column_entropy(&undefined, 0), Err(Error::UndefinedColumn { .. })));
        let table = entropy_table(&undefined);
        assert_eq!(table.values, vec![None, Some(0.0)]);
        assert_eq!(table.undefined_states().into_iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn published_column_entropy() {
        // 1998 -> 1999, origin state 12: 0.0286, 0.0286, 0.2571, 0.6857
        let col = [0.0286, 0.0286, 0.2571, 0.6857];
        assert!((entropy_nats(&col) - 0.8113).abs() < 5e-4);
    }

    #[test]
    fn group_means() {
        let mut values = vec![Some(9.0); 13];
        values[1] = Some(1.3928);
        values[2] = Some(1.3500);
        values[3] = Some(1.2867);
        let table = EntropyTable { end_year: 1999, values };
        let g = group_entropy(&table, &Grouping::small_medium_large()).unwrap();
        assert!((g.get("small").unwrap() - 1.3432).abs() < 5e-5);
        assert_eq!(g.get("medium"), Some(9.0));

        let flat = EntropyTable { end_year: 1, values: vec![Some(0.7); 13] };
        let g = group_entropy(&flat, &Grouping::small_medium_large()).unwrap();
        assert!(g.values.iter().all(|(_, v)| (v.unwrap() - 0.7).abs() < 1e-15));

        let mut holes = vec![Some(1.0); 13];
        for k in 4..=6 {
            holes[k] = None;
        }
        holes[1] = None;
        let g = group_entropy(&EntropyTable { end_year: 1, values: holes }, &Grouping::small_medium_large()).unwrap();
        assert_eq!(g.get("medium"), None);
        assert_eq!(g.get("small"), Some(1.0));
    }

    #[test]
    fn grouping_validation() {
        assert!(Grouping::new(13, Grouping::small_medium_large().groups).is_ok());
        assert!(Grouping::new(4, vec![("a".into(), vec![1, 2])]).is_err());
        assert!(Grouping::new(4, vec![("a".into(), vec![1, 2]), ("b".into(), vec![2, 3])]).is_err());
        assert!(Grouping::new(4, vec![("a".into(), vec![0, 1, 2, 3])]).is_err());
    }

    #[test]
    fn ck_identity_second() {
        let a = ProbMatrix::from_rows(&[vec![0.5, 0.2], vec![0.5, 0.8]]).unwrap();
        let first = tm(0, a.clone());
        let second = tm(1, ProbMatrix::identity(2));
        let direct = TransitionMatrix::from_probabilities(0, 2, a).unwrap();
        let r = chapman_kolmogorov_check(&first, &second, &direct, 1e-12).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.pass);
        let bad = TransitionMatrix::from_probabilities(1, 3, ProbMatrix::identity(2)).unwrap();
        assert!(matches!(
            chapman_kolmogorov_check(&first, &second, &bad, 1e-3),
            Err(Error::YearMismatch { .. })
        ));
        assert!(chapman_kolmogorov_check(&first, &tm(2, ProbMatrix::identity(2)), &direct, 1e-3).is_err());
    }

    #[test]
    fn ck_excludes_undefined() {
        let counts = CountMatrix::from_rows(&[vec![0, 0, 0], vec![3, 2, 0], vec![0, 2, 0]]).unwrap();
        let first = TransitionMatrix::from_counts(0, 1, counts).unwrap();
        let second = tm(1, ProbMatrix::identity(3));
        let direct = TransitionMatrix::from_probabilities(0, 2, ProbMatrix::identity(3)).unwrap();
        let r = chapman_kolmogorov_check(&first, &second, &direct, 0.1).unwrap();
        assert_eq!(r.excluded_columns, vec![2]);
        assert!(r.deviations[0][2].is_none());
        assert_eq!(r.worst_entry, Some((0, 0)));
        assert_eq!(r.max_deviation, 1.0);
        assert!(!r.pass);
    }

    proptest! {
        #[test]
        fn power_additivity(raw in proptest::collection::vec(0.0f64..1.0, 16), a in 1u32..6, b in 1u32..6) {
            let f = random_stochastic(4, &raw);
            let m = tm(0, f.clone());
            let lhs = matrix_power(&m, a + b).unwrap();
            let rhs = matrix_power(&m, a).unwrap().mul(&matrix_power(&m, b).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
            prop_assert!(lhs.stochastic_deviation(0..4) <= 1e-10);
        }

        #[test]
        fn entropy_permutation_invariant(raw in proptest::collection::vec(0.0f64..1.0, 2..13), rot in 0usize..13) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let col: Vec<f64> = raw.iter().map(|x| (x + 1e-9 / raw.len() as f64) / total).collect();
            let mut perm = col.clone();
            perm.rotate_left(rot % col.len());
            perm.reverse();
            prop_assert!((entropy_nats(&col) - entropy_nats(&perm)).abs() < 1e-12);
            prop_assert!(entropy_nats(&col) <= (col.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn path_conserves_mass(raw in proptest::collection::vec(0.0f64..1.0, 13 * 13 * 15), p in proptest::collection::vec(0.0f64..1.0, 13)) {
            let chain: Vec<_> = raw
                .chunks(169)
                .enumerate()
                .map(|(k, c)| tm(2000 + k as i32, random_stochastic(13, c)))
                .collect();
            let s: f64 = p.iter().sum::<f64>() + 1e-6;
            let p0 = MarginalDistribution::new(2000, p.iter().map(|x| (x + 1e-6 / 13.0) / s).collect()).unwrap();
            let path = propagate_path(&p0, &chain).unwrap();
            prop_assert_eq!(path.len(), 16);
            for m in &path {
                prop_assert!((m.p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            }
        }
    }
}
