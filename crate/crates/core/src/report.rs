//! Command orchestration: `analyze`, `simulate`, `verify` and `ck` as
//! library calls writing deterministic artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    chapman_kolmogorov_chain, entropy_table, group_entropy, transition_trend, CkReport, EntropyTable,
    GroupEntropy, Grouping, TrendOptions, TrendPoint, TrendWeight,
};
use crate::classifier::{classify_panel, default_scheme, CategoryScheme, StateGrid};
use crate::error::{Error, Result};
use crate::estimator::{
    count_transitions, count_transitions_window, empirical_marginal, estimate_first_order_chain,
    parse_table_csv, TransitionMatrix,
};
use crate::fixtures::{sha256_hex, FixtureSet};
use crate::matrix::ProbMatrix;
use crate::panel::{ingest_panel, rectangularize, ColumnMapping, PanelRecord, YearRange};
use crate::simulator::{paired_swap_matrix, simulate_panel, GroundTruthChain};

/// Exit code when every step ran but a check failed.
pub const EXIT_VERIFICATION_FAILED: i32 = 6;

/// Slack for reading matrices printed to 4 decimals.
pub const ROUNDING_SLACK: f64 = 2e-3;

pub const DEFAULT_CK_TOLERANCE: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Matrices as 4-decimal tables.
    #[default]
    Csv,
    /// Matrices as full-precision JSON with counts.
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub years: Option<YearRange>,
    pub scheme: Option<PathBuf>,
    pub seed: u64,
    pub format: Format,
    pub trend: TrendOptions,
    pub tolerance_ck: f64,
    pub strict: bool,
    /// Fixture directory; the compiled-in set when absent.
    pub fixtures: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out: PathBuf::from("out"),
            years: None,
            scheme: None,
            seed: 0,
            format: Format::Csv,
            trend: TrendOptions::default(),
            tolerance_ck: DEFAULT_CK_TOLERANCE,
            strict: false,
            fixtures: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_ck > 0.0) {
            return Err(Error::Config(format!(
                "CK tolerance must be positive, got {}",
                self.tolerance_ck
            )));
        }
        Ok(())
    }

    pub fn load_scheme(&self) -> Result<CategoryScheme> {
        match &self.scheme {
            Some(path) => CategoryScheme::from_path(path),
            None => Ok(default_scheme()),
        }
    }

    pub fn load_fixtures(&self) -> Result<FixtureSet> {
        match &self.fixtures {
            Some(dir) => FixtureSet::load(dir),
            None => FixtureSet::embedded(),
        }
    }

    fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("--input is required".into()))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn matrix_stem(m: &TransitionMatrix) -> String {
    format!("F_{}_{}", m.origin_year(), m.dest_year())
}

fn matrix_file(m: &TransitionMatrix, stem: &str, format: Format) -> (String, String) {
    match format {
        Format::Csv => (format!("{stem}.csv"), m.to_table_csv()),
        Format::Json => (format!("{stem}.json"), to_json(&m.to_json())),
    }
}

/// Raw panel bytes plus their parsed records.
struct PanelInput {
    path: PathBuf,
    sha256: String,
    records: Vec<PanelRecord>,
}

fn read_input(config: &RunConfig) -> Result<PanelInput> {
    let path = config.input_path()?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let records = ingest_panel(&bytes[..], &ColumnMapping::default())?;
    Ok(PanelInput {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        records,
    })
}

/// Records restricted to `years`, then rectangularized and classified.
fn build_grid(records: &[PanelRecord], years: Option<YearRange>, scheme: &CategoryScheme) -> Result<StateGrid> {
    let kept: Vec<PanelRecord> = match years {
        Some(r) => records.iter().filter(|rec| r.contains(rec.year)).cloned().collect(),
        None => records.to_vec(),
    };
    if kept.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let panel = rectangularize(&kept, years)?;
    classify_panel(&panel, scheme)
}

/// Per-pair analytics for one estimated matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub matrix: TransitionMatrix,
    pub trend: TrendPoint,
    pub entropy: EntropyTable,
    pub groups: GroupEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub grid: StateGrid,
    pub pairs: Vec<PairResult>,
    pub warnings: Vec<String>,
}

/// The whole analysis pipeline on a classified grid.
pub fn analyze_grid(grid: StateGrid, trend: TrendOptions, strict: bool) -> Result<Analysis> {
    let matrices = estimate_first_order_chain(&grid)?;
    if strict {
        if let Some(m) = matrices.iter().find(|m| !m.undefined_columns().is_empty()) {
            return Err(Error::UndefinedColumn {
                state: *m.undefined_columns().iter().next().expect("non-empty"),
                year: m.origin_year(),
            });
        }
    }
    let grouping = Grouping::small_medium_large();
    let grouping = (grouping.groups().iter().flat_map(|(_, s)| s).all(|&s| s < grid.n_states()))
        .then_some(grouping);
    let pairs: Vec<PairResult> = matrices
        .into_par_iter()
        .map(|matrix| {
            let weight_year = match trend.weight {
                TrendWeight::Dest => matrix.dest_year(),
                TrendWeight::Origin => matrix.origin_year(),
            };
            let marginal = empirical_marginal(&grid, weight_year)?;
            let entropy = entropy_table(&matrix);
            let groups = match &grouping {
                Some(g) => group_entropy(&entropy, g)?,
                None => GroupEntropy {
                    end_year: entropy.end_year,
                    values: Vec::new(),
                },
            };
            Ok(PairResult {
                trend: transition_trend(&matrix, &marginal, trend)?,
                entropy,
                groups,
                matrix,
            })
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    if grouping.is_none() {
        warnings.push(format!(
            "scheme has {} states; small/medium/large grouping needs 13, group entropy left empty",
            grid.n_states()
        ));
    }
    for p in &pairs {
        if !p.matrix.undefined_columns().is_empty() {
            warnings.push(format!(
                "{}-{}: undefined columns {:?} (no occupants in {})",
                p.matrix.origin_year(),
                p.matrix.dest_year(),
                p.matrix.undefined_columns(),
                p.matrix.origin_year()
            ));
        }
        if p.trend.q.is_none() {
            warnings.push(format!("{}: no downward mass, Q undefined", p.trend.end_year));
        }
    }
    Ok(Analysis { grid, pairs, warnings })
}

pub fn trend_csv(pairs: &[PairResult]) -> String {
    let mut out = String::from("end_year,L,R,Q\n");
    for p in pairs {
        let t = &p.trend;
        writeln!(out, "{},{},{},{}", t.end_year, t.l, t.r, opt(t.q)).unwrap();
    }
    out
}

/// Wide layout: one row per category, one column per end year.
pub fn entropy_csv(pairs: &[PairResult], n_states: usize) -> String {
    let mut out = String::from("category");
    for p in pairs {
        write!(out, ",{}", p.entropy.end_year).unwrap();
    }
    out.push('\n');
    for k in 0..n_states {
        write!(out, "{k}").unwrap();
        for p in pairs {
            write!(out, ",{}", opt(p.entropy.values[k])).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Long layout for plotting: `end_year,category,entropy`.
pub fn entropy_long_csv(pairs: &[PairResult]) -> String {
    let mut out = String::from("end_year,category,entropy\n");
    for p in pairs {
        for (k, v) in p.entropy.values.iter().enumerate() {
            writeln!(out, "{},{k},{}", p.entropy.end_year, opt(*v)).unwrap();
        }
    }
    out
}

pub fn group_entropy_csv(pairs: &[PairResult]) -> String {
    let mut out = String::from("end_year");
    if let Some(first) = pairs.first() {
        for (name, _) in &first.groups.values {
            write!(out, ",{name}").unwrap();
        }
    }
    out.push('\n');
    for p in pairs {
        write!(out, "{}", p.groups.end_year).unwrap();
        for (_, v) in &p.groups.values {
            write!(out, ",{}", opt(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub origin_year: i32,
    pub dest_year: i32,
    pub file: String,
    pub transitions: u64,
    pub undefined_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input: String,
    pub input_sha256: String,
    pub records: usize,
    pub entities: usize,
    pub years: String,
    pub scheme: String,
    pub boundaries: Vec<f64>,
    pub format: Format,
    pub trend: TrendOptions,
    /// Decimals in CSV matrix files; JSON keeps full precision.
    pub csv_matrix_decimals: u32,
    pub matrices: Vec<MatrixEntry>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

/// Runs the pipeline on `--input` and writes every artifact under `--out`.
pub fn run_analyze(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let scheme = config.load_scheme()?;
    let input = read_input(config)?;
    let grid = build_grid(&input.records, config.years, &scheme)?;
    let analysis = analyze_grid(grid, config.trend, config.strict)?;

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut matrices = Vec::new();
    for p in &analysis.pairs {
        let (name, body) = matrix_file(&p.matrix, &format!("matrices/{}", matrix_stem(&p.matrix)), config.format);
        matrices.push(MatrixEntry {
            origin_year: p.matrix.origin_year(),
            dest_year: p.matrix.dest_year(),
            file: name.clone(),
            transitions: p.matrix.counts().map_or(0, |c| c.total()),
            undefined_columns: p.matrix.undefined_columns().iter().copied().collect(),
        });
        files.insert(name, body);
    }
    let n_states = analysis.grid.n_states();
    files.insert("trend.csv".into(), trend_csv(&analysis.pairs));
    files.insert("entropy.csv".into(), entropy_csv(&analysis.pairs, n_states));
    files.insert("entropy_long.csv".into(), entropy_long_csv(&analysis.pairs));
    files.insert("group_entropy.csv".into(), group_entropy_csv(&analysis.pairs));

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: input.path.display().to_string(),
        input_sha256: input.sha256,
        records: input.records.len(),
        entities: analysis.grid.n_entities(),
        years: analysis.grid.years().to_string(),
        scheme: config
            .scheme
            .as_ref()
            .map_or_else(|| "default".to_string(), |p| p.display().to_string()),
        boundaries: scheme.boundaries().to_vec(),
        format: config.format,
        trend: config.trend,
        csv_matrix_decimals: 4,
        matrices,
        outputs: files.keys().cloned().collect(),
        warnings: analysis.warnings,
    };
    files.insert("run_manifest.json".into(), to_json(&manifest));
    for (name, body) in &files {
        write_file(&config.out.join(name), body)?;
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub n_entities: usize,
    /// Column-stochastic table file; a paired-swap chain when absent.
    pub matrix: Option<PathBuf>,
    pub states: Option<usize>,
    pub exit: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            n_entities: 10_000,
            matrix: None,
            states: None,
            exit: 0.004,
        }
    }
}

pub const DEFAULT_SIMULATION_YEARS: (i32, i32) = (2000, 2005);

/// Reads a 4-decimal table and renormalizes its columns when they are within
/// rounding slack of 1.
pub fn read_chain_matrix(path: &Path) -> Result<ProbMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = parse_table_csv(&text)?;
    m.check_stochastic(ROUNDING_SLACK)?;
    m.normalize_columns();
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub seed: u64,
    pub entities_requested: usize,
    pub entities_written: usize,
    pub years: String,
    pub matrix: String,
    pub initial: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
}

/// Writes `panel.csv` from a homogeneous chain started uniformly over all states.
pub fn run_simulate(config: &RunConfig, options: &SimulateOptions) -> Result<SimulationManifest> {
    let scheme = config.load_scheme()?;
    let n = options.states.unwrap_or(scheme.n_states());
    if n != scheme.n_states() {
        return Err(Error::DimensionMismatch {
            expected: scheme.n_states(),
            found: n,
        });
    }
    let (matrix, label) = match &options.matrix {
        Some(path) => (read_chain_matrix(path)?, path.display().to_string()),
        None => (paired_swap_matrix(n, options.exit)?, format!("paired-swap exit={}", options.exit)),
    };
    if matrix.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.n(),
        });
    }
    let years = match config.years {
        Some(y) => y,
        None => YearRange::new(DEFAULT_SIMULATION_YEARS.0, DEFAULT_SIMULATION_YEARS.1)?,
    };
    let initial = vec![1.0 / n as f64; n];
    let chain = GroundTruthChain::homogeneous(matrix.clone(), initial.clone(), config.seed)?;
    let sim = simulate_panel(&chain, options.n_entities, years, &scheme)?;

    let mut csv = Vec::new();
    sim.panel.write_csv(&mut csv)?;
    write_file(&config.out.join("panel.csv"), std::str::from_utf8(&csv).expect("utf-8"))?;
    let manifest = SimulationManifest {
        seed: config.seed,
        entities_requested: options.n_entities,
        entities_written: sim.panel.n_entities(),
        years: years.to_string(),
        matrix: label,
        initial,
        truth: matrix.rows(),
    };
    write_file(&config.out.join("simulation.json"), &to_json(&manifest))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    pub stochastic: f64,
    pub entropy: f64,
    pub ck_product: f64,
    pub second_order: f64,
    /// Half a unit in the last printed decimal of the trend table.
    pub trend_half_unit: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            stochastic: ROUNDING_SLACK,
            entropy: 5e-4,
            ck_product: DEFAULT_CK_TOLERANCE,
            second_order: 1.5e-3,
            trend_half_unit: 5e-5,
        }
    }
}

/// End year whose published entropies are incomplete.
pub const ENTROPY_EXCLUDED_END_YEARS: &[i32] = &[2012];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub max_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub details: Vec<String>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let mut s = format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        if let Some(d) = self.max_deviation {
            write!(s, " max_dev={d:.3e}").unwrap();
        }
        if let Some(t) = self.tolerance {
            write!(s, " tol={t:.1e}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, max_deviation: Option<f64>, tolerance: Option<f64>, details: Vec<String>) -> CheckResult {
    let within = match (max_deviation, tolerance) {
        (Some(d), Some(t)) => d <= t,
        _ => true,
    };
    CheckResult {
        name: name.into(),
        pass: within && details.is_empty(),
        max_deviation,
        tolerance,
        details,
    }
}

fn check_integrity(fixtures: &FixtureSet) -> CheckResult {
    check("integrity", None, None, fixtures.integrity_findings())
}

fn check_stochasticity(fixtures: &FixtureSet, tol: f64) -> CheckResult {
    let mut details = Vec::new();
    let mut worst: f64 = 0.0;
    for fm in fixtures.matrices() {
        let m = &fm.matrix;
        for i in m.defined_columns() {
            let sum = m.probs().column_sum(i);
            let dev = (sum - 1.0).abs();
            worst = worst.max(dev);
            if dev > tol {
                let mut msg = format!("{} column {i} sums to {sum:.4}", fm.label());
                let moved: Vec<usize> = fixtures
                    .manifest
                    .entry(&fm.file)
                    .and_then(|e| e.row_sums.as_ref())
                    .map(|rows| {
                        rows.iter()
                            .enumerate()
                            .filter(|(j, r)| (m.probs().row_sum(*j) - **r).abs() > 5e-9)
                            .map(|(j, _)| j)
                            .collect()
                    })
                    .unwrap_or_default();
                if let [row] = moved[..] {
                    write!(msg, "; row {row} column {i} differs from the manifest").unwrap();
                }
                details.push(msg);
            }
        }
        for j in 0..m.n_states() {
            for i in m.defined_columns() {
                let p = m.prob(j, i);
                if !(0.0..=1.0).contains(&p) {
                    details.push(format!("{} row {j} column {i} = {p} outside [0, 1]", fm.label()));
                }
            }
        }
    }
    check("stochasticity", Some(worst), Some(tol), details)
}

fn check_entropy(fixtures: &FixtureSet, tol: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for fm in &fixtures.first_order {
        let end = fm.matrix.dest_year();
        if ENTROPY_EXCLUDED_END_YEARS.contains(&end) {
            continue;
        }
        let Some(published) = fixtures.entropy.by_year.get(&end) else {
            details.push(format!("entropy table has no {end} column"));
            continue;
        };
        let table = entropy_table(&fm.matrix);
        for (k, (computed, expected)) in table.values.iter().zip(published).enumerate() {
            let Some(c) = computed else { continue };
            let dev = (c - expected).abs();
            worst = worst.max(dev);
            if dev > tol {
                details.push(format!(
                    "{} category {k}: computed {c:.4}, published {expected:.4}",
                    fm.label()
                ));
            }
        }
    }
    check("entropy", Some(worst), Some(tol), details)
}

fn ck_details(report: &CkReport, what: &str) -> Vec<String> {
    match (report.pass, report.worst_entry) {
        (false, Some((j, i))) => vec![format!(
            "{what}: row {j} column {i} deviates by {:.4}",
            report.max_deviation
        )],
        _ => Vec::new(),
    }
}

fn fixture_ck(fixtures: &FixtureSet, direct: &TransitionMatrix, tol: f64) -> Result<CkReport> {
    let (a, b) = (direct.origin_year(), direct.dest_year());
    let steps: Vec<TransitionMatrix> = (a..b)
        .map(|y| {
            fixtures
                .first_order_starting(y)
                .map(|f| f.matrix.clone())
                .ok_or_else(|| Error::Fixture(format!("no first-order table starting {y}")))
        })
        .collect::<Result<_>>()?;
    chapman_kolmogorov_chain(&steps, direct, tol)
}

fn check_ck_product(fixtures: &FixtureSet, tol: f64) -> Result<CheckResult> {
    let target = &fixtures.second_order_product;
    let report = fixture_ck(fixtures, &target.matrix, tol)?;
    Ok(check(
        "ck_product",
        Some(report.max_deviation),
        Some(tol),
        ck_details(&report, &target.label()),
    ))
}

fn check_second_order(fixtures: &FixtureSet, tol: f64) -> CheckResult {
    let a = &fixtures.second_order_product;
    let b = &fixtures.second_order_data;
    let n = a.matrix.n_states();
    let (mut worst, mut at) = (0.0, (0, 0));
    for i in 0..n {
        for j in 0..n {
            let d = (a.matrix.prob(j, i) - b.matrix.prob(j, i)).abs();
            if d > worst {
                worst = d;
                at = (j, i);
            }
        }
    }
    let details = if worst > tol {
        vec![format!(
            "{} vs {}: row {} column {} deviates by {worst:.4}",
            a.label(),
            b.label(),
            at.0,
            at.1
        )]
    } else {
        Vec::new()
    };
    check("second_order_agreement", Some(worst), Some(tol), details)
}

/// Interval of `L / R` consistent with `L` and `R` each rounded to within `h`.
pub fn ratio_interval(l: f64, r: f64, h: f64) -> Option<(f64, f64)> {
    (r > h).then(|| ((l - h).max(0.0) / (r + h), (l + h) / (r - h)))
}

/// Q must be reproducible from the printed L and R, allowing each printed
/// value its rounding half-unit.
fn check_trend(fixtures: &FixtureSet, h: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for row in &fixtures.trend {
        worst = worst.max((row.l / row.r - row.q).abs());
        let consistent = ratio_interval(row.l, row.r, h)
            .is_some_and(|(lo, hi)| row.q + h >= lo && row.q - h <= hi);
        if !consistent {
            details.push(format!(
                "{}: Q {:.4} is not L/R = {:.4}/{:.4} = {:.4} under rounding",
                row.end_year,
                row.q,
                row.l,
                row.r,
                row.l / row.r
            ));
        }
    }
    check("trend_ratio", Some(worst), None, details)
}

fn check_diagonal(fixtures: &FixtureSet) -> CheckResult {
    let mut details = Vec::new();
    for fm in fixtures.matrices() {
        let Some(cols) = fixtures
            .manifest
            .entry(&fm.file)
            .and_then(|e| e.diagonal_dominant_columns.as_ref())
        else {
            continue;
        };
        let m = &fm.matrix;
        for &i in cols {
            if let Some(j) = (1..m.n_states()).find(|&j| j != i && m.prob(j, i) > m.prob(i, i)) {
                details.push(format!("{} row {j} column {i} exceeds the diagonal", fm.label()));
            }
        }
    }
    check("diagonal_dominance", None, None, details)
}

pub fn run_verify(fixtures: &FixtureSet, tolerances: &VerifyTolerances) -> Result<VerifyReport> {
    Ok(VerifyReport {
        checks: vec![
            check_integrity(fixtures),
            check_stochasticity(fixtures, tolerances.stochastic),
            check_entropy(fixtures, tolerances.entropy),
            check_ck_product(fixtures, tolerances.ck_product)?,
            check_second_order(fixtures, tolerances.second_order),
            check_trend(fixtures, tolerances.trend_half_unit),
            check_diagonal(fixtures),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CkRun {
    pub direct: TransitionMatrix,
    pub report: CkReport,
}

/// CK check over `window` from a panel, or from the fixtures when no input is set.
pub fn compute_ck(config: &RunConfig, window: YearRange) -> Result<CkRun> {
    config.validate()?;
    if window.len() < 3 {
        return Err(Error::TooFewYears {
            needed: 3,
            got: window.len(),
        });
    }
    if config.input.is_none() {
        let fixtures = config.load_fixtures()?;
        let direct = fixtures
            .matrices()
            .find(|f| {
                f.kind == crate::fixtures::TableKind::SecondOrderData
                    && f.matrix.origin_year() == window.start
                    && f.matrix.dest_year() == window.end
            })
            .map(|f| f.matrix.clone())
            .ok_or_else(|| Error::Fixture(format!("no directly estimated fixture for {window}")))?;
        let report = fixture_ck(&fixtures, &direct, config.tolerance_ck)?;
        return Ok(CkRun { direct, report });
    }
    let scheme = config.load_scheme()?;
    let input = read_input(config)?;
    let grid = build_grid(&input.records, Some(window), &scheme)?;
    let steps: Vec<TransitionMatrix> = (window.start..window.end)
        .map(|y| count_transitions(&grid, y, y + 1))
        .collect::<Result<_>>()?;
    let direct = count_transitions_window(&grid, window.start, window.end)?;
    if config.strict {
        if let Some(&state) = direct.undefined_columns().iter().next() {
            return Err(Error::UndefinedColumn {
                state,
                year: window.start,
            });
        }
    }
    let report = chapman_kolmogorov_chain(&steps, &direct, config.tolerance_ck)?;
    Ok(CkRun { direct, report })
}

/// Writes the product, the direct matrix, the deviations and a JSON report.
pub fn run_ck(config: &RunConfig, window: YearRange) -> Result<CkRun> {
    let run = compute_ck(config, window)?;
    let stem = format!("{}_{}", window.start, window.end);
    let product = TransitionMatrix::from_probabilities(window.start, window.end, run.report.product.clone())?;
    let dir = config.out.join("ck");
    for (m, prefix) in [(&product, "product"), (&run.direct, "direct")] {
        let (name, body) = matrix_file(m, &format!("{prefix}_{stem}"), config.format);
        write_file(&dir.join(name), &body)?;
    }
    let mut dev = String::from("Size");
    for i in 0..run.report.deviations.len() {
        write!(dev, ",{i}").unwrap();
    }
    dev.push('\n');
    for (j, row) in run.report.deviations.iter().enumerate() {
        write!(dev, "{j}").unwrap();
        for d in row {
            write!(dev, ",{}", opt(*d)).unwrap();
        }
        dev.push('\n');
    }
    write_file(&dir.join(format!("deviations_{stem}.csv")), &dev)?;
    write_file(&dir.join(format!("ck_report_{stem}.json")), &to_json(&run.report))?;
    Ok(run)
}

/// Digest of a file on disk, for manifests and tests.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}
