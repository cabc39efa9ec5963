//! Published reference tables: the 15 one-year matrices 1998-2013, the two
//! 1998-2000 two-year matrices, the trend table and the entropy table.
//!
//! Files live in `fixtures/` and are compiled into the binary. A manifest
//! records each file's SHA-256 plus its row and column sums, so a drifted
//! entry can be located by the row and column whose sums moved.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{parse_table_csv, TransitionMatrix};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Shipped fixture files, compiled in.
pub const EMBEDDED: &[(&str, &str)] = &[
    ("table03_second_order_product_1998_2000.csv", include_str!("../fixtures/table03_second_order_product_1998_2000.csv")),
    ("table04_second_order_data_1998_2000.csv", include_str!("../fixtures/table04_second_order_data_1998_2000.csv")),
    ("table05_first_order_1998_1999.csv", include_str!("../fixtures/table05_first_order_1998_1999.csv")),
    ("table06_first_order_1999_2000.csv", include_str!("../fixtures/table06_first_order_1999_2000.csv")),
    ("table07_first_order_2000_2001.csv", include_str!("../fixtures/table07_first_order_2000_2001.csv")),
    ("table08_first_order_2001_2002.csv", include_str!("../fixtures/table08_first_order_2001_2002.csv")),
    ("table09_first_order_2002_2003.csv", include_str!("../fixtures/table09_first_order_2002_2003.csv")),
    ("table10_first_order_2003_2004.csv", include_str!("../fixtures/table10_first_order_2003_2004.csv")),
    ("table11_first_order_2004_2005.csv", include_str!("../fixtures/table11_first_order_2004_2005.csv")),
    ("table12_first_order_2005_2006.csv", include_str!("../fixtures/table12_first_order_2005_2006.csv")),
    ("table13_first_order_2006_2007.csv", include_str!("../fixtures/table13_first_order_2006_2007.csv")),
    ("table14_first_order_2007_2008.csv", include_str!("../fixtures/table14_first_order_2007_2008.csv")),
    ("table15_first_order_2008_2009.csv", include_str!("../fixtures/table15_first_order_2008_2009.csv")),
    ("table16_first_order_2009_2010.csv", include_str!("../fixtures/table16_first_order_2009_2010.csv")),
    ("table17_first_order_2010_2011.csv", include_str!("../fixtures/table17_first_order_2010_2011.csv")),
    ("table18_first_order_2011_2012.csv", include_str!("../fixtures/table18_first_order_2011_2012.csv")),
    ("table19_first_order_2012_2013.csv", include_str!("../fixtures/table19_first_order_2012_2013.csv")),
    ("table20_trend.csv", include_str!("../fixtures/table20_trend.csv")),
    ("table21_entropy.csv", include_str!("../fixtures/table21_entropy.csv")),
    (MANIFEST_FILE, include_str!("../fixtures/manifest.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    FirstOrder,
    SecondOrderProduct,
    SecondOrderData,
    Trend,
    Entropy,
}

/// One manifest entry. Matrix-only fields are absent for the series tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub table: u32,
    pub kind: TableKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub origin_year: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dest_year: Option<i32>,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub row_sums: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub column_sums: Option<Vec<f64>>,
    /// Columns `i >= 1` with `f_ii >= f_ji` for every `j >= 1` (state 0 left out).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagonal_dominant_columns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, file: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.file == file)
    }

    /// Derives a manifest from fixture files named `tableNN_<kind>[_A_B].csv`.
    pub fn compute(files: &BTreeMap<String, String>) -> Result<Manifest> {
        let mut entries = Vec::new();
        for (name, text) in files.iter().filter(|(n, _)| n.as_str() != MANIFEST_FILE) {
            let (table, kind, years) = parse_file_name(name)?;
            let mut entry = ManifestEntry {
                file: name.clone(),
                table,
                kind,
                origin_year: years.map(|y| y.0),
                dest_year: years.map(|y| y.1),
                sha256: sha256_hex(text),
                row_sums: None,
                column_sums: None,
                diagonal_dominant_columns: None,
            };
            if years.is_some() {
                let m = parse_table_csv(text)?;
                entry.row_sums = Some((0..m.n()).map(|j| round4(m.row_sum(j))).collect());
                entry.column_sums = Some((0..m.n()).map(|i| round4(m.column_sum(i))).collect());
                entry.diagonal_dominant_columns = Some(
                    (1..m.n())
                        .filter(|&i| (1..m.n()).all(|j| j == i || m.get(i, i) >= m.get(j, i)))
                        .collect(),
                );
            }
            entries.push(entry);
        }
        Ok(Manifest { files: entries })
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn sha256_hex(data: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(data.as_ref()))
}

fn parse_file_name(name: &str) -> Result<(u32, TableKind, Option<(i32, i32)>)> {
    let bad = || Error::Fixture(format!("unrecognized fixture file name `{name}`"));
    let stem = name.strip_suffix(".csv").ok_or_else(bad)?;
    let rest = stem.strip_prefix("table").ok_or_else(bad)?;
    let (num, rest) = rest.split_once('_').ok_or_else(bad)?;
    let table: u32 = num.parse().map_err(|_| bad())?;
    let kinds = [
        ("first_order_", TableKind::FirstOrder),
        ("second_order_product_", TableKind::SecondOrderProduct),
        ("second_order_data_", TableKind::SecondOrderData),
    ];
    for (prefix, kind) in kinds {
        if let Some(years) = rest.strip_prefix(prefix) {
            let (a, b) = years.split_once('_').ok_or_else(bad)?;
            let a = a.parse().map_err(|_| bad())?;
            let b = b.parse().map_err(|_| bad())?;
            return Ok((table, kind, Some((a, b))));
        }
    }
    match rest {
        "trend" => Ok((table, TableKind::Trend, None)),
        "entropy" => Ok((table, TableKind::Entropy, None)),
        _ => Err(bad()),
    }
}

/// A published matrix with its source label.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureMatrix {
    pub table: u32,
    pub file: String,
    pub kind: TableKind,
    pub matrix: TransitionMatrix,
}

impl FixtureMatrix {
    pub fn label(&self) -> String {
        format!(
            "Table {} ({}-{})",
            self.table,
            self.matrix.origin_year(),
            self.matrix.dest_year()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub end_year: i32,
    pub l: f64,
    pub r: f64,
    pub q: f64,
}

/// Published per-category entropies keyed by end year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntropyFixture {
    pub by_year: BTreeMap<i32, Vec<f64>>,
    /// The table's trailing per-category average column.
    pub average: Option<Vec<f64>>,
}

impl EntropyFixture {
    pub fn value(&self, end_year: i32, category: usize) -> Option<f64> {
        self.by_year.get(&end_year).and_then(|v| v.get(category)).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub first_order: Vec<FixtureMatrix>,
    pub second_order_product: FixtureMatrix,
    pub second_order_data: FixtureMatrix,
    pub trend: Vec<TrendRow>,
    pub entropy: EntropyFixture,
    pub manifest: Manifest,
    /// Raw file contents by name, for integrity checks.
    pub sources: BTreeMap<String, String>,
}

impl FixtureSet {
    /// The fixtures compiled into this crate.
    pub fn embedded() -> Result<Self> {
        Self::from_sources(
            EMBEDDED
                .iter()
                .map(|(n, t)| (n.to_string(), t.to_string()))
                .collect(),
        )
    }

    /// Reads the manifest in `dir` and every file it lists.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))
        };
        let manifest_text = read(MANIFEST_FILE)?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::Fixture(format!("{MANIFEST_FILE}: {e}")))?;
        let mut sources = BTreeMap::new();
        sources.insert(MANIFEST_FILE.to_string(), manifest_text);
        for entry in &manifest.files {
            sources.insert(entry.file.clone(), read(&entry.file)?);
        }
        Self::from_sources(sources)
    }

    pub fn from_sources(sources: BTreeMap<String, String>) -> Result<Self> {
        let manifest_text = sources
            .get(MANIFEST_FILE)
            .ok_or_else(|| Error::Fixture(format!("missing {MANIFEST_FILE}")))?;
        let manifest: Manifest = serde_json::from_str(manifest_text)
            .map_err(|e| Error::Fixture(format!("{MANIFEST_FILE}: {e}")))?;
        let text_of = |name: &str| {
            sources
                .get(name)
                .ok_or_else(|| Error::Fixture(format!("missing fixture file {name}")))
        };

        let mut first_order = Vec::new();
        let (mut product, mut data, mut trend, mut entropy) = (None, None, None, None);
        for entry in &manifest.files {
            let text = text_of(&entry.file)?;
            let context = |e: Error| Error::Fixture(format!("{}: {e}", entry.file));
            match entry.kind {
                TableKind::Trend => trend = Some(parse_trend(text).map_err(context)?),
                TableKind::Entropy => entropy = Some(parse_entropy(text).map_err(context)?),
                kind => {
                    let (origin, dest) = entry
                        .origin_year
                        .zip(entry.dest_year)
                        .ok_or_else(|| Error::Fixture(format!("{}: matrix entry without years", entry.file)))?;
                    let probs = parse_table_csv(text).map_err(context)?;
                    let fm = FixtureMatrix {
                        table: entry.table,
                        file: entry.file.clone(),
                        kind,
                        matrix: TransitionMatrix::from_probabilities(origin, dest, probs).map_err(context)?,
                    };
                    match kind {
                        TableKind::FirstOrder => first_order.push(fm),
                        TableKind::SecondOrderProduct => product = Some(fm),
                        _ => data = Some(fm),
                    }
                }
            }
        }
        first_order.sort_by_key(|m| m.matrix.origin_year());
        let missing = |what: &str| Error::Fixture(format!("manifest lists no {what} table"));
        Ok(FixtureSet {
            first_order,
            second_order_product: product.ok_or_else(|| missing("second-order product"))?,
            second_order_data: data.ok_or_else(|| missing("second-order data"))?,
            trend: trend.ok_or_else(|| missing("trend"))?,
            entropy: entropy.ok_or_else(|| missing("entropy"))?,
            manifest,
            sources,
        })
    }

    pub fn matrices(&self) -> impl Iterator<Item = &FixtureMatrix> {
        self.first_order
            .iter()
            .chain([&self.second_order_product, &self.second_order_data])
    }

    pub fn first_order_ending(&self, end_year: i32) -> Option<&FixtureMatrix> {
        self.first_order.iter().find(|m| m.matrix.dest_year() == end_year)
    }

    pub fn first_order_starting(&self, origin_year: i32) -> Option<&FixtureMatrix> {
        self.first_order.iter().find(|m| m.matrix.origin_year() == origin_year)
    }

    /// Describes every file whose checksum disagrees with the manifest. For
    /// matrices the rows and columns whose sums moved are named.
    pub fn integrity_findings(&self) -> Vec<String> {
        let mut findings = Vec::new();
        for entry in &self.manifest.files {
            let Some(text) = self.sources.get(&entry.file) else {
                findings.push(format!("{}: missing", entry.file));
                continue;
            };
            if sha256_hex(text) == entry.sha256 {
                continue;
            }
            let mut detail = format!("{}: checksum differs from manifest", entry.file);
            if let (Some(rows), Some(cols), Ok(m)) =
                (&entry.row_sums, &entry.column_sums, parse_table_csv(text))
            {
                let moved = |expected: &[f64], actual: &dyn Fn(usize) -> f64| -> Vec<usize> {
                    expected
                        .iter()
                        .enumerate()
                        .filter(|(k, e)| (actual(*k) - **e).abs() > 5e-9)
                        .map(|(k, _)| k)
                        .collect()
                };
                let r = moved(rows, &|j| m.row_sum(j));
                let c = moved(cols, &|i| m.column_sum(i));
                if !r.is_empty() || !c.is_empty() {
                    detail.push_str(&format!("; changed rows {r:?}, columns {c:?}"));
                    if r.len() == 1 && c.len() == 1 {
                        detail.push_str(&format!(" (entry row {} column {})", r[0], c[0]));
                    }
                }
            }
            findings.push(detail);
        }
        findings
    }
}

fn parse_trend(text: &str) -> Result<Vec<TrendRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["end_year", "L", "R", "Q"] {
        return Err(Error::Parse("trend table header must be end_year,L,R,Q".into()));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad trend row {rec:?}")))
            };
            Ok(TrendRow {
                end_year: num(0)? as i32,
                l: num(1)?,
                r: num(2)?,
                q: num(3)?,
            })
        })
        .collect()
}

fn parse_entropy(text: &str) -> Result<EntropyFixture> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.get(0) != Some("category") {
        return Err(Error::Parse("entropy table must start with a `category` header".into()));
    }
    let mut out = EntropyFixture::default();
    let columns: Vec<Option<i32>> = headers.iter().skip(1).map(|h| h.parse().ok()).collect();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.get(0) != Some(k.to_string().as_str()) {
            return Err(Error::Parse(format!("entropy row {k} is out of order")));
        }
        for (col, value) in columns.iter().zip(rec.iter().skip(1)) {
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("category {k}: `{value}` is not a number")))?;
            match col {
                Some(year) => out.by_year.entry(*year).or_default().push(v),
                None => out.average.get_or_insert_with(Vec::new).push(v),
            }
        }
    }
    Ok(out)
}
