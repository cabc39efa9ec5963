//! Panel observations: ingestion, rectangularization and descriptive statistics.
//!
//! Raw input is an unbalanced list of `(entity, year, size)` rows. The
//! rectangularized panel holds one cell per entity and year of the range, with
//! `0.0` standing for "the entity does not exist that year".

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive, contiguous range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidRange(format!("{start}:{end} ends before it starts")));
        }
        Ok(YearRange { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, year: i32) -> bool {
        year >= self.start && year <= self.end
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        self.start..=self.end
    }

    /// Position of `year` inside the range.
    pub fn offset(&self, year: i32) -> Result<usize> {
        if self.contains(year) {
            Ok((year - self.start) as usize)
        } else {
            Err(Error::YearOutOfRange { year, range: *self })
        }
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = Error;

    /// Parses `A:B`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidRange(format!("`{s}` is not of the form A:B")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::InvalidRange(format!("`{t}` is not a year")))
        };
        YearRange::new(parse(a)?, parse(b)?)
    }
}

/// One raw observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub entity_id: String,
    pub year: i32,
    pub size: f64,
}

/// Header names of the three input columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub entity: String,
    pub year: String,
    pub size: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            entity: "entity_id".into(),
            year: "year".into(),
            size: "size".into(),
        }
    }
}

/// Reads delimited text with a header row and validates every record.
///
/// Row indices in errors are 1-based data rows (the header is row 0).
pub fn ingest_panel<R: Read>(source: R, mapping: &ColumnMapping) -> Result<Vec<PanelRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (entity_col, year_col, size_col) =
        (find(&mapping.entity)?, find(&mapping.year)?, find(&mapping.size)?);

    let mut seen: HashMap<(String, i32), usize> = HashMap::new();
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = row.map_err(|e| Error::InvalidRow {
            row: row_no,
            message: e.to_string(),
        })?;
        let field = |col: usize| row.get(col).unwrap_or("");
        let entity_id = field(entity_col).to_string();
        if entity_id.is_empty() {
            return Err(Error::InvalidRow {
                row: row_no,
                message: "empty entity id".into(),
            });
        }
        let year: i32 = field(year_col).parse().map_err(|_| Error::InvalidRow {
            row: row_no,
            message: format!("year `{}` is not an integer", field(year_col)),
        })?;
        let size: f64 = field(size_col)
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::InvalidRow {
                row: row_no,
                message: format!("size `{}` is not a finite number", field(size_col)),
            })?;
        if size < 0.0 {
            return Err(Error::InvalidRow {
                row: row_no,
                message: format!("size {size} is negative"),
            });
        }
        if size == 0.0 {
            return Err(Error::ZeroSize { row: row_no, size });
        }
        if seen.insert((entity_id.clone(), year), row_no).is_some() {
            return Err(Error::DuplicateKey { entity: entity_id, year });
        }
        records.push(PanelRecord {
            entity_id,
            year,
            size,
        });
    }
    Ok(records)
}

pub fn read_panel_csv(path: &Path, mapping: &ColumnMapping) -> Result<Vec<PanelRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_panel(std::io::BufReader::new(file), mapping)
}

/// Strongly balanced panel. Cells are stored entity-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangularPanel {
    entities: Vec<String>,
    years: YearRange,
    cells: Vec<f64>,
}

impl RectangularPanel {
    /// Builds a panel from a dense grid, checking the shape and row invariants.
    pub fn from_cells(entities: Vec<String>, years: YearRange, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != entities.len() * years.len() {
            return Err(Error::DimensionMismatch {
                expected: entities.len() * years.len(),
                found: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::NegativeSize(bad));
        }
        let panel = RectangularPanel {
            entities,
            years,
            cells,
        };
        if let Some(e) = (0..panel.n_entities()).find(|&e| panel.row(e).iter().all(|&c| c == 0.0)) {
            return Err(Error::InvalidRow {
                row: e,
                message: format!("entity `{}` is never present", panel.entities[e]),
            });
        }
        Ok(panel)
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn years(&self) -> YearRange {
        self.years
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn row(&self, entity: usize) -> &[f64] {
        let w = self.years.len();
        &self.cells[entity * w..(entity + 1) * w]
    }

    pub fn cell(&self, entity: usize, year: i32) -> Result<f64> {
        Ok(self.row(entity)[self.years.offset(year)?])
    }

    /// Nonzero cells as raw records, in entity then year order.
    pub fn records(&self) -> Vec<PanelRecord> {
        let mut out = Vec::new();
        for (e, id) in self.entities.iter().enumerate() {
            for (year, &size) in self.years.years().zip(self.row(e)) {
                if size > 0.0 {
                    out.push(PanelRecord {
                        entity_id: id.clone(),
                        year,
                        size,
                    });
                }
            }
        }
        out
    }

    /// Writes the nonzero cells in the standard `entity_id,year,size` layout.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["entity_id", "year", "size"]).map_err(wrap)?;
        for r in self.records() {
            w.write_record([r.entity_id, r.year.to_string(), r.size.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Spanning range of the record years.
pub fn record_year_span(records: &[PanelRecord]) -> Result<YearRange> {
    let min = records.iter().map(|r| r.year).min().ok_or(Error::EmptyPanel)?;
    let max = records.iter().map(|r| r.year).max().ok_or(Error::EmptyPanel)?;
    YearRange::new(min, max)
}

/// Fills every absent entity-year with 0. Entities keep their order of first
/// appearance; `range` defaults to the span of the records.
pub fn rectangularize(records: &[PanelRecord], range: Option<YearRange>) -> Result<RectangularPanel> {
    if records.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let years = match range {
        Some(r) => r,
        None => record_year_span(records)?,
    };
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut entities: Vec<String> = Vec::new();
    for r in records {
        if !years.contains(r.year) {
            return Err(Error::YearOutOfRange {
                year: r.year,
                range: years,
            });
        }
        if !index.contains_key(r.entity_id.as_str()) {
            index.insert(&r.entity_id, entities.len());
            entities.push(r.entity_id.clone());
        }
    }
    let width = years.len();
    let mut cells = vec![0.0; entities.len() * width];
    for r in records {
        if !(r.size > 0.0 && r.size.is_finite()) {
            return Err(Error::InvalidRow {
                row: 0,
                message: format!("record ({}, {}) has size {}", r.entity_id, r.year, r.size),
            });
        }
        let slot = index[r.entity_id.as_str()] * width + years.offset(r.year)?;
        if cells[slot] != 0.0 {
            return Err(Error::DuplicateKey {
                entity: r.entity_id.clone(),
                year: r.year,
            });
        }
        cells[slot] = r.size;
    }
    Ok(RectangularPanel {
        entities,
        years,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSummary {
    pub observations: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single observation.
    pub std_dev: f64,
}

/// Statistics over the nonzero cells only; zero fills are not observations.
pub fn summarize(panel: &RectangularPanel) -> Result<PanelSummary> {
    summarize_sizes(panel.cells().iter().copied().filter(|&c| c > 0.0))
}

pub(crate) fn summarize_sizes(sizes: impl Iterator<Item = f64> + Clone) -> Result<PanelSummary> {
    let n = sizes.clone().count();
    if n == 0 {
        return Err(Error::NoObservations);
    }
    let mean = sizes.clone().sum::<f64>() / n as f64;
    let (min, max) = sizes
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let std_dev = if n > 1 {
        (sizes.map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    // mean can drift a hair outside [min, max] through rounding
    Ok(PanelSummary {
        observations: n,
        mean: mean.clamp(min, max),
        min,
        max,
        std_dev,
    })
}

/// Summary computed directly from raw records.
pub fn summarize_records(records: &[PanelRecord]) -> Result<PanelSummary> {
    summarize_sizes(records.iter().map(|r| r.size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(e: &str, y: i32, s: f64) -> PanelRecord {
        PanelRecord {
            entity_id: e.into(),
            year: y,
            size: s,
        }
    }

    fn ingest(text: &str) -> Result<Vec<PanelRecord>> {
        ingest_panel(text.as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn ingests_minimal_input() {
        let recs = ingest("entity_id,year,size\nA,1998,15\nA,1999,30\n").unwrap();
        assert_eq!(recs, vec![rec("A", 1998, 15.0), rec("A", 1999, 30.0)]);
    }

    #[test]
    fn rejects_duplicate_pair() {
        let err = ingest("entity_id,year,size\nA,1998,15\nA,1998,20\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { ref entity, year: 1998 } if entity == "A"));
        assert!(err.to_string().contains("`A`"));
    }

    #[test]
    fn rejects_negative_and_non_numeric_size() {
        let err = ingest("entity_id,year,size\nA,1998,-3\n").unwrap_err();
        assert!(matches!(err, Error::InvalidRow { row: 1, .. }));
        let err = ingest("entity_id,year,size\nA,1998,15\nB,1998,lots\n").unwrap_err();
        assert!(matches!(err, Error::InvalidRow { row: 2, .. }));
        let err = ingest("entity_id,year,size\nA,1998,NaN\n").unwrap_err();
        assert!(matches!(err, Error::InvalidRow { row: 1, .. }));
    }

    #[test]
    fn rejects_raw_zero() {
        let err = ingest("entity_id,year,size\nA,1998,0\n").unwrap_err();
        assert!(matches!(err, Error::ZeroSize { row: 1, .. }));
    }

    #[test]
    fn honours_column_mapping() {
        let mapping = ColumnMapping {
            entity: "firm".into(),
            year: "yr".into(),
            size: "employees".into(),
        };
        let recs = ingest_panel("yr,employees,firm\n2001,12.5,X\n".as_bytes(), &mapping).unwrap();
        assert_eq!(recs, vec![rec("X", 2001, 12.5)]);
        let err = ingest_panel("a,b\n1,2\n".as_bytes(), &mapping).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "firm"));
    }

    #[test]
    fn single_fill() {
        let p = rectangularize(&[rec("A", 1998, 15.0)], Some(YearRange::new(1998, 1999).unwrap()))
            .unwrap();
        assert_eq!(p.row(0), &[15.0, 0.0]);
    }

    #[test]
    fn two_entity_grid() {
        let p = rectangularize(
            &[rec("A", 1998, 15.0), rec("B", 1999, 60.0)],
            Some(YearRange::new(1998, 1999).unwrap()),
        )
        .unwrap();
        assert_eq!(p.entities(), &["A".to_string(), "B".to_string()]);
        assert_eq!(p.cells(), &[15.0, 0.0, 0.0, 60.0]);
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let recs = vec![rec("A", 2000, 1.0), rec("A", 2001, 2.0), rec("B", 2000, 3.0), rec("B", 2001, 4.0)];
        let p = rectangularize(&recs, None).unwrap();
        assert_eq!(p.records(), recs);
        assert_eq!(rectangularize(&p.records(), Some(p.years())).unwrap(), p);
    }

    #[test]
    fn rectangularize_errors() {
        assert!(matches!(rectangularize(&[], None), Err(Error::EmptyPanel)));
        let err = rectangularize(&[rec("A", 2005, 1.0)], Some(YearRange::new(1998, 1999).unwrap()))
            .unwrap_err();
        assert!(matches!(err, Error::YearOutOfRange { year: 2005, .. }));
    }

    #[test]
    fn summary_ignores_fills() {
        let p = RectangularPanel::from_cells(
            vec!["A".into(), "B".into()],
            YearRange::new(1, 2).unwrap(),
            vec![10.0, 20.0, 0.0, 30.0],
        )
        .unwrap();
        let s = summarize(&p).unwrap();
        assert_eq!(s.observations, 3);
        assert_eq!((s.mean, s.min, s.max), (20.0, 10.0, 30.0));
        assert!((s.std_dev - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_summary() {
        let p = RectangularPanel::from_cells(
            vec!["A".into()],
            YearRange::new(1, 3).unwrap(),
            vec![7.5, 0.0, 0.0],
        )
        .unwrap();
        let s = summarize(&p).unwrap();
        assert_eq!((s.observations, s.mean, s.min, s.max, s.std_dev), (1, 7.5, 7.5, 7.5, 0.0));
    }

    #[test]
    fn from_cells_rejects_absent_entity() {
        let err = RectangularPanel::from_cells(
            vec!["A".into()],
            YearRange::new(1, 2).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidRow { .. }));
    }

    #[test]
    fn year_range_parsing() {
        assert_eq!("1998:2013".parse::<YearRange>().unwrap(), YearRange { start: 1998, end: 2013 });
        assert_eq!("1998:2013".parse::<YearRange>().unwrap().len(), 16);
        assert!("2013:1998".parse::<YearRange>().is_err());
        assert!("1998".parse::<YearRange>().is_err());
    }
}
