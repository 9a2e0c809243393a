//! Immutable in-memory workbook model.
//!
//! A [`GridBook`] holds the cached cell values of every sheet plus the
//! workbook's defined names. It is loaded from an OOXML package
//! (`.xlsx`/`.xlsm`) or from the gridbook-JSON format, and never changes
//! after loading; modified copies are produced through [`GridBookBuilder`].

mod a1;
mod json;
mod xlsx;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::series::NumericSeries;

pub use a1::{
    col_to_letters, letters_to_col, parse_a1, quote_sheet, range_address, A1Ref, A1Target,
    CellAddr, CellRef, Orientation, RangeRef, MAX_COLS, MAX_ROWS,
};
pub use json::{gridbook_from_json, gridbook_to_json};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("not a workbook ({part}): {reason}")]
    NotAWorkbook { part: String, reason: String },
    #[error("unsupported feature ({part}): {feature}")]
    UnsupportedFeature { part: String, feature: String },
    #[error("i/o error reading {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {text:?} at position {pos}: {msg}")]
    Parse {
        text: String,
        pos: usize,
        msg: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown sheet {0:?}")]
    UnknownSheet(String),
    #[error("unknown name {name:?} (available: {})", .available.join(", "))]
    UnknownName {
        name: String,
        available: Vec<String>,
    },
    #[error("type mismatch at {cell}: expected a number, found {found}")]
    TypeMismatch { cell: String, found: &'static str },
    #[error("length error at {at}: found {found} cells, needed {needed}")]
    LengthError {
        at: String,
        found: usize,
        needed: usize,
    },
}

/// A stored cell value. Formula cells carry their cached result.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64),
    Text(String),
    Bool(bool),
    Empty,
    /// Spreadsheet error literal such as `#DIV/0!`.
    Error(String),
}

impl CellValue {
    pub fn kind(&self) -> &'static str {
        match self {
            CellValue::Number(_) => "number",
            CellValue::Text(_) => "text",
            CellValue::Bool(_) => "bool",
            CellValue::Empty => "empty",
            CellValue::Error(_) => "error",
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match *self {
            CellValue::Number(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty)
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Number(v) => write!(f, "{v}"),
            CellValue::Text(s) | CellValue::Error(s) => f.write_str(s),
            CellValue::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            CellValue::Empty => Ok(()),
        }
    }
}

/// How many cells [`GridBook::read_series`] collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extent {
    /// Until just before the first empty cell.
    Expand,
    /// Exactly this many cells.
    Fixed(usize),
}

/// One worksheet: sparse values keyed by `(row, col)`, plus any formula
/// text that was present in the source file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sheet {
    name: String,
    cells: BTreeMap<(u32, u32), CellValue>,
    formulas: BTreeMap<(u32, u32), String>,
}

impl Sheet {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, addr: CellAddr) -> &CellValue {
        self.cells
            .get(&(addr.row, addr.col))
            .unwrap_or(&CellValue::Empty)
    }

    pub fn formula(&self, addr: CellAddr) -> Option<&str> {
        self.formulas.get(&(addr.row, addr.col)).map(String::as_str)
    }

    /// Non-empty cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddr, &CellValue)> {
        self.cells
            .iter()
            .map(|(&(row, col), v)| (CellAddr { row, col }, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBook {
    sheets: Vec<Sheet>,
    names: BTreeMap<String, RangeRef>,
}

/// Load a workbook, picking the format from the file's leading bytes.
pub fn open_workbook(path: impl AsRef<Path>) -> Result<GridBook, GridError> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(GridError::FileNotFound(path.to_path_buf()))
        }
        Err(source) => {
            return Err(GridError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    GridBook::from_bytes(&bytes)
}

impl GridBook {
    pub fn from_bytes(bytes: &[u8]) -> Result<GridBook, GridError> {
        let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
        match first {
            Some(b'{') => {
                let text = std::str::from_utf8(bytes).map_err(|e| GridError::NotAWorkbook {
                    part: "gridbook-JSON".into(),
                    reason: e.to_string(),
                })?;
                gridbook_from_json(text)
            }
            _ => xlsx::read_package(bytes),
        }
    }

    pub fn builder() -> GridBookBuilder {
        GridBookBuilder::default()
    }

    /// Start a builder pre-populated with this book's contents.
    pub fn to_builder(&self) -> GridBookBuilder {
        GridBookBuilder {
            sheets: self.sheets.clone(),
            names: self.names.clone(),
        }
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet_names(&self) -> impl Iterator<Item = &str> {
        self.sheets.iter().map(|s| s.name.as_str())
    }

    pub fn sheet(&self, name: &str) -> Result<&Sheet, GridError> {
        self.sheets
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| GridError::UnknownSheet(name.to_string()))
    }

    /// First sheet; used for references without a sheet prefix.
    pub fn first_sheet(&self) -> &Sheet {
        &self.sheets[0]
    }

    pub fn defined_names(&self) -> &BTreeMap<String, RangeRef> {
        &self.names
    }

    pub fn read_cell(&self, cell: &CellRef) -> Result<&CellValue, GridError> {
        Ok(self.sheet(&cell.sheet)?.get(cell.addr()))
    }

    pub fn resolve_name(&self, name: &str) -> Result<&RangeRef, GridError> {
        self.names.get(name).ok_or_else(|| GridError::UnknownName {
            name: name.to_string(),
            available: self.names.keys().cloned().collect(),
        })
    }

    /// Resolve text that is either a defined name or an A1 reference.
    /// Unprefixed A1 text refers to the first sheet.
    pub fn resolve_range(&self, text: &str) -> Result<RangeRef, GridError> {
        if let Some(r) = self.names.get(text) {
            return Ok(r.clone());
        }
        match parse_a1(text) {
            Ok(a1) => {
                let range = a1.to_range(self.first_sheet().name());
                self.sheet(&range.sheet)?;
                Ok(range)
            }
            Err(parse) => {
                let looks_like_name = !text.contains('!')
                    && text.starts_with(|c: char| c.is_alphabetic() || c == '_');
                if looks_like_name {
                    Err(GridError::UnknownName {
                        name: text.to_string(),
                        available: self.names.keys().cloned().collect(),
                    })
                } else {
                    Err(parse)
                }
            }
        }
    }

    /// Collect numbers from `anchor` along `orientation`.
    pub fn read_series(
        &self,
        anchor: &CellRef,
        orientation: Orientation,
        extent: Extent,
    ) -> Result<NumericSeries, GridError> {
        let sheet = self.sheet(&anchor.sheet)?;
        let start = anchor.addr();
        let mut values = Vec::new();
        let limit = match extent {
            Extent::Fixed(n) => n,
            Extent::Expand => usize::MAX,
        };
        while values.len() < limit {
            let Some(addr) = start.step(orientation, values.len()) else {
                break;
            };
            match sheet.get(addr) {
                CellValue::Number(v) => values.push(*v),
                CellValue::Empty if !values.is_empty() => break,
                other => {
                    return Err(GridError::TypeMismatch {
                        cell: CellRef::new(&anchor.sheet, addr).to_string(),
                        found: other.kind(),
                    })
                }
            }
        }
        if let Extent::Fixed(n) = extent {
            if values.len() < n {
                return Err(GridError::LengthError {
                    at: anchor.to_string(),
                    found: values.len(),
                    needed: n,
                });
            }
        }
        Ok(NumericSeries::new(values))
    }

    /// Every cell of `range` in row-major order, all required to be numbers.
    pub fn read_range(&self, range: &RangeRef) -> Result<NumericSeries, GridError> {
        let sheet = self.sheet(&range.sheet)?;
        range
            .cells()
            .map(|c| match sheet.get(c.addr()) {
                CellValue::Number(v) => Ok(*v),
                other => Err(GridError::TypeMismatch {
                    cell: c.to_string(),
                    found: other.kind(),
                }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(NumericSeries::new)
    }
}

/// Mutable staging area for constructing a [`GridBook`].
#[derive(Debug, Clone, Default)]
pub struct GridBookBuilder {
    sheets: Vec<Sheet>,
    names: BTreeMap<String, RangeRef>,
}

impl GridBookBuilder {
    /// Add an empty sheet if one with this name does not exist yet.
    pub fn sheet(&mut self, name: &str) -> &mut Self {
        self.sheet_mut(name);
        self
    }

    fn sheet_mut(&mut self, name: &str) -> &mut Sheet {
        let idx = match self.sheets.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                self.sheets.push(Sheet {
                    name: name.to_string(),
                    ..Sheet::default()
                });
                self.sheets.len() - 1
            }
        };
        &mut self.sheets[idx]
    }

    /// Store a value, creating the sheet on demand. `Empty` removes the cell.
    pub fn set(&mut self, cell: &CellRef, value: CellValue) -> &mut Self {
        let sheet = self.sheet_mut(&cell.sheet);
        let key = (cell.row, cell.col);
        if value.is_empty() {
            sheet.cells.remove(&key);
        } else {
            sheet.cells.insert(key, value);
        }
        // An overwritten cell no longer holds its formula's result.
        sheet.formulas.remove(&key);
        self
    }

    pub fn set_formula(&mut self, cell: &CellRef, formula: impl Into<String>) -> &mut Self {
        self.sheet_mut(&cell.sheet)
            .formulas
            .insert((cell.row, cell.col), formula.into());
        self
    }

    pub fn define_name(&mut self, name: impl Into<String>, range: RangeRef) -> &mut Self {
        self.names.insert(name.into(), range);
        self
    }

    pub fn get(&self, cell: &CellRef) -> &CellValue {
        self.sheets
            .iter()
            .find(|s| s.name == cell.sheet)
            .map_or(&CellValue::Empty, |s| s.get(cell.addr()))
    }

    /// Check the book-level invariants and freeze.
    pub fn build(self) -> Result<GridBook, GridError> {
        if self.sheets.is_empty() {
            return Err(GridError::NotAWorkbook {
                part: "workbook".into(),
                reason: "workbook contains no sheets".into(),
            });
        }
        for (name, range) in &self.names {
            if !self.sheets.iter().any(|s| s.name == range.sheet) {
                return Err(GridError::NotAWorkbook {
                    part: format!("defined name {name}"),
                    reason: format!("refers to missing sheet {:?}", range.sheet),
                });
            }
            if range.end.row > MAX_ROWS || range.end.col > MAX_COLS {
                return Err(GridError::NotAWorkbook {
                    part: format!("defined name {name}"),
                    reason: "range exceeds grid bounds".into(),
                });
            }
        }
        Ok(GridBook {
            sheets: self.sheets,
            names: self.names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(sheet: &str, a1: &str) -> CellRef {
        parse_a1(a1).unwrap().to_cell(sheet).unwrap()
    }

    fn book_with(cells: &[(&str, CellValue)]) -> GridBook {
        let mut b = GridBook::builder();
        b.sheet("Model");
        for (a1, v) in cells {
            b.set(&cell("Model", a1), v.clone());
        }
        b.build().unwrap()
    }

    #[test]
    fn read_cell_present_absent_and_unknown_sheet() {
        let book = book_with(&[("B2", CellValue::Number(500.0))]);
        assert_eq!(
            book.read_cell(&cell("Model", "B2")).unwrap(),
            &CellValue::Number(500.0)
        );
        assert_eq!(
            book.read_cell(&cell("Model", "C3")).unwrap(),
            &CellValue::Empty
        );
        assert!(matches!(
            book.read_cell(&cell("Other", "A1")),
            Err(GridError::UnknownSheet(_))
        ));
        // read_cell does not care about type
        let book = book_with(&[("A1", CellValue::Text("x".into()))]);
        assert_eq!(
            book.read_cell(&cell("Model", "A1")).unwrap(),
            &CellValue::Text("x".into())
        );
    }

    #[test]
    fn expand_stops_before_first_empty() {
        let book = book_with(&[
            ("G41", CellValue::Number(7007.75)),
            ("H41", CellValue::Number(5829.56)),
            ("J41", CellValue::Number(1.0)),
        ]);
        let s = book
            .read_series(&cell("Model", "G41"), Orientation::Row, Extent::Expand)
            .unwrap();
        assert_eq!(s.values(), &[7007.75, 5829.56]);
    }

    #[test]
    fn expand_down_twelve_irradiance_cells() {
        let mut b = GridBook::builder();
        for i in 0..12 {
            b.set(
                &CellRef::new("Model", CellAddr::new(26 + i, 4).unwrap()),
                CellValue::Number(f64::from(100 + i)),
            );
        }
        let book = b.build().unwrap();
        let s = book
            .read_series(&cell("Model", "D26"), Orientation::Col, Extent::Expand)
            .unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s[11], 111.0);
    }

    #[test]
    fn read_series_type_and_length_errors() {
        let book = book_with(&[
            ("A1", CellValue::Number(1.0)),
            ("B1", CellValue::Text("oops".into())),
            ("A2", CellValue::Number(1.0)),
            ("B2", CellValue::Number(2.0)),
        ]);
        let err = book
            .read_series(&cell("Model", "A1"), Orientation::Row, Extent::Expand)
            .unwrap_err();
        match err {
            GridError::TypeMismatch { cell, found } => {
                assert_eq!(cell, "Model!$B$1");
                assert_eq!(found, "text");
            }
            other => panic!("{other:?}"),
        }
        // anchor empty
        assert!(matches!(
            book.read_series(&cell("Model", "Z9"), Orientation::Row, Extent::Expand),
            Err(GridError::TypeMismatch { found: "empty", .. })
        ));
        assert!(matches!(
            book.read_series(&cell("Model", "A2"), Orientation::Row, Extent::Fixed(3)),
            Err(GridError::LengthError {
                found: 2,
                needed: 3,
                ..
            })
        ));
        let s = book
            .read_series(&cell("Model", "A2"), Orientation::Row, Extent::Fixed(2))
            .unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
    }

    #[test]
    fn expand_stops_at_grid_edge() {
        let mut b = GridBook::builder();
        b.set(
            &CellRef::new("S", CellAddr::new(1, MAX_COLS).unwrap()),
            CellValue::Number(1.0),
        );
        let book = b.build().unwrap();
        let s = book
            .read_series(
                &CellRef::new("S", CellAddr::new(1, MAX_COLS).unwrap()),
                Orientation::Row,
                Extent::Expand,
            )
            .unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn names_resolve_or_list_alternatives() {
        let mut b = GridBook::builder();
        b.set(&cell("Model", "D18"), CellValue::Number(500.0));
        b.define_name("plant_size", parse_a1("Model!$D$18").unwrap().to_range(""));
        b.define_name(
            "ebitda_n",
            parse_a1("Model!$G$56:$BN$56").unwrap().to_range(""),
        );
        let book = b.build().unwrap();
        let r = book.resolve_name("plant_size").unwrap();
        assert_eq!(r.cell_count(), 1);
        assert_eq!(book.read_range(r).unwrap().values(), &[500.0]);
        let r = book.resolve_name("ebitda_n").unwrap();
        assert_eq!(r.cols(), 60);
        assert_eq!(r.orientation(), Some(Orientation::Row));
        match book.resolve_name("foo") {
            Err(GridError::UnknownName { available, .. }) => {
                assert_eq!(available, vec!["ebitda_n", "plant_size"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            book.resolve_range("foo"),
            Err(GridError::UnknownName { .. })
        ));
        assert_eq!(book.resolve_range("D18").unwrap().sheet, "Model");
    }

    #[test]
    fn zero_sheets_and_dangling_names_rejected() {
        assert!(matches!(
            GridBook::builder().build(),
            Err(GridError::NotAWorkbook { .. })
        ));
        let mut b = GridBook::builder();
        b.sheet("A");
        b.define_name("x", parse_a1("B!A1").unwrap().to_range(""));
        assert!(matches!(b.build(), Err(GridError::NotAWorkbook { .. })));
        // an empty sheet is fine
        let mut b = GridBook::builder();
        b.sheet("Empty");
        assert!(b.build().unwrap().first_sheet().is_empty());
    }

    #[test]
    fn empty_differs_from_zero() {
        let book = book_with(&[("A1", CellValue::Number(0.0))]);
        assert_ne!(
            book.read_cell(&cell("Model", "A1")).unwrap(),
            &CellValue::Empty
        );
        assert_eq!(
            book.read_cell(&cell("Model", "A2")).unwrap(),
            &CellValue::Empty
        );
    }

    #[test]
    fn open_missing_file() {
        assert!(matches!(
            open_workbook("/definitely/not/here.xlsx"),
            Err(GridError::FileNotFound(_))
        ));
    }

    proptest! {
        // Random sparse rows: expand length must equal a naive scan.
        #[test]
        fn expand_length_matches_naive_scan(
            occupied in prop::collection::vec(prop::bool::weighted(0.8), 1..80),
            start in 0usize..10,
        ) {
            let mut b = GridBook::builder();
            b.sheet("S");
            for (i, &filled) in occupied.iter().enumerate() {
                if filled {
                    b.set(
                        &CellRef::new("S", CellAddr::new(3, i as u32 + 1).unwrap()),
                        CellValue::Number(i as f64),
                    );
                }
            }
            let book = b.build().unwrap();
            let anchor = CellRef::new("S", CellAddr::new(3, start as u32 + 1).unwrap());
            let mut naive = 0;
            while occupied.get(start + naive).copied().unwrap_or(false) {
                naive += 1;
            }
            let got = book.read_series(&anchor, Orientation::Row, Extent::Expand);
            if naive == 0 {
                let is_mismatch = matches!(got, Err(GridError::TypeMismatch { .. }));
                prop_assert!(is_mismatch);
            } else {
                prop_assert_eq!(got.unwrap().len(), naive);
            }
        }
    }
}
