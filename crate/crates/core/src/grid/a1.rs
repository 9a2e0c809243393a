//! A1 notation: bijective base-26 columns, `$` markers and sheet prefixes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::GridError;

pub const MAX_ROWS: u32 = 1_048_576;
pub const MAX_COLS: u32 = 16_384;

/// Direction a series runs in from its anchor cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Along a row, moving right.
    Row,
    /// Down a column.
    Col,
}

/// Sheet-less 1-based cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellAddr {
    pub row: u32,
    pub col: u32,
}

impl CellAddr {
    pub fn new(row: u32, col: u32) -> Result<Self, GridError> {
        if !(1..=MAX_ROWS).contains(&row) {
            return Err(GridError::Domain(format!(
                "row {row} outside 1..={MAX_ROWS}"
            )));
        }
        if !(1..=MAX_COLS).contains(&col) {
            return Err(GridError::Domain(format!(
                "column {col} outside 1..={MAX_COLS}"
            )));
        }
        Ok(CellAddr { row, col })
    }

    /// Move `steps` cells along `orientation`, or `None` past the grid edge.
    pub fn step(self, orientation: Orientation, steps: usize) -> Option<CellAddr> {
        let steps = u32::try_from(steps).ok()?;
        match orientation {
            Orientation::Row => {
                let col = self.col.checked_add(steps)?;
                (col <= MAX_COLS).then_some(CellAddr { col, ..self })
            }
            Orientation::Col => {
                let row = self.row.checked_add(steps)?;
                (row <= MAX_ROWS).then_some(CellAddr { row, ..self })
            }
        }
    }

    /// `G41`
    pub fn relative(self) -> String {
        format!("{}{}", letters(self.col), self.row)
    }

    /// `$G$41`
    pub fn absolute(self) -> String {
        format!("${}${}", letters(self.col), self.row)
    }
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.absolute())
    }
}

/// A cell on a named sheet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub sheet: String,
    pub row: u32,
    pub col: u32,
}

impl CellRef {
    pub fn new(sheet: impl Into<String>, addr: CellAddr) -> Self {
        CellRef {
            sheet: sheet.into(),
            row: addr.row,
            col: addr.col,
        }
    }

    pub fn addr(&self) -> CellAddr {
        CellAddr {
            row: self.row,
            col: self.col,
        }
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet(&self.sheet), self.addr().absolute())
    }
}

/// Rectangular block of cells on one sheet, stored normalized so that
/// `start` is the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RangeRef {
    pub sheet: String,
    pub start: CellAddr,
    pub end: CellAddr,
}

impl RangeRef {
    pub fn new(sheet: impl Into<String>, a: CellAddr, b: CellAddr) -> Self {
        RangeRef {
            sheet: sheet.into(),
            start: CellAddr {
                row: a.row.min(b.row),
                col: a.col.min(b.col),
            },
            end: CellAddr {
                row: a.row.max(b.row),
                col: a.col.max(b.col),
            },
        }
    }

    pub fn single(sheet: impl Into<String>, a: CellAddr) -> Self {
        RangeRef::new(sheet, a, a)
    }

    pub fn rows(&self) -> u32 {
        self.end.row - self.start.row + 1
    }

    pub fn cols(&self) -> u32 {
        self.end.col - self.start.col + 1
    }

    pub fn cell_count(&self) -> usize {
        self.rows() as usize * self.cols() as usize
    }

    pub fn top_left(&self) -> CellRef {
        CellRef::new(self.sheet.clone(), self.start)
    }

    pub fn bottom_right(&self) -> CellRef {
        CellRef::new(self.sheet.clone(), self.end)
    }

    pub fn contains(&self, cell: &CellRef) -> bool {
        cell.sheet == self.sheet
            && (self.start.row..=self.end.row).contains(&cell.row)
            && (self.start.col..=self.end.col).contains(&cell.col)
    }

    /// Orientation of a one-dimensional range; `None` for a 2-D block.
    /// A single cell counts as a row.
    pub fn orientation(&self) -> Option<Orientation> {
        if self.rows() == 1 {
            Some(Orientation::Row)
        } else if self.cols() == 1 {
            Some(Orientation::Col)
        } else {
            None
        }
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellRef> + '_ {
        (self.start.row..=self.end.row).flat_map(move |row| {
            (self.start.col..=self.end.col).map(move |col| CellRef {
                sheet: self.sheet.clone(),
                row,
                col,
            })
        })
    }

    /// `$H$41:$BN$41`, or `$G$41` for a single cell.
    pub fn address(&self) -> String {
        range_address(self.start, self.end)
    }
}

impl fmt::Display for RangeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet(&self.sheet), self.address())
    }
}

/// Absolute address of the block between two cells, collapsed to a single
/// cell when they coincide.
pub fn range_address(start: CellAddr, end: CellAddr) -> String {
    if start == end {
        start.absolute()
    } else {
        format!("{}:{}", start.absolute(), end.absolute())
    }
}

/// What the text between the optional sheet prefix and the end named.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A1Target {
    Cell(CellAddr),
    Range(CellAddr, CellAddr),
}

/// Result of [`parse_a1`]; the sheet is present only when the text had a
/// `Sheet!` prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct A1Ref {
    pub sheet: Option<String>,
    pub target: A1Target,
}

impl A1Ref {
    fn sheet_or(&self, default_sheet: &str) -> String {
        self.sheet
            .clone()
            .unwrap_or_else(|| default_sheet.to_string())
    }

    pub fn to_range(&self, default_sheet: &str) -> RangeRef {
        match self.target {
            A1Target::Cell(a) => RangeRef::single(self.sheet_or(default_sheet), a),
            A1Target::Range(a, b) => RangeRef::new(self.sheet_or(default_sheet), a, b),
        }
    }

    /// The single cell this reference names; ranges are rejected.
    pub fn to_cell(&self, default_sheet: &str) -> Result<CellRef, GridError> {
        match self.target {
            A1Target::Cell(a) => Ok(CellRef::new(self.sheet_or(default_sheet), a)),
            A1Target::Range(..) => Err(GridError::Domain(
                "expected a single cell, found a range".into(),
            )),
        }
    }
}

/// Bijective base-26 column letters. Errors for `col < 1`.
pub fn col_to_letters(col: u32) -> Result<String, GridError> {
    if col < 1 {
        return Err(GridError::Domain(format!(
            "column index must be >= 1, got {col}"
        )));
    }
    Ok(letters(col))
}

fn letters(mut col: u32) -> String {
    let mut buf = Vec::with_capacity(3);
    while col > 0 {
        let rem = (col - 1) % 26;
        buf.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    buf.reverse();
    String::from_utf8(buf).expect("ASCII letters")
}

/// Inverse of [`col_to_letters`], case-insensitive.
pub fn letters_to_col(text: &str) -> Result<u32, GridError> {
    if text.is_empty() {
        return Err(parse_err(text, 0, "empty column letters"));
    }
    let mut col: u32 = 0;
    for (i, b) in text.bytes().enumerate() {
        if !b.is_ascii_alphabetic() {
            return Err(parse_err(text, i, "expected a column letter"));
        }
        col = col
            .checked_mul(26)
            .and_then(|c| c.checked_add(u32::from(b.to_ascii_uppercase() - b'A') + 1))
            .filter(|&c| c <= MAX_COLS)
            .ok_or_else(|| parse_err(text, i, "column beyond XFD"))?;
    }
    Ok(col)
}

fn parse_err(text: &str, pos: usize, msg: &str) -> GridError {
    GridError::Parse {
        text: text.to_string(),
        pos,
        msg: msg.to_string(),
    }
}

/// Sheet names that are not plain identifiers are wrapped in single quotes,
/// with embedded quotes doubled.
pub fn quote_sheet(name: &str) -> String {
    let plain = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if plain {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

/// Parse `[Sheet!]$?COL$?ROW[:$?COL$?ROW]`.
pub fn parse_a1(text: &str) -> Result<A1Ref, GridError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut sheet = None;

    if bytes.first() == Some(&b'\'') {
        let mut name = String::new();
        let mut i = 1;
        loop {
            match text[i..].chars().next() {
                None => return Err(parse_err(text, i, "unterminated quoted sheet name")),
                Some('\'') if bytes.get(i + 1) == Some(&b'\'') => {
                    name.push('\'');
                    i += 2;
                }
                Some('\'') => {
                    i += 1;
                    break;
                }
                Some(c) => {
                    name.push(c);
                    i += c.len_utf8();
                }
            }
        }
        if bytes.get(i) != Some(&b'!') {
            return Err(parse_err(text, i, "expected '!' after sheet name"));
        }
        if name.is_empty() {
            return Err(parse_err(text, 1, "empty sheet name"));
        }
        sheet = Some(name);
        pos = i + 1;
    } else if let Some(bang) = text.rfind('!') {
        if bang == 0 {
            return Err(parse_err(text, 0, "empty sheet name"));
        }
        sheet = Some(text[..bang].to_string());
        pos = bang + 1;
    }

    let (first, next) = parse_cell(text, pos)?;
    if next == bytes.len() {
        return Ok(A1Ref {
            sheet,
            target: A1Target::Cell(first),
        });
    }
    if bytes[next] != b':' {
        return Err(parse_err(text, next, "expected ':' or end of reference"));
    }
    let (second, end) = parse_cell(text, next + 1)?;
    if end != bytes.len() {
        return Err(parse_err(text, end, "unexpected trailing characters"));
    }
    Ok(A1Ref {
        sheet,
        target: A1Target::Range(first, second),
    })
}

/// Parse one `$?LETTERS$?DIGITS` starting at byte `pos`; returns the
/// address and the byte offset just past it.
fn parse_cell(text: &str, mut pos: usize) -> Result<(CellAddr, usize), GridError> {
    let bytes = text.as_bytes();
    if bytes.get(pos) == Some(&b'$') {
        pos += 1;
    }
    let col_start = pos;
    while pos < bytes.len() && bytes[pos].is_ascii_alphabetic() {
        pos += 1;
    }
    if pos == col_start {
        return Err(parse_err(text, pos, "expected column letters"));
    }
    let col = letters_to_col(&text[col_start..pos]).map_err(|e| match e {
        GridError::Parse { pos: p, msg, .. } => parse_err(text, col_start + p, &msg),
        other => other,
    })?;
    if bytes.get(pos) == Some(&b'$') {
        pos += 1;
    }
    let row_start = pos;
    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    if pos == row_start {
        return Err(parse_err(text, pos, "expected row digits"));
    }
    let row: u32 = text[row_start..pos]
        .parse()
        .ok()
        .filter(|r| (1..=MAX_ROWS).contains(r))
        .ok_or_else(|| parse_err(text, row_start, "row outside 1..=1048576"))?;
    Ok((CellAddr { row, col }, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn addr(row: u32, col: u32) -> CellAddr {
        CellAddr { row, col }
    }

    #[test]
    fn parses_single_cells() {
        let r = parse_a1("G41").unwrap();
        assert_eq!(r.sheet, None);
        assert_eq!(r.target, A1Target::Cell(addr(41, 7)));
        assert_eq!(parse_a1("AA1").unwrap().target, A1Target::Cell(addr(1, 27)));
        assert_eq!(
            parse_a1("$d$26").unwrap().target,
            A1Target::Cell(addr(26, 4))
        );
    }

    #[test]
    fn parses_absolute_row_range() {
        let r = parse_a1("$H$41:$BN$41").unwrap();
        assert_eq!(r.target, A1Target::Range(addr(41, 8), addr(41, 66)));
        let range = r.to_range("Model");
        assert_eq!(range.cell_count(), 59);
        assert_eq!(range.address(), "$H$41:$BN$41");
    }

    #[test]
    fn parses_sheet_prefixes() {
        let r = parse_a1("Model!D45").unwrap();
        assert_eq!(r.sheet.as_deref(), Some("Model"));
        let r = parse_a1("'Cash Flow'!$A$1:B2").unwrap();
        assert_eq!(r.sheet.as_deref(), Some("Cash Flow"));
        let r = parse_a1("'It''s'!A1").unwrap();
        assert_eq!(r.sheet.as_deref(), Some("It's"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let cases = [
            ("", 0),
            ("41", 0),
            ("G", 1),
            ("G0", 1),
            ("G41:", 4),
            ("G41x", 3),
            ("XFE1", 2),
            ("A1048577", 1),
            ("'Model!A1", 9),
            ("!A1", 0),
        ];
        for (text, want) in cases {
            match parse_a1(text) {
                Err(GridError::Parse { pos, .. }) => assert_eq!(pos, want, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn column_letters() {
        assert_eq!(col_to_letters(1).unwrap(), "A");
        assert_eq!(col_to_letters(26).unwrap(), "Z");
        assert_eq!(col_to_letters(27).unwrap(), "AA");
        assert_eq!(col_to_letters(66).unwrap(), "BN");
        assert_eq!(col_to_letters(702).unwrap(), "ZZ");
        assert_eq!(col_to_letters(703).unwrap(), "AAA");
        assert_eq!(col_to_letters(16_384).unwrap(), "XFD");
        assert!(matches!(col_to_letters(0), Err(GridError::Domain(_))));
    }

    #[test]
    fn ranges_are_normalized() {
        let r = parse_a1("C5:A1").unwrap().to_range("S");
        assert_eq!(r.start, addr(1, 1));
        assert_eq!(r.end, addr(5, 3));
        assert_eq!(r.orientation(), None);
        assert_eq!(RangeRef::single("S", addr(2, 2)).address(), "$B$2");
    }

    #[test]
    fn quoting_round_trips() {
        for name in ["Model", "Cash Flow", "It's", "2024", "a-b", "Ünï"] {
            let cell = CellRef::new(name, addr(3, 4));
            let back = parse_a1(&cell.to_string()).unwrap().to_cell("x").unwrap();
            assert_eq!(back, cell);
        }
    }

    #[test]
    fn letters_bijective_over_full_width() {
        let mut prev = String::new();
        for col in 1..=MAX_COLS {
            let l = col_to_letters(col).unwrap();
            assert_eq!(letters_to_col(&l).unwrap(), col);
            // shorter sorts first, then lexicographic
            assert!((prev.len(), prev.as_str()) < (l.len(), l.as_str()));
            prev = l;
        }
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(row in 1u32..=16_384, col in 1u32..=16_384) {
            let a = addr(row, col);
            prop_assert_eq!(parse_a1(&a.absolute()).unwrap().target, A1Target::Cell(a));
            prop_assert_eq!(parse_a1(&a.relative()).unwrap().target, A1Target::Cell(a));
            let c = CellRef::new("Model", a);
            prop_assert_eq!(parse_a1(&c.to_string()).unwrap().to_cell("").unwrap(), c);
        }
    }
}
