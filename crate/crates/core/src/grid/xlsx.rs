//! Reader for OOXML spreadsheet packages (`.xlsx`, `.xlsm`).
//!
//! Only cached values are read. Formula text is kept alongside when present
//! but nothing is ever recalculated.

use std::io::{Cursor, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use zip::ZipArchive;

use super::{parse_a1, CellAddr, CellRef, CellValue, GridBook, GridError};

const OLE_MAGIC: [u8; 8] = [0xD0, 0xCF, 0x11, 0xE0, 0xA1, 0xB1, 0x1A, 0xE1];

type Archive<'a> = ZipArchive<Cursor<&'a [u8]>>;

fn not_a_workbook(part: &str, reason: impl ToString) -> GridError {
    GridError::NotAWorkbook {
        part: part.to_string(),
        reason: reason.to_string(),
    }
}

pub(super) fn read_package(bytes: &[u8]) -> Result<GridBook, GridError> {
    if bytes.starts_with(&OLE_MAGIC) {
        return Err(GridError::UnsupportedFeature {
            part: "container".into(),
            feature: "OLE compound document (encrypted workbook or legacy .xls)".into(),
        });
    }
    let mut zip = ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| not_a_workbook("container", format!("not a ZIP package: {e}")))?;

    if zip.by_name("xl/workbook.bin").is_ok() {
        return Err(GridError::UnsupportedFeature {
            part: "xl/workbook.bin".into(),
            feature: "binary workbook (.xlsb)".into(),
        });
    }
    if zip.by_name("EncryptionInfo").is_ok() {
        return Err(GridError::UnsupportedFeature {
            part: "EncryptionInfo".into(),
            feature: "encrypted workbook".into(),
        });
    }

    let workbook_xml = read_part(&mut zip, "xl/workbook.xml")?
        .ok_or_else(|| not_a_workbook("xl/workbook.xml", "part missing"))?;
    let workbook = parse_workbook(&workbook_xml)?;

    let rels = match read_part(&mut zip, "xl/_rels/workbook.xml.rels")? {
        Some(xml) => parse_rels(&xml)?,
        None => Vec::new(),
    };

    let shared_path = rels
        .iter()
        .find(|r| r.kind.ends_with("/sharedStrings"))
        .map(|r| resolve_target(&r.target))
        .unwrap_or_else(|| "xl/sharedStrings.xml".to_string());
    let shared = match read_part(&mut zip, &shared_path)? {
        Some(xml) => parse_shared_strings(&xml, &shared_path)?,
        None => Vec::new(),
    };

    let mut builder = GridBook::builder();
    for (i, entry) in workbook.sheets.iter().enumerate() {
        let path = rels
            .iter()
            .find(|r| Some(&r.id) == entry.rel_id.as_ref())
            .map(|r| resolve_target(&r.target))
            .unwrap_or_else(|| format!("xl/worksheets/sheet{}.xml", i + 1));
        let xml = read_part(&mut zip, &path)?
            .ok_or_else(|| not_a_workbook(&path, format!("sheet {:?} part missing", entry.name)))?;
        builder.sheet(&entry.name);
        for cell in parse_worksheet(&xml, &path, &shared)? {
            let cref = CellRef::new(entry.name.clone(), cell.addr);
            builder.set(&cref, cell.value);
            if let Some(f) = cell.formula {
                builder.set_formula(&cref, f);
            }
        }
    }

    let sheet_names: Vec<&str> = workbook.sheets.iter().map(|s| s.name.as_str()).collect();
    for name in &workbook.names {
        if name.name.starts_with("_xlnm.") {
            continue;
        }
        // Names that are constants, formulas, #REF! or span several areas
        // have no single range to bind to and are skipped.
        let Ok(a1) = parse_a1(name.formula.trim_start_matches('=')) else {
            continue;
        };
        let default_sheet = name
            .local_sheet
            .and_then(|i| sheet_names.get(i).copied())
            .unwrap_or_default();
        let range = a1.to_range(default_sheet);
        if !sheet_names.contains(&range.sheet.as_str()) {
            continue;
        }
        // Workbook-scoped names win over sheet-scoped ones of the same name.
        let shadowed = name.local_sheet.is_some()
            && workbook
                .names
                .iter()
                .any(|n| n.name == name.name && n.local_sheet.is_none());
        if !shadowed {
            builder.define_name(name.name.clone(), range);
        }
    }

    builder.build()
}

fn read_part(zip: &mut Archive<'_>, name: &str) -> Result<Option<String>, GridError> {
    let mut file = match zip.by_name(name) {
        Ok(f) => f,
        Err(zip::result::ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(not_a_workbook(name, e)),
    };
    let mut s = String::new();
    file.read_to_string(&mut s)
        .map_err(|e| not_a_workbook(name, e))?;
    Ok(Some(s))
}

/// Relationship targets are relative to `xl/` unless absolute.
fn resolve_target(target: &str) -> String {
    match target.strip_prefix('/') {
        Some(abs) => abs.to_string(),
        None => {
            let mut parts: Vec<&str> = vec!["xl"];
            for seg in target.split('/') {
                match seg {
                    ".." => {
                        parts.pop();
                    }
                    "." | "" => {}
                    s => parts.push(s),
                }
            }
            parts.join("/")
        }
    }
}

fn attr(e: &BytesStart<'_>, key: &[u8], part: &str) -> Result<Option<String>, GridError> {
    for a in e.attributes() {
        let a = a.map_err(|err| not_a_workbook(part, err))?;
        if a.key.local_name().as_ref() == key {
            let v = a
                .unescape_value()
                .map_err(|err| not_a_workbook(part, err))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// `r:id` is matched on the full qualified key, since `id` alone is ambiguous.
fn rel_id_attr(e: &BytesStart<'_>, part: &str) -> Result<Option<String>, GridError> {
    for a in e.attributes() {
        let a = a.map_err(|err| not_a_workbook(part, err))?;
        let key = a.key.as_ref();
        if key.ends_with(b":id") {
            let v = a
                .unescape_value()
                .map_err(|err| not_a_workbook(part, err))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

struct SheetEntry {
    name: String,
    rel_id: Option<String>,
}

struct DefinedName {
    name: String,
    local_sheet: Option<usize>,
    formula: String,
}

struct WorkbookPart {
    sheets: Vec<SheetEntry>,
    names: Vec<DefinedName>,
}

fn parse_workbook(xml: &str) -> Result<WorkbookPart, GridError> {
    const PART: &str = "xl/workbook.xml";
    let mut reader = Reader::from_str(xml);
    let mut sheets = Vec::new();
    let mut names = Vec::new();
    let mut current: Option<DefinedName> = None;
    let mut saw_root = false;

    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => match e.local_name().as_ref() {
                b"workbook" => saw_root = true,
                b"sheet" => {
                    let name = attr(&e, b"name", PART)?
                        .ok_or_else(|| not_a_workbook(PART, "sheet without a name"))?;
                    sheets.push(SheetEntry {
                        name,
                        rel_id: rel_id_attr(&e, PART)?,
                    });
                }
                b"definedName" => {
                    let name = attr(&e, b"name", PART)?.unwrap_or_default();
                    let local_sheet = attr(&e, b"localSheetId", PART)?.and_then(|v| v.parse().ok());
                    current = Some(DefinedName {
                        name,
                        local_sheet,
                        formula: String::new(),
                    });
                }
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if let Some(dn) = current.as_mut() {
                    let text = t.unescape().map_err(|e| not_a_workbook(PART, e))?;
                    dn.formula.push_str(&text);
                }
            }
            Ok(Event::End(e)) if e.local_name().as_ref() == b"definedName" => {
                names.extend(current.take());
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(not_a_workbook(PART, e)),
            _ => {}
        }
    }
    if !saw_root {
        return Err(not_a_workbook(PART, "no <workbook> root element"));
    }
    if sheets.is_empty() {
        return Err(not_a_workbook(PART, "workbook contains no sheets"));
    }
    Ok(WorkbookPart { sheets, names })
}

struct Relationship {
    id: String,
    kind: String,
    target: String,
}

fn parse_rels(xml: &str) -> Result<Vec<Relationship>, GridError> {
    const PART: &str = "xl/_rels/workbook.xml.rels";
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e))
                if e.local_name().as_ref() == b"Relationship" =>
            {
                let (Some(id), Some(target)) = (attr(&e, b"Id", PART)?, attr(&e, b"Target", PART)?)
                else {
                    continue;
                };
                out.push(Relationship {
                    id,
                    kind: attr(&e, b"Type", PART)?.unwrap_or_default(),
                    target,
                });
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(not_a_workbook(PART, e)),
            _ => {}
        }
    }
    Ok(out)
}

fn parse_shared_strings(xml: &str, part: &str) -> Result<Vec<String>, GridError> {
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    let mut current = String::new();
    let mut in_si = false;
    let mut in_t = false;
    // Phonetic runs (<rPh>) repeat text in another script; skip them.
    let mut in_phonetic = false;
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => match e.local_name().as_ref() {
                b"si" => {
                    in_si = true;
                    current.clear();
                }
                b"t" => in_t = true,
                b"rPh" => in_phonetic = true,
                _ => {}
            },
            Ok(Event::Empty(e)) if e.local_name().as_ref() == b"si" => out.push(String::new()),
            Ok(Event::Text(t)) if in_si && in_t && !in_phonetic => {
                current.push_str(&t.unescape().map_err(|e| not_a_workbook(part, e))?);
            }
            Ok(Event::End(e)) => match e.local_name().as_ref() {
                b"si" => {
                    in_si = false;
                    out.push(std::mem::take(&mut current));
                }
                b"t" => in_t = false,
                b"rPh" => in_phonetic = false,
                _ => {}
            },
            Ok(Event::Eof) => break,
            Err(e) => return Err(not_a_workbook(part, e)),
            _ => {}
        }
    }
    Ok(out)
}

struct RawCell {
    addr: CellAddr,
    value: CellValue,
    formula: Option<String>,
}

#[derive(Default)]
struct CellState {
    addr: Option<CellAddr>,
    kind: String,
    value: Option<String>,
    inline: Option<String>,
    formula: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Capture {
    None,
    Value,
    Formula,
    InlineText,
}

fn parse_worksheet(xml: &str, part: &str, shared: &[String]) -> Result<Vec<RawCell>, GridError> {
    let mut reader = Reader::from_str(xml);
    let mut cells = Vec::new();
    let mut row: u32 = 0;
    let mut last_col: u32 = 0;
    let mut cell: Option<CellState> = None;
    let mut capture = Capture::None;

    loop {
        let event = reader.read_event().map_err(|e| not_a_workbook(part, e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.local_name().as_ref() {
                    b"row" => {
                        row = match attr(e, b"r", part)? {
                            Some(r) => r.parse().map_err(|_| {
                                not_a_workbook(part, format!("bad row number {r:?}"))
                            })?,
                            None => row + 1,
                        };
                        last_col = 0;
                    }
                    b"c" => {
                        let addr = match attr(e, b"r", part)? {
                            Some(r) => parse_a1(&r)
                                .ok()
                                .and_then(|a| a.to_cell("").ok())
                                .map(|c| c.addr())
                                .ok_or_else(|| {
                                    not_a_workbook(part, format!("bad cell reference {r:?}"))
                                })?,
                            None => CellAddr::new(row.max(1), last_col + 1)?,
                        };
                        row = addr.row;
                        last_col = addr.col;
                        let state = CellState {
                            addr: Some(addr),
                            kind: attr(e, b"t", part)?.unwrap_or_default(),
                            ..CellState::default()
                        };
                        if empty {
                            cells.extend(finish_cell(state, part, shared)?);
                        } else {
                            cell = Some(state);
                        }
                    }
                    b"v" if !empty => capture = Capture::Value,
                    b"f" if !empty => capture = Capture::Formula,
                    b"t" if !empty && cell.is_some() => capture = Capture::InlineText,
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let Some(state) = cell.as_mut() {
                    let text = t.unescape().map_err(|e| not_a_workbook(part, e))?;
                    let slot = match capture {
                        Capture::Value => &mut state.value,
                        Capture::Formula => &mut state.formula,
                        Capture::InlineText => &mut state.inline,
                        Capture::None => continue,
                    };
                    slot.get_or_insert_with(String::new).push_str(&text);
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"v" | b"f" | b"t" => capture = Capture::None,
                b"c" => {
                    if let Some(state) = cell.take() {
                        cells.extend(finish_cell(state, part, shared)?);
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(cells)
}

fn finish_cell(
    state: CellState,
    part: &str,
    shared: &[String],
) -> Result<Option<RawCell>, GridError> {
    let addr = state.addr.expect("cell address set on open");
    let bad = |what: &str, raw: &str| {
        not_a_workbook(
            part,
            format!("cell {}: bad {what} value {raw:?}", addr.relative()),
        )
    };
    let value = match (state.kind.as_str(), state.value.as_deref()) {
        ("inlineStr", _) => match state.inline {
            Some(s) => CellValue::Text(s),
            None => CellValue::Empty,
        },
        (_, None) => CellValue::Empty,
        ("s", Some(raw)) => {
            let idx: usize = raw
                .trim()
                .parse()
                .map_err(|_| bad("shared string index", raw))?;
            let s = shared
                .get(idx)
                .ok_or_else(|| bad("shared string index", raw))?;
            CellValue::Text(s.clone())
        }
        ("b", Some(raw)) => match raw.trim() {
            "1" | "true" => CellValue::Bool(true),
            "0" | "false" => CellValue::Bool(false),
            _ => return Err(bad("boolean", raw)),
        },
        ("e", Some(raw)) => CellValue::Error(raw.to_string()),
        // ISO-8601 date cells are surfaced as text; serial dates are numbers.
        ("str", Some(raw)) | ("d", Some(raw)) => CellValue::Text(raw.to_string()),
        ("n", Some(raw)) | ("", Some(raw)) => {
            CellValue::Number(raw.trim().parse().map_err(|_| bad("numeric", raw))?)
        }
        (other, Some(_)) => {
            return Err(not_a_workbook(
                part,
                format!("cell {}: unknown cell type {other:?}", addr.relative()),
            ))
        }
    };
    if value.is_empty() && state.formula.is_none() {
        return Ok(None);
    }
    Ok(Some(RawCell {
        addr,
        value,
        formula: state.formula,
    }))
}
