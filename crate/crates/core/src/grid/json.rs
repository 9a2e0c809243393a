//! gridbook-JSON: a plain-text workbook format.
//!
//! ```json
//! {"sheets": {"Model": {"B2": 500, "C2": "label"}},
//!  "names": {"plant_size": "Model!B2"}}
//! ```
//!
//! Absent keys are empty cells. Numbers are IEEE-754 doubles and are written
//! in shortest round-trip form, so a load/save cycle is exact.

use serde_json::{Map, Number, Value};

use super::{parse_a1, A1Ref, A1Target, CellAddr, CellRef, CellValue, GridBook, GridError};

fn invalid(part: impl Into<String>, reason: impl ToString) -> GridError {
    GridError::NotAWorkbook {
        part: part.into(),
        reason: reason.to_string(),
    }
}

pub fn gridbook_from_json(text: &str) -> Result<GridBook, GridError> {
    let root: Value = serde_json::from_str(text).map_err(|e| invalid("gridbook-JSON", e))?;
    let root = root
        .as_object()
        .ok_or_else(|| invalid("gridbook-JSON", "top level must be an object"))?;
    for key in root.keys() {
        if key != "sheets" && key != "names" {
            return Err(invalid("gridbook-JSON", format!("unknown key {key:?}")));
        }
    }
    let sheets = root
        .get("sheets")
        .and_then(Value::as_object)
        .ok_or_else(|| invalid("sheets", "missing or not an object"))?;

    let mut builder = GridBook::builder();
    for (name, cells) in sheets {
        let part = format!("sheets.{name}");
        let cells = cells
            .as_object()
            .ok_or_else(|| invalid(&part, "sheet must be an object of A1 -> value"))?;
        builder.sheet(name);
        for (key, value) in cells {
            let addr = match parse_a1(key)? {
                A1Ref {
                    sheet: None,
                    target: A1Target::Cell(a),
                } => a,
                _ => {
                    return Err(invalid(
                        &part,
                        format!("key {key:?} is not a single unqualified cell"),
                    ))
                }
            };
            let value = match value {
                Value::Null => CellValue::Empty,
                Value::Bool(b) => CellValue::Bool(*b),
                Value::Number(n) => CellValue::Number(
                    n.as_f64()
                        .ok_or_else(|| invalid(&part, format!("{key}: number out of range")))?,
                ),
                Value::String(s) => CellValue::Text(s.clone()),
                _ => return Err(invalid(&part, format!("{key}: unsupported value {value}"))),
            };
            builder.set(&CellRef::new(name.clone(), addr), value);
        }
    }

    if let Some(names) = root.get("names") {
        let names = names
            .as_object()
            .ok_or_else(|| invalid("names", "must be an object of name -> range"))?;
        for (name, target) in names {
            let target = target
                .as_str()
                .ok_or_else(|| invalid(format!("names.{name}"), "range must be a string"))?;
            let a1 = parse_a1(target)?;
            let Some(sheet) = a1.sheet.as_deref() else {
                return Err(invalid(
                    format!("names.{name}"),
                    "range must be sheet-qualified",
                ));
            };
            builder.define_name(name.clone(), a1.to_range(sheet));
        }
    }
    builder.build()
}

/// Serialize a book to gridbook-JSON, cells in row-major order.
///
/// Error cells are written as their code string and formulas are dropped;
/// non-finite numbers cannot be represented and are an error.
pub fn gridbook_to_json(book: &GridBook) -> Result<String, GridError> {
    let mut sheets = Map::new();
    for sheet in book.sheets() {
        let mut cells = Map::new();
        for (addr, value) in sheet.cells() {
            cells.insert(addr.relative(), cell_json(sheet.name(), addr, value)?);
        }
        sheets.insert(sheet.name().to_string(), Value::Object(cells));
    }
    let mut root = Map::new();
    root.insert("sheets".into(), Value::Object(sheets));
    if !book.defined_names().is_empty() {
        let names = book
            .defined_names()
            .iter()
            .map(|(k, r)| (k.clone(), Value::String(r.to_string())))
            .collect();
        root.insert("names".into(), Value::Object(names));
    }
    let mut out = serde_json::to_string_pretty(&Value::Object(root))
        .map_err(|e| invalid("gridbook-JSON", e))?;
    out.push('\n');
    Ok(out)
}

fn cell_json(sheet: &str, addr: CellAddr, value: &CellValue) -> Result<Value, GridError> {
    Ok(match value {
        CellValue::Number(v) => Value::Number(Number::from_f64(*v).ok_or_else(|| {
            GridError::Domain(format!(
                "{} holds {v}, which gridbook-JSON cannot represent",
                CellRef::new(sheet, addr)
            ))
        })?),
        CellValue::Text(s) | CellValue::Error(s) => Value::String(s.clone()),
        CellValue::Bool(b) => Value::Bool(*b),
        CellValue::Empty => Value::Null,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_book() {
        let book = gridbook_from_json(r#"{"sheets":{"S":{"A1":1.5}}}"#).unwrap();
        assert_eq!(book.sheets().len(), 1);
        assert_eq!(
            book.read_cell(&CellRef::new("S", CellAddr::new(1, 1).unwrap()))
                .unwrap(),
            &CellValue::Number(1.5)
        );
    }

    #[test]
    fn mixed_values_and_names() {
        let text = r#"{
            "sheets": {"Model": {"A1": "label", "B1": true, "C1": null, "$D$2": 3}},
            "names": {"x": "Model!$D$2", "row": "Model!A1:C1"}
        }"#;
        let book = gridbook_from_json(text).unwrap();
        let s = book.sheet("Model").unwrap();
        assert_eq!(
            s.get(CellAddr::new(1, 1).unwrap()),
            &CellValue::Text("label".into())
        );
        assert_eq!(s.get(CellAddr::new(1, 2).unwrap()), &CellValue::Bool(true));
        assert_eq!(s.get(CellAddr::new(1, 3).unwrap()), &CellValue::Empty);
        assert_eq!(s.len(), 3);
        assert_eq!(book.resolve_name("row").unwrap().cols(), 3);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            r#"[]"#,
            r#"{"sheets":{}}"#,
            r#"{"sheets":{"S":{"A1:B2":1}}}"#,
            r#"{"sheets":{"S":{"T!A1":1}}}"#,
            r#"{"sheets":{"S":{"A1":[1]}}}"#,
            r#"{"sheets":{"S":{}},"names":{"n":"A1"}}"#,
            r#"{"sheets":{"S":{}},"names":{"n":"Other!A1"}}"#,
            r#"{"sheets":{"S":{}},"extra":1}"#,
            r#"{"sheets":"#,
        ] {
            assert!(gridbook_from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn non_finite_numbers_cannot_be_written() {
        let mut b = GridBook::builder();
        b.set(
            &CellRef::new("S", CellAddr::new(1, 1).unwrap()),
            CellValue::Number(f64::NAN),
        );
        assert!(gridbook_to_json(&b.build().unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_exact(
            cells in prop::collection::btree_map((1u32..200, 1u32..100), any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..40),
        ) {
            let mut b = GridBook::builder();
            b.sheet("Data");
            for (&(row, col), &v) in &cells {
                b.set(&CellRef::new("Data", CellAddr::new(row, col).unwrap()), CellValue::Number(v));
            }
            let book = b.build().unwrap();
            let text = gridbook_to_json(&book).unwrap();
            let back = gridbook_from_json(&text).unwrap();
            prop_assert_eq!(&back, &book);
            prop_assert_eq!(gridbook_to_json(&back).unwrap(), text);
        }
    }
}
