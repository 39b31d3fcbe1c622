use std::fs;
use std::path::Path;

use super::{CohortTable, FeatureKind, FeatureSchema, FeatureValue, PatientRecord};
use crate::error::{Error, Result};

/// Formats a number with six significant digits in plain decimal notation,
/// trailing zeros trimmed. Re-parsing and re-formatting is the identity.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    // `{:e}` does the correctly rounded mantissa/exponent split for us.
    let sci = format!("{:.5e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let point = exp + 1; // position of the decimal point relative to the digit string
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(digits);
    } else if point as usize >= digits.len() {
        out.push_str(digits);
        out.extend(std::iter::repeat_n('0', point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    out
}

pub fn write_cohort(table: &CohortTable) -> String {
    let mut out = String::new();
    let header: Vec<&str> = table
        .schema
        .column_names()
        .chain(std::iter::once(table.schema.target.as_str()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for rec in &table.records {
        for (f, v) in table.schema.features.iter().zip(&rec.values) {
            match v {
                FeatureValue::Continuous(Some(x)) => out.push_str(&format_sig6(*x)),
                FeatureValue::Continuous(None) => {}
                FeatureValue::Categorical(c) => out.push_str(&f.categories[*c]),
            }
            out.push(',');
        }
        out.push_str(if rec.label == 1 { "1" } else { "0" });
        out.push('\n');
    }
    out
}

pub fn save_cohort(table: &CohortTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_cohort(table)).map_err(|e| Error::io(path, e))
}

pub fn load_cohort(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<CohortTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_cohort(&text, schema)
}

fn check_header(header: &[&str], schema: &FeatureSchema) -> Result<()> {
    let expected: Vec<&str> = schema
        .column_names()
        .chain(std::iter::once(schema.target.as_str()))
        .collect();
    for name in &expected {
        if !header.contains(name) {
            return Err(Error::Schema(format!("missing column `{name}`")));
        }
    }
    for name in header {
        if !expected.contains(name) {
            return Err(Error::Schema(format!("unexpected column `{name}`")));
        }
    }
    if header.len() != expected.len() {
        return Err(Error::Schema("duplicate column in header".into()));
    }
    for (got, want) in header.iter().zip(&expected) {
        if got != want {
            return Err(Error::Schema(format!(
                "column `{got}` out of order, expected `{want}` at this position"
            )));
        }
    }
    Ok(())
}

pub fn read_cohort(text: &str, schema: &FeatureSchema) -> Result<CohortTable> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Schema("empty file, no header row".into()))?;
    let header: Vec<&str> = header_line.split(',').map(str::trim).collect();
    check_header(&header, schema)?;

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {row} has {} fields, header has {}",
                cells.len(),
                header.len()
            )));
        }
        let mut values = Vec::with_capacity(schema.len());
        for (f, cell) in schema.features.iter().zip(&cells) {
            let v = match f.kind {
                FeatureKind::Continuous if cell.is_empty() => FeatureValue::Continuous(None),
                FeatureKind::Continuous => match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => FeatureValue::Continuous(Some(x)),
                    _ => {
                        return Err(Error::Parse {
                            row,
                            column: f.name.clone(),
                            value: cell.to_string(),
                        })
                    }
                },
                FeatureKind::Categorical => match f.category_index(cell) {
                    Some(c) => FeatureValue::Categorical(c),
                    None => {
                        return Err(Error::Validation {
                            row,
                            feature: f.name.clone(),
                            value: cell.to_string(),
                        })
                    }
                },
            };
            values.push(v);
        }
        let label = match cells[schema.len()] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Validation {
                    row,
                    feature: schema.target.clone(),
                    value: other.to_string(),
                })
            }
        };
        records.push(PatientRecord { values, label });
    }
    Ok(CohortTable {
        schema: schema.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::default_schema;

    fn row(unit: &str) -> String {
        let s = default_schema();
        let mut cells = Vec::new();
        for f in &s.features {
            cells.push(match f.name.as_str() {
                "service_unit" => unit.to_string(),
                "gender" => "F".into(),
                "ethnicity" => "WHITE".into(),
                _ => "1.5".into(),
            });
        }
        cells.push("0".into());
        cells.join(",")
    }

    fn header() -> String {
        let s = default_schema();
        let mut h: Vec<&str> = s.column_names().collect();
        h.push("mortality_28d");
        h.join(",")
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(63.2), "63.2");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(-0.00123456789), "-0.00123457");
        assert_eq!(format_sig6(1234567.0), "1234570");
        assert_eq!(format_sig6(999999.7), "1000000");
        assert_eq!(format_sig6(1.69504123), "1.69504");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn reads_three_rows() {
        let text = format!("{}\n{}\n{}\n{}\n", header(), row("CCU"), row("MICU"), row("SICU"));
        let t = read_cohort(&text, &default_schema()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.records[1].values[0], FeatureValue::Categorical(2));
    }

    #[test]
    fn unknown_category_cites_row() {
        let mut lines = vec![header()];
        for i in 0..8 {
            lines.push(row(if i == 6 { "ICU9" } else { "CSRU" }));
        }
        let err = read_cohort(&lines.join("\n"), &default_schema()).unwrap_err();
        match err {
            Error::Validation { row, feature, value } => {
                assert_eq!(row, 7);
                assert_eq!(feature, "service_unit");
                assert_eq!(value, "ICU9");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_extra_columns_named() {
        let h = header().replace(",bun,", ",");
        let err = read_cohort(&h, &default_schema()).unwrap_err();
        assert!(err.to_string().contains("`bun`"), "{err}");
        let h = format!("{},extra", header());
        let err = read_cohort(&h, &default_schema()).unwrap_err();
        assert!(err.to_string().contains("`extra`"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let bad = row("CCU").replacen("1.5", "abc", 1);
        let text = format!("{}\n{}\n{}\n", header(), row("CCU"), bad);
        match read_cohort(&text, &default_schema()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_table_writes_header_only() {
        let t = CohortTable::empty(default_schema());
        let text = write_cohort(&t);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), header());
    }

    #[test]
    fn missing_height_is_one_empty_cell() {
        let text = format!("{}\n{}\n", header(), row("CCU"));
        let mut t = read_cohort(&text, &default_schema()).unwrap();
        let h = t.schema.index_of("height").unwrap();
        t.records[0].set_number(h, None);
        let out = write_cohort(&t);
        let data = out.lines().nth(1).unwrap();
        let cells: Vec<&str> = data.split(',').collect();
        assert_eq!(cells.iter().filter(|c| c.is_empty()).count(), 1);
        assert_eq!(cells[h], "");
    }
}
