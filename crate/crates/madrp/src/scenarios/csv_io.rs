//! Price CSV ingestion and emission. The layout is declared, never sniffed,
//! so the same file parses identically on every platform.

use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

use super::PriceSeries;

/// Declared CSV shape: delimiter, header row, and leading date column.
#[derive(Clone, Debug)]
pub struct CsvLayout {
    pub delimiter: u8,
    pub has_header: bool,
    pub has_date_column: bool,
}

impl Default for CsvLayout {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            has_date_column: true,
        }
    }
}

/// Loads a price table: one row per day in file order, one column per asset.
///
/// Every parse failure names the offending cell (1-based data row, column id).
pub fn load_csv(path: &Path, layout: &CsvLayout) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(layout.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;

    let mut records = reader.records();
    let skip = if layout.has_date_column { 1 } else { 0 };

    let mut asset_ids: Vec<String> = Vec::new();
    let mut width = 0usize;
    if layout.has_header {
        let header = records
            .next()
            .transpose()
            .map_err(|e| Error::Csv(format!("header: {e}")))?
            .ok_or_else(|| Error::Csv("empty file".into()))?;
        width = header.len();
        if width <= skip {
            return Err(Error::Csv("header has no asset columns".into()));
        }
        for field in header.iter().skip(skip) {
            let id = field.trim().to_string();
            if id.is_empty() {
                return Err(Error::Csv(format!(
                    "blank asset id in header column {}",
                    asset_ids.len() + skip
                )));
            }
            if asset_ids.contains(&id) {
                return Err(Error::Csv(format!("duplicate asset id '{id}'")));
            }
            asset_ids.push(id);
        }
    }

    let mut dates: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::Csv(format!("data row {}: {e}", idx + 1)))?;
        if rec.len() == 1 && rec.iter().all(|f| f.trim().is_empty()) {
            continue; // trailing blank line
        }
        if width == 0 {
            // headerless file: first data row fixes the width
            width = rec.len();
            if width <= skip {
                return Err(Error::Csv("rows have no asset columns".into()));
            }
            asset_ids = (0..width - skip).map(|i| format!("asset{i}")).collect();
        }
        if rec.len() != width {
            return Err(Error::Csv(format!(
                "data row {} has {} fields, expected {width}",
                idx + 1,
                rec.len()
            )));
        }
        if layout.has_date_column {
            dates.push(rec.get(0).unwrap_or("").trim().to_string());
        }
        let mut row = Vec::with_capacity(width - skip);
        for (j, field) in rec.iter().enumerate().skip(skip) {
            let cell = field.trim();
            let col_id = &asset_ids[j - skip];
            if cell.is_empty() {
                return Err(Error::Csv(format!(
                    "blank cell at data row {}, column '{col_id}'",
                    idx + 1
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Csv(format!(
                    "unparsable cell at data row {}, column '{col_id}': '{cell}'",
                    idx + 1
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }

    if rows.len() < 2 {
        return Err(Error::Csv(format!(
            "need at least 2 price rows, got {}",
            rows.len()
        )));
    }
    let n = width - skip;
    let mut prices = Array2::zeros((rows.len(), n));
    for (t, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            prices[[t, i]] = v;
        }
    }
    let dates = if layout.has_date_column { Some(dates) } else { None };
    PriceSeries::new(asset_ids, prices, dates)
}

/// Writes a price table in the given layout. Prices are printed with the
/// shortest representation that parses back to the identical f64, so a
/// write/load round trip is bit-exact.
pub fn write_csv(series: &PriceSeries, path: &Path, layout: &CsvLayout) -> Result<()> {
    if layout.has_date_column && series.dates().is_none() {
        return Err(Error::InvalidInput(
            "layout declares a date column but the series has no dates".into(),
        ));
    }
    let mut writer = csv::WriterBuilder::new()
        .delimiter(layout.delimiter)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;

    if layout.has_header {
        let mut header: Vec<&str> = Vec::new();
        if layout.has_date_column {
            header.push("date");
        }
        header.extend(series.asset_ids().iter().map(|s| s.as_str()));
        writer
            .write_record(&header)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    for t in 0..series.n_days() {
        let mut rec: Vec<String> = Vec::new();
        if layout.has_date_column {
            rec.push(series.dates().unwrap()[t].clone());
        }
        for i in 0..series.n_assets() {
            rec.push(format!("{}", series.prices()[[t, i]]));
        }
        writer
            .write_record(&rec)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_headered_table() {
        let f = write_tmp("date,aa,bb\n2005-01-03,100,50\n2005-01-04,110,51\n2005-01-05,99,52\n");
        let s = load_csv(f.path(), &CsvLayout::default()).unwrap();
        assert_eq!(s.n_days(), 3);
        assert_eq!(s.n_assets(), 2);
        assert_eq!(s.asset_ids(), &["aa".to_string(), "bb".to_string()]);
        assert_eq!(s.dates().unwrap()[2], "2005-01-05");
        assert_eq!(s.prices()[[1, 0]], 110.0);
    }

    #[test]
    fn blank_cell_names_the_cell() {
        let f = write_tmp("date,aa,bb\nd1,100,50\nd2,,51\n");
        let err = load_csv(f.path(), &CsvLayout::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("data row 2"), "{msg}");
        assert!(msg.contains("'aa'"), "{msg}");
    }

    #[test]
    fn unparsable_cell_reports_content() {
        let f = write_tmp("date,aa\nd1,100\nd2,1O0\nd3,101\n");
        let msg = load_csv(f.path(), &CsvLayout::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("1O0"), "{msg}");
        assert!(msg.contains("data row 2"), "{msg}");
    }

    #[test]
    fn layout_without_dates() {
        let layout = CsvLayout {
            has_date_column: false,
            ..CsvLayout::default()
        };
        let f = write_tmp("aa,bb\n100,50\n110,51\n");
        let s = load_csv(f.path(), &layout).unwrap();
        assert!(s.dates().is_none());
        assert_eq!(s.n_assets(), 2);
    }

    #[test]
    fn headerless_layout_synthesizes_ids() {
        let layout = CsvLayout {
            has_header: false,
            has_date_column: false,
            delimiter: b';',
        };
        let f = write_tmp("100;50\n110;51\n");
        let s = load_csv(f.path(), &layout).unwrap();
        assert_eq!(s.asset_ids(), &["asset0".to_string(), "asset1".to_string()]);
    }

    #[test]
    fn duplicate_asset_id_rejected() {
        let f = write_tmp("date,aa,aa\nd1,1,2\nd2,3,4\n");
        let msg = load_csv(f.path(), &CsvLayout::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("duplicate"), "{msg}");
    }

    #[test]
    fn ragged_row_rejected() {
        let f = write_tmp("date,aa,bb\nd1,1,2\nd2,3\n");
        let msg = load_csv(f.path(), &CsvLayout::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("fields"), "{msg}");
    }

    #[test]
    fn too_few_rows_rejected() {
        let f = write_tmp("date,aa\nd1,1\n");
        assert!(load_csv(f.path(), &CsvLayout::default()).is_err());
    }

    #[test]
    fn round_trip_bit_exact() {
        let prices = array![
            [100.1, 0.07],
            [99.25, 0.071],
            [101.375, 0.0695],
            [100.0001, 0.0713]
        ];
        let s = PriceSeries::new(
            vec!["x".into(), "y".into()],
            prices,
            Some(vec!["d1".into(), "d2".into(), "d3".into(), "d4".into()]),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&s, f.path(), &CsvLayout::default()).unwrap();
        let back = load_csv(f.path(), &CsvLayout::default()).unwrap();
        assert_eq!(back.prices(), s.prices());
        assert_eq!(back.asset_ids(), s.asset_ids());
        assert_eq!(back.dates(), s.dates());
    }
}
