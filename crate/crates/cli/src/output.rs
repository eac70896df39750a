//! CSV and JSON emission with round-trip number formatting.

use crate::CliError;

/// 17 significant digits; reads back to the same `f64`.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text from a header and numeric rows.
pub fn csv_table(header: &[String], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.iter().map(|v| number(*v)))
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Input(e.to_string())
}

/// Points, one per row. A first row that does not parse is taken as a header.
pub fn read_points(text: &str, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) if p.len() == dim && p.iter().all(|v| v.is_finite()) => out.push(p),
            Err(_) if i == 0 => continue,
            _ => {
                return Err(CliError::Input(format!(
                    "points row {} must hold {dim} finite numbers, got `{}`",
                    i + 1,
                    rec.iter().collect::<Vec<_>>().join(",")
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Input("points file holds no points".into()));
    }
    Ok(out)
}

pub fn axis_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}{j}")).collect()
}
