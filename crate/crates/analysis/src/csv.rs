//! Feature CSV: one header row, then float rows.

use crate::{AnalysisError, FeatureSet};

pub fn parse_feature_csv(text: &str) -> Result<(Vec<String>, FeatureSet), AnalysisError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(AnalysisError::Csv { line: 1, message: "empty file".into() })?;
    let headers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let dim = headers.len();

    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| AnalysisError::Csv {
                line: idx + 1,
                message: format!("bad float '{}'", tok.trim()),
            })?;
            data.push(v);
            count += 1;
        }
        if count != dim {
            return Err(AnalysisError::Csv {
                line: idx + 1,
                message: format!("expected {dim} columns, found {count}"),
            });
        }
        n += 1;
    }
    if n == 0 {
        return Err(AnalysisError::Csv { line: 2, message: "no data rows".into() });
    }
    Ok((headers, FeatureSet::fit(data, n, dim)?))
}

pub fn to_csv(headers: &[String], data: &[f64], n: usize, dim: usize) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in 0..n {
        let cells: Vec<String> = (0..dim).map(|c| data[row * dim + c].to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
