//! Plain-text matrix exchange. The first line holds `rows,cols`; each further
//! line is one matrix row written as `re,im` pairs separated by commas.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::linalg::CMatrix;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> CsvError {
    CsvError::Parse {
        line,
        message: message.into(),
    }
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>, CsvError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{t:?}: {e}")))
        })
        .collect()
}

pub fn parse_matrix(text: &str) -> Result<CMatrix, CsvError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let dims = numbers(n, header)?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(n, "header must be rows,cols"));
    };
    if rows < 0.0 || cols < 0.0 || rows.fract() != 0.0 || cols.fract() != 0.0 {
        return Err(parse_err(n, "header must hold non-negative integers"));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut m = CMatrix::zeros(rows, cols);
    let mut seen = 0;
    for (n, line) in lines {
        if seen == rows {
            return Err(parse_err(n, format!("more than {rows} rows")));
        }
        let vals = numbers(n, line)?;
        if vals.len() != 2 * cols {
            return Err(parse_err(
                n,
                format!("expected {} numbers, found {}", 2 * cols, vals.len()),
            ));
        }
        for j in 0..cols {
            m[(seen, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(0, format!("expected {rows} rows, found {seen}")));
    }
    Ok(m)
}

/// Round-trips exactly: floats are printed in their shortest exact form.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:?},{:?}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<CMatrix, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text)
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<(), CsvError> {
    std::fs::write(path, format_matrix(m)).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}
