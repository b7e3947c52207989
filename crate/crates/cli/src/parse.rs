//! Parsers for numeric command-line values.

use obstacle_damping::{Matrix, Vector};

/// Comma-separated numbers, e.g. `1,0.5,-2`.
pub fn vector(text: &str) -> Result<Vector, String> {
    let values = numbers(text)?;
    if values.is_empty() {
        return Err("expected at least one number".into());
    }
    Ok(Vector::from_vec(values))
}

/// A scalar (`2.5`), `I` for the unit mass, or rows separated by `;`
/// (`2,0;0,8`).
pub fn matrix(text: &str) -> Result<Matrix, String> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("i") {
        return Ok(Matrix::identity(1, 1));
    }
    let rows: Vec<Vec<f64>> = text.split(';').map(numbers).collect::<Result<_, _>>()?;
    let n = rows.len();
    if n == 1 && rows[0].len() == 1 {
        return Ok(Matrix::from_element(1, 1, rows[0][0]));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(format!(
            "matrix must be square, got {n} rows of lengths {:?}",
            lengths(&rows)
        ));
    }
    Ok(Matrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite number"))
        })
        .collect()
}

fn lengths(rows: &[Vec<f64>]) -> Vec<usize> {
    rows.iter().map(Vec::len).collect()
}
