//! Fixed-width numeric formatting shared by the Touchstone and CSV writers.

/// Formats `x` in C-style lowercase scientific notation with nine
/// significant digits, e.g. `2.40000000e+09` or `-1.25000000e-03`.
///
/// Output is byte-stable across platforms; negative zero prints as zero.
pub fn sci9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{x:.8e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Joins formatted fields with commas and terminates the row with LF.
pub fn csv_row(fields: &[f64]) -> String {
    let mut row = fields.iter().map(|&v| sci9(v)).collect::<Vec<_>>().join(",");
    row.push('\n');
    row
}
