//! Touchstone v1 two-port files, real/imaginary form.

use num_complex::Complex64;

use super::{RfError, SMatrix, SPoint};
use crate::format::sci9;

fn ohms(z: f64) -> String {
    if z.fract() == 0.0 && z.abs() < 1e15 {
        format!("{}", z as i64)
    } else {
        format!("{z}")
    }
}

/// Renders `s` as `.s2p` text. Each entry of `comments` becomes a `!` line
/// ahead of the option line.
pub fn write_touchstone(s: &SMatrix, comments: &[&str]) -> Result<String, RfError> {
    let [z1, z2] = s.z_ref;
    if z1 != z2 {
        return Err(RfError::Touchstone(format!("ports referenced to {z1} and {z2} ohm")));
    }
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push('!');
            if !line.is_empty() {
                out.push(' ');
                out.push_str(line);
            }
            out.push('\n');
        }
    }
    out.push_str(&format!("# HZ S RI R {}\n", ohms(z1)));
    for p in &s.points {
        let fields = [
            p.freq, p.s11.re, p.s11.im, p.s21.re, p.s21.im, p.s12.re, p.s12.im, p.s22.re, p.s22.im,
        ];
        let row: Vec<String> = fields.iter().map(|&v| sci9(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Parses text produced by [`write_touchstone`] (HZ, S, RI only).
pub fn read_touchstone(text: &str) -> Result<SMatrix, RfError> {
    let mut z_ref = None;
    let mut points = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            let words: Vec<String> = opts.split_whitespace().map(str::to_ascii_uppercase).collect();
            let r_at = words.iter().position(|w| w == "R");
            let ok = words.first().map(String::as_str) == Some("HZ")
                && words.get(1).map(String::as_str) == Some("S")
                && words.get(2).map(String::as_str) == Some("RI");
            let z = r_at.and_then(|i| words.get(i + 1)).and_then(|w| w.parse::<f64>().ok());
            match (ok, z) {
                (true, Some(z)) => z_ref = Some(z),
                _ => return Err(RfError::Touchstone(format!("line {}: unsupported options `{line}`", no + 1))),
            }
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| RfError::Touchstone(format!("line {}: {e}", no + 1)))?;
        if v.len() != 9 {
            return Err(RfError::Touchstone(format!("line {}: {} fields, expected 9", no + 1, v.len())));
        }
        let c = |i: usize| Complex64::new(v[i], v[i + 1]);
        points.push(SPoint { freq: v[0], s11: c(1), s21: c(3), s12: c(5), s22: c(7) });
    }
    let z = z_ref.ok_or_else(|| RfError::Touchstone("missing option line".into()))?;
    Ok(SMatrix { z_ref: [z, z], points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let s = SMatrix {
            z_ref: [50.0, 50.0],
            points: vec![SPoint {
                freq: 2.4e9,
                s11: Complex64::new(1.0 / 3.0, 0.0),
                s12: Complex64::new(2.0 / 3.0, 0.0),
                s21: Complex64::new(2.0 / 3.0, -0.0),
                s22: Complex64::new(1.0 / 3.0, 0.0),
            }],
        };
        let text = write_touchstone(&s, &["series 50 ohm"]).unwrap();
        assert_eq!(
            text,
            "! series 50 ohm\n# HZ S RI R 50\n2.40000000e+09 3.33333333e-01 0.00000000e+00 \
             6.66666667e-01 0.00000000e+00 6.66666667e-01 0.00000000e+00 3.33333333e-01 \
             0.00000000e+00\n"
        );
        let back = read_touchstone(&text).unwrap();
        assert_eq!(back.points.len(), 1);
        assert!((back.points[0].s21.re - 2.0 / 3.0).abs() < 1e-8);
        let mixed = SMatrix { z_ref: [50.0, 10.0], points: vec![] };
        assert!(write_touchstone(&mixed, &[]).is_err());
    }
}
