//! `start:end` sweep ranges.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RangeError {
    #[error("expected `start:end`, got `{0}`")]
    Shape(String),
    #[error("`{0}` is not a number")]
    Number(String),
    #[error("range bounds must be finite, got `{0}`")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub start: f64,
    pub end: f64,
}

impl SweepRange {
    /// `steps` evenly spaced points from `start` to `end` inclusive; a
    /// single step gives `start`.
    pub fn points(&self, steps: usize) -> Vec<f64> {
        match steps {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.end
                    } else {
                        self.start + (self.end - self.start) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

fn bound(part: &str) -> Result<f64, RangeError> {
    let part = part.trim();
    let v: f64 = part.parse().map_err(|_| RangeError::Number(part.to_string()))?;
    if !v.is_finite() {
        return Err(RangeError::NonFinite(part.to_string()));
    }
    Ok(v)
}

pub fn parse_range(s: &str) -> Result<SweepRange, RangeError> {
    let (a, b) = s.split_once(':').ok_or_else(|| RangeError::Shape(s.to_string()))?;
    if b.contains(':') {
        return Err(RangeError::Shape(s.to_string()));
    }
    Ok(SweepRange { start: bound(a)?, end: bound(b)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_spaces() {
        let r = parse_range(" 0.3 : 0.39").unwrap();
        assert_eq!(r, SweepRange { start: 0.3, end: 0.39 });
        let p = r.points(10);
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], 0.3);
        assert_eq!(p[9], 0.39);
        assert_eq!(r.points(1), vec![0.3]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(parse_range("0.3"), Err(RangeError::Shape(_))));
        assert!(matches!(parse_range("0.3:0.4:0.5"), Err(RangeError::Shape(_))));
        assert!(matches!(parse_range("a:1"), Err(RangeError::Number(_))));
        assert!(matches!(parse_range("inf:1"), Err(RangeError::NonFinite(_))));
        assert!(matches!(parse_range("1:NaN"), Err(RangeError::NonFinite(_))));
    }
}
