//! Canonical float formatting for CSV output.
//!
//! Every float is printed as the shortest decimal that parses back to the same
//! `f64`, so identical runs produce byte-identical files.

/// Shortest round-trip decimal, switching to exponent form for very large or
/// very small magnitudes.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02e23, 2.0f64.sqrt()] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float(0.25), "0.25");
        assert_eq!(float(1e-7), "1e-7");
    }
}
