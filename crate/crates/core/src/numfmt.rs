//! Deterministic number formatting for CSV and SVG output.
//!
//! All file output goes through these helpers so that repeated runs produce
//! byte-identical artifacts regardless of thread count or platform.

/// Formats `v` with `sig` significant digits in plain decimal notation
/// (`.` separator, no grouping). Values whose integer part already has more
/// than `sig` digits print with zero decimals.
pub fn fmt_sig(v: f64, sig: u32) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, v)
}

/// Formats `v` with 6 significant digits, the file-format default.
pub fn fmt_sig6(v: f64) -> String {
    fmt_sig(v, 6)
}

/// Formats an SVG coordinate rounded to three decimals (0.0005 px
/// round-trip error), with trailing zeros and negative zero removed.
pub fn fmt_px(v: f64) -> String {
    let mut s = format!("{v:.3}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(196.123456), "196.123");
        assert_eq!(fmt_sig6(-7.4), "-7.40000");
        assert_eq!(fmt_sig6(0.00123456789), "0.00123457");
        assert_eq!(fmt_sig6(222.222222), "222.222");
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(100.0), "100.000");
    }

    #[test]
    fn shorter_precision() {
        assert_eq!(fmt_sig(28.571, 2), "29");
        assert_eq!(fmt_sig(771.4285, 3), "771");
        assert_eq!(fmt_sig(0.9, 1), "0.9");
    }

    #[test]
    fn px_rounds_to_three_decimals_and_trims() {
        assert_eq!(fmt_px(12.34567), "12.346");
        assert_eq!(fmt_px(-0.0004), "0");
        assert_eq!(fmt_px(2.5), "2.5");
        assert_eq!(fmt_px(640.0), "640");
        assert_eq!(fmt_px(-1.2004), "-1.2");
    }
}
