//! Numeric formatting helpers shared by the serializers and the CLI.

/// Formats `x` with 12 significant digits, `%.12g`-style: plain decimal
/// notation in a moderate exponent range, scientific outside it, trailing
/// zeros trimmed. Values whose shortest decimal form has at most 12
/// significant digits round-trip bit-identically through this format.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        trim_decimal(&format!("{x:.prec$}"))
    } else {
        trim_exponent(&format!("{x:.11e}"))
    }
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

fn trim_exponent(s: &str) -> String {
    // "1.20000000000e-15" -> "1.2e-15"
    match s.split_once('e') {
        Some((mant, exp)) => format!("{}e{}", trim_decimal(mant), exp),
        None => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::sig12;

    #[test]
    fn plain_values() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(2.5), "2.5");
        assert_eq!(sig12(-0.25), "-0.25");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(0.2), "0.2");
    }

    #[test]
    fn twelve_digits_kept() {
        assert_eq!(sig12(1.23456789012345), "1.23456789012");
        assert_eq!(sig12(123456.789012345), "123456.789012");
    }

    #[test]
    fn scientific_range() {
        assert_eq!(sig12(1.5e-15), "1.5e-15");
        assert_eq!(sig12(3.0e14), "3e14");
    }

    #[test]
    fn round_trips_short_decimals() {
        for v in [0.1, 0.25, 1.0 / 3.0_f64 * 3.0, 5e-4, 123.456, -2.0 / 5.0] {
            let back: f64 = sig12(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v}");
        }
    }
}
