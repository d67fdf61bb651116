/// Scientific notation with six significant digits and a signed two-digit exponent,
/// e.g. `-7.63800E+01`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let s = format!("{x:.5E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent marker");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

#[cfg(test)]
mod tests {
    use super::sci;

    #[test]
    fn formats() {
        assert_eq!(sci(-76.38), "-7.63800E+01");
        assert_eq!(sci(0.0), "0.00000E+00");
        assert_eq!(sci(1.03e-4), "1.03000E-04");
        assert_eq!(sci(2.0), "2.00000E+00");
        assert_eq!(sci(1.5e120), "1.50000E+120");
        assert_eq!(sci(f64::NAN), "NaN");
    }
}
