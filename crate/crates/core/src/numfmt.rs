//! `%.Ng`-style number formatting for the text artifacts (netlists, traces).

/// Formats `v` with `sig` significant digits, dropping trailing zeros and
/// switching to exponent notation outside `[1e-5, 1e{sig})`, as C's `%.*g`.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sig = sig.max(1);
    // exponent after rounding to `sig` digits
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

/// The 12-significant-digit form used by every exported file.
pub fn fmt12(v: f64) -> String {
    fmt_sig(v, 12)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_g_format() {
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt12(1.5), "1.5");
        assert_eq!(fmt12(3.0), "3");
        assert_eq!(fmt12(-0.25), "-0.25");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1e-7), "1e-07");
        assert_eq!(fmt12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt12(999999999999.9), "1e+12");
        assert_eq!(fmt12(0.0001), "0.0001");
        assert_eq!(fmt_sig(std::f64::consts::PI, 3), "3.14");
    }
}
