//! Numeric cleanup shared by cell parsing and QA scoring.

const CURRENCY: [char; 3] = ['$', '€', '£'];

/// Reduces a decorated number to a plain `[-]digits[.digits][e[-]digits]`
/// string, or `None` if the text is not a number under the cleanup rules.
pub(crate) fn clean(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    if let Some(rest) = s.strip_suffix('%') {
        s = rest.trim_end();
    }
    let mut negative = false;
    let mut signed = false;
    let mut take_sign = |s: &mut &str| {
        if signed {
            return;
        }
        if let Some(rest) = s.strip_prefix('-') {
            negative = true;
            signed = true;
            *s = rest;
        } else if let Some(rest) = s.strip_prefix('+') {
            signed = true;
            *s = rest;
        }
    };
    take_sign(&mut s);
    if let Some(rest) = s.strip_prefix(CURRENCY) {
        s = rest;
    }
    take_sign(&mut s);

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (mantissa, None),
    };
    let int_digits = strip_grouping(int_part)?;
    if let Some(f) = frac_part {
        if !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    if int_digits.is_empty() && frac_part.is_none_or(str::is_empty) {
        return None;
    }

    let mut out = String::with_capacity(s.len() + 1);
    if negative {
        out.push('-');
    }
    out.push_str(if int_digits.is_empty() { "0" } else { &int_digits });
    if let Some(f) = frac_part.filter(|f| !f.is_empty()) {
        out.push('.');
        out.push_str(f);
    }
    if let Some(e) = exponent {
        let digits = e.strip_prefix(['-', '+']).unwrap_or(e);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        out.push('e');
        out.push_str(e.strip_prefix('+').unwrap_or(e));
    }
    Some(out)
}

/// Parses a cleaned number, rejecting values that overflow to infinity.
pub(crate) fn to_f64(cleaned: &str) -> Option<f64> {
    cleaned.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Validates an integer part, removing thousands separators. Comma groups
/// must be well formed (`1,234,567`).
fn strip_grouping(int_part: &str) -> Option<String> {
    if !int_part.contains(',') {
        return int_part.bytes().all(|b| b.is_ascii_digit()).then(|| int_part.to_string());
    }
    let mut groups = int_part.split(',');
    let first = groups.next()?;
    if first.is_empty() || first.len() > 3 || !first.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut out = first.to_string();
    for g in groups {
        if g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        out.push_str(g);
    }
    Some(out)
}

/// An exact base-10 number `mantissa * 10^-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Decimal {
    mantissa: i128,
    scale: u32,
}

const MAX_SCALE: u32 = 30;

impl Decimal {
    /// Parses the output of [`clean`]. Returns `None` when the value does not
    /// fit the fixed-width representation.
    pub(crate) fn parse(cleaned: &str) -> Option<Decimal> {
        let (mantissa, exponent) = match cleaned.split_once('e') {
            Some((m, e)) => (m, e.parse::<i32>().ok()?),
            None => (cleaned, 0),
        };
        let (int_part, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits = format!("{int_part}{frac}");
        let mut value: i128 = digits.parse().ok()?;
        let mut scale = frac.len() as i64 - exponent as i64;
        while scale < 0 {
            value = value.checked_mul(10)?;
            scale += 1;
        }
        if scale > MAX_SCALE as i64 {
            return None;
        }
        Some(Decimal { mantissa: value, scale: scale as u32 })
    }

    /// Parses the shortest decimal rendering of a finite float.
    pub(crate) fn from_f64(x: f64) -> Option<Decimal> {
        if !x.is_finite() {
            return None;
        }
        Decimal::parse(&format!("{x}"))
    }

    fn rescale(self, scale: u32) -> Option<i128> {
        self.mantissa.checked_mul(10i128.checked_pow(scale - self.scale)?)
    }

    /// Returns `|self - other| <= margin * |other|`, or `None` on overflow.
    pub(crate) fn within_relative(self, other: Decimal, margin: Decimal) -> Option<bool> {
        // compare at scale s1 + s2 where lhs uses max(self, other) scale
        let s = self.scale.max(other.scale);
        let diff = self.rescale(s)?.checked_sub(other.rescale(s)?)?.checked_abs()?;
        let rhs = margin.mantissa.checked_mul(other.mantissa.checked_abs()?)?;
        let rhs_scale = margin.scale + other.scale;
        let common = s.max(rhs_scale);
        if common > 38 {
            return None;
        }
        let lhs = diff.checked_mul(10i128.checked_pow(common - s)?)?;
        let rhs = rhs.checked_mul(10i128.checked_pow(common - rhs_scale)?)?;
        Some(lhs <= rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_outputs() {
        assert_eq!(clean("1,234.5").as_deref(), Some("1234.5"));
        assert_eq!(clean("-$1,000").as_deref(), Some("-1000"));
        assert_eq!(clean(".5").as_deref(), Some("0.5"));
        assert_eq!(clean("5.").as_deref(), Some("5"));
        assert_eq!(clean("2E+3").as_deref(), Some("2e3"));
        assert_eq!(clean("."), None);
        assert_eq!(clean("1e"), None);
        assert_eq!(clean("+-1"), None);
    }

    #[test]
    fn decimal_relative_comparison() {
        let d = |s: &str| Decimal::parse(&clean(s).unwrap()).unwrap();
        let m = Decimal::from_f64(0.05).unwrap();
        assert_eq!(d("105").within_relative(d("100"), m), Some(true));
        assert_eq!(d("105.001").within_relative(d("100"), m), Some(false));
        assert_eq!(d("0.315").within_relative(d("0.3"), m), Some(true));
        assert_eq!(d("0.3151").within_relative(d("0.3"), m), Some(false));
        assert_eq!(d("-95").within_relative(d("-100"), m), Some(true));
        assert_eq!(d("1.5e2").within_relative(d("150"), Decimal::from_f64(0.0).unwrap()), Some(true));
    }
}
