//! JSON formatting helpers: fixed 12-significant-digit floats and stable key order.

use serde_json::Value;

/// A float rounded to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        return Value::String("nan".into());
    }
    if x.is_infinite() {
        return Value::String(if x > 0.0 { "inf" } else { "-inf" }.into());
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(num(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(num(2.0).to_string(), "2.0");
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
    }
}
