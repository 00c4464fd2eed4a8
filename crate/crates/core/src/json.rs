//! Small helpers for emitting exact integers in JSON.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde_json::Value;

/// A JSON number when the integer fits in `i64`, otherwise a decimal string.
pub fn big_int(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => Value::from(v),
        None => Value::String(x.to_string()),
    }
}
