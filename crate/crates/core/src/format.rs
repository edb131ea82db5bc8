//! Number formatting for deterministic text outputs.

/// Formats `x` with 15 significant digits in scientific notation.
pub fn sig15(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.14e}")
    } else {
        x.to_string()
    }
}
