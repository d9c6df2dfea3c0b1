//! Deterministic number formatting for emitted tables.

/// 17 significant decimal digits: enough to round-trip any f64 exactly, so
/// identical runs produce byte-identical files.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
