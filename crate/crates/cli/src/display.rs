//! Human-readable quantities with SI prefixes.

const PREFIXES: [(f64, &str); 9] = [
    (1e-15, "f"),
    (1e-12, "p"),
    (1e-9, "n"),
    (1e-6, "µ"),
    (1e-3, "m"),
    (1.0, ""),
    (1e3, "k"),
    (1e6, "M"),
    (1e9, "G"),
];

/// `1.735e-8, "s"` → `"17.3500 ns"`. Values outside the prefix table, zero
/// and unitless values are printed plainly.
pub fn si(value: f64, unit: &str) -> String {
    if unit.is_empty() || value == 0.0 || !value.is_finite() {
        return format!("{value:.4} {unit}").trim_end().to_string();
    }
    let a = value.abs();
    let (scale, prefix) = PREFIXES
        .iter()
        .rev()
        .find(|(s, _)| a >= *s)
        .copied()
        .unwrap_or(PREFIXES[0]);
    format!("{:.4} {prefix}{unit}", value / scale)
}

/// Display string followed by the exact SI value.
pub fn si_exact(value: f64, unit: &str) -> String {
    if unit.is_empty() {
        return si(value, unit);
    }
    format!("{}  ({value:e} {unit})", si(value, unit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes() {
        assert_eq!(si(17.35e-9, "s"), "17.3500 ns");
        assert_eq!(si(2.4e-8, "H"), "24.0000 nH");
        assert_eq!(si(-3.2e-6, "A"), "-3.2000 µA");
        assert_eq!(si(0.36907, ""), "0.3691");
        assert_eq!(si(0.0, "s"), "0.0000 s");
        assert_eq!(si(2e7, "Hz"), "20.0000 MHz");
        assert_eq!(si_exact(1.75e-8, "s"), "17.5000 ns  (1.75e-8 s)");
    }
}
