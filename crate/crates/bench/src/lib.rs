//! Shared fixtures for the benchmarks.

use layerpot_core::measures::{DiscreteMeasure, MeasureFamily};
use layerpot_core::Point;

/// Plane patch with `n × n` atoms.
pub fn plane(n: usize) -> DiscreteMeasure {
    DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n }, 0).expect("plane patch parameters are valid")
}

/// Tetrix at the given generation.
pub fn tetrix(level: u32) -> DiscreteMeasure {
    DiscreteMeasure::generate(&MeasureFamily::tetrix(level), 0).expect("tetrix parameters are valid")
}

/// Deterministic spread of nonzero offsets over several scales.
pub fn offsets(count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| {
            let t = k as f64 + 1.0;
            Point::new((0.7 * t).sin(), (1.3 * t).cos(), (0.37 * t).sin() + 1.5) * 10f64.powf((k % 7) as f64 - 3.0)
        })
        .collect()
}
