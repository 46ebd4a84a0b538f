//! Shared fixtures for the criterion benches.

use squac_core::{generate, Dataset, ScenarioId, SimScenario};

/// Conditional SE1 dataset of the given size, seeded for repeatability.
pub fn se1_dataset(n: usize, p: usize) -> Dataset {
    let data = generate(&SimScenario::new(ScenarioId::Se1, n, p, 11)).expect("valid scenario");
    data.dataset(true).expect("well-formed design")
}
