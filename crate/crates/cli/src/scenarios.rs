//! Built-in scenario catalog. Each entry ships as a config file under `scenarios/`.

use crate::config::{ConfigErrors, ExperimentConfig};

macro_rules! catalog {
    ($($name:literal),* $(,)?) => {
        pub const CATALOG: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".cfg")))),*
        ];
    };
}

catalog!(
    "halfspace-bistable-1d",
    "halfspace-bistable-2d",
    "corner-epigraph-2d",
    "cosine-epigraph-2d",
    "parabola-moving-planes-2d",
    "cone-exponent-sweep",
    "barrier-verify",
    "chain-verify",
    "maxprin-random",
    "sliding-box",
    "overdet-forward",
);

pub fn list_scenarios() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).collect()
}

pub fn scenario_text(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parsed default configuration of a catalog entry.
pub fn scenario_config(name: &str) -> Option<Result<ExperimentConfig, ConfigErrors>> {
    scenario_text(name).map(ExperimentConfig::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_parses_and_names_match() {
        let names = list_scenarios();
        assert_eq!(names.len(), 11);
        let mut unique = names.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), names.len());
        for name in names {
            let cfg = scenario_config(name).unwrap().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name(), name);
        }
        assert!(scenario_text("nope").is_none());
    }
}
