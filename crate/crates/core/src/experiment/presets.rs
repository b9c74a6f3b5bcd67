//! Bundled configs reproducing the reference parameter tables.

use super::config::ExperimentConfig;
use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig, ExperimentError> {
        ExperimentConfig::parse(self.text)
    }
}

const ALL: &[Preset] = &[
    Preset {
        name: "table2",
        text: include_str!("../../presets/table2.toml"),
    },
    Preset {
        name: "table5",
        text: include_str!("../../presets/table5.toml"),
    },
    Preset {
        name: "table7_gm",
        text: include_str!("../../presets/table7_gm.toml"),
    },
    Preset {
        name: "table7_welsch",
        text: include_str!("../../presets/table7_welsch.toml"),
    },
    Preset {
        name: "table12",
        text: include_str!("../../presets/table12.toml"),
    },
    Preset {
        name: "linreg_drift",
        text: include_str!("../../presets/linreg_drift.toml"),
    },
    Preset {
        name: "mf_synth",
        text: include_str!("../../presets/mf_synth.toml"),
    },
];

/// Looks up a preset. `table7` expands to both robust losses.
pub fn preset(name: &str) -> Option<Vec<Preset>> {
    if name == "table7" {
        return Some(ALL.iter().filter(|p| p.name.starts_with("table7_")).copied().collect());
    }
    ALL.iter().find(|p| p.name == name).map(|p| vec![*p])
}

pub fn preset_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = ALL.iter().map(|p| p.name).collect();
    names.push("table7");
    names
}
