//! Shipped experiment configs, embedded at compile time.

use crate::experiment::config::{Diagnostic, Plan};

/// A named config shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub file_name: &'static str,
    pub text: &'static str,
}

impl Preset {
    pub fn plan(&self) -> Result<Plan, Diagnostic> {
        Plan::from_source(self.text, self.file_name)
    }
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            file_name: concat!($name, ".cfg"),
            text: include_str!(concat!("../../presets/", $name, ".cfg")),
        }
    };
}

static PRESETS: &[Preset] = &[
    preset!("constant-exact"),
    preset!("corollary-cl1-weak"),
    preset!("corollary-co1-increment"),
    preset!("corollary-co2-increment"),
    preset!("driver-bias-control"),
    preset!("lemma-c1-sub-alpha"),
    preset!("lemma-c1-super-alpha"),
    preset!("lemma-c2-symmetric"),
    preset!("oracle-finite-activity"),
    preset!("prop-pro2-holder"),
    preset!("prop-pro3-lipschitz"),
    preset!("prop-pro3-symmetric-alpha-one"),
    preset!("prop-pro4-truncated-lipschitz"),
    preset!("prop-t1-critical"),
    preset!("prop-t1-sub"),
    preset!("prop-t1-super"),
];

/// Every shipped preset, sorted by name.
pub fn presets() -> &'static [Preset] {
    PRESETS
}

/// Looks a preset up by name, with or without the `.cfg` suffix.
pub fn preset(name: &str) -> Option<&'static Preset> {
    let stem = name.strip_suffix(".cfg").unwrap_or(name);
    PRESETS.iter().find(|p| p.name == stem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::parse;

    #[test]
    fn at_least_ten_presets() {
        assert!(presets().len() >= 10);
        let mut names: Vec<_> = presets().iter().map(|p| p.name).collect();
        names.dedup();
        assert_eq!(names.len(), presets().len());
    }

    #[test]
    fn every_preset_validates_and_round_trips() {
        for p in presets() {
            let plan = p.plan().unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(plan.config.name, p.name);
            assert!(plan.config.description.is_some(), "{}", p.name);
            let again = parse(&plan.config.to_toml(), p.file_name).unwrap();
            assert_eq!(again, plan.config, "{}", p.name);
        }
    }

    #[test]
    fn sub_alpha_preset_targets_one_half() {
        let plan = preset("lemma-c1-sub-alpha.cfg").unwrap().plan().unwrap();
        assert_eq!(plan.config.driver.alpha, 1.5);
        assert_eq!(plan.config.experiment.p, vec![0.75]);
        assert_eq!(plan.predicted, vec![0.5]);
    }

    #[test]
    fn lookup_accepts_both_spellings() {
        assert!(preset("prop-pro3-lipschitz").is_some());
        assert!(preset("prop-pro3-lipschitz.cfg").is_some());
        assert!(preset("nope").is_none());
    }
}
