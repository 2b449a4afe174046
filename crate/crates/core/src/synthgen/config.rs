use serde::{Deserialize, Serialize};

use super::{Result, SynthError};
use crate::graphstore::{Gender, ObservationWindow};

pub const CONFIG_VERSION: u32 = 1;

/// Mean monthly calls and SMS a member of the group sends along one active tie.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub min_age: u32,
    pub max_age: u32,
    /// `None` matches both genders.
    pub gender: Option<Gender>,
    pub calls: f64,
    pub sms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub version: u32,
    pub n_nodes: usize,
    pub n_months: usize,
    pub start_year: i32,
    pub start_month: u32,
    pub mean_degree: f64,
    pub tie_persistence: f64,
    pub reactivation_rate: f64,
    /// Per node and month, probability of forming one new tie.
    pub novel_tie_rate: f64,
    pub december_boost: f64,
    /// Gamma shape of the count noise; smaller is burstier.
    pub dispersion: f64,
    /// Probability that a new tie stays inside the node's city.
    pub locality: f64,
    pub n_cities: usize,
    pub min_age: u32,
    pub max_age: u32,
    pub profiles: Vec<ActivityProfile>,
    pub rng_seed: u64,
}

fn profile(min_age: u32, max_age: u32, gender: Gender, calls: f64, sms: f64) -> ActivityProfile {
    ActivityProfile {
        min_age,
        max_age,
        gender: Some(gender),
        calls,
        sms,
    }
}

/// Younger users call and text more; gender B texts a little more.
pub fn default_profiles() -> Vec<ActivityProfile> {
    vec![
        profile(18, 24, Gender::A, 3.0, 3.5),
        profile(18, 24, Gender::B, 3.2, 4.2),
        profile(25, 39, Gender::A, 2.6, 2.0),
        profile(25, 39, Gender::B, 2.8, 2.4),
        profile(40, 54, Gender::A, 2.2, 1.0),
        profile(40, 54, Gender::B, 2.4, 1.2),
        profile(55, 200, Gender::A, 1.8, 0.4),
        profile(55, 200, Gender::B, 2.0, 0.5),
    ]
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            version: CONFIG_VERSION,
            n_nodes: 2_000,
            n_months: 36,
            start_year: 2007,
            start_month: 1,
            mean_degree: 8.0,
            tie_persistence: 0.85,
            reactivation_rate: 0.15,
            novel_tie_rate: 0.012,
            december_boost: 1.6,
            dispersion: 1.5,
            locality: 0.85,
            n_cities: 8,
            min_age: 18,
            max_age: 65,
            profiles: default_profiles(),
            rng_seed: 0,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(msg()))
    }
}

fn prob(name: &str, v: f64) -> Result<()> {
    check((0.0..=1.0).contains(&v), || format!("{name} = {v} is not in [0, 1]"))
}

fn rate(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v >= 0.0, || format!("{name} = {v} must be finite and >= 0"))
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SynthError::Version {
                found: self.version,
                expected: CONFIG_VERSION,
            });
        }
        check(self.n_months >= 2, || format!("n_months = {} must be >= 2", self.n_months))?;
        check(self.n_nodes >= 2, || format!("n_nodes = {} must be >= 2", self.n_nodes))?;
        check((1..=12).contains(&self.start_month), || {
            format!("start_month = {} must be in 1..=12", self.start_month)
        })?;
        prob("tie_persistence", self.tie_persistence)?;
        prob("reactivation_rate", self.reactivation_rate)?;
        prob("novel_tie_rate", self.novel_tie_rate)?;
        prob("locality", self.locality)?;
        rate("mean_degree", self.mean_degree)?;
        rate("december_boost", self.december_boost)?;
        check(self.dispersion.is_finite() && self.dispersion > 0.0, || {
            format!("dispersion = {} must be > 0", self.dispersion)
        })?;
        check(self.n_cities >= 1, || "n_cities must be >= 1".into())?;
        check(self.min_age <= self.max_age, || "min_age > max_age".into())?;
        for p in &self.profiles {
            rate("profile calls", p.calls)?;
            rate("profile sms", p.sms)?;
        }
        Ok(())
    }

    pub fn window(&self) -> ObservationWindow {
        ObservationWindow::new(self.start_year, self.start_month, self.n_months)
    }

    /// Stationary share of active ties.
    pub fn stationary_activity(&self) -> f64 {
        let denom = 1.0 - self.tie_persistence + self.reactivation_rate;
        if denom <= 0.0 {
            1.0
        } else {
            self.reactivation_rate / denom
        }
    }

    /// (calls, sms) means for a sender; groups not covered fall back to (1, 1).
    pub fn rates_for(&self, age: u32, gender: Gender) -> (f64, f64) {
        self.profiles
            .iter()
            .find(|p| age >= p.min_age && age <= p.max_age && p.gender.is_none_or(|g| g == gender))
            .map_or((1.0, 1.0), |p| (p.calls, p.sms))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GenConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = GenConfig {
            rng_seed: 99,
            ..GenConfig::default()
        };
        let back = GenConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = GenConfig::from_toml("version = 1\nn_nodes = 50\n").unwrap();
        assert_eq!(cfg.n_nodes, 50);
        assert_eq!(cfg.n_months, 36);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "version = 2",
            "tie_persistence = 1.5",
            "n_months = 1",
            "novel_tie_rate = -0.1",
            "bogus = 3",
        ] {
            assert!(GenConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn stationary_share() {
        let mut cfg = GenConfig::default();
        cfg.tie_persistence = 1.0;
        cfg.reactivation_rate = 0.0;
        assert_eq!(cfg.stationary_activity(), 1.0);
        cfg.tie_persistence = 0.5;
        cfg.reactivation_rate = 0.5;
        assert_eq!(cfg.stationary_activity(), 0.5);
    }
}
