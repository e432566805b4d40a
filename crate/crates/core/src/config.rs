//! Run configuration and the named ablation profiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ErMode;
use crate::chat::BackendConfig;
use crate::prompts::{DEFAULT_SYSTEM_PROMPT, PLAIN_RANKING_PROMPT, RANKING_PROMPT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("legacy_window requires sort_schemes = false")]
    WindowWithSort,
    #[error("{0} must be at least 1")]
    NotPositive(&'static str),
    #[error("the single-prompt profile needs a baseline prompt (--baseline-prompt)")]
    MissingBaselinePrompt,
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("backend: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Extraction and generation share one growing chat history.
    Conversational,
    /// Every stage request is standalone with prior output inlined.
    Direct,
    /// One combined request per intervention with a user-supplied prompt.
    SinglePrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingPrompt {
    Tuned,
    Plain,
}

impl RankingPrompt {
    pub fn template(self) -> &'static str {
        match self {
            RankingPrompt::Tuned => RANKING_PROMPT,
            RankingPrompt::Plain => PLAIN_RANKING_PROMPT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Baseline,
    Direct,
    Con,
    ConSs,
    ConSsRank,
    ConSsRankEr,
}

impl Profile {
    pub const ALL: [Profile; 6] = [
        Profile::Baseline,
        Profile::Direct,
        Profile::Con,
        Profile::ConSs,
        Profile::ConSsRank,
        Profile::ConSsRankEr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Baseline => "baseline",
            Profile::Direct => "direct",
            Profile::Con => "con",
            Profile::ConSs => "con+ss",
            Profile::ConSsRank => "con+ss+rank",
            Profile::ConSsRankEr => "con+ss+rank-er",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().replace('\u{2212}', "-");
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == normalized)
            .ok_or_else(|| ConfigError::UnknownProfile(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub prompt_mode: PromptMode,
    pub sort_schemes: bool,
    pub er_mode: ErMode,
    pub rank_k: usize,
    /// Disjoint window over the raw scheme list; only without sorting.
    pub legacy_window: Option<usize>,
    pub ranking_prompt: RankingPrompt,
    pub backend: BackendConfig,
    pub system_prompt: String,
    pub parallelism: usize,
    pub run_label: String,
    /// Template with an `{intervention}` placeholder for single-prompt runs.
    pub baseline_prompt: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_profile(Profile::ConSsRankEr)
    }
}

impl RunConfig {
    pub fn from_profile(profile: Profile) -> Self {
        let base = Self {
            prompt_mode: PromptMode::Conversational,
            sort_schemes: true,
            er_mode: ErMode::Omit,
            rank_k: 3,
            legacy_window: None,
            ranking_prompt: RankingPrompt::Tuned,
            backend: BackendConfig::default(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            parallelism: 1,
            run_label: profile.name().to_string(),
            baseline_prompt: None,
        };
        let unsorted = Self {
            sort_schemes: false,
            legacy_window: Some(2),
            er_mode: ErMode::Map,
            ranking_prompt: RankingPrompt::Plain,
            ..base.clone()
        };
        match profile {
            Profile::Baseline => Self {
                prompt_mode: PromptMode::SinglePrompt,
                ..unsorted
            },
            Profile::Direct => Self {
                prompt_mode: PromptMode::Direct,
                ..unsorted
            },
            Profile::Con => unsorted,
            Profile::ConSs => Self {
                er_mode: ErMode::Map,
                ranking_prompt: RankingPrompt::Plain,
                ..base
            },
            Profile::ConSsRank => Self {
                er_mode: ErMode::Map,
                ..base
            },
            Profile::ConSsRankEr => base,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sort_schemes && self.legacy_window.is_some() {
            return Err(ConfigError::WindowWithSort);
        }
        if self.legacy_window == Some(0) {
            return Err(ConfigError::NotPositive("legacy_window"));
        }
        if self.rank_k == 0 {
            return Err(ConfigError::NotPositive("rank_k"));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::NotPositive("parallelism"));
        }
        if self.prompt_mode == PromptMode::SinglePrompt && self.baseline_prompt.is_none() {
            return Err(ConfigError::MissingBaselinePrompt);
        }
        self.backend
            .validate()
            .map_err(|e| ConfigError::Backend(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_parse_by_name() {
        for p in Profile::ALL {
            assert_eq!(p.name().parse::<Profile>().unwrap(), p);
        }
        assert_eq!(
            "con+ss+rank\u{2212}er".parse::<Profile>().unwrap(),
            Profile::ConSsRankEr
        );
        assert!("fancy".parse::<Profile>().is_err());
    }

    #[test]
    fn profiles_differ_in_one_knob_each() {
        let con = RunConfig::from_profile(Profile::Con);
        let ss = RunConfig::from_profile(Profile::ConSs);
        let rank = RunConfig::from_profile(Profile::ConSsRank);
        let er = RunConfig::from_profile(Profile::ConSsRankEr);
        assert!(!con.sort_schemes && con.legacy_window == Some(2));
        assert!(ss.sort_schemes && ss.legacy_window.is_none());
        assert_eq!(ss.ranking_prompt, RankingPrompt::Plain);
        assert_eq!(rank.ranking_prompt, RankingPrompt::Tuned);
        assert_eq!(rank.er_mode, ErMode::Map);
        assert_eq!(er.er_mode, ErMode::Omit);
        assert_eq!(
            RunConfig::from_profile(Profile::Direct).prompt_mode,
            PromptMode::Direct
        );
    }

    #[test]
    fn validation_rules() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.legacy_window = Some(2);
        assert_eq!(cfg.validate(), Err(ConfigError::WindowWithSort));
        let cfg = RunConfig {
            rank_k: 0,
            ..RunConfig::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::NotPositive("rank_k")));
        let cfg = RunConfig::from_profile(Profile::Baseline);
        assert_eq!(cfg.validate(), Err(ConfigError::MissingBaselinePrompt));
    }
}
