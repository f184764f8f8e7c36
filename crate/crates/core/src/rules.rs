//! Scheduling rules behind a common trait, plus a by-name registry.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{decide_rp, decide_sp, AoiState, Operation};

/// A stationary rule mapping the age table to an operation.
///
/// Implementations must only return operations that are feasible for the
/// given state.
pub trait DecisionRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, state: AoiState) -> Operation;
}

impl<R: DecisionRule + ?Sized> DecisionRule for &R {
    fn name(&self) -> &str {
        (**self).name()
    }
    #[inline]
    fn decide(&self, state: AoiState) -> Operation {
        (**self).decide(state)
    }
}

impl<R: DecisionRule + ?Sized> DecisionRule for Arc<R> {
    fn name(&self) -> &str {
        (**self).name()
    }
    #[inline]
    fn decide(&self, state: AoiState) -> Operation {
        (**self).decide(state)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SourcePrioritized;

impl DecisionRule for SourcePrioritized {
    fn name(&self) -> &str {
        "SP"
    }
    #[inline]
    fn decide(&self, state: AoiState) -> Operation {
        decide_sp(state)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RelayPrioritized;

impl DecisionRule for RelayPrioritized {
    fn name(&self) -> &str {
        "RP"
    }
    #[inline]
    fn decide(&self, state: AoiState) -> Operation {
        decide_rp(state)
    }
}

/// The two protocols with closed-form analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "SP")]
    SourcePrioritized,
    #[serde(rename = "RP")]
    RelayPrioritized,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::SourcePrioritized, Protocol::RelayPrioritized];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::SourcePrioritized => "SP",
            Protocol::RelayPrioritized => "RP",
        }
    }

    pub fn rule(self) -> Arc<dyn DecisionRule> {
        match self {
            Protocol::SourcePrioritized => Arc::new(SourcePrioritized),
            Protocol::RelayPrioritized => Arc::new(RelayPrioritized),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SP" => Ok(Protocol::SourcePrioritized),
            "RP" => Ok(Protocol::RelayPrioritized),
            _ => Err(Error::UnknownRule(s.to_string())),
        }
    }
}

/// Rules registered by name and looked up at runtime.
#[derive(Debug, Default, Clone)]
pub struct RuleRegistry {
    rules: BTreeMap<String, Arc<dyn DecisionRule>>,
}

impl RuleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry pre-populated with `SP` and `RP`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        for proto in Protocol::ALL {
            reg.register(proto.rule());
        }
        reg
    }

    /// Adds a rule under its own name, replacing any previous entry.
    pub fn register(&mut self, rule: Arc<dyn DecisionRule>) {
        self.rules.insert(rule.name().to_string(), rule);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DecisionRule>> {
        self.rules
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownRule(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let reg = RuleRegistry::with_builtins();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["RP", "SP"]);
        let sp = reg.get("SP").unwrap();
        assert_eq!(sp.decide(AoiState::new(2, 5, 9)), Operation::Source);
        let rp = reg.get("RP").unwrap();
        assert_eq!(rp.decide(AoiState::new(2, 5, 9)), Operation::Relay);
        assert!(matches!(reg.get("XX"), Err(Error::UnknownRule(_))));
    }

    #[test]
    fn protocol_parse() {
        assert_eq!(
            "sp".parse::<Protocol>().unwrap(),
            Protocol::SourcePrioritized
        );
        assert_eq!(
            "RP".parse::<Protocol>().unwrap(),
            Protocol::RelayPrioritized
        );
        assert!("mdp".parse::<Protocol>().is_err());
    }
}
