use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// An anchor fires whenever the macro executor finishes or exhausts its budget.
    MacroBoundary,
    /// An anchor fires every `n` clock ticks; System 1 idles until the next one.
    FixedEvery(u32),
}

/// Per-subgoal primitive budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Multiple of the oracle expansion length.
    Factor(u32),
    Fixed(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorPolicy {
    pub mode: AnchorMode,
    pub budget: Budget,
    pub max_steps: u64,
}

pub const DEFAULT_MAX_STEPS: u64 = 400;

impl Default for AnchorPolicy {
    fn default() -> Self {
        Self { mode: AnchorMode::MacroBoundary, budget: Budget::Factor(2), max_steps: DEFAULT_MAX_STEPS }
    }
}

impl AnchorPolicy {
    /// Primitive budget for a subgoal whose oracle expansion has `oracle_len` primitives.
    pub fn budget_for(&self, oracle_len: usize) -> u32 {
        match self.budget {
            Budget::Factor(f) => (f * oracle_len.max(1) as u32).max(1),
            Budget::Fixed(b) => b.max(1),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        match (self.mode, self.budget) {
            (AnchorMode::FixedEvery(0), _) => Err("anchor period must be positive".into()),
            (_, Budget::Factor(0) | Budget::Fixed(0)) => Err("budget must be at least 1".into()),
            _ if self.max_steps == 0 => Err("step limit must be positive".into()),
            _ => Ok(()),
        }
    }
}
