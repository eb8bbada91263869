use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HomophilyError;
use crate::dataset::NodeText;

pub const SYSTEM_PROMPT: &str = "You are a chatbot expert in text classification.";
const DIRECT_QUESTION: &str = "Please tell me whether they belong to the same category or not.";
const REASONING_QUESTION: &str =
    "Please tell me whether they belong to the same category or not after reasoning step by step.";

/// Characters kept from each title/abstract before the prompt is assembled.
pub const DEFAULT_CHAR_BUDGET: usize = 2000;
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    Vanilla,
    Cot,
    Vote,
    Hybrid,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [Self::Vanilla, Self::Cot, Self::Vote, Self::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Cot => "cot",
            Self::Vote => "vote",
            Self::Hybrid => "hybrid",
        }
    }

    pub fn reasoning(self) -> bool {
        matches!(self, Self::Cot | Self::Hybrid)
    }

    pub fn voting(self) -> bool {
        matches!(self, Self::Vote | Self::Hybrid)
    }

    pub fn default_votes(self) -> usize {
        if self.voting() {
            5
        } else {
            1
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptVariant {
    type Err = HomophilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "direct" => Ok(Self::Vanilla),
            "cot" | "reasoning" => Ok(Self::Cot),
            "vote" | "voting" | "consistency" => Ok(Self::Vote),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(HomophilyError::Config(format!("unknown prompt strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub variant: PromptVariant,
    /// Queries issued per edge.
    pub votes: usize,
}

impl PromptStrategy {
    pub fn new(variant: PromptVariant) -> Self {
        Self {
            variant,
            votes: variant.default_votes(),
        }
    }

    pub fn with_votes(variant: PromptVariant, votes: usize) -> Result<Self, HomophilyError> {
        let s = Self { variant, votes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HomophilyError> {
        if self.votes == 0 || (self.votes > 1 && self.votes % 2 == 0) {
            return Err(HomophilyError::Config(format!(
                "votes per edge must be 1 or odd, got {}",
                self.votes
            )));
        }
        Ok(())
    }

    /// Sampling temperature: stochastic only when several answers are aggregated.
    pub fn temperature(&self) -> f64 {
        if self.variant.voting() {
            1.0
        } else {
            0.0
        }
    }

    /// Smallest "same" count that makes an edge homophilic.
    pub fn threshold(&self) -> usize {
        self.votes.div_ceil(2)
    }
}

impl Default for PromptStrategy {
    fn default() -> Self {
        Self::new(PromptVariant::Hybrid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub model: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptOptions {
    pub model: String,
    pub char_budget: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            model: DEFAULT_MODEL.to_string(),
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }
}

fn truncate(s: &str, budget: usize) -> &str {
    match s.char_indices().nth(budget) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn render_node(id: usize, t: &NodeText, budget: usize) -> String {
    let title = truncate(t.title.trim(), budget);
    let text = truncate(t.text.trim(), budget);
    format!("Node v_{id} → {{Title: {title}, Abstract: {text}}}.")
}

/// Assembles the pairwise same-category question for nodes `u` and `v`.
pub fn build_prompt(
    u: (usize, &NodeText),
    v: (usize, &NodeText),
    categories: &[String],
    strategy: &PromptStrategy,
    opts: &PromptOptions,
) -> Result<ChatRequest, HomophilyError> {
    if categories.is_empty() {
        return Err(HomophilyError::Prompt("category list is empty".into()));
    }
    for (id, t) in [u, v] {
        if t.title.trim().is_empty() && t.text.trim().is_empty() {
            return Err(HomophilyError::Prompt(format!("node {id} has no text")));
        }
    }
    let question = if strategy.variant.reasoning() {
        REASONING_QUESTION
    } else {
        DIRECT_QUESTION
    };
    let user = format!(
        "We have two node texts from the following categories: [{}]. The texts are as follows:\n{} {}\n{}",
        categories.join(", "),
        render_node(u.0, u.1, opts.char_budget),
        render_node(v.0, v.1, opts.char_budget),
        question
    );
    Ok(ChatRequest {
        system: SYSTEM_PROMPT.to_string(),
        user,
        model: opts.model.clone(),
        temperature: strategy.temperature(),
    })
}
