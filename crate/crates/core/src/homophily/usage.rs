use serde::{Deserialize, Serialize};

use super::ChatResponse;

/// Dollar prices per million tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostRates {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl CostRates {
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        prompt_tokens as f64 * self.input_per_million / 1e6
            + completion_tokens as f64 * self.output_per_million / 1e6
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_usd: f64,
    /// Responses that did not report token counts (counted as zero).
    #[serde(skip)]
    pub missing: usize,
}

impl Usage {
    pub fn has_missing(&self) -> bool {
        self.missing > 0
    }
}

pub fn accumulate_usage<'a>(responses: impl IntoIterator<Item = &'a ChatResponse>, rates: &CostRates) -> Usage {
    let mut u = Usage::default();
    for r in responses {
        if r.prompt_tokens.is_none() || r.completion_tokens.is_none() {
            u.missing += 1;
        }
        u.prompt_tokens += r.prompt_tokens.unwrap_or(0);
        u.completion_tokens += r.completion_tokens.unwrap_or(0);
    }
    u.cost_usd = rates.cost(u.prompt_tokens, u.completion_tokens);
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(p: Option<u64>, c: Option<u64>) -> ChatResponse {
        ChatResponse {
            text: String::new(),
            prompt_tokens: p,
            completion_tokens: c,
        }
    }

    #[test]
    fn sums_token_counts() {
        let rs = [resp(Some(10), Some(20)), resp(Some(5), Some(5))];
        let u = accumulate_usage(&rs, &CostRates::default());
        assert_eq!((u.prompt_tokens, u.completion_tokens), (15, 25));
        assert_eq!(u.cost_usd, 0.0);
        assert!(!u.has_missing());
    }

    #[test]
    fn no_responses_give_zero_usage() {
        assert_eq!(accumulate_usage(&[], &CostRates::default()), Usage::default());
    }

    #[test]
    fn input_price_example() {
        let rates = CostRates {
            input_per_million: 0.15,
            output_per_million: 0.6,
        };
        let u = accumulate_usage(&[resp(Some(220_000), Some(0))], &rates);
        assert!((u.cost_usd - 0.033).abs() < 1e-12);
    }

    #[test]
    fn missing_counts_are_flagged() {
        let u = accumulate_usage(&[resp(None, Some(3)), resp(Some(2), Some(1))], &CostRates::default());
        assert_eq!((u.prompt_tokens, u.completion_tokens), (2, 4));
        assert_eq!(u.missing, 1);
    }
}
