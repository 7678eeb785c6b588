use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Decision, DecisionContext, DecisionPolicy, Engagement};
use crate::error::{Error, Result};
use crate::model::{popularity_composite, Condition};
use crate::stats::{design_row, FULL_COLUMNS};

/// Known-coefficient generating process.
///
/// Each feed post independently passes the engagement threshold with
/// probability `logistic(x . threshold)`. If several pass, one of them is
/// chosen uniformly. The engagement form is then drawn from the softmax over
/// (like = 0, `x . repost`, `x . quote`) evaluated at the chosen post.
#[derive(Clone, Debug)]
pub struct ParametricLogit {
    threshold: Vec<f64>,
    repost: Vec<f64>,
    quote: Vec<f64>,
    condition: Condition,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ParametricLogit {
    pub fn new(threshold: Vec<f64>, repost: Vec<f64>, quote: Vec<f64>, condition: Condition) -> Result<Self> {
        if [&threshold, &repost, &quote].iter().any(|v| v.len() != FULL_COLUMNS) {
            return Err(Error::Config(format!("parametric policy needs {FULL_COLUMNS} coefficients per equation")));
        }
        Ok(ParametricLogit { threshold, repost, quote, condition })
    }

    /// Probability that a post with this composite passes the threshold.
    pub fn engage_probability(&self, composite: f64) -> f64 {
        let x = design_row(composite, self.condition, true);
        let eta = dot(&x, &self.threshold);
        if eta == f64::NEG_INFINITY {
            return 0.0;
        }
        1.0 / (1.0 + (-eta).exp())
    }

    /// (like, repost, quote) probabilities given engagement.
    pub fn allocation_probabilities(&self, composite: f64) -> [f64; 3] {
        let x = design_row(composite, self.condition, true);
        let etas = [0.0, dot(&x, &self.repost), dot(&x, &self.quote)];
        let max = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = etas.map(|e| (e - max).exp());
        let total: f64 = w.iter().sum();
        w.map(|v| v / total)
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }
}

impl DecisionPolicy for ParametricLogit {
    fn decide(&mut self, ctx: &DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Decision {
        let passing: Vec<usize> = ctx
            .feed
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let p = self.engage_probability(popularity_composite(e.likes, e.reshares));
                rng.random::<f64>() < p
            })
            .map(|(i, _)| i)
            .collect();
        if passing.is_empty() {
            return Decision::ReadAll;
        }
        let chosen = &ctx.feed.entries[passing[rng.random_range(0..passing.len())]];
        let probs = self.allocation_probabilities(popularity_composite(chosen.likes, chosen.reshares));
        let u: f64 = rng.random();
        let action = if u < probs[0] {
            Engagement::Like
        } else if u < probs[0] + probs[1] {
            Engagement::Repost
        } else {
            Engagement::Quote
        };
        let commentary = (action == Engagement::Quote).then(|| "Adding my two cents on this.".to_string());
        Decision::Engage { target: chosen.post, action, commentary }
    }
}
