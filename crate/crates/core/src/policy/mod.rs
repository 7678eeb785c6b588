//! Agent decision making. A policy sees the feed, the agent's profile, its
//! recent interactions and the norm regime, and returns at most one
//! engagement per activation.

mod logit;
mod parse;
mod prompt;
mod transport;

use std::collections::VecDeque;

use log::warn;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use logit::ParametricLogit;
pub use parse::{parse_response, ParseOutcome};
pub use prompt::{build_prompt, Prompt};
pub use transport::{
    request_hash, ChatRequest, ChatTransport, FixtureRecord, FixtureTransport, HttpTransport, MockTransport,
    RecordingTransport, TransportError, API_KEY_ENV,
};

use crate::error::{Error, Result};
use crate::model::{ActionKind, Condition, NormRegime, PostId};
use crate::population::AgentProfile;
use crate::recommender::Feed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engagement {
    Like,
    Repost,
    Quote,
}

impl Engagement {
    pub fn action(self) -> ActionKind {
        match self {
            Engagement::Like => ActionKind::Like,
            Engagement::Repost => ActionKind::Repost,
            Engagement::Quote => ActionKind::Quote,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    ReadAll,
    Engage {
        target: PostId,
        action: Engagement,
        commentary: Option<String>,
    },
}

impl Decision {
    /// Target in the feed, and commentary present exactly for non-empty quotes.
    pub fn is_valid_for(&self, feed: &Feed) -> bool {
        match self {
            Decision::ReadAll => true,
            Decision::Engage { target, action, commentary } => {
                let has_comment = commentary.as_deref().is_some_and(|c| !c.trim().is_empty());
                feed.contains(*target) && (has_comment == (*action == Engagement::Quote))
                    && (commentary.is_none() || *action == Engagement::Quote)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub action: ActionKind,
    pub post: PostId,
    pub timestep: u32,
}

/// Bounded record of an agent's most recent engagements, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    window: usize,
    items: VecDeque<HistoryItem>,
}

impl History {
    pub fn new(window: usize) -> Self {
        History { window, items: VecDeque::with_capacity(window) }
    }

    pub fn push(&mut self, item: HistoryItem) {
        if self.window == 0 {
            return;
        }
        if self.items.len() == self.window {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn items(&self) -> Vec<HistoryItem> {
        self.items.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// What the policy is shown at one activation. The load condition is
/// deliberately absent; it only shows up as feed length.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext<'a> {
    pub feed: &'a Feed,
    /// Content of each feed entry, parallel to `feed.entries`.
    pub contents: &'a [&'a str],
    pub profile: &'a AgentProfile,
    pub history: &'a [HistoryItem],
    pub regime: NormRegime,
}

/// One step of a replayed script. Positions index into the feed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum ScriptStep {
    Read,
    Like { position: usize },
    Repost { position: usize },
    Quote { position: usize, comment: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSpec {
    /// Base URL of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_temperature() -> f64 {
    0.6
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    3
}

impl LlmSpec {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        LlmSpec {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: default_temperature(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Scripted {
        script: Vec<ScriptStep>,
    },
    /// Ground-truth generating process laid out like the stats design
    /// matrix: 24 threshold coefficients and 24 per allocation equation.
    ParametricLogit {
        threshold: Vec<f64>,
        repost: Vec<f64>,
        quote: Vec<f64>,
    },
    Llm(LlmSpec),
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::mock()
    }
}

impl PolicySpec {
    /// Parametric policy driven by the published coefficient tables.
    pub fn mock() -> Self {
        let (threshold, repost, quote) = crate::stats::published_coefficients();
        PolicySpec::ParametricLogit { threshold, repost, quote }
    }

    pub fn read_only() -> Self {
        PolicySpec::Scripted { script: vec![ScriptStep::Read] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::Scripted { script } if script.is_empty() => {
                Err(Error::Config("scripted policy needs at least one step".into()))
            }
            PolicySpec::Scripted { .. } => Ok(()),
            PolicySpec::ParametricLogit { threshold, repost, quote } => {
                let n = crate::stats::FULL_COLUMNS;
                if threshold.len() != n || repost.len() != n || quote.len() != n {
                    return Err(Error::Config(format!(
                        "parametric policy needs {n} coefficients per equation"
                    )));
                }
                Ok(())
            }
            PolicySpec::Llm(spec) => {
                if spec.endpoint.trim().is_empty() || spec.model.trim().is_empty() {
                    return Err(Error::Config("llm policy needs an endpoint and a model name".into()));
                }
                if !(0.0..=2.0).contains(&spec.temperature) {
                    return Err(Error::Config("temperature must lie in [0, 2]".into()));
                }
                Ok(())
            }
        }
    }
}

pub trait DecisionPolicy: Send {
    fn decide(&mut self, ctx: &DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Decision;
}

/// Runs `policy` and enforces the decision invariants: an empty feed always
/// reads, and anything invalid degrades to `ReadAll`.
pub fn decide(policy: &mut dyn DecisionPolicy, ctx: &DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Decision {
    if ctx.feed.is_empty() {
        return Decision::ReadAll;
    }
    let d = policy.decide(ctx, rng);
    if d.is_valid_for(ctx.feed) {
        d
    } else {
        warn!("agent {}: policy returned invalid decision {d:?}; reading instead", ctx.profile.id);
        Decision::ReadAll
    }
}

/// Replays a fixed script, cycling when it runs out.
pub struct ScriptedPolicy {
    script: Vec<ScriptStep>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(script: Vec<ScriptStep>) -> Self {
        ScriptedPolicy { script, cursor: 0 }
    }
}

impl DecisionPolicy for ScriptedPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut ChaCha8Rng) -> Decision {
        if self.script.is_empty() {
            return Decision::ReadAll;
        }
        let step = &self.script[self.cursor % self.script.len()];
        self.cursor += 1;
        let (position, action, commentary) = match step {
            ScriptStep::Read => return Decision::ReadAll,
            ScriptStep::Like { position } => (*position, Engagement::Like, None),
            ScriptStep::Repost { position } => (*position, Engagement::Repost, None),
            ScriptStep::Quote { position, comment } => (*position, Engagement::Quote, Some(comment.clone())),
        };
        match ctx.feed.entries.get(position) {
            Some(e) => Decision::Engage { target: e.post, action, commentary },
            None => Decision::ReadAll,
        }
    }
}

/// Prompts a chat model and parses its reply.
pub struct LlmPolicy {
    spec: LlmSpec,
    transport: Box<dyn ChatTransport>,
}

impl LlmPolicy {
    pub fn new(spec: LlmSpec, transport: Box<dyn ChatTransport>) -> Self {
        LlmPolicy { spec, transport }
    }

    fn call(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let mut last = None;
        for attempt in 0..=self.spec.max_retries {
            match self.transport.complete(request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() => {
                    warn!("llm request attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(TransportError::Http("no attempts made".into())))
    }
}

impl DecisionPolicy for LlmPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut ChaCha8Rng) -> Decision {
        let prompt = build_prompt(ctx);
        let request = ChatRequest {
            model: self.spec.model.clone(),
            temperature: self.spec.temperature,
            system: prompt.system,
            user: prompt.user,
        };
        match self.call(&request) {
            Ok(raw) => {
                let parsed = parse_response(&raw, ctx.feed);
                if let Some(w) = &parsed.warning {
                    warn!("agent {}: {w}", ctx.profile.id);
                }
                parsed.decision
            }
            Err(e) => {
                warn!("agent {}: llm transport failed ({e}); reading instead", ctx.profile.id);
                Decision::ReadAll
            }
        }
    }
}

/// Instantiates a policy for one run. Llm specs need a transport; pass
/// `None` to get an error instead of silently falling back.
pub fn build_policy(
    spec: &PolicySpec,
    condition: Condition,
    transport: Option<Box<dyn ChatTransport>>,
) -> Result<Box<dyn DecisionPolicy>> {
    spec.validate()?;
    Ok(match spec {
        PolicySpec::Scripted { script } => Box::new(ScriptedPolicy::new(script.clone())),
        PolicySpec::ParametricLogit { threshold, repost, quote } => {
            Box::new(ParametricLogit::new(threshold.clone(), repost.clone(), quote.clone(), condition)?)
        }
        PolicySpec::Llm(llm) => {
            let transport =
                transport.ok_or_else(|| Error::Config("llm policy requires a transport".into()))?;
            Box::new(LlmPolicy::new(llm.clone(), transport))
        }
    })
}
