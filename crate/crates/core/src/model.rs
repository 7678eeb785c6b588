//! Domain types shared by the simulator, the harness and the estimation code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicySpec;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(
    /// Agent identifier, stable across all cells of an experiment.
    AgentId
);
id_newtype!(
    /// Post identifier. Allocated in strictly increasing order within a run.
    PostId
);
id_newtype!(RunId);

/// What an agent did with one post it was shown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Read,
    Like,
    Repost,
    Quote,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Read,
        ActionKind::Like,
        ActionKind::Repost,
        ActionKind::Quote,
    ];

    pub fn is_engagement(self) -> bool {
        self != ActionKind::Read
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Read => "read",
            ActionKind::Like => "like",
            ActionKind::Repost => "repost",
            ActionKind::Quote => "quote",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Information-load level: a fixed block of followed-account posts plus a
/// level-dependent number of algorithmically recommended posts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadCondition {
    Lowest,
    Low,
    Medium,
    High,
}

impl LoadCondition {
    pub const ALL: [LoadCondition; 4] = [
        LoadCondition::Lowest,
        LoadCondition::Low,
        LoadCondition::Medium,
        LoadCondition::High,
    ];

    pub const FOLLOWED_COUNT: usize = 3;

    pub fn algorithmic_count(self) -> usize {
        match self {
            LoadCondition::Lowest => 4,
            LoadCondition::Low => 7,
            LoadCondition::Medium => 15,
            LoadCondition::High => 30,
        }
    }

    pub fn followed_count(self) -> usize {
        Self::FOLLOWED_COUNT
    }

    pub fn total(self) -> usize {
        self.followed_count() + self.algorithmic_count()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LoadCondition::Lowest => "lowest",
            LoadCondition::Low => "low",
            LoadCondition::Medium => "medium",
            LoadCondition::High => "high",
        }
    }
}

impl fmt::Display for LoadCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LoadCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lowest" => Ok(LoadCondition::Lowest),
            "low" => Ok(LoadCondition::Low),
            "medium" => Ok(LoadCondition::Medium),
            "high" => Ok(LoadCondition::High),
            other => Err(Error::Config(format!("unknown load level `{other}`"))),
        }
    }
}

/// Descriptive-norm regime delivered through the system prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NormRegime {
    #[serde(rename = "none")]
    NoNorm,
    #[serde(rename = "like")]
    LikeDominant,
    #[serde(rename = "repost")]
    RepostDominant,
}

impl NormRegime {
    pub const ALL: [NormRegime; 3] = [
        NormRegime::NoNorm,
        NormRegime::LikeDominant,
        NormRegime::RepostDominant,
    ];

    /// Canonical prevalence wording injected into the system prompt.
    pub fn prompt_fragment(self) -> &'static str {
        match self {
            NormRegime::NoNorm => "",
            NormRegime::LikeDominant => {
                "When users here engage with posts, they typically like (about 80%), \
                 repost (about 15%), or quote (about 5%)."
            }
            NormRegime::RepostDominant => {
                "When users here redistribute posts, they typically repost (about 90%) \
                 rather than quote (about 10%)."
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormRegime::NoNorm => "none",
            NormRegime::LikeDominant => "like",
            NormRegime::RepostDominant => "repost",
        }
    }
}

impl fmt::Display for NormRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "no" | "nonorm" | "no-norm" => Ok(NormRegime::NoNorm),
            "like" | "like-dominant" => Ok(NormRegime::LikeDominant),
            "repost" | "repost-dominant" => Ok(NormRegime::RepostDominant),
            other => Err(Error::Config(format!("unknown norm regime `{other}`"))),
        }
    }
}

/// One cell of the 4x3 factorial design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub load: LoadCondition,
    pub norm: NormRegime,
}

impl Condition {
    pub fn new(load: LoadCondition, norm: NormRegime) -> Self {
        Condition { load, norm }
    }

    /// All twelve cells, load-major.
    pub fn all() -> impl Iterator<Item = Condition> {
        LoadCondition::ALL
            .into_iter()
            .flat_map(|load| NormRegime::ALL.into_iter().map(move |norm| Condition { load, norm }))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "load={},norm={}", self.load, self.norm)
    }
}

/// Parses `load=<level>,norm=<regime>` (keys in either order).
impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut load, mut norm) = (None, None);
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in `{s}`")))?;
            match key.trim() {
                "load" => load = Some(value.parse()?),
                "norm" => norm = Some(value.parse()?),
                other => return Err(Error::Config(format!("unknown cell key `{other}`"))),
            }
        }
        match (load, norm) {
            (Some(load), Some(norm)) => Ok(Condition { load, norm }),
            _ => Err(Error::Config(format!("cell `{s}` needs both load= and norm="))),
        }
    }
}

/// Cumulative engagement on a post. Never decremented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PopularityCounters {
    pub likes: u64,
    pub reposts: u64,
    pub quotes: u64,
}

impl PopularityCounters {
    /// Weibo-style combined redistribution count.
    pub fn reshares(&self) -> u64 {
        self.reposts + self.quotes
    }

    pub fn composite(&self) -> f64 {
        popularity_composite(self.likes, self.reshares())
    }
}

/// Log-composite popularity cue, `ln(1 + likes + reshares)`.
pub fn popularity_composite(likes: u64, reshares: u64) -> f64 {
    ((likes + reshares) as f64).ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Seed,
    Repost,
    Quote,
}

impl PostKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PostKind::Seed => "seed",
            PostKind::Repost => "repost",
            PostKind::Quote => "quote",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub author: AgentId,
    pub content: String,
    pub kind: PostKind,
    pub source_link: Option<PostId>,
    pub created_at: u32,
    pub counters: PopularityCounters,
}

/// One agent x post x activation observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureRecord {
    pub run: RunId,
    pub condition: Condition,
    pub timestep: u32,
    pub agent: AgentId,
    pub post: PostId,
    pub likes_at_exposure: u64,
    pub reshares_at_exposure: u64,
    pub action: ActionKind,
    pub slot: FeedSlot,
}

impl ExposureRecord {
    pub fn composite(&self) -> f64 {
        popularity_composite(self.likes_at_exposure, self.reshares_at_exposure)
    }
}

/// Which part of the feed an entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedSlot {
    Followed,
    Algorithmic,
}

/// Feed-ranking parameters: `score = recency * exp(-decay * age) + relevance * jaccard`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingParams {
    pub recency_weight: f64,
    pub relevance_weight: f64,
    pub decay: f64,
}

impl Default for RankingParams {
    fn default() -> Self {
        RankingParams {
            recency_weight: 0.7,
            relevance_weight: 0.3,
            decay: 0.01,
        }
    }
}

/// Parameters of a single simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_agents: usize,
    pub timesteps: u32,
    pub activation_p: f64,
    pub seed: u64,
    pub run: RunId,
    pub condition: Condition,
    pub ranking: RankingParams,
    pub history_window: usize,
    /// Number of agents flagged as influencers; they author the seed posts.
    pub influencers: usize,
    pub policy: PolicySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_agents: 558,
            timesteps: 480,
            activation_p: 0.01,
            seed: 1,
            run: RunId(0),
            condition: Condition::new(LoadCondition::Lowest, NormRegime::NoNorm),
            ranking: RankingParams::default(),
            history_window: 8,
            influencers: 8,
            policy: PolicySpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.activation_p > 0.0 && self.activation_p < 1.0) {
            return Err(Error::Config(format!(
                "activation_p must lie in (0, 1), got {}",
                self.activation_p
            )));
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be positive".into()));
        }
        let r = &self.ranking;
        if r.recency_weight < 0.0 || r.relevance_weight < 0.0 {
            return Err(Error::Config("ranking weights must be non-negative".into()));
        }
        if ((r.recency_weight + r.relevance_weight) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "ranking weights must sum to 1, got {} + {}",
                r.recency_weight, r.relevance_weight
            )));
        }
        if !(r.decay >= 0.0 && r.decay.is_finite()) {
            return Err(Error::Config("recency decay must be a finite non-negative rate".into()));
        }
        if self.influencers == 0 {
            return Err(Error::Config("at least one influencer is required".into()));
        }
        self.policy.validate()
    }
}
