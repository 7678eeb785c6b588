//! Discrete-time scheduler. One run mutates its world on a single thread;
//! activated agents act one after another in ascending id order and each
//! sees every update made before it.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::model::{
    ActionKind, AgentId, Condition, ExposureRecord, FeedSlot, LoadCondition, NormRegime, Post, PostId,
    PostKind, PopularityCounters, RunConfig, RunId,
};
use crate::policy::{decide, Decision, DecisionContext, DecisionPolicy, Engagement, History, HistoryItem};
use crate::population::{Population, SeedCorpus};
use crate::recommender::{select_feed, IndexedPost, Viewer};

/// A post entering the world: seeds at t = 0, later reposts and quotes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostCreated {
    pub run: RunId,
    pub condition: Condition,
    pub timestep: u32,
    pub post: PostId,
    pub kind: PostKind,
    pub author: AgentId,
    pub source_link: Option<PostId>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LogEntry {
    Exposure(ExposureRecord),
    PostCreated(PostCreated),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExposureLine {
    run: RunId,
    load: LoadCondition,
    norm: NormRegime,
    t: u32,
    agent: AgentId,
    post: PostId,
    likes: u64,
    reshares: u64,
    action: ActionKind,
    slot: FeedSlot,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreationLine {
    run: RunId,
    load: LoadCondition,
    norm: NormRegime,
    t: u32,
    kind: PostKind,
    post: PostId,
    author: AgentId,
    source_link: Option<PostId>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Creation(CreationLine),
    Exposure(ExposureLine),
}

impl LogEntry {
    pub fn to_json_line(&self) -> String {
        let s = match self {
            LogEntry::Exposure(r) => serde_json::to_string(&ExposureLine {
                run: r.run,
                load: r.condition.load,
                norm: r.condition.norm,
                t: r.timestep,
                agent: r.agent,
                post: r.post,
                likes: r.likes_at_exposure,
                reshares: r.reshares_at_exposure,
                action: r.action,
                slot: r.slot,
            }),
            LogEntry::PostCreated(c) => serde_json::to_string(&CreationLine {
                run: c.run,
                load: c.condition.load,
                norm: c.condition.norm,
                t: c.timestep,
                kind: c.kind,
                post: c.post,
                author: c.author,
                source_link: c.source_link,
            }),
        };
        s.expect("log lines serialize")
    }

    pub fn from_json_line(line: &str) -> std::result::Result<Self, serde_json::Error> {
        Ok(match serde_json::from_str::<Line>(line)? {
            Line::Exposure(e) => LogEntry::Exposure(ExposureRecord {
                run: e.run,
                condition: Condition::new(e.load, e.norm),
                timestep: e.t,
                agent: e.agent,
                post: e.post,
                likes_at_exposure: e.likes,
                reshares_at_exposure: e.reshares,
                action: e.action,
                slot: e.slot,
            }),
            Line::Creation(c) => LogEntry::PostCreated(PostCreated {
                run: c.run,
                condition: Condition::new(c.load, c.norm),
                timestep: c.t,
                post: c.post,
                kind: c.kind,
                author: c.author,
                source_link: c.source_link,
            }),
        })
    }
}

/// Append-only record of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub entries: Vec<LogEntry>,
    /// Activations, including those whose feed came up empty and therefore
    /// left no lines. Not persisted.
    pub activations: u64,
}

impl EventLog {
    pub fn exposures(&self) -> impl Iterator<Item = &ExposureRecord> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Exposure(r) => Some(r),
            _ => None,
        })
    }

    pub fn creations(&self) -> impl Iterator<Item = &PostCreated> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::PostCreated(c) => Some(c),
            _ => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            w.write_all(e.to_json_line().as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_jsonl())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
        self.write_jsonl(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(format!("write {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("read {}", path.display()), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = LogEntry::from_json_line(&line)
                .map_err(|e| Error::parse(path, i + 1, format!("malformed log line: {e}")))?;
            entries.push(entry);
        }
        Ok(EventLog { entries, activations: 0 })
    }
}

struct AgentState {
    engaged: HashSet<PostId>,
    history: History,
}

/// Mutable world of one run.
pub struct WorldState {
    /// Indexed by `PostId.0`; ids are dense and allocated in order.
    posts: Vec<IndexedPost>,
    agents: BTreeMap<AgentId, AgentState>,
}

impl WorldState {
    pub fn posts(&self) -> impl Iterator<Item = &Post> {
        self.posts.iter().map(|p| &p.post)
    }

    pub fn post(&self, id: PostId) -> Option<&Post> {
        self.posts.get(id.0 as usize).map(|p| &p.post)
    }

    pub fn post_count(&self) -> usize {
        self.posts.len()
    }

    pub fn history(&self, agent: AgentId) -> Vec<HistoryItem> {
        self.agents.get(&agent).map(|a| a.history.items()).unwrap_or_default()
    }

    pub fn engaged(&self, agent: AgentId) -> Option<&HashSet<PostId>> {
        self.agents.get(&agent).map(|a| &a.engaged)
    }

    /// Hash over every post and counter.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        for p in self.posts() {
            serde_json::to_writer(&mut buf, p).expect("post serializes");
            buf.push(b'\n');
        }
        sha256_hex(buf)
    }

    fn next_id(&self) -> PostId {
        PostId(u32::try_from(self.posts.len()).expect("post id space exhausted"))
    }

    fn add_post(&mut self, author: AgentId, content: String, kind: PostKind, source: Option<PostId>, t: u32) -> PostId {
        let id = self.next_id();
        self.posts.push(IndexedPost::new(Post {
            id,
            author,
            content,
            kind,
            source_link: source,
            created_at: t,
            counters: PopularityCounters::default(),
        }));
        id
    }
}

/// Activation stream for timestep `t`, decision stream for `(t, agent)`.
fn stream_rng(seed: u64, t: u32, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 32) | slot);
    rng
}

fn activation_rng(seed: u64, t: u32) -> ChaCha8Rng {
    stream_rng(seed, t, 0)
}

fn decision_rng(seed: u64, t: u32, agent: AgentId) -> ChaCha8Rng {
    stream_rng(seed, t, agent.0 as u64 + 1)
}

/// A run in progress.
pub struct Simulation<'a> {
    config: RunConfig,
    population: &'a Population,
    world: WorldState,
    log: EventLog,
}

impl<'a> Simulation<'a> {
    /// Validates inputs and injects the seed posts, authored round-robin by
    /// the influencers in ascending id order.
    pub fn initialize(config: &RunConfig, population: &'a Population, corpus: &SeedCorpus) -> Result<Self> {
        config.validate()?;
        if population.len() != config.n_agents {
            return Err(Error::Config(format!(
                "config expects {} agents but the population has {}",
                config.n_agents,
                population.len()
            )));
        }
        let influencers = population.influencers();
        if influencers.len() != config.influencers {
            return Err(Error::Config(format!(
                "expected {} influencers, population flags {}",
                config.influencers,
                influencers.len()
            )));
        }
        if corpus.is_empty() {
            return Err(Error::Config("seed corpus is empty".into()));
        }
        let agents = population
            .profiles
            .iter()
            .map(|p| (p.id, AgentState { engaged: HashSet::new(), history: History::new(config.history_window) }))
            .collect();
        let mut world = WorldState { posts: Vec::with_capacity(corpus.len() * 4), agents };
        let mut log = EventLog::default();
        for (i, content) in corpus.posts.iter().enumerate() {
            let author = influencers[i % influencers.len()];
            let id = world.add_post(author, content.clone(), PostKind::Seed, None, 0);
            log.entries.push(LogEntry::PostCreated(PostCreated {
                run: config.run,
                condition: config.condition,
                timestep: 0,
                post: id,
                kind: PostKind::Seed,
                author,
                source_link: None,
            }));
        }
        Ok(Simulation { config: config.clone(), population, world, log })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_parts(self) -> (WorldState, EventLog) {
        (self.world, self.log)
    }

    /// Agents activated at `t`, ascending.
    pub fn activations(&self, t: u32) -> Vec<AgentId> {
        let mut rng = activation_rng(self.config.seed, t);
        self.population
            .profiles
            .iter()
            .filter(|_| rng.random_bool(self.config.activation_p))
            .map(|p| p.id)
            .collect()
    }

    pub fn step(&mut self, t: u32, policy: &mut dyn DecisionPolicy) {
        for agent in self.activations(t) {
            self.log.activations += 1;
            self.act(t, agent, policy);
        }
    }

    fn act(&mut self, t: u32, agent: AgentId, policy: &mut dyn DecisionPolicy) {
        let cfg = &self.config;
        let profile = self.population.profile(agent).expect("activated agent exists");
        let state = &self.world.agents[&agent];
        let viewer = Viewer {
            profile,
            followees: self.population.graph.followees(agent),
            engaged: &state.engaged,
        };
        let feed = select_feed(&viewer, &self.world.posts, t, cfg.condition.load, &cfg.ranking);
        if feed.is_empty() {
            return;
        }
        let decision = {
            let contents: Vec<&str> =
                feed.entries.iter().map(|e| self.world.posts[e.post.0 as usize].post.content.as_str()).collect();
            let history = state.history.items();
            let ctx = DecisionContext { feed: &feed, contents: &contents, profile, history: &history, regime: cfg.condition.norm };
            let mut rng = decision_rng(cfg.seed, t, agent);
            decide(policy, &ctx, &mut rng)
        };

        let engaged = match &decision {
            Decision::ReadAll => None,
            Decision::Engage { target, action, .. } => Some((*target, action.action())),
        };
        for e in &feed.entries {
            let action = match engaged {
                Some((target, kind)) if target == e.post => kind,
                _ => ActionKind::Read,
            };
            self.log.entries.push(LogEntry::Exposure(ExposureRecord {
                run: cfg.run,
                condition: cfg.condition,
                timestep: t,
                agent,
                post: e.post,
                likes_at_exposure: e.likes,
                reshares_at_exposure: e.reshares,
                action,
                slot: e.slot,
            }));
        }

        let Decision::Engage { target, action, commentary } = decision else {
            return;
        };
        let (run, condition) = (cfg.run, cfg.condition);
        let state = self.world.agents.get_mut(&agent).expect("agent state");
        state.engaged.insert(target);
        state.history.push(HistoryItem { action: action.action(), post: target, timestep: t });

        let source = &mut self.world.posts[target.0 as usize].post;
        let new_post = match action {
            Engagement::Like => {
                source.counters.likes += 1;
                None
            }
            Engagement::Repost => {
                source.counters.reposts += 1;
                Some((PostKind::Repost, source.content.clone()))
            }
            Engagement::Quote => {
                source.counters.quotes += 1;
                let comment = commentary.unwrap_or_default();
                Some((PostKind::Quote, format!("{comment} // {}", source.content)))
            }
        };
        if let Some((kind, content)) = new_post {
            let id = self.world.add_post(agent, content, kind, Some(target), t);
            self.log.entries.push(LogEntry::PostCreated(PostCreated {
                run,
                condition,
                timestep: t,
                post: id,
                kind,
                author: agent,
                source_link: Some(target),
            }));
        }
    }

    pub fn run_to_end(mut self, policy: &mut dyn DecisionPolicy) -> (WorldState, EventLog) {
        for t in 0..self.config.timesteps {
            self.step(t, policy);
        }
        self.into_parts()
    }
}

/// Initializes and runs every timestep.
pub fn run(
    config: &RunConfig,
    policy: &mut dyn DecisionPolicy,
    population: &Population,
    corpus: &SeedCorpus,
) -> Result<EventLog> {
    let sim = Simulation::initialize(config, population, corpus)?;
    Ok(sim.run_to_end(policy).1)
}

/// Recounts likes, reposts and quotes per post from the log alone.
pub fn recount(log: &EventLog) -> BTreeMap<PostId, PopularityCounters> {
    let mut counts: BTreeMap<PostId, PopularityCounters> = BTreeMap::new();
    for c in log.creations() {
        counts.entry(c.post).or_default();
    }
    for r in log.exposures() {
        let c = counts.entry(r.post).or_default();
        match r.action {
            ActionKind::Read => {}
            ActionKind::Like => c.likes += 1,
            ActionKind::Repost => c.reposts += 1,
            ActionKind::Quote => c.quotes += 1,
        }
    }
    counts
}
