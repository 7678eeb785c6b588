//! Agent population, follow graph and seed corpus: synthetic generators and
//! JSON Lines loaders.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::model::AgentId;

pub const DEFAULT_INFLUENCERS: usize = 8;
pub const SEED_CORPUS_SIZE: usize = 50;
pub const MIN_SEED_TOKENS: usize = 150;
pub const MAX_SEED_TOKENS: usize = 300;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: AgentId,
    pub name: String,
    pub interest_keywords: BTreeSet<String>,
    pub verified: bool,
    pub influencer: bool,
}

/// Directed follow edges, follower -> followee. Every agent has an entry,
/// possibly empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowGraph {
    follows: BTreeMap<AgentId, BTreeSet<AgentId>>,
}

impl FollowGraph {
    pub fn with_agents(agents: impl IntoIterator<Item = AgentId>) -> Self {
        FollowGraph {
            follows: agents.into_iter().map(|a| (a, BTreeSet::new())).collect(),
        }
    }

    pub fn add_edge(&mut self, follower: AgentId, followee: AgentId) -> Result<()> {
        if follower == followee {
            return Err(Error::Validation(format!("agent {follower} cannot follow itself")));
        }
        if !self.follows.contains_key(&followee) {
            return Err(Error::Validation(format!("unknown followee {followee}")));
        }
        self.follows
            .get_mut(&follower)
            .ok_or_else(|| Error::Validation(format!("unknown follower {follower}")))?
            .insert(followee);
        Ok(())
    }

    pub fn followees(&self, agent: AgentId) -> &BTreeSet<AgentId> {
        static EMPTY: BTreeSet<AgentId> = BTreeSet::new();
        self.follows.get(&agent).unwrap_or(&EMPTY)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.follows.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.follows
            .iter()
            .flat_map(|(&from, to)| to.iter().map(move |&t| (from, t)))
    }

    pub fn edge_count(&self) -> usize {
        self.follows.values().map(BTreeSet::len).sum()
    }

    pub fn in_degrees(&self) -> BTreeMap<AgentId, usize> {
        let mut deg: BTreeMap<AgentId, usize> = self.follows.keys().map(|&a| (a, 0)).collect();
        for (_, to) in self.edges() {
            *deg.entry(to).or_default() += 1;
        }
        deg
    }

    /// Hash of the canonical (sorted) edge list.
    pub fn digest(&self) -> String {
        let mut buf = String::new();
        for (a, to) in &self.follows {
            buf.push_str(&a.to_string());
            buf.push(':');
            let list: Vec<String> = to.iter().map(|t| t.to_string()).collect();
            buf.push_str(&list.join(","));
            buf.push('\n');
        }
        sha256_hex(buf)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub profiles: Vec<AgentProfile>,
    pub graph: FollowGraph,
}

impl Population {
    /// Assembles a population and flags the `influencers` agents with the
    /// highest in-degree (ties to the smaller id).
    pub fn new(mut profiles: Vec<AgentProfile>, graph: FollowGraph, influencers: usize) -> Result<Self> {
        profiles.sort_by_key(|p| p.id);
        if profiles.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::Validation("duplicate agent id".into()));
        }
        if influencers > profiles.len() {
            return Err(Error::Config(format!(
                "cannot flag {influencers} influencers among {} agents",
                profiles.len()
            )));
        }
        let top: HashSet<AgentId> = rank_by_in_degree(&graph).into_iter().take(influencers).collect();
        for p in &mut profiles {
            p.influencer = top.contains(&p.id);
        }
        Ok(Population { profiles, graph })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profile(&self, id: AgentId) -> Option<&AgentProfile> {
        self.profiles
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.profiles[i])
    }

    /// Influencer ids in ascending order.
    pub fn influencers(&self) -> Vec<AgentId> {
        self.profiles.iter().filter(|p| p.influencer).map(|p| p.id).collect()
    }

    pub fn digest(&self) -> String {
        sha256_hex(population_jsonl(self))
    }
}

/// Agents ordered by descending in-degree, ascending id on ties.
fn rank_by_in_degree(graph: &FollowGraph) -> Vec<AgentId> {
    let mut ranked: Vec<(AgentId, usize)> = graph.in_degrees().into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(a, _)| a).collect()
}

/// Knobs for the synthetic network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Exponent of the discrete power law the in-degrees are drawn from.
    pub exponent: f64,
    pub min_in_degree: usize,
    pub influencers: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            exponent: 2.5,
            min_in_degree: 1,
            influencers: DEFAULT_INFLUENCERS,
        }
    }
}

pub fn generate_population(n: usize, seed: u64) -> Result<Population> {
    generate_population_with(n, seed, &NetworkParams::default())
}

/// Synthetic population with a heavy-tailed in-degree sequence. Each agent's
/// in-degree `k` is drawn with probability proportional to `k^-exponent`
/// (capped at `n - 1`) and that many distinct followers are sampled uniformly.
pub fn generate_population_with(n: usize, seed: u64, params: &NetworkParams) -> Result<Population> {
    if n < 10 {
        return Err(Error::Config(format!("population needs at least 10 agents, got {n}")));
    }
    if !(params.exponent > 1.0) {
        return Err(Error::Config("degree exponent must exceed 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<AgentId> = (0..n as u32).map(AgentId).collect();

    let k_min = params.min_in_degree.clamp(1, n - 1);
    let degrees: Vec<usize> = (k_min..n).collect();
    let weights = degrees.iter().map(|&k| (k as f64).powf(-params.exponent));
    let degree_dist = WeightedIndex::new(weights).expect("power-law weights are positive");

    let mut graph = FollowGraph::with_agents(ids.iter().copied());
    for &target in &ids {
        let k = degrees[degree_dist.sample(&mut rng)];
        let others: Vec<AgentId> = ids.iter().copied().filter(|&a| a != target).collect();
        for &follower in others.choose_multiple(&mut rng, k) {
            graph.add_edge(follower, target)?;
        }
    }

    let profiles = ids
        .iter()
        .map(|&id| AgentProfile {
            id,
            name: synthetic_name(id, &mut rng),
            interest_keywords: synthetic_keywords(&mut rng),
            verified: rng.random_bool(0.05),
            influencer: false,
        })
        .collect();
    let mut pop = Population::new(profiles, graph, params.influencers)?;
    for p in &mut pop.profiles {
        p.verified |= p.influencer;
    }
    Ok(pop)
}

/// Topic clusters shared by agent interests and synthetic post text, so that
/// keyword relevance is informative.
const TOPICS: &[&[&str]] = &[
    &["economy", "markets", "inflation", "jobs", "wages", "housing"],
    &["football", "league", "coach", "match", "stadium", "transfer"],
    &["climate", "flood", "drought", "emissions", "heatwave", "forest"],
    &["technology", "smartphone", "software", "startup", "chips", "robots"],
    &["health", "hospital", "vaccine", "doctors", "diet", "fitness"],
    &["education", "exam", "university", "teachers", "students", "campus"],
    &["film", "actor", "premiere", "drama", "festival", "director"],
    &["music", "concert", "album", "singer", "tour", "chart"],
    &["travel", "railway", "airport", "holiday", "tourists", "visa"],
    &["food", "restaurant", "recipe", "noodles", "tea", "street-food"],
    &["science", "space", "telescope", "research", "physics", "lab"],
    &["law", "court", "police", "ruling", "lawsuit", "judge"],
];

const FILLER: &[&str] = &[
    "the", "a", "and", "of", "to", "in", "is", "that", "it", "for", "on", "with", "as", "this",
    "was", "at", "by", "from", "they", "we", "people", "today", "new", "said", "after", "more",
    "about", "many", "city", "report", "week", "year", "local", "official", "public", "video",
    "photos", "update", "comments", "online", "users", "story", "plan", "change", "news",
    "according", "sources", "recently", "morning", "night", "families", "young", "older",
    "region", "country", "support", "concern", "discussion", "questions", "reaction", "first",
    "last", "still", "already", "again", "some", "other", "every", "while", "because", "before",
    "during", "around", "across", "between", "without", "under", "over", "also", "just", "only",
    "very", "really", "finally", "quickly", "big", "small", "important", "surprising", "latest",
];

const SYLLABLES: &[&str] = &[
    "an", "bo", "chen", "da", "fei", "gu", "hao", "jia", "kai", "lin", "mei", "ning", "qi", "rui",
    "shu", "tao", "wen", "xin", "yu", "zhi",
];

fn synthetic_name(id: AgentId, rng: &mut impl Rng) -> String {
    let a = SYLLABLES.choose(rng).unwrap();
    let b = SYLLABLES.choose(rng).unwrap();
    format!("{a}{b}_{:04}", id.0)
}

fn synthetic_keywords(rng: &mut impl Rng) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for topic in TOPICS.choose_multiple(rng, 2) {
        let take = rng.random_range(2..=3);
        out.extend(topic.choose_multiple(rng, take).map(|w| w.to_string()));
    }
    out
}

/// The posts injected at the start of every run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCorpus {
    pub posts: Vec<String>,
}

impl SeedCorpus {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn token_counts(&self) -> Vec<usize> {
        self.posts.iter().map(|p| token_count(p)).collect()
    }

    /// Indices of posts whose whitespace token count falls outside [150, 300].
    pub fn out_of_range(&self) -> Vec<usize> {
        self.token_counts()
            .into_iter()
            .enumerate()
            .filter(|(_, n)| !(MIN_SEED_TOKENS..=MAX_SEED_TOKENS).contains(n))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn digest(&self) -> String {
        sha256_hex(corpus_jsonl(self))
    }
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn generate_seed_corpus(seed: u64) -> SeedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let mut seen = HashSet::new();
    let mut posts = Vec::with_capacity(SEED_CORPUS_SIZE);
    while posts.len() < SEED_CORPUS_SIZE {
        let body = synthetic_body(&mut rng);
        if seen.insert(body.clone()) {
            posts.push(body);
        }
    }
    SeedCorpus { posts }
}

fn synthetic_body(rng: &mut impl Rng) -> String {
    let len = rng.random_range(MIN_SEED_TOKENS..=MAX_SEED_TOKENS);
    let topics: Vec<&[&str]> = TOPICS.choose_multiple(rng, 2).copied().collect();
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let w = if rng.random_bool(0.25) {
            topics.choose(rng).unwrap().choose(rng).unwrap()
        } else {
            FILLER.choose(rng).unwrap()
        };
        words.push(*w);
    }
    words.join(" ")
}

#[derive(Serialize, Deserialize)]
struct PopulationRow {
    id: u32,
    name: String,
    keywords: Vec<String>,
    verified: bool,
    follows: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRow {
    content: String,
}

fn population_jsonl(pop: &Population) -> String {
    let mut out = String::new();
    for p in &pop.profiles {
        let row = PopulationRow {
            id: p.id.0,
            name: p.name.clone(),
            keywords: p.interest_keywords.iter().cloned().collect(),
            verified: p.verified,
            follows: pop.graph.followees(p.id).iter().map(|a| a.0).collect(),
        };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn corpus_jsonl(corpus: &SeedCorpus) -> String {
    let mut out = String::new();
    for content in &corpus.posts {
        let row = CorpusRow { content: content.clone() };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(format!("write {}", path.display()), e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))
}

pub fn save_population(pop: &Population, path: &Path) -> Result<()> {
    write_text(path, &population_jsonl(pop))
}

pub fn save_corpus(corpus: &SeedCorpus, path: &Path) -> Result<()> {
    write_text(path, &corpus_jsonl(corpus))
}

pub fn load_population(path: &Path) -> Result<Population> {
    load_population_with(path, DEFAULT_INFLUENCERS)
}

/// Parses a population file. Errors carry the 1-based line number.
pub fn load_population_with(path: &Path, influencers: usize) -> Result<Population> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    let mut seen = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: PopulationRow = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed agent row: {e}")))?;
        if let Some(first) = seen.insert(row.id, lineno) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate agent id {} (first seen on line {first})", row.id),
            ));
        }
        if row.follows.contains(&row.id) {
            return Err(Error::parse(path, lineno, format!("agent {} follows itself", row.id)));
        }
        if row.keywords.iter().all(|k| k.trim().is_empty()) {
            return Err(Error::parse(path, lineno, format!("agent {} has no keywords", row.id)));
        }
        rows.push((lineno, row));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "population file contains no agents"));
    }

    let mut graph = FollowGraph::with_agents(rows.iter().map(|(_, r)| AgentId(r.id)));
    for (lineno, row) in &rows {
        for &f in &row.follows {
            if !seen.contains_key(&f) {
                return Err(Error::parse(path, *lineno, format!("follows unknown agent {f}")));
            }
            graph
                .add_edge(AgentId(row.id), AgentId(f))
                .map_err(|e| Error::parse(path, *lineno, e.to_string()))?;
        }
    }
    let profiles = rows
        .into_iter()
        .map(|(_, r)| AgentProfile {
            id: AgentId(r.id),
            name: r.name,
            interest_keywords: r.keywords.into_iter().filter(|k| !k.trim().is_empty()).collect(),
            verified: r.verified,
            influencer: false,
        })
        .collect();
    Population::new(profiles, graph, influencers)
}

/// Parses a corpus file. Duplicate bodies are errors; token counts outside
/// [150, 300] only produce warnings.
pub fn load_corpus(path: &Path) -> Result<SeedCorpus> {
    let text = read_text(path)?;
    let mut seen = BTreeMap::new();
    let mut posts = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: CorpusRow = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed corpus row: {e}")))?;
        if let Some(first) = seen.insert(row.content.clone(), lineno) {
            return Err(Error::Validation(format!(
                "{}:{lineno}: duplicate post body (first seen on line {first})",
                path.display()
            )));
        }
        posts.push(row.content);
    }
    if posts.is_empty() {
        return Err(Error::parse(path, 0, "corpus file contains no posts"));
    }
    let corpus = SeedCorpus { posts };
    for i in corpus.out_of_range() {
        warn!(
            "{}: post {} has {} tokens, outside [{MIN_SEED_TOKENS}, {MAX_SEED_TOKENS}]",
            path.display(),
            i + 1,
            token_count(&corpus.posts[i])
        );
    }
    if corpus.len() != SEED_CORPUS_SIZE {
        warn!("{}: {} posts (expected {SEED_CORPUS_SIZE})", path.display(), corpus.len());
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_population(558, 1).unwrap();
        let b = generate_population(558, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(population_jsonl(&a), population_jsonl(&b));
        assert_ne!(a.graph.digest(), generate_population(558, 2).unwrap().graph.digest());
    }

    #[test]
    fn exactly_eight_influencers() {
        for seed in [1, 2, 3, 99] {
            let pop = generate_population(558, seed).unwrap();
            assert_eq!(pop.influencers().len(), 8);
        }
    }

    #[test]
    fn influencers_are_top_in_degree() {
        let pop = generate_population(200, 5).unwrap();
        let deg = pop.graph.in_degrees();
        let min_infl = pop.influencers().iter().map(|a| deg[a]).min().unwrap();
        let max_other = pop
            .profiles
            .iter()
            .filter(|p| !p.influencer)
            .map(|p| deg[&p.id])
            .max()
            .unwrap();
        assert!(min_infl >= max_other);
    }

    #[test]
    fn influencer_ties_go_to_smaller_id() {
        // Agents 1..=4 each get one follower from agent 0; all tie at in-degree 1.
        let ids: Vec<AgentId> = (0..5).map(AgentId).collect();
        let mut g = FollowGraph::with_agents(ids.iter().copied());
        for t in 1..5 {
            g.add_edge(AgentId(0), AgentId(t)).unwrap();
        }
        let profiles = ids
            .iter()
            .map(|&id| AgentProfile {
                id,
                name: format!("a{id}"),
                interest_keywords: ["x".to_string()].into(),
                verified: false,
                influencer: false,
            })
            .collect();
        let pop = Population::new(profiles, g, 2).unwrap();
        assert_eq!(pop.influencers(), vec![AgentId(1), AgentId(2)]);
    }

    #[test]
    fn in_degrees_sum_to_edge_count() {
        let pop = generate_population(10, 7).unwrap();
        // Brute-force recount straight from the adjacency lists.
        let mut counts = vec![0usize; 10];
        let mut edges = 0;
        for a in pop.graph.agents() {
            for b in pop.graph.followees(a) {
                assert_ne!(a, *b);
                counts[b.0 as usize] += 1;
                edges += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), edges);
        assert_eq!(pop.graph.in_degrees().values().sum::<usize>(), pop.graph.edge_count());
        assert_eq!(edges, pop.graph.edge_count());
    }

    #[test]
    fn in_degree_is_heavy_tailed() {
        let pop = generate_population(558, 11).unwrap();
        let deg = pop.graph.in_degrees();
        let max = *deg.values().max().unwrap();
        let mean = pop.graph.edge_count() as f64 / 558.0;
        assert!(max as f64 > 8.0 * mean, "max {max}, mean {mean}");
        assert!(deg.values().all(|&d| d <= 557));
    }

    #[test]
    fn too_small_population_is_rejected() {
        assert!(matches!(generate_population(9, 1), Err(Error::Config(_))));
        assert!(generate_population(10, 1).is_ok());
    }

    #[test]
    fn seed_corpus_shape() {
        let c = generate_seed_corpus(1);
        assert_eq!(c.len(), 50);
        assert!(c.out_of_range().is_empty());
        assert!(c.token_counts().iter().all(|n| (150..=300).contains(n)));
        let unique: HashSet<_> = c.posts.iter().collect();
        assert_eq!(unique.len(), 50);
        assert_eq!(c, generate_seed_corpus(1));
        assert_ne!(c, generate_seed_corpus(2));
    }

    #[test]
    fn population_round_trip() {
        let pop = generate_population(60, 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_population(&pop, f.path()).unwrap();
        assert_eq!(load_population(f.path()).unwrap(), pop);
    }

    #[test]
    fn corpus_round_trip() {
        let c = generate_seed_corpus(4);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&c, f.path()).unwrap();
        assert_eq!(load_corpus(f.path()).unwrap(), c);
    }

    #[test]
    fn empty_files_are_errors() {
        let f = tmp_file("");
        assert!(load_population(f.path()).is_err());
        assert!(load_corpus(f.path()).is_err());
        let f = tmp_file("\n\n");
        assert!(load_population(f.path()).is_err());
    }

    #[test]
    fn self_edge_names_line() {
        let f = tmp_file(
            "{\"id\":0,\"name\":\"a\",\"keywords\":[\"x\"],\"verified\":false,\"follows\":[1]}\n\
             {\"id\":1,\"name\":\"b\",\"keywords\":[\"y\"],\"verified\":false,\"follows\":[1]}\n",
        );
        match load_population_with(f.path(), 1) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("itself"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_rows() {
        let f = tmp_file(
            "{\"id\":0,\"name\":\"a\",\"keywords\":[\"x\"],\"verified\":false,\"follows\":[]}\n\
             {\"id\":0,\"name\":\"b\",\"keywords\":[\"y\"],\"verified\":false,\"follows\":[]}\n",
        );
        assert!(matches!(load_population_with(f.path(), 1), Err(Error::Parse { line: 2, .. })));

        let f = tmp_file("{\"id\":0,\"name\":\"a\"\n");
        assert!(matches!(load_population_with(f.path(), 1), Err(Error::Parse { line: 1, .. })));

        let f = tmp_file(
            "{\"id\":0,\"name\":\"a\",\"keywords\":[\"x\"],\"verified\":false,\"follows\":[7]}\n",
        );
        assert!(matches!(load_population_with(f.path(), 1), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn corpus_duplicates_error_but_length_only_warns() {
        let f = tmp_file("{\"content\":\"short one\"}\n{\"content\":\"short one\"}\n");
        assert!(matches!(load_corpus(f.path()), Err(Error::Validation(_))));
        let f = tmp_file("{\"content\":\"short one\"}\n{\"content\":\"short two\"}\n");
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.out_of_range(), vec![0, 1]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_population(Path::new("/nonexistent/pop.jsonl")),
            Err(Error::Io { .. })
        ));
    }
}
