//! Feed construction: a block of followed-account posts followed by
//! algorithmic picks, both ranked by recency and keyword relevance.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, FeedSlot, LoadCondition, Post, PostId, RankingParams};
use crate::population::AgentProfile;

/// A post together with its normalized token set, cached at creation time.
#[derive(Clone, Debug)]
pub struct IndexedPost {
    pub post: Post,
    pub tokens: HashSet<String>,
}

impl IndexedPost {
    pub fn new(post: Post) -> Self {
        let tokens = tokens(&post.content);
        IndexedPost { post, tokens }
    }
}

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn tokens(text: &str) -> HashSet<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

fn normalize_token(raw: &str) -> String {
    raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// |A ∩ B| / |A ∪ B|, zero when both are empty.
pub fn jaccard(post_tokens: &HashSet<String>, keywords: &BTreeSet<String>) -> f64 {
    let keys: HashSet<String> = keywords
        .iter()
        .map(|k| normalize_token(k))
        .filter(|k| !k.is_empty())
        .collect();
    let inter = keys.iter().filter(|k| post_tokens.contains(*k)).count();
    let union = post_tokens.len() + keys.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn score_post(post: &IndexedPost, agent: &AgentProfile, now: u32, params: &RankingParams) -> f64 {
    let age = now.saturating_sub(post.post.created_at) as f64;
    params.recency_weight * (-params.decay * age).exp()
        + params.relevance_weight * jaccard(&post.tokens, &agent.interest_keywords)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub post: PostId,
    pub likes: u64,
    pub reshares: u64,
    pub slot: FeedSlot,
}

/// Posts shown at one activation, followed block first. Popularity counts are
/// snapshots taken when the feed was built.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feed {
    pub entries: Vec<FeedEntry>,
}

impl Feed {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, post: PostId) -> bool {
        self.entries.iter().any(|e| e.post == post)
    }

    pub fn position(&self, post: PostId) -> Option<usize> {
        self.entries.iter().position(|e| e.post == post)
    }

    pub fn realized_algorithmic_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.slot == FeedSlot::Algorithmic)
            .count()
    }
}

/// Everything the recommender needs to know about the viewer.
pub struct Viewer<'a> {
    pub profile: &'a AgentProfile,
    pub followees: &'a BTreeSet<AgentId>,
    /// Posts the viewer has liked, reposted or quoted.
    pub engaged: &'a HashSet<PostId>,
}

/// Builds the viewer's feed from `posts` at timestep `now`.
///
/// Up to three eligible followee posts are taken first; any shortfall is
/// backfilled from the algorithmic pool so the total stays on target when
/// supply allows. Ties are broken by ascending post id.
pub fn select_feed(
    viewer: &Viewer<'_>,
    posts: &[IndexedPost],
    now: u32,
    load: LoadCondition,
    params: &RankingParams,
) -> Feed {
    let mut scored: Vec<(f64, &IndexedPost)> = posts
        .iter()
        .filter(|p| {
            p.post.author != viewer.profile.id
                && p.post.created_at <= now
                && !viewer.engaged.contains(&p.post.id)
        })
        .map(|p| (score_post(p, viewer.profile, now, params), p))
        .collect();
    scored.sort_by(|a, b| rank_order(a.0, a.1.post.id, b.0, b.1.post.id));

    let (followed, rest): (Vec<_>, Vec<_>) = scored
        .into_iter()
        .partition(|(_, p)| viewer.followees.contains(&p.post.author));

    let followed_take = followed.len().min(load.followed_count());
    let shortfall = load.followed_count() - followed_take;
    // Followed posts beyond the first three rejoin the algorithmic pool.
    let mut pool: Vec<(f64, &IndexedPost)> = followed[followed_take..].to_vec();
    pool.extend(rest);
    pool.sort_by(|a, b| rank_order(a.0, a.1.post.id, b.0, b.1.post.id));
    let algo_take = pool.len().min(load.algorithmic_count() + shortfall);

    let entry = |p: &IndexedPost, slot| FeedEntry {
        post: p.post.id,
        likes: p.post.counters.likes,
        reshares: p.post.counters.reshares(),
        slot,
    };
    let entries = followed[..followed_take]
        .iter()
        .map(|(_, p)| entry(p, FeedSlot::Followed))
        .chain(pool[..algo_take].iter().map(|(_, p)| entry(p, FeedSlot::Algorithmic)))
        .collect();
    Feed { entries }
}

fn rank_order(sa: f64, ida: PostId, sb: f64, idb: PostId) -> Ordering {
    sb.total_cmp(&sa).then(ida.cmp(&idb))
}
