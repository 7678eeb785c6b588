use serde_json::{Map, Value};

use super::{Decision, Engagement};
use crate::model::PostId;
use crate::recommender::Feed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutcome {
    pub decision: Decision,
    /// Why the response was downgraded to `ReadAll`, if it was.
    pub warning: Option<String>,
}

fn fallback(reason: impl Into<String>) -> ParseOutcome {
    ParseOutcome { decision: Decision::ReadAll, warning: Some(reason.into()) }
}

/// Finds the response object: the whole text, or the outermost `{...}` span
/// (models like to wrap JSON in prose or code fences).
fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    let trimmed = raw.trim();
    if let Ok(Value::Object(m)) = serde_json::from_str(trimmed) {
        return Some(m);
    }
    let start = trimmed.find('{')?;
    let end = trimmed.rfind('}')?;
    if end <= start {
        return None;
    }
    match serde_json::from_str(&trimmed[start..=end]) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

fn post_id(v: &Value) -> Option<u32> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|x| u32::try_from(x).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parses `{"action": ..., "post_id": ..., "comment": ...}`. Never fails:
/// anything unusable becomes `ReadAll` with a warning.
pub fn parse_response(raw: &str, feed: &Feed) -> ParseOutcome {
    let Some(obj) = extract_object(raw) else {
        return fallback("response is not a JSON object");
    };
    let Some(action) = obj.get("action").and_then(Value::as_str) else {
        return fallback("response has no string `action`");
    };
    let action = match action.trim().to_ascii_lowercase().as_str() {
        "read" => return ParseOutcome { decision: Decision::ReadAll, warning: None },
        "like" => Engagement::Like,
        "repost" => Engagement::Repost,
        "quote" => Engagement::Quote,
        other => return fallback(format!("unknown action `{other}`")),
    };
    let Some(target) = obj.get("post_id").and_then(post_id).map(PostId) else {
        return fallback(format!("`{}` without a valid post_id", action.action()));
    };
    if !feed.contains(target) {
        return fallback(format!("post_id {target} is not in the feed"));
    }
    let commentary = match action {
        Engagement::Quote => {
            match obj.get("comment").and_then(Value::as_str).map(str::trim) {
                Some(c) if !c.is_empty() => Some(c.to_string()),
                _ => return fallback("quote without a comment"),
            }
        }
        _ => None,
    };
    ParseOutcome { decision: Decision::Engage { target, action, commentary }, warning: None }
}
