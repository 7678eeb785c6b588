use std::fmt::Write;

use super::DecisionContext;

/// System and user messages for one decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

const FRAMING: &str = "You are a user of a Weibo-like microblogging platform. Each time you open the app \
you see a set of posts together with how many likes and reshares each has received so far. \
You can read the posts, or engage with one of them: like it, repost it unchanged, \
or quote it by reposting it with your own comment. Act as yourself, based on your profile \
and interests.";

const RESPONSE_FORMAT: &str = "Reply with a single JSON object and nothing else, in this form: \
{\"action\": \"read\" | \"like\" | \"repost\" | \"quote\", \"post_id\": <id of the post you engage with; \
omit when reading>, \"comment\": <your comment; required when quoting>}";

/// Renders the decision context. Pure: equal contexts give byte-identical
/// prompts.
pub fn build_prompt(ctx: &DecisionContext<'_>) -> Prompt {
    let mut system = String::from(FRAMING);
    let fragment = ctx.regime.prompt_fragment();
    if !fragment.is_empty() {
        system.push_str("\n\n");
        system.push_str(fragment);
    }
    system.push_str("\n\n");
    system.push_str(RESPONSE_FORMAT);

    let p = ctx.profile;
    let mut user = String::new();
    let keywords: Vec<&str> = p.interest_keywords.iter().map(String::as_str).collect();
    let _ = writeln!(user, "Your profile:");
    let _ = writeln!(user, "- name: {}", p.name);
    let _ = writeln!(user, "- interests: {}", keywords.join(", "));
    let _ = writeln!(user, "- verified account: {}", if p.verified { "yes" } else { "no" });
    let _ = writeln!(user);

    let _ = writeln!(user, "Your recent interactions (oldest first):");
    if ctx.history.is_empty() {
        let _ = writeln!(user, "- none yet");
    }
    for h in ctx.history {
        let _ = writeln!(user, "- {} post_id={} (time step {})", h.action, h.post, h.timestep);
    }
    let _ = writeln!(user);

    let _ = writeln!(user, "Posts in your feed:");
    for (entry, content) in ctx.feed.entries.iter().zip(ctx.contents) {
        let _ = writeln!(
            user,
            "\n[post_id={}] likes: {} | reshares: {}\n{}",
            entry.post,
            entry.likes,
            entry.reshares,
            content.trim()
        );
    }
    let _ = write!(user, "\nWhat do you do?");
    Prompt { system, user }
}
