//! Turn-based pairwise priority negotiation: session bookkeeping, a
//! deterministic scripted negotiator, a dialogue negotiator driving an
//! external chat service, and agreement parsing.

pub mod client;

use client::{ChatClient, ChatMessage};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Priorities closer than this are treated as tied.
pub const PRIORITY_TIE_EPS: f64 = 1e-6;
/// Goal distances closer than this are treated as tied (m).
pub const DISTANCE_TIE_EPS: f64 = 1e-6;

/// System prompt template shipped as a versioned asset; placeholders are
/// filled per speaker.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/negotiation_prompt.txt");

#[derive(Debug, Error, PartialEq)]
pub enum NegotiationError {
    #[error("a session for this pair is already open")]
    SamePair,
    #[error("a robot cannot negotiate with itself")]
    SelfNegotiation,
    #[error("unknown robot id: {0}")]
    UnknownRobot(String),
    #[error("chat transport failed: {0}")]
    Transport(String),
    #[error("no parseable agreement within the round limit")]
    MalformedReply,
}

/// What a robot brings to the table: identity, mission, current priority,
/// and how far it still has to go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionContext {
    pub robot_id: String,
    pub mission_text: String,
    pub priority: f64,
    pub distance_to_goal: f64,
    pub urgency_note: Option<String>,
}

/// One dialogue message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: String,
    pub text: String,
}

/// The agreed outcome: who holds the right-of-way, and the updated
/// priority values (strictly ordered, high above low).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityAssignment {
    pub high: String,
    pub low: String,
    pub new_priorities: BTreeMap<String, f64>,
}

impl PriorityAssignment {
    /// Build the canonical outcome from two contexts once the winner is
    /// known. A consensus that merely confirms the existing order changes
    /// nothing; only when the dialogue has to overrule the numbers (tied
    /// values, or the winner's value is the smaller one) are the values
    /// rewritten to `(max(ρ) + 1, min(ρ))` so the ordering is strict.
    pub fn ranked(winner: &MissionContext, loser: &MissionContext) -> Self {
        let (hi, lo) = if winner.priority > loser.priority + PRIORITY_TIE_EPS {
            (winner.priority, loser.priority)
        } else {
            (
                winner.priority.max(loser.priority) + 1.0,
                winner.priority.min(loser.priority),
            )
        };
        let mut new_priorities = BTreeMap::new();
        new_priorities.insert(winner.robot_id.clone(), hi);
        new_priorities.insert(loser.robot_id.clone(), lo);
        PriorityAssignment {
            high: winner.robot_id.clone(),
            low: loser.robot_id.clone(),
            new_priorities,
        }
    }
}

/// A pairwise dialogue in progress (or finished).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationSession {
    /// Unordered pair, stored sorted.
    pub pair: (String, String),
    pub transcript: Vec<TranscriptEntry>,
    pub max_rounds: usize,
    pub outcome: Option<PriorityAssignment>,
    /// Set when the scripted rule had to stand in for the dialogue.
    pub fell_back: bool,
}

impl NegotiationSession {
    fn new(a: &str, b: &str, max_rounds: usize) -> Self {
        let pair = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        NegotiationSession {
            pair,
            transcript: Vec::new(),
            max_rounds,
            outcome: None,
            fell_back: false,
        }
    }
}

/// Registry enforcing at most one active session per unordered pair.
#[derive(Debug, Default)]
pub struct SessionBook {
    open: BTreeSet<(String, String)>,
}

impl SessionBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Open a session for a pair of robots. The first speaker is always the
    /// lexicographically smaller id.
    pub fn open_session(
        &mut self,
        ctx_i: &MissionContext,
        ctx_j: &MissionContext,
        max_rounds: usize,
    ) -> Result<NegotiationSession, NegotiationError> {
        if ctx_i.robot_id == ctx_j.robot_id {
            return Err(NegotiationError::SelfNegotiation);
        }
        let session = NegotiationSession::new(&ctx_i.robot_id, &ctx_j.robot_id, max_rounds);
        if !self.open.insert(session.pair.clone()) {
            return Err(NegotiationError::SamePair);
        }
        Ok(session)
    }

    /// Release the pair once its session resolved.
    pub fn close(&mut self, pair: &(String, String)) {
        self.open.remove(pair);
    }

    pub fn is_open(&self, a: &str, b: &str) -> bool {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.open.contains(&key)
    }
}

/// Deterministic stand-in for the dialogue, and the fallback when it fails:
/// the higher priority wins; ties go to the shorter remaining distance;
/// full ties go to the lexicographically smaller id.
pub fn scripted_negotiate(
    ctx_i: &MissionContext,
    ctx_j: &MissionContext,
) -> PriorityAssignment {
    let i_wins = if (ctx_i.priority - ctx_j.priority).abs() > PRIORITY_TIE_EPS {
        ctx_i.priority > ctx_j.priority
    } else if (ctx_i.distance_to_goal - ctx_j.distance_to_goal).abs() > DISTANCE_TIE_EPS {
        ctx_i.distance_to_goal < ctx_j.distance_to_goal
    } else {
        ctx_i.robot_id < ctx_j.robot_id
    };
    if i_wins {
        PriorityAssignment::ranked(ctx_i, ctx_j)
    } else {
        PriorityAssignment::ranked(ctx_j, ctx_i)
    }
}

fn render_prompt(own: &MissionContext, peer: &MissionContext, max_rounds: usize) -> String {
    PROMPT_TEMPLATE
        .replace("{robot_id}", &own.robot_id)
        .replace("{peer_id}", &peer.robot_id)
        .replace("{mission}", &own.mission_text)
        .replace("{priority}", &format!("{:.2}", own.priority))
        .replace("{distance}", &format!("{:.1}", own.distance_to_goal))
        .replace(
            "{urgency}",
            own.urgency_note.as_deref().unwrap_or("none"),
        )
        .replace("{max_rounds}", &max_rounds.to_string())
}

/// Messages the speaker sends to the service: its system prompt, then the
/// transcript so far with its own lines as `assistant` and the peer's as
/// `user`.
fn messages_for(
    speaker: &MissionContext,
    peer: &MissionContext,
    session: &NegotiationSession,
) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::system(render_prompt(
        speaker,
        peer,
        session.max_rounds,
    ))];
    for entry in &session.transcript {
        if entry.speaker == speaker.robot_id {
            messages.push(ChatMessage::assistant(entry.text.clone()));
        } else {
            messages.push(ChatMessage::user(entry.text.clone()));
        }
    }
    if session.transcript.is_empty() {
        messages.push(ChatMessage::user(format!(
            "You detected a potential collision with robot {}. Open the negotiation.",
            peer.robot_id
        )));
    }
    messages
}

/// Run the dialogue: robots alternate turns (smaller id first), each turn
/// queries the service with the transcript so far and appends the reply.
/// The dialogue stops as soon as a reply carries a parseable agreement for
/// this pair. On transport failure, or when `max_rounds` exchanges pass
/// without consensus, the scripted rule decides instead when `fallback` is
/// set; otherwise the corresponding error is returned.
pub fn llm_negotiate(
    session: &mut NegotiationSession,
    ctx_i: &MissionContext,
    ctx_j: &MissionContext,
    chat: &dyn ChatClient,
    fallback: bool,
) -> Result<PriorityAssignment, NegotiationError> {
    let (first, second) = if ctx_i.robot_id <= ctx_j.robot_id {
        (ctx_i, ctx_j)
    } else {
        (ctx_j, ctx_i)
    };
    for turn in 0..(2 * session.max_rounds) {
        let (speaker, peer) = if turn % 2 == 0 {
            (first, second)
        } else {
            (second, first)
        };
        let reply = match chat.complete(&messages_for(speaker, peer, session)) {
            Ok(text) => text,
            Err(err) => {
                return if fallback {
                    let outcome = scripted_negotiate(ctx_i, ctx_j);
                    session.fell_back = true;
                    session.outcome = Some(outcome.clone());
                    Ok(outcome)
                } else {
                    Err(NegotiationError::Transport(err.to_string()))
                };
            }
        };
        session.transcript.push(TranscriptEntry {
            speaker: speaker.robot_id.clone(),
            text: reply.clone(),
        });
        if let Some(parsed) = parse_agreement(&reply) {
            // Only accept agreements naming exactly this pair.
            let (winner, loser) = if parsed.high == ctx_i.robot_id && parsed.low == ctx_j.robot_id
            {
                (ctx_i, ctx_j)
            } else if parsed.high == ctx_j.robot_id && parsed.low == ctx_i.robot_id {
                (ctx_j, ctx_i)
            } else {
                continue;
            };
            let outcome = PriorityAssignment::ranked(winner, loser);
            session.outcome = Some(outcome.clone());
            return Ok(outcome);
        }
    }
    if fallback {
        let outcome = scripted_negotiate(ctx_i, ctx_j);
        session.fell_back = true;
        session.outcome = Some(outcome.clone());
        Ok(outcome)
    } else {
        Err(NegotiationError::MalformedReply)
    }
}

/// Scan free text for the agreement pattern
/// `{<id>: high priority, <id>: low priority}` (case-insensitive, either
/// order, tolerant of surrounding prose). Returns the assignment with
/// placeholder priority values `2 > 1`; negotiators re-derive the real
/// values from the mission contexts.
pub fn parse_agreement(text: &str) -> Option<PriorityAssignment> {
    // Try every {...} span; the agreement may be embedded in prose.
    let bytes = text.as_bytes();
    for (start, _) in bytes.iter().enumerate().filter(|(_, &b)| b == b'{') {
        let Some(rel_end) = text[start..].find('}') else {
            break;
        };
        let inner = &text[start + 1..start + rel_end];
        if let Some(assignment) = parse_agreement_body(inner) {
            return Some(assignment);
        }
    }
    None
}

fn parse_agreement_body(inner: &str) -> Option<PriorityAssignment> {
    let mut high: Option<String> = None;
    let mut low: Option<String> = None;
    for part in inner.split(',') {
        let (id, level) = part.split_once(':')?;
        let id = id.trim().trim_matches(|c| c == '"' || c == '\'');
        let level = level.trim().to_ascii_lowercase();
        if id.is_empty() {
            return None;
        }
        let slot = if level == "high priority" {
            &mut high
        } else if level == "low priority" {
            &mut low
        } else {
            return None;
        };
        if slot.is_some() {
            return None; // two highs or two lows
        }
        *slot = Some(id.to_string());
    }
    let (high, low) = (high?, low?);
    if high == low {
        return None;
    }
    let mut new_priorities = BTreeMap::new();
    new_priorities.insert(high.clone(), 2.0);
    new_priorities.insert(low.clone(), 1.0);
    Some(PriorityAssignment {
        high,
        low,
        new_priorities,
    })
}

/// Overwrite the pair's priorities in the world map; every other robot is
/// untouched. Applying the same assignment twice is a no-op the second
/// time.
pub fn apply_assignment(
    priorities: &mut BTreeMap<String, f64>,
    assignment: &PriorityAssignment,
) -> Result<(), NegotiationError> {
    for id in assignment.new_priorities.keys() {
        if !priorities.contains_key(id) {
            return Err(NegotiationError::UnknownRobot(id.clone()));
        }
    }
    for (id, rho) in &assignment.new_priorities {
        priorities.insert(id.clone(), *rho);
    }
    Ok(())
}
