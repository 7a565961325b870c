//! Future-state rollout over a pluggable move-suggestion provider, plus the
//! elapsed-time hint policy. The provider contract mirrors a bot that can
//! score up to K candidate moves from any position.

use std::time::Duration;

use thiserror::Error;

pub const DEFAULT_SUGGESTION_COUNT: usize = 5;

/// A scored candidate move.
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion<M> {
    pub mv: M,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Outcome {
    Win,
    Loss,
    Draw,
}

/// A game backend the rollout loop can drive: suggest legal moves with
/// scores (descending), apply a move, and detect terminal states.
pub trait SuggestionProvider {
    type State: Clone;
    type Move: Clone;

    /// Up to `k` legal moves sorted by descending score. Must not be called
    /// on a terminal state.
    fn suggest(&self, state: &Self::State, k: usize) -> Vec<Suggestion<Self::Move>>;
    fn apply(&self, state: &Self::State, mv: &Self::Move) -> Self::State;
    /// `Some(outcome)` from the perspective of the side to move, when terminal.
    fn is_terminal(&self, state: &Self::State) -> Option<Outcome>;
    /// Stable string encodings for trace export.
    fn encode_state(&self, state: &Self::State) -> String;
    fn encode_move(&self, mv: &Self::Move) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep<S, M> {
    pub state_before: S,
    pub chosen: Suggestion<M>,
    /// The full suggestion list shown at this step.
    pub alternatives: Vec<Suggestion<M>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TerminationReason {
    DepthReached,
    TerminalState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace<S, M> {
    pub start: S,
    pub steps: Vec<RolloutStep<S, M>>,
    pub termination: TerminationReason,
    pub final_outcome: Option<Outcome>,
}

/// How the loop picks among suggestions at each ply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoicePolicy {
    /// Always take the top-scored suggestion.
    Top1,
    /// Take the i-th suggestion at ply i (what-if branches); plies beyond
    /// the sequence fall back to the top suggestion.
    Indices(Vec<usize>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RolloutError {
    #[error("depth must be >= 1")]
    ZeroDepth,
    #[error("provider returned no legal moves on a non-terminal state at ply {0}")]
    NoMoves(usize),
    #[error("choice index {index} out of range at ply {ply} ({available} suggestions)")]
    ChoiceOutOfRange {
        ply: usize,
        index: usize,
        available: usize,
    },
}

/// Iterates suggest -> choose -> apply until `depth` plies or a terminal
/// state, recording every suggestion list along the way.
pub fn rollout<P: SuggestionProvider>(
    provider: &P,
    start: P::State,
    depth: usize,
    choice: &ChoicePolicy,
    k: usize,
) -> Result<RolloutTrace<P::State, P::Move>, RolloutError> {
    if depth == 0 {
        return Err(RolloutError::ZeroDepth);
    }
    let mut steps = Vec::new();
    let mut state = start.clone();
    let mut termination = TerminationReason::DepthReached;
    let mut final_outcome = None;
    for ply in 0..depth {
        if let Some(outcome) = provider.is_terminal(&state) {
            termination = TerminationReason::TerminalState;
            final_outcome = Some(outcome);
            break;
        }
        let suggestions = provider.suggest(&state, k);
        if suggestions.is_empty() {
            return Err(RolloutError::NoMoves(ply));
        }
        let index = match choice {
            ChoicePolicy::Top1 => 0,
            ChoicePolicy::Indices(seq) => seq.get(ply).copied().unwrap_or(0),
        };
        let chosen = suggestions
            .get(index)
            .cloned()
            .ok_or(RolloutError::ChoiceOutOfRange {
                ply,
                index,
                available: suggestions.len(),
            })?;
        let next = provider.apply(&state, &chosen.mv);
        steps.push(RolloutStep {
            state_before: state,
            chosen,
            alternatives: suggestions,
        });
        state = next;
    }
    if termination == TerminationReason::DepthReached {
        if let Some(outcome) = provider.is_terminal(&state) {
            termination = TerminationReason::TerminalState;
            final_outcome = Some(outcome);
        }
    }
    Ok(RolloutTrace {
        start,
        steps,
        termination,
        final_outcome,
    })
}

/// JSON lines export: one object per step with provider-encoded state,
/// chosen move, score, and the alternatives shown.
pub fn trace_to_json_lines<P: SuggestionProvider>(
    provider: &P,
    trace: &RolloutTrace<P::State, P::Move>,
) -> String {
    let mut out = String::new();
    for (ply, step) in trace.steps.iter().enumerate() {
        let alternatives: Vec<serde_json::Value> = step
            .alternatives
            .iter()
            .map(|s| {
                serde_json::json!({
                    "move": provider.encode_move(&s.mv),
                    "score": s.score,
                })
            })
            .collect();
        let line = serde_json::json!({
            "ply": ply,
            "state": provider.encode_state(&step.state_before),
            "chosen_move": provider.encode_move(&step.chosen.mv),
            "score": step.chosen.score,
            "alternatives": alternatives,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Elapsed-thinking-time hint policy: hint once `elapsed >= threshold`
/// (boundary inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HintPolicy {
    pub elapsed_threshold: Duration,
}

impl HintPolicy {
    pub fn new(elapsed_threshold: Duration) -> Self {
        assert!(elapsed_threshold > Duration::ZERO, "threshold must be positive");
        Self { elapsed_threshold }
    }
}

pub fn should_hint(policy: &HintPolicy, elapsed: Duration) -> bool {
    elapsed >= policy.elapsed_threshold
}

/// Brain-condition hint trigger. Unimplemented sensing stub: always false.
pub fn should_hint_brain_condition() -> bool {
    false
}

/// Turning-point hint trigger. Unimplemented detector stub: always false.
pub fn should_hint_turning_point() -> bool {
    false
}
