//! Step-exact simulation: initial configuration, single-step semantics,
//! full runs with optional trace capture, and stall detection.
//!
//! A run ends as soon as every head has passed its entire stream; the
//! input is accepted when the final state is accepting. Forward heads use
//! `|stream| + 1` as their end-of-stream position, backward heads use `0`.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    AdvanceMask, Automaton, HeadDirection, HeadId, State, Stream, StreamSide, Symbol, SymbolView,
};
use crate::model::AutomatonParams;

/// State plus the absolute positions of all heads, in canonical head
/// order. The unit of trace capture and of exit-configuration bucketing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: State,
    pub positions: Vec<u32>,
}

impl Configuration {
    /// Position of the given canonical head index.
    pub fn position(&self, idx: usize) -> u32 {
        self.positions[idx]
    }
}

fn stream_of<'a>(head: HeadId, s: &'a Stream, t: &'a Stream) -> &'a Stream {
    match head.side {
        StreamSide::S => s,
        StreamSide::T => t,
    }
}

/// Whether a head at `pos` on a stream of length `len` has passed the
/// entire stream.
pub fn at_end(dir: HeadDirection, pos: u32, len: u32) -> bool {
    match dir {
        HeadDirection::Forward => pos > len,
        HeadDirection::Backward => pos == 0,
    }
}

/// One simulated step: the configuration read, the symbols seen, the
/// movement applied, and the configuration produced.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: u64,
    pub before: Configuration,
    pub view: SymbolView,
    pub mask: AdvanceMask,
    pub after: Configuration,
}

/// A full step-by-step record of one run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub params: AutomatonParams,
    pub s_len: u32,
    pub t_len: u32,
    pub initial: Configuration,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    step: u64,
    state: &'a str,
    pos: &'a [u32],
    sym: Vec<String>,
    adv: Vec<bool>,
}

impl Trace {
    /// Every configuration of the run in order: the initial one, then the
    /// configuration after each step.
    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|r| &r.after))
    }

    pub fn final_configuration(&self) -> &Configuration {
        self.steps.last().map(|r| &r.after).unwrap_or(&self.initial)
    }

    /// Writes the JSON-lines trace format: one record per step with keys
    /// `step`, `state`, `pos`, `sym`, `adv`, where `state`/`pos` describe
    /// the configuration the step read.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for rec in &self.steps {
            let line = TraceLine {
                step: rec.step,
                state: &rec.before.state.name,
                pos: &rec.before.positions,
                sym: rec.view.0.iter().map(|s| s.to_string()).collect(),
                adv: rec.mask.0.iter().map(|m| matches!(m, crate::model::HeadMove::Advance)).collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace lines are valid UTF-8")
    }
}

/// Outcome of a completed run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub accepted: bool,
    pub steps: u64,
    pub final_config: Configuration,
    pub trace: Option<Trace>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("transition undefined in state {state} on ({symbols})")]
    TransitionUndefined { state: String, symbols: String },

    #[error("stall: {threshold} consecutive steps without any head advancing (after {steps} total steps)")]
    Stall { threshold: u64, steps: u64 },

    #[error("delta produced state {state} outside the declared state set")]
    StateOutsideDeclared { state: String },

    #[error("step requested on a completed run (all heads at end)")]
    RunOver,
}

/// Start state, forward heads on position 1, backward heads on the last
/// position. Heads on an empty stream start past it.
pub fn initial_configuration(a: &Automaton, s: &Stream, t: &Stream) -> Configuration {
    let positions = a
        .params()
        .heads()
        .into_iter()
        .map(|h| {
            let len = stream_of(h, s, t).len();
            match h.dir {
                // On an empty stream, 1 is already the end marker
                // (|stream| + 1) and 0 likewise for backward heads.
                HeadDirection::Forward => 1,
                HeadDirection::Backward => len,
            }
        })
        .collect();
    Configuration { state: a.start().clone(), positions }
}

/// The symbols currently under each head, `end` for heads that have
/// passed their stream.
pub fn symbol_view(a: &Automaton, s: &Stream, t: &Stream, c: &Configuration) -> SymbolView {
    let syms = a
        .params()
        .heads()
        .into_iter()
        .zip(&c.positions)
        .map(|(h, &pos)| {
            let stream = stream_of(h, s, t);
            if at_end(h.dir, pos, stream.len()) {
                Symbol::End
            } else {
                Symbol::Item(stream.get(pos).expect("non-end positions are in range"))
            }
        })
        .collect();
    SymbolView(syms)
}

/// True when every head has passed its entire stream, i.e. the run is
/// over.
pub fn all_heads_at_end(a: &Automaton, s: &Stream, t: &Stream, c: &Configuration) -> bool {
    a.params()
        .heads()
        .into_iter()
        .zip(&c.positions)
        .all(|(h, &pos)| at_end(h.dir, pos, stream_of(h, s, t).len()))
}

fn apply_step(
    a: &Automaton,
    s: &Stream,
    t: &Stream,
    c: &Configuration,
) -> Result<(SymbolView, AdvanceMask, Configuration), EngineError> {
    let view = symbol_view(a, s, t, c);
    let (next_state, mask) = a.delta(&c.state, &view).ok_or_else(|| EngineError::TransitionUndefined {
        state: c.state.name.clone(),
        symbols: view.0.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
    })?;
    if !a.states().contains(&next_state) {
        return Err(EngineError::StateOutsideDeclared { state: next_state.name });
    }
    debug_assert_eq!(mask.len(), a.params().k(), "advance mask must have length k");
    let positions = a
        .params()
        .heads()
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let pos = c.positions[i];
            let len = stream_of(h, s, t).len();
            if !mask.advances(i) || at_end(h.dir, pos, len) {
                // Advancing a head that has already passed its stream is
                // a no-op.
                pos
            } else {
                match h.dir {
                    HeadDirection::Forward => pos + 1,
                    HeadDirection::Backward => pos - 1,
                }
            }
        })
        .collect();
    Ok((view, mask, Configuration { state: next_state, positions }))
}

/// Applies one transition to a configuration. The run must not already be
/// over.
pub fn step(a: &Automaton, s: &Stream, t: &Stream, c: &Configuration) -> Result<Configuration, EngineError> {
    if all_heads_at_end(a, s, t, c) {
        return Err(EngineError::RunOver);
    }
    apply_step(a, s, t, c).map(|(_, _, after)| after)
}

/// Runs the automaton to completion.
///
/// Raises [`EngineError::Stall`] after `m + 1` consecutive steps in which
/// no head advanced: with fixed positions a deterministic machine must
/// revisit a state within that window, so the run can never terminate.
pub fn run(a: &Automaton, s: &Stream, t: &Stream, capture_trace: bool) -> Result<RunResult, EngineError> {
    let mut current = initial_configuration(a, s, t);
    let mut steps: Vec<StepRecord> = Vec::new();
    let initial = current.clone();
    let stall_threshold: u64 = u64::try_from(a.params().m.saturating_add(1)).unwrap_or(u64::MAX);
    let mut idle: u64 = 0;
    let mut count: u64 = 0;

    while !all_heads_at_end(a, s, t, &current) {
        let (view, mask, after) = apply_step(a, s, t, &current)?;
        let advanced = after.positions != current.positions;
        count += 1;
        if capture_trace {
            steps.push(StepRecord { step: count - 1, before: current.clone(), view, mask, after: after.clone() });
        }
        current = after;
        if advanced {
            idle = 0;
        } else {
            idle += 1;
            if idle >= stall_threshold {
                return Err(EngineError::Stall { threshold: stall_threshold, steps: count });
            }
        }
    }

    let accepted = a.is_accepting(&current.state);
    let trace = capture_trace.then(|| Trace {
        params: *a.params(),
        s_len: s.len(),
        t_len: t.len(),
        initial,
        steps,
    });
    Ok(RunResult { accepted, steps: count, final_config: current, trace })
}
