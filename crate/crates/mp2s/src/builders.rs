//! Reference automata for the disjointness problem, plus a deliberately
//! memory-starved variant used as a fooling-search fixture.
//!
//! All three builders produce machines intended for length-`n` inputs over
//! `D_n`. Fed an item outside `D_n` they report an undefined transition;
//! fed streams longer than `n` the subset-storing machines can step
//! outside their declared state sets.

use std::sync::Arc;

use thiserror::Error;

use crate::disjointness::IndexSet;
use crate::engine::{run, EngineError};
use crate::model::{
    make_automaton, AcceptFn, AdvanceMask, Automaton, AutomatonParams, DataItem, DeltaFn, ItemKind,
    State, StateSet, Stream, Symbol, SymbolView,
};

#[derive(Debug, Error)]
pub enum BuilderError {
    #[error("instance size must satisfy 1 <= n <= {max}, got {n}")]
    InvalidSize { n: u32, max: u32 },

    #[error("n = {n} is not a perfect square")]
    NotPerfectSquare { n: u32 },

    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Subset-storing machines encode seen items in the state id bitmask;
/// 2n bits must fit in a u64 alongside the rejecting sentinel.
pub const MAX_SUBSET_N: u32 = 30;

const REJECTING_ID: u64 = u64::MAX;

fn item_bit(item: DataItem) -> u64 {
    let slot = 2 * (item.index as u64 - 1);
    match item.kind {
        ItemKind::A => 1 << slot,
        ItemKind::B => 1 << (slot + 1),
    }
}

fn seen_state(bits: u64, n: u32) -> State {
    let mut names = Vec::new();
    for i in 1..=n {
        for item in [DataItem::a(i), DataItem::b(i)] {
            if bits & item_bit(item) != 0 {
                names.push(item.to_string());
            }
        }
    }
    State::new(bits, format!("seen{{{}}}", names.join(",")))
}

fn rejecting_state() -> State {
    State::new(REJECTING_ID, "rejecting")
}

fn binomial(n: u64, k: u64) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of subsets of a 2n-item universe with at most n elements.
fn subsets_up_to_n(n: u32) -> u128 {
    (0..=n as u64).map(|i| binomial(2 * n as u64, i)).sum()
}

/// The subset-storing machine: one forward head per stream and up to
/// `2^{2n}` states.
///
/// Phase 1 (S head live): absorb each S item into the seen-subset state,
/// advancing only the S head. Phase 2 (S head past its stream): compare
/// each T item against the stored subset, entering the absorbing
/// `rejecting` state on a hit. Accepts when the final state is any
/// seen-subset.
pub fn build_trivial(n: u32) -> Result<Automaton, BuilderError> {
    if !(1..=MAX_SUBSET_N).contains(&n) {
        return Err(BuilderError::InvalidSize { n, max: MAX_SUBSET_N });
    }
    let m: u128 = 1u128 << (2 * n);
    let params = AutomatonParams::new(2 * n as u64, m, 1, 0)?;
    let full_mask: u64 = (1u64 << (2 * n)) - 1;

    // Declared: every subset of D_n with at most n items (a length-n
    // stream cannot expose more), plus the rejecting sink.
    let declared = StateSet::Symbolic {
        count: subsets_up_to_n(n) + 1,
        member: Arc::new(move |s: &State| {
            s.id == REJECTING_ID || (s.id & !full_mask == 0 && s.id.count_ones() <= n)
        }),
    };

    let delta: Arc<DeltaFn> = Arc::new(move |state: &State, view: &SymbolView| {
        let k = view.len();
        if state.id == REJECTING_ID {
            return Some((rejecting_state(), AdvanceMask::advance_all(k)));
        }
        let bits = state.id;
        match (view.get(0), view.get(1)) {
            (Symbol::Item(x), _) => {
                if x.index > n {
                    return None;
                }
                Some((seen_state(bits | item_bit(x), n), AdvanceMask::advancing(k, &[0])))
            }
            (Symbol::End, Symbol::Item(y)) => {
                if y.index > n {
                    return None;
                }
                let next = if bits & item_bit(y) != 0 {
                    rejecting_state()
                } else {
                    seen_state(bits, n)
                };
                Some((next, AdvanceMask::advancing(k, &[1])))
            }
            (Symbol::End, Symbol::End) => Some((state.clone(), AdvanceMask::advance_all(k))),
        }
    });

    let accepting: Arc<AcceptFn> = Arc::new(|s: &State| s.id != REJECTING_ID);
    Ok(make_automaton(params, declared, seen_state(0, n), accepting, delta)?)
}

/// The `sqrt(n)`-head machine: `r = sqrt(n)` forward heads per stream and
/// exactly `n + 2 - r` states (within the `n + 2` budget).
///
/// Phase 1 parks S head `i` at position `(i-1)·r + 1`, tracking the
/// moving pack's position in the state. Phase 2 runs `r` sub-phases: in
/// sub-phase `j`, T head `j` scans the whole stream while every symbol it
/// reads is compared against all S head symbols; when it passes the
/// stream, every S head advances one step and the next sub-phase begins.
/// Sub-phases are told apart by which T heads already read `end`.
///
/// Sub-phase `j >= 2` is hosted in the (otherwise dormant) state
/// `phase1@(j-1)`: during real phase 1 no T head has passed its stream,
/// so the two uses of the state see disjoint symbol views. Hosting the
/// scan in a distinct state lets each T head begin its pass only after
/// the S heads moved to their new posts, which is what makes the first T
/// position get compared against every S post. After the last sub-phase
/// the S heads are flushed to the end with no further comparisons, in the
/// `scanning` state, which is the single accepting state.
pub fn build_sqrt(n: u32) -> Result<Automaton, BuilderError> {
    if n < 1 {
        return Err(BuilderError::InvalidSize { n, max: u32::MAX });
    }
    let r = (n as f64).sqrt().round() as u32;
    if r * r != n {
        return Err(BuilderError::NotPerfectSquare { n });
    }

    let phase1_states = n - r; // positions 1..=n-r; the parked position n-r+1 is `scanning`
    let scanning_id = phase1_states as u64;
    let found_id = scanning_id + 1;
    let phase1 = |p: u32| State::new(p as u64 - 1, format!("phase1@{p}"));
    let scanning = move || State::new(scanning_id, "scanning");
    let found = move || State::new(found_id, "found");

    let mut states: Vec<State> = (1..=phase1_states).map(phase1).collect();
    states.push(scanning());
    states.push(found());

    let params = AutomatonParams::new(2 * n as u64, n as u128 + 2, r, 0)?;
    let k = params.k();
    let rr = r as usize;
    let start = if phase1_states >= 1 { phase1(1) } else { scanning() };

    let delta: Arc<DeltaFn> = Arc::new(move |state: &State, view: &SymbolView| {
        debug_assert_eq!(view.len(), k);
        let s_syms: Vec<Symbol> = (0..rr).map(|i| view.get(i)).collect();
        let t_syms: Vec<Symbol> = (rr..2 * rr).map(|i| view.get(i)).collect();
        for sym in view.0.iter() {
            if let Symbol::Item(it) = sym {
                if it.index > n {
                    return None;
                }
            }
        }
        let ended = t_syms.iter().filter(|s| s.is_end()).count() as u32;

        if state.id == found_id {
            return Some((found(), AdvanceMask::advance_all(k)));
        }
        let hit = s_syms
            .iter()
            .filter_map(|s| s.item())
            .any(|x| t_syms.iter().filter_map(|t| t.item()).any(|y| x == y));
        if hit {
            return Some((found(), AdvanceMask::advance_all(k)));
        }

        let all_s: Vec<usize> = (0..rr).collect();
        if state.id == scanning_id {
            return Some(if ended == 0 {
                // sub-phase 1: T head 1 scans
                (scanning(), AdvanceMask::advancing(k, &[rr]))
            } else if ended == r {
                // flush the S heads to the end; no comparisons remain
                (scanning(), AdvanceMask::advancing(k, &all_s))
            } else if ended == 1 {
                // sub-phase 1 done: move every S head one step right
                (phase1(1), AdvanceMask::advancing(k, &all_s))
            } else {
                (scanning(), AdvanceMask::advance_all(k))
            });
        }

        // phase1@p
        let p = state.id as u32 + 1;
        if p < 1 || p > phase1_states {
            return None;
        }
        Some(if ended == 0 {
            // real phase 1: the pack of heads not yet parked moves right
            let pack: Vec<usize> =
                (1..=r).filter(|&i| (i - 1) * r + 1 > p).map(|i| i as usize - 1).collect();
            let next = if p < phase1_states { phase1(p + 1) } else { scanning() };
            (next, AdvanceMask::advancing(k, &pack))
        } else if ended == r {
            (scanning(), AdvanceMask::advancing(k, &all_s))
        } else if ended == p {
            // sub-phase p+1: T head p+1 scans
            (phase1(p), AdvanceMask::advancing(k, &[rr + p as usize]))
        } else if ended == p + 1 && ended < r {
            // sub-phase p+1 done: advance the S heads to their next posts
            (phase1(p + 1), AdvanceMask::advancing(k, &all_s))
        } else {
            (state.clone(), AdvanceMask::advance_all(k))
        })
    });

    let accepting: Arc<AcceptFn> = Arc::new(move |s: &State| s.id == scanning_id);
    Ok(make_automaton(params, StateSet::Explicit(states), start, accepting, delta)?)
}

/// A deliberately incorrect machine: it records, while its T head scans
/// T, only the items whose index lies in `remembered`, then compares each
/// S item against that partial record. Instances whose every common index
/// lies outside `remembered` are falsely accepted.
///
/// The record phase runs on T rather than S so that the machine's exit
/// configurations reveal nothing about the unrecorded indices; this is
/// what lets the fooling search exhibit the planted flaw.
pub fn build_crippled(n: u32, remembered: &IndexSet) -> Result<Automaton, BuilderError> {
    if !(1..=MAX_SUBSET_N).contains(&n) {
        return Err(BuilderError::InvalidSize { n, max: MAX_SUBSET_N });
    }
    if remembered.n() != n {
        return Err(BuilderError::InvalidSpec(format!(
            "remembered set is over n = {}, expected {}",
            remembered.n(),
            n
        )));
    }
    if remembered.len() == n {
        return Err(BuilderError::InvalidSpec(
            "remembered = {1..n} is the full-memory machine, not a crippled one".into(),
        ));
    }

    let f_mask: u64 = remembered
        .members()
        .map(|i| item_bit(DataItem::a(i)) | item_bit(DataItem::b(i)))
        .fold(0, |acc, b| acc | b);
    let declared_count = (1u128 << (2 * remembered.len())) + 1;
    let params = AutomatonParams::new(2 * n as u64, declared_count, 1, 0)?;

    let declared = StateSet::Symbolic {
        count: declared_count,
        member: Arc::new(move |s: &State| s.id == REJECTING_ID || s.id & !f_mask == 0),
    };

    let remembered = *remembered;
    let delta: Arc<DeltaFn> = Arc::new(move |state: &State, view: &SymbolView| {
        let k = view.len();
        if state.id == REJECTING_ID {
            return Some((rejecting_state(), AdvanceMask::advance_all(k)));
        }
        let bits = state.id;
        match (view.get(0), view.get(1)) {
            // record phase: the T head scans while the S head waits
            (_, Symbol::Item(y)) => {
                if y.index > n {
                    return None;
                }
                let next_bits = if remembered.contains(y.index) { bits | item_bit(y) } else { bits };
                Some((seen_state(next_bits, n), AdvanceMask::advancing(k, &[1])))
            }
            // compare phase: the S head scans against the partial record
            (Symbol::Item(x), Symbol::End) => {
                if x.index > n {
                    return None;
                }
                let next = if bits & item_bit(x) != 0 {
                    rejecting_state()
                } else {
                    seen_state(bits, n)
                };
                Some((next, AdvanceMask::advancing(k, &[0])))
            }
            (Symbol::End, Symbol::End) => Some((state.clone(), AdvanceMask::advance_all(k))),
        }
    });

    let accepting: Arc<AcceptFn> = Arc::new(|s: &State| s.id != REJECTING_ID);
    Ok(make_automaton(params, declared, seen_state(0, n), accepting, delta)?)
}

/// Number of distinct states observed across full runs on the given
/// input family. Always at most the declared set's size.
pub fn count_reachable_states<'a>(
    a: &Automaton,
    instances: impl IntoIterator<Item = (&'a Stream, &'a Stream)>,
) -> Result<usize, EngineError> {
    let mut seen = std::collections::HashSet::new();
    for (s, t) in instances {
        let result = run(a, s, t, true)?;
        let trace = result.trace.expect("trace was requested");
        for config in trace.configurations() {
            seen.insert(config.state.clone());
        }
    }
    Ok(seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disjointness::{
        all_index_sets, all_streams, build_instance, is_disjoint_oracle, IndexSet, LayoutSpec,
    };
    use crate::engine::run;

    fn agrees_with_oracle(a: &Automaton, s: &Stream, t: &Stream) -> bool {
        run(a, s, t, false).unwrap().accepted == is_disjoint_oracle(s, t)
    }

    #[test]
    fn trivial_agrees_with_oracle_exhaustively_n2() {
        let a = build_trivial(2).unwrap();
        for s in all_streams(2, 2) {
            for t in all_streams(2, 2) {
                assert!(agrees_with_oracle(&a, &s, &t), "S={s} T={t}");
            }
        }
    }

    #[test]
    fn trivial_rejects_a_shared_item() {
        let a = build_trivial(2).unwrap();
        let s = Stream::parse("a1 a2").unwrap();
        let t = Stream::parse("a2 b1").unwrap();
        assert!(!is_disjoint_oracle(&s, &t));
        assert!(!run(&a, &s, &t, false).unwrap().accepted);
    }

    #[test]
    fn trivial_declared_budget() {
        let a = build_trivial(2).unwrap();
        assert_eq!(a.params().m, 16);
        assert_eq!(a.states().count(), 12); // subsets of 4 items with <= 2 elements, plus rejecting
        assert!(a.states().count() <= a.params().m);
        assert!(matches!(build_trivial(0), Err(BuilderError::InvalidSize { .. })));
    }

    #[test]
    fn sqrt_rejects_non_square() {
        assert!(matches!(build_sqrt(3), Err(BuilderError::NotPerfectSquare { n: 3 })));
    }

    #[test]
    fn sqrt_declared_states_exact() {
        let a4 = build_sqrt(4).unwrap();
        assert_eq!(a4.states().count(), 4); // n + 2 - sqrt(n)
        assert_eq!(a4.params().m, 6);
        assert_eq!(a4.params().kf, 2);
        assert_eq!(a4.params().kb, 0);

        let a9 = build_sqrt(9).unwrap();
        assert_eq!(a9.states().count(), 8);
        assert_eq!(a9.params().kf, 3);

        let a1 = build_sqrt(1).unwrap();
        assert_eq!(a1.states().count(), 2);
    }

    #[test]
    fn sqrt_agrees_on_all_subset_instances_n4() {
        let a = build_sqrt(4).unwrap();
        for i1 in all_index_sets(4) {
            for i2 in all_index_sets(4) {
                let inst = build_instance(i1, i2, LayoutSpec::Reversed).unwrap();
                let accepted = run(&a, &inst.s, &inst.t, false).unwrap().accepted;
                assert_eq!(accepted, i2 == i1.complement(), "I1={i1} I2={i2}");
            }
        }
    }

    #[test]
    fn sqrt_agrees_on_every_length_1_stream_pair_n1() {
        let a = build_sqrt(1).unwrap();
        for s in all_streams(1, 1) {
            for t in all_streams(1, 1) {
                assert!(agrees_with_oracle(&a, &s, &t));
            }
        }
    }

    #[test]
    fn sqrt_accepts_disjoint_reversed_instance() {
        let a = build_sqrt(4).unwrap();
        let i1 = IndexSet::from_members(4, [1, 2]).unwrap();
        let inst = build_instance(i1, i1.complement(), LayoutSpec::Reversed).unwrap();
        assert!(is_disjoint_oracle(&inst.s, &inst.t));
        assert!(run(&a, &inst.s, &inst.t, false).unwrap().accepted);
    }

    #[test]
    fn sqrt_covers_every_position_pair_before_flush() {
        for n in [4u32, 9] {
            let a = build_sqrt(n).unwrap();
            let r = (n as f64).sqrt() as usize;
            // Content does not steer the head choreography on a disjoint
            // run, so one instance witnesses coverage for all of them.
            let i1 = IndexSet::from_members(n, [1]).unwrap();
            let inst = build_instance(i1, i1.complement(), LayoutSpec::Reversed).unwrap();
            let result = run(&a, &inst.s, &inst.t, true).unwrap();
            let trace = result.trace.unwrap();

            let mut covered = std::collections::HashSet::new();
            for config in trace.configurations() {
                if (r..2 * r).all(|i| config.positions[i] > n) {
                    continue; // flush: every T head has passed the stream
                }
                let t_live: Vec<u32> = (r..2 * r)
                    .map(|i| config.positions[i])
                    .filter(|&q| (1..=n).contains(&q))
                    .collect();
                for i in 0..r {
                    let p = config.positions[i];
                    if (1..=n).contains(&p) {
                        for &q in &t_live {
                            covered.insert((p, q));
                        }
                    }
                }
            }
            for p in 1..=n {
                for q in 1..=n {
                    assert!(covered.contains(&(p, q)), "n={n}: pair ({p},{q}) never jointly occupied");
                }
            }
        }
    }

    #[test]
    fn crippled_accepts_the_planted_false_instance() {
        let remembered = IndexSet::from_members(4, [1, 2]).unwrap();
        let a = build_crippled(4, &remembered).unwrap();
        let i1 = IndexSet::from_members(4, [3]).unwrap();
        let i2 = IndexSet::from_members(4, [1, 2, 3]).unwrap();
        let inst = build_instance(i1, i2, LayoutSpec::Reversed).unwrap();
        assert!(!is_disjoint_oracle(&inst.s, &inst.t), "a3 is common");
        assert!(run(&a, &inst.s, &inst.t, false).unwrap().accepted, "the starved machine misses it");
    }

    #[test]
    fn crippled_full_memory_is_rejected() {
        let full = IndexSet::from_members(4, [1, 2, 3, 4]).unwrap();
        assert!(matches!(build_crippled(4, &full), Err(BuilderError::InvalidSpec(_))));
    }

    #[test]
    fn crippled_errs_only_outside_remembered() {
        // Over every subset-family instance: the machine disagrees with
        // the oracle exactly when all common indices avoid `remembered`.
        for members in [vec![1u32], vec![2]] {
            let remembered = IndexSet::from_members(2, members).unwrap();
            let a = build_crippled(2, &remembered).unwrap();
            for i1 in all_index_sets(2) {
                for i2 in all_index_sets(2) {
                    let inst = build_instance(i1, i2, LayoutSpec::Reversed).unwrap();
                    let accepted = run(&a, &inst.s, &inst.t, false).unwrap().accepted;
                    let disjoint = is_disjoint_oracle(&inst.s, &inst.t);
                    let common_in_remembered =
                        (1..=2u32).any(|i| i1.item_at(i) == i2.item_at(i) && remembered.contains(i));
                    if disjoint {
                        assert!(accepted, "correct on disjoint inputs");
                    } else if common_in_remembered {
                        assert!(!accepted, "detected: a common index is remembered");
                    } else {
                        assert!(accepted, "errs when every common index is forgotten");
                    }
                }
            }
        }
    }

    #[test]
    fn reachable_state_counts() {
        let a = build_sqrt(4).unwrap();
        let instances: Vec<_> = all_index_sets(4)
            .flat_map(|i1| {
                all_index_sets(4).map(move |i2| {
                    let inst = build_instance(i1, i2, LayoutSpec::Reversed).unwrap();
                    (inst.s, inst.t)
                })
            })
            .collect();
        let refs: Vec<(&Stream, &Stream)> = instances.iter().map(|(s, t)| (s, t)).collect();
        let count = count_reachable_states(&a, refs).unwrap();
        assert!(count <= 4, "reachable {count} must stay within the declared 4");

        let t2 = build_trivial(2).unwrap();
        let pairs: Vec<_> = all_streams(2, 2)
            .flat_map(|s| all_streams(2, 2).map(move |t| (s.clone(), t)))
            .collect();
        let refs: Vec<(&Stream, &Stream)> = pairs.iter().map(|(s, t)| (s, t)).collect();
        let count = count_reachable_states(&t2, refs).unwrap();
        assert!(count <= 16);

        assert_eq!(count_reachable_states(&a, Vec::new()).unwrap(), 0);
    }
}
