//! Machinery for exhibiting false accepts of under-resourced machines:
//! block partitions of the index space, the head-pair checking relation,
//! exit-configuration bucketing, the fooling-pair search, and the
//! head/memory trade-off inequality calculators.
//!
//! The search mirrors a splicing argument: two index sets `I != I'` whose
//! runs on `D(I, comp(I))` and `D(I', comp(I'))` agree outside some block
//! `Bhat` that no head pair ever checks, and whose exit configurations at
//! `Bhat` coincide, force the machine into the same final state on the
//! mixed instance `D(I, comp(I'))` — which is not disjoint. Witnesses are
//! validated by direct simulation of the mixed instance rather than by
//! literally splicing trace segments; the per-condition report explains
//! why the acceptance occurs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::disjointness::{
    all_index_sets, build_instance, is_disjoint_oracle, DisjError, IndexSet, LayoutSpec,
    SubsetFamilyInstance,
};
use crate::engine::{run, Configuration, EngineError, Trace};
use crate::model::{Automaton, HeadDirection, HeadId, StreamSide};

#[derive(Debug, Error)]
pub enum FoolboxError {
    #[error("block count {v} does not divide n = {n}")]
    DivisibilityError { n: u32, v: u32 },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("exhaustive enumeration capped at n = {max}, got n = {n}")]
    EnumerationTooLarge { n: u32, max: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Disj(#[from] DisjError),

    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Exhaustive fooling search is capped at this instance size.
pub const MAX_EXHAUSTIVE_N: u32 = 20;

/// A partition of `{1..n}` into `v1` consecutive blocks of size `n/v1`,
/// each split into `v2` consecutive subblocks of size `n/(v1·v2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub n: u32,
    pub v1: u32,
    pub v2: u32,
}

/// One subblock `B_j^{j'}` (1-based). With `v2 = 1` subblocks coincide
/// with blocks and the subblock component is always 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockRef {
    pub block: u32,
    pub subblock: u32,
}

impl BlockPartition {
    pub fn v(&self) -> u32 {
        self.v1 * self.v2
    }

    pub fn block_size(&self) -> u32 {
        self.n / self.v1
    }

    pub fn subblock_size(&self) -> u32 {
        self.n / self.v()
    }

    /// Block `B_j` holding index `i`.
    pub fn block_of(&self, i: u32) -> u32 {
        debug_assert!((1..=self.n).contains(&i));
        (i - 1) / self.block_size() + 1
    }

    /// Subblock `B_j^{j'}` holding index `i`.
    pub fn subblock_of(&self, i: u32) -> BlockRef {
        let block = self.block_of(i);
        let offset = (i - 1) % self.block_size();
        BlockRef { block, subblock: offset / self.subblock_size() + 1 }
    }

    /// Indices of block `B_j`.
    pub fn block_indices(&self, j: u32) -> std::ops::RangeInclusive<u32> {
        let size = self.block_size();
        ((j - 1) * size + 1)..=(j * size)
    }

    /// Indices of subblock `B_j^{j'}`.
    pub fn indices(&self, bref: BlockRef) -> std::ops::RangeInclusive<u32> {
        let start =
            (bref.block - 1) * self.block_size() + (bref.subblock - 1) * self.subblock_size() + 1;
        start..=(start + self.subblock_size() - 1)
    }

    /// Bitmask of the indices of a subblock.
    pub fn index_mask(&self, bref: BlockRef) -> u64 {
        self.indices(bref).fold(0u64, |acc, i| acc | (1 << (i - 1)))
    }

    /// All subblocks, ordered by block then subblock.
    pub fn bhats(&self) -> impl Iterator<Item = BlockRef> + '_ {
        (1..=self.v1)
            .flat_map(move |block| (1..=self.v2).map(move |subblock| BlockRef { block, subblock }))
    }

    /// Display label for a subblock: `B2` when `v2 = 1`, else `B2^1`.
    pub fn label(&self, bref: BlockRef) -> String {
        if self.v2 == 1 {
            format!("B{}", bref.block)
        } else {
            format!("B{}^{}", bref.block, bref.subblock)
        }
    }
}

pub fn partition_blocks(n: u32, v1: u32, v2: Option<u32>) -> Result<BlockPartition, FoolboxError> {
    let v2 = v2.unwrap_or(1);
    if v1 < 1 || v2 < 1 {
        return Err(FoolboxError::InvalidParams("block counts must be >= 1".into()));
    }
    let v = v1
        .checked_mul(v2)
        .ok_or_else(|| FoolboxError::InvalidParams("block count overflow".into()))?;
    if n == 0 || !n.is_multiple_of(v) {
        return Err(FoolboxError::DivisibilityError { n, v });
    }
    Ok(BlockPartition { n, v1, v2 })
}

/// A pair of one S head and one T head. Mixed pairs (exactly one backward
/// head) are the ones charged against subblocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct HeadPair {
    pub on_s: HeadId,
    pub on_t: HeadId,
}

impl HeadPair {
    pub fn mixed(&self) -> bool {
        self.on_s.dir != self.on_t.dir
    }
}

impl fmt::Display for HeadPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.on_s, self.on_t)
    }
}

/// Blocks (and, for mixed pairs, subblocks) one head pair checked during
/// a run: moments where both heads sat on elements whose indices share a
/// block (resp. subblock).
#[derive(Clone, Debug)]
pub struct PairChecks {
    pub pair: HeadPair,
    pub blocks: BTreeSet<u32>,
    pub subblocks: BTreeSet<BlockRef>,
}

/// Checking-relation summary of one run, per head pair.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub partition: BlockPartition,
    pub pairs: Vec<PairChecks>,
}

impl CheckReport {
    /// Subblocks eligible as the distinguished `Bhat`: the containing
    /// block is unchecked by every non-mixed pair and the subblock is
    /// unchecked by every mixed pair. Such a subblock is never jointly
    /// occupied by any pair at all: a non-mixed pair inside it would have
    /// checked the containing block.
    pub fn unchecked_bhats(&self) -> Vec<BlockRef> {
        let mut blocked: BTreeSet<u32> = BTreeSet::new();
        let mut sub_blocked: BTreeSet<BlockRef> = BTreeSet::new();
        for pc in &self.pairs {
            if pc.pair.mixed() {
                sub_blocked.extend(pc.subblocks.iter().copied());
            } else {
                blocked.extend(pc.blocks.iter().copied());
            }
        }
        self.partition
            .bhats()
            .filter(|b| !blocked.contains(&b.block) && !sub_blocked.contains(b))
            .collect()
    }
}

/// Index under a head, through the instance layout: identity on S,
/// reversal or the block permutation on T. `None` for heads past their
/// stream (the end marker is not an element).
fn index_under(head: HeadId, pos: u32, instance: &SubsetFamilyInstance) -> Option<u32> {
    if pos < 1 || pos > instance.n {
        return None;
    }
    Some(match head.side {
        StreamSide::S => pos,
        StreamSide::T => instance.index_at_t_position(pos),
    })
}

/// Computes the checking relation of a completed run: for every head pair
/// and every configuration, a block (subblock, for mixed pairs) is marked
/// when both heads sit on elements whose indices fall inside it.
pub fn analyze_checks(
    trace: &Trace,
    instance: &SubsetFamilyInstance,
    partition: &BlockPartition,
) -> Result<CheckReport, FoolboxError> {
    if trace.s_len != instance.s.len() || trace.t_len != instance.t.len() {
        return Err(FoolboxError::LayoutMismatch(format!(
            "trace streams are {}x{}, instance streams are {}x{}",
            trace.s_len,
            trace.t_len,
            instance.s.len(),
            instance.t.len()
        )));
    }
    if instance.n != partition.n {
        return Err(FoolboxError::LayoutMismatch(format!(
            "instance n = {} but partition n = {}",
            instance.n, partition.n
        )));
    }

    let heads = trace.params.heads();
    let s_heads: Vec<(usize, HeadId)> = heads
        .iter()
        .enumerate()
        .filter(|(_, h)| h.side == StreamSide::S)
        .map(|(i, h)| (i, *h))
        .collect();
    let t_heads: Vec<(usize, HeadId)> = heads
        .iter()
        .enumerate()
        .filter(|(_, h)| h.side == StreamSide::T)
        .map(|(i, h)| (i, *h))
        .collect();

    let mut pairs: Vec<PairChecks> = s_heads
        .iter()
        .flat_map(|&(_, hs)| {
            t_heads.iter().map(move |&(_, ht)| PairChecks {
                pair: HeadPair { on_s: hs, on_t: ht },
                blocks: BTreeSet::new(),
                subblocks: BTreeSet::new(),
            })
        })
        .collect();

    for config in trace.configurations() {
        let s_idx: Vec<Option<u32>> = s_heads
            .iter()
            .map(|&(g, h)| index_under(h, config.positions[g], instance))
            .collect();
        let t_idx: Vec<Option<u32>> = t_heads
            .iter()
            .map(|&(g, h)| index_under(h, config.positions[g], instance))
            .collect();
        let mut slot = 0;
        for &i in &s_idx {
            for &ip in &t_idx {
                let pc = &mut pairs[slot];
                slot += 1;
                let (Some(i), Some(ip)) = (i, ip) else { continue };
                if partition.block_of(i) == partition.block_of(ip) {
                    pc.blocks.insert(partition.block_of(i));
                }
                if pc.pair.mixed() && partition.subblock_of(i) == partition.subblock_of(ip) {
                    pc.subblocks.insert(partition.subblock_of(i));
                }
            }
        }
    }

    Ok(CheckReport { partition: *partition, pairs })
}

/// Per head, the configuration captured the moment that head had just
/// left the last element of the distinguished subblock it can access.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExitConfigTuple(pub Vec<Configuration>);

/// Whether a head at `pos` has already passed every position of `Bhat`
/// reachable in its direction.
fn past_bhat(
    head: HeadId,
    pos: u32,
    bhat: BlockRef,
    instance: &SubsetFamilyInstance,
    partition: &BlockPartition,
) -> bool {
    let positions = partition.indices(bhat).map(|i| match head.side {
        StreamSide::S => i,
        StreamSide::T => instance.t_position_of_index(i),
    });
    match head.dir {
        HeadDirection::Forward => {
            let last = positions.max().expect("subblocks are nonempty");
            pos > last
        }
        HeadDirection::Backward => {
            let first = positions.min().expect("subblocks are nonempty");
            pos < first
        }
    }
}

/// Captures, for each head in canonical order, the configuration right
/// after the step in which that head advanced past the last position of
/// `Bhat` reachable in its direction.
pub fn exit_config_tuple(
    trace: &Trace,
    bhat: BlockRef,
    instance: &SubsetFamilyInstance,
    partition: &BlockPartition,
) -> Result<ExitConfigTuple, FoolboxError> {
    let heads = trace.params.heads();
    let mut tuple = Vec::with_capacity(heads.len());
    for (g, head) in heads.iter().enumerate() {
        let found = trace
            .configurations()
            .find(|config| past_bhat(*head, config.positions[g], bhat, instance, partition));
        match found {
            Some(config) => tuple.push(config.clone()),
            None => {
                return Err(FoolboxError::IncompleteTrace(format!(
                    "head {head} never left {}",
                    partition.label(bhat)
                )))
            }
        }
    }
    Ok(ExitConfigTuple(tuple))
}

/// Pass/fail of the three splice conditions for a candidate pair.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpliceReport {
    /// (a) the two index sets differ only inside `Bhat`
    #[serde(rename = "differOnlyInBhat")]
    pub differ_only_in_bhat: bool,
    /// (b) no head pair ever jointly occupies `Bhat` in either run
    #[serde(rename = "bhatUnchecked")]
    pub bhat_unchecked: bool,
    /// (c) the exit-configuration tuples of the two runs coincide
    #[serde(rename = "exitConfigsEqual")]
    pub exit_configs_equal: bool,
}

impl SpliceReport {
    pub fn all_pass(&self) -> bool {
        self.differ_only_in_bhat && self.bhat_unchecked && self.exit_configs_equal
    }
}

/// Raw co-occupancy: does any (S head, T head) pair ever sit on `Bhat`
/// elements simultaneously?
fn bhat_co_occupied(
    trace: &Trace,
    bhat: BlockRef,
    instance: &SubsetFamilyInstance,
    partition: &BlockPartition,
) -> bool {
    let heads = trace.params.heads();
    let in_bhat = |head: HeadId, pos: u32| {
        index_under(head, pos, instance).is_some_and(|i| partition.subblock_of(i) == bhat)
    };
    trace.configurations().any(|config| {
        let s_on = heads
            .iter()
            .enumerate()
            .any(|(g, h)| h.side == StreamSide::S && in_bhat(*h, config.positions[g]));
        let t_on = heads
            .iter()
            .enumerate()
            .any(|(g, h)| h.side == StreamSide::T && in_bhat(*h, config.positions[g]));
        s_on && t_on
    })
}

/// Checks the three splice conditions for the runs of one automaton on
/// `D(I, comp(I))` and `D(I', comp(I'))`.
pub fn splice_conditions(
    run_i: &Trace,
    inst_i: &SubsetFamilyInstance,
    run_iprime: &Trace,
    inst_iprime: &SubsetFamilyInstance,
    bhat: BlockRef,
    partition: &BlockPartition,
) -> Result<SpliceReport, FoolboxError> {
    let bhat_mask = partition.index_mask(bhat);
    let differ = inst_i.i1.bits() ^ inst_iprime.i1.bits();
    let differ_only_in_bhat = differ & !bhat_mask == 0;

    let bhat_unchecked = !bhat_co_occupied(run_i, bhat, inst_i, partition)
        && !bhat_co_occupied(run_iprime, bhat, inst_iprime, partition);

    let exit_configs_equal = exit_config_tuple(run_i, bhat, inst_i, partition)?
        == exit_config_tuple(run_iprime, bhat, inst_iprime, partition)?;

    Ok(SpliceReport { differ_only_in_bhat, bhat_unchecked, exit_configs_equal })
}

/// Which adversarial layout the search builds its instances in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchLayout {
    Reversed,
    Pi,
}

impl fmt::Display for SearchLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchLayout::Reversed => write!(f, "reversed"),
            SearchLayout::Pi => write!(f, "pi"),
        }
    }
}

/// How the index sets are enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enumeration {
    Exhaustive,
    Sample { count: u64, seed: u64 },
}

/// A demonstrated false accept: `I != I'` drawn from one bucket, with the
/// run of the automaton on `D(I, comp(I'))` accepting an input whose item
/// sets intersect.
#[derive(Clone, Debug)]
pub struct FoolingWitness {
    pub i: IndexSet,
    pub iprime: IndexSet,
    pub bhat: BlockRef,
    pub accepted: bool,
    pub oracle_disjoint: bool,
    pub splice: SpliceReport,
    pub spliced_steps: u64,
}

/// Stage counts of the bucketing, mirroring the averaging stages of the
/// splicing argument: `x0` counts runs leaving the most frequently
/// unchecked subblock unchecked; `x1` the largest same-outside-part group
/// within it; `x2` the largest full bucket within that group.
#[derive(Clone, Debug, Serialize)]
pub struct BucketStats {
    pub enumerated: u64,
    #[serde(rename = "runsWithUnchecked")]
    pub runs_with_unchecked: u64,
    pub buckets: u64,
    #[serde(rename = "maxBucket")]
    pub max_bucket: u64,
    pub x0: u64,
    pub x1: u64,
    pub x2: u64,
    #[serde(rename = "x0Bhat")]
    pub x0_bhat: Option<String>,
    #[serde(rename = "spliceSimulations")]
    pub splice_simulations: u64,
    #[serde(rename = "spliceRejections")]
    pub splice_rejections: u64,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Full outcome of a fooling search.
#[derive(Clone, Debug)]
pub struct FoolingReport {
    pub n: u32,
    pub layout: SearchLayout,
    pub enumeration: Enumeration,
    pub partition: BlockPartition,
    pub kf: u32,
    pub kb: u32,
    pub stats: BucketStats,
    pub witness: Option<FoolingWitness>,
}

impl FoolingReport {
    /// The machine-readable report: fields `params`, `layout`,
    /// `enumeration`, `partition`, `bucketStats`, `witness`.
    pub fn to_json(&self) -> serde_json::Value {
        let enumeration = match self.enumeration {
            Enumeration::Exhaustive => json!("exhaustive"),
            Enumeration::Sample { count, seed } => json!({"sample": {"count": count, "seed": seed}}),
        };
        let witness = match &self.witness {
            None => serde_json::Value::Null,
            Some(w) => json!({
                "I": w.i.to_mask_string(),
                "Iprime": w.iprime.to_mask_string(),
                "bhat": self.partition.label(w.bhat),
                "accepted": w.accepted,
                "oracle": w.oracle_disjoint,
                "spliceReport": w.splice,
            }),
        };
        json!({
            "params": {"n": self.n, "kf": self.kf, "kb": self.kb},
            "layout": self.layout.to_string(),
            "enumeration": enumeration,
            "partition": {"v1": self.partition.v1, "v2": self.partition.v2, "v": self.partition.v()},
            "bucketStats": self.stats,
            "witness": witness,
        })
    }
}

fn largest_divisor_at_most(n: u32, cap: u32) -> u32 {
    (1..=cap.min(n)).rev().find(|d| n.is_multiple_of(*d)).expect("1 divides n")
}

/// Partition parameters derived from the head counts — reversed layout:
/// `v = kf² + 1` blocks; permuted layout: `v1 = kf² + kb² + 1` blocks of
/// `v2 = 2·kf·kb + 1` subblocks — truncated to divisors of `n` so blocks
/// stay equal-sized.
pub fn derive_partition(n: u32, kf: u32, kb: u32, layout: SearchLayout) -> BlockPartition {
    match layout {
        SearchLayout::Reversed => {
            let v_raw = kf * kf + 1;
            BlockPartition { n, v1: largest_divisor_at_most(n, v_raw), v2: 1 }
        }
        SearchLayout::Pi => {
            let v1 = largest_divisor_at_most(n, kf * kf + kb * kb + 1);
            let v2 = largest_divisor_at_most(n / v1, 2 * kf * kb + 1);
            BlockPartition { n, v1, v2 }
        }
    }
}

/// Runs the bucketing fooling search.
///
/// Every enumerated `I` is simulated on `D(I, comp(I))`; `I` is inserted
/// into one bucket per unchecked subblock, keyed by the subblock, the
/// part of `I` outside it, and the exit-configuration tuple. Buckets with
/// two or more members are candidate fooling pairs, each validated by
/// directly simulating the mixed instance.
pub fn fooling_search(
    a: &Automaton,
    n: u32,
    layout: SearchLayout,
    enumeration: Enumeration,
) -> Result<FoolingReport, FoolboxError> {
    let params = a.params();
    if params.domain_size != 2 * n as u64 {
        return Err(FoolboxError::InvalidParams(format!(
            "automaton domain has {} items, expected 2n = {}",
            params.domain_size,
            2 * n
        )));
    }
    if n < 1 || n > crate::disjointness::MAX_INDEX_SET_N {
        return Err(FoolboxError::InvalidParams(format!(
            "fooling search needs 1 <= n <= {}, got {n}",
            crate::disjointness::MAX_INDEX_SET_N
        )));
    }
    let partition = derive_partition(n, params.kf, params.kb, layout);
    let layout_spec = match layout {
        SearchLayout::Reversed => LayoutSpec::Reversed,
        SearchLayout::Pi => LayoutSpec::Pi { v1: partition.v1 },
    };

    let index_sets: Vec<IndexSet> = match enumeration {
        Enumeration::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(FoolboxError::EnumerationTooLarge { n, max: MAX_EXHAUSTIVE_N });
            }
            all_index_sets(n).collect()
        }
        Enumeration::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: BTreeSet<u64> = BTreeSet::new();
            for _ in 0..count {
                picked.insert(rng.gen::<u64>() & ((1u64 << n) - 1));
            }
            picked.into_iter().map(|bits| IndexSet::new(n, bits).expect("bits fit n")).collect()
        }
    };

    let run_instance =
        |i: IndexSet, i2: IndexSet| -> Result<(SubsetFamilyInstance, Trace), FoolboxError> {
            let inst = build_instance(i, i2, layout_spec)?;
            let result = run(a, &inst.s, &inst.t, true)?;
            Ok((inst, result.trace.expect("trace was requested")))
        };

    type Key = (BlockRef, u64, ExitConfigTuple);
    let mut buckets: BTreeMap<Key, Vec<IndexSet>> = BTreeMap::new();
    let mut per_bhat: BTreeMap<BlockRef, u64> = BTreeMap::new();
    let mut runs_with_unchecked = 0u64;

    for &i in &index_sets {
        let (inst, trace) = run_instance(i, i.complement())?;
        let checks = analyze_checks(&trace, &inst, &partition)?;
        let unchecked = checks.unchecked_bhats();
        if !unchecked.is_empty() {
            runs_with_unchecked += 1;
        }
        for bhat in unchecked {
            *per_bhat.entry(bhat).or_insert(0) += 1;
            let ihat = i.bits() & !partition.index_mask(bhat);
            let tuple = exit_config_tuple(&trace, bhat, &inst, &partition)?;
            buckets.entry((bhat, ihat, tuple)).or_default().push(i);
        }
    }

    // Stage counts over the canonical maximizers (ties resolved toward
    // the smallest subblock / outside part).
    let x0_entry = per_bhat.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
    let (x0_bhat, x0) = match x0_entry {
        Some((&bhat, &count)) => (Some(bhat), count),
        None => (None, 0),
    };
    let (mut x1, mut x2) = (0u64, 0u64);
    if let Some(bhat) = x0_bhat {
        let mut by_ihat: BTreeMap<u64, u64> = BTreeMap::new();
        for ((b, ihat, _), members) in &buckets {
            if *b == bhat {
                *by_ihat.entry(*ihat).or_insert(0) += members.len() as u64;
            }
        }
        if let Some((&ihat, &count)) = by_ihat.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
            x1 = count;
            x2 = buckets
                .iter()
                .filter(|((b, ih, _), _)| *b == bhat && *ih == ihat)
                .map(|(_, members)| members.len() as u64)
                .max()
                .unwrap_or(0);
        }
    }

    let mut splice_simulations = 0u64;
    let mut splice_rejections = 0u64;
    let mut witness: Option<FoolingWitness> = None;

    'search: for ((bhat, _, _), members) in &buckets {
        if members.len() < 2 {
            continue;
        }
        let mut sorted = members.clone();
        sorted.sort();
        for a_idx in 0..sorted.len() {
            for b_idx in 0..sorted.len() {
                if a_idx == b_idx {
                    continue;
                }
                let (i, iprime) = (sorted[a_idx], sorted[b_idx]);
                let mixed = build_instance(i, iprime.complement(), layout_spec)?;
                let result = run(a, &mixed.s, &mixed.t, false)?;
                splice_simulations += 1;
                let oracle_disjoint = is_disjoint_oracle(&mixed.s, &mixed.t);
                if result.accepted && !oracle_disjoint {
                    let (inst_i, trace_i) = run_instance(i, i.complement())?;
                    let (inst_ip, trace_ip) = run_instance(iprime, iprime.complement())?;
                    let splice = splice_conditions(
                        &trace_i, &inst_i, &trace_ip, &inst_ip, *bhat, &partition,
                    )?;
                    // members of one bucket satisfy (a), (b), (c) by key
                    // construction
                    debug_assert!(splice.all_pass());
                    witness = Some(FoolingWitness {
                        i,
                        iprime,
                        bhat: *bhat,
                        accepted: true,
                        oracle_disjoint,
                        splice,
                        spliced_steps: result.steps,
                    });
                    break 'search;
                }
                splice_rejections += 1;
            }
        }
    }

    let vacuous = runs_with_unchecked == 0;
    let stats = BucketStats {
        enumerated: index_sets.len() as u64,
        runs_with_unchecked,
        buckets: buckets.len() as u64,
        max_bucket: buckets.values().map(|m| m.len() as u64).max().unwrap_or(0),
        x0,
        x1,
        x2,
        x0_bhat: x0_bhat.map(|b| partition.label(b)),
        splice_simulations,
        splice_rejections,
        vacuous,
        reason: vacuous.then(|| {
            "no unchecked block exists for any enumerated index set, so no buckets form".into()
        }),
    };

    Ok(FoolingReport {
        n,
        layout,
        enumeration,
        partition,
        kf: params.kf,
        kb: params.kb,
        stats,
        witness,
    })
}

/// Which lower-bound inequality to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    /// Forward heads only: `v = kf² + 1`, requires `kb = 0`.
    Forward,
    /// Forward and backward heads: `v = (kf² + kb² + 1)·(2·kf·kb + 1)`.
    General,
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundMode::Forward => write!(f, "forward"),
            BoundMode::General => write!(f, "general"),
        }
    }
}

/// Evaluation of `k²·v·lg(n+1) + k·v·lg m + v·(1 + lg v) <= n`. When the
/// inequality holds, no automaton with these resources solves the
/// disjointness problem at size `n`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub mode: String,
    pub n: u64,
    pub m_log2: f64,
    pub kf: u32,
    pub kb: u32,
    pub k: u32,
    pub v: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v1: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v2: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(rename = "ruledOut")]
    pub ruled_out: bool,
    pub margin: f64,
}

/// Evaluates the trade-off inequality in double precision. `m_log2` is
/// `lg m`, so astronomically large state budgets stay representable.
pub fn lower_bound_inequality(
    n: u64,
    m_log2: f64,
    kf: u32,
    kb: u32,
    mode: BoundMode,
) -> Result<BoundsReport, FoolboxError> {
    if n < 1 {
        return Err(FoolboxError::InvalidParams("n must be >= 1".into()));
    }
    if !m_log2.is_finite() || m_log2 < 0.0 {
        return Err(FoolboxError::InvalidParams("lg m must be finite and >= 0 (m >= 1)".into()));
    }
    if mode == BoundMode::Forward && kb != 0 {
        return Err(FoolboxError::InvalidParams("forward mode requires kb = 0".into()));
    }

    let k = 2 * (kf as u64 + kb as u64);
    let (v, v1, v2) = match mode {
        BoundMode::Forward => ((kf as u64) * (kf as u64) + 1, None, None),
        BoundMode::General => {
            let v1 = (kf as u64) * (kf as u64) + (kb as u64) * (kb as u64) + 1;
            let v2 = 2 * (kf as u64) * (kb as u64) + 1;
            (v1 * v2, Some(v1), Some(v2))
        }
    };

    let kf64 = k as f64;
    let vf64 = v as f64;
    let lhs = kf64 * kf64 * vf64 * ((n + 1) as f64).log2()
        + kf64 * vf64 * m_log2
        + vf64 * (1.0 + vf64.log2());
    let rhs = n as f64;

    Ok(BoundsReport {
        mode: mode.to_string(),
        n,
        m_log2,
        kf,
        kb,
        k: k as u32,
        v,
        v1,
        v2,
        lhs,
        rhs,
        ruled_out: lhs <= rhs,
        margin: rhs - lhs,
    })
}

/// One sampled point of the closed-form sufficient condition: for large
/// `n`, any machine with `4·kf <= (n / lg n)^{1/4}` and
/// `lg m <= n / (4·kf·(kf² + 1))` is ruled out.
#[derive(Clone, Debug, Serialize)]
pub struct RemarkEntry {
    pub n: u64,
    pub kf: u32,
    #[serde(rename = "conditionMet")]
    pub condition_met: bool,
    #[serde(rename = "mLog2Max")]
    pub m_log2_max: f64,
    #[serde(rename = "ruledOut")]
    pub ruled_out: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemarkSmallest {
    pub kf: u32,
    /// Smallest power of two `n` at which the condition holds and the
    /// inequality rules the machine out, if one exists up to `2^26`.
    #[serde(rename = "smallestN")]
    pub smallest_n: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemarkReport {
    pub entries: Vec<RemarkEntry>,
    pub smallest: Vec<RemarkSmallest>,
}

fn remark_condition(n: u64, kf: u32) -> bool {
    if n < 2 || kf < 1 {
        return false;
    }
    let nf = n as f64;
    4.0 * kf as f64 <= (nf / nf.log2()).powf(0.25)
}

fn remark_m_log2_max(n: u64, kf: u32) -> f64 {
    n as f64 / (4.0 * kf as f64 * ((kf as f64) * (kf as f64) + 1.0))
}

/// Evaluates the inequality at each sampled `(n, kf)` with the maximal
/// admissible `lg m`, and reports the smallest power-of-two `n` per head
/// count at which the closed form starts holding.
pub fn remark_consistency(samples: &[(u64, u32)]) -> Result<RemarkReport, FoolboxError> {
    let mut entries = Vec::new();
    for &(n, kf) in samples {
        let m_log2_max = remark_m_log2_max(n, kf);
        let report = lower_bound_inequality(n, m_log2_max.max(0.0), kf, 0, BoundMode::Forward)?;
        entries.push(RemarkEntry {
            n,
            kf,
            condition_met: remark_condition(n, kf),
            m_log2_max,
            ruled_out: report.ruled_out,
            margin: report.margin,
        });
    }

    let mut kfs: Vec<u32> = samples.iter().map(|&(_, kf)| kf).collect();
    kfs.sort_unstable();
    kfs.dedup();
    let mut smallest = Vec::new();
    for kf in kfs {
        let mut found = None;
        for exp in 1..=26u32 {
            let n = 1u64 << exp;
            if remark_condition(n, kf) {
                let report =
                    lower_bound_inequality(n, remark_m_log2_max(n, kf), kf, 0, BoundMode::Forward)?;
                if report.ruled_out {
                    found = Some(n);
                    break;
                }
            }
        }
        smallest.push(RemarkSmallest { kf, smallest_n: found });
    }

    Ok(RemarkReport { entries, smallest })
}
