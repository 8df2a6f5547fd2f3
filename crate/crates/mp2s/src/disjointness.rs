//! The two-stream set-disjointness problem over the fixed 2n-item domain
//! `D_n = {a_1, b_1, ..., a_n, b_n}`: a brute-force oracle, and the
//! adversarial subset-family instances used by the fooling machinery.
//!
//! For an index set `I ⊆ {1..n}`, the set `A^I = {a_i : i ∈ I} ∪
//! {b_i : i ∉ I}` has the property that `A^{I1}` and `A^{I2}` are disjoint
//! exactly when `I2` is the complement of `I1`. The instance `D(I1, I2)`
//! realizes `A^{I1}` on S in index order and `A^{I2}` on T either reversed
//! or permuted blockwise by the involution pi.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::model::{DataItem, Stream};

#[derive(Debug, Error)]
pub enum DisjError {
    #[error("instance size must satisfy 1 <= n <= {max}, got {n}")]
    InvalidSize { n: u32, max: u32 },

    #[error("block count {v1} does not divide n = {n}")]
    DivisibilityError { n: u32, v1: u32 },

    #[error("index sets have mismatched sizes: {0} vs {1}")]
    MismatchedSizes(u32, u32),
}

/// Largest instance size for index-set enumeration; bitmasks are u64.
pub const MAX_INDEX_SET_N: u32 = 60;

/// The domain `D_n` of `2n` distinct data items.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DisjDomain {
    pub n: u32,
}

impl DisjDomain {
    /// All `2n` items in index order: `a1, b1, a2, b2, ...`.
    pub fn items(&self) -> Vec<DataItem> {
        (1..=self.n)
            .flat_map(|i| [DataItem::a(i), DataItem::b(i)])
            .collect()
    }

    pub fn size(&self) -> u64 {
        2 * self.n as u64
    }

    pub fn contains(&self, item: DataItem) -> bool {
        item.index >= 1 && item.index <= self.n
    }
}

pub fn make_domain(n: u32) -> Result<DisjDomain, DisjError> {
    if n < 1 {
        return Err(DisjError::InvalidSize { n, max: u32::MAX });
    }
    Ok(DisjDomain { n })
}

/// A subset of `{1..n}`, stored as a bitmask (bit `i-1` set means
/// `i ∈ I`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    n: u32,
    bits: u64,
}

impl IndexSet {
    pub fn new(n: u32, bits: u64) -> Result<Self, DisjError> {
        if !(1..=MAX_INDEX_SET_N).contains(&n) {
            return Err(DisjError::InvalidSize { n, max: MAX_INDEX_SET_N });
        }
        debug_assert!(bits < (1u64 << n));
        Ok(IndexSet { n, bits: bits & mask_all(n) })
    }

    pub fn empty(n: u32) -> Result<Self, DisjError> {
        Self::new(n, 0)
    }

    pub fn from_members(n: u32, members: impl IntoIterator<Item = u32>) -> Result<Self, DisjError> {
        let mut bits = 0u64;
        for i in members {
            assert!((1..=n).contains(&i), "index {i} outside 1..={n}");
            bits |= 1 << (i - 1);
        }
        Self::new(n, bits)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, i: u32) -> bool {
        (1..=self.n).contains(&i) && self.bits & (1 << (i - 1)) != 0
    }

    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        (1..=self.n).filter(|&i| self.contains(i))
    }

    pub fn len(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    /// The complement `{1..n} \ I`.
    pub fn complement(&self) -> IndexSet {
        IndexSet { n: self.n, bits: !self.bits & mask_all(self.n) }
    }

    /// Parses the big-endian position mask format: `"1010"` = `{1, 3}`
    /// with position 1 leftmost. The mask length must equal `n`.
    pub fn parse_mask(n: u32, text: &str) -> Result<Self, String> {
        if text.len() != n as usize {
            return Err(format!("mask {text:?} has length {}, expected n = {n}", text.len()));
        }
        let mut bits = 0u64;
        for (pos, c) in text.chars().enumerate() {
            match c {
                '1' => bits |= 1 << pos,
                '0' => {}
                other => return Err(format!("bad mask character {other:?}")),
            }
        }
        IndexSet::new(n, bits).map_err(|e| e.to_string())
    }

    /// Renders the big-endian position mask format.
    pub fn to_mask_string(&self) -> String {
        (1..=self.n).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }

    /// Parses either a comma-separated member list (`"1,3"`) or, when the
    /// text is all 0/1 of length exactly `n`, a position mask.
    pub fn parse(n: u32, text: &str) -> Result<Self, String> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return IndexSet::empty(n).map_err(|e| e.to_string());
        }
        if trimmed.len() == n as usize && trimmed.chars().all(|c| c == '0' || c == '1') {
            return Self::parse_mask(n, trimmed);
        }
        let mut members = Vec::new();
        for tok in trimmed.split(',') {
            let i: u32 = tok.trim().parse().map_err(|_| format!("bad index {tok:?}"))?;
            if !(1..=n).contains(&i) {
                return Err(format!("index {i} outside 1..={n}"));
            }
            members.push(i);
        }
        Self::from_members(n, members).map_err(|e| e.to_string())
    }

    /// The set `A^I = {a_i : i ∈ I} ∪ {b_i : i ∉ I}`.
    pub fn a_set(&self) -> BTreeSet<DataItem> {
        (1..=self.n).map(|i| self.item_at(i)).collect()
    }

    /// The item of `A^I` with index `i`.
    pub fn item_at(&self, i: u32) -> DataItem {
        if self.contains(i) {
            DataItem::a(i)
        } else {
            DataItem::b(i)
        }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<String> = self.members().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

fn mask_all(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// All `2^n` index sets in ascending bitmask order.
pub fn all_index_sets(n: u32) -> impl Iterator<Item = IndexSet> {
    assert!((1..=25).contains(&n), "exhaustive index-set enumeration capped at n = 25");
    (0..(1u64 << n)).map(move |bits| IndexSet { n, bits })
}

/// All `(2n)^len` streams of the given length over `D_n`, in
/// lexicographic item order.
pub fn all_streams(n: u32, len: u32) -> impl Iterator<Item = Stream> {
    let items = DisjDomain { n }.items();
    let total = (items.len() as u64).checked_pow(len).expect("stream space too large");
    (0..total).map(move |mut code| {
        let picks = (0..len)
            .map(|_| {
                let item = items[(code % items.len() as u64) as usize];
                code /= items.len() as u64;
                item
            })
            .collect();
        Stream::new(picks)
    })
}

/// A uniformly random stream of the given length over `D_n`.
pub fn random_stream(rng: &mut impl Rng, n: u32, len: u32) -> Stream {
    let items = (0..len)
        .map(|_| {
            let index = rng.gen_range(1..=n);
            if rng.gen_bool(0.5) {
                DataItem::a(index)
            } else {
                DataItem::b(index)
            }
        })
        .collect();
    Stream::new(items)
}

/// True when the item sets of the two streams (ignoring order and
/// multiplicity) share no element. This is the reference oracle: a plain
/// set intersection, independent of any automaton.
pub fn is_disjoint_oracle(s: &Stream, t: &Stream) -> bool {
    let s_set: BTreeSet<DataItem> = s.items().iter().copied().collect();
    t.items().iter().all(|item| !s_set.contains(item))
}

/// The block-reversing involution of the permuted layout: `{1..n}` is
/// split into `v1` equal blocks, and element `(j-1)·n/v1 + s` maps to
/// `(v1-j)·n/v1 + s`, so block `B_j` maps onto block `B_{v1-j+1}` with
/// in-block offsets preserved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PermutationPi {
    pub n: u32,
    pub v1: u32,
}

impl PermutationPi {
    pub fn apply(&self, x: u32) -> u32 {
        debug_assert!((1..=self.n).contains(&x));
        let block_size = self.n / self.v1;
        let j = (x - 1) / block_size + 1;
        let s = x - (j - 1) * block_size;
        (self.v1 - j) * block_size + s
    }
}

pub fn permutation_pi(n: u32, v1: u32) -> Result<PermutationPi, DisjError> {
    if n < 1 {
        return Err(DisjError::InvalidSize { n, max: u32::MAX });
    }
    if v1 < 1 || !n.is_multiple_of(v1) {
        return Err(DisjError::DivisibilityError { n, v1 });
    }
    Ok(PermutationPi { n, v1 })
}

/// How the T stream of an instance orders its items.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutSpec {
    /// Item with index `i` sits at T position `n - i + 1`.
    Reversed,
    /// Item with index `i` sits at T position `pi(i)`.
    Pi { v1: u32 },
}

impl fmt::Display for LayoutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutSpec::Reversed => write!(f, "reversed"),
            LayoutSpec::Pi { v1 } => write!(f, "pi({v1})"),
        }
    }
}

/// The input pair `D(I1, I2) = (S^{I1}, T^{I2})`.
///
/// `S^{I1}` carries the item of `A^{I1}` with index `i` at position `i`;
/// `T^{I2}` carries its index-`i` item at the layout position.
#[derive(Clone, Debug)]
pub struct SubsetFamilyInstance {
    pub n: u32,
    pub i1: IndexSet,
    pub i2: IndexSet,
    pub layout: LayoutSpec,
    pub s: Stream,
    pub t: Stream,
}

impl SubsetFamilyInstance {
    /// T position that carries the item with the given index.
    pub fn t_position_of_index(&self, i: u32) -> u32 {
        match self.layout {
            LayoutSpec::Reversed => self.n - i + 1,
            LayoutSpec::Pi { v1 } => PermutationPi { n: self.n, v1 }.apply(i),
        }
    }

    /// Index of the item at the given T position. Both layouts are
    /// involutions, so this is the same map as `t_position_of_index`.
    pub fn index_at_t_position(&self, p: u32) -> u32 {
        self.t_position_of_index(p)
    }
}

pub fn build_instance(
    i1: IndexSet,
    i2: IndexSet,
    layout: LayoutSpec,
) -> Result<SubsetFamilyInstance, DisjError> {
    if i1.n() != i2.n() {
        return Err(DisjError::MismatchedSizes(i1.n(), i2.n()));
    }
    let n = i1.n();
    if let LayoutSpec::Pi { v1 } = layout {
        permutation_pi(n, v1)?;
    }
    let s = Stream::new((1..=n).map(|i| i1.item_at(i)).collect());
    let mut inst = SubsetFamilyInstance { n, i1, i2, layout, s, t: Stream::new(Vec::new()) };
    let mut t_items = vec![DataItem::a(1); n as usize];
    for i in 1..=n {
        let pos = inst.t_position_of_index(i);
        t_items[pos as usize - 1] = i2.item_at(i);
    }
    inst.t = Stream::new(t_items);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn domain_sizes() {
        assert_eq!(make_domain(1).unwrap().items().len(), 2);
        let d2 = make_domain(2).unwrap();
        assert_eq!(d2.size(), 4);
        assert_eq!(d2.items(), vec![DataItem::a(1), DataItem::b(1), DataItem::a(2), DataItem::b(2)]);
        assert!(matches!(make_domain(0), Err(DisjError::InvalidSize { .. })));
    }

    #[test]
    fn oracle_basic_cases() {
        let s = Stream::parse("a1 b2").unwrap();
        let t = Stream::parse("a2 b1").unwrap();
        assert!(is_disjoint_oracle(&s, &t));

        let s = Stream::parse("a1 a1").unwrap();
        let t = Stream::parse("a1 b1").unwrap();
        assert!(!is_disjoint_oracle(&s, &t), "repeats still witness a common token");
    }

    #[test]
    fn equivalence_a_sets_disjoint_iff_complement() {
        // Exhaustive over every pair of index sets up to n = 8.
        for n in 1..=8u32 {
            for i1 in all_index_sets(n) {
                let s = Stream::new(i1.a_set().into_iter().collect());
                for i2 in all_index_sets(n) {
                    let t = Stream::new(i2.a_set().into_iter().collect());
                    let disjoint = is_disjoint_oracle(&s, &t);
                    assert_eq!(disjoint, i2 == i1.complement(), "n={n} I1={i1} I2={i2}");
                }
            }
        }
    }

    #[test]
    fn instance_reversed_small() {
        let i1 = IndexSet::from_members(2, [1]).unwrap();
        let inst = build_instance(i1, i1, LayoutSpec::Reversed).unwrap();
        assert_eq!(inst.s, Stream::parse("a1 b2").unwrap());
        assert_eq!(inst.t, Stream::parse("b2 a1").unwrap());
    }

    #[test]
    fn instance_reversed_n4() {
        let i1 = IndexSet::from_members(4, [1, 2]).unwrap();
        let i2 = IndexSet::from_members(4, [3, 4]).unwrap();
        let inst = build_instance(i1, i2, LayoutSpec::Reversed).unwrap();
        assert_eq!(inst.s, Stream::parse("a1 a2 b3 b4").unwrap());
        assert_eq!(inst.t, Stream::parse("a4 a3 b2 b1").unwrap());
    }

    #[test]
    fn instance_all_b() {
        let empty = IndexSet::empty(4).unwrap();
        let inst = build_instance(empty, empty, LayoutSpec::Reversed).unwrap();
        assert_eq!(inst.s, Stream::parse("b1 b2 b3 b4").unwrap());
        assert_eq!(inst.t, Stream::parse("b4 b3 b2 b1").unwrap());
    }

    #[test]
    fn instance_item_set_ignores_layout() {
        let i1 = IndexSet::from_members(6, [2, 5]).unwrap();
        let i2 = IndexSet::from_members(6, [1, 4, 6]).unwrap();
        for layout in [LayoutSpec::Reversed, LayoutSpec::Pi { v1: 3 }, LayoutSpec::Pi { v1: 1 }] {
            let inst = build_instance(i1, i2, layout).unwrap();
            let s_set: BTreeSet<_> = inst.s.items().iter().copied().collect();
            let t_set: BTreeSet<_> = inst.t.items().iter().copied().collect();
            assert_eq!(s_set, i1.a_set());
            assert_eq!(t_set, i2.a_set());
        }
    }

    #[test]
    fn pi_spot_values() {
        let pi = permutation_pi(12, 3).unwrap();
        assert_eq!(pi.apply(1), 9);
        assert_eq!(pi.apply(5), 5);
        assert_eq!(pi.apply(12), 4);
    }

    #[test]
    fn pi_v1_one_is_identity() {
        let pi = permutation_pi(7, 1).unwrap();
        for x in 1..=7 {
            assert_eq!(pi.apply(x), x);
        }
    }

    #[test]
    fn pi_divisibility_is_required() {
        assert!(matches!(permutation_pi(8, 3), Err(DisjError::DivisibilityError { .. })));
        assert!(matches!(
            build_instance(
                IndexSet::empty(8).unwrap(),
                IndexSet::empty(8).unwrap(),
                LayoutSpec::Pi { v1: 3 }
            ),
            Err(DisjError::DivisibilityError { .. })
        ));
    }

    #[test]
    fn mask_parsing_round_trip() {
        let set = IndexSet::parse_mask(4, "1010").unwrap();
        assert_eq!(set.members().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(set.to_mask_string(), "1010");
        let csv = IndexSet::parse(4, "1,3").unwrap();
        assert_eq!(csv, set);
        assert_eq!(IndexSet::parse(4, "").unwrap(), IndexSet::empty(4).unwrap());
        assert!(IndexSet::parse(4, "5").is_err());
        assert!(IndexSet::parse_mask(4, "101").is_err());
    }

    #[test]
    fn stream_enumeration_counts() {
        assert_eq!(all_streams(2, 2).count(), 16);
        assert_eq!(all_index_sets(4).count(), 16);
    }

    proptest! {
        #[test]
        fn oracle_is_symmetric_and_order_invariant(
            s_items in proptest::collection::vec((1u32..=4, any::<bool>()), 0..6),
            t_items in proptest::collection::vec((1u32..=4, any::<bool>()), 0..6),
            seed in any::<u64>(),
        ) {
            let build = |items: &[(u32, bool)]| {
                Stream::new(items.iter().map(|&(i, a)| if a { DataItem::a(i) } else { DataItem::b(i) }).collect())
            };
            let s = build(&s_items);
            let t = build(&t_items);
            prop_assert_eq!(is_disjoint_oracle(&s, &t), is_disjoint_oracle(&t, &s));

            // Reordering either stream never changes the verdict.
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = s.items().to_vec();
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(is_disjoint_oracle(&Stream::new(shuffled), &t), is_disjoint_oracle(&s, &t));
        }

        #[test]
        fn instance_disjoint_iff_complement_at_larger_sizes(
            n in 8u32..=60,
            bits1 in any::<u64>(),
            bits2 in any::<u64>(),
            reversed in any::<bool>(),
        ) {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            let i1 = IndexSet::new(n, bits1 & mask).unwrap();
            let i2 = IndexSet::new(n, bits2 & mask).unwrap();
            let layout = if reversed {
                LayoutSpec::Reversed
            } else {
                let v1 = (1..=n).rev().find(|d| n % d == 0 && *d <= 4).unwrap();
                LayoutSpec::Pi { v1 }
            };
            let inst = build_instance(i1, i2, layout).unwrap();
            prop_assert_eq!(is_disjoint_oracle(&inst.s, &inst.t), i2 == i1.complement());
        }

        #[test]
        fn pi_is_an_involution_mapping_blocks_reversely(n_div in 1u32..=10, v1 in 1u32..=6) {
            let n = n_div * v1;
            let pi = permutation_pi(n, v1).unwrap();
            let block_size = n / v1;
            let mut seen = std::collections::BTreeSet::new();
            for x in 1..=n {
                let y = pi.apply(x);
                prop_assert!((1..=n).contains(&y));
                prop_assert_eq!(pi.apply(y), x);
                seen.insert(y);
                let j = (x - 1) / block_size + 1;
                let j_y = (y - 1) / block_size + 1;
                prop_assert_eq!(j_y, v1 - j + 1);
                prop_assert_eq!((x - 1) % block_size, (y - 1) % block_size);
            }
            prop_assert_eq!(seen.len() as u32, n);
        }
    }
}
