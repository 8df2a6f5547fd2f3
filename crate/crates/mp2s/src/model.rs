//! The machine model: data items, streams, head layout, states, and the
//! deterministic transition mapping.
//!
//! An automaton with parameters `(D, m, kf, kb)` has `kf` forward and `kb`
//! backward heads on each of two input streams and at most `m` states.
//! Each step, the transition mapping reads the symbol under every head
//! (a data item, or `end` once the head has passed its stream) and decides
//! the next state plus which heads to advance.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which of the two input streams a head sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreamSide {
    S,
    T,
}

impl fmt::Display for StreamSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamSide::S => write!(f, "S"),
            StreamSide::T => write!(f, "T"),
        }
    }
}

/// Scan direction of a head. Forward heads move left to right, backward
/// heads right to left; neither ever reverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeadDirection {
    Forward,
    Backward,
}

/// One of the two item kinds in the disjointness domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemKind {
    A,
    B,
}

/// A data item `a_i` or `b_i`. Rendered `a7` / `b7`.
///
/// The model treats items as opaque equatable tokens; only the
/// disjointness layer interprets the kind/index structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataItem {
    pub kind: ItemKind,
    pub index: u32,
}

impl DataItem {
    pub fn a(index: u32) -> Self {
        DataItem { kind: ItemKind::A, index }
    }

    pub fn b(index: u32) -> Self {
        DataItem { kind: ItemKind::B, index }
    }
}

impl fmt::Display for DataItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            ItemKind::A => 'a',
            ItemKind::B => 'b',
        };
        write!(f, "{}{}", k, self.index)
    }
}

impl FromStr for DataItem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('a') => ItemKind::A,
            Some('b') => ItemKind::B,
            _ => return Err(format!("bad data item token: {s:?}")),
        };
        let index: u32 = chars
            .as_str()
            .parse()
            .map_err(|_| format!("bad data item token: {s:?}"))?;
        if index == 0 {
            return Err(format!("data item index must be >= 1: {s:?}"));
        }
        Ok(DataItem { kind, index })
    }
}

/// A finite read-only stream of data items with 1-based positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    items: Vec<DataItem>,
}

impl Stream {
    pub fn new(items: Vec<DataItem>) -> Self {
        Stream { items }
    }

    pub fn len(&self) -> u32 {
        self.items.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Item at 1-based position `p`, or `None` outside `1..=len`.
    pub fn get(&self, p: u32) -> Option<DataItem> {
        if p == 0 {
            return None;
        }
        self.items.get(p as usize - 1).copied()
    }

    pub fn items(&self) -> &[DataItem] {
        &self.items
    }

    /// Parses the whitespace-separated stream file format (`a1 b2 a3 ...`).
    pub fn parse(text: &str) -> Result<Self, String> {
        let items = text
            .split_whitespace()
            .map(DataItem::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Stream { items })
    }

    /// Renders the stream in the stream file format.
    pub fn to_text(&self) -> String {
        let toks: Vec<String> = self.items.iter().map(|i| i.to_string()).collect();
        toks.join(" ")
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_text().replace(' ', ", "))
    }
}

/// Resource parameters of an automaton: domain size, state budget `m`, and
/// per-stream head counts `kf` (forward) and `kb` (backward).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonParams {
    pub domain_size: u64,
    pub m: u128,
    pub kf: u32,
    pub kb: u32,
}

impl AutomatonParams {
    pub fn new(domain_size: u64, m: u128, kf: u32, kb: u32) -> Result<Self, ModelError> {
        if m < 1 {
            return Err(ModelError::InvalidParams("state budget m must be >= 1".into()));
        }
        Ok(AutomatonParams { domain_size, m, kf, kb })
    }

    /// Total head count `k = 2 kf + 2 kb`.
    pub fn k(&self) -> usize {
        2 * (self.kf as usize + self.kb as usize)
    }

    /// Heads in canonical order: S-forward, S-backward, T-forward,
    /// T-backward, each group ordered by ordinal. This order indexes
    /// symbol views, advance masks, and configuration position vectors.
    pub fn heads(&self) -> Vec<HeadId> {
        let mut out = Vec::with_capacity(self.k());
        for side in [StreamSide::S, StreamSide::T] {
            for (dir, count) in [(HeadDirection::Forward, self.kf), (HeadDirection::Backward, self.kb)] {
                for ordinal in 0..count {
                    out.push(HeadId { side, dir, ordinal });
                }
            }
        }
        out
    }

    /// Canonical global index of a head, inverse of [`Self::heads`].
    pub fn head_index(&self, head: HeadId) -> usize {
        let base = match (head.side, head.dir) {
            (StreamSide::S, HeadDirection::Forward) => 0,
            (StreamSide::S, HeadDirection::Backward) => self.kf,
            (StreamSide::T, HeadDirection::Forward) => self.kf + self.kb,
            (StreamSide::T, HeadDirection::Backward) => 2 * self.kf + self.kb,
        };
        base as usize + head.ordinal as usize
    }
}

/// Identity of one head: stream, direction, and ordinal within its
/// (stream, direction) group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeadId {
    pub side: StreamSide,
    pub dir: HeadDirection,
    pub ordinal: u32,
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.dir {
            HeadDirection::Forward => 'f',
            HeadDirection::Backward => 'b',
        };
        write!(f, "{}{}{}", self.side, d, self.ordinal + 1)
    }
}

/// What a head reads: a data item, or `end` once it has passed its stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Item(DataItem),
    End,
}

impl Symbol {
    pub fn item(&self) -> Option<DataItem> {
        match self {
            Symbol::Item(it) => Some(*it),
            Symbol::End => None,
        }
    }

    pub fn is_end(&self) -> bool {
        matches!(self, Symbol::End)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Item(it) => write!(f, "{it}"),
            Symbol::End => write!(f, "end"),
        }
    }
}

impl FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "end" {
            Ok(Symbol::End)
        } else {
            Ok(Symbol::Item(s.parse()?))
        }
    }
}

/// Per-head symbols in canonical head order, length `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolView(pub Vec<Symbol>);

impl SymbolView {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> Symbol {
        self.0[idx]
    }
}

/// Per-head movement decision in canonical head order, length `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadMove {
    Advance,
    Stay,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdvanceMask(pub Vec<HeadMove>);

impl AdvanceMask {
    pub fn stay_all(k: usize) -> Self {
        AdvanceMask(vec![HeadMove::Stay; k])
    }

    pub fn advance_all(k: usize) -> Self {
        AdvanceMask(vec![HeadMove::Advance; k])
    }

    pub fn advancing(k: usize, indices: &[usize]) -> Self {
        let mut m = Self::stay_all(k);
        for &i in indices {
            m.0[i] = HeadMove::Advance;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn advances(&self, idx: usize) -> bool {
        matches!(self.0[idx], HeadMove::Advance)
    }
}

/// An opaque state token: a stable numeric identity plus a display name.
///
/// Builders encode structured content (seen-subsets, head positions) in
/// `id` so their transition mappings can decode it cheaply; `name` is the
/// rendering used in traces and description files.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub id: u64,
    pub name: String,
}

impl State {
    pub fn new(id: u64, name: impl Into<String>) -> Self {
        State { id, name: name.into() }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// The declared state set Q.
///
/// Small machines declare an explicit list; machines whose state space is
/// astronomically indexable but structurally cheap (subset-storing
/// machines) declare a count plus a membership predicate instead of
/// materializing the enumeration.
#[derive(Clone)]
pub enum StateSet {
    Explicit(Vec<State>),
    Symbolic {
        count: u128,
        member: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    },
}

impl StateSet {
    pub fn count(&self) -> u128 {
        match self {
            StateSet::Explicit(v) => v.len() as u128,
            StateSet::Symbolic { count, .. } => *count,
        }
    }

    pub fn contains(&self, s: &State) -> bool {
        match self {
            StateSet::Explicit(v) => v.contains(s),
            StateSet::Symbolic { member, .. } => member(s),
        }
    }

    /// The explicit enumeration, when one was declared.
    pub fn enumerate(&self) -> Option<&[State]> {
        match self {
            StateSet::Explicit(v) => Some(v),
            StateSet::Symbolic { .. } => None,
        }
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSet::Explicit(v) => write!(f, "StateSet::Explicit({} states)", v.len()),
            StateSet::Symbolic { count, .. } => write!(f, "StateSet::Symbolic({count} states)"),
        }
    }
}

pub type DeltaFn = dyn Fn(&State, &SymbolView) -> Option<(State, AdvanceMask)> + Send + Sync;
pub type AcceptFn = dyn Fn(&State) -> bool + Send + Sync;

/// A validated mp2s-automaton. Immutable after construction and safe to
/// share across concurrent runs; `delta` must be a pure, re-entrant
/// mapping.
#[derive(Clone)]
pub struct Automaton {
    params: AutomatonParams,
    states: StateSet,
    start: State,
    accepting: Arc<AcceptFn>,
    delta: Arc<DeltaFn>,
}

impl Automaton {
    pub fn params(&self) -> &AutomatonParams {
        &self.params
    }

    pub fn states(&self) -> &StateSet {
        &self.states
    }

    pub fn start(&self) -> &State {
        &self.start
    }

    pub fn is_accepting(&self, s: &State) -> bool {
        (self.accepting)(s)
    }

    /// Evaluates the transition mapping. `None` means the transition is
    /// undefined (possible only for table-backed machines fed symbols
    /// outside their declared domain).
    pub fn delta(&self, s: &State, view: &SymbolView) -> Option<(State, AdvanceMask)> {
        (self.delta)(s, view)
    }
}

impl fmt::Debug for Automaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Automaton")
            .field("params", &self.params)
            .field("states", &self.states)
            .field("start", &self.start)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("declared state set has {declared} states, exceeding the budget m = {budget}")]
    StateBudgetExceeded { declared: u128, budget: u128 },

    #[error("start state {0:?} is not in the declared state set")]
    InvalidStart(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Validates and assembles an automaton: `|Q| <= m` and `start in Q` are
/// enforced here; purity of `delta` is the builder's obligation.
pub fn make_automaton(
    params: AutomatonParams,
    states: StateSet,
    start: State,
    accepting: Arc<AcceptFn>,
    delta: Arc<DeltaFn>,
) -> Result<Automaton, ModelError> {
    if params.m < 1 {
        return Err(ModelError::InvalidParams("state budget m must be >= 1".into()));
    }
    let declared = states.count();
    if declared > params.m {
        return Err(ModelError::StateBudgetExceeded { declared, budget: params.m });
    }
    if !states.contains(&start) {
        return Err(ModelError::InvalidStart(start.name.clone()));
    }
    Ok(Automaton { params, states, start, accepting, delta })
}

pub mod table {
    //! Line-oriented description files for toy machines with explicit
    //! transition tables.
    //!
    //! ```text
    //! mp2s n=<n> m=<m> kf=<kf> kb=<kb>
    //! state <id> [start] [accept]
    //! trans <state> <sym0>,...,<symk-1> -> <state> <A|S>{k}
    //! ```
    //!
    //! Symbols are `a<i>`, `b<i>` (with `i <= n`) or `end`; the mask uses
    //! `A` = advance, `S` = stay. The table must be total: every
    //! (state, symbol combination) over the declared domain must be
    //! listed, and unlisted or duplicated transitions fail the load.

    use super::*;
    use std::collections::BTreeMap;

    #[derive(Debug, Error)]
    pub enum TableError {
        #[error("line {line}: {msg}")]
        Parse { line: usize, msg: String },

        #[error("no start state declared")]
        NoStart,

        #[error("multiple start states declared")]
        MultipleStart,

        #[error("duplicate transition for state {state} on ({symbols})")]
        Duplicate { state: String, symbols: String },

        #[error("missing transition for state {state} on ({symbols}); tables must be total")]
        Missing { state: String, symbols: String },

        #[error("table too large: {0} transitions required")]
        TooLarge(u128),

        #[error(transparent)]
        Model(#[from] ModelError),
    }

    /// Key for the transition map: state id plus encoded symbols.
    /// Items encode as `2*index - 1` (a) / `2*index` (b); `end` as 0.
    fn encode_symbol(sym: Symbol) -> u64 {
        match sym {
            Symbol::End => 0,
            Symbol::Item(it) => {
                let base = 2 * it.index as u64;
                match it.kind {
                    ItemKind::A => base - 1,
                    ItemKind::B => base,
                }
            }
        }
    }

    fn encode_view(view: &SymbolView) -> Vec<u64> {
        view.0.iter().map(|s| encode_symbol(*s)).collect()
    }

    struct Header {
        n: u32,
        m: u128,
        kf: u32,
        kb: u32,
    }

    fn parse_header(line: &str, lineno: usize) -> Result<Header, TableError> {
        let err = |msg: String| TableError::Parse { line: lineno, msg };
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        let mut parts = line.split_whitespace();
        if parts.next() != Some("mp2s") {
            return Err(err("expected header starting with 'mp2s'".into()));
        }
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| err(format!("bad header field {part:?}")))?;
            fields.insert(key, value);
        }
        let get = |key: &str| -> Result<&str, TableError> {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| TableError::Parse { line: lineno, msg: format!("header missing {key}=") })
        };
        let n: u32 = get("n")?.parse().map_err(|_| err("bad n".into()))?;
        let m: u128 = get("m")?.parse().map_err(|_| err("bad m".into()))?;
        let kf: u32 = get("kf")?.parse().map_err(|_| err("bad kf".into()))?;
        let kb: u32 = get("kb")?.parse().map_err(|_| err("bad kb".into()))?;
        Ok(Header { n, m, kf, kb })
    }

    /// Loads an automaton description, enforcing totality of the table
    /// over `(D_n ∪ {end})^k` for every declared state.
    pub fn load(text: &str) -> Result<Automaton, TableError> {
        let mut header: Option<Header> = None;
        let mut state_names: Vec<String> = Vec::new();
        let mut start_name: Option<String> = None;
        let mut accept_names: Vec<String> = Vec::new();
        let mut trans_lines: Vec<(usize, String)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("mp2s") {
                if header.is_some() {
                    return Err(TableError::Parse { line: lineno, msg: "duplicate header".into() });
                }
                header = Some(parse_header(line, lineno)?);
            } else if let Some(rest) = line.strip_prefix("state ") {
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or(TableError::Parse { line: lineno, msg: "state line missing id".into() })?
                    .to_string();
                if state_names.contains(&name) {
                    return Err(TableError::Parse { line: lineno, msg: format!("duplicate state {name}") });
                }
                for flag in parts {
                    match flag {
                        "start" => {
                            if start_name.is_some() {
                                return Err(TableError::MultipleStart);
                            }
                            start_name = Some(name.clone());
                        }
                        "accept" => accept_names.push(name.clone()),
                        other => {
                            return Err(TableError::Parse {
                                line: lineno,
                                msg: format!("unknown state flag {other:?}"),
                            })
                        }
                    }
                }
                state_names.push(name);
            } else if line.starts_with("trans ") {
                trans_lines.push((lineno, line.to_string()));
            } else {
                return Err(TableError::Parse { line: lineno, msg: format!("unrecognized line {line:?}") });
            }
        }

        let header = header.ok_or(TableError::Parse { line: 0, msg: "missing mp2s header".into() })?;
        let start_name = start_name.ok_or(TableError::NoStart)?;
        let params = AutomatonParams::new(2 * header.n as u64, header.m, header.kf, header.kb)?;
        let k = params.k();

        let states: Vec<State> = state_names
            .iter()
            .enumerate()
            .map(|(i, name)| State::new(i as u64, name.clone()))
            .collect();
        let state_by_name: HashMap<&str, &State> =
            states.iter().map(|s| (s.name.as_str(), s)).collect();

        let mut map: HashMap<(u64, Vec<u64>), (State, AdvanceMask)> = HashMap::new();
        for (lineno, line) in &trans_lines {
            let err = |msg: String| TableError::Parse { line: *lineno, msg };
            let rest = line.strip_prefix("trans ").unwrap();
            let (lhs, rhs) = rest
                .split_once("->")
                .ok_or_else(|| err("transition missing '->'".into()))?;
            let mut lhs_parts = lhs.split_whitespace();
            let from_name = lhs_parts.next().ok_or_else(|| err("missing source state".into()))?;
            let syms_text = lhs_parts.next().unwrap_or("");
            if lhs_parts.next().is_some() {
                return Err(err("too many fields before '->'".into()));
            }
            let from = *state_by_name
                .get(from_name)
                .ok_or_else(|| err(format!("unknown state {from_name}")))?;

            let symbols: Vec<Symbol> = if k == 0 {
                if !syms_text.is_empty() {
                    return Err(err("k = 0 machine must not list symbols".into()));
                }
                Vec::new()
            } else {
                syms_text
                    .split(',')
                    .map(|t| Symbol::from_str(t.trim()).map_err(&err))
                    .collect::<Result<Vec<_>, _>>()?
            };
            if symbols.len() != k {
                return Err(err(format!("expected {k} symbols, got {}", symbols.len())));
            }
            for sym in &symbols {
                if let Symbol::Item(it) = sym {
                    if it.index > header.n {
                        return Err(err(format!("symbol {sym} outside domain (n = {})", header.n)));
                    }
                }
            }

            let mut rhs_parts = rhs.split_whitespace();
            let to_name = rhs_parts.next().ok_or_else(|| err("missing target state".into()))?;
            let mask_text = rhs_parts.next().unwrap_or("");
            if rhs_parts.next().is_some() {
                return Err(err("too many fields after '->'".into()));
            }
            let to = *state_by_name
                .get(to_name)
                .ok_or_else(|| err(format!("unknown state {to_name}")))?;
            if mask_text.len() != k {
                return Err(err(format!("expected mask of length {k}, got {:?}", mask_text)));
            }
            let mut mask = AdvanceMask::stay_all(k);
            for (i, c) in mask_text.chars().enumerate() {
                mask.0[i] = match c {
                    'A' => HeadMove::Advance,
                    'S' => HeadMove::Stay,
                    other => return Err(err(format!("bad mask character {other:?}"))),
                };
            }

            let key = (from.id, symbols.iter().map(|s| encode_symbol(*s)).collect::<Vec<_>>());
            if map.insert(key, (to.clone(), mask)).is_some() {
                return Err(TableError::Duplicate {
                    state: from.name.clone(),
                    symbols: symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
                });
            }
        }

        // Totality check over (D_n ∪ {end})^k per state. Zero-head tables
        // never consult delta, so they must simply list no transitions.
        if k > 0 {
            let alphabet = 2 * header.n as u128 + 1;
            let combos = alphabet.pow(k as u32);
            let required = combos * states.len() as u128;
            if required > 2_000_000 {
                return Err(TableError::TooLarge(required));
            }
            let mut all_symbols: Vec<Symbol> = vec![Symbol::End];
            for i in 1..=header.n {
                all_symbols.push(Symbol::Item(DataItem::a(i)));
                all_symbols.push(Symbol::Item(DataItem::b(i)));
            }
            for state in &states {
                let mut combo = vec![0usize; k];
                loop {
                    let syms: Vec<Symbol> = combo.iter().map(|&c| all_symbols[c]).collect();
                    let key: Vec<u64> = syms.iter().map(|s| encode_symbol(*s)).collect();
                    if !map.contains_key(&(state.id, key)) {
                        return Err(TableError::Missing {
                            state: state.name.clone(),
                            symbols: syms.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
                        });
                    }
                    let mut pos = 0;
                    loop {
                        if pos == k {
                            break;
                        }
                        combo[pos] += 1;
                        if combo[pos] < all_symbols.len() {
                            break;
                        }
                        combo[pos] = 0;
                        pos += 1;
                    }
                    if pos == k {
                        break;
                    }
                }
            }
        } else if !trans_lines.is_empty() {
            return Err(TableError::Parse {
                line: trans_lines[0].0,
                msg: "zero-head machine must not list transitions".into(),
            });
        }

        let start = state_by_name[start_name.as_str()].clone();
        let accept_ids: Vec<u64> = accept_names.iter().map(|n| state_by_name[n.as_str()].id).collect();
        let accepting: Arc<AcceptFn> = Arc::new(move |s: &State| accept_ids.contains(&s.id));
        let table = Arc::new(map);
        let delta: Arc<DeltaFn> = Arc::new(move |s: &State, view: &SymbolView| {
            table.get(&(s.id, encode_view(view))).cloned()
        });

        Ok(make_automaton(params, StateSet::Explicit(states), start, accepting, delta)?)
    }

    /// Renders an explicit-table automaton back into the description
    /// format. Only meaningful for machines built by [`load`] or with an
    /// equivalent explicit table; used by tests for round-trip checks.
    pub fn render(
        n: u32,
        params: &AutomatonParams,
        states: &[State],
        start: &State,
        accepting: &dyn Fn(&State) -> bool,
        rows: &[(State, Vec<Symbol>, State, AdvanceMask)],
    ) -> String {
        let mut out = format!("mp2s n={} m={} kf={} kb={}\n", n, params.m, params.kf, params.kb);
        for s in states {
            out.push_str(&format!(
                "state {}{}{}\n",
                s.name,
                if s == start { " start" } else { "" },
                if accepting(s) { " accept" } else { "" },
            ));
        }
        for (from, syms, to, mask) in rows {
            let sym_text: Vec<String> = syms.iter().map(|s| s.to_string()).collect();
            let mask_text: String = mask
                .0
                .iter()
                .map(|m| if matches!(m, HeadMove::Advance) { 'A' } else { 'S' })
                .collect();
            out.push_str(&format!("trans {} {} -> {} {}\n", from.name, sym_text.join(","), to.name, mask_text));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accept_all() -> Arc<AcceptFn> {
        Arc::new(|_| true)
    }

    fn stay_delta(k: usize) -> Arc<DeltaFn> {
        Arc::new(move |s: &State, _| Some((s.clone(), AdvanceMask::stay_all(k))))
    }

    #[test]
    fn construction_with_declared_sizes() {
        let params = AutomatonParams::new(4, 3, 1, 0).unwrap();
        assert_eq!(params.k(), 2);
        let states = StateSet::Explicit(vec![
            State::new(0, "q0"),
            State::new(1, "q1"),
            State::new(2, "q2"),
        ]);
        let a = make_automaton(params, states, State::new(0, "q0"), accept_all(), stay_delta(2)).unwrap();
        assert_eq!(a.params().k(), 2);
        assert_eq!(a.states().count(), 3);
    }

    #[test]
    fn budget_violation_is_rejected() {
        let params = AutomatonParams::new(4, 3, 1, 0).unwrap();
        let states = StateSet::Explicit((0..5).map(|i| State::new(i, format!("q{i}"))).collect());
        let err = make_automaton(params, states, State::new(0, "q0"), accept_all(), stay_delta(2));
        assert!(matches!(err, Err(ModelError::StateBudgetExceeded { declared: 5, budget: 3 })));
    }

    #[test]
    fn start_outside_declared_set_is_rejected() {
        let params = AutomatonParams::new(4, 3, 1, 0).unwrap();
        let states = StateSet::Explicit(vec![State::new(0, "q0")]);
        let err = make_automaton(params, states, State::new(9, "zz"), accept_all(), stay_delta(2));
        assert!(matches!(err, Err(ModelError::InvalidStart(_))));
    }

    #[test]
    fn canonical_head_order() {
        let params = AutomatonParams::new(4, 2, 2, 1).unwrap();
        let heads = params.heads();
        assert_eq!(heads.len(), 6);
        let rendered: Vec<String> = heads.iter().map(|h| h.to_string()).collect();
        assert_eq!(rendered, vec!["Sf1", "Sf2", "Sb1", "Tf1", "Tf2", "Tb1"]);
        for (i, h) in heads.iter().enumerate() {
            assert_eq!(params.head_index(*h), i);
        }
    }

    #[test]
    fn data_item_parse_and_render() {
        let it: DataItem = "a7".parse().unwrap();
        assert_eq!(it, DataItem::a(7));
        assert_eq!(it.to_string(), "a7");
        assert!("c1".parse::<DataItem>().is_err());
        assert!("a0".parse::<DataItem>().is_err());
        assert!("a".parse::<DataItem>().is_err());
    }

    #[test]
    fn stream_positions_are_one_based() {
        let s = Stream::parse("a1 b2 a3").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.get(1), Some(DataItem::a(1)));
        assert_eq!(s.get(3), Some(DataItem::a(3)));
        assert_eq!(s.get(0), None);
        assert_eq!(s.get(4), None);
    }

    #[test]
    fn table_load_rejects_partial_tables() {
        let text = "\
mp2s n=1 m=1 kf=1 kb=0
state q0 start accept
trans q0 a1,a1 -> q0 AA
";
        let err = table::load(text);
        assert!(matches!(err, Err(table::TableError::Missing { .. })), "{err:?}");
    }

    #[test]
    fn table_load_total_and_runs() {
        // k = 2 over D_1: alphabet {end, a1, b1}, 9 combos.
        let mut text = String::from("mp2s n=1 m=2 kf=1 kb=0\nstate q0 start accept\nstate q1\n");
        for s in ["end", "a1", "b1"] {
            for t in ["end", "a1", "b1"] {
                text.push_str(&format!("trans q0 {s},{t} -> q0 AA\n"));
                text.push_str(&format!("trans q1 {s},{t} -> q1 AA\n"));
            }
        }
        let a = table::load(&text).unwrap();
        assert_eq!(a.states().count(), 2);
        assert_eq!(a.start().name, "q0");
        let view = SymbolView(vec![Symbol::Item(DataItem::a(1)), Symbol::End]);
        let (next, mask) = a.delta(a.start(), &view).unwrap();
        assert_eq!(next.name, "q0");
        assert!(mask.advances(0) && mask.advances(1));
    }

    #[test]
    fn table_load_duplicate_is_rejected() {
        let text = "\
mp2s n=1 m=1 kf=0 kb=0
state q0 start
trans q0  -> q0
";
        let err = table::load(text);
        assert!(err.is_err());
    }

    #[test]
    fn table_round_trip_preserves_head_order() {
        // kf = kb = 1 per stream gives four heads with direction-
        // asymmetric masks below: if serialization permuted head indices,
        // the replayed trace would differ.
        let n = 1;
        let params = AutomatonParams::new(2, 2, 1, 1).unwrap();
        let k = params.k();
        let states = vec![State::new(0, "q0"), State::new(1, "q1")];
        let all_symbols = [Symbol::End, Symbol::Item(DataItem::a(1)), Symbol::Item(DataItem::b(1))];
        let mut rows = Vec::new();
        for state in &states {
            let mut combo = vec![0usize; k];
            loop {
                let syms: Vec<Symbol> = combo.iter().map(|&c| all_symbols[c]).collect();
                // advance Sf and Tb from q0; Sb and Tf from q1
                let (mask, target) = if state.id == 0 {
                    (AdvanceMask::advancing(k, &[0, 3]), states[1].clone())
                } else {
                    (AdvanceMask::advancing(k, &[1, 2]), states[0].clone())
                };
                rows.push((state.clone(), syms, target, mask));
                let mut pos = 0;
                while pos < k {
                    combo[pos] += 1;
                    if combo[pos] < all_symbols.len() {
                        break;
                    }
                    combo[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
        }
        let text = table::render(n, &params, &states, &states[0], &|s| s.id == 0, &rows);
        let a1 = table::load(&text).unwrap();
        let a2 = table::load(&text).unwrap();

        let s = Stream::parse("a1").unwrap();
        let t = Stream::parse("b1").unwrap();
        let r1 = crate::engine::run(&a1, &s, &t, true).unwrap();
        let r2 = crate::engine::run(&a2, &s, &t, true).unwrap();
        let j1 = r1.trace.unwrap().to_jsonl_string();
        assert_eq!(j1, r2.trace.unwrap().to_jsonl_string());
        // Sf advanced on the first step (head 0), Sb stayed (head 1).
        let first: serde_json::Value = serde_json::from_str(j1.lines().next().unwrap()).unwrap();
        assert_eq!(first["adv"], serde_json::json!([true, false, false, true]));
    }
}
