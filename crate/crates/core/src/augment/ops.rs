//! The individual token edits. Every edit works segment by segment so that
//! two-segment inputs keep a valid break, and applies its own
//! [`change_count`](super::change_count) to each segment.

use rand::seq::index;
use rand::Rng;

use super::{change_count, AugmentedExample, NeighborIndex, Thesaurus};
use crate::corpus::{TokenId, TokenSequence, UNK_ID};

/// Where replacement and insertion tokens come from.
#[derive(Debug, Clone, Copy)]
pub enum Candidates<'a> {
    Neighbors(&'a NeighborIndex),
    Synonyms(&'a Thesaurus),
    /// Any vocabulary token other than the current one and the unknown token.
    Random {
        vocab_size: usize,
    },
}

impl Candidates<'_> {
    fn has_any(&self, token: TokenId) -> bool {
        match *self {
            Candidates::Neighbors(idx) => !idx.neighbors(token).is_empty(),
            Candidates::Synonyms(th) => !th.synonyms(token).is_empty(),
            Candidates::Random { vocab_size } => {
                let own = usize::from(token != UNK_ID && (token as usize) < vocab_size);
                vocab_size.saturating_sub(1) > own
            }
        }
    }

    /// Uniform draw from the candidate set of `token`; callers check
    /// [`Self::has_any`] first.
    fn pick<R: Rng + ?Sized>(&self, token: TokenId, rng: &mut R) -> TokenId {
        match *self {
            Candidates::Neighbors(idx) => {
                let list = idx.neighbors(token);
                list[rng.random_range(0..list.len())]
            }
            Candidates::Synonyms(th) => {
                let list = th.synonyms(token);
                list[rng.random_range(0..list.len())]
            }
            Candidates::Random { vocab_size } => {
                let v = vocab_size as TokenId;
                if token == UNK_ID || token >= v {
                    rng.random_range(1..v)
                } else {
                    let r = rng.random_range(1..v - 1);
                    if r >= token {
                        r + 1
                    } else {
                        r
                    }
                }
            }
        }
    }
}

fn split(seq: &TokenSequence) -> Vec<Vec<TokenId>> {
    seq.segment_ranges()
        .into_iter()
        .map(|r| seq.ids()[r].to_vec())
        .collect()
}

fn rebuild(segments: Vec<Vec<TokenId>>) -> TokenSequence {
    TokenSequence::from_segments(segments).expect("edits never empty a segment")
}

/// Replaces `change_count` uniformly chosen positions per segment. Only
/// positions whose token has at least one candidate are eligible; when fewer
/// are eligible than requested, all of them change.
pub fn replace<R: Rng + ?Sized>(
    seq: &TokenSequence,
    candidates: Candidates<'_>,
    degree: f64,
    rng: &mut R,
) -> AugmentedExample {
    let mut ids = seq.ids().to_vec();
    let mut changed = Vec::new();
    for range in seq.segment_ranges() {
        let count = change_count(range.len(), degree);
        let eligible: Vec<usize> = range
            .clone()
            .filter(|&p| candidates.has_any(ids[p]))
            .collect();
        let take = count.min(eligible.len());
        let mut chosen: Vec<usize> = index::sample(rng, eligible.len(), take)
            .into_iter()
            .map(|i| eligible[i])
            .collect();
        chosen.sort_unstable();
        for p in chosen {
            ids[p] = candidates.pick(ids[p], rng);
            changed.push(p);
        }
    }
    AugmentedExample {
        sequence: TokenSequence::new(ids, seq.segment_break()).expect("length preserved"),
        source_index: 0,
        changed_positions: changed,
        removed_positions: Vec::new(),
    }
}

/// Performs `ceil(change_count / 2)` random position swaps per segment, so
/// roughly `change_count` positions move. Segments of length one are left
/// alone.
pub fn random_swap<R: Rng + ?Sized>(
    seq: &TokenSequence,
    degree: f64,
    rng: &mut R,
) -> AugmentedExample {
    let mut segments = split(seq);
    for seg in &mut segments {
        let len = seg.len();
        if len < 2 {
            continue;
        }
        let swaps = change_count(len, degree).div_ceil(2);
        for _ in 0..swaps {
            let i = rng.random_range(0..len);
            let mut j = rng.random_range(0..len - 1);
            if j >= i {
                j += 1;
            }
            seg.swap(i, j);
        }
    }
    let sequence = rebuild(segments);
    let changed = sequence
        .ids()
        .iter()
        .zip(seq.ids())
        .enumerate()
        .filter_map(|(p, (a, b))| (a != b).then_some(p))
        .collect();
    AugmentedExample {
        sequence,
        source_index: 0,
        changed_positions: changed,
        removed_positions: Vec::new(),
    }
}

/// Inserts `change_count` tokens per segment. Each inserted token is a
/// candidate of a randomly chosen eligible token of the segment and lands at a
/// uniformly random slot of that segment.
pub fn random_insert<R: Rng + ?Sized>(
    seq: &TokenSequence,
    candidates: Candidates<'_>,
    degree: f64,
    rng: &mut R,
) -> AugmentedExample {
    let mut out_segments = Vec::new();
    let mut changed = Vec::new();
    let mut offset = 0;
    for seg in split(seq) {
        let count = change_count(seg.len(), degree);
        let mut cur: Vec<(TokenId, bool)> = seg.iter().map(|&t| (t, false)).collect();
        for _ in 0..count {
            let eligible: Vec<usize> = (0..cur.len())
                .filter(|&p| candidates.has_any(cur[p].0))
                .collect();
            if eligible.is_empty() {
                break;
            }
            let src = eligible[rng.random_range(0..eligible.len())];
            let token = candidates.pick(cur[src].0, rng);
            let slot = rng.random_range(0..=cur.len());
            cur.insert(slot, (token, true));
        }
        changed.extend(
            cur.iter()
                .enumerate()
                .filter_map(|(p, &(_, new))| new.then_some(offset + p)),
        );
        offset += cur.len();
        out_segments.push(cur.into_iter().map(|(t, _)| t).collect());
    }
    AugmentedExample {
        sequence: rebuild(out_segments),
        source_index: 0,
        changed_positions: changed,
        removed_positions: Vec::new(),
    }
}

/// Deletes `change_count` tokens per segment, never the last one.
pub fn random_delete<R: Rng + ?Sized>(
    seq: &TokenSequence,
    degree: f64,
    rng: &mut R,
) -> AugmentedExample {
    let mut out_segments = Vec::new();
    let mut removed = Vec::new();
    for range in seq.segment_ranges() {
        let len = range.len();
        let count = change_count(len, degree).min(len - 1);
        let mut drop: Vec<usize> = index::sample(rng, len, count).into_vec();
        drop.sort_unstable();
        let seg: Vec<TokenId> = (0..len)
            .filter(|p| drop.binary_search(p).is_err())
            .map(|p| seq.ids()[range.start + p])
            .collect();
        removed.extend(drop.into_iter().map(|p| range.start + p));
        out_segments.push(seg);
    }
    AugmentedExample {
        sequence: rebuild(out_segments),
        source_index: 0,
        changed_positions: Vec::new(),
        removed_positions: removed,
    }
}

/// One of the four EDA edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdaBranch {
    SynonymReplace,
    RandomSwap,
    RandomInsert,
    RandomDelete,
}

impl EdaBranch {
    pub const ALL: [EdaBranch; 4] = [
        EdaBranch::SynonymReplace,
        EdaBranch::RandomSwap,
        EdaBranch::RandomInsert,
        EdaBranch::RandomDelete,
    ];
}

/// Applies a fixed EDA branch with thesaurus candidates.
pub fn eda_branch<R: Rng + ?Sized>(
    seq: &TokenSequence,
    thesaurus: &Thesaurus,
    branch: EdaBranch,
    degree: f64,
    rng: &mut R,
) -> AugmentedExample {
    let cands = Candidates::Synonyms(thesaurus);
    match branch {
        EdaBranch::SynonymReplace => replace(seq, cands, degree, rng),
        EdaBranch::RandomSwap => random_swap(seq, degree, rng),
        EdaBranch::RandomInsert => random_insert(seq, cands, degree, rng),
        EdaBranch::RandomDelete => random_delete(seq, degree, rng),
    }
}

/// Picks one EDA edit uniformly and applies it.
pub fn eda<R: Rng + ?Sized>(
    seq: &TokenSequence,
    thesaurus: &Thesaurus,
    degree: f64,
    rng: &mut R,
) -> (EdaBranch, AugmentedExample) {
    let branch = EdaBranch::ALL[rng.random_range(0..4)];
    (branch, eda_branch(seq, thesaurus, branch, degree, rng))
}
