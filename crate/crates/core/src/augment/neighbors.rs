use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{CorpusError, EmbeddingTable, TokenId, Vocabulary};

/// Exact top-k cosine neighbours of every token, self excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    k: usize,
    neighbors: Vec<Vec<TokenId>>,
}

fn cosine(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

impl NeighborIndex {
    /// Lists are sorted by decreasing similarity with ties broken by the
    /// smaller token id. Zero vectors have similarity 0 to everything.
    pub fn build(emb: &EmbeddingTable, k: usize) -> Self {
        let v = emb.len();
        let norms: Vec<f64> = (0..v)
            .map(|i| emb.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let keep = k.min(v.saturating_sub(1));
        let neighbors = (0..v)
            .into_par_iter()
            .map(|i| {
                let mut scored: Vec<(f64, TokenId)> = (0..v)
                    .filter(|&j| j != i)
                    .map(|j| {
                        (
                            cosine(emb.row(i), norms[i], emb.row(j), norms[j]),
                            j as TokenId,
                        )
                    })
                    .collect();
                let cmp = |a: &(f64, TokenId), b: &(f64, TokenId)| {
                    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
                };
                if keep < scored.len() && keep > 0 {
                    scored.select_nth_unstable_by(keep - 1, cmp);
                }
                scored.truncate(keep);
                scored.sort_by(cmp);
                scored.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        Self { k, neighbors }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, id: TokenId) -> &[TokenId] {
        self.neighbors
            .get(id as usize)
            .map_or(&[], |v| v.as_slice())
    }

    pub fn vocab_size(&self) -> usize {
        self.neighbors.len()
    }
}

/// Synonym lists per token id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Thesaurus {
    synonyms: HashMap<TokenId, Vec<TokenId>>,
}

impl Thesaurus {
    /// Drops self-synonyms, duplicates and empty lists.
    pub fn new(entries: impl IntoIterator<Item = (TokenId, Vec<TokenId>)>) -> Self {
        let mut synonyms: HashMap<TokenId, Vec<TokenId>> = HashMap::new();
        for (tok, syns) in entries {
            let list = synonyms.entry(tok).or_default();
            for s in syns {
                if s != tok && !list.contains(&s) {
                    list.push(s);
                }
            }
        }
        synonyms.retain(|_, l| !l.is_empty());
        Self { synonyms }
    }

    pub fn synonyms(&self, id: TokenId) -> &[TokenId] {
        self.synonyms.get(&id).map_or(&[], |v| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.synonyms.is_empty()
    }

    /// Reads `token<TAB>syn1,syn2,...` lines. Tokens outside the vocabulary
    /// are skipped.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self, CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let Some((head, tail)) = line.split_once('\t') else {
                return Err(CorpusError::MalformedRow {
                    line: i + 1,
                    reason: "expected token<TAB>synonyms".into(),
                });
            };
            let Some(id) = vocab.lookup(head.trim()) else {
                continue;
            };
            let syns = tail
                .split(',')
                .filter_map(|s| vocab.lookup(s.trim()))
                .collect();
            entries.push((id, syns));
        }
        Ok(Self::new(entries))
    }
}
