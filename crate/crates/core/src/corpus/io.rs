//! Text formats: GloVe-style embedding files and label/text TSV datasets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{
    CorpusError, Dataset, EmbeddingTable, LabeledExample, Result, TokenId, TokenSequence,
    Vocabulary,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(io_err(path))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io_err(path))
}

/// Parses `token v1 ... v_dim` lines. Vocabulary order is file order, so the
/// first line owns id 0, which downstream loaders treat as the unknown token.
pub fn load_embeddings(path: &Path) -> Result<(Vocabulary, EmbeddingTable)> {
    let lines = read_lines(path)?;
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default().to_string();
        let mut values = Vec::new();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| CorpusError::NonNumeric {
                line: line_no,
                field: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CorpusError::NonFinite { line: line_no });
            }
            values.push(v);
        }
        match dim {
            None if values.is_empty() => {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    reason: "no vector values".into(),
                })
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(CorpusError::InconsistentDimension {
                    line: line_no,
                    expected: d,
                    found: values.len(),
                })
            }
            Some(_) => {}
        }
        if !seen.insert(token.clone()) {
            return Err(CorpusError::DuplicateToken {
                line: line_no,
                token,
            });
        }
        tokens.push(token);
        data.extend(values);
    }
    let dim = dim.ok_or(CorpusError::EmptyEmbeddingFile)?;
    Ok((Vocabulary::new(tokens)?, EmbeddingTable::new(dim, data)?))
}

pub fn write_embeddings(path: &Path, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for (i, tok) in vocab.tokens().iter().enumerate() {
        let mut line = tok.clone();
        for v in table.row(i) {
            line.push(' ');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<TokenId> {
    text.split_whitespace()
        .map(|t| vocab.id_or_unk(t))
        .collect()
}

fn parse_label(field: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| CorpusError::NonIntegerLabel {
            line,
            value: field.to_string(),
        })
}

fn parse_sequence(
    text1: &str,
    text2: Option<&str>,
    vocab: &Vocabulary,
    line: usize,
) -> Result<TokenSequence> {
    let first = tokenize(text1, vocab);
    if first.is_empty() {
        return Err(CorpusError::MalformedRow {
            line,
            reason: "empty text".into(),
        });
    }
    match text2 {
        None => Ok(TokenSequence::single(first)),
        Some(t) => {
            let second = tokenize(t, vocab);
            if second.is_empty() {
                return Err(CorpusError::MalformedRow {
                    line,
                    reason: "empty second segment".into(),
                });
            }
            TokenSequence::paired(&first, &second)
        }
    }
}

/// Reads `label<TAB>text` or `label<TAB>text1<TAB>text2` rows. The class count
/// is one more than the largest label seen.
pub fn load_dataset(path: &Path, vocab: &Vocabulary) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (label, text1, text2) = match cols.as_slice() {
            [l, t] => (l, t, None),
            [l, t1, t2] => (l, t1, Some(*t2)),
            _ => {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    reason: format!("expected 2 or 3 columns, found {}", cols.len()),
                })
            }
        };
        let label = parse_label(label, line_no)?;
        let sequence = parse_sequence(text1, text2, vocab, line_no)?;
        examples.push(LabeledExample { sequence, label });
    }
    let num_classes = examples.iter().map(|e| e.label + 1).max().unwrap_or(0);
    Dataset::new(examples, num_classes)
}

fn render(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.segment_ranges()
        .into_iter()
        .map(|r| {
            seq.ids()[r]
                .iter()
                .map(|&id| vocab.token(id))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn write_dataset(path: &Path, data: &Dataset, vocab: &Vocabulary) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for ex in data.examples() {
        let cols = render(&ex.sequence, vocab);
        writeln!(w, "{}\t{}", ex.label, cols.join("\t")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row of a pre-augmented file: the augmented input, its label and the
/// index of the example it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedRow {
    pub example: LabeledExample,
    pub source_index: usize,
}

/// Writes `label<TAB>text1<TAB>text2<TAB>source_index`; `text2` is empty for
/// single-segment inputs.
pub fn write_augmented(path: &Path, rows: &[AugmentedRow], vocab: &Vocabulary) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let mut cols = render(&row.example.sequence, vocab);
        cols.resize(2, String::new());
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            row.example.label, cols[0], cols[1], row.source_index
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Imports externally produced augmentations (back translation, LLM output)
/// in the four-column format of [`write_augmented`].
pub fn load_augmented(path: &Path, vocab: &Vocabulary) -> Result<Vec<AugmentedRow>> {
    let mut rows = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [label, t1, t2, src] = cols.as_slice() else {
            return Err(CorpusError::MalformedRow {
                line: line_no,
                reason: format!("expected 4 columns, found {}", cols.len()),
            });
        };
        let label = parse_label(label, line_no)?;
        let text2 = (!t2.trim().is_empty()).then_some(*t2);
        let sequence = parse_sequence(t1, text2, vocab, line_no)?;
        let source_index = src.trim().parse().map_err(|_| CorpusError::MalformedRow {
            line: line_no,
            reason: format!("bad source index {src:?}"),
        })?;
        rows.push(AugmentedRow {
            example: LabeledExample { sequence, label },
            source_index,
        });
    }
    Ok(rows)
}
