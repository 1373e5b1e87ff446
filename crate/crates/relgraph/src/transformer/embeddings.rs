//! Plain-text word-vector loader (GloVe layout: `token v1 v2 ... vm`).

use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::Vocabulary;
use super::ModelParams;
use crate::error::{Error, Result};

/// Overwrite source-embedding rows for every vocabulary token found in the
/// file; tokens absent from the file keep their random initialization.
/// Returns the number of matched tokens.
pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    params: &mut ModelParams,
) -> Result<usize> {
    let file = std::fs::File::open(path)?;
    load_from_reader(BufReader::new(file), vocab, params)
}

pub fn load_from_reader<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    params: &mut ModelParams,
) -> Result<usize> {
    let dim = params.src_tok_embed.cols();
    let mut matched = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::Jsonl { line: lineno, msg: "missing token".into() })?;
        let values: Vec<f64> = fields
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::Jsonl {
                    line: lineno,
                    msg: format!("bad float {v:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Jsonl {
                line: lineno,
                msg: format!("vector has {} dims, model expects {dim}", values.len()),
            });
        }
        if let Some(id) = vocab.id(token) {
            let row = &mut params.src_tok_embed.data_mut()[id * dim..(id + 1) * dim];
            row.copy_from_slice(&values);
            matched += 1;
        }
    }
    Ok(matched)
}
