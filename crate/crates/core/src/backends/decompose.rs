use super::store::StoreKey;
use super::{Backend, BackendError, GenerationRequest};
use crate::alignment::{assemble_decomposition_input, render_prompt, PromptTemplate};
use crate::ingest::sha256_hex;

/// Splits a claim into short statements with `backend`.
///
/// The output is read one statement per line; lines are trimmed, a leading
/// list marker (`-`, `*`, `•`) is dropped and empty lines are skipped.
pub async fn decompose_claim(
    claim_text: &str,
    backend: &dyn Backend,
    template: &PromptTemplate,
) -> Result<Vec<String>, BackendError> {
    let structured = assemble_decomposition_input(claim_text);
    let rendered = render_prompt(&structured, template)?;
    let key = StoreKey::subclaim(format!("decompose:{}", sha256_hex(claim_text.as_bytes())), backend.tag(), 0);
    let response = backend
        .generate(&GenerationRequest {
            key: &key,
            prompt: rendered.as_str(),
            structured: &structured,
        })
        .await?;
    let statements: Vec<String> = response
        .raw_text
        .lines()
        .map(|l| {
            let l = l.trim();
            l.strip_prefix(['-', '*', '•']).map(str::trim_start).unwrap_or(l)
        })
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if statements.is_empty() {
        return Err(BackendError::EmptyDecomposition);
    }
    Ok(statements)
}
