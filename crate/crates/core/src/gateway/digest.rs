//! Canonical request serialization and content digests.

use super::PromptRequest;
use sha2::{Digest, Sha256};

/// Canonical byte form of a request: a JSON array with fixed field order
/// `[model, system, user, temperature, max_tokens, stop]`.
pub fn canonical_bytes(model_name: &str, req: &PromptRequest) -> Vec<u8> {
    let value = serde_json::json!([
        model_name,
        req.system_text,
        req.user_text,
        req.temperature,
        req.max_tokens,
        req.stop_sequences,
    ]);
    serde_json::to_vec(&value).expect("json array serializes")
}

/// Lowercase hex SHA-256 of the canonical serialization.
pub fn request_digest(model_name: &str, req: &PromptRequest) -> String {
    hex::encode(Sha256::digest(canonical_bytes(model_name, req)))
}

/// Rough token count used for context guards: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}
