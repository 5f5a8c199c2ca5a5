//! The external note-writer wire protocol: one JSON object per line.
//!
//! Required keys: `submission_id` (string), `post_id`, `accuracy`,
//! `polish`, `slant`, `style`, `claim` (arrays of numbers). Unknown keys are
//! ignored. Blank lines are skipped. Lines longer than [`MAX_LINE_BYTES`]
//! are rejected without being parsed.

use bridgesim_core::writers::{ExternalSubmission, IngestError};

pub const MAX_LINE_BYTES: usize = 64 * 1024;

/// Decodes one record. `offset` is the byte position of the line within its
/// file and is added to any reported error position.
pub fn parse_record(line: &[u8], offset: usize) -> Result<ExternalSubmission, IngestError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(IngestError::Parse {
            offset,
            message: format!("line of {} bytes exceeds the {MAX_LINE_BYTES} byte limit", line.len()),
        });
    }
    let text = std::str::from_utf8(line).map_err(|e| IngestError::Parse {
        offset: offset + e.valid_up_to(),
        message: "invalid UTF-8".to_string(),
    })?;
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        offset: offset + column_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Byte offset of a 1-based (line, column) position as reported by
/// serde_json; column 0 means "before the first byte".
fn column_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Splits a protocol stream into records. Every non-blank line yields one
/// entry, in file order.
pub fn parse_stream(bytes: &[u8]) -> Vec<Result<ExternalSubmission, IngestError>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in bytes.split_inclusive(|b| *b == b'\n') {
        let mut line = raw.strip_suffix(b"\n").unwrap_or(raw);
        line = line.strip_suffix(b"\r").unwrap_or(line);
        if !line.iter().all(u8::is_ascii_whitespace) {
            out.push(parse_record(line, offset));
        }
        offset += raw.len();
    }
    out
}

pub fn to_line(sub: &ExternalSubmission) -> String {
    serde_json::to_string(sub).expect("submission serializes")
}
