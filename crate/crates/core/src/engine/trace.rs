//! Round transcripts for debugging and regression diffs.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StageMessage;
use crate::ff::FieldVec;

/// One delivered message. `receiver` is `None` for uploads to the server.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub sender: usize,
    pub receiver: Option<usize>,
    pub field_elems: u64,
    /// First 16 hex digits of the SHA-256 of the little-endian payload.
    pub digest: String,
}

impl TraceRecord {
    pub fn for_message(stage: usize, receiver: usize, msg: &StageMessage) -> Self {
        TraceRecord {
            stage,
            sender: msg.sender,
            receiver: Some(receiver),
            field_elems: msg.field_elems(),
            digest: digest(&msg.payload_bytes()),
        }
    }

    pub fn for_upload(stage: usize, sender: usize, parts: &[&FieldVec]) -> Self {
        TraceRecord::for_vectors(stage, sender, None, parts)
    }

    pub fn for_vectors(stage: usize, sender: usize, receiver: Option<usize>, parts: &[&FieldVec]) -> Self {
        let bytes: Vec<u8> = parts.iter().flat_map(|v| v.to_le_bytes()).collect();
        TraceRecord {
            stage,
            sender,
            receiver,
            field_elems: parts.iter().map(|v| v.len() as u64).sum(),
            digest: digest(&bytes),
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    let full = Sha256::digest(bytes);
    hex::encode(&full[..8])
}

/// The aggregate of everything upstream of `dst`, as reconstructed by its
/// members after a merge from `src_group`. Only recorded by traced runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialSumRecord {
    pub stage: usize,
    pub src_group: usize,
    pub dst_group: usize,
    /// Users whose `x + u` is contained in `value`.
    pub contributors: Vec<usize>,
    pub value: FieldVec,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<TraceRecord>,
    pub partial_sums: Vec<PartialSumRecord>,
}

impl Transcript {
    /// Message records as JSON lines, in delivery order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for rec in &self.messages {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_short() {
        let v = FieldVec::from_u64s(&[1, 2, 3]);
        let a = TraceRecord::for_upload(0, 7, &[&v]);
        let b = TraceRecord::for_upload(0, 7, &[&v]);
        assert_eq!(a, b);
        assert_eq!(a.digest.len(), 16);
        assert_eq!(a.field_elems, 3);
        let c = TraceRecord::for_upload(0, 7, &[&FieldVec::from_u64s(&[1, 2, 4])]);
        assert_ne!(a.digest, c.digest);
    }

    #[test]
    fn jsonl_has_one_line_per_message() {
        let v = FieldVec::from_u64s(&[9]);
        let t = Transcript {
            messages: vec![TraceRecord::for_upload(0, 1, &[&v]), TraceRecord::for_upload(1, 2, &[&v])],
            partial_sums: Vec::new(),
        };
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.contains("\"digest\"")));
    }
}
