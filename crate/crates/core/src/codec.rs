//! Canonical byte encoding shared by the wire codec, signature statements and
//! digests.
//!
//! Integers are fixed-width big-endian, variable-length fields carry a `u32`
//! length (or count) prefix, booleans are a single `0x00`/`0x01` byte and maps
//! are emitted in ascending key order.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::command::{Command, CommandId, Footprint, ProcessId};
use crate::crypto::Signature;
use crate::sequence::CmdSequence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated input: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("invalid {what} byte {value:#04x}")]
    InvalidByte { what: &'static str, value: u8 },
    #[error("string is not valid utf-8")]
    InvalidUtf8,
    #[error("length prefix {0} exceeds remaining input")]
    LengthOverflow(u32),
    #[error("{0} entries are not strictly ascending")]
    NotCanonical(&'static str),
    #[error("sequence repeats command {0}")]
    DuplicateCommand(CommandId),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_bool(&mut self, v: bool) {
        self.buf.push(v as u8);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.put_len(bytes.len());
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_bytes(s.as_bytes());
    }

    pub fn put_len(&mut self, n: usize) {
        self.put_u32(u32::try_from(n).expect("field longer than u32::MAX"));
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self, what: &'static str) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            value => Err(DecodeError::InvalidByte { what, value }),
        }
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    /// Reads a count prefix; each element occupies at least `min_elem` bytes,
    /// which bounds allocations on hostile input.
    pub fn count(&mut self, min_elem: usize) -> Result<usize, DecodeError> {
        let n = self.u32()?;
        if (n as usize).saturating_mul(min_elem.max(1)) > self.remaining() {
            return Err(DecodeError::LengthOverflow(n));
        }
        Ok(n as usize)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let n = self.count(1)?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?).map_err(|_| DecodeError::InvalidUtf8)
    }
}

/// Types with a canonical byte form.
pub trait Encode {
    fn encode_to(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_to(&mut w);
        w.into_bytes()
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    /// Decodes a value that must span the whole input.
    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

impl Encode for ProcessId {
    fn encode_to(&self, w: &mut Writer) {
        w.put_u32(self.0);
    }
}

impl Decode for ProcessId {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ProcessId(r.u32()?))
    }
}

impl Encode for CommandId {
    fn encode_to(&self, w: &mut Writer) {
        self.proposer.encode_to(w);
        w.put_u64(self.seqno);
    }
}

impl Decode for CommandId {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(CommandId {
            proposer: ProcessId::decode_from(r)?,
            seqno: r.u64()?,
        })
    }
}

impl Encode for Signature {
    fn encode_to(&self, w: &mut Writer) {
        w.put_bytes(self.as_bytes());
    }
}

impl Decode for Signature {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Signature::from_bytes(r.bytes()?))
    }
}

fn put_keys(w: &mut Writer, keys: &BTreeSet<String>) {
    w.put_len(keys.len());
    for k in keys {
        w.put_str(k);
    }
}

fn get_keys(r: &mut Reader<'_>) -> Result<BTreeSet<String>, DecodeError> {
    let n = r.count(4)?;
    let mut out = BTreeSet::new();
    let mut last: Option<String> = None;
    for _ in 0..n {
        let k = r.string()?;
        if last.as_ref().is_some_and(|l| *l >= k) {
            return Err(DecodeError::NotCanonical("key set"));
        }
        last = Some(k.clone());
        out.insert(k);
    }
    Ok(out)
}

/// Command fields covered by the issuer's signature, in wire order.
pub(crate) fn put_unsigned_command(
    w: &mut Writer,
    id: CommandId,
    payload: &[u8],
    footprint: &Footprint,
    universal: bool,
) {
    id.encode_to(w);
    w.put_bytes(payload);
    put_keys(w, &footprint.reads);
    put_keys(w, &footprint.writes);
    w.put_bool(universal);
}

impl Encode for Command {
    fn encode_to(&self, w: &mut Writer) {
        put_unsigned_command(w, self.id(), self.payload(), self.footprint(), self.is_universal());
        self.signature().encode_to(w);
    }
}

impl Decode for Command {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let id = CommandId::decode_from(r)?;
        let payload = r.bytes()?;
        let reads = get_keys(r)?;
        let writes = get_keys(r)?;
        let universal = r.bool("universal flag")?;
        let sig = Signature::decode_from(r)?;
        Ok(Command::from_parts(id, payload, Footprint { reads, writes }, universal, sig))
    }
}

impl Encode for CmdSequence {
    fn encode_to(&self, w: &mut Writer) {
        w.put_len(self.len());
        for c in self {
            c.encode_to(w);
        }
    }
}

/// Smallest possible encoded command, used to bound count prefixes.
const MIN_COMMAND_LEN: usize = 12 + 4 + 4 + 4 + 1 + 4;

impl Decode for CmdSequence {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.count(MIN_COMMAND_LEN)?;
        let mut items = Vec::with_capacity(n);
        for _ in 0..n {
            items.push(Command::decode_from(r)?);
        }
        let s = CmdSequence::from(items);
        if s.has_duplicates() {
            let mut seen = std::collections::HashSet::new();
            let dup = s.ids().find(|id| !seen.insert(*id)).unwrap();
            return Err(DecodeError::DuplicateCommand(dup));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cmd, seq};

    #[test]
    fn command_layout_is_fixed() {
        let c = Command::from_parts(
            CommandId::new(ProcessId(1), 2),
            b"hi".to_vec(),
            Footprint::new(["k"], ["k"]),
            false,
            Signature::from_bytes(vec![0xab]),
        );
        let expected: Vec<u8> = [
            &[0, 0, 0, 1][..],
            &[0, 0, 0, 0, 0, 0, 0, 2],
            &[0, 0, 0, 2, b'h', b'i'],
            &[0, 0, 0, 1, 0, 0, 0, 1, b'k'],
            &[0, 0, 0, 1, 0, 0, 0, 1, b'k'],
            &[0],
            &[0, 0, 0, 1, 0xab],
        ]
        .concat();
        assert_eq!(c.to_bytes(), expected);
        assert_eq!(Command::from_bytes(&expected).unwrap(), c);
    }

    #[test]
    fn sequence_round_trip() {
        let s = seq(&[&cmd(0, &["a"], &[]), &cmd(1, &[], &["b"])]);
        assert_eq!(CmdSequence::from_bytes(&s.to_bytes()).unwrap(), s);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let a = cmd(0, &["a"], &[]);
        let raw: CmdSequence = vec![a.clone(), a].into();
        assert!(matches!(
            CmdSequence::from_bytes(&raw.to_bytes()),
            Err(DecodeError::DuplicateCommand(_))
        ));
    }

    #[test]
    fn huge_count_does_not_allocate() {
        let bytes = [0xff, 0xff, 0xff, 0xff];
        assert_eq!(
            CmdSequence::from_bytes(&bytes),
            Err(DecodeError::LengthOverflow(u32::MAX))
        );
    }

    #[test]
    fn bad_bool_is_rejected() {
        let mut bytes = cmd(0, &[], &[]).to_bytes();
        // universal flag sits right before the 4-byte signature length + sig
        let sig_len = u32::from_be_bytes(bytes[bytes.len() - 4 - 32..bytes.len() - 32].try_into().unwrap());
        assert_eq!(sig_len, 32);
        let flag = bytes.len() - 4 - 32 - 1;
        bytes[flag] = 7;
        assert!(matches!(
            Command::from_bytes(&bytes),
            Err(DecodeError::InvalidByte { .. })
        ));
    }
}
