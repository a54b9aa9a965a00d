//! Redundant XOR key forwarding around a satellite ring.
//!
//! Alice (ground station A) and Bob (ground station B) are served by ring
//! satellites `attach_a` and `attach_b`. The ring splits into two directed
//! segments between them and a secret is relayed along each. Every hop XORs
//! its incoming message with the link keys it shares behind and ahead of it,
//! so no single relay ever sees an unmasked value.
//!
//! Along a segment, nodes are numbered by *position*: 0 is Alice, 1 is the
//! attachment satellite `attach_a`, ..., `m` is `attach_b` and `m + 1` is Bob.
//! Twin-field keys join positions `a < b` with `2 <= b - a <= r`; two
//! point-to-point keys join each ground station to its serving satellite.
//! The message leaving position `p` is the secret XOR every key whose edge
//! spans the cut between `p` and `p + 1`.

mod adversary;
mod gf2;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use adversary::{
    adversary_can_recover, feasible_neighbor_range, min_compromise, CompromiseScenario,
    Knowledge, MinCompromise, RecoveryTarget, SegmentVerdict, Verdict,
};
pub use gf2::{BitVec, Span};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelayError {
    #[error("attachment satellites coincide (index {0})")]
    SameAttachment(usize),
    #[error("ring of {0} satellites is too small")]
    RingTooSmall(usize),
    #[error("satellite index {index} outside ring of {n_sats}")]
    BadIndex { index: usize, n_sats: usize },
    #[error("neighbour range {r} invalid: must be >= 2 and <= {max} for this segment")]
    BadRange { r: usize, max: usize },
    #[error("need at least one ring")]
    NoRings,
    #[error("key length must be at least one bit")]
    EmptyKey,
    #[error("missing link key {0:?}")]
    MissingKey(KeyId),
    #[error("secret length {got} does not match key length {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("transcript is incomplete")]
    IncompleteTranscript,
    #[error("compromise scenario lists {got} rings, path has {expected}")]
    RingCount { got: usize, expected: usize },
    #[error("link budget: {0}")]
    LinkBudget(String),
}

pub type Result<T> = std::result::Result<T, RelayError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    /// Increasing satellite indices from `attach_a`.
    Plus,
    /// Decreasing satellite indices from `attach_a`.
    Minus,
}

impl Segment {
    pub const BOTH: [Segment; 2] = [Segment::Plus, Segment::Minus];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    GroundA,
    GroundB,
    Sat(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyKind {
    TwinField,
    PointToPoint,
}

/// A key edge between two positions of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub kind: KeyKind,
    pub from: usize,
    pub to: usize,
}

impl Edge {
    pub fn crosses(&self, p: usize) -> bool {
        self.from <= p && p < self.to
    }

    pub fn touches(&self, p: usize) -> bool {
        self.from == p || self.to == p
    }
}

/// Identifies one link key: ring, segment and edge positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyId {
    pub ring: usize,
    pub segment: Segment,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkKey {
    pub kind: KeyKind,
    pub endpoints: (Node, Node),
    pub bits: BitVec,
}

/// Both directed segments between two attachment satellites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPath {
    pub n_sats: usize,
    pub attach_a: usize,
    pub attach_b: usize,
    /// Satellites from `attach_a` to `attach_b` with increasing index.
    pub segment_plus: Vec<usize>,
    /// Satellites from `attach_a` to `attach_b` with decreasing index.
    pub segment_minus: Vec<usize>,
    pub neighbor_range: usize,
    pub n_rings: usize,
}

/// Build both segments of a ring for attachments `i` (Alice) and `k` (Bob).
pub fn build_paths(n_sats: usize, i: usize, k: usize, r: usize, n_rings: usize) -> Result<RingPath> {
    if n_sats < 3 {
        return Err(RelayError::RingTooSmall(n_sats));
    }
    for index in [i, k] {
        if index >= n_sats {
            return Err(RelayError::BadIndex { index, n_sats });
        }
    }
    if i == k {
        return Err(RelayError::SameAttachment(i));
    }
    if n_rings == 0 {
        return Err(RelayError::NoRings);
    }
    let plus_len = (k + n_sats - i) % n_sats + 1;
    let minus_len = (i + n_sats - k) % n_sats + 1;
    let plus: Vec<usize> = (0..plus_len).map(|s| (i + s) % n_sats).collect();
    let minus: Vec<usize> = (0..minus_len).map(|s| (i + n_sats - s) % n_sats).collect();
    let max = plus.len().min(minus.len());
    if r < 2 || r > max {
        return Err(RelayError::BadRange { r, max });
    }
    Ok(RingPath {
        n_sats,
        attach_a: i,
        attach_b: k,
        segment_plus: plus,
        segment_minus: minus,
        neighbor_range: r,
        n_rings,
    })
}

impl RingPath {
    pub fn satellites(&self, segment: Segment) -> &[usize] {
        match segment {
            Segment::Plus => &self.segment_plus,
            Segment::Minus => &self.segment_minus,
        }
    }

    /// Position of Bob on a segment (satellite count + 1).
    pub fn bob_position(&self, segment: Segment) -> usize {
        self.satellites(segment).len() + 1
    }

    pub fn node_at(&self, segment: Segment, position: usize) -> Node {
        let sats = self.satellites(segment);
        if position == 0 {
            Node::GroundA
        } else if position > sats.len() {
            Node::GroundB
        } else {
            Node::Sat(sats[position - 1])
        }
    }

    /// Positions of satellite `sat` on a segment (at most one).
    pub fn position_of(&self, segment: Segment, sat: usize) -> Option<usize> {
        self.satellites(segment)
            .iter()
            .position(|s| *s == sat)
            .map(|p| p + 1)
    }

    /// Key edges of a segment: the Alice-side point-to-point key, every
    /// twin-field key in range, then the Bob-side point-to-point key.
    pub fn edges(&self, segment: Segment) -> Vec<Edge> {
        let bob = self.bob_position(segment);
        let mut out = vec![Edge {
            kind: KeyKind::PointToPoint,
            from: 0,
            to: 1,
        }];
        for from in 0..bob {
            for span in 2..=self.neighbor_range {
                let to = from + span;
                if to <= bob {
                    out.push(Edge {
                        kind: KeyKind::TwinField,
                        from,
                        to,
                    });
                }
            }
        }
        out.push(Edge {
            kind: KeyKind::PointToPoint,
            from: bob - 1,
            to: bob,
        });
        out
    }
}

/// Link keys of every ring and segment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyStore {
    pub key_len: usize,
    pub keys: BTreeMap<KeyId, LinkKey>,
}

impl KeyStore {
    pub fn get(&self, id: &KeyId) -> Result<&LinkKey> {
        self.keys.get(id).ok_or(RelayError::MissingKey(*id))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

fn random_bits(rng: &mut ChaCha20Rng, len: usize) -> BitVec {
    let words = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
    BitVec::from_words(words, len)
}

/// Draw independent uniform keys for every edge of every segment and ring.
pub fn generate_link_keys(path: &RingPath, key_len: usize, seed: u64) -> Result<KeyStore> {
    if key_len == 0 {
        return Err(RelayError::EmptyKey);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut keys = BTreeMap::new();
    for ring in 0..path.n_rings {
        for segment in Segment::BOTH {
            for e in path.edges(segment) {
                let id = KeyId {
                    ring,
                    segment,
                    from: e.from,
                    to: e.to,
                };
                let key = LinkKey {
                    kind: e.kind,
                    endpoints: (path.node_at(segment, e.from), path.node_at(segment, e.to)),
                    bits: random_bits(&mut rng, key_len),
                };
                keys.insert(id, key);
            }
        }
    }
    Ok(KeyStore { key_len, keys })
}

/// Messages sent along one segment: entry `p` leaves position `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardTranscript {
    pub ring: usize,
    pub segment: Segment,
    pub messages: Vec<(usize, BitVec)>,
}

/// Relay `secret` hop by hop along a segment.
///
/// Each node XORs in the keys it shares with earlier positions (removing
/// their masks) and the keys it shares with later positions (adding new
/// masks). Alice has no earlier keys, so her message is the secret under
/// her forward keys.
pub fn forward(
    path: &RingPath,
    ring: usize,
    segment: Segment,
    secret: &BitVec,
    keys: &KeyStore,
) -> Result<ForwardTranscript> {
    if secret.len() != keys.key_len {
        return Err(RelayError::LengthMismatch {
            got: secret.len(),
            expected: keys.key_len,
        });
    }
    let edges = path.edges(segment);
    let bob = path.bob_position(segment);
    let mut messages = Vec::with_capacity(bob);
    let mut current = secret.clone();
    for p in 0..bob {
        for e in edges.iter().filter(|e| e.touches(p)) {
            let id = KeyId {
                ring,
                segment,
                from: e.from,
                to: e.to,
            };
            current.xor_assign(&keys.get(&id)?.bits);
        }
        messages.push((p, current.clone()));
    }
    Ok(ForwardTranscript {
        ring,
        segment,
        messages,
    })
}

/// Bob strips the keys he shares with the segment from the final message.
pub fn recover(path: &RingPath, transcript: &ForwardTranscript, keys: &KeyStore) -> Result<BitVec> {
    let bob = path.bob_position(transcript.segment);
    let last = transcript
        .messages
        .iter()
        .find(|(p, _)| *p == bob - 1)
        .ok_or(RelayError::IncompleteTranscript)?;
    let mut x = last.1.clone();
    for e in path.edges(transcript.segment).iter().filter(|e| e.to == bob) {
        let id = KeyId {
            ring: transcript.ring,
            segment: transcript.segment,
            from: e.from,
            to: e.to,
        };
        x.xor_assign(&keys.get(&id)?.bits);
    }
    Ok(x)
}

/// XOR of the two segment secrets of one ring.
pub fn ring_secret(x_plus: &BitVec, x_minus: &BitVec) -> BitVec {
    let mut x = x_plus.clone();
    x.xor_assign(x_minus);
    x
}

/// Run both segments of every ring with fresh secrets drawn from `seed`.
///
/// Returns, per ring, Alice's and Bob's copies of the ring secret
/// `X+ xor X-`, followed by the XOR across rings.
pub fn run_protocol(path: &RingPath, keys: &KeyStore, seed: u64) -> Result<(Vec<(BitVec, BitVec)>, BitVec)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut per_ring = Vec::with_capacity(path.n_rings);
    let mut total = BitVec::zeros(keys.key_len);
    for ring in 0..path.n_rings {
        let mut alice = BitVec::zeros(keys.key_len);
        let mut bob = BitVec::zeros(keys.key_len);
        for segment in Segment::BOTH {
            let x = random_bits(&mut rng, keys.key_len);
            let t = forward(path, ring, segment, &x, keys)?;
            alice.xor_assign(&x);
            bob.xor_assign(&recover(path, &t, keys)?);
        }
        total.xor_assign(&bob);
        per_ring.push((alice, bob));
    }
    Ok((per_ring, total))
}
