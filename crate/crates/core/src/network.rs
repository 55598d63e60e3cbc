//! Token routing, message transcripts and per-client views.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{ClientId, Graph};

fn require_walkable(graph: &Graph) -> Result<()> {
    if graph.num_clients() < 2 {
        return Err(Error::InvalidArgument("routing needs at least two clients".into()));
    }
    Ok(())
}

/// Uniform neighbour of `current` (edge walk).
pub fn route_uniform(current: ClientId, graph: &Graph, rng: &mut Rng) -> Result<ClientId> {
    require_walkable(graph)?;
    let nb = graph.neighbors(current);
    if nb.is_empty() {
        return Err(Error::InvalidArgument(format!("client {current} has no neighbours")));
    }
    Ok(nb[rng.below(nb.len())])
}

/// `u` with probability `p`, otherwise uniform over `V ∖ {u}`. Selection is
/// i.i.d. per hop and ignores the current holder.
pub fn route_rrdu(u: ClientId, p: f64, graph: &Graph, rng: &mut Rng) -> Result<ClientId> {
    require_walkable(graph)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0,1], got {p}")));
    }
    if rng.bernoulli(p) {
        return Ok(u);
    }
    let k = rng.below(graph.num_clients() - 1);
    // Skip over u in the 0-based ordering of the remaining clients.
    let idx = if k >= u.index() { k + 1 } else { k };
    Ok(ClientId::from_index(idx))
}

/// Uniform client over all of `V`.
pub fn route_any(graph: &Graph, rng: &mut Rng) -> ClientId {
    ClientId::from_index(rng.below(graph.num_clients()))
}

/// Per-hop probability `q = (1−p)/(N−1)` that an i.i.d. RR-DU route lands on a
/// fixed client other than `u`.
pub fn first_observation_param(p: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0,1], got {p}")));
    }
    if p == 1.0 {
        return Err(Error::Precondition(
            "p = 1 never routes away from u: first-observation delay is infinite".into(),
        ));
    }
    Ok((1.0 - p) / (n - 1) as f64)
}

/// Number of routes until `observer` first receives the token.
pub fn sample_first_observation(u: ClientId, observer: ClientId, p: f64, graph: &Graph, rng: &mut Rng) -> Result<u64> {
    if observer == u {
        return Err(Error::InvalidArgument("observer must differ from u".into()));
    }
    first_observation_param(p, graph.num_clients())?;
    let mut hops = 1;
    while route_rrdu(u, p, graph, rng)? != observer {
        hops += 1;
    }
    Ok(hops)
}

/// First 8 bytes of SHA-256 over the little-endian parameter encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamsHash(pub [u8; 8]);

impl ParamsHash {
    pub fn of(params: &[f64]) -> Self {
        let mut h = Sha256::new();
        for x in params {
            h.update(x.to_le_bytes());
        }
        let digest = h.finalize();
        let mut out = [0u8; 8];
        out.copy_from_slice(&digest[..8]);
        ParamsHash(out)
    }

    fn parse(s: &str) -> Option<Self> {
        if s.len() != 16 {
            return None;
        }
        let mut out = [0u8; 8];
        for (k, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * k..2 * k + 2], 16).ok()?;
        }
        Some(ParamsHash(out))
    }
}

impl fmt::Display for ParamsHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// One token hop: `sender` updated the model in `round` and forwards it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub sender: ClientId,
    pub receiver: ClientId,
    /// The sender is the unlearning client, so this hop carried a noisy
    /// corrective step.
    pub at_u: bool,
    pub params_hash: ParamsHash,
}

impl Message {
    pub fn touches(&self, v: ClientId) -> bool {
        self.sender == v || self.receiver == v
    }
}

/// Append-only log of every hop in one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Transcript { messages: Vec::with_capacity(n) }
    }

    /// Appends a message. Rounds must strictly increase.
    pub fn push(&mut self, msg: Message) {
        debug_assert!(self.messages.last().is_none_or(|m| m.round < msg.round));
        self.messages.push(msg);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Number of hops that ran at the unlearning client.
    pub fn sensitive_hops(&self) -> usize {
        self.messages.iter().filter(|m| m.at_u).count()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "round,sender,receiver,at_u,params_hash")?;
        for m in &self.messages {
            writeln!(
                w,
                "{},{},{},{},{}",
                m.round,
                m.sender,
                m.receiver,
                u8::from(m.at_u),
                m.params_hash
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format {
            path: path.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut t = Transcript::new();
        for (k, line) in file.lines().enumerate() {
            let line = line?;
            if k == 0 {
                if line.trim() != "round,sender,receiver,at_u,params_hash" {
                    return Err(bad(1, "unexpected header"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(k + 1, "expected 5 fields"));
            }
            let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(k + 1, "bad integer"));
            let at_u = match f[3].trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad(k + 1, "at_u must be 0 or 1")),
            };
            t.messages.push(Message {
                round: num(f[0])?,
                sender: ClientId(num(f[1])?),
                receiver: ClientId(num(f[2])?),
                at_u,
                params_hash: ParamsHash::parse(f[4].trim()).ok_or_else(|| bad(k + 1, "bad hash"))?,
            });
        }
        Ok(t)
    }
}

/// Messages visible to one client: those it sent or received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub observer: ClientId,
    pub messages: Vec<Message>,
}

pub fn extract_view(messages: &[Message], observer: ClientId) -> View {
    View {
        observer,
        messages: messages.iter().copied().filter(|m| m.touches(observer)).collect(),
    }
}
