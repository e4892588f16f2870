//! Metered two-party transport between the twin servers.
//!
//! Frames are `u32 BE length || type byte || payload`; the length covers the
//! type byte and payload. Both an in-process queue pair and a TCP stream
//! implement [`Transport`]; a protocol session must produce byte-identical
//! transcripts over either.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;

use crate::error::{Error, Result};

/// Fixed per-frame overhead: 4 length bytes plus the type byte.
pub const FRAME_HEADER_BYTES: u64 = 5;

/// The three roles of a session. Protocol traffic only ever flows S1 ↔ S2;
/// the user appears once at submission and once at retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyId {
    User,
    S1,
    S2,
}

/// Protocol message types carried in the frame type byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    CmpBlind = 1,
    CmpResult = 2,
    DivReq = 3,
    DivScalar = 4,
    ProSum = 5,
    ProScalar = 6,
    FpsThresholds = 7,
}

impl FrameType {
    fn from_byte(byte: u8) -> Result<Self> {
        Ok(match byte {
            1 => Self::CmpBlind,
            2 => Self::CmpResult,
            3 => Self::DivReq,
            4 => Self::DivScalar,
            5 => Self::ProSum,
            6 => Self::ProScalar,
            7 => Self::FpsThresholds,
            other => return Err(Error::BadFrame(format!("unknown frame type {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub ty: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(ty: FrameType, payload: Vec<u8>) -> Self {
        Self { ty, payload }
    }

    fn encode(&self) -> Vec<u8> {
        let len = (self.payload.len() + 1) as u32;
        let mut buf = Vec::with_capacity(self.payload.len() + 5);
        buf.extend_from_slice(&len.to_be_bytes());
        buf.push(self.ty as u8);
        buf.extend_from_slice(&self.payload);
        buf
    }

    fn decode(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::BadFrame("empty frame body".into()));
        }
        let ty = FrameType::from_byte(bytes[0])?;
        Ok(Self { ty, payload: bytes[1..].to_vec() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Out,
    In,
}

/// Per-session accounting of messages, bytes and rounds, viewed from one
/// endpoint. A round is a maximal unidirectional burst of frames: the counter
/// bumps whenever the direction of traffic flips.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub messages: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub rounds: u64,
    last_direction: Option<Direction>,
}

impl Transcript {
    fn record(&mut self, direction: Direction, wire_bytes: u64) {
        self.messages += 1;
        match direction {
            Direction::Out => self.bytes_sent += wire_bytes,
            Direction::In => self.bytes_received += wire_bytes,
        }
        if self.last_direction != Some(direction) {
            self.rounds += 1;
            self.last_direction = Some(direction);
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }
}

/// Reliable, in-order delivery of whole frame bodies (everything after the
/// length prefix).
pub trait Transport: Send {
    fn send_bytes(&mut self, body: &[u8]) -> Result<()>;
    fn recv_bytes(&mut self) -> Result<Vec<u8>>;
}

/// A transport endpoint plus its transcript.
pub struct Channel {
    transport: Box<dyn Transport>,
    pub transcript: Transcript,
}

impl Channel {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self { transport, transcript: Transcript::default() }
    }

    pub fn send(&mut self, frame: &Frame) -> Result<()> {
        let encoded = frame.encode();
        self.transport.send_bytes(&encoded[4..])?;
        self.transcript.record(Direction::Out, encoded.len() as u64);
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Frame> {
        let body = self.transport.recv_bytes()?;
        let wire = body.len() as u64 + 4;
        let frame = Frame::decode(body)?;
        self.transcript.record(Direction::In, wire);
        Ok(frame)
    }
}

// ---------------------------------------------------------------------------
// in-process transport
// ---------------------------------------------------------------------------

pub struct InProcess {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
}

/// A connected pair of in-process endpoints.
pub fn in_process_pair() -> (Channel, Channel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    let a = InProcess { tx: tx_a, rx: rx_a };
    let b = InProcess { tx: tx_b, rx: rx_b };
    (Channel::new(Box::new(a)), Channel::new(Box::new(b)))
}

impl Transport for InProcess {
    fn send_bytes(&mut self, body: &[u8]) -> Result<()> {
        self.tx
            .send(body.to_vec())
            .map_err(|_| Error::ChannelClosed("peer dropped".into()))
    }

    fn recv_bytes(&mut self) -> Result<Vec<u8>> {
        self.rx
            .recv()
            .map_err(|_| Error::ChannelClosed("peer dropped".into()))
    }
}

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

pub struct Tcp {
    stream: TcpStream,
}

impl Tcp {
    /// Client side: connect to a listening server role.
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Channel> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        Ok(Channel::new(Box::new(Self { stream })))
    }

    /// Server side: accept exactly one peer.
    pub fn accept(listener: &TcpListener) -> Result<Channel> {
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true).ok();
        Ok(Channel::new(Box::new(Self { stream })))
    }
}

impl Transport for Tcp {
    fn send_bytes(&mut self, body: &[u8]) -> Result<()> {
        let len = (body.len() as u32).to_be_bytes();
        self.stream
            .write_all(&len)
            .and_then(|_| self.stream.write_all(body))
            .map_err(|e| Error::ChannelClosed(e.to_string()))
    }

    fn recv_bytes(&mut self) -> Result<Vec<u8>> {
        let mut len = [0u8; 4];
        self.stream
            .read_exact(&mut len)
            .map_err(|e| Error::ChannelClosed(e.to_string()))?;
        let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
        self.stream
            .read_exact(&mut body)
            .map_err(|e| Error::ChannelClosed(e.to_string()))?;
        Ok(body)
    }
}
