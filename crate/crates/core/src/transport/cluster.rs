/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Master-side endpoints and the worker serve loop.
//!
//! Both carriers funnel every incoming frame into one inbox channel tagged
//! with the sending worker's slot, so the gather logic is shared. Loopback
//! workers are threads exchanging encoded frames over channels. TCP workers
//! are separate processes with one connection each, read by one thread per
//! connection on the master side.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::consensus::{ConsensusError, RoundParams, RoundResult, WorkerNode, WorkerPool, WorkerSettings};
use crate::linalg::Vector;
use crate::model::{ModelSpec, Shard, ShardObjective};

use super::{decode, encode, read_frame, AssignShard, Message, TransportError};

/// An event seen by the master, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqEvent {
    Sent { k: u64, worker: u32 },
    Received { k: u64, worker: u32 },
}

/// Whether no round-`k + 1` message precedes the last round-`k` result.
pub fn barrier_respected(log: &[SeqEvent], workers: usize) -> bool {
    let mut received: std::collections::HashMap<u64, usize> = Default::default();
    for ev in log {
        match *ev {
            SeqEvent::Received { k, .. } => *received.entry(k).or_default() += 1,
            SeqEvent::Sent { k, .. } if k > 0 => {
                if received.get(&(k - 1)).copied().unwrap_or(0) < workers {
                    return false;
                }
            }
            SeqEvent::Sent { .. } => {}
        }
    }
    true
}

pub enum Inbound {
    Frame { slot: u32, bytes: Vec<u8> },
    Closed { slot: u32 },
}

/// Master-to-worker half of a connection.
pub trait FrameSink: Send {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError>;
}

impl FrameSink for Sender<Vec<u8>> {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.send(frame.to_vec()).map_err(|_| TransportError::Io("loopback channel closed".into()))
    }
}

impl FrameSink for TcpStream {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.write_all(frame)?;
        Ok(())
    }
}

/// Worker-side connection.
pub trait WorkerLink {
    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError>;
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError>;
}

struct LoopbackLink {
    slot: u32,
    rx: Receiver<Vec<u8>>,
    tx: Sender<Inbound>,
}

impl WorkerLink for LoopbackLink {
    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError> {
        self.rx.recv().map_err(|_| TransportError::Io("master hung up".into()))
    }
    fn send_frame(&mut self, bytes: Vec<u8>) -> Result<(), TransportError> {
        self.tx
            .send(Inbound::Frame { slot: self.slot, bytes })
            .map_err(|_| TransportError::Io("master hung up".into()))
    }
}

impl Drop for LoopbackLink {
    fn drop(&mut self) {
        let _ = self.tx.send(Inbound::Closed { slot: self.slot });
    }
}

pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    /// Connects to the master, retrying until `patience` has passed.
    pub fn connect(addr: impl ToSocketAddrs + Copy, patience: Duration) -> Result<Self, TransportError> {
        let deadline = Instant::now() + patience;
        loop {
            match TcpStream::connect(addr) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    return Ok(TcpLink { stream });
                }
                Err(e) if Instant::now() < deadline => {
                    debug!("connect failed ({e}), retrying");
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl WorkerLink for TcpLink {
    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError> {
        read_frame(&mut self.stream)
    }
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        self.stream.write_all(&frame)?;
        Ok(())
    }
}

/// Worker main loop: announce, accept a shard, then answer rounds until shutdown.
pub fn serve_worker(link: &mut impl WorkerLink, worker_id: u32) -> Result<(), TransportError> {
    link.send_frame(encode(&Message::Hello { worker_id }))?;
    let mut node: Option<WorkerNode<ShardObjective>> = None;
    loop {
        let msg = decode(&link.recv_frame()?)?;
        let reply = match msg {
            Message::AssignShard(a) => {
                if a.worker_id != worker_id {
                    return Err(TransportError::UnknownWorker(a.worker_id));
                }
                match ShardObjective::new(a.spec, a.shard) {
                    Ok(obj) if obj.spec.parameter_count() == a.initial_x.dim() => {
                        node = Some(WorkerNode::new(worker_id, obj, a.initial_x, a.settings));
                        None
                    }
                    Ok(_) => Some(error_reply(worker_id, 0, "initial iterate has the wrong dimension".into())),
                    Err(e) => Some(error_reply(worker_id, 0, e.to_string())),
                }
            }
            Message::RoundParams(p) => Some(match node.as_mut() {
                None => error_reply(worker_id, p.k, "round received before shard assignment".into()),
                Some(n) if n.objective().spec.parameter_count() != p.x0.dim() => {
                    error_reply(worker_id, p.k, "round parameters have the wrong dimension".into())
                }
                Some(n) => match n.handle(&p) {
                    Ok(r) => Message::RoundResult(r),
                    Err(e) => error_reply(worker_id, p.k, e.to_string()),
                },
            }),
            Message::Shutdown => return Ok(()),
            other => Some(error_reply(worker_id, 0, format!("unexpected {} message", other.name()))),
        };
        if let Some(reply) = reply {
            link.send_frame(encode(&reply))?;
        }
    }
}

fn error_reply(worker_id: u32, k: u64, message: String) -> Message {
    Message::WorkerError { worker_id, k, message }
}

pub struct Cluster {
    sinks: Vec<Box<dyn FrameSink>>,
    inbox: Receiver<Inbound>,
    threads: Vec<JoinHandle<()>>,
    log: Vec<SeqEvent>,
    outstanding: Option<u64>,
    closed: bool,
}

impl Cluster {
    /// Assembles a cluster from raw parts; `sinks[i]` reaches worker `i`.
    pub fn from_parts(sinks: Vec<Box<dyn FrameSink>>, inbox: Receiver<Inbound>) -> Self {
        Cluster { sinks, inbox, threads: Vec::new(), log: Vec::new(), outstanding: None, closed: false }
    }

    /// `n` in-process workers on their own threads.
    pub fn loopback(n: usize) -> Result<Self, TransportError> {
        let (inbox_tx, inbox) = mpsc::channel();
        let mut sinks: Vec<Box<dyn FrameSink>> = Vec::with_capacity(n);
        let mut threads = Vec::with_capacity(n);
        for slot in 0..n as u32 {
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            let mut link = LoopbackLink { slot, rx, tx: inbox_tx.clone() };
            threads.push(thread::spawn(move || {
                if let Err(e) = serve_worker(&mut link, slot) {
                    warn!("loopback worker {slot} stopped: {e}");
                }
            }));
            sinks.push(Box::new(tx));
        }
        let mut cluster = Cluster::from_parts(sinks, inbox);
        cluster.threads = threads;
        cluster.await_hellos(n)?;
        Ok(cluster)
    }

    /// Accepts `n` worker connections on `listener` and orders them by the
    /// worker id each announces.
    pub fn accept_tcp(listener: &TcpListener, n: usize) -> Result<Self, TransportError> {
        let mut slots: Vec<Option<TcpStream>> = (0..n).map(|_| None).collect();
        for _ in 0..n {
            let (mut stream, peer) = listener.accept()?;
            stream.set_nodelay(true)?;
            let id = match decode(&read_frame(&mut stream)?)? {
                Message::Hello { worker_id } => worker_id,
                other => return Err(TransportError::Unexpected(other.name())),
            };
            debug!("worker {id} connected from {peer}");
            match slots.get_mut(id as usize) {
                Some(slot @ None) => *slot = Some(stream),
                _ => return Err(TransportError::UnknownWorker(id)),
            }
        }
        let (inbox_tx, inbox) = mpsc::channel();
        let mut sinks: Vec<Box<dyn FrameSink>> = Vec::with_capacity(n);
        let mut threads = Vec::with_capacity(n);
        for (slot, stream) in slots.into_iter().enumerate() {
            let stream = stream.expect("every slot filled");
            let mut reader = stream.try_clone()?;
            let tx = inbox_tx.clone();
            let slot = slot as u32;
            threads.push(thread::spawn(move || loop {
                match read_frame(&mut reader) {
                    Ok(bytes) => {
                        if tx.send(Inbound::Frame { slot, bytes }).is_err() {
                            return;
                        }
                    }
                    Err(_) => {
                        let _ = tx.send(Inbound::Closed { slot });
                        return;
                    }
                }
            }));
            sinks.push(Box::new(stream));
        }
        let mut cluster = Cluster::from_parts(sinks, inbox);
        cluster.threads = threads;
        Ok(cluster)
    }

    fn await_hellos(&mut self, n: usize) -> Result<(), TransportError> {
        let mut seen = vec![false; n];
        for _ in 0..n {
            match self.inbox.recv() {
                Ok(Inbound::Frame { slot, bytes }) => match decode(&bytes)? {
                    Message::Hello { worker_id } if worker_id == slot && !seen[slot as usize] => {
                        seen[slot as usize] = true
                    }
                    Message::Hello { worker_id } => return Err(TransportError::UnknownWorker(worker_id)),
                    other => return Err(TransportError::Unexpected(other.name())),
                },
                Ok(Inbound::Closed { slot }) => return Err(TransportError::Disconnected { worker_id: slot }),
                Err(_) => return Err(TransportError::Io("inbox closed".into())),
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.sinks.len()
    }

    pub fn sequence_log(&self) -> &[SeqEvent] {
        &self.log
    }

    /// Sends each worker its shard, model and starting point.
    pub fn assign(
        &mut self,
        spec: &ModelSpec,
        shards: &[Shard],
        settings: WorkerSettings,
        initial_xs: &[Vector],
    ) -> Result<(), TransportError> {
        if shards.len() != self.size() || initial_xs.len() != self.size() {
            return Err(TransportError::Malformed(format!(
                "{} shards and {} starting points for {} workers",
                shards.len(),
                initial_xs.len(),
                self.size()
            )));
        }
        for (i, sink) in self.sinks.iter_mut().enumerate() {
            let msg = Message::AssignShard(Box::new(AssignShard {
                worker_id: i as u32,
                spec: spec.clone(),
                shard: shards[i].clone(),
                settings,
                initial_x: initial_xs[i].clone(),
            }));
            sink.send_frame(&encode(&msg))?;
        }
        Ok(())
    }

    /// Sends `params[i]` to worker `i`. Only one round may be outstanding.
    pub fn broadcast_round(&mut self, params: &[RoundParams]) -> Result<(), TransportError> {
        if self.outstanding.is_some() {
            return Err(TransportError::RoundOutstanding);
        }
        if params.len() != self.size() {
            return Err(TransportError::Malformed(format!("{} params for {} workers", params.len(), self.size())));
        }
        let k = params[0].k;
        if params.iter().any(|p| p.k != k) {
            return Err(TransportError::Malformed("round parameters disagree on k".into()));
        }
        for (i, (sink, p)) in self.sinks.iter_mut().zip(params).enumerate() {
            sink.send_frame(&encode(&Message::RoundParams(p.clone())))?;
            self.log.push(SeqEvent::Sent { k, worker: i as u32 });
        }
        self.outstanding = Some(k);
        Ok(())
    }

    /// Blocks until every worker has answered round `k`; results come back in
    /// worker-id order whatever the arrival order.
    pub fn gather_round(&mut self, k: u64) -> Result<Vec<RoundResult>, TransportError> {
        if self.outstanding != Some(k) {
            return Err(TransportError::Unexpected("gather without a matching broadcast"));
        }
        // The round is settled one way or another once gathering starts.
        self.outstanding = None;
        let n = self.size();
        let mut slots: Vec<Option<RoundResult>> = (0..n).map(|_| None).collect();
        let mut missing = n;
        while missing > 0 {
            let (slot, bytes) = match self.inbox.recv() {
                Ok(Inbound::Frame { slot, bytes }) => (slot, bytes),
                Ok(Inbound::Closed { slot }) => return Err(TransportError::Disconnected { worker_id: slot }),
                Err(_) => return Err(TransportError::Io("inbox closed".into())),
            };
            match decode(&bytes)? {
                Message::RoundResult(r) => {
                    if r.worker_id != slot {
                        return Err(TransportError::UnknownWorker(r.worker_id));
                    }
                    if r.k != k {
                        return Err(TransportError::StaleRound { worker_id: slot, expected: k, got: r.k });
                    }
                    let entry = &mut slots[slot as usize];
                    if entry.is_some() {
                        return Err(TransportError::Malformed(format!("worker {slot} answered round {k} twice")));
                    }
                    self.log.push(SeqEvent::Received { k, worker: slot });
                    *entry = Some(r);
                    missing -= 1;
                }
                Message::WorkerError { worker_id, message, .. } => {
                    return Err(TransportError::Remote { worker_id, message })
                }
                other => return Err(TransportError::Unexpected(other.name())),
            }
        }
        Ok(slots.into_iter().map(|r| r.expect("all slots filled")).collect())
    }

    /// Tells every worker to exit and waits for local threads.
    pub fn shutdown(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        for sink in &mut self.sinks {
            let _ = sink.send_frame(&encode(&Message::Shutdown));
        }
        self.sinks.clear();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Cluster {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl WorkerPool for Cluster {
    fn size(&self) -> usize {
        self.sinks.len()
    }

    fn round(&mut self, params: Vec<RoundParams>) -> Result<Vec<RoundResult>, ConsensusError> {
        let k = params.first().map(|p| p.k).ok_or(ConsensusError::NoWorkers)?;
        self.broadcast_round(&params).and_then(|()| self.gather_round(k)).map_err(|e| match e {
            TransportError::Remote { worker_id, message } => {
                ConsensusError::Worker { worker_id: worker_id as usize, message }
            }
            e @ (TransportError::StaleRound { .. } | TransportError::UnknownWorker(_)) => {
                ConsensusError::Protocol(e.to_string())
            }
            e => ConsensusError::Transport(e.to_string()),
        })
    }
}

/// Binds a listener; port 0 picks a free port.
pub fn bind(addr: &str) -> Result<(TcpListener, SocketAddr), TransportError> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}
