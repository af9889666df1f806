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

use std::io::Read;

use crate::consensus::{Directive, RoundParams, RoundResult, StepKind, WorkerSettings, WorkerStats};
use crate::linalg::Vector;
use crate::model::{Basis, Labels, ModelSpec, Shard};
use crate::subproblem::NewtonSettings;

use super::{AssignShard, Message, TransportError, HEADER_LEN, MAGIC, VERSION};

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("array longer than u32::MAX"));
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.len(vs.len());
        for &v in vs {
            self.f64(v);
        }
    }
    fn u32s(&mut self, vs: &[u32]) {
        self.len(vs.len());
        for &v in vs {
            self.u32(v);
        }
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("count exceeds u32"));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TransportError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(TransportError::Truncated { needed: n, available });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, TransportError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, TransportError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, TransportError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, TransportError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, TransportError> {
        Ok(self.u32()? as usize)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, TransportError> {
        let n = self.usize()?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| malformed("array length overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn u32s(&mut self) -> Result<Vec<u32>, TransportError> {
        let n = self.usize()?;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| malformed("array length overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn str(&mut self) -> Result<String, TransportError> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| malformed("string is not utf-8"))
    }
    fn bool(&mut self) -> Result<bool, TransportError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(malformed(&format!("invalid flag byte {b}"))),
        }
    }
    fn finish(&self) -> Result<(), TransportError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(malformed(&format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

fn malformed(what: &str) -> TransportError {
    TransportError::Malformed(what.to_string())
}

fn put_spec(w: &mut Writer, spec: &ModelSpec) {
    match *spec {
        ModelSpec::LinearFeatures { input_dim, basis } => {
            w.u8(0);
            w.usize(input_dim);
            w.u8(match basis {
                Basis::Identity => 0,
                Basis::Affine => 1,
                Basis::Quadratic => 2,
            });
        }
        ModelSpec::MlpRegressor { input_dim, hidden, output_dim } => {
            w.u8(1);
            w.usize(input_dim);
            w.usize(hidden);
            w.usize(output_dim);
        }
        ModelSpec::SoftmaxClassifier { input_dim, hidden, classes } => {
            w.u8(2);
            w.usize(input_dim);
            w.usize(hidden);
            w.usize(classes);
        }
    }
}

fn get_spec(r: &mut Reader) -> Result<ModelSpec, TransportError> {
    Ok(match r.u8()? {
        0 => {
            let input_dim = r.usize()?;
            let basis = match r.u8()? {
                0 => Basis::Identity,
                1 => Basis::Affine,
                2 => Basis::Quadratic,
                b => return Err(malformed(&format!("unknown basis {b}"))),
            };
            ModelSpec::LinearFeatures { input_dim, basis }
        }
        1 => ModelSpec::MlpRegressor { input_dim: r.usize()?, hidden: r.usize()?, output_dim: r.usize()? },
        2 => ModelSpec::SoftmaxClassifier { input_dim: r.usize()?, hidden: r.usize()?, classes: r.usize()? },
        t => return Err(malformed(&format!("unknown model kind {t}"))),
    })
}

fn put_shard(w: &mut Writer, shard: &Shard) {
    w.usize(shard.input_dim());
    w.f64s(shard.features());
    match shard.labels() {
        Labels::Regression { values, outputs } => {
            w.u8(0);
            w.usize(*outputs);
            w.f64s(values);
        }
        Labels::Classes { indices, classes } => {
            w.u8(1);
            w.usize(*classes);
            w.u32s(indices);
        }
    }
}

fn get_shard(r: &mut Reader) -> Result<Shard, TransportError> {
    let input_dim = r.usize()?;
    let features = r.f64s()?;
    let labels = match r.u8()? {
        0 => {
            let outputs = r.usize()?;
            Labels::Regression { values: r.f64s()?, outputs }
        }
        1 => {
            let classes = r.usize()?;
            Labels::Classes { indices: r.u32s()?, classes }
        }
        t => return Err(malformed(&format!("unknown label kind {t}"))),
    };
    Shard::new(features, input_dim, labels).map_err(|e| malformed(&e.to_string()))
}

fn put_settings(w: &mut Writer, s: &WorkerSettings) {
    w.f64(s.rho);
    w.f64(s.opt_tol);
    w.usize(s.max_correctors);
    w.f64(s.ladmm_mu);
    w.f64(s.newton.tol);
    w.usize(s.newton.max_iters);
    w.f64(s.newton.armijo);
    w.f64(s.newton.backtrack);
    w.f64(s.newton.min_step);
    w.u8(u8::from(s.stale_params));
}

fn get_settings(r: &mut Reader) -> Result<WorkerSettings, TransportError> {
    Ok(WorkerSettings {
        rho: r.f64()?,
        opt_tol: r.f64()?,
        max_correctors: r.usize()?,
        ladmm_mu: r.f64()?,
        newton: NewtonSettings {
            tol: r.f64()?,
            max_iters: r.usize()?,
            armijo: r.f64()?,
            backtrack: r.f64()?,
            min_step: r.f64()?,
        },
        stale_params: r.bool()?,
    })
}

fn payload(msg: &Message) -> Vec<u8> {
    let mut w = Writer::default();
    match msg {
        Message::Hello { worker_id } => w.u32(*worker_id),
        Message::AssignShard(a) => {
            w.u32(a.worker_id);
            put_spec(&mut w, &a.spec);
            put_shard(&mut w, &a.shard);
            put_settings(&mut w, &a.settings);
            w.f64s(&a.initial_x);
        }
        Message::RoundParams(p) => {
            w.u64(p.k);
            w.u8(p.directive.code());
            w.f64s(&p.x0);
            w.f64s(&p.lambda);
        }
        Message::RoundResult(r) => {
            w.u64(r.k);
            w.u32(r.worker_id);
            w.f64s(&r.x);
            w.f64(r.eps_norm);
            let s = &r.stats;
            w.f64(s.loss);
            w.u8(s.kind.code());
            w.u8(u8::from(s.fallback));
            w.u32(s.newton_iters);
            w.u32(s.corrector_iters);
            w.u32(s.linear_solves);
            w.f64(s.wall_time_s);
        }
        Message::Shutdown => {}
        Message::WorkerError { worker_id, k, message } => {
            w.u32(*worker_id);
            w.u64(*k);
            w.str(message);
        }
    }
    w.0
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let body = payload(msg);
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.type_code());
    out.extend_from_slice(&u32::try_from(body.len()).expect("payload exceeds u32").to_le_bytes());
    out.extend_from_slice(&body);
    out
}

/// Validates a header and returns `(message type, payload length)`.
fn parse_header(h: &[u8]) -> Result<(u8, usize), TransportError> {
    if h.len() < HEADER_LEN {
        return Err(TransportError::Truncated { needed: HEADER_LEN, available: h.len() });
    }
    let magic: [u8; 4] = h[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(TransportError::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(TransportError::BadVersion(h[4]));
    }
    let len = u32::from_le_bytes(h[6..10].try_into().unwrap()) as usize;
    Ok((h[5], len))
}

/// Decodes exactly one frame.
pub fn decode(frame: &[u8]) -> Result<Message, TransportError> {
    let (ty, len) = parse_header(frame)?;
    let body = &frame[HEADER_LEN..];
    if body.len() < len {
        return Err(TransportError::Truncated { needed: len, available: body.len() });
    }
    if body.len() > len {
        return Err(malformed(&format!("{} bytes after payload", body.len() - len)));
    }
    let mut r = Reader { buf: body, pos: 0 };
    let msg = match ty {
        1 => Message::Hello { worker_id: r.u32()? },
        2 => Message::AssignShard(Box::new(AssignShard {
            worker_id: r.u32()?,
            spec: get_spec(&mut r)?,
            shard: get_shard(&mut r)?,
            settings: get_settings(&mut r)?,
            initial_x: r.f64s()?.into(),
        })),
        3 => {
            let k = r.u64()?;
            let code = r.u8()?;
            let directive = Directive::from_code(code).ok_or_else(|| malformed(&format!("directive {code}")))?;
            Message::RoundParams(RoundParams { k, directive, x0: r.f64s()?.into(), lambda: r.f64s()?.into() })
        }
        4 => {
            let k = r.u64()?;
            let worker_id = r.u32()?;
            let x: Vector = r.f64s()?.into();
            let eps_norm = r.f64()?;
            let loss = r.f64()?;
            let code = r.u8()?;
            let kind = StepKind::from_code(code).ok_or_else(|| malformed(&format!("step kind {code}")))?;
            let stats = WorkerStats {
                loss,
                kind,
                fallback: r.bool()?,
                newton_iters: r.u32()?,
                corrector_iters: r.u32()?,
                linear_solves: r.u32()?,
                wall_time_s: r.f64()?,
            };
            Message::RoundResult(RoundResult { k, worker_id, x, eps_norm, stats })
        }
        5 => Message::Shutdown,
        6 => Message::WorkerError { worker_id: r.u32()?, k: r.u64()?, message: r.str()? },
        t => return Err(TransportError::UnknownType(t)),
    };
    r.finish()?;
    Ok(msg)
}

/// Reads one whole frame from a byte stream.
pub fn read_frame(stream: &mut impl Read) -> Result<Vec<u8>, TransportError> {
    let mut frame = vec![0u8; HEADER_LEN];
    stream.read_exact(&mut frame)?;
    let (_, len) = parse_header(&frame)?;
    frame.resize(HEADER_LEN + len, 0);
    stream.read_exact(&mut frame[HEADER_LEN..]).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => TransportError::Truncated { needed: len, available: 0 },
        _ => TransportError::Io(e.to_string()),
    })?;
    Ok(frame)
}
