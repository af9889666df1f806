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

mod common;

use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use proptest::prelude::*;
use sadmm_core::consensus::{
    run, Directive, GlobalState, LocalPool, Mode, Regularizer, RoundParams, RoundResult, SolverConfig, StepKind,
    Trace, WorkerSettings, WorkerStats,
};
use sadmm_core::linalg::Vector;
use sadmm_core::model::{Basis, Labels, ModelSpec, Shard, ShardObjective};
use sadmm_core::transport::cluster::{barrier_respected, bind, FrameSink, Inbound};
use sadmm_core::transport::{
    decode, encode, serve_worker, AssignShard, Cluster, Message, TcpLink, TransportError,
};
use sadmm_core::subproblem::NewtonSettings;

use common::ridge_shards;

fn any_f64() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(f64::from_bits)
}

fn any_vec() -> impl Strategy<Value = Vector> {
    prop::collection::vec(any_f64(), 0..=256).prop_map(Vector::from_vec)
}

fn any_params() -> impl Strategy<Value = Message> {
    (any::<u64>(), any_vec(), any_vec(), 0u8..3).prop_map(|(k, x0, lambda, d)| {
        Message::RoundParams(RoundParams { k, x0, lambda, directive: Directive::from_code(d).unwrap() })
    })
}

fn any_result() -> impl Strategy<Value = Message> {
    (any::<u64>(), any::<u32>(), any_vec(), any_f64(), any_f64(), 0u8..4, any::<bool>(), any::<[u32; 3]>(), any_f64())
        .prop_map(|(k, worker_id, x, eps_norm, loss, kind, fallback, it, wall)| {
            Message::RoundResult(RoundResult {
                k,
                worker_id,
                x,
                eps_norm,
                stats: WorkerStats {
                    loss,
                    kind: StepKind::from_code(kind).unwrap(),
                    fallback,
                    newton_iters: it[0],
                    corrector_iters: it[1],
                    linear_solves: it[2],
                    wall_time_s: wall,
                },
            })
        })
}

fn any_assign() -> impl Strategy<Value = Message> {
    (1usize..6, 1usize..20, any::<u64>(), any_f64(), any::<bool>()).prop_map(|(m, rows, seed, rho, stale)| {
        let spec = ModelSpec::SoftmaxClassifier { input_dim: m, hidden: 3, classes: 4 };
        let features: Vec<f64> = (0..rows * m).map(|j| f64::from_bits(seed.rotate_left(j as u32) >> 2)).collect();
        let indices = (0..rows as u32).map(|j| j % 4).collect();
        let shard = Shard::new(features, m, Labels::Classes { indices, classes: 4 }).unwrap();
        let initial_x = Vector::from_vec((0..spec.parameter_count()).map(|j| j as f64 * rho).collect());
        Message::AssignShard(Box::new(AssignShard {
            worker_id: (seed % 7) as u32,
            spec,
            shard,
            settings: WorkerSettings {
                rho,
                opt_tol: 0.01,
                max_correctors: 20,
                ladmm_mu: 1e4,
                newton: NewtonSettings::default(),
                stale_params: stale,
            },
            initial_x,
        }))
    })
}

fn any_message() -> impl Strategy<Value = Message> {
    prop_oneof![
        any::<u32>().prop_map(|worker_id| Message::Hello { worker_id }),
        any_params(),
        any_result(),
        any_assign(),
        Just(Message::Shutdown),
        (any::<u32>(), any::<u64>(), ".{0,40}").prop_map(|(worker_id, k, message)| Message::WorkerError {
            worker_id,
            k,
            message
        }),
    ]
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn encode_decode_is_bitwise_identity(msg in any_message()) {
        let bytes = encode(&msg);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back), bytes);
        match (&msg, &back) {
            (Message::RoundParams(a), Message::RoundParams(b)) => {
                prop_assert_eq!(bits(&a.x0), bits(&b.x0));
                prop_assert_eq!(bits(&a.lambda), bits(&b.lambda));
                prop_assert_eq!((a.k, a.directive), (b.k, b.directive));
            }
            (Message::RoundResult(a), Message::RoundResult(b)) => {
                prop_assert_eq!(bits(&a.x), bits(&b.x));
                prop_assert_eq!(a.eps_norm.to_bits(), b.eps_norm.to_bits());
                prop_assert_eq!(a.stats.loss.to_bits(), b.stats.loss.to_bits());
                prop_assert_eq!(a.stats.wall_time_s.to_bits(), b.stats.wall_time_s.to_bits());
                prop_assert_eq!((a.k, a.worker_id, a.stats.kind, a.stats.fallback), (b.k, b.worker_id, b.stats.kind, b.stats.fallback));
            }
            (Message::AssignShard(a), Message::AssignShard(b)) => {
                prop_assert_eq!(bits(a.shard.features()), bits(b.shard.features()));
                prop_assert_eq!(a.settings.rho.to_bits(), b.settings.rho.to_bits());
                prop_assert_eq!(&a.spec, &b.spec);
                prop_assert_eq!(a.shard.labels(), b.shard.labels());
            }
            _ => prop_assert_eq!(&msg, &back),
        }
    }

    #[test]
    fn truncation_never_decodes(msg in any_message(), cut in 1usize..64) {
        let bytes = encode(&msg);
        let cut = cut.min(bytes.len());
        prop_assert!(decode(&bytes[..bytes.len() - cut]).is_err());
    }
}

struct NullSink;

impl FrameSink for NullSink {
    fn send_frame(&mut self, _frame: &[u8]) -> Result<(), TransportError> {
        Ok(())
    }
}

fn fake_result(k: u64, worker_id: u32) -> Vec<u8> {
    encode(&Message::RoundResult(RoundResult {
        k,
        worker_id,
        x: vec![worker_id as f64].into(),
        eps_norm: 0.0,
        stats: WorkerStats {
            loss: 0.0,
            kind: StepKind::Exact,
            fallback: false,
            newton_iters: 1,
            corrector_iters: 0,
            linear_solves: 1,
            wall_time_s: 0.0,
        },
    }))
}

fn fake_cluster(n: usize) -> (Cluster, mpsc::Sender<Inbound>) {
    let (tx, rx) = mpsc::channel();
    let sinks: Vec<Box<dyn FrameSink>> = (0..n).map(|_| Box::new(NullSink) as Box<dyn FrameSink>).collect();
    (Cluster::from_parts(sinks, rx), tx)
}

fn round(k: u64, n: usize) -> Vec<RoundParams> {
    (0..n)
        .map(|_| RoundParams { k, x0: vec![0.0].into(), lambda: vec![0.0].into(), directive: Directive::Exact })
        .collect()
}

#[test]
fn gather_orders_by_worker_id() {
    let (mut cluster, tx) = fake_cluster(4);
    cluster.broadcast_round(&round(0, 4)).unwrap();
    for id in [2u32, 0, 3, 1] {
        tx.send(Inbound::Frame { slot: id, bytes: fake_result(0, id) }).unwrap();
    }
    let got = cluster.gather_round(0).unwrap();
    assert_eq!(got.iter().map(|r| r.worker_id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert!(barrier_respected(cluster.sequence_log(), 4));
}

#[test]
fn stale_round_is_a_protocol_error() {
    let (mut cluster, tx) = fake_cluster(2);
    cluster.broadcast_round(&round(5, 2)).unwrap();
    tx.send(Inbound::Frame { slot: 0, bytes: fake_result(4, 0) }).unwrap();
    assert_eq!(
        cluster.gather_round(5),
        Err(TransportError::StaleRound { worker_id: 0, expected: 5, got: 4 })
    );
}

#[test]
fn disconnect_names_the_worker() {
    let (mut cluster, tx) = fake_cluster(3);
    cluster.broadcast_round(&round(0, 3)).unwrap();
    tx.send(Inbound::Frame { slot: 0, bytes: fake_result(0, 0) }).unwrap();
    tx.send(Inbound::Closed { slot: 2 }).unwrap();
    assert_eq!(cluster.gather_round(0), Err(TransportError::Disconnected { worker_id: 2 }));
}

#[test]
fn second_broadcast_before_gather_is_refused() {
    let (mut cluster, _tx) = fake_cluster(1);
    cluster.broadcast_round(&round(0, 1)).unwrap();
    assert_eq!(cluster.broadcast_round(&round(1, 1)), Err(TransportError::RoundOutstanding));
}

fn problem() -> (ModelSpec, Vec<Shard>, SolverConfig) {
    let objs = ridge_shards(400, 5, 4, 21);
    let cfg = SolverConfig {
        n_workers: 4,
        mode: Mode::Sadmm,
        reg: Regularizer::L1,
        omega: 0.01,
        max_iter: 40,
        fixed_iterations: true,
        rng_seed: 3,
        ..Default::default()
    };
    (objs[0].spec.clone(), objs.into_iter().map(|o| o.shard).collect(), cfg)
}

fn strip_timing(mut t: Trace) -> Trace {
    for r in &mut t.records {
        r.max_worker_wall_time_s = 0.0;
        r.workers.iter_mut().for_each(|w| w.wall_time_s = 0.0);
    }
    t
}

fn run_on(cluster: &mut Cluster, spec: &ModelSpec, shards: &[Shard], cfg: &SolverConfig) -> Trace {
    let init = GlobalState::initial(spec.parameter_count(), cfg);
    cluster.assign(spec, shards, WorkerSettings::from_config(cfg), &init.xs).unwrap();
    let trace = run(cfg, init, cluster).unwrap();
    assert!(barrier_respected(cluster.sequence_log(), cfg.n_workers));
    strip_timing(trace)
}

#[test]
fn loopback_matches_in_process_pool() {
    let (spec, shards, cfg) = problem();
    let mut cluster = Cluster::loopback(4).unwrap();
    let wire = run_on(&mut cluster, &spec, &shards, &cfg);

    let init = GlobalState::initial(spec.parameter_count(), &cfg);
    let objs = shards.iter().map(|s| ShardObjective::new(spec.clone(), s.clone()).unwrap()).collect();
    let mut pool = LocalPool::new(objs, &init.xs, WorkerSettings::from_config(&cfg));
    let local = strip_timing(run(&cfg, init, &mut pool).unwrap());
    assert_eq!(wire, local);
}

#[test]
fn single_worker_loopback() {
    let spec = ModelSpec::LinearFeatures { input_dim: 2, basis: Basis::Affine };
    let shard = Shard::new(vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0], 2, Labels::Regression { values: vec![1.0, 2.0, 3.0], outputs: 1 })
        .unwrap();
    let cfg = SolverConfig { n_workers: 1, mode: Mode::Admm, max_iter: 5, ..Default::default() };
    let mut cluster = Cluster::loopback(1).unwrap();
    let trace = run_on(&mut cluster, &spec, &[shard], &cfg);
    assert_eq!(trace.records.len(), 5);
}

#[test]
fn tcp_matches_loopback_bitwise() {
    let (spec, shards, cfg) = problem();
    let mut loopback = Cluster::loopback(4).unwrap();
    let reference = run_on(&mut loopback, &spec, &shards, &cfg);

    let (listener, addr) = bind("127.0.0.1:0").unwrap();
    // Connect in scrambled order; the master orders slots by announced id.
    let workers: Vec<_> = [3u32, 1, 0, 2]
        .into_iter()
        .map(|id| {
            thread::spawn(move || {
                let mut link = TcpLink::connect(addr, Duration::from_secs(10)).unwrap();
                serve_worker(&mut link, id).unwrap();
            })
        })
        .collect();
    let mut cluster = Cluster::accept_tcp(&listener, 4).unwrap();
    let tcp = run_on(&mut cluster, &spec, &shards, &cfg);
    cluster.shutdown();
    for w in workers {
        w.join().unwrap();
    }
    assert_eq!(tcp, reference);
}

#[test]
fn worker_errors_surface_as_solver_errors() {
    let (spec, _, cfg) = problem();
    let mut cluster = Cluster::loopback(4).unwrap();
    // Skip assignment: every worker refuses the round.
    let init = GlobalState::initial(spec.parameter_count(), &cfg);
    let err = run(&cfg, init, &mut cluster).unwrap_err();
    assert!(matches!(err, sadmm_core::consensus::ConsensusError::Worker { .. }), "{err}");
}
