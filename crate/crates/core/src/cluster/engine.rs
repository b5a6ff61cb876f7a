use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::admission::{Admission, AdmissionController};
use super::events::EventQueue;
use super::worker::{DecodeWorker, PrefillWorker};
use crate::config::SimConfig;
use crate::cost::CostParams;
use crate::kv::{BlockId, KvError, Namespace, Pool};
use crate::metrics::{
    CacheSummary, FleetSummary, MetricsReport, ReportMetadata, RequestAggregates, RequestRecord,
    REPORT_SCHEMA_VERSION,
};
use crate::model::{
    ContextMode, EventPayload, Request, RequestId, SessionId, SessionSpec, SessionState,
    SessionStatus, SimEvent, SimTime, SpecError, WorkerId,
};
use crate::router::{self, Fleet, PrefillLoad, RouterError, RoutingTable, ServingMode};
use crate::workload::{self, synth_tokens, Purpose, WorkloadError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("livelock: next event at {next}us is more than {bound_us}us after {now}us")]
    Livelock {
        now: SimTime,
        next: SimTime,
        bound_us: u64,
    },
    #[error("event queue drained with {unfinished} session(s) unfinished")]
    Stalled { unfinished: usize },
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("invalid session: {0}")]
    Session(#[from] SpecError),
    #[error("duplicate session id {0}")]
    DuplicateSession(SessionId),
    #[error("kv invariant violated: {0}")]
    Kv(KvError),
}

#[derive(Debug)]
pub struct SimOutcome {
    pub report: MetricsReport,
    /// One line per processed event, when tracing was enabled.
    pub trace: Option<String>,
}

/// Generates the configured workload from `run.seed` and simulates it.
pub fn simulate(config: &SimConfig, trace: bool) -> Result<SimOutcome, SimError> {
    let sessions = workload::generate(&config.workload, config.run.seed)?;
    simulate_sessions(config, sessions, config.run.seed, trace)
}

/// Simulates an explicit session list; `token_seed` drives synthetic token content.
pub fn simulate_sessions(
    config: &SimConfig,
    sessions: Vec<SessionSpec>,
    token_seed: u64,
    trace: bool,
) -> Result<SimOutcome, SimError> {
    let mut sim = Simulation::new(config, sessions, token_seed)?;
    if trace {
        sim.enable_trace();
    }
    sim.run()
}

#[derive(Debug)]
struct InFlight {
    req: Request,
    prefill_worker: WorkerId,
    namespace: Namespace,
    prefill_pins: Vec<BlockId>,
    decode_worker: Option<WorkerId>,
    generated: u32,
    first_token: Option<SimTime>,
    last_token: SimTime,
    itl_us: Vec<u64>,
}

/// One simulation run. Drive it with [`Simulation::step`] or [`Simulation::run`].
#[derive(Debug)]
pub struct Simulation {
    config: SimConfig,
    cost: CostParams,
    token_seed: u64,
    livelock_bound_us: u64,
    queue: EventQueue,
    sessions: BTreeMap<SessionId, SessionState>,
    failed_sessions: BTreeSet<SessionId>,
    inflight: HashMap<RequestId, InFlight>,
    next_request: u64,
    fleet: Fleet,
    prefill: Vec<PrefillWorker>,
    decode: Vec<DecodeWorker>,
    routing: RoutingTable,
    admission: AdmissionController,
    records: Vec<RequestRecord>,
    failed_requests: u64,
    ns_lookups: BTreeMap<Namespace, (u64, u64)>,
    peak_footprint: BTreeMap<Namespace, u64>,
    peak_footprint_total: u64,
    events: u64,
    trace: Option<String>,
}

impl Simulation {
    pub fn new(
        config: &SimConfig,
        specs: Vec<SessionSpec>,
        token_seed: u64,
    ) -> Result<Self, SimError> {
        let mode = config.run.mode;
        let fleet = Fleet::new(
            mode,
            &config.workload.models,
            config.fleet.prefill_workers,
            config.fleet.decode_workers_per_model,
        );
        let block_size = config.cache.block_size as usize;
        let prefill = (0..fleet.prefill_count())
            .map(|i| {
                let pool = match config.cache.prefill_capacity_blocks.blocks() {
                    Some(c) => Pool::new(block_size, c as usize),
                    None => Pool::unbounded(block_size),
                };
                PrefillWorker::new(WorkerId(i), pool)
            })
            .collect();
        let mut decode = Vec::new();
        for &m in fleet.models() {
            for w in fleet.decode_workers(m)? {
                decode.push(DecodeWorker::new(
                    w,
                    m,
                    config.cache.decode_capacity_blocks * block_size as u64,
                    config.fleet.max_batch as usize,
                ));
            }
        }

        let mut queue = EventQueue::new();
        let mut sessions = BTreeMap::new();
        for spec in specs {
            spec.validate()?;
            for a in &spec.agent_chain {
                fleet.decode_workers(a.model_id)?;
            }
            let id = spec.session_id;
            let arrival = spec.arrival_time;
            if sessions.insert(id, SessionState::new(spec)).is_some() {
                return Err(SimError::DuplicateSession(id));
            }
            queue.schedule(arrival, EventPayload::SessionArrival { session: id });
        }

        Ok(Self {
            config: config.clone(),
            cost: config.cost.clone(),
            token_seed,
            livelock_bound_us: (config.run.livelock_bound_s * 1e6) as u64,
            queue,
            sessions,
            failed_sessions: BTreeSet::new(),
            inflight: HashMap::default(),
            next_request: 0,
            fleet,
            prefill,
            decode,
            routing: RoutingTable::new(),
            admission: AdmissionController::new(config.fleet.max_concurrent_sessions),
            records: Vec::new(),
            failed_requests: 0,
            ns_lookups: BTreeMap::new(),
            peak_footprint: BTreeMap::new(),
            peak_footprint_total: 0,
            events: 0,
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(String::new);
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn mode(&self) -> ServingMode {
        self.fleet.mode()
    }

    pub fn prefill_workers(&self) -> &[PrefillWorker] {
        &self.prefill
    }

    pub fn decode_workers(&self) -> &[DecodeWorker] {
        &self.decode
    }

    pub fn session(&self, id: SessionId) -> Option<&SessionState> {
        self.sessions.get(&id)
    }

    pub fn records(&self) -> &[RequestRecord] {
        &self.records
    }

    /// Processes the next event. Returns `None` once the queue is empty.
    pub fn step(&mut self) -> Result<Option<SimEvent>, SimError> {
        let Some(next) = self.queue.peek_time() else {
            return Ok(None);
        };
        let now = self.queue.now();
        if next.since(now) > self.livelock_bound_us {
            return Err(SimError::Livelock {
                now,
                next,
                bound_us: self.livelock_bound_us,
            });
        }
        let ev = self.queue.pop().expect("peeked");
        self.events += 1;
        let who = self.tracing().then(|| self.trace_subject(&ev));
        let detail = self.handle(&ev)?;
        if let (Some(who), Some(detail)) = (who, detail) {
            self.trace_line(&ev, who, &detail);
        }
        Ok(Some(ev))
    }

    pub fn run(mut self) -> Result<SimOutcome, SimError> {
        while self.step()?.is_some() {}
        let unfinished = self
            .sessions
            .values()
            .filter(|s| s.status != SessionStatus::Done)
            .count();
        if unfinished > 0 {
            return Err(SimError::Stalled { unfinished });
        }
        Ok(self.finish())
    }

    fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    fn detail(&self, f: impl FnOnce() -> String) -> Option<String> {
        self.tracing().then(f)
    }

    fn handle(&mut self, ev: &SimEvent) -> Result<Option<String>, SimError> {
        match ev.payload {
            EventPayload::SessionArrival { session } => self.on_arrival(session),
            EventPayload::PrefillStart { worker, request } => self.on_prefill_start(worker, request),
            EventPayload::PrefillComplete { worker, request } => {
                self.on_prefill_complete(worker, request)
            }
            EventPayload::HandoffComplete { worker, request } => {
                self.on_handoff_complete(worker, request)
            }
            EventPayload::DecodeStep { worker } => self.on_decode_step(worker),
            EventPayload::RequestComplete { worker, request } => {
                self.on_request_complete(worker, request)
            }
            EventPayload::SessionComplete { session } => self.on_session_complete(session),
        }
    }

    /// `(session, step)` columns of a trace line.
    fn trace_subject(&self, ev: &SimEvent) -> (String, String) {
        match ev.payload {
            EventPayload::SessionArrival { session } | EventPayload::SessionComplete { session } => {
                (session.to_string(), "-".to_string())
            }
            EventPayload::PrefillStart { request, .. }
            | EventPayload::PrefillComplete { request, .. }
            | EventPayload::HandoffComplete { request, .. }
            | EventPayload::RequestComplete { request, .. } => match self.inflight.get(&request) {
                Some(f) => (
                    f.req.session_id.to_string(),
                    format!("t{}.{}", f.req.turn_index, f.req.step_index),
                ),
                None => ("-".to_string(), "-".to_string()),
            },
            EventPayload::DecodeStep { .. } => ("-".to_string(), "-".to_string()),
        }
    }

    fn trace_line(&mut self, ev: &SimEvent, (session, step): (String, String), detail: &str) {
        let worker = match ev.payload {
            EventPayload::PrefillStart { worker, .. }
            | EventPayload::PrefillComplete { worker, .. }
            | EventPayload::HandoffComplete { worker, .. }
            | EventPayload::DecodeStep { worker }
            | EventPayload::RequestComplete { worker, .. } => worker.to_string(),
            _ => "-".to_string(),
        };
        let out = self.trace.as_mut().expect("tracing");
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            ev.time,
            ev.seq,
            ev.payload.kind(),
            session,
            step,
            worker,
            detail
        );
    }

    fn session_mut(&mut self, id: SessionId) -> &mut SessionState {
        self.sessions.get_mut(&id).expect("known session")
    }

    fn prefill_mut(&mut self, w: WorkerId) -> &mut PrefillWorker {
        &mut self.prefill[w.0 as usize]
    }

    fn decode_mut(&mut self, w: WorkerId) -> &mut DecodeWorker {
        let i = (w.0 - self.fleet.prefill_count()) as usize;
        &mut self.decode[i]
    }

    fn on_arrival(&mut self, s: SessionId) -> Result<Option<String>, SimError> {
        let detail = match self.admission.try_admit(s) {
            Admission::Admitted => {
                self.activate(s)?;
                self.detail(|| "admitted".to_string())
            }
            Admission::Queued { position } => self.detail(|| format!("queued position={position}")),
        };
        Ok(detail)
    }

    fn activate(&mut self, s: SessionId) -> Result<(), SimError> {
        let seed = self.token_seed;
        let st = self.session_mut(s);
        st.status = SessionStatus::Active;
        let prompt = synth_tokens(seed, s, Purpose::Prompt, st.spec.initial_prompt_len as usize);
        st.extend_context(&prompt).expect("active");
        self.issue_step(s)
    }

    /// Issues the request for the session's current agent.
    fn issue_step(&mut self, s: SessionId) -> Result<(), SimError> {
        let seed = self.token_seed;
        let now = self.queue.now();
        let request_id = RequestId(self.next_request);
        self.next_request += 1;

        let st = self.sessions.get_mut(&s).expect("known session");
        let agent = st.current_agent().clone();
        let (turn, step) = (st.turn_index, st.step_index);
        let ext = synth_tokens(
            seed,
            s,
            Purpose::Extension { turn, step },
            agent.input_extension_len as usize,
        );
        let snapshot = match st.spec.context_mode {
            ContextMode::Chained => {
                st.extend_context(&ext).expect("active");
                st.context.clone()
            }
            ContextMode::Parallel => {
                st.pending_turn_tokens.extend_from(&ext);
                st.context.concat(&ext)
            }
        };

        let loads: Vec<PrefillLoad> = self
            .prefill
            .iter()
            .map(|p| PrefillLoad {
                worker: p.id,
                queued: p.backlog(),
                pinned_sessions: p.pinned_sessions,
            })
            .collect();
        let had_pin = self.routing.get(s).is_some();
        let worker =
            router::route_prefill(&self.fleet, &mut self.routing, s, agent.model_id, &loads)?;
        if !had_pin && self.routing.get(s).is_some() {
            self.prefill_mut(worker).pinned_sessions += 1;
            self.session_mut(s).pinned_prefill_worker = Some(worker);
        }

        let req = Request {
            request_id,
            session_id: s,
            model_id: agent.model_id,
            context_snapshot: snapshot,
            output_len: agent.output_len,
            issue_time: now,
            turn_index: turn,
            step_index: step,
        };
        self.inflight.insert(
            request_id,
            InFlight {
                namespace: self.fleet.mode().namespace(agent.model_id),
                req,
                prefill_worker: worker,
                prefill_pins: Vec::new(),
                decode_worker: None,
                generated: 0,
                first_token: None,
                last_token: now,
                itl_us: Vec::new(),
            },
        );
        self.prefill_mut(worker).queue.push_back(request_id);
        self.kick_prefill(worker);
        Ok(())
    }

    fn kick_prefill(&mut self, w: WorkerId) {
        let p = self.prefill_mut(w);
        if p.running.is_some() {
            return;
        }
        if let Some(r) = p.queue.pop_front() {
            p.running = Some(r);
            self.queue.schedule_in(0, EventPayload::PrefillStart { worker: w, request: r });
        }
    }

    fn on_prefill_start(&mut self, w: WorkerId, r: RequestId) -> Result<Option<String>, SimError> {
        let now = self.queue.now();
        let inf = self.inflight.get_mut(&r).expect("in flight");
        let ctx = inf.req.context_snapshot.tokens();
        let pool = &mut self.prefill[w.0 as usize].pool;
        let m = pool.longest_prefix_match(inf.namespace, ctx, now);
        let lookup = self.ns_lookups.entry(inf.namespace).or_default();
        lookup.0 += m.matched_tokens as u64;
        lookup.1 += ctx.len() as u64;
        let new_tokens = (ctx.len() - m.matched_tokens) as u64;
        let dur = self.cost.prefill_time(new_tokens);
        let detail = self.trace.is_some().then(|| {
            format!(
                "ns={} ctx={} matched={} new={} dur={}",
                inf.namespace,
                ctx.len(),
                m.matched_tokens,
                new_tokens,
                dur
            )
        });
        inf.prefill_pins = m.blocks;
        self.queue
            .schedule_in(dur, EventPayload::PrefillComplete { worker: w, request: r });
        Ok(detail)
    }

    fn on_prefill_complete(
        &mut self,
        w: WorkerId,
        r: RequestId,
    ) -> Result<Option<String>, SimError> {
        let now = self.queue.now();
        let inf = self.inflight.get_mut(&r).expect("in flight");
        let worker = &mut self.prefill[w.0 as usize];
        worker.running = None;
        let pool = &mut worker.pool;
        let inserted = pool.insert(inf.namespace, inf.req.context_snapshot.tokens(), now);
        let detail = match inserted {
            Ok(new_blocks) => {
                pool.pin(&new_blocks).map_err(SimError::Kv)?;
                let n = new_blocks.len();
                inf.prefill_pins.extend(new_blocks);
                let model = inf.req.model_id;
                self.update_footprint_peaks();
                self.kick_prefill(w);
                let candidates: Vec<(WorkerId, usize)> = self
                    .fleet
                    .decode_workers(model)?
                    .into_iter()
                    .map(|d| {
                        let i = (d.0 - self.fleet.prefill_count()) as usize;
                        (d, self.decode[i].load())
                    })
                    .collect();
                let d = router::pick_decode(&candidates);
                self.inflight.get_mut(&r).expect("in flight").decode_worker = Some(d);
                self.decode_mut(d).ingest.push_back(r);
                self.kick_decode(d);
                self.detail(|| format!("new_blocks={n} decode={d}"))
            }
            Err(KvError::CapacityExhausted { need, available }) => {
                let pins = std::mem::take(&mut inf.prefill_pins);
                pool.release(&pins).map_err(SimError::Kv)?;
                self.kick_prefill(w);
                self.fail_request(r);
                self.detail(|| {
                    format!("failed capacity_exhausted need={need} available={available}")
                })
            }
            Err(e) => return Err(SimError::Kv(e)),
        };
        Ok(detail)
    }

    fn update_footprint_peaks(&mut self) {
        let mut sum: BTreeMap<Namespace, u64> = BTreeMap::new();
        let mut total = 0;
        for p in &self.prefill {
            for (ns, t) in p.pool.footprint_tokens() {
                *sum.entry(ns).or_default() += t;
                total += t;
            }
        }
        for (ns, t) in sum {
            let peak = self.peak_footprint.entry(ns).or_default();
            *peak = (*peak).max(t);
        }
        self.peak_footprint_total = self.peak_footprint_total.max(total);
    }

    fn fail_request(&mut self, r: RequestId) {
        let inf = self.inflight.remove(&r).expect("in flight");
        self.failed_requests += 1;
        let s = inf.req.session_id;
        self.failed_sessions.insert(s);
        self.queue
            .schedule_in(0, EventPayload::SessionComplete { session: s });
    }

    /// Starts the next handoff if the link is free and the next step if none is running.
    fn kick_decode(&mut self, d: WorkerId) {
        let cost = &self.cost;
        let i = (d.0 - self.fleet.prefill_count()) as usize;
        let dw = &mut self.decode[i];
        if dw.receiving.is_none() {
            if let Some(r) = dw.ingest.pop_front() {
                let tokens = self.inflight[&r].req.context_snapshot.len() as u64;
                let fraction = dw.resident_fraction();
                dw.handoffs += 1;
                if cost.is_staged(fraction) {
                    dw.staged_handoffs += 1;
                }
                let dur = cost.handoff_time(tokens, fraction);
                dw.receiving = Some(r);
                self.queue
                    .schedule_in(dur, EventPayload::HandoffComplete { worker: d, request: r });
            }
        }
        if !dw.stepping {
            dw.fill_batch();
            if !dw.batch.is_empty() {
                let dur = cost.decode_step_time(dw.batch.len(), dw.resident_tokens);
                dw.stepping = true;
                dw.steps += 1;
                self.queue
                    .schedule_in(dur, EventPayload::DecodeStep { worker: d });
            }
        }
    }

    fn on_handoff_complete(
        &mut self,
        d: WorkerId,
        r: RequestId,
    ) -> Result<Option<String>, SimError> {
        let inf = self.inflight.get_mut(&r).expect("in flight");
        let pins = std::mem::take(&mut inf.prefill_pins);
        let tokens = inf.req.context_snapshot.len() as u64;
        self.prefill[inf.prefill_worker.0 as usize]
            .pool
            .release(&pins)
            .map_err(SimError::Kv)?;
        let dw = self.decode_mut(d);
        debug_assert_eq!(dw.receiving, Some(r));
        dw.receiving = None;
        dw.add_resident(tokens);
        dw.ready.push_back(r);
        let (resident, ready) = (dw.resident_tokens, dw.ready.len());
        self.kick_decode(d);
        Ok(self.detail(|| format!("tokens={tokens} resident={resident} ready={ready}")))
    }

    fn on_decode_step(&mut self, d: WorkerId) -> Result<Option<String>, SimError> {
        let now = self.queue.now();
        let i = (d.0 - self.fleet.prefill_count()) as usize;
        let dw = &mut self.decode[i];
        dw.stepping = false;
        let batch = std::mem::take(&mut dw.batch);
        let batch_size = batch.len();
        let mut kept = Vec::with_capacity(batch.len());
        let mut finished = Vec::new();
        for r in batch {
            let inf = self.inflight.get_mut(&r).expect("in flight");
            inf.generated += 1;
            match inf.first_token {
                None => inf.first_token = Some(now),
                Some(_) => inf.itl_us.push(now.since(inf.last_token)),
            }
            inf.last_token = now;
            dw.add_resident(1);
            if inf.generated == inf.req.output_len {
                dw.resident_tokens -=
                    inf.req.context_snapshot.len() as u64 + u64::from(inf.req.output_len);
                finished.push(r);
            } else {
                kept.push(r);
            }
        }
        dw.batch = kept;
        let (done, resident) = (finished.len(), dw.resident_tokens);
        for r in finished {
            self.queue
                .schedule_in(0, EventPayload::RequestComplete { worker: d, request: r });
        }
        self.kick_decode(d);
        Ok(self.detail(|| format!("batch={batch_size} finished={done} resident={resident}")))
    }

    fn on_request_complete(
        &mut self,
        _d: WorkerId,
        r: RequestId,
    ) -> Result<Option<String>, SimError> {
        let now = self.queue.now();
        let inf = self.inflight.remove(&r).expect("in flight");
        let req = &inf.req;
        let first = inf.first_token.expect("completed request has tokens");
        self.records.push(RequestRecord {
            request_id: r,
            session_id: req.session_id,
            model_id: req.model_id,
            turn_index: req.turn_index,
            step_index: req.step_index,
            issue_us: req.issue_time.as_micros(),
            ttft_us: first.since(req.issue_time),
            e2e_us: now.since(req.issue_time),
            out_tokens: inf.generated,
            itl_us: inf.itl_us,
        });

        let s = req.session_id;
        let seed = self.token_seed;
        let out = synth_tokens(
            seed,
            s,
            Purpose::Output {
                turn: req.turn_index,
                step: req.step_index,
            },
            req.output_len as usize,
        );
        let st = self.session_mut(s);
        match st.spec.context_mode {
            ContextMode::Chained => st.extend_context(&out).expect("active"),
            ContextMode::Parallel => st.pending_turn_tokens.extend_from(&out),
        }
        let e2e = now.since(req.issue_time);
        if st.is_last_step_of_turn() {
            let pending = std::mem::take(&mut st.pending_turn_tokens);
            st.extend_context(&pending).expect("active");
            if st.is_last_turn() {
                self.queue
                    .schedule_in(0, EventPayload::SessionComplete { session: s });
                return Ok(self.detail(|| format!("e2e={e2e}")));
            }
            st.turn_index += 1;
            st.step_index = 0;
        } else {
            st.step_index += 1;
        }
        self.issue_step(s)?;
        Ok(self.detail(|| format!("e2e={e2e}")))
    }

    fn on_session_complete(&mut self, s: SessionId) -> Result<Option<String>, SimError> {
        let st = self.session_mut(s);
        st.status = SessionStatus::Done;
        let ctx = st.context.len();
        if let Some(w) = self.routing.unpin(s) {
            self.prefill_mut(w).pinned_sessions -= 1;
        }
        let failed = self.failed_sessions.contains(&s);
        let admitted = self.admission.release();
        if let Some(next) = admitted {
            self.activate(next)?;
        }
        Ok(self.detail(|| match admitted {
            Some(next) => format!("context={ctx} failed={failed} admits={next}"),
            None => format!("context={ctx} failed={failed}"),
        }))
    }

    fn finish(mut self) -> SimOutcome {
        self.records.sort_by_key(|r| r.request_id);
        let end_us = self.queue.now().as_micros();
        let requests =
            RequestAggregates::from_records(&self.records, end_us, self.config.run.warmup_fraction);

        let (mut matched, mut lookup, mut evictions) = (0, 0, 0);
        for p in &self.prefill {
            let st = p.pool.stats();
            matched += st.matched_tokens;
            lookup += st.lookup_tokens;
            evictions += st.eviction_count;
        }
        let ratio = |m: u64, l: u64| if l == 0 { 0.0 } else { m as f64 / l as f64 };
        let cache = CacheSummary {
            matched_tokens: matched,
            lookup_tokens: lookup,
            hit_ratio: ratio(matched, lookup),
            hit_ratio_by_namespace: self
                .ns_lookups
                .iter()
                .map(|(ns, &(m, l))| (ns.to_string(), ratio(m, l)))
                .collect(),
            peak_footprint_tokens: self
                .peak_footprint
                .iter()
                .map(|(ns, &t)| (ns.to_string(), t))
                .collect(),
            peak_footprint_total_tokens: self.peak_footprint_total,
            evictions,
        };
        let fleet = FleetSummary {
            prefill_workers: self.fleet.prefill_count(),
            decode_workers: self.fleet.decode_count(),
            sessions: self.sessions.len() as u64,
            completed_sessions: (self.sessions.len() - self.failed_sessions.len()) as u64,
            failed_sessions: self.failed_sessions.len() as u64,
            failed_requests: self.failed_requests,
            handoffs: self.decode.iter().map(|d| d.handoffs).sum(),
            staged_handoffs: self.decode.iter().map(|d| d.staged_handoffs).sum(),
            peak_decode_resident_fraction: self
                .decode
                .iter()
                .map(|d| d.peak_resident_tokens as f64 / d.capacity_tokens as f64)
                .fold(0.0, f64::max),
            peak_active_sessions: self.admission.peak_active(),
            events: self.events,
        };
        let report = MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            mode: self.fleet.mode(),
            seed: self.config.run.seed,
            metadata: ReportMetadata::default(),
            config: self.config,
            requests,
            cache,
            fleet,
            records: self.records,
        };
        SimOutcome {
            report,
            trace: self.trace,
        }
    }
}
