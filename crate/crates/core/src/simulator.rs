//! Deterministic discrete-event engine driving one ring to election
//! completion, collecting exact pass, bit, and time metrics.
//!
//! The engine advances by event jumps, never tick-by-tick: a processor's
//! local tick grid is anchored at its wake moment and only ticks at which
//! something observable happens (a readable inbox message or a timer
//! expiry) are materialized. Timers of size 2^k make per-tick enumeration
//! infeasible, so all absolute times and tick indices are arbitrary
//! precision.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::codec::message_bits;
use crate::protocol::{
    awake_init, elapse_quiet_ticks, eval_delay, receive_control, send_due_in, tick_step,
    DelayPolicy, Message, Mode, Name, PolicyViolation, ProcessorState, ProtocolAction,
};

/// Ring topology, clocks, link delays, wake schedule, and delay policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingConfig {
    /// Clockwise name sequence; position p sends over link p to p+1 mod N.
    pub names: Vec<Name>,
    /// Absolute units per local time unit, per processor.
    pub tick_len: Vec<u64>,
    /// Constant delay of the clockwise link leaving each position.
    pub link_delay: Vec<u64>,
    /// Spontaneous wake events (position, absolute time).
    pub wake: Vec<(usize, u64)>,
    pub policy: DelayPolicy,
}

impl RingConfig {
    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn min_name(&self) -> Name {
        *self.names.iter().min().expect("nonempty ring")
    }

    /// True when all tick lengths are 1 and every link has the same delay.
    pub fn is_lockstep(&self) -> bool {
        self.tick_len.iter().all(|&t| t == 1)
            && self.link_delay.windows(2).all(|w| w[0] == w[1])
    }
}

/// Timing magnitudes derived from a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedParams {
    /// Lower bound on a local time unit.
    pub m: u64,
    /// Clock-only upper bound on a local time unit.
    pub u_prime: u64,
    /// u' plus the largest link delay.
    pub u: u64,
    /// Asynchronicity ratio ceil(u / m).
    pub s: u64,
    /// Clock spread u' - m.
    pub epsilon: u64,
    /// Combined per-station delay (sum of tick lengths).
    pub w_p: u128,
    /// Signal propagation delay around the ring (sum of link delays).
    pub w_s: u128,
    /// Walk time w_p + w_s.
    pub w: u128,
}

pub fn derive_params(config: &RingConfig) -> DerivedParams {
    let m = *config.tick_len.iter().min().expect("nonempty");
    let u_prime = *config.tick_len.iter().max().expect("nonempty");
    let max_d = config.link_delay.iter().copied().max().unwrap_or(0);
    let u = u_prime + max_d;
    let s = u.div_ceil(m);
    let w_p: u128 = config.tick_len.iter().map(|&t| t as u128).sum();
    let w_s: u128 = config.link_delay.iter().map(|&d| d as u128).sum();
    DerivedParams {
        m,
        u_prime,
        u,
        s,
        epsilon: u_prime - m,
        w_p,
        w_s,
        w: w_p + w_s,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigViolation {
    RingTooSmall(usize),
    DuplicateName(Name),
    LengthMismatch { field: &'static str, expected: usize, got: usize },
    ZeroTickLength(usize),
    NoWakeEntry,
    WakePositionOutOfRange(usize),
    Policy(PolicyViolation),
    AsynchronicityPromiseExceeded { derived: u64, declared: u64 },
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigViolation::RingTooSmall(n) => write!(f, "ring needs at least 2 processors, got {n}"),
            ConfigViolation::DuplicateName(n) => write!(f, "duplicate name {n}"),
            ConfigViolation::LengthMismatch { field, expected, got } => {
                write!(f, "{field} has length {got}, expected {expected}")
            }
            ConfigViolation::ZeroTickLength(p) => write!(f, "tick_len[{p}] must be positive"),
            ConfigViolation::NoWakeEntry => write!(f, "wake schedule is empty"),
            ConfigViolation::WakePositionOutOfRange(p) => write!(f, "wake position {p} out of range"),
            ConfigViolation::Policy(v) => write!(f, "delay policy: {v}"),
            ConfigViolation::AsynchronicityPromiseExceeded { derived, declared } => write!(
                f,
                "derived asynchronicity ratio s = {derived} exceeds the declared bound {declared}"
            ),
        }
    }
}

/// Structural validation; `declared_s`, when given, is the promise that the
/// ring's timing magnitudes stay within a fixed ratio.
pub fn validate_config(config: &RingConfig, declared_s: Option<u64>) -> Vec<ConfigViolation> {
    let mut v = Vec::new();
    let n = config.names.len();
    if n < 2 {
        v.push(ConfigViolation::RingTooSmall(n));
        return v;
    }
    let mut seen = std::collections::BTreeSet::new();
    for &name in &config.names {
        if !seen.insert(name) {
            v.push(ConfigViolation::DuplicateName(name));
        }
    }
    if config.tick_len.len() != n {
        v.push(ConfigViolation::LengthMismatch {
            field: "tick_len",
            expected: n,
            got: config.tick_len.len(),
        });
    }
    if config.link_delay.len() != n {
        v.push(ConfigViolation::LengthMismatch {
            field: "link_delay",
            expected: n,
            got: config.link_delay.len(),
        });
    }
    for (p, &t) in config.tick_len.iter().enumerate() {
        if t == 0 {
            v.push(ConfigViolation::ZeroTickLength(p));
        }
    }
    if config.wake.is_empty() {
        v.push(ConfigViolation::NoWakeEntry);
    }
    for &(pos, _) in &config.wake {
        if pos >= n {
            v.push(ConfigViolation::WakePositionOutOfRange(pos));
        }
    }
    for pv in crate::protocol::validate_policy(&config.policy, &config.names) {
        v.push(ConfigViolation::Policy(pv));
    }
    if v.is_empty() {
        if let Some(declared) = declared_s {
            let derived = derive_params(config).s;
            if derived > declared {
                v.push(ConfigViolation::AsynchronicityPromiseExceeded { derived, declared });
            }
        }
    }
    v
}

/// Final metrics of one completed election.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub winner: Name,
    pub wakeup_passes: u64,
    pub election_passes: u64,
    pub sleepwell_passes: u64,
    pub election_passes_by_origin: BTreeMap<Name, u64>,
    pub framing_bits: u64,
    pub payload_bits: u64,
    pub first_wake: BigUint,
    pub completion: BigUint,
    /// Local ticks elapsed per position by the completion instant.
    pub ticks_elapsed: Vec<BigUint>,
    /// Winner's local ticks between emitting its own election message and
    /// reading its return.
    pub winner_cycle_ticks: Option<BigUint>,
    /// Message-fate tallies: reads that absorbed a larger name, reads that
    /// adopted a smaller one, adoptions that overwrote an armed send, and
    /// election messages left unread when the ring halted.
    pub annihilated: u64,
    pub adopted: u64,
    pub superseded: u64,
    pub unread_at_halt: u64,
    pub trace: Option<Vec<String>>,
}

impl Outcome {
    pub fn total_passes(&self) -> u64 {
        self.wakeup_passes + self.election_passes + self.sleepwell_passes
    }

    pub fn total_bits(&self) -> u64 {
        self.framing_bits + self.payload_bits
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("invariant fault: {0}")]
    InvariantFault(String),
    #[error("simulation already halted")]
    AlreadyHalted,
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Payload {
    Wake,
    ControlArrival(Message),
    ElectionArrival(Name),
    LocalTick { tick: BigUint, gen: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct QueuedEvent {
    time: BigUint,
    /// Arrival < SpontaneousWake < LocalTick at equal time.
    prio: u8,
    pos: usize,
    seq: u64,
    payload: Payload,
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then(self.prio.cmp(&other.prio))
            .then(self.pos.cmp(&other.pos))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One processed event, as reported by [`Simulation::step`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    SpontaneousWake { pos: usize, time: BigUint },
    Arrival { pos: usize, time: BigUint, msg: Message },
    LocalTick { pos: usize, time: BigUint, tick: BigUint },
    Halt { pos: usize, time: BigUint },
}

struct ProcSim {
    state: ProcessorState,
    tau: u64,
    wake_time: Option<BigUint>,
    inbox: VecDeque<(BigUint, Name)>,
    /// Tick index of the pending LocalTick event, if any.
    scheduled: Option<BigUint>,
    /// Highest tick index already processed; ticks in between were quiet
    /// and are accounted for by [`elapse_quiet_ticks`].
    last_tick: BigUint,
    gen: u64,
    own_emit_tick: Option<BigUint>,
    return_read_tick: Option<BigUint>,
}

/// A single in-flight election run. Strictly single-sequence; independent
/// instances are fully isolated.
pub struct Simulation {
    config: RingConfig,
    n: usize,
    procs: Vec<ProcSim>,
    queue: BinaryHeap<std::cmp::Reverse<QueuedEvent>>,
    seq: u64,
    processed: u64,
    budget: u64,
    halted: bool,
    completion: Option<BigUint>,
    first_wake: Option<BigUint>,
    wakeup_passes: u64,
    election_passes: u64,
    sleepwell_passes: u64,
    by_origin: BTreeMap<Name, u64>,
    framing_bits: u64,
    payload_bits: u64,
    annihilated: u64,
    adopted: u64,
    superseded: u64,
    trace: Option<Vec<String>>,
}

impl Simulation {
    pub fn new(config: RingConfig, collect_trace: bool) -> Result<Self, SimError> {
        let violations = validate_config(&config, None);
        if !violations.is_empty() {
            return Err(SimError::InvalidConfig(violations));
        }
        let n = config.size();
        let l = config.min_name();
        // Watchdog: unreachable for valid configs by the termination
        // argument; clamped so the comparison stays in u64.
        let f_l = eval_delay(&config.policy, l, l)
            .map_err(|e| SimError::InvariantFault(e.to_string()))?;
        let budget = f_l
            .to_u64()
            .and_then(|f| f.checked_add(2))
            .and_then(|f| f.checked_mul(64 * (n as u64) * (n as u64)))
            .unwrap_or(u64::MAX);
        let procs = config
            .names
            .iter()
            .zip(&config.tick_len)
            .map(|(&name, &tau)| ProcSim {
                state: ProcessorState::unwoken(name),
                tau,
                wake_time: None,
                inbox: VecDeque::new(),
                scheduled: None,
                last_tick: BigUint::zero(),
                gen: 0,
                own_emit_tick: None,
                return_read_tick: None,
            })
            .collect();
        let mut sim = Simulation {
            config,
            n,
            procs,
            queue: BinaryHeap::new(),
            seq: 0,
            processed: 0,
            budget,
            halted: false,
            completion: None,
            first_wake: None,
            wakeup_passes: 0,
            election_passes: 0,
            sleepwell_passes: 0,
            by_origin: BTreeMap::new(),
            framing_bits: 0,
            payload_bits: 0,
            annihilated: 0,
            adopted: 0,
            superseded: 0,
            trace: collect_trace.then(Vec::new),
        };
        for (pos, time) in sim.config.wake.clone() {
            sim.push(BigUint::from(time), 1, pos, Payload::Wake);
        }
        Ok(sim)
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn push(&mut self, time: BigUint, prio: u8, pos: usize, payload: Payload) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(std::cmp::Reverse(QueuedEvent { time, prio, pos, seq, payload }));
    }

    fn trace_line(&mut self, time: &BigUint, kind: &str, pos: usize, detail: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(format!("time={time} kind={kind} pos={pos} detail={detail}"));
        }
    }

    fn send(&mut self, pos: usize, msg: Message, time: &BigUint) {
        let bits = message_bits(&msg);
        self.framing_bits += bits.framing;
        self.payload_bits += bits.payload;
        let detail = match msg {
            Message::Wakeup => {
                self.wakeup_passes += 1;
                "wakeup".to_string()
            }
            Message::Sleepwell => {
                self.sleepwell_passes += 1;
                "sleepwell".to_string()
            }
            Message::Election(origin) => {
                self.election_passes += 1;
                *self.by_origin.entry(origin).or_insert(0) += 1;
                format!("election({origin})")
            }
        };
        self.trace_line(time, "SEND", pos, detail);
        let arrival = time + BigUint::from(self.config.link_delay[pos]);
        let dest = (pos + 1) % self.n;
        match msg {
            Message::Election(origin) => self.push(arrival, 0, dest, Payload::ElectionArrival(origin)),
            control => self.push(arrival, 0, dest, Payload::ControlArrival(control)),
        }
    }

    fn tick_time(&self, pos: usize, tick: &BigUint) -> BigUint {
        self.procs[pos].wake_time.as_ref().expect("woken") + tick * BigUint::from(self.procs[pos].tau)
    }

    /// First tick index strictly after `time`.
    fn first_tick_after(&self, pos: usize, time: &BigUint) -> BigUint {
        let wake = self.procs[pos].wake_time.as_ref().expect("woken");
        if time < wake {
            return BigUint::one();
        }
        (time - wake) / BigUint::from(self.procs[pos].tau) + BigUint::one()
    }

    fn schedule_tick(&mut self, pos: usize, tick: BigUint) {
        self.procs[pos].gen += 1;
        let gen = self.procs[pos].gen;
        self.procs[pos].scheduled = Some(tick.clone());
        let time = self.tick_time(pos, &tick);
        self.push(time, 2, pos, Payload::LocalTick { tick, gen });
    }

    fn cancel_tick(&mut self, pos: usize) {
        self.procs[pos].gen += 1;
        self.procs[pos].scheduled = None;
    }

    /// Decides the next materialized tick after processing tick `n`.
    fn schedule_next(&mut self, pos: usize, n: &BigUint) {
        self.procs[pos].scheduled = None;
        if self.procs[pos].state.mode != Mode::Awake {
            self.cancel_tick(pos);
            return;
        }
        let next = if !self.procs[pos].inbox.is_empty() {
            Some(n + BigUint::one())
        } else {
            send_due_in(&self.procs[pos].state).map(|rem| n + rem)
        };
        match next {
            Some(t) => self.schedule_tick(pos, t),
            None => self.cancel_tick(pos),
        }
    }

    fn do_wake(&mut self, pos: usize, time: &BigUint) -> Result<(), SimError> {
        self.procs[pos].wake_time = Some(time.clone());
        if self.first_wake.is_none() {
            self.first_wake = Some(time.clone());
        }
        let actions = awake_init(&mut self.procs[pos].state)
            .map_err(|e| SimError::InvariantFault(e.to_string()))?;
        self.apply_actions(pos, time, &actions, None)?;
        // The timer is 1, so the own election message is due at tick 1;
        // any pre-wake inbox entries are readable then as well.
        self.schedule_tick(pos, BigUint::one());
        Ok(())
    }

    fn apply_actions(
        &mut self,
        pos: usize,
        time: &BigUint,
        actions: &[ProtocolAction],
        tick: Option<&BigUint>,
    ) -> Result<(), SimError> {
        for action in actions {
            match action {
                ProtocolAction::SendWakeup => self.send(pos, Message::Wakeup, time),
                ProtocolAction::SendElection(k) => {
                    if *k == self.procs[pos].state.own {
                        self.procs[pos].own_emit_tick = tick.cloned();
                    }
                    self.send(pos, Message::Election(*k), time);
                }
                ProtocolAction::SendSleepwell => self.send(pos, Message::Sleepwell, time),
                ProtocolAction::DeclareElected(_) => {}
                ProtocolAction::Halt => {
                    self.halted = true;
                    self.completion = Some(time.clone());
                    self.trace_line(time, "HALT", pos, "election finished".to_string());
                }
            }
        }
        Ok(())
    }

    /// Processes exactly one event. Returns the event, or an error on an
    /// invariant fault or when the simulation already halted.
    pub fn step(&mut self) -> Result<SimEvent, SimError> {
        if self.halted {
            return Err(SimError::AlreadyHalted);
        }
        loop {
            let ev = match self.queue.pop() {
                Some(std::cmp::Reverse(ev)) => ev,
                None => {
                    return Err(SimError::InvariantFault(
                        "event queue drained before the winner halted".into(),
                    ))
                }
            };
            // Superseded tick schedules are dropped silently.
            if let Payload::LocalTick { gen, .. } = &ev.payload {
                if *gen != self.procs[ev.pos].gen {
                    continue;
                }
            }
            self.processed += 1;
            if self.processed > self.budget {
                return Err(SimError::InvariantFault(format!(
                    "watchdog: more than {} events processed without termination",
                    self.budget
                )));
            }
            return self.process(ev);
        }
    }

    fn process(&mut self, ev: QueuedEvent) -> Result<SimEvent, SimError> {
        let QueuedEvent { time, pos, payload, .. } = ev;
        match payload {
            Payload::Wake => {
                if self.procs[pos].state.mode == Mode::Unwoken {
                    self.trace_line(&time, "WAKE", pos, "spontaneous".to_string());
                    self.do_wake(pos, &time)?;
                } else {
                    self.trace_line(&time, "WAKE", pos, "absorbed".to_string());
                }
                Ok(SimEvent::SpontaneousWake { pos, time })
            }
            Payload::ControlArrival(msg) => {
                let detail = match msg {
                    Message::Wakeup => "wakeup",
                    Message::Sleepwell => "sleepwell",
                    Message::Election(_) => unreachable!(),
                };
                self.trace_line(&time, "ARRIVE", pos, detail.to_string());
                match (msg, self.procs[pos].state.mode) {
                    (Message::Wakeup, Mode::Unwoken) => self.do_wake(pos, &time)?,
                    _ => {
                        let actions = receive_control(&mut self.procs[pos].state, msg)
                            .map_err(|e| SimError::InvariantFault(e.to_string()))?;
                        let went_done = self.procs[pos].state.mode == Mode::Done;
                        self.apply_actions(pos, &time, &actions, None)?;
                        if went_done {
                            self.cancel_tick(pos);
                        }
                    }
                }
                Ok(SimEvent::Arrival { pos, time, msg })
            }
            Payload::ElectionArrival(origin) => {
                self.trace_line(&time, "ARRIVE", pos, format!("election({origin})"));
                if self.procs[pos].state.mode == Mode::Done {
                    return Err(SimError::InvariantFault(format!(
                        "election message {origin} arrived at position {pos} after it went asleep"
                    )));
                }
                self.procs[pos].inbox.push_back((time.clone(), origin));
                if self.procs[pos].state.mode == Mode::Awake {
                    let candidate = self.first_tick_after(pos, &time);
                    let sooner = match &self.procs[pos].scheduled {
                        Some(existing) => candidate < *existing,
                        None => true,
                    };
                    if sooner {
                        self.schedule_tick(pos, candidate);
                    }
                }
                Ok(SimEvent::Arrival { pos, time, msg: Message::Election(origin) })
            }
            Payload::LocalTick { tick, .. } => {
                // Ticks jumped over since the last materialized one were
                // quiet: nothing readable, timer merely counting down.
                let skipped = &tick - &self.procs[pos].last_tick - BigUint::one();
                if !skipped.is_zero() {
                    elapse_quiet_ticks(&mut self.procs[pos].state, &skipped);
                }
                self.procs[pos].last_tick = tick.clone();
                let read = match self.procs[pos].inbox.front() {
                    Some((arrival, _)) if *arrival < time => self.procs[pos].inbox.pop_front(),
                    _ => None,
                };
                let incoming = read.map(|(_, j)| j);
                let k_before = self.procs[pos].state.k;
                let pending_before = self.procs[pos].state.pending_send;
                if let Some(j) = incoming {
                    match j.cmp(&k_before) {
                        Ordering::Greater => self.annihilated += 1,
                        Ordering::Less => {
                            self.adopted += 1;
                            if pending_before {
                                self.superseded += 1;
                            }
                        }
                        Ordering::Equal => {
                            self.procs[pos].return_read_tick = Some(tick.clone());
                        }
                    }
                }
                let detail = match incoming {
                    Some(j) => format!("tick={tick} read=election({j}) k={}", k_before),
                    None => format!("tick={tick} read=none k={}", k_before),
                };
                self.trace_line(&time, "TICK", pos, detail);
                let actions = tick_step(&mut self.procs[pos].state, incoming, &self.config.policy)
                    .map_err(|e| SimError::InvariantFault(e.to_string()))?;
                self.apply_actions(pos, &time, &actions, Some(&tick))?;
                self.schedule_next(pos, &tick);
                Ok(SimEvent::LocalTick { pos, time, tick })
            }
        }
    }

    /// Builds the outcome of a halted run.
    pub fn outcome(&self) -> Result<Outcome, SimError> {
        if !self.halted {
            return Err(SimError::InvariantFault("outcome requested before halt".into()));
        }
        let completion = self.completion.clone().expect("halted");
        let mut winner = None;
        for proc in &self.procs {
            if proc.state.mode != Mode::Done {
                return Err(SimError::InvariantFault(format!(
                    "processor {} not asleep at completion",
                    proc.state.own
                )));
            }
            match (winner, proc.state.elected) {
                (None, e) => winner = e,
                (Some(w), Some(e)) if w != e => {
                    return Err(SimError::InvariantFault(format!(
                        "processors disagree on the winner: {w} vs {e}"
                    )))
                }
                _ => {}
            }
        }
        let winner = winner.ok_or_else(|| SimError::InvariantFault("no winner recorded".into()))?;
        let ticks_elapsed = self
            .procs
            .iter()
            .map(|p| match &p.wake_time {
                Some(w) => (&completion - w) / BigUint::from(p.tau),
                None => BigUint::zero(),
            })
            .collect();
        let winner_pos = self.config.names.iter().position(|&n| n == winner).unwrap();
        let winner_cycle_ticks = match (
            &self.procs[winner_pos].own_emit_tick,
            &self.procs[winner_pos].return_read_tick,
        ) {
            (Some(emit), Some(read)) => Some(read - emit),
            _ => None,
        };
        let unread_at_halt = self.procs.iter().map(|p| p.inbox.len() as u64).sum();
        Ok(Outcome {
            winner,
            wakeup_passes: self.wakeup_passes,
            election_passes: self.election_passes,
            sleepwell_passes: self.sleepwell_passes,
            election_passes_by_origin: self.by_origin.clone(),
            framing_bits: self.framing_bits,
            payload_bits: self.payload_bits,
            first_wake: self.first_wake.clone().unwrap_or_default(),
            completion,
            ticks_elapsed,
            winner_cycle_ticks,
            annihilated: self.annihilated,
            adopted: self.adopted,
            superseded: self.superseded,
            unread_at_halt,
            trace: self.trace.clone(),
        })
    }
}

/// Runs one election to completion.
pub fn run_election(config: &RingConfig) -> Result<Outcome, SimError> {
    run_election_traced(config, false)
}

pub fn run_election_traced(config: &RingConfig, collect_trace: bool) -> Result<Outcome, SimError> {
    let mut sim = Simulation::new(config.clone(), collect_trace)?;
    while !sim.is_halted() {
        sim.step()?;
    }
    sim.outcome()
}
