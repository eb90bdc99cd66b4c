//! Scenario constructors: the adversarial quadratic schedule, seeded random
//! rings, the average-case experiment, synchronous ring-size determination,
//! and the classic filter baseline for comparison.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bounds::{eq5_expected_bound, BoundsError};
use crate::codec::FRAMING_BITS;
use crate::protocol::{eval_delay, DelayPolicy, Name};
use crate::simulator::{run_election, Outcome, RingConfig, SimError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameter range: {0}")]
    BadRange(String),
    #[error("ring-size determination needs a lockstep config (tick lengths 1, constant link delay)")]
    NotLockstep,
    #[error("elapsed tick count {elapsed} does not invert to an integral ring size")]
    NonIntegralInversion { elapsed: BigUint },
    #[error("winner cycle instrumentation missing from outcome")]
    MissingCycleTicks,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Worst-case schedule: names 1..N ascending clockwise, processor i ticking
/// every 2^(N-i+1) absolute units, zero link delays, everyone waking at 0,
/// f(i) = 2^i. No message can overtake another, so M_i makes exactly
/// N - i + 1 passes before processor 1 annihilates it.
pub fn adversarial_config(n: usize) -> RingConfig {
    assert!((2..=32).contains(&n), "adversarial schedule supported for 2 <= N <= 32");
    RingConfig {
        names: (1..=n as u64).map(|v| Name::new(v).unwrap()).collect(),
        tick_len: (0..n).map(|p| 1u64 << (n - p)).collect(),
        link_delay: vec![0; n],
        wake: (0..n).map(|p| (p, 0)).collect(),
        policy: DelayPolicy::Power2,
    }
}

/// How [`random_config`] draws clocks, delays, and wakers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RandomMode {
    /// Tick lengths 1, every link delay `delta`, one random waker at 0.
    Lockstep { delta: u64 },
    /// Tick lengths uniform in [m, u_max], link delays uniform in
    /// [0, d_max], and 1..=max_wakers spontaneous wakers (the first at 0).
    Heterogeneous { m: u64, u_max: u64, d_max: u64, max_wakers: usize },
}

/// A reproducible random ring: names are a uniform permutation of 1..N
/// drawn by Fisher-Yates from ChaCha8 seeded with `seed`.
pub fn random_config(
    n: usize,
    seed: u64,
    mode: &RandomMode,
    policy: DelayPolicy,
) -> Result<RingConfig, ScenarioError> {
    if n < 2 {
        return Err(ScenarioError::BadRange(format!("ring size {n} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: Vec<u64> = (1..=n as u64).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        names.swap(i, j);
    }
    let names: Vec<Name> = names.into_iter().map(|v| Name::new(v).unwrap()).collect();
    let (tick_len, link_delay, wake) = match *mode {
        RandomMode::Lockstep { delta } => {
            let waker = rng.gen_range(0..n);
            (vec![1; n], vec![delta; n], vec![(waker, 0)])
        }
        RandomMode::Heterogeneous { m, u_max, d_max, max_wakers } => {
            if m == 0 || u_max < m {
                return Err(ScenarioError::BadRange(format!(
                    "tick range [{m}, {u_max}] is empty or zero"
                )));
            }
            if max_wakers == 0 {
                return Err(ScenarioError::BadRange("need at least one waker".into()));
            }
            let tick_len: Vec<u64> = (0..n).map(|_| rng.gen_range(m..=u_max)).collect();
            let link_delay: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=d_max)).collect();
            let wakers = rng.gen_range(1..=max_wakers);
            let mut wake = vec![(rng.gen_range(0..n), 0u64)];
            let spread = 4 * (u_max + d_max).max(1);
            for _ in 1..wakers {
                wake.push((rng.gen_range(0..n), rng.gen_range(0..=spread)));
            }
            (tick_len, link_delay, wake)
        }
    };
    Ok(RingConfig { names, tick_len, link_delay, wake, policy })
}

/// Lockstep ring with names l, l+1, ..., l+N-1 ascending clockwise, all
/// waking at 0. Used by ring-size determination and the minimal-time
/// scenario family.
pub fn lockstep_ring(n: usize, l: u64, delta: u64, policy: DelayPolicy) -> RingConfig {
    RingConfig {
        names: (l..l + n as u64).map(|v| Name::new(v).unwrap()).collect(),
        tick_len: vec![1; n],
        link_delay: vec![delta; n],
        wake: (0..n).map(|p| (p, 0)).collect(),
        policy,
    }
}

/// One trial of a seeded experiment.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub eq5: BigRational,
    pub eq5_ok: bool,
}

/// Aggregates over a batch of independent trials; all means are exact
/// rationals recomputable from the per-trial data.
#[derive(Debug, Clone)]
pub struct ExperimentStats {
    pub n: usize,
    pub seed: u64,
    pub trials: Vec<TrialResult>,
    pub mean_election: BigRational,
    pub min_election: u64,
    pub max_election: u64,
    pub mean_total: BigRational,
    pub mean_bits: BigRational,
}

fn mean(sum: u128, count: usize) -> BigRational {
    BigRational::new(sum.into(), (count as u128).into())
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Random-permutation lockstep experiment: `trials` independent rings of
/// size `n`, each run to completion and checked against the expected-pass
/// bound evaluated on that trial's config.
pub fn average_case_experiment(
    n: usize,
    trials: usize,
    seed: u64,
    policy: DelayPolicy,
) -> Result<ExperimentStats, ScenarioError> {
    if trials == 0 {
        return Err(ScenarioError::BadRange("trials must be >= 1".into()));
    }
    let mut results = Vec::with_capacity(trials);
    let (mut s_elec, mut s_total, mut s_bits) = (0u128, 0u128, 0u128);
    let (mut min_e, mut max_e) = (u64::MAX, 0u64);
    for trial in 0..trials {
        let tseed = trial_seed(seed, trial);
        let config = random_config(n, tseed, &RandomMode::Lockstep { delta: 0 }, policy.clone())?;
        let outcome = run_election(&config).map_err(|e| {
            ScenarioError::Sim(SimError::InvariantFault(format!("seed {tseed}: {e}")))
        })?;
        let eq5 = if policy.is_id_only() {
            eq5_expected_bound(&config)?
        } else {
            BigRational::zero()
        };
        let eq5_ok = !policy.is_id_only()
            || BigRational::from_integer(outcome.total_passes().into()) <= eq5;
        s_elec += outcome.election_passes as u128;
        s_total += outcome.total_passes() as u128;
        s_bits += outcome.total_bits() as u128;
        min_e = min_e.min(outcome.election_passes);
        max_e = max_e.max(outcome.election_passes);
        results.push(TrialResult { trial, seed: tseed, outcome, eq5, eq5_ok });
    }
    Ok(ExperimentStats {
        n,
        seed,
        mean_election: mean(s_elec, trials),
        min_election: min_e,
        max_election: max_e,
        mean_total: mean(s_total, trials),
        mean_bits: mean(s_bits, trials),
        trials: results,
    })
}

/// Inverts the lockstep hop-latency closed form to recover the ring size
/// from the winner's local tick count between emitting its message and
/// reading its return.
///
/// In lockstep (tick length 1, constant link delay d) each hop of the
/// winning message costs d + 1 + f ticks: d in flight, 1 to become
/// readable, f held by the receiver; the final hop back home skips the
/// hold. Hence elapsed = N(d + 1 + f) - f, with f = f(l) for an id-only
/// policy and 1 for the relative one. The form was derived from engine
/// runs at N in {2, 3, 4} and is pinned by tests up to N = 256.
pub fn ring_size_from_time(
    winner_elapsed_ticks: &BigUint,
    f_l: &BigUint,
    delta: u64,
    relative_policy: bool,
) -> Result<u64, ScenarioError> {
    let f_eff = if relative_policy { BigUint::one() } else { f_l.clone() };
    let hop = BigUint::from(delta) + BigUint::one() + &f_eff;
    let numer = winner_elapsed_ticks + &f_eff;
    if (&numer % &hop) != BigUint::zero() {
        return Err(ScenarioError::NonIntegralInversion {
            elapsed: winner_elapsed_ticks.clone(),
        });
    }
    let n = numer / hop;
    n.to_u64()
        .filter(|&n| n >= 2)
        .ok_or(ScenarioError::NonIntegralInversion {
            elapsed: winner_elapsed_ticks.clone(),
        })
}

/// Ring-size determination straight from a finished run.
pub fn ring_size_from_outcome(
    config: &RingConfig,
    outcome: &Outcome,
) -> Result<u64, ScenarioError> {
    if !config.is_lockstep() {
        return Err(ScenarioError::NotLockstep);
    }
    let cycle = outcome
        .winner_cycle_ticks
        .as_ref()
        .ok_or(ScenarioError::MissingCycleTicks)?;
    let l = outcome.winner;
    let relative = !config.policy.is_id_only();
    let f_l = if relative {
        BigUint::one()
    } else {
        eval_delay(&config.policy, l, l)
            .map_err(|e| ScenarioError::Sim(SimError::InvariantFault(e.to_string())))?
    };
    ring_size_from_time(cycle, &f_l, config.link_delay[0], relative)
}

// ---------------------------------------------------------------------------
// Filter baseline: each awake processor sends its signed message around the
// ring; a message is forwarded iff its name is smaller than the receiver's
// and smaller than everything the receiver forwarded before. Only the
// minimum's message returns home. Forwarding happens at the read tick with
// no hold delay; the delay policy is ignored.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FilterMode {
    Unwoken,
    Awake,
    Done,
}

struct FilterProc {
    own: Name,
    tau: u64,
    mode: FilterMode,
    min_seen: Name,
    pending_own: bool,
    wake_time: Option<BigUint>,
    inbox: VecDeque<(BigUint, Name)>,
    scheduled: Option<BigUint>,
    gen: u64,
    elected: Option<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FilterPayload {
    Wake,
    Wakeup,
    Sleepwell,
    Election(Name),
    Tick { tick: BigUint, gen: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FilterEvent {
    time: BigUint,
    prio: u8,
    pos: usize,
    seq: u64,
    payload: FilterPayload,
}

impl Ord for FilterEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then(self.prio.cmp(&other.prio))
            .then(self.pos.cmp(&other.pos))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for FilterEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct FilterSim {
    n: usize,
    link_delay: Vec<u64>,
    procs: Vec<FilterProc>,
    queue: BinaryHeap<std::cmp::Reverse<FilterEvent>>,
    seq: u64,
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
    budget: u64,
    processed: u64,
}

impl FilterSim {
    fn push(&mut self, time: BigUint, prio: u8, pos: usize, payload: FilterPayload) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(std::cmp::Reverse(FilterEvent { time, prio, pos, seq, payload }));
    }

    fn send_control(&mut self, pos: usize, sleepwell: bool, time: &BigUint) {
        self.framing_bits += FRAMING_BITS;
        if sleepwell {
            self.sleepwell_passes += 1;
        } else {
            self.wakeup_passes += 1;
        }
        let arrival = time + BigUint::from(self.link_delay[pos]);
        let dest = (pos + 1) % self.n;
        let payload = if sleepwell { FilterPayload::Sleepwell } else { FilterPayload::Wakeup };
        self.push(arrival, 0, dest, payload);
    }

    fn send_election(&mut self, pos: usize, origin: Name, time: &BigUint) {
        self.framing_bits += FRAMING_BITS;
        self.payload_bits += crate::codec::dyadic_len(origin.value());
        self.election_passes += 1;
        *self.by_origin.entry(origin).or_insert(0) += 1;
        let arrival = time + BigUint::from(self.link_delay[pos]);
        let dest = (pos + 1) % self.n;
        self.push(arrival, 0, dest, FilterPayload::Election(origin));
    }

    fn tick_time(&self, pos: usize, tick: &BigUint) -> BigUint {
        self.procs[pos].wake_time.as_ref().unwrap() + tick * BigUint::from(self.procs[pos].tau)
    }

    fn schedule_tick(&mut self, pos: usize, tick: BigUint) {
        self.procs[pos].gen += 1;
        let gen = self.procs[pos].gen;
        self.procs[pos].scheduled = Some(tick.clone());
        let time = self.tick_time(pos, &tick);
        self.push(time, 2, pos, FilterPayload::Tick { tick, gen });
    }

    fn wake(&mut self, pos: usize, time: &BigUint) {
        if self.procs[pos].mode != FilterMode::Unwoken {
            return;
        }
        if self.first_wake.is_none() {
            self.first_wake = Some(time.clone());
        }
        self.procs[pos].mode = FilterMode::Awake;
        self.procs[pos].wake_time = Some(time.clone());
        self.procs[pos].pending_own = true;
        self.send_control(pos, false, time);
        self.schedule_tick(pos, BigUint::one());
    }

    fn go_done(&mut self, pos: usize, winner: Name, time: &BigUint) {
        self.procs[pos].mode = FilterMode::Done;
        self.procs[pos].elected = Some(winner);
        self.procs[pos].gen += 1;
        self.procs[pos].scheduled = None;
        self.send_control(pos, true, time);
    }

    fn step(&mut self) -> Result<(), SimError> {
        let ev = loop {
            let ev = match self.queue.pop() {
                Some(std::cmp::Reverse(ev)) => ev,
                None => {
                    return Err(SimError::InvariantFault(
                        "baseline event queue drained before halt".into(),
                    ))
                }
            };
            if let FilterPayload::Tick { gen, .. } = &ev.payload {
                if *gen != self.procs[ev.pos].gen {
                    continue;
                }
            }
            break ev;
        };
        self.processed += 1;
        if self.processed > self.budget {
            return Err(SimError::InvariantFault("baseline watchdog exceeded".into()));
        }
        let FilterEvent { time, pos, payload, .. } = ev;
        match payload {
            FilterPayload::Wake | FilterPayload::Wakeup => self.wake(pos, &time),
            FilterPayload::Sleepwell => match self.procs[pos].mode {
                FilterMode::Unwoken => {
                    return Err(SimError::InvariantFault(
                        "sleepwell reached an unwoken processor".into(),
                    ))
                }
                FilterMode::Awake => {
                    let winner = self.procs[pos].min_seen;
                    self.go_done(pos, winner, &time);
                }
                FilterMode::Done => {
                    self.halted = true;
                    self.completion = Some(time);
                }
            },
            FilterPayload::Election(origin) => {
                if self.procs[pos].mode == FilterMode::Done {
                    return Err(SimError::InvariantFault(format!(
                        "baseline: election message {origin} arrived after position {pos} slept"
                    )));
                }
                self.procs[pos].inbox.push_back((time.clone(), origin));
                if self.procs[pos].mode == FilterMode::Awake {
                    let wake = self.procs[pos].wake_time.clone().unwrap();
                    let candidate = if time < wake {
                        BigUint::one()
                    } else {
                        (&time - &wake) / BigUint::from(self.procs[pos].tau) + BigUint::one()
                    };
                    let sooner = match &self.procs[pos].scheduled {
                        Some(existing) => candidate < *existing,
                        None => true,
                    };
                    if sooner {
                        self.schedule_tick(pos, candidate);
                    }
                }
            }
            FilterPayload::Tick { tick, .. } => {
                if self.procs[pos].mode != FilterMode::Awake {
                    return Ok(());
                }
                let read = match self.procs[pos].inbox.front() {
                    Some((arrival, _)) if *arrival < time => self.procs[pos].inbox.pop_front(),
                    _ => None,
                };
                if self.procs[pos].pending_own {
                    self.procs[pos].pending_own = false;
                    let own = self.procs[pos].own;
                    self.send_election(pos, own, &time);
                }
                if let Some((_, j)) = read {
                    if j == self.procs[pos].own {
                        // The origin's message made it home: it is the
                        // minimum and everyone in between forwarded it.
                        self.go_done(pos, j, &time);
                        return Ok(());
                    } else if j < self.procs[pos].min_seen {
                        self.procs[pos].min_seen = j;
                        self.send_election(pos, j, &time);
                    } else {
                        self.annihilated += 1;
                    }
                }
                if self.procs[pos].mode == FilterMode::Awake {
                    self.procs[pos].scheduled = None;
                    if !self.procs[pos].inbox.is_empty() {
                        let next = &tick + BigUint::one();
                        self.schedule_tick(pos, next);
                    } else {
                        self.procs[pos].gen += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs the filter strategy on a config; the delay policy is ignored.
pub fn baseline_filter_run(config: &RingConfig) -> Result<Outcome, SimError> {
    let violations = crate::simulator::validate_config(config, None);
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations));
    }
    let n = config.size();
    let mut sim = FilterSim {
        n,
        link_delay: config.link_delay.clone(),
        procs: config
            .names
            .iter()
            .zip(&config.tick_len)
            .map(|(&own, &tau)| FilterProc {
                own,
                tau,
                mode: FilterMode::Unwoken,
                min_seen: own,
                pending_own: false,
                wake_time: None,
                inbox: VecDeque::new(),
                scheduled: None,
                gen: 0,
                elected: None,
            })
            .collect(),
        queue: BinaryHeap::new(),
        seq: 0,
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
        budget: 64 * (n as u64) * (n as u64) * (n as u64),
        processed: 0,
    };
    for &(pos, time) in &config.wake {
        sim.push(BigUint::from(time), 1, pos, FilterPayload::Wake);
    }
    while !sim.halted {
        sim.step()?;
    }
    let completion = sim.completion.clone().unwrap();
    let mut winner = None;
    for p in &sim.procs {
        if p.mode != FilterMode::Done {
            return Err(SimError::InvariantFault(format!(
                "baseline: processor {} not asleep at completion",
                p.own
            )));
        }
        match (winner, p.elected) {
            (None, e) => winner = e,
            (Some(w), Some(e)) if w != e => {
                return Err(SimError::InvariantFault(
                    "baseline: processors disagree on the winner".into(),
                ))
            }
            _ => {}
        }
    }
    let ticks_elapsed = sim
        .procs
        .iter()
        .map(|p| match &p.wake_time {
            Some(w) => (&completion - w) / BigUint::from(p.tau),
            None => BigUint::zero(),
        })
        .collect();
    let unread_at_halt = sim.procs.iter().map(|p| p.inbox.len() as u64).sum();
    Ok(Outcome {
        winner: winner.unwrap(),
        wakeup_passes: sim.wakeup_passes,
        election_passes: sim.election_passes,
        sleepwell_passes: sim.sleepwell_passes,
        election_passes_by_origin: sim.by_origin,
        framing_bits: sim.framing_bits,
        payload_bits: sim.payload_bits,
        first_wake: sim.first_wake.unwrap_or_default(),
        completion,
        ticks_elapsed,
        winner_cycle_ticks: None,
        annihilated: sim.annihilated,
        adopted: 0,
        superseded: 0,
        unread_at_halt,
        trace: None,
    })
}

/// One row of the protocol comparison sweep.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub n: usize,
    pub protocol: &'static str,
    pub trials: usize,
    pub mean_election: BigRational,
    pub mean_total: BigRational,
    /// Growth diagnostic mean election passes / N.
    pub mean_per_n: BigRational,
    pub mean_eq5: Option<BigRational>,
}

/// Per ring size: mean passes for the main protocol under the power-of-two
/// and relative schedules, and for the filter baseline, on identical
/// lockstep random permutations.
pub fn compare_protocols(
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CompareRow>, ScenarioError> {
    if trials == 0 {
        return Err(ScenarioError::BadRange("trials must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let main = average_case_experiment(n, trials, seed, DelayPolicy::Power2)?;
        rows.push(stats_row(n, "main-power2", &main));
        let relative = average_case_experiment(n, trials, seed, DelayPolicy::Relative)?;
        rows.push(stats_row(n, "main-relative", &relative));

        let (mut s_elec, mut s_total) = (0u128, 0u128);
        for trial in 0..trials {
            let tseed = trial_seed(seed, trial);
            let config = random_config(
                n,
                tseed,
                &RandomMode::Lockstep { delta: 0 },
                DelayPolicy::Power2,
            )?;
            let outcome = baseline_filter_run(&config)?;
            s_elec += outcome.election_passes as u128;
            s_total += outcome.total_passes() as u128;
        }
        let mean_election = mean(s_elec, trials);
        rows.push(CompareRow {
            n,
            protocol: "filter-baseline",
            trials,
            mean_per_n: &mean_election / BigRational::from_integer((n as u64).into()),
            mean_election,
            mean_total: mean(s_total, trials),
            mean_eq5: None,
        });
    }
    Ok(rows)
}

fn stats_row(n: usize, protocol: &'static str, stats: &ExperimentStats) -> CompareRow {
    let trials = stats.trials.len();
    let mean_eq5 = if stats.trials.iter().all(|t| !t.eq5.is_zero()) {
        let sum: BigRational = stats.trials.iter().map(|t| t.eq5.clone()).sum();
        Some(sum / BigRational::from_integer((trials as u64).into()))
    } else {
        None
    };
    CompareRow {
        n,
        protocol,
        trials,
        mean_election: stats.mean_election.clone(),
        mean_total: stats.mean_total.clone(),
        mean_per_n: &stats.mean_election / BigRational::from_integer((n as u64).into()),
        mean_eq5,
    }
}
