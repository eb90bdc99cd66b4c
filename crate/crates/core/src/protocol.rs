//! The per-processor election automaton, expressed as pure transition
//! functions, plus hop-delay policy evaluation.
//!
//! A processor is asleep (`Unwoken`) until prodded, campaigns while
//! `Awake` holding a current candidate `k` and a local-tick timer, and
//! ends `Done` once it learns the winner. Election messages carrying a
//! name `j` are compared against `k`: larger names are annihilated,
//! smaller ones adopted (resetting the timer to the policy's delay), and
//! `j = k` closes the election at the winner.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// A processor name: a positive integer, unique within a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(u64);

impl Name {
    pub fn new(value: u64) -> Result<Self, ProtocolError> {
        if value == 0 {
            Err(ProtocolError::ZeroName)
        } else {
            Ok(Name(value))
        }
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for Name {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Ring traffic: two tag-only control messages and the candidate token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Message {
    Wakeup,
    Election(Name),
    Sleepwell,
}

/// The hop-delay schedule f, in local ticks of the receiving processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayPolicy {
    /// f(k) = 2^k.
    Power2,
    /// f(k) = ceil(rho^k) for a rational rho >= 2.
    ScaledPower { rho_num: u64, rho_den: u64 },
    /// f(i, j) = ceil(2^(j - i)): 2^(j-i) when the carried name j is at
    /// least the receiver name i, otherwise 1.
    Relative,
    /// Explicit per-name delay table.
    Table(BTreeMap<Name, u64>),
}

impl DelayPolicy {
    /// Id-only policies depend on the carried name alone.
    pub fn is_id_only(&self) -> bool {
        !matches!(self, DelayPolicy::Relative)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("names are positive integers; 0 is not a name")]
    ZeroName,
    #[error("delay table has no entry for name {0}")]
    MissingTableEntry(Name),
    #[error("scaled-power ratio must be a positive rational")]
    BadRatio,
    #[error("awake_init on a processor that is not Unwoken")]
    AlreadyAwake,
    #[error("tick_step on a processor in mode {0:?}")]
    NotAwake(Mode),
    #[error("sleepwell reached a processor that never woke")]
    SleepwellWhileUnwoken,
    #[error("winner branch fired with k = {k} at processor {own}")]
    WinnerMismatch { own: Name, k: Name },
}

/// Evaluates the delay policy for a message carrying `carried` arriving at
/// processor `receiver`. Id-only kinds ignore `receiver`.
pub fn eval_delay(
    policy: &DelayPolicy,
    receiver: Name,
    carried: Name,
) -> Result<BigUint, ProtocolError> {
    match policy {
        DelayPolicy::Power2 => Ok(BigUint::one() << carried.value()),
        DelayPolicy::ScaledPower { rho_num, rho_den } => {
            if *rho_num == 0 || *rho_den == 0 {
                return Err(ProtocolError::BadRatio);
            }
            let rho = BigRational::new(BigInt::from(*rho_num), BigInt::from(*rho_den));
            let exp = carried
                .value()
                .to_i32()
                .ok_or(ProtocolError::BadRatio)?;
            let pow = rho.pow(exp);
            let ceil = pow.ceil().to_integer();
            Ok(ceil.to_biguint().ok_or(ProtocolError::BadRatio)?)
        }
        DelayPolicy::Relative => {
            if carried >= receiver {
                Ok(BigUint::one() << (carried.value() - receiver.value()))
            } else {
                Ok(BigUint::one())
            }
        }
        DelayPolicy::Table(map) => map
            .get(&carried)
            .map(|&d| BigUint::from(d))
            .ok_or(ProtocolError::MissingTableEntry(carried)),
    }
}

/// A policy defect found by [`validate_policy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyViolation {
    ZeroDelay(Name),
    NotStrictlyIncreasing(Name, Name),
    MissingEntry(Name),
    RatioBelowTwo,
}

impl std::fmt::Display for PolicyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyViolation::ZeroDelay(n) => write!(f, "f({n}) = 0; delays must be positive"),
            PolicyViolation::NotStrictlyIncreasing(a, b) => {
                write!(f, "f not strictly increasing between names {a} and {b}")
            }
            PolicyViolation::MissingEntry(n) => write!(f, "delay table missing name {n}"),
            PolicyViolation::RatioBelowTwo => write!(f, "scaled-power ratio below 2"),
        }
    }
}

/// Checks that an id-only policy is strictly increasing and positive over
/// the given name set. The relative policy is always valid.
pub fn validate_policy(policy: &DelayPolicy, names: &[Name]) -> Vec<PolicyViolation> {
    let mut violations = Vec::new();
    if let DelayPolicy::Relative = policy {
        return violations;
    }
    if let DelayPolicy::ScaledPower { rho_num, rho_den } = policy {
        if *rho_den == 0 || *rho_num < rho_den.saturating_mul(2) {
            violations.push(PolicyViolation::RatioBelowTwo);
            return violations;
        }
    }
    let mut sorted: Vec<Name> = names.to_vec();
    sorted.sort();
    let mut prev: Option<(Name, BigUint)> = None;
    for &name in &sorted {
        let val = match eval_delay(policy, name, name) {
            Ok(v) => v,
            Err(ProtocolError::MissingTableEntry(n)) => {
                violations.push(PolicyViolation::MissingEntry(n));
                continue;
            }
            Err(_) => continue,
        };
        if val.is_zero() {
            violations.push(PolicyViolation::ZeroDelay(name));
        }
        if let Some((pname, pval)) = &prev {
            if val <= *pval {
                violations.push(PolicyViolation::NotStrictlyIncreasing(*pname, name));
            }
        }
        prev = Some((name, val));
    }
    violations
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Unwoken,
    Awake,
    Done,
}

/// Effects requested by a transition; the simulation engine turns these
/// into timed message sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolAction {
    SendWakeup,
    SendElection(Name),
    SendSleepwell,
    DeclareElected(Name),
    Halt,
}

/// The protocol automaton state of one processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorState {
    pub own: Name,
    pub mode: Mode,
    /// Current candidate; only meaningful while Awake or Done.
    pub k: Name,
    /// Local-tick countdown to the next send of M_k. Arbitrary precision:
    /// f(k) = 2^k overflows fixed-width arithmetic even at desk scale.
    /// May go negative after the pending send has fired.
    pub timer: BigInt,
    pub pending_send: bool,
    pub elected: Option<Name>,
}

impl ProcessorState {
    pub fn unwoken(own: Name) -> Self {
        ProcessorState {
            own,
            mode: Mode::Unwoken,
            k: own,
            timer: BigInt::zero(),
            pending_send: false,
            elected: None,
        }
    }
}

/// Wakes a processor: emits its wakeup, adopts itself as candidate, and
/// arms the timer so its own election message goes out on the next tick.
pub fn awake_init(state: &mut ProcessorState) -> Result<Vec<ProtocolAction>, ProtocolError> {
    if state.mode != Mode::Unwoken {
        return Err(ProtocolError::AlreadyAwake);
    }
    state.mode = Mode::Awake;
    state.k = state.own;
    state.timer = BigInt::one();
    state.pending_send = true;
    Ok(vec![ProtocolAction::SendWakeup])
}

/// One local time unit: read at most one election message and take exactly
/// one of the three campaign branches.
///
/// (a) the incoming name equals `k`: the winner is found (asserted to be
///     this processor);
/// (b) the incoming name is below `k`: adopt it and reset the timer to the
///     policy delay;
/// (c) the incoming name exceeds `k`, or no message arrived: absorb it,
///     count the tick down, and send `M_k` when the timer reaches zero.
pub fn tick_step(
    state: &mut ProcessorState,
    incoming: Option<Name>,
    policy: &DelayPolicy,
) -> Result<Vec<ProtocolAction>, ProtocolError> {
    if state.mode != Mode::Awake {
        return Err(ProtocolError::NotAwake(state.mode));
    }
    match incoming {
        Some(j) if j == state.k => {
            if state.k != state.own {
                return Err(ProtocolError::WinnerMismatch {
                    own: state.own,
                    k: state.k,
                });
            }
            state.mode = Mode::Done;
            state.elected = Some(state.k);
            Ok(vec![
                ProtocolAction::DeclareElected(state.k),
                ProtocolAction::SendSleepwell,
            ])
        }
        Some(j) if j < state.k => {
            state.k = j;
            let delay = eval_delay(policy, state.own, j)?;
            state.timer = BigInt::from(delay);
            state.pending_send = true;
            Ok(Vec::new())
        }
        // j > k, or no message: either way the tick elapses and any
        // incoming message is annihilated.
        _ => {
            state.timer -= 1;
            if state.pending_send && state.timer.is_zero() {
                state.pending_send = false;
                Ok(vec![ProtocolAction::SendElection(state.k)])
            } else {
                Ok(Vec::new())
            }
        }
    }
}

/// Handles a control message at its arrival instant (control traffic does
/// not consume the one-election-read-per-tick slot).
pub fn receive_control(
    state: &mut ProcessorState,
    msg: Message,
) -> Result<Vec<ProtocolAction>, ProtocolError> {
    match msg {
        Message::Wakeup => match state.mode {
            Mode::Unwoken => awake_init(state),
            // The receiver already campaigned and emitted its own wakeup;
            // total wakeup passes stay exactly N.
            Mode::Awake | Mode::Done => Ok(Vec::new()),
        },
        Message::Sleepwell => match state.mode {
            Mode::Unwoken => Err(ProtocolError::SleepwellWhileUnwoken),
            Mode::Awake => {
                state.mode = Mode::Done;
                state.elected = Some(state.k);
                Ok(vec![
                    ProtocolAction::DeclareElected(state.k),
                    ProtocolAction::SendSleepwell,
                ])
            }
            Mode::Done => Ok(vec![ProtocolAction::Halt]),
        },
        Message::Election(_) => unreachable!("election messages go through tick_step"),
    }
}

/// Advances the timer over `count` consecutive ticks at which nothing was
/// read and no send came due. The event-jump engine calls this instead of
/// materializing each empty tick; a pending send must still be strictly in
/// the future afterwards, otherwise a tick with an observable action was
/// skipped.
pub fn elapse_quiet_ticks(state: &mut ProcessorState, count: &BigUint) {
    state.timer -= BigInt::from(count.clone());
    debug_assert!(
        !state.pending_send || state.timer.is_positive(),
        "jumped over a due send"
    );
}

/// True when `timer` is still counting toward a send.
pub fn send_due_in(state: &ProcessorState) -> Option<BigUint> {
    if state.pending_send && state.timer.is_positive() {
        state.timer.to_biguint()
    } else {
        None
    }
}
