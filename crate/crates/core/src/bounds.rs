//! Exact-rational evaluators for the analytic pass, bit, and time bounds,
//! used both as oracles against simulation outcomes and as a standalone
//! calculator.
//!
//! Wherever the analysis charges "log i" bits, these evaluators use
//! λ(i) = floor(log2(i + 1)), the dyadic code length: it is strictly
//! positive, so the i = 1 terms stay finite, and it is exactly the payload
//! size the simulator charges, keeping both sides of every comparison in
//! the same currency. No floating point enters any bound comparison;
//! decimal renderings are display-only.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::codec::dyadic_len;
use crate::protocol::{eval_delay, DelayPolicy, Name};
use crate::simulator::{derive_params, DerivedParams, RingConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundsError {
    #[error("bound presumes an id-only delay policy; the relative policy is unsupported")]
    RelativePolicy,
    #[error("origin {0} is not a ring member")]
    UnknownOrigin(Name),
    #[error("degenerate walk: both per-station and propagation delay are zero")]
    DegenerateWalk,
    #[error("delay evaluation failed: {0}")]
    Delay(String),
}

fn rat_u128(v: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rat_u64(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rat_big(v: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(v.clone()))
}

/// f(i) for an id-only policy.
fn f_of(config: &RingConfig, i: Name) -> Result<BigUint, BoundsError> {
    if !config.policy.is_id_only() {
        return Err(BoundsError::RelativePolicy);
    }
    eval_delay(&config.policy, i, i).map_err(|e| BoundsError::Delay(e.to_string()))
}

/// Renders an exact rational as `num/den` plus a 6-place decimal.
pub fn render_rational(r: &BigRational) -> (String, String) {
    let exact = format!("{}/{}", r.numer(), r.denom());
    let scaled = (r * BigRational::from_integer(BigInt::from(1_000_000))).floor();
    let scaled = scaled.to_integer();
    let neg = scaled.is_negative();
    let abs = scaled.abs();
    let int = &abs / BigInt::from(1_000_000);
    let frac = &abs % BigInt::from(1_000_000);
    let dec = format!("{}{}.{:06}", if neg { "-" } else { "" }, int, frac);
    (exact, dec)
}

/// Per-origin pass bound: N·u·(f(l)+1) / (m·f(i)).
pub fn eq1_bound(config: &RingConfig, origin: Name) -> Result<BigRational, BoundsError> {
    if !config.names.contains(&origin) {
        return Err(BoundsError::UnknownOrigin(origin));
    }
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let f_l = rat_big(&f_of(config, l)?);
    let f_i = rat_big(&f_of(config, origin)?);
    Ok(n * rat_u64(p.u) * (f_l + BigRational::one()) / (rat_u64(p.m) * f_i))
}

/// Total pass bound: 2N + (N·u·(f(l)+1)/m) · Σ 1/f(i).
pub fn eq2_bound(config: &RingConfig) -> Result<BigRational, BoundsError> {
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let f_l = rat_big(&f_of(config, l)?);
    let mut sum = BigRational::zero();
    for &i in &config.names {
        sum += rat_big(&f_of(config, i)?).recip();
    }
    Ok(rat_u64(2) * &n + n * rat_u64(p.u) * (f_l + BigRational::one()) / rat_u64(p.m) * sum)
}

/// Closed form 2N + 3N·u/m, an upper bound on eq2 whenever f(i) >= 2^i.
pub fn eq2_closed(config: &RingConfig) -> BigRational {
    let p = derive_params(config);
    let n = rat_u64(config.size() as u64);
    rat_u64(2) * &n + rat_u64(3) * n * rat_u64(p.u) / rat_u64(p.m)
}

/// Total bit bound: 2N + (N·u·(f(l)+1)/m) · Σ λ(i)/f(i).
pub fn eq3_bits_bound(config: &RingConfig) -> Result<BigRational, BoundsError> {
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let f_l = rat_big(&f_of(config, l)?);
    let mut sum = BigRational::zero();
    for &i in &config.names {
        sum += rat_u64(dyadic_len(i.value())) / rat_big(&f_of(config, i)?);
    }
    Ok(rat_u64(2) * &n + n * rat_u64(p.u) * (f_l + BigRational::one()) / rat_u64(p.m) * sum)
}

/// Refined total: 3N + (N·u·(f(l)+1)/m) · Σ_{i != l} 1/f(i); the winning
/// message makes precisely N passes, so its term leaves the sum.
pub fn eq4_bound(config: &RingConfig) -> Result<BigRational, BoundsError> {
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let f_l = rat_big(&f_of(config, l)?);
    let mut sum = BigRational::zero();
    for &i in &config.names {
        if i != l {
            sum += rat_big(&f_of(config, i)?).recip();
        }
    }
    Ok(rat_u64(3) * &n + n * rat_u64(p.u) * (f_l + BigRational::one()) / rat_u64(p.m) * sum)
}

/// Expected-pass bound in walk-time terms:
/// 2N + N · Σ (w + w_s + w_p·f(l)·λ(l)) / (w_s + w_p·f(i)·λ(i)).
pub fn eq5_expected_bound(config: &RingConfig) -> Result<BigRational, BoundsError> {
    let p = derive_params(config);
    if p.w_p == 0 && p.w_s == 0 {
        return Err(BoundsError::DegenerateWalk);
    }
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let w = rat_u128(p.w);
    let w_s = rat_u128(p.w_s);
    let w_p = rat_u128(p.w_p);
    let f_l = rat_big(&f_of(config, l)?);
    let lam_l = rat_u64(dyadic_len(l.value()));
    let numer = &w + &w_s + &w_p * f_l * lam_l;
    let mut sum = BigRational::zero();
    for &i in &config.names {
        let f_i = rat_big(&f_of(config, i)?);
        let lam_i = rat_u64(dyadic_len(i.value()));
        sum += &numer / (&w_s + &w_p * f_i * lam_i);
    }
    Ok(rat_u64(2) * &n + n * sum)
}

/// Split clock/propagation refinement and its closed form 7N + 3εN/m.
pub fn split_delay_bound(config: &RingConfig) -> Result<(BigRational, BigRational), BoundsError> {
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let f_l = rat_big(&f_of(config, l)?);
    let w_s = rat_u128(p.w_s);
    let numer = &n * rat_u64(p.u_prime) * (f_l + BigRational::one()) + rat_u64(2) * &w_s;
    let mut sum = BigRational::zero();
    for &i in &config.names {
        let f_i = rat_big(&f_of(config, i)?);
        sum += &numer / (rat_u64(p.m) * f_i + &w_s);
    }
    let exact = rat_u64(2) * &n + sum;
    let closed = rat_u64(7) * &n + rat_u64(3) * rat_u64(p.epsilon) * n / rat_u64(p.m);
    Ok((exact, closed))
}

/// Time bounds; the absolute and walk-time forms need an id-only f.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBounds {
    /// N·u·(f(l)+2).
    pub time_abs: Option<BigRational>,
    /// 2w + w_s + w_p·f(l)·λ(l).
    pub time_walk: Option<BigRational>,
    /// w_s + w_p·λ(l): circle time of the winning message under the
    /// relative delay schedule.
    pub time_relative_circle: BigRational,
    /// 3w + w_p·(λ(l) − 1).
    pub time_relative_total: BigRational,
}

pub fn time_bounds(config: &RingConfig) -> TimeBounds {
    let p = derive_params(config);
    let l = config.min_name();
    let n = rat_u64(config.size() as u64);
    let w = rat_u128(p.w);
    let w_s = rat_u128(p.w_s);
    let w_p = rat_u128(p.w_p);
    let lam_l = rat_u64(dyadic_len(l.value()));
    let (time_abs, time_walk) = match f_of(config, l) {
        Ok(f_l) => {
            let f_l = rat_big(&f_l);
            (
                Some(&n * rat_u64(p.u) * (&f_l + rat_u64(2))),
                Some(rat_u64(2) * &w + &w_s + &w_p * &f_l * &lam_l),
            )
        }
        Err(_) => (None, None),
    };
    TimeBounds {
        time_abs,
        time_walk,
        time_relative_circle: &w_s + &w_p * &lam_l,
        time_relative_total: rat_u64(3) * &w + &w_p * (&lam_l - BigRational::one()),
    }
}

/// Every bound the calculator can evaluate on one config, with the inputs
/// echoed. Fields requiring an id-only f are absent under the relative
/// policy.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub n: usize,
    pub l: Name,
    pub params: DerivedParams,
    pub policy: DelayPolicy,
    pub eq1_per_origin: Option<BTreeMap<Name, BigRational>>,
    pub eq2_total: Option<BigRational>,
    pub eq2_closed: BigRational,
    pub eq3_bits: Option<BigRational>,
    pub eq4_total: Option<BigRational>,
    pub eq5_expected: Option<BigRational>,
    pub split_total: Option<BigRational>,
    pub split_closed: Option<BigRational>,
    pub times: TimeBounds,
}

pub fn bound_report(config: &RingConfig) -> Result<BoundReport, BoundsError> {
    let id_only = config.policy.is_id_only();
    let eq1_per_origin = if id_only {
        let mut map = BTreeMap::new();
        for &i in &config.names {
            map.insert(i, eq1_bound(config, i)?);
        }
        Some(map)
    } else {
        None
    };
    let (split_total, split_closed) = if id_only {
        let (a, b) = split_delay_bound(config)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(BoundReport {
        n: config.size(),
        l: config.min_name(),
        params: derive_params(config),
        policy: config.policy.clone(),
        eq1_per_origin,
        eq2_total: id_only.then(|| eq2_bound(config)).transpose()?,
        eq2_closed: eq2_closed(config),
        eq3_bits: id_only.then(|| eq3_bits_bound(config)).transpose()?,
        eq4_total: id_only.then(|| eq4_bound(config)).transpose()?,
        eq5_expected: id_only.then(|| eq5_expected_bound(config)).transpose()?,
        split_total,
        split_closed,
        times: time_bounds(config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(v: u64) -> Name {
        Name::new(v).unwrap()
    }

    fn lockstep(vals: &[u64], policy: DelayPolicy) -> RingConfig {
        let n = vals.len();
        RingConfig {
            names: vals.iter().map(|&v| name(v)).collect(),
            tick_len: vec![1; n],
            link_delay: vec![0; n],
            wake: vec![(0, 0)],
            policy,
        }
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn eq1_hand_values() {
        let c = lockstep(&[1, 2], DelayPolicy::Power2);
        assert_eq!(eq1_bound(&c, name(2)).unwrap(), rat(3, 2));
        assert_eq!(eq1_bound(&c, name(1)).unwrap(), rat(3, 1));
        let c = lockstep(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], DelayPolicy::Power2);
        assert_eq!(eq1_bound(&c, name(4)).unwrap(), rat(15, 8));
        assert_eq!(
            eq1_bound(&c, name(99)),
            Err(BoundsError::UnknownOrigin(name(99)))
        );
    }

    #[test]
    fn eq1_rejects_relative_policy() {
        let c = lockstep(&[1, 2], DelayPolicy::Relative);
        assert_eq!(eq1_bound(&c, name(1)), Err(BoundsError::RelativePolicy));
    }

    #[test]
    fn eq2_hand_values() {
        let c = lockstep(&[1, 2], DelayPolicy::Power2);
        assert_eq!(eq2_bound(&c).unwrap(), rat(17, 2));
        let c = lockstep(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], DelayPolicy::Power2);
        assert_eq!(eq2_closed(&c), rat(50, 1));
        // The per-instance convergence comparison.
        assert!(eq2_bound(&c).unwrap() <= eq2_closed(&c));
    }

    #[test]
    fn eq3_hand_values() {
        // λ(1) = λ(2) = 1 collapses eq3 onto eq2's sum.
        let c = lockstep(&[1, 2], DelayPolicy::Power2);
        assert_eq!(eq3_bits_bound(&c).unwrap(), rat(17, 2));
        assert_eq!(eq3_bits_bound(&c).unwrap(), eq2_bound(&c).unwrap());
        // λ(6) = 2 enters the i = 6 term as 2/f(6).
        let c6 = lockstep(&[1, 6], DelayPolicy::Power2);
        let expect = rat(4, 1) + rat(2 * 3, 1) * (rat(1, 2) + rat(2, 64));
        assert_eq!(eq3_bits_bound(&c6).unwrap(), expect);
    }

    #[test]
    fn eq4_hand_values() {
        let c = lockstep(&[1, 2], DelayPolicy::Power2);
        assert_eq!(eq4_bound(&c).unwrap(), rat(15, 2));
        // With rho = 2u/m the refined bound stays below 5N.
        let c = lockstep(
            &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            DelayPolicy::ScaledPower { rho_num: 2, rho_den: 1 },
        );
        assert!(eq4_bound(&c).unwrap() < rat(50, 1));
    }

    #[test]
    fn eq5_hand_value() {
        // Lockstep N=3, d=0: w_s=0, w_p=w=3; numerator 3 + 3·f(1)·λ(1) = 9;
        // terms 9/6, 9/12, 9/48 give 2N + N·39/16 = 213/16.
        let c = lockstep(&[1, 2, 3], DelayPolicy::Power2);
        assert_eq!(eq5_expected_bound(&c).unwrap(), rat(213, 16));
    }

    #[test]
    fn eq5_winner_term_exceeds_one() {
        let c = lockstep(&[1, 2, 3], DelayPolicy::Power2);
        // i = l term is (w + w_s + w_p f(l) λ(l))/(w_s + w_p f(l) λ(l)) > 1,
        // so the whole bound exceeds 2N + N.
        assert!(eq5_expected_bound(&c).unwrap() > rat(9, 1));
    }

    #[test]
    fn split_hand_values() {
        let c = RingConfig {
            names: vec![name(1), name(2)],
            tick_len: vec![1, 1],
            link_delay: vec![1, 1],
            wake: vec![(0, 0)],
            policy: DelayPolicy::Power2,
        };
        let (exact, _) = split_delay_bound(&c).unwrap();
        assert_eq!(exact, rat(4, 1) + rat(10, 4) + rat(10, 6));

        // Closed form 7N + 3εN/m at m=1, ε=2, N=10.
        let mut tick_len = vec![1; 10];
        tick_len[3] = 3;
        let c = RingConfig {
            names: (1..=10).map(name).collect(),
            tick_len,
            link_delay: vec![0; 10],
            wake: vec![(0, 0)],
            policy: DelayPolicy::Power2,
        };
        let (_, closed) = split_delay_bound(&c).unwrap();
        assert_eq!(closed, rat(130, 1));

        // ε = 0 and w_s = 0 collapse the closed form to 7N.
        let c = lockstep(&[1, 2], DelayPolicy::Power2);
        let (_, closed) = split_delay_bound(&c).unwrap();
        assert_eq!(closed, rat(14, 1));
    }

    #[test]
    fn time_bound_values() {
        let c = lockstep(&[1, 2, 3, 4, 5], DelayPolicy::Power2);
        let t = time_bounds(&c);
        assert_eq!(t.time_abs, Some(rat(20, 1)));
        // w_p = N, w_s = 0, l = 1: 2N + N·2·1 = 4N.
        assert_eq!(t.time_walk, Some(rat(20, 1)));
        // λ(1) = 1 zeroes the second term of the relative total.
        assert_eq!(t.time_relative_total, rat(15, 1));
        assert_eq!(t.time_relative_circle, rat(5, 1));
    }

    #[test]
    fn monotonicity_of_eq2_in_f() {
        // Enlarging f values weakly decreases eq2's sum term.
        let small = lockstep(&[1, 2, 3], DelayPolicy::ScaledPower { rho_num: 2, rho_den: 1 });
        let large = lockstep(&[1, 2, 3], DelayPolicy::ScaledPower { rho_num: 4, rho_den: 1 });
        let p_small = derive_params(&small);
        assert_eq!(p_small.u, p_small.m);
        // Same u/m, larger f(l) raises the prefactor but the sum term
        // itself shrinks; compare the sums directly.
        let sum = |c: &RingConfig| {
            let mut s = BigRational::zero();
            for &i in &c.names {
                s += rat_big(&f_of(c, i).unwrap()).recip();
            }
            s
        };
        assert!(sum(&large) < sum(&small));
    }

    #[test]
    fn report_for_relative_policy_omits_id_only_fields() {
        let c = lockstep(&[1, 2], DelayPolicy::Relative);
        let r = bound_report(&c).unwrap();
        assert!(r.eq2_total.is_none());
        assert!(r.times.time_abs.is_none());
        assert_eq!(r.times.time_relative_total, rat(6, 1));
    }

    #[test]
    fn rational_rendering() {
        let (exact, dec) = render_rational(&rat(17, 2));
        assert_eq!(exact, "17/2");
        assert_eq!(dec, "8.500000");
        let (_, dec) = render_rational(&rat(213, 16));
        assert_eq!(dec, "13.312500");
    }
}
