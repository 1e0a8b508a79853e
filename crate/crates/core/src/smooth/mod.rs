//! Smooth-number sets 𝒜(P,R), their slices and companions, and Dickman's ρ.

mod dickman;

pub use dickman::{dickman_rho, DickmanTable, DEFAULT_STEPS_PER_UNIT, DEFAULT_U_MAX};

use serde::Serialize;

use crate::error::{check_cells, Error, Result};
use crate::numtheory::factorize;

/// Largest prime factor of every n ≤ limit (with lpf(0) = 0, lpf(1) = 1).
pub fn largest_prime_factor_sieve(limit: u64) -> Result<Vec<u32>> {
    check_cells("largest-prime-factor sieve", limit as u128 + 1)?;
    let n = limit as usize;
    let mut lpf = vec![0u32; n + 1];
    if n >= 1 {
        lpf[1] = 1;
    }
    for p in 2..=n {
        if lpf[p] == 0 {
            // Increasing p overwrites earlier entries, leaving the largest.
            let mut m = p;
            while m <= n {
                lpf[m] = p as u32;
                m += p;
            }
        }
    }
    Ok(lpf)
}

/// The set 𝒜(P,R) = {1 ≤ n ≤ P : p | n ⇒ p ≤ R}.
#[derive(Debug, Clone)]
pub struct SmoothSet {
    p: f64,
    r: f64,
    members: Vec<u64>,
    lpf: Vec<u32>,
}

impl SmoothSet {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(r >= 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("smooth_set needs P, R >= 1, got P = {p}, R = {r}")));
        }
        let top = p.floor() as u64;
        let lpf = largest_prime_factor_sieve(top)?;
        let members = (1..=top).filter(|&n| lpf[n as usize] as f64 <= r).collect();
        Ok(Self { p, r, members, lpf })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= 1 && (n as f64) <= self.p && self.lpf[n as usize] as f64 <= self.r
    }

    pub fn largest_prime_factor(&self, n: u64) -> Option<u32> {
        self.lpf.get(n as usize).copied()
    }

    /// Members of 𝒜(P',R') for P' ≤ P, R' arbitrary, re-using the sieve.
    pub fn restrict(&self, p: f64, r: f64) -> Vec<u64> {
        self.members_where(p, |n| self.lpf[n as usize] as f64 <= r)
    }

    fn members_where(&self, p: f64, keep: impl Fn(u64) -> bool) -> Vec<u64> {
        let top = p.min(self.p).floor().max(0.0) as u64;
        (1..=top).filter(|&n| keep(n)).collect()
    }

    /// Ã(P,R) = 𝒜(P,R) ∖ 𝒜(P/2,R).
    pub fn tilde_slice(&self) -> Vec<u64> {
        let half = self.p / 2.0;
        self.members.iter().copied().filter(|&n| n as f64 > half).collect()
    }

    /// Members in (P/2^{i+1}, P/2^i], i.e. the slice Ã(2^{−i}P, R).
    pub fn dyadic_slice(&self, i: u32) -> Vec<u64> {
        let upper = self.p / 2f64.powi(i as i32);
        let lower = upper / 2.0;
        self.members
            .iter()
            .copied()
            .filter(|&n| n as f64 > lower && n as f64 <= upper)
            .collect()
    }
}

/// `smooth_set(P, R)`.
pub fn smooth_set(p: f64, r: f64) -> Result<SmoothSet> {
    SmoothSet::new(p, r)
}

/// Largest prime factor by trial division (1 for x = 1).
pub fn largest_prime_factor(x: u64) -> u64 {
    factorize(x).last().map(|&(p, _)| p).unwrap_or(1)
}

/// `p ≤ x^η`, decided in logarithms with ties resolved towards smoothness.
pub fn prime_within(p: u64, x: u64, eta: f64) -> bool {
    if p <= 1 {
        return true;
    }
    let lhs = (p as f64).ln();
    let rhs = eta * (x as f64).ln();
    lhs <= rhs * (1.0 + 4.0 * f64::EPSILON) + f64::EPSILON
}

/// x ∈ 𝒜(x, x^η).
pub fn is_self_smooth(x: u64, eta: f64) -> bool {
    x >= 1 && prime_within(largest_prime_factor(x), x, eta)
}

/// Self-smoothness for every x ≤ limit from one sieve.
pub fn self_smooth_table(limit: u64, eta: f64) -> Result<Vec<bool>> {
    let lpf = largest_prime_factor_sieve(limit)?;
    Ok(lpf
        .iter()
        .enumerate()
        .map(|(x, &p)| x >= 1 && prime_within(p as u64, x as u64, eta))
        .collect())
}

/// 𝒞_q(P,R): members of 𝒜(P,R) all of whose prime factors divide q.
pub fn c_q_set(p: f64, r: f64, q: u64) -> Result<Vec<u64>> {
    c_q_pi_set_inner(p, r, q, 0)
}

/// 𝒞_{q,π}(P,R): members of 𝒞_q(P,R) all of whose prime factors exceed π.
pub fn c_q_pi_set(p: f64, r: f64, q: u64, pi: u64) -> Result<Vec<u64>> {
    c_q_pi_set_inner(p, r, q, pi)
}

fn c_q_pi_set_inner(p: f64, r: f64, q: u64, pi: u64) -> Result<Vec<u64>> {
    if q == 0 || !(p >= 1.0) || !(r >= 1.0) {
        return Err(Error::Domain("c_q sets need q >= 1 and P, R >= 1".into()));
    }
    let primes: Vec<u64> = factorize(q)
        .into_iter()
        .map(|(pr, _)| pr)
        .filter(|&pr| pr as f64 <= r && pr > pi)
        .collect();
    // Generate products of the allowed primes directly: these sets are sparse.
    let top = p.floor() as u64;
    let mut out = vec![1u64];
    for &pr in &primes {
        let mut next = Vec::new();
        for &m in &out {
            let mut v = m;
            while v <= top {
                next.push(v);
                match v.checked_mul(pr) {
                    Some(w) => v = w,
                    None => break,
                }
            }
        }
        out = next;
    }
    out.sort_unstable();
    Ok(out)
}

/// 𝒞̃_q(P,R) = 𝒞_q(P,R) ∖ 𝒞_q(P/2,R).
pub fn c_q_tilde_set(p: f64, r: f64, q: u64) -> Result<Vec<u64>> {
    Ok(c_q_set(p, r, q)?.into_iter().filter(|&n| n as f64 > p / 2.0).collect())
}

/// ℬ(M,π,R): v ∈ 𝒜(Mπ,R) with v > M, π | v and π the least prime of v.
pub fn b_set(m: f64, pi: u64, r: f64) -> Result<Vec<u64>> {
    if !(m >= 1.0) || pi < 2 || (pi as f64) > r || factorize(pi).len() != 1 || factorize(pi)[0].1 != 1 {
        return Err(Error::Domain(format!("b_set needs M >= 1 and a prime π <= R, got M = {m}, π = {pi}")));
    }
    let top = (m * pi as f64).floor() as u64;
    let lpf = largest_prime_factor_sieve(top)?;
    Ok(((m.floor() as u64 + 1)..=top)
        .filter(|&v| v % pi == 0 && lpf[v as usize] as f64 <= r)
        .filter(|&v| factorize(v)[0].0 == pi)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub p: f64,
    pub eta: f64,
    pub count: u64,
    pub predicted: f64,
    pub relative_gap: f64,
}

/// Compares |𝒜(P,P^η)| against ρ(1/η)·P.
pub fn smooth_density_check(p: f64, eta: f64) -> Result<DensityReport> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let top = p.floor() as u64;
    let lpf = largest_prime_factor_sieve(top)?;
    let r = p.powf(eta);
    let count = (1..=top).filter(|&n| lpf[n as usize] as f64 <= r).count() as u64;
    let predicted = dickman_rho(1.0 / eta) * p;
    Ok(DensityReport {
        p,
        eta,
        count,
        predicted,
        relative_gap: (count as f64 - predicted).abs() / predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sets() {
        assert_eq!(smooth_set(10.0, 2.0).unwrap().members(), &[1, 2, 4, 8]);
        assert_eq!(smooth_set(30.0, 3.0).unwrap().len(), 12);
        let all = smooth_set(17.0, 17.0).unwrap();
        assert_eq!(all.members(), (1..=17).collect::<Vec<_>>().as_slice());
        assert_eq!(smooth_set(4.0, 4.0).unwrap().tilde_slice(), vec![3, 4]);
    }

    #[test]
    fn self_smooth_examples() {
        assert!(is_self_smooth(1, 0.3));
        assert!(is_self_smooth(8, 0.5));
        assert!(is_self_smooth(8, 1.0 / 3.0));
        assert!(!is_self_smooth(7, 0.5));
        assert!(!is_self_smooth(14, 0.5));
        let t = self_smooth_table(200, 0.5).unwrap();
        for x in 1..=200u64 {
            assert_eq!(t[x as usize], is_self_smooth(x, 0.5), "x = {x}");
        }
    }

    #[test]
    fn c_q_examples() {
        assert_eq!(c_q_set(20.0, 20.0, 6).unwrap(), vec![1, 2, 3, 4, 6, 8, 9, 12, 16, 18]);
        assert_eq!(c_q_set(100.0, 100.0, 1).unwrap(), vec![1]);
        assert_eq!(c_q_set(20.0, 2.0, 6).unwrap(), vec![1, 2, 4, 8, 16]);
        assert_eq!(c_q_pi_set(20.0, 20.0, 6, 2).unwrap(), vec![1, 3, 9]);
        assert_eq!(c_q_tilde_set(20.0, 20.0, 6).unwrap(), vec![12, 16, 18]);
    }

    #[test]
    fn b_set_bounds() {
        let b = b_set(10.0, 3, 5.0).unwrap();
        assert_eq!(b, vec![15, 27]);
        assert!(b.iter().all(|&v| v > 10 && v <= 30));
        assert!(b_set(10.0, 4, 5.0).is_err());
    }

    #[test]
    fn density_full_set_has_no_gap() {
        let r = smooth_density_check(1000.0, 1.0).unwrap();
        assert_eq!(r.count, 1000);
        assert_eq!(r.relative_gap, 0.0);
    }
}
