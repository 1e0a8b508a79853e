//! The singular series 𝔖(n) by truncated q-sum and by Euler product, the
//! exact congruence counts M_n(q), c_{k,s}(η), and the singular integral J̃(n).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_cells, Error, Result};
use crate::expsum::{gauss_sums_all, power_residue_counts, sum_complex, unit};
use crate::numtheory::{factorize, gcd, pairwise_sum, primes_up_to};
use crate::smooth::dickman_rho;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) by the Lanczos approximation (g = 7, nine terms), with reflection
/// below 1/2.
pub fn gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// (S(q,a)/q)^s for every a coprime to q.
fn normalized_powers(q: u64, k: u32, s: u32) -> Vec<(u64, Complex64)> {
    let all = gauss_sums_all(q, k);
    (0..q)
        .filter(|&a| gcd(a, q) == 1)
        .map(|a| (a, (all[a as usize] / q as f64).powu(s)))
        .collect()
}

fn a_q_from(q: u64, n: i128, terms: &[(u64, Complex64)]) -> Complex64 {
    let nq = n.rem_euclid(q as i128) as u128;
    let parts: Vec<Complex64> = terms
        .iter()
        .map(|&(a, t)| {
            let r = (a as u128 * nq) % q as u128;
            // e(−an/q) = e((q − an mod q)/q)
            let back = if r == 0 { 0.0 } else { (q as u128 - r) as f64 / q as f64 };
            t * unit(back)
        })
        .collect();
    sum_complex(&parts)
}

/// The q-th term Σ_{(a,q)=1} (q^{−1}S(q,a))^s e(−an/q), as a complex number.
pub fn a_q_complex(q: u64, n: i128, k: u32, s: u32) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("a_q needs q >= 1".into()));
    }
    Ok(a_q_from(q, n, &normalized_powers(q, k, s)))
}

/// Real part of [`a_q_complex`]; pairing a ↔ q − a makes the imaginary part vanish.
pub fn a_q(q: u64, n: i128, k: u32, s: u32) -> Result<f64> {
    Ok(a_q_complex(q, n, k, s)?.re)
}

/// M_n(q) = #{x ∈ (ℤ/qℤ)^s : x₁^k + … + x_s^k ≡ n mod q}, exactly.
pub fn count_mod(q: u64, n: i128, k: u32, s: u32) -> Result<u128> {
    Ok(count_mod_all(q, k, s)?[n.rem_euclid(q as i128) as usize])
}

/// M_n(q) for every residue n, by s-fold cyclic convolution of the
/// distribution of r^k.
pub fn count_mod_all(q: u64, k: u32, s: u32) -> Result<Vec<u128>> {
    if q == 0 {
        return Err(Error::Domain("count_mod needs q >= 1".into()));
    }
    check_cells("count_mod residues", 4 * q as u128)?;
    let dist = power_residue_counts(q, k);
    let support: Vec<(usize, u128)> = dist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c as u128))
        .collect();
    let qs = q as usize;
    let mut cur = vec![0u128; qs];
    cur[0] = 1;
    for _ in 0..s {
        let mut next = vec![0u128; qs];
        for (i, &c) in cur.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &(j, d) in &support {
                let slot = &mut next[(i + j) % qs];
                *slot = c
                    .checked_mul(d)
                    .and_then(|v| slot.checked_add(v))
                    .ok_or(Error::Budget { what: "count_mod in 128 bits", needed: u128::MAX, limit: u128::MAX })?;
            }
        }
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "kebab-case")]
pub enum Route {
    /// 𝔖(n, Q) = Σ_{q ≤ Q} a_q(n).
    QSum { q_max: u64 },
    /// Π_p χ_p with per-prime depth chosen by stabilisation.
    Euler { tolerance: f64, max_depth: u32 },
}

/// Precomputed (q^{−1}S(q,a))^s for every q ≤ Q, for evaluating 𝔖(n,Q) at many n.
#[derive(Debug, Clone)]
pub struct QSumEvaluator {
    pub k: u32,
    pub s: u32,
    pub q_max: u64,
    terms: Vec<Vec<(u64, Complex64)>>,
}

impl QSumEvaluator {
    pub fn new(k: u32, s: u32, q_max: u64) -> Result<Self> {
        if q_max == 0 {
            return Err(Error::Domain("q-sum needs Q >= 1".into()));
        }
        check_cells("q-sum tables", 2 * (q_max as u128) * (q_max as u128))?;
        let terms = (1..=q_max).into_par_iter().map(|q| normalized_powers(q, k, s)).collect();
        Ok(Self { k, s, q_max, terms })
    }

    /// a_q(n) for q = 1..=Q.
    pub fn terms(&self, n: i128) -> Vec<f64> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| a_q_from(i as u64 + 1, n, t).re)
            .collect()
    }

    /// 𝔖(n, Q') for every Q' ≤ Q (partial sums in q order).
    pub fn partial_sums(&self, n: i128) -> Vec<f64> {
        let mut acc = 0.0;
        self.terms(n)
            .into_iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect()
    }

    pub fn eval(&self, n: i128) -> f64 {
        pairwise_sum(&self.terms(n))
    }

    pub fn eval_truncated(&self, n: i128, q: u64) -> f64 {
        let t = self.terms(n);
        pairwise_sum(&t[..(q.min(self.q_max) as usize)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerFactor {
    pub p: u64,
    pub depth: u32,
    pub chi: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSeriesValue {
    pub n: i128,
    pub value: f64,
    pub route: Route,
    pub converged: bool,
    /// Euler route: the largest prime used and the estimated tail.
    pub prime_bound: Option<u64>,
    pub tail_estimate: Option<f64>,
    pub factors: Vec<EulerFactor>,
}

/// p^h·P(x₁^k + … + x_s^k ≡ n mod p^h) for every residue n, computed by a
/// cyclic FFT of the normalised residue distribution.
fn local_densities(q: u64, k: u32, s: u32) -> Result<Vec<f64>> {
    check_cells("local density transform", 4 * q as u128)?;
    let qs = q as usize;
    let dist = power_residue_counts(q, k);
    let mut buf: Vec<Complex64> = dist.iter().map(|&c| Complex64::new(c as f64 / q as f64, 0.0)).collect();
    if qs == 1 {
        return Ok(vec![1.0]);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(qs).process(&mut buf);
    buf.iter_mut().for_each(|z| *z = z.powu(s));
    planner.plan_fft_inverse(qs).process(&mut buf);
    // Inverse transform is unnormalised: divide by q, then scale by q.
    Ok(buf.iter().map(|z| z.re).collect())
}

/// The depth γ_p from which Hensel lifting applies: τ + 1 (τ + 2 for p = 2), p^τ ∥ k.
pub fn gamma_p(p: u64, k: u32) -> u32 {
    let mut tau = 0;
    let mut kk = k as u64;
    while kk.is_multiple_of(p) {
        kk /= p;
        tau += 1;
    }
    if p == 2 {
        tau + 2
    } else {
        tau + 1
    }
}

/// Cap on p^h for the Euler-route transforms.
const EULER_MODULUS_CAP: u64 = 1 << 22;

/// χ_p(n) for every n in `ns`, deepening until two consecutive levels agree.
fn euler_factor(p: u64, ns: &[i128], k: u32, s: u32, tol: f64, max_depth: u32) -> Result<Vec<EulerFactor>> {
    let mut h = gamma_p(p, k).min(max_depth).max(1);
    let mut prev = local_densities(p.pow(h), k, s)?;
    let mut out: Vec<Option<EulerFactor>> = vec![None; ns.len()];
    if !(k as u64).is_multiple_of(p) {
        // p ∤ k and p ∤ n: every solution mod p is non-singular, so the
        // density is already stable at depth one.
        for (i, slot) in out.iter_mut().enumerate() {
            let r = ns[i].rem_euclid(p as i128);
            if h == 1 && r != 0 {
                *slot = Some(EulerFactor { p, depth: 1, chi: prev[r as usize], converged: true });
            }
        }
        if out.iter().all(Option::is_some) {
            return Ok(out.into_iter().map(|f| f.expect("assigned")).collect());
        }
    }
    loop {
        let next_h = h + 1;
        let modulus = p.checked_pow(next_h).filter(|&m| m <= EULER_MODULUS_CAP);
        let Some(modulus) = modulus.filter(|_| next_h <= max_depth) else {
            for (i, slot) in out.iter_mut().enumerate() {
                if slot.is_none() {
                    let q = p.pow(h) as i128;
                    *slot = Some(EulerFactor { p, depth: h, chi: prev[ns[i].rem_euclid(q) as usize], converged: false });
                }
            }
            break;
        };
        let cur = local_densities(modulus, k, s)?;
        let q_prev = p.pow(h) as i128;
        let mut pending = false;
        for (i, slot) in out.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let a = prev[ns[i].rem_euclid(q_prev) as usize];
            let b = cur[ns[i].rem_euclid(modulus as i128) as usize];
            if (a - b).abs() <= tol * b.abs().max(1.0) {
                *slot = Some(EulerFactor { p, depth: next_h, chi: b, converged: true });
            } else {
                pending = true;
            }
        }
        if !pending {
            break;
        }
        prev = cur;
        h = next_h;
    }
    Ok(out.into_iter().map(|f| f.expect("every n assigned")).collect())
}

/// Σ_{p > B} (p − 1)((k − 1)p^{−1/2})^s, bounded by the matching integral.
fn prime_tail_bound(b: f64, k: u32, s: u32) -> f64 {
    let c = ((k.max(2) - 1) as f64).powi(s as i32);
    let e = s as f64 / 2.0 - 1.0;
    if e <= 1.0 {
        return f64::INFINITY;
    }
    c * b.powf(1.0 - e) / (e - 1.0)
}

/// 𝔖(n) for every n in `ns` by the Euler product.
pub fn sing_series_euler(ns: &[i128], k: u32, s: u32, tol: f64, max_depth: u32) -> Result<Vec<SingularSeriesValue>> {
    if !(tol > 0.0) {
        return Err(Error::Domain("Euler route needs a positive tolerance".into()));
    }
    // Past B the Weil-type bound on |χ_p − 1| makes the remaining product negligible.
    let mut bound = (s as u64 * k as u64).max(20);
    while prime_tail_bound(bound as f64, k, s) > tol {
        bound = bound * 5 / 4 + 1;
        if bound > 1 << 20 {
            return Err(Error::Numeric(format!("prime tail does not fall below {tol} for k = {k}, s = {s}")));
        }
    }
    let primes = primes_up_to(bound);
    let per_prime: Vec<Vec<EulerFactor>> = primes
        .par_iter()
        .map(|&p| euler_factor(p, ns, k, s, tol, max_depth))
        .collect::<Result<_>>()?;
    let tail = prime_tail_bound(bound as f64, k, s);
    Ok(ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let factors: Vec<EulerFactor> = per_prime.iter().map(|f| f[i].clone()).collect();
            let value = factors.iter().map(|f| f.chi).product();
            SingularSeriesValue {
                n,
                value,
                route: Route::Euler { tolerance: tol, max_depth },
                converged: factors.iter().all(|f| f.converged),
                prime_bound: Some(bound),
                tail_estimate: Some(tail),
                factors: factors.into_iter().filter(|f| f.chi != 1.0 || !f.converged).take(64).collect(),
            }
        })
        .collect())
}

/// 𝔖(n) by the requested route.
pub fn sing_series(n: i128, k: u32, s: u32, route: Route) -> Result<SingularSeriesValue> {
    match route {
        Route::QSum { q_max } => {
            let ev = QSumEvaluator::new(k, s, q_max)?;
            Ok(SingularSeriesValue {
                n,
                value: ev.eval(n),
                route,
                converged: true,
                prime_bound: None,
                tail_estimate: None,
                factors: Vec::new(),
            })
        }
        Route::Euler { tolerance, max_depth } => {
            Ok(sing_series_euler(&[n], k, s, tolerance, max_depth)?.remove(0))
        }
    }
}

/// c_{k,s}(η) = k^{−s} ρ(1/η)^s Γ(1/s)^s.
pub fn c_ks(k: u32, s: u32, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("c_ks needs eta > 0, got {eta}")));
    }
    let rho = if eta >= 1.0 { 1.0 } else { dickman_rho(1.0 / eta) };
    Ok((rho * gamma(1.0 / s as f64) / k as f64).powi(s as i32))
}

/// J̃(n) = k^{−s} Σ_{m₁+…+m_s = n, m_i ≥ 1} (m₁⋯m_s)^{1/s−1}.
///
/// The (s−1)-fold convolution of m^{1/s−1} comes from one FFT; the last
/// convolution is an explicit dot product.
pub fn singular_integral(n: u64, k: u32, s: u32) -> Result<f64> {
    if s == 0 || k == 0 {
        return Err(Error::Domain("singular_integral needs s, k >= 1".into()));
    }
    if n < s as u64 {
        return Ok(0.0);
    }
    check_cells("singular integral convolution", 4 * n as u128 * s as u128)?;
    let e = 1.0 / s as f64 - 1.0;
    let u: Vec<f64> = (0..=n).map(|m| if m == 0 { 0.0 } else { (m as f64).powf(e) }).collect();
    let scale = (k as f64).powi(-(s as i32));
    if s == 1 {
        return Ok(scale * u[n as usize]);
    }
    let v = fold_power(&u, s - 1);
    let dot: Vec<f64> = (1..n as usize).map(|m| u[m] * v[n as usize - m]).collect();
    Ok(scale * pairwise_sum(&dot))
}

/// The w-fold self-convolution of `u`, truncated to `u.len()` entries.
fn fold_power(u: &[f64], w: u32) -> Vec<f64> {
    if w == 1 {
        return u.to_vec();
    }
    let len = u.len();
    let n = (len * w as usize).next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    buf.iter_mut().for_each(|z| *z = z.powu(w));
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().take(len).map(|z| z.re / n as f64).collect()
}

/// Multiplicative structure check: is q a prime power?
pub fn is_prime_power(q: u64) -> bool {
    q > 1 && factorize(q).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::divisors;
    use std::f64::consts::PI;

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5).powi(2) - PI).abs() < 1e-10);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((gamma(1.0 / 3.0) - 2.678_938_534_707_747_6).abs() < 1e-12);
    }

    #[test]
    fn a_q_basics() {
        assert!((a_q(1, 17, 2, 9).unwrap() - 1.0).abs() < 1e-15);
        for q in 2..40 {
            let z = a_q_complex(q, 11, 2, 9).unwrap();
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonality_small() {
        let (k, s) = (2, 5);
        for q in [4u64, 6, 9, 12] {
            for n in 0..8 {
                let lhs: f64 = divisors(q).iter().map(|&d| a_q(d, n, k, s).unwrap()).sum();
                let m = count_mod(q, n, k, s).unwrap() as f64;
                let rhs = (q as f64).powi(1 - s as i32) * m;
                assert!((lhs - rhs).abs() < 1e-10, "q = {q}, n = {n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn multiplicativity() {
        for (q1, q2) in [(3u64, 4u64), (5, 8), (7, 9)] {
            let lhs = a_q(q1 * q2, 23, 2, 9).unwrap();
            let rhs = a_q(q1, 23, 2, 9).unwrap() * a_q(q2, 23, 2, 9).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn count_mod_examples() {
        for q in 1..12 {
            for n in 0..q as i128 {
                assert_eq!(count_mod(q, n, 1, 1).unwrap(), 1);
            }
        }
        assert_eq!(count_mod(2, 0, 2, 2).unwrap(), 2);
        let total: u128 = count_mod_all(10, 3, 4).unwrap().iter().sum();
        assert_eq!(total, 10u128.pow(4));
    }

    #[test]
    fn c_ks_composition() {
        let direct = c_ks(2, 9, 0.5).unwrap();
        let composed = 2f64.powi(-9) * (1.0 - 2f64.ln()).powi(9) * gamma(1.0 / 9.0).powi(9);
        assert!(((direct - composed) / composed).abs() < 1e-9);
        let plain = c_ks(3, 4, 1.0).unwrap();
        assert!((plain - (gamma(0.25) / 3.0).powi(4)).abs() < 1e-12);
    }

    #[test]
    fn singular_integral_small_cases() {
        for n in 1..20 {
            assert!((singular_integral(n, 3, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((singular_integral(2, 3, 2).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(singular_integral(2, 3, 3).unwrap(), 0.0);
        // s = 3, n = 4: tuples (1,1,2) in three orders, each weight 2^{−2/3}.
        let expect = 3.0 * 2f64.powf(-2.0 / 3.0) / 27.0;
        assert!((singular_integral(4, 3, 3).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn euler_and_qsum_agree_small() {
        let ev = QSumEvaluator::new(2, 9, 200).unwrap();
        let eu = sing_series_euler(&[1, 7, 24], 2, 9, 1e-9, 6).unwrap();
        for v in &eu {
            assert!(v.converged);
            assert!((ev.eval(v.n) - v.value).abs() < 1e-3);
            assert!(v.value > 0.0);
        }
    }
}
