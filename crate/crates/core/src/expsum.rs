//! Gauss sums, smooth Weyl sums and their weighted variants, the auxiliary
//! sums w_s / w̃_s, and the major-arc approximant.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{checked_power, gcd, pairwise_sum, pow_mod};
use crate::smooth::{dickman_rho, SmoothSet};

/// Term ceiling for the direct w_s summation.
pub const W_SUM_MAX_TERMS: u64 = 1 << 34;

/// Fractional part of α·n, computed without losing the low bits of α·n.
///
/// α is split into its exact dyadic form m·2^{−E}; the product m·n is formed
/// in 256-bit arithmetic and reduced modulo 2^E.
pub fn frac_of_product(alpha: f64, n: u128) -> f64 {
    if alpha == 0.0 || n == 0 || !alpha.is_finite() {
        return 0.0;
    }
    let neg = alpha < 0.0;
    let bits = alpha.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let (mant, exp) = if raw_exp == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), raw_exp - 1075)
    };
    if exp >= 0 {
        return 0.0;
    }
    let e = (-exp) as u32;
    let frac = if e >= 181 {
        // m·n < 2^181 ≤ 2^E: nothing to reduce.
        alpha.abs() * n as f64
    } else {
        let (lo, hi) = mul_u64_u128(mant, n);
        if e <= 128 {
            let masked = if e == 128 { lo } else { lo & ((1u128 << e) - 1) };
            masked as f64 * 2f64.powi(-(e as i32))
        } else {
            let hi_masked = hi & ((1u128 << (e - 128)) - 1);
            hi_masked as f64 * 2f64.powi(128 - e as i32) + lo as f64 * 2f64.powi(-(e as i32))
        }
    };
    let frac = frac.fract();
    if neg && frac != 0.0 {
        1.0 - frac
    } else {
        frac
    }
}

fn mul_u64_u128(m: u64, n: u128) -> (u128, u128) {
    let n0 = n as u64 as u128;
    let n1 = n >> 64;
    let p0 = m as u128 * n0;
    let p1 = m as u128 * n1;
    let (lo, carry) = p0.overflowing_add(p1 << 64);
    let hi = (p1 >> 64) + carry as u128;
    (lo, hi)
}

/// e(θ) = exp(2πiθ) for θ already reduced to [0, 1).
pub fn unit(theta: f64) -> Complex64 {
    let (s, c) = (TAU * theta).sin_cos();
    Complex64::new(c, s)
}

/// e(αn) with exact reduction of αn modulo 1.
pub fn e_alpha_n(alpha: f64, n: u128) -> Complex64 {
    unit(frac_of_product(alpha, n))
}

/// S(q,a) = Σ_{r=1}^{q} e(ar^k/q).
pub fn gauss_sum(q: u64, a: i64, k: u32) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("gauss_sum needs q >= 1".into()));
    }
    let a = a.rem_euclid(q as i64) as u64;
    if gcd(a, q) != 1 {
        return Err(Error::Domain(format!("gauss_sum needs gcd(a, q) = 1, got a = {a}, q = {q}")));
    }
    let terms: Vec<Complex64> = (1..=q)
        .map(|r| {
            let j = (a as u128 * pow_mod(r, k, q) as u128 % q as u128) as f64;
            unit(j / q as f64)
        })
        .collect();
    Ok(sum_complex(&terms))
}

/// Counts of r^k mod q over r = 1..q.
pub fn power_residue_counts(q: u64, k: u32) -> Vec<u64> {
    let mut counts = vec![0u64; q as usize];
    for r in 1..=q {
        counts[pow_mod(r, k, q) as usize] += 1;
    }
    counts
}

/// S(q,a) for every a mod q (including non-coprime a), by one DFT of the
/// residue distribution of r^k.
pub fn gauss_sums_all(q: u64, k: u32) -> Vec<Complex64> {
    let counts = power_residue_counts(q, k);
    let mut buf: Vec<Complex64> = counts.iter().map(|&c| Complex64::new(c as f64, 0.0)).collect();
    if q > 1 {
        FftPlanner::new().plan_fft_inverse(q as usize).process(&mut buf);
    }
    buf
}

pub(crate) fn sum_complex(terms: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = terms.iter().map(|z| z.re).collect();
    let im: Vec<f64> = terms.iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// f(α,P,R): unit weights over 𝒜(P,R).
    Full,
    /// f_s(α,P,R): weights x^{−1+k/s} over 𝒜(P,R).
    Weighted,
    /// g_s(α,P,R): weights x^{−1+k/s} over Ã(P,R).
    Dyadic,
    /// f̃_s(α,P,R): weights x^{−1+k/s} over x ∈ 𝒜(P,R), x > P₋.
    Truncated,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "f" => Ok(Self::Full),
            "weighted" | "fs" => Ok(Self::Weighted),
            "dyadic" | "gs" => Ok(Self::Dyadic),
            "truncated" | "ft" => Ok(Self::Truncated),
            other => Err(Error::Domain(format!("unknown Weyl-sum variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylSumSpec {
    pub k: u32,
    pub s: u32,
    pub p: f64,
    pub r: f64,
    pub variant: Variant,
}

/// ĩ_s = ⌈log 2s / (k log 2)⌉.
pub fn i_tilde(k: u32, s: u32) -> u32 {
    ((2.0 * s as f64).ln() / (k as f64 * 2f64.ln())).ceil() as u32
}

/// P₋ = 2^{−ĩ_s−1} P.
pub fn p_minus(p: f64, k: u32, s: u32) -> f64 {
    p / 2f64.powi(i_tilde(k, s) as i32 + 1)
}

/// The weight x^{−1+k/s}.
pub fn smooth_weight(x: u64, k: u32, s: u32) -> f64 {
    (x as f64).powf(-1.0 + k as f64 / s as f64)
}

impl WeylSumSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.s < 1 || !(self.p >= 1.0) || !(self.r >= 1.0) {
            return Err(Error::Domain(format!("invalid Weyl-sum spec {self:?}")));
        }
        Ok(())
    }

    /// The x-range of the variant together with its weight.
    pub fn terms(&self) -> Result<Vec<(u64, f64)>> {
        self.validate()?;
        let set = SmoothSet::new(self.p, self.r)?;
        Ok(self.terms_from(&set))
    }

    /// As [`terms`](Self::terms) using a pre-built set with the same P and R.
    pub fn terms_from(&self, set: &SmoothSet) -> Vec<(u64, f64)> {
        let xs: Vec<u64> = match self.variant {
            Variant::Full | Variant::Weighted => set.members().to_vec(),
            Variant::Dyadic => set.tilde_slice(),
            Variant::Truncated => {
                let cut = p_minus(self.p, self.k, self.s);
                set.members().iter().copied().filter(|&x| x as f64 > cut).collect()
            }
        };
        xs.into_iter()
            .map(|x| {
                let w = if self.variant == Variant::Full {
                    1.0
                } else {
                    smooth_weight(x, self.k, self.s)
                };
                (x, w)
            })
            .collect()
    }
}

/// A weighted exponential sum Σ weight·e(α·frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    freqs: Vec<u128>,
    weights: Vec<f64>,
}

impl FrequencyTable {
    /// Builds from (frequency, weight) pairs, merging repeated frequencies.
    pub fn from_pairs(mut pairs: Vec<(u128, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut freqs: Vec<u128> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (f, w) in pairs {
            if !(w > 0.0) {
                return Err(Error::Domain(format!("weights must be positive, got {w} at {f}")));
            }
            if freqs.last() == Some(&f) {
                *weights.last_mut().unwrap() += w;
            } else {
                freqs.push(f);
                weights.push(w);
            }
        }
        Ok(Self { freqs, weights })
    }

    pub fn from_spec(spec: &WeylSumSpec) -> Result<Self> {
        Self::from_terms(&spec.terms()?, spec.k)
    }

    /// Frequencies x^k with the given weights; overflow of x^k is a budget error.
    pub fn from_terms(terms: &[(u64, f64)], k: u32) -> Result<Self> {
        let pairs = terms
            .iter()
            .map(|&(x, w)| {
                checked_power(x, k)
                    .map(|f| (f, w))
                    .ok_or(Error::Budget { what: "x^k in 128 bits", needed: u128::MAX, limit: u128::MAX })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(pairs)
    }

    pub fn frequencies(&self) -> &[u128] {
        &self.freqs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn max_frequency(&self) -> u128 {
        self.freqs.last().copied().unwrap_or(0)
    }

    /// Σ weight·e(α·frequency).
    pub fn eval(&self, alpha: f64) -> Complex64 {
        self.eval_scaled(alpha, 1)
    }

    /// Σ weight·e(a·α·frequency) for an integer dilation a.
    pub fn eval_scaled(&self, alpha: f64, a: u64) -> Complex64 {
        let terms: Vec<Complex64> = self
            .freqs
            .iter()
            .zip(&self.weights)
            .map(|(&f, &w)| e_alpha_n(alpha, f * a as u128) * w)
            .collect();
        sum_complex(&terms)
    }
}

/// Evaluates the Weyl sum described by `spec` at α.
pub fn eval(spec: &WeylSumSpec, alpha: f64) -> Result<Complex64> {
    Ok(FrequencyTable::from_spec(spec)?.eval(alpha))
}

/// w_s(β) = (1/k) Σ_{1 ≤ x ≤ P^k} x^{−1+1/s} e(βx); with `truncated` the
/// range is P₋^k < x ≤ P^k.
pub fn w_sum(s: u32, k: u32, p: f64, beta: f64, truncated: bool) -> Result<Complex64> {
    if s == 0 || k == 0 || !(p >= 1.0) {
        return Err(Error::Domain("w_sum needs s, k >= 1 and P >= 1".into()));
    }
    let top_f = p.powi(k as i32);
    if top_f > W_SUM_MAX_TERMS as f64 {
        return Err(Error::Budget {
            what: "w_sum terms",
            needed: top_f as u128,
            limit: W_SUM_MAX_TERMS as u128,
        });
    }
    let top = top_f.floor() as u64;
    let bottom = if truncated {
        p_minus(p, k, s).powi(k as i32).floor() as u64
    } else {
        0
    };
    let expo = -1.0 + 1.0 / s as f64;
    const BLOCK: u64 = 1 << 14;
    let blocks: Vec<(u64, u64)> = (bottom + 1..=top)
        .step_by(BLOCK as usize)
        .map(|lo| (lo, (lo + BLOCK - 1).min(top)))
        .collect();
    let partial: Vec<Complex64> = blocks
        .par_iter()
        .map(|&(lo, hi)| {
            let terms: Vec<Complex64> = (lo..=hi)
                .map(|x| e_alpha_n(beta, x as u128) * (x as f64).powf(expo))
                .collect();
            sum_complex(&terms)
        })
        .collect();
    Ok(sum_complex(&partial) / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorArcReport {
    pub model: Complex64,
    pub actual: Complex64,
    pub gap: f64,
    /// |gap|·P^{−k/s}·(log P)^{1/2}.
    pub normalized_defect: f64,
    /// Every hypothesis of the approximation held.
    pub in_hypothesis: bool,
    pub violations: Vec<String>,
}

/// Compares f_s(α,P,R) with ρ(1/η) q^{−1} S(q,a) w_s(α − a/q).
pub fn major_arc_model(spec: &WeylSumSpec, alpha: f64, a: i64, q: u64, eta: f64) -> Result<MajorArcReport> {
    spec.validate()?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    let (k, s, p) = (spec.k, spec.s, spec.p);
    let log_p = p.ln();
    let mut violations = Vec::new();
    let q_cap = log_p.powf(0.125);
    if q as f64 > q_cap {
        violations.push(format!("q = {q} exceeds (log P)^(1/8) = {q_cap:.4}"));
    }
    let offset = alpha - a as f64 / q as f64;
    let width = q_cap * p.powi(-(k as i32));
    if offset.abs() > width {
        violations.push(format!("|alpha - a/q| = {:.3e} exceeds (log P)^(1/8) P^-k = {width:.3e}", offset.abs()));
    }
    let r_hi = p.powf(eta);
    let r_lo = r_hi * (-eta * (log_p / k as f64).sqrt()).exp();
    if spec.r < r_lo * (1.0 - 1e-12) || spec.r > r_hi * (1.0 + 1e-12) {
        violations.push(format!("R = {} outside [{r_lo:.4}, {r_hi:.4}]", spec.r));
    }

    let weighted = WeylSumSpec {
        variant: Variant::Weighted,
        ..*spec
    };
    let actual = eval(&weighted, alpha)?;
    let model = gauss_sum(q, a, k)? / q as f64 * dickman_rho(1.0 / eta) * w_sum(s, k, p, offset, false)?;
    let gap = (actual - model).norm();
    Ok(MajorArcReport {
        model,
        actual,
        gap,
        normalized_defect: gap * p.powf(-(k as f64) / s as f64) * log_p.sqrt(),
        in_hypothesis: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn gauss_examples() {
        assert!(close(gauss_sum(1, 0, 3).unwrap(), Complex64::new(1.0, 0.0), 1e-14));
        assert!(gauss_sum(2, 1, 4).unwrap().norm() < 1e-14);
        assert!(close(gauss_sum(4, 1, 2).unwrap(), Complex64::new(2.0, 2.0), 1e-12));
        assert!(gauss_sum(6, 2, 2).is_err());
    }

    #[test]
    fn gauss_fft_matches_direct() {
        for &(q, k) in &[(7u64, 2u32), (12, 3), (25, 2), (31, 5)] {
            let all = gauss_sums_all(q, k);
            for a in 1..q {
                if gcd(a, q) == 1 {
                    assert!(close(all[a as usize], gauss_sum(q, a as i64, k).unwrap(), 1e-10));
                }
            }
        }
    }

    #[test]
    fn exact_phase_reduction() {
        let n: u128 = 1 << 70;
        assert_eq!(frac_of_product(0.5, n + 1), 0.5);
        assert_eq!(frac_of_product(-0.25, 3), 0.25);
        let alpha = 0.1;
        let direct = (alpha * 12345.0_f64).fract();
        assert!((frac_of_product(alpha, 12345) - direct).abs() < 1e-12);
        // α = 2^-100: α·2^99 = 1/2 exactly.
        assert_eq!(frac_of_product(2f64.powi(-100), 1 << 99), 0.5);
    }

    #[test]
    fn eval_at_zero_and_symmetry() {
        let spec = WeylSumSpec { k: 2, s: 9, p: 60.0, r: 10.0, variant: Variant::Dyadic };
        let t = FrequencyTable::from_spec(&spec).unwrap();
        let z = t.eval(0.0);
        assert!(z.im == 0.0 && (z.re - t.total_weight()).abs() < 1e-12);
        for &a in &[0.123, 0.377, 0.9] {
            assert!(close(t.eval(-a), t.eval(a).conj(), 1e-12));
            assert!(t.eval(a).norm() <= z.re + 1e-12);
        }
        let a = 3.0 / 1024.0;
        assert_eq!(t.eval(a + 1.0), t.eval(a));
    }

    #[test]
    fn dyadic_decomposition() {
        let (k, s, p, r) = (3u32, 7u32, 100.0, 7.0);
        let alpha = 0.2916;
        let f = eval(&WeylSumSpec { k, s, p, r, variant: Variant::Weighted }, alpha).unwrap();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut i = 0;
        while p / 2f64.powi(i) >= 1.0 {
            let pi = p / 2f64.powi(i);
            sum += eval(&WeylSumSpec { k, s, p: pi, r, variant: Variant::Dyadic }, alpha).unwrap();
            i += 1;
        }
        assert!(close(f, sum, 1e-12));
    }

    #[test]
    fn truncated_cutoff() {
        assert_eq!(i_tilde(2, 9), 3);
        let spec = WeylSumSpec { k: 2, s: 9, p: 100.0, r: 100.0, variant: Variant::Truncated };
        let terms = spec.terms().unwrap();
        assert_eq!(terms.first().unwrap().0, 7);
    }

    #[test]
    fn w_sum_at_zero() {
        // Leading term alone is adequate when ζ(1 − 1/s) is small next to sX^{1/s}.
        let w = w_sum(2, 2, 100.0, 0.0, false).unwrap();
        assert!(((w.re - 100.0) / 100.0).abs() < 0.05);
        // Euler–Maclaurin: Σ_{x≤X} x^{−1+1/s} = sX^{1/s} + ζ(1−1/s) + X^{−1+1/s}/2 + …
        let (s, k, p) = (9u32, 2u32, 100.0);
        let x: f64 = 1e4;
        let zeta_8_9 = -8.430_934_317_219_26;
        let oracle = (9.0 * x.powf(1.0 / 9.0) + zeta_8_9 + 0.5 * x.powf(-8.0 / 9.0)) / 2.0;
        let w = w_sum(s, k, p, 0.0, false).unwrap();
        assert!(((w.re - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", w.re);
        assert_eq!(w.im, 0.0);
        let wt = w_sum(s, k, p, 0.0, true).unwrap();
        assert!(wt.re < w.re && wt.re > 0.0);
    }
}
