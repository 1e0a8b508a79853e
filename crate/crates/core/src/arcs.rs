//! Hardy–Littlewood dissections of the unit interval: 𝔐(Q,P), the shells
//! 𝔑(Q,P), minor arcs, the narrow arcs 𝔎, and the pruning weight Υ.

use serde::{Deserialize, Serialize};

use crate::error::{check_cells, Error, Result};
use crate::numtheory::{euler_phi, gcd};

/// Coprime (a, q) together with err = |qα − a|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub a: u64,
    pub q: u64,
    pub err: f64,
}

/// Below this α every q ≤ 2^64 has |qα − a| minimised by (0, 1).
const TINY_ALPHA: f64 = 1.0 / (1u128 << 67) as f64;

/// Coprime (a, q), q ≤ Q, minimising |qα − a|.
///
/// The minimisers of |qα − a| are continued-fraction convergents, so the
/// answer is the last convergent with denominator ≤ Q. α is expanded from
/// its exact dyadic value, and the error term is tracked as an exact integer.
pub fn best_approx(alpha: f64, q_max: f64) -> RationalApprox {
    let alpha = alpha.rem_euclid(1.0);
    let qcap = if q_max >= u64::MAX as f64 { u64::MAX } else { q_max.max(1.0).floor() as u64 };
    if alpha == 0.0 {
        return RationalApprox { a: 0, q: 1, err: 0.0 };
    }
    if alpha < TINY_ALPHA {
        return RationalApprox { a: 0, q: 1, err: alpha };
    }
    let bits = alpha.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let mut m = ((bits & ((1 << 52) - 1)) | (1 << 52)) as i128;
    let mut e = 1075 - raw_exp;
    while m & 1 == 0 && e > 0 {
        m >>= 1;
        e -= 1;
    }
    let denom = 1i128 << e;
    let scale = 2f64.powi(-e);

    // Convergent n satisfies q_n·m − p_n·2^E = err_n, err_n alternating in sign.
    let (mut p_prev, mut q_prev, mut e_prev) = (1u128, 0u128, -denom);
    let (mut p_cur, mut q_cur, mut e_cur) = (0u128, 1u128, m);
    loop {
        if e_cur == 0 {
            break;
        }
        let a_n = e_prev.unsigned_abs() / e_cur.unsigned_abs();
        let q_next = a_n.saturating_mul(q_cur).saturating_add(q_prev);
        if q_next > qcap as u128 {
            break;
        }
        let p_next = a_n * p_cur + p_prev;
        let e_next = a_n as i128 * e_cur + e_prev;
        (p_prev, q_prev, e_prev) = (p_cur, q_cur, e_cur);
        (p_cur, q_cur, e_cur) = (p_next, q_next, e_next);
    }
    RationalApprox {
        a: p_cur as u64,
        q: q_cur as u64,
        err: e_cur.unsigned_abs() as f64 * scale,
    }
}

/// The arc in 𝔐(Q,P) containing α, if any.
pub fn major_arc_of(alpha: f64, q: f64, p: f64, k: u32) -> Option<RationalApprox> {
    if q < 1.0 {
        return None;
    }
    let ra = best_approx(alpha, q);
    (ra.err <= q * p.powi(-(k as i32))).then_some(ra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "kebab-case")]
pub enum Classification {
    Major { a: u64, q: u64, err: f64 },
    Minor,
}

/// Major(a, q) iff |qα − a| ≤ QP^{−k} for some coprime q ≤ Q; ties are major.
pub fn classify(alpha: f64, q: f64, p: f64, k: u32) -> Classification {
    match major_arc_of(alpha, q, p, k) {
        Some(ra) => Classification::Major { a: ra.a, q: ra.q, err: ra.err },
        None => Classification::Minor,
    }
}

/// α ∈ 𝔑(Q,P) = 𝔐(Q,P) ∖ 𝔐(Q/2,P).
pub fn in_truncated(alpha: f64, q: f64, p: f64, k: u32) -> bool {
    major_arc_of(alpha, q, p, k).is_some() && major_arc_of(alpha, q / 2.0, p, k).is_none()
}

/// (a, q) with q ≤ L and |α − a/q| ≤ L·P^{−k}, L = (log P)^{1/8}.
pub fn in_k(alpha: f64, p: f64, k: u32) -> Option<(u64, u64)> {
    let alpha = alpha.rem_euclid(1.0);
    let l = p.ln().max(0.0).powf(0.125);
    let width = l * p.powi(-(k as i32));
    (1..=l.floor() as u64).find_map(|q| {
        let a = (alpha * q as f64).round() as u64;
        let hit = gcd(a, q) == 1 && (alpha - a as f64 / q as f64).abs() <= width;
        hit.then_some((a % q, q))
    })
}

/// The family 𝔐(Q,P) with a half-width rule |qα − a| ≤ QP^{−k}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcDissection {
    pub k: u32,
    pub p: f64,
    pub q: f64,
}

impl ArcDissection {
    pub fn new(k: u32, p: f64, q: f64) -> Result<Self> {
        if k == 0 || !(p > 1.0) || !(q >= 1.0) || q > p.powf(k as f64 / 2.0) * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("arcs need 1 <= Q <= P^(k/2), got k = {k}, P = {p}, Q = {q}")));
        }
        Ok(Self { k, p, q })
    }

    /// The extreme minor-arc shell 𝔑(cP^{k/2}, P).
    pub fn extreme(k: u32, p: f64, c: f64) -> Result<Self> {
        Self::new(k, p, c * p.powf(k as f64 / 2.0))
    }

    /// Q ≤ ½P^{k/2}, where the arcs are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        self.q <= 0.5 * self.p.powf(self.k as f64 / 2.0)
    }

    pub fn classify(&self, alpha: f64) -> Classification {
        classify(alpha, self.q, self.p, self.k)
    }

    pub fn in_truncated(&self, alpha: f64) -> bool {
        in_truncated(alpha, self.q, self.p, self.k)
    }

    pub fn measure(&self) -> Result<f64> {
        measure_major(self.q, self.p, self.k)
    }
}

/// Total length of 𝔐(Q,P) on the torus.
///
/// In the disjoint regime this is Σ_{q ≤ Q} φ(q)·2Q/(qP^k); otherwise the
/// arcs are merged as intervals.
pub fn measure_major(q: f64, p: f64, k: u32) -> Result<f64> {
    let d = ArcDissection::new(k, p, q)?;
    let pk = p.powi(k as i32);
    let qmax = q.floor() as u64;
    if d.is_disjoint() {
        return Ok((1..=qmax).map(|qq| euler_phi(qq) as f64 * 2.0 * q / (qq as f64 * pk)).sum());
    }
    let count: u128 = (1..=qmax).map(|qq| euler_phi(qq) as u128).sum();
    check_cells("arc intervals", 2 * count)?;
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(count as usize + 1);
    for qq in 1..=qmax {
        let half = q / (qq as f64 * pk);
        for a in 0..qq {
            if gcd(a, qq) == 1 {
                let c = a as f64 / qq as f64;
                let (lo, hi) = (c - half, c + half);
                // Wrap onto [0, 1).
                if lo < 0.0 {
                    intervals.push((lo + 1.0, 1.0));
                    intervals.push((0.0, hi.min(1.0)));
                } else if hi > 1.0 {
                    intervals.push((lo, 1.0));
                    intervals.push((0.0, hi - 1.0));
                } else {
                    intervals.push((lo, hi));
                }
            }
        }
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        cur = match cur {
            Some((clo, chi)) if lo <= chi => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((clo, chi)) = cur {
        total += chi - clo;
    }
    Ok(total.min(1.0))
}

/// The shells 𝔑(2^{−j}P^{k/2}, P) for j = 0, …, J_Q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicCover {
    pub k: u32,
    pub p: f64,
    pub j_q: u32,
    /// Q_j = 2^{−j}P^{k/2}.
    pub levels: Vec<f64>,
}

impl DyadicCover {
    /// The first j whose shell contains α.
    pub fn locate(&self, alpha: f64) -> Option<usize> {
        self.levels.iter().position(|&qj| in_truncated(alpha, qj, self.p, self.k))
    }
}

/// J_Q = ⌈log(P^{k/2}/Q)/log 2⌉ and the J_Q + 1 shells indexed 0..=J_Q.
pub fn dyadic_cover(q: f64, p: f64, k: u32) -> Result<DyadicCover> {
    ArcDissection::new(k, p, q)?;
    let top = p.powf(k as f64 / 2.0);
    let j_q = ((top / q).ln() / 2f64.ln()).ceil().max(0.0) as u32;
    let levels = (0..=j_q).map(|j| top / 2f64.powi(j as i32)).collect();
    Ok(DyadicCover { k, p, j_q, levels })
}

/// Υ(α) = q^{−2}(1 + P^k|α − a/q|)^{−1} on 𝔐(½P^{k/2}, P), 0 elsewhere.
pub fn upsilon(alpha: f64, p: f64, k: u32) -> f64 {
    let qbig = 0.5 * p.powf(k as f64 / 2.0);
    match major_arc_of(alpha, qbig, p, k) {
        Some(ra) => {
            let qf = ra.q as f64;
            1.0 / (qf * qf * (1.0 + p.powi(k as i32) * ra.err / qf))
        }
        None => 0.0,
    }
}

/// ∫ Υ(α)^r dα over 𝔐(Q₁,P) ∖ 𝔐(Q₀,P), in closed form (disjoint regime, r > 1).
pub fn upsilon_moment(r: f64, q0: f64, q1: f64, p: f64, k: u32) -> Result<f64> {
    let d = ArcDissection::new(k, p, q1)?;
    if !d.is_disjoint() || !(r > 1.0) || q0 > q1 || q0 < 0.0 {
        return Err(Error::Domain("upsilon_moment needs r > 1, 0 <= Q0 <= Q1 <= P^(k/2)/2".into()));
    }
    let pk = p.powi(k as i32);
    // ∫_{|β| ≤ X/P^k} (1 + P^k|β|)^{−r} dβ = 2P^{−k}(1 − (1+X)^{1−r})/(r−1).
    let body = |x: f64| 2.0 / pk * (1.0 - (1.0 + x).powf(1.0 - r)) / (r - 1.0);
    Ok((1..=q1.floor() as u64)
        .map(|q| {
            let qf = q as f64;
            let outer = body(q1 / qf);
            let inner = if qf <= q0 { body(q0 / qf) } else { 0.0 };
            euler_phi(q) as f64 * qf.powf(-2.0 * r) * (outer - inner)
        })
        .sum())
}
