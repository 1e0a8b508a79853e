//! Admissible exponents, the thresholds τ(k) and G₀(k), structural
//! constants, and the explicit large-k inequality ledger.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constant D used throughout the large-k ledger.
pub const LEDGER_D: f64 = 9.027901;

/// Additive constant in the threshold bound k(log k + C₁ + ...).
pub const C1_BOUND_SHIFT: f64 = 4.20032;

const H_TABLE: [(u32, u32); 7] = [
    (14, 89),
    (15, 97),
    (16, 105),
    (17, 113),
    (18, 121),
    (19, 129),
    (20, 137),
];

/// (k, w, Δ_{w−1}) rows of the stored exponent table for 14 ≤ k ≤ 20.
pub const DELTA_W_TABLE: [(u32, u32, f64); 7] = [
    (14, 75, 0.1281620),
    (15, 81, 0.1355287),
    (16, 87, 0.1426626),
    (17, 95, 0.1318848),
    (18, 101, 0.1390360),
    (19, 109, 0.1306147),
    (20, 117, 0.1238487),
];

/// Principal branch of the Lambert W function.
///
/// Halley iteration kept inside a sign bracket; any step that leaves the
/// bracket is replaced by bisection.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch - 4.0 * f64::EPSILON {
        return Err(Error::Domain(format!("lambert_w0 needs x >= -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= branch {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let (mut lo, mut hi) = if x < 0.0 {
        (-1.0, 0.0)
    } else if x <= E {
        (0.0, 1.0)
    } else {
        let l = x.ln();
        (l - l.ln(), l)
    };

    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let w = x.ln_1p();
        w * (1.0 - w.ln_1p() / (2.0 + w))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    w = w.clamp(lo, hi);

    for _ in 0..200 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            return Ok(w);
        }
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let mut next = w - f / denom;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        w = next;
    }
    Err(Error::Numeric(format!("lambert_w0 did not converge at x = {x}")))
}

/// How Δ_{2v} is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentMode {
    Transcendental,
    TranscendentalWithZeroTail,
    UserTable,
}

/// k-indexed table of admissible exponents Δ_{2v}.
///
/// In `UserTable` mode the entries of `table` (keyed by v) override the
/// transcendental values; every other v falls back to the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentModel {
    pub k: u32,
    pub mode: ExponentMode,
    #[serde(default)]
    pub table: BTreeMap<u64, f64>,
}

impl ExponentModel {
    pub fn transcendental(k: u32) -> Self {
        Self {
            k,
            mode: ExponentMode::Transcendental,
            table: BTreeMap::new(),
        }
    }

    pub fn zero_tail(k: u32) -> Self {
        Self {
            k,
            mode: ExponentMode::TranscendentalWithZeroTail,
            table: BTreeMap::new(),
        }
    }

    pub fn user_table(k: u32, table: BTreeMap<u64, f64>) -> Self {
        Self {
            k,
            mode: ExponentMode::UserTable,
            table,
        }
    }

    /// The k = 2 model with Δ₈ = 0.
    pub fn k2_delta8_zero() -> Self {
        Self::user_table(2, BTreeMap::from([(4, 0.0)]))
    }

    /// The k = 3 model with Δ₁₂ = 0 (H(3) = 13).
    pub fn k3_delta12_zero() -> Self {
        Self::user_table(3, BTreeMap::from([(6, 0.0)]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Domain(format!("k must be >= 2, got {}", self.k)));
        }
        if let Some((v, d)) = self.table.iter().find(|(_, d)| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::Domain(format!("table entry Δ_{} = {d} is not a finite non-negative real", 2 * v)));
        }
        Ok(())
    }

    /// First v at which the zero tail takes effect.
    pub fn zero_tail_start(&self) -> u64 {
        let k = self.k as u64;
        k * k + k - 2
    }
}

/// Δ_{2s} under `model`; `s` may be fractional (Δ_t for odd t is Δ_{2·(t/2)}).
pub fn delta_2s(model: &ExponentModel, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("delta_2s needs s >= 0, got {s}")));
    }
    let integral = s.fract() == 0.0;
    match model.mode {
        ExponentMode::Transcendental => {}
        ExponentMode::TranscendentalWithZeroTail => {
            if integral && s >= model.zero_tail_start() as f64 {
                return Ok(0.0);
            }
        }
        ExponentMode::UserTable => {
            if integral {
                if let Some(d) = model.table.get(&(s as u64)) {
                    return Ok(*d);
                }
            }
        }
    }
    let k = model.k as f64;
    Ok(k * lambert_w0((1.0 - 2.0 * s / k).exp())?)
}

/// Δ_{2v} for integer v, with Δ₀ = k.
fn delta_v(model: &ExponentModel, v: u64) -> Result<f64> {
    delta_2s(model, v as f64)
}

/// τ(k) = max_w (k − 2Δ_{2w}) / (4w²), with the maximising w.
pub fn tau(model: &ExponentModel) -> Result<(f64, u64)> {
    model.validate()?;
    let k = model.k as f64;
    let cap = (k * (k.ln() + 10.0)).ceil() as u64;
    let mut best = (f64::NEG_INFINITY, 0);
    for w in 1..=cap {
        let wf = w as f64;
        let term = (k - 2.0 * delta_v(model, w)?) / (4.0 * wf * wf);
        if term > best.0 {
            best = (term, w);
        }
    }
    // Beyond the cap every term is below k/(4w²), which must not reach the incumbent.
    let tail = k / (4.0 * (cap as f64 + 1.0).powi(2));
    if tail >= best.0 {
        return Err(Error::Numeric(format!(
            "tau search cap {cap} too small for k = {}: tail bound {tail} >= max {}",
            model.k, best.0
        )));
    }
    Ok(best)
}

/// G₀(k) = min_{v ≥ 1} (2v + Δ_{2v}/τ(k)), with the minimising v.
pub fn g0_with_argmin(model: &ExponentModel) -> Result<(f64, u64)> {
    let (t, _) = tau(model)?;
    let mut best = (f64::INFINITY, 0);
    let mut v = 1u64;
    // Δ ≥ 0, so once 2v alone exceeds the incumbent nothing later can win.
    while (2 * v) as f64 <= best.0 {
        let value = 2.0 * v as f64 + delta_v(model, v)? / t;
        if value < best.0 {
            best = (value, v);
        }
        v += 1;
    }
    Ok(best)
}

pub fn g0(model: &ExponentModel) -> Result<f64> {
    Ok(g0_with_argmin(model)?.0)
}

/// Δ*_t = min_{1 ≤ v ≤ t/2} max(Δ_{2v} − (t−2v)τ, Δ_{2v} − (t−2v)k/s).
pub fn delta_star(model: &ExponentModel, s: u64, t: f64) -> Result<f64> {
    let (tau_k, _) = tau(model)?;
    delta_star_with_tau(model, tau_k, s, t)
}

pub fn delta_star_with_tau(model: &ExponentModel, tau_k: f64, s: u64, t: f64) -> Result<f64> {
    if !(t >= 2.0) || s == 0 {
        return Err(Error::Domain(format!("delta_star needs t >= 2 and s >= 1, got s = {s}, t = {t}")));
    }
    let ks = model.k as f64 / s as f64;
    let mut best = f64::INFINITY;
    for v in 1..=(t / 2.0).floor() as u64 {
        let d = delta_v(model, v)?;
        let gap = t - 2.0 * v as f64;
        best = best.min((d - gap * tau_k).max(d - gap * ks));
    }
    Ok(best)
}

/// (ω, C₁, C₂) with ω the root of ω − 2 − 1/ω = log ω on [1, 10].
pub fn omega_c1_c2() -> (f64, f64, f64) {
    let f = |w: f64| w - 2.0 - 1.0 / w - w.ln();
    let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let c1 = 2.0 + (w * w - 3.0 - 2.0 / w).ln();
    let c2 = (w * w + 3.0 * w - 2.0) / (w * w - w - 2.0);
    (w, c1, c2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TdParams {
    pub t_d: f64,
    pub c_k: f64,
    /// (T₀, s_{T₀}) for every positive integer T₀ ≤ T_d.
    pub s_t0: Vec<(u64, i64)>,
}

/// T_d(k), c_k and the even indices s_{T₀} = 2⌊(s−d−T₀)/2⌋.
pub fn td_params(k: u32, s: u64, d: u64, dd: f64) -> Result<TdParams> {
    if k == 0 || s == 0 || d == 0 || !(dd > 0.0) {
        return Err(Error::Domain("td_params needs k, s, d >= 1 and D > 0".into()));
    }
    let (kf, sf, df) = (k as f64, s as f64, d as f64);
    let c_k = 39.0 * df / 40.0 * (1.0 - (df + 1.0) * sf / (kf * kf) - df / kf) * sf
        / (2.0 * sf / dd + df * kf);
    if !(c_k > 0.0) {
        return Err(Error::Hypothesis(format!("c_k = {c_k} is not positive")));
    }
    let t_d = sf.powi(3) * df / (2.0 * c_k * kf.powi(3));
    let s_t0 = (1..=t_d.floor() as u64)
        .map(|t0| {
            let rest = s as i64 - d as i64 - t0 as i64;
            (t0, 2 * rest.div_euclid(2))
        })
        .collect();
    Ok(TdParams { t_d, c_k, s_t0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuConstants {
    pub delta_star_s: f64,
    pub nu: f64,
    pub tau0: f64,
    pub nu0: f64,
    /// τ_{d₀} for 1 ≤ d₀ ≤ s − 1.
    pub tau_d0: Vec<f64>,
}

/// τ_{d₀} = (1/2k)|δ_{d₀} − d₀k/s| / (s − d₀), δ_{d₀} = Δ_{2⌊(s−d₀)/2⌋}.
pub fn tau_d0(model: &ExponentModel, s: u64, d0: u64) -> Result<f64> {
    if d0 == 0 || d0 >= s {
        return Err(Error::Domain(format!("tau_d0 needs 1 <= d0 < s, got d0 = {d0}, s = {s}")));
    }
    let k = model.k as f64;
    let delta = delta_v(model, (s - d0) / 2)?;
    Ok((delta - d0 as f64 * k / s as f64).abs() / (2.0 * k * (s - d0) as f64))
}

/// ν, τ₀, ν₀ and the τ_{d₀}; only defined when Δ*_s < 0.
pub fn nu_constants(model: &ExponentModel, s: u64) -> Result<NuConstants> {
    if s < 2 {
        return Err(Error::Domain(format!("nu_constants needs s >= 2, got {s}")));
    }
    let ds = delta_star(model, s, s as f64)?;
    if !(ds < 0.0) {
        return Err(Error::Hypothesis(format!(
            "Δ*_s = {ds} is not negative for k = {}, s = {s}",
            model.k
        )));
    }
    let (k, sf) = (model.k as f64, s as f64);
    let nu = (ds.abs() / (2.0 * sf * k)).min(1.0 / (107.0 * sf * k));
    let tau_d0 = (1..s).map(|d0| tau_d0(model, s, d0)).collect::<Result<Vec<_>>>()?;
    let min_tau_d0 = tau_d0.iter().copied().fold(f64::INFINITY, f64::min);
    let tau0 = (nu / 16.0).min(sf * min_tau_d0 / 2.0).min(k / (8.0 * sf * sf));
    Ok(NuConstants {
        delta_star_s: ds,
        nu,
        tau0,
        nu0: 2.0 * tau0 / sf,
        tau_d0,
    })
}

/// H(k) for 14 ≤ k ≤ 20.
pub fn h_table(k: u32) -> Result<u32> {
    H_TABLE
        .iter()
        .find(|(kk, _)| *kk == k)
        .map(|(_, h)| *h)
        .ok_or_else(|| Error::Domain(format!("H(k) is tabulated only for 14 <= k <= 20, got {k}")))
}

/// One explicit inequality of the ledger together with the range on which
/// it is claimed.
#[derive(Debug, Clone, Copy)]
pub struct LedgerInequality {
    pub name: &'static str,
    pub k_min: u64,
    pub k_max: u64,
    /// `false` for the two statements claimed to fail throughout the range.
    pub expected: bool,
    eval: fn(f64) -> bool,
}

impl LedgerInequality {
    pub fn holds_at(&self, k: u64) -> bool {
        (self.eval)(k as f64)
    }

    pub fn applies_to(&self, k: u64) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    /// `true` when the inequality takes its expected truth value at k.
    pub fn passes_at(&self, k: u64) -> bool {
        self.holds_at(k) == self.expected
    }
}

const K_CAP: u64 = 1_000_000;

fn lkd(k: f64) -> f64 {
    (k * LEDGER_D).ln()
}

/// The explicit inequalities; unbounded ranges are capped at k = 10⁶.
pub fn ledger_inequalities() -> Vec<LedgerInequality> {
    const D: f64 = LEDGER_D;
    vec![
        LedgerInequality {
            name: "2k(log kD+1)(1-1/(Dk))-2k-1/2 > k(log kD+2)+1",
            k_min: 100,
            k_max: K_CAP,
            expected: true,
            eval: |k| 2.0 * k * (lkd(k) + 1.0) * (1.0 - 1.0 / (D * k)) - 2.0 * k - 0.5 > k * (lkd(k) + 2.0) + 1.0,
        },
        LedgerInequality {
            name: "log kD+2 <= D(k-5)/4",
            k_min: 100,
            k_max: K_CAP,
            expected: true,
            eval: |k| lkd(k) + 2.0 <= D * (k - 5.0) / 4.0,
        },
        LedgerInequality {
            name: "k(log kD+1) < Dk e^{-2/k}",
            k_min: 21,
            k_max: 300,
            expected: true,
            eval: |k| k * (lkd(k) + 1.0) < D * k * (-2.0 / k).exp(),
        },
        LedgerInequality {
            name: "1600(log 2kD+1+2/k)^2(log 2kD+1+D/2+2/k) <= 1053Dk",
            k_min: 200,
            k_max: K_CAP,
            expected: true,
            eval: |k| {
                let l = (2.0 * k * D).ln() + 1.0 + 2.0 / k;
                1600.0 * l * l * (l + D / 2.0) <= 1053.0 * D * k
            },
        },
        LedgerInequality {
            name: "1/200+2log(2ekD)/k+1/10000 <= 0.098",
            k_min: 200,
            k_max: K_CAP,
            expected: true,
            eval: |k| 1.0 / 200.0 + 2.0 * (2.0 * E * k * D).ln() / k + 1.0 / 10000.0 <= 0.098,
        },
        LedgerInequality {
            name: "(log kD+2)^2(1.5(log kD+2)+D/8) <= 58383Dk/80000",
            k_min: 100_000,
            k_max: K_CAP,
            expected: true,
            eval: |k| {
                let l = lkd(k) + 2.0;
                l * l * (1.5 * l + D / 8.0) <= 58383.0 * D * k / 80000.0
            },
        },
        LedgerInequality {
            name: "64(log kD+2)^3 <= Dk",
            k_min: 100_000,
            k_max: K_CAP,
            expected: true,
            eval: |k| 64.0 * (lkd(k) + 2.0).powi(3) <= D * k,
        },
        LedgerInequality {
            name: "2D(log kD+7/8) <= (log kD+2)^2 fails",
            k_min: 1,
            k_max: 99_999,
            expected: false,
            eval: |k| 2.0 * D * (lkd(k) + 7.0 / 8.0) <= (lkd(k) + 2.0).powi(2),
        },
        LedgerInequality {
            name: "D(1-1/(4(log kD+1))) <= log kD+1+3/k fails",
            k_min: 1,
            k_max: 249,
            expected: false,
            eval: |k| D * (1.0 - 1.0 / (4.0 * (lkd(k) + 1.0))) <= lkd(k) + 1.0 + 3.0 / k,
        },
        LedgerInequality {
            name: "k/(log kD+1+3/k) >= 27",
            k_min: 250,
            k_max: K_CAP,
            expected: true,
            eval: |k| k / (lkd(k) + 1.0 + 3.0 / k) >= 27.0,
        },
        LedgerInequality {
            name: "(log kD+2)/D+9/4 <= k/4",
            k_min: 100_000,
            k_max: K_CAP,
            expected: true,
            eval: |k| (lkd(k) + 2.0) / D + 2.25 <= k / 4.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerCheck {
    pub name: String,
    pub k_min: u64,
    pub k_max: u64,
    pub expected: bool,
    pub pass: bool,
    pub first_failure: Option<u64>,
}

/// Evaluates every ledger inequality over its full stated range and the
/// stored-table condition s·Δ_{w−1} < k for 14 ≤ k ≤ 20.
pub fn ledger_checks() -> Vec<LedgerCheck> {
    let mut out: Vec<LedgerCheck> = ledger_inequalities()
        .iter()
        .map(|ineq| {
            let first_failure = (ineq.k_min..=ineq.k_max).find(|&k| !ineq.passes_at(k));
            LedgerCheck {
                name: ineq.name.to_string(),
                k_min: ineq.k_min,
                k_max: ineq.k_max,
                expected: ineq.expected,
                pass: first_failure.is_none(),
                first_failure,
            }
        })
        .collect();
    let table_failure = DELTA_W_TABLE
        .iter()
        .find(|(k, w, _)| !delta_w_table_holds(*k, *w))
        .map(|(k, _, _)| *k as u64);
    out.push(LedgerCheck {
        name: "s*Delta_{w-1} < k for w <= s <= floor(k(log k+4.20032))".into(),
        k_min: 14,
        k_max: 20,
        expected: true,
        pass: table_failure.is_none(),
        first_failure: table_failure,
    });
    out
}

/// Upper end ⌊k(log k + 4.20032)⌋ of the threshold window.
pub fn c1_bound(k: u32) -> f64 {
    let kf = k as f64;
    kf * (kf.ln() + C1_BOUND_SHIFT)
}

fn delta_w_table_holds(k: u32, w: u32) -> bool {
    let delta = DELTA_W_TABLE.iter().find(|r| r.0 == k).map(|r| r.2).unwrap_or(f64::NAN);
    let top = c1_bound(k).floor() as u64;
    // s·Δ is increasing in s, so the top of the window is the binding case;
    // scanning all s keeps the check literal.
    (w as u64..=top).all(|s| (s as f64) * delta < k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub k: u32,
    pub tau: f64,
    pub tau_argmax_w: u64,
    pub g0: f64,
    pub s_min: u64,
    pub c1_bound: f64,
    /// (label, pass) for every check that applies at this k.
    pub checks: Vec<(String, bool)>,
}

/// Per-k thresholds under the transcendental model with every applicable
/// ledger flag.
pub fn threshold_report(k: u32) -> Result<ThresholdReport> {
    let model = ExponentModel::transcendental(k);
    let (t, w) = tau(&model)?;
    let g = g0(&model)?;
    let kf = k as f64;
    let mut checks = vec![("tau <= 1/(4k)".to_string(), t <= 1.0 / (4.0 * kf))];
    if (21..=200).contains(&k) {
        checks.push(("tau >= 1/(Dk)".into(), t >= 1.0 / (LEDGER_D * kf)));
        checks.push(("g0 <= k(log k+4.20032)".into(), g <= c1_bound(k)));
    }
    if let Some((_, w, _)) = DELTA_W_TABLE.iter().find(|r| r.0 == k) {
        checks.push(("s*Delta_{w-1} < k".into(), delta_w_table_holds(k, *w)));
    }
    for ineq in ledger_inequalities() {
        if ineq.applies_to(k as u64) {
            checks.push((ineq.name.to_string(), ineq.passes_at(k as u64)));
        }
    }
    Ok(ThresholdReport {
        k,
        tau: t,
        tau_argmax_w: w,
        g0: g,
        s_min: (g.floor() as u64 + 1).max(4 * k as u64 + 1),
        c1_bound: c1_bound(k),
        checks,
    })
}

/// Threshold reports for every k in the range.
pub fn verify_inequalities(k_range: std::ops::RangeInclusive<u32>) -> Result<Vec<ThresholdReport>> {
    k_range.map(threshold_report).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_w(x: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, x.max(1.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(1.0).unwrap() - bisect_w(1.0)).abs() < 1e-12);
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w0(-0.5).is_err());
        assert_eq!(lambert_w0(-1.0 / E).unwrap(), -1.0);
    }

    #[test]
    fn lambert_residuals_across_scales() {
        for &x in &[-0.367, -0.3, -0.1, 1e-300, 1e-12, 0.3, 2.0, 10.0, 1e5] {
            let w = lambert_w0(x).unwrap();
            let r = w * w.exp() - x;
            assert!(r.abs() <= 1e-14 * x.abs().max(1.0), "x = {x}, residual {r}");
        }
        // For huge x, e^w amplifies the rounding of w; check log w + w = log x instead.
        for &x in &[1e100, 1e300] {
            let w = lambert_w0(x).unwrap();
            assert!((w.ln() + w - x.ln()).abs() <= 1e-14 * x.ln());
        }
    }

    #[test]
    fn delta_examples() {
        let m = ExponentModel::transcendental(20);
        assert!((delta_2s(&m, 0.0).unwrap() - 20.0).abs() < 1e-12);
        let d = delta_2s(&m, 60.0).unwrap();
        let rhs = 20.0 * (-5.0_f64).exp();
        assert!((d * (d / 20.0).exp() - rhs).abs() < 1e-12 * rhs);
        assert!(delta_2s(&m, 3.0).unwrap() > delta_2s(&m, 3.5).unwrap());
    }

    #[test]
    fn zero_tail_and_user_table() {
        let m = ExponentModel::zero_tail(3);
        assert_eq!(delta_2s(&m, 10.0).unwrap(), 0.0);
        assert!(delta_2s(&m, 9.0).unwrap() > 0.0);
        let u = ExponentModel::k2_delta8_zero();
        assert_eq!(delta_2s(&u, 4.0).unwrap(), 0.0);
        assert!(delta_2s(&u, 3.0).unwrap() > 0.0);
    }

    #[test]
    fn tau_k2_matches_direct_scan() {
        let m = ExponentModel::transcendental(2);
        let scan = (1..=100u32)
            .map(|w| {
                let d = 2.0 * bisect_w((1.0 - w as f64).exp());
                (2.0 - 2.0 * d) / (4.0 * (w * w) as f64)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let (t, _) = tau(&m).unwrap();
        assert!((t - scan).abs() < 1e-12, "{t} vs {scan}");
        assert!(t <= 1.0 / 8.0);
    }

    #[test]
    fn omega_constants() {
        let (w, c1, c2) = omega_c1_c2();
        assert!((w - 3.548292).abs() < 1e-6);
        assert!((c1 - 4.200189).abs() < 1e-5);
        assert!((c2 - 3.015478).abs() < 1e-5);
    }

    #[test]
    fn delta_star_k2_s9_negative() {
        let m = ExponentModel::k2_delta8_zero();
        assert!(delta_star(&m, 9, 9.0).unwrap() < 0.0);
        let c = nu_constants(&m, 9).unwrap();
        assert!(c.nu > 0.0 && c.tau0 > 0.0 && c.nu0 > 0.0);
        assert!(c.tau_d0.iter().all(|t| *t > 0.0));
        assert!(c.nu <= 1.0 / (107.0 * 18.0));
    }

    #[test]
    fn nu_rejects_nonnegative_delta_star() {
        let m = ExponentModel::transcendental(2);
        assert!(matches!(nu_constants(&m, 5), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn zero_tail_large_s_negative() {
        let m = ExponentModel::zero_tail(3);
        let s = 2 * 9 + 6 + 3;
        assert!(delta_star(&m, s, s as f64).unwrap() < 0.0);
    }

    #[test]
    fn h_table_lookup() {
        assert_eq!(h_table(14).unwrap(), 89);
        assert_eq!(h_table(20).unwrap(), 137);
        for k in 14..20 {
            assert_eq!(h_table(k + 1).unwrap() - h_table(k).unwrap(), 8);
        }
        assert!(h_table(13).is_err());
    }

    #[test]
    fn td_params_examples() {
        let k = 200u32;
        let s = (200.0 * (200f64.ln() + 3.20032)).floor() as u64;
        let p = td_params(k, s, 1, LEDGER_D).unwrap();
        assert!(p.c_k > 0.0);
        assert!(p.t_d <= 0.75 * k as f64, "T_d = {}", p.t_d);
        for (t0, st) in &p.s_t0 {
            assert_eq!(st % 2, 0);
            assert!(*st >= s as i64 - 1 - *t0 as i64 - 1);
        }
        assert!(matches!(td_params(2, 10, 1, 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn k14_table_row() {
        assert!(c1_bound(14).floor() * 0.1281620 < 14.0);
        let r = threshold_report(14).unwrap();
        assert!(r.checks.iter().all(|(_, ok)| *ok), "{:?}", r.checks);
    }
}
