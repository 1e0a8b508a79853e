//! Even moments by orthogonality, grid quadrature of |g|^t over arc sets,
//! and log-log slope probes against the predicted mean-value exponents.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arcs::{major_arc_of, ArcDissection};
use crate::constants::{delta_2s, delta_star, ExponentModel};
use crate::error::{check_cells, Error, Result};
use crate::expsum::{unit, FrequencyTable, Variant, WeylSumSpec};
use crate::numtheory::{linear_fit, pairwise_sum};

/// Above this many frequency cells, convolution switches from dense FFT to
/// sorted merging.
pub const DENSE_LIMIT: u128 = 1 << 26;

/// Coefficients c_n of Σ c_n e(nα), kept sorted by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    entries: Vec<(u128, f64)>,
}

impl CoefficientVector {
    pub fn from_table(table: &FrequencyTable) -> Self {
        Self {
            entries: table
                .frequencies()
                .iter()
                .copied()
                .zip(table.weights().iter().copied())
                .collect(),
        }
    }

    /// From (frequency, coefficient) pairs; repeated frequencies are merged.
    pub fn from_pairs(mut pairs: Vec<(u128, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        Self { entries: merge_sorted(pairs) }
    }

    pub fn entries(&self) -> &[(u128, f64)] {
        &self.entries
    }

    pub fn max_frequency(&self) -> u128 {
        self.entries.last().map(|e| e.0).unwrap_or(0)
    }

    /// Σ c_n², which equals ∫₀¹|Σ c_n e(nα)|² dα.
    pub fn self_correlation(&self) -> f64 {
        let sq: Vec<f64> = self.entries.iter().map(|e| e.1 * e.1).collect();
        pairwise_sum(&sq)
    }

    pub fn convolve(&self, other: &Self) -> Result<Self> {
        let span = self.max_frequency() + other.max_frequency() + 1;
        if span <= DENSE_LIMIT {
            let a = self.dense(span as usize);
            let b = other.dense(span as usize);
            Ok(Self::from_dense(&fft_product(&[&a, &b], span as usize)?))
        } else {
            self.convolve_sparse(other)
        }
    }

    /// The w-fold self-convolution c^{*w}.
    pub fn power(&self, w: u32) -> Result<Self> {
        if w == 0 {
            return Ok(Self { entries: vec![(0, 1.0)] });
        }
        let span = self
            .max_frequency()
            .checked_mul(w as u128)
            .ok_or(Error::Budget { what: "w * max frequency", needed: u128::MAX, limit: u128::MAX })?
            + 1;
        if span <= DENSE_LIMIT {
            let a = self.dense(span as usize);
            let parts: Vec<&[f64]> = std::iter::repeat_n(a.as_slice(), w as usize).collect();
            Ok(Self::from_dense(&fft_product(&parts, span as usize)?))
        } else {
            let mut acc = self.clone();
            for _ in 1..w {
                acc = acc.convolve_sparse(self)?;
            }
            Ok(acc)
        }
    }

    fn dense(&self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        for &(f, c) in &self.entries {
            v[f as usize] += c;
        }
        v
    }

    fn from_dense(v: &[f64]) -> Self {
        let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        // FFT round-off leaves ~1e-16·peak noise where the exact value is 0.
        let floor = peak * 1e-12;
        Self {
            entries: v
                .iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > floor)
                .map(|(i, &c)| (i as u128, c))
                .collect(),
        }
    }

    fn convolve_sparse(&self, other: &Self) -> Result<Self> {
        let needed = self.entries.len() as u128 * other.entries.len() as u128;
        check_cells("sparse convolution pairs", 2 * needed)?;
        let mut pairs: Vec<(u128, f64)> = Vec::with_capacity(needed as usize);
        for &(fa, ca) in &self.entries {
            for &(fb, cb) in &other.entries {
                pairs.push((fa + fb, ca * cb));
            }
        }
        // Stable sort keeps the accumulation order independent of scheduling.
        pairs.sort_by_key(|p| p.0);
        Ok(Self { entries: merge_sorted(pairs) })
    }
}

fn merge_sorted(pairs: Vec<(u128, f64)>) -> Vec<(u128, f64)> {
    let mut out: Vec<(u128, f64)> = Vec::with_capacity(pairs.len());
    for (f, c) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == f => last.1 += c,
            _ => out.push((f, c)),
        }
    }
    out
}

/// Linear convolution of all `parts`, truncated to `len` entries.
fn fft_product(parts: &[&[f64]], len: usize) -> Result<Vec<f64>> {
    let n = len.next_power_of_two().max(2);
    check_cells("dense convolution", 2 * n as u128)?;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut acc: Option<Vec<Complex64>> = None;
    let mut last: Option<(*const f64, Vec<Complex64>)> = None;
    for part in parts {
        // Repeated operands (the w-fold power) reuse one transform.
        let spec = match &last {
            Some((ptr, s)) if *ptr == part.as_ptr() => s.clone(),
            _ => {
                let mut buf: Vec<Complex64> = part.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                buf.resize(n, Complex64::new(0.0, 0.0));
                fwd.process(&mut buf);
                last = Some((part.as_ptr(), buf.clone()));
                buf
            }
        };
        acc = Some(match acc {
            None => spec,
            Some(mut a) => {
                a.iter_mut().zip(&spec).for_each(|(x, y)| *x *= y);
                a
            }
        });
    }
    let mut a = acc.unwrap_or_else(|| {
        let mut one = vec![Complex64::new(0.0, 0.0); n];
        one[0] = Complex64::new(1.0, 0.0);
        one
    });
    inv.process(&mut a);
    Ok(a.iter().take(len).map(|z| z.re / n as f64).collect())
}

/// ∫₀¹ |Σ c_n e(nα)|^{2w} dα = Σ_n ((c^{*w})_n)².
pub fn exact_even_moment(table: &FrequencyTable, w: u32) -> Result<f64> {
    if w == 0 {
        return Err(Error::Domain("exact_even_moment needs w >= 1".into()));
    }
    Ok(CoefficientVector::from_table(table).power(w)?.self_correlation())
}

/// Region of integration on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArcSet {
    Full,
    /// 𝔐(Q,P).
    Major { q: f64 },
    /// 𝔑(Q,P) = 𝔐(Q,P) ∖ 𝔐(Q/2,P).
    Truncated { q: f64 },
    /// 𝔪(Q) = [0,1) ∖ 𝔐(Q,P).
    Minor { q: f64 },
    /// 𝔐(Q₁,P) ∖ 𝔐(Q₀,P).
    Annulus { q0: f64, q1: f64 },
}

impl ArcSet {
    pub fn contains(&self, alpha: f64, p: f64, k: u32) -> bool {
        let major = |q: f64| major_arc_of(alpha, q, p, k).is_some();
        match *self {
            Self::Full => true,
            Self::Major { q } => major(q),
            Self::Truncated { q } => major(q) && !major(q / 2.0),
            Self::Minor { q } => !major(q),
            Self::Annulus { q0, q1 } => major(q1) && !major(q0),
        }
    }

    /// Narrowest arc width 2P^{−k}; `None` for the full interval.
    fn narrowest_width(&self, p: f64, k: u32) -> Option<f64> {
        match self {
            Self::Full => None,
            _ => Some(2.0 * p.powi(-(k as i32))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadMoment {
    pub value: f64,
    pub grid_points: usize,
    pub warnings: Vec<String>,
}

/// Values of Σ c_n e(nα) at the midpoints α_j = (j + ½)/G.
pub fn grid_values(table: &FrequencyTable, grid_points: usize) -> Result<Vec<Complex64>> {
    check_cells("quadrature grid", 2 * grid_points as u128)?;
    let g = grid_points as u128;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_points];
    for (&f, &w) in table.frequencies().iter().zip(table.weights()) {
        // e(n(j+½)/G) = e(n/2G)·e(nj/G); fold n mod G, keep the half-shift phase exact.
        let shift = (f % (2 * g)) as f64 / (2 * g) as f64;
        buf[(f % g) as usize] += unit(shift) * w;
    }
    FftPlanner::new().plan_fft_inverse(grid_points).process(&mut buf);
    Ok(buf)
}

const CHUNK: usize = 1 << 12;

/// Midpoint rule for ∫_{arcs} |Σ c_n e(nα)|^t dα on a G-point grid.
///
/// Chunks are reduced in a fixed pairwise order, so the result does not
/// depend on how rayon schedules them.
pub fn quad_moment_table(
    table: &FrequencyTable,
    t: f64,
    arcs: ArcSet,
    p: f64,
    k: u32,
    grid_points: usize,
) -> Result<QuadMoment> {
    if !(t >= 2.0) {
        return Err(Error::Domain(format!("quad_moment needs t >= 2, got {t}")));
    }
    if grid_points < 1 << 10 {
        return Err(Error::Domain(format!("quad_moment needs at least 2^10 grid points, got {grid_points}")));
    }
    let mut warnings = Vec::new();
    if let Some(width) = arcs.narrowest_width(p, k) {
        if 1.0 / grid_points as f64 > width {
            warnings.push(format!(
                "grid spacing {:.3e} exceeds narrowest arc width {width:.3e}",
                1.0 / grid_points as f64
            ));
        }
    }
    let values = grid_values(table, grid_points)?;
    let inv_g = 1.0 / grid_points as f64;
    let chunk_sums: Vec<f64> = values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let terms: Vec<f64> = chunk
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let alpha = ((c * CHUNK + i) as f64 + 0.5) * inv_g;
                    if arcs.contains(alpha, p, k) {
                        z.norm().powf(t)
                    } else {
                        0.0
                    }
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(QuadMoment {
        value: pairwise_sum(&chunk_sums) * inv_g,
        grid_points,
        warnings,
    })
}

/// [`quad_moment_table`] for the sum described by `spec`.
pub fn quad_moment(spec: &WeylSumSpec, t: f64, arcs: ArcSet, grid_points: usize) -> Result<QuadMoment> {
    let table = FrequencyTable::from_spec(spec)?;
    quad_moment_table(&table, t, arcs, spec.p, spec.k, grid_points)
}

/// Smallest power-of-two grid resolving every frequency difference.
pub fn default_grid(table: &FrequencyTable) -> usize {
    let need = (4 * table.max_frequency()).max(1 << 10);
    (need as usize).next_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// ∫₀¹ |g_s|^t.
    Full,
    /// ∫_{𝔐(Q)} |g_s|^t ≪ P^{tk/s−k+ε} Q^{2Δ_t/k}.
    Major,
    /// ∫_{𝔑(Q)} |g_s|^t ≪ P^{tk/s−k+ε} Q^{2Δ*_t/k}.
    Truncated,
    /// ∫_{𝔪(Q)} |g_s|^t ≪ P^{tk/s−k} Q^{−ν̃}.
    Minor,
    /// ∫_{𝔐(P^θ₁)∖𝔐(Q)} |g_s|^t ≪ P^{tk/s−k} Q^{−1/53k}.
    Pruning,
}

/// Q = c·P^θ; the pruning probe's outer radius is P^{θ_outer}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QRule {
    pub c: f64,
    pub theta: f64,
    #[serde(default)]
    pub theta_outer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    pub p: f64,
    pub q: f64,
    pub moment: f64,
}

/// Diagnostic only: implicit constants and ε are unknown, so no pass/fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub kind: ProbeKind,
    pub k: u32,
    pub s: u32,
    pub t: f64,
    pub points: Vec<ProbePoint>,
    /// Least-squares slope of log(moment) against log P.
    pub slope: f64,
    /// Exponent of P predicted by the bound with Q = cP^θ and ε = 0.
    pub predicted: f64,
    pub difference: f64,
}

/// Fits log(moment) against log P for g_s(α, P, P) over `p_values`.
pub fn bound_probe(
    kind: ProbeKind,
    model: &ExponentModel,
    s: u32,
    t: f64,
    p_values: &[f64],
    rule: QRule,
) -> Result<SlopeReport> {
    let k = model.k;
    if p_values.len() < 2 {
        return Err(Error::Domain("bound_probe needs at least two values of P".into()));
    }
    let (kf, sf) = (k as f64, s as f64);
    let base = t * kf / sf - kf;
    let delta_t = delta_2s(model, t / 2.0)?;
    let delta_star_t = delta_star(model, s as u64, t)?;
    let predicted = match kind {
        ProbeKind::Full => base + delta_t,
        ProbeKind::Major => base + rule.theta * 2.0 * delta_t / kf,
        ProbeKind::Truncated => base + rule.theta * 2.0 * delta_star_t / kf,
        ProbeKind::Minor => {
            let nu = if delta_star_t < 0.0 {
                (2.0 * delta_star_t.abs() / kf).min(1.0 / (53.0 * kf))
            } else {
                -2.0 * delta_star_t / kf
            };
            base - rule.theta * nu
        }
        ProbeKind::Pruning => base - rule.theta / (53.0 * kf),
    };

    let mut points = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let top = p.powf(kf / 2.0);
        let q = (rule.c * p.powf(rule.theta)).clamp(1.0, top);
        let arcs = match kind {
            ProbeKind::Full => ArcSet::Full,
            ProbeKind::Major => ArcSet::Major { q },
            ProbeKind::Truncated => ArcSet::Truncated { q },
            ProbeKind::Minor => ArcSet::Minor { q },
            ProbeKind::Pruning => {
                let outer = p.powf(rule.theta_outer.unwrap_or(kf / 2.0)).clamp(q, top);
                ArcSet::Annulus { q0: q, q1: outer }
            }
        };
        if kind != ProbeKind::Full {
            ArcDissection::new(k, p, q)?;
        }
        let spec = WeylSumSpec { k, s, p, r: p, variant: Variant::Dyadic };
        let table = FrequencyTable::from_spec(&spec)?;
        let grid = default_grid(&table);
        let moment = quad_moment_table(&table, t, arcs, p, k, grid)?.value;
        points.push(ProbePoint { p, q, moment });
    }
    let usable: Vec<&ProbePoint> = points.iter().filter(|pt| pt.moment > 0.0).collect();
    let slope = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|pt| pt.p.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|pt| pt.moment.ln()).collect();
        linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    Ok(SlopeReport {
        kind,
        k,
        s,
        t,
        points,
        slope,
        predicted,
        difference: slope - predicted,
    })
}
