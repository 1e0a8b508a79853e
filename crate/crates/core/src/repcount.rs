//! Exact representation counting n = a₁x₁^k + … + a_s x_s^k over restricted
//! variable sets, weighted and unweighted.
//!
//! Every count is over *ordered* tuples. The engine keeps, for each multiset
//! of slot types, the distribution of partial sums (dense below the target
//! or sparse when few sums occur), and answers a query at n by splitting
//! the slots in two halves and pairing complementary sums. Distinct-variable
//! counts use Möbius inversion over set partitions of the variables,
//! grouped in closed form by the slot types they merge.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_cells, Error, Result};
use crate::expsum::{p_minus, smooth_weight};
use crate::numtheory::{binomial, checked_power, factorial, iroot, pairwise_sum};
use crate::smooth::{largest_prime_factor_sieve, prime_within};

/// Largest number of variables for which distinctness is handled exactly
/// (Möbius coefficients stay within 128 bits).
pub const MAX_DISTINCT_S: u32 = 20;

/// One admissible value x of a slot: it contributes a·x^k with weight w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotEntry {
    pub x: u64,
    pub value: u64,
    pub weight: f64,
}

/// The admissible contributions of one variable, sorted by value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Slot {
    entries: Vec<SlotEntry>,
}

impl Slot {
    pub fn new(mut entries: Vec<SlotEntry>) -> Self {
        entries.sort_by_key(|e| (e.value, e.x));
        Self { entries }
    }

    /// x ranges over `xs`, contributing a·x^k with weight `weight(x)`; values
    /// above `limit` are dropped.
    pub fn from_xs(xs: impl IntoIterator<Item = u64>, k: u32, a: u64, limit: u64, weight: impl Fn(u64) -> f64) -> Self {
        let entries = xs
            .into_iter()
            .filter_map(|x| {
                let v = checked_power(x, k)?.checked_mul(a as u128)?;
                (v <= limit as u128).then(|| SlotEntry { x, value: v as u64, weight: weight(x) })
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[SlotEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The slot of a block of variables forced equal: x must be admissible in
    /// every member, values add and weights multiply.
    fn merge(parts: &[&Slot]) -> Slot {
        let mut acc: BTreeMap<u64, (u64, f64, usize)> = BTreeMap::new();
        for part in parts {
            for e in &part.entries {
                let slot = acc.entry(e.x).or_insert((0, 1.0, 0));
                slot.0 += e.value;
                slot.1 *= e.weight;
                slot.2 += 1;
            }
        }
        Slot::new(
            acc.into_iter()
                .filter(|(_, (_, _, c))| *c == parts.len())
                .map(|(x, (value, weight, _))| SlotEntry { x, value, weight })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
enum Dist {
    Dense { weights: Vec<f64>, counts: Option<Vec<u128>> },
    /// Sorted by sum.
    Sparse(Vec<(u64, f64, u128)>),
}

impl Dist {
    fn unit() -> Self {
        Dist::Sparse(vec![(0, 1.0, 1)])
    }

    fn len(&self) -> usize {
        match self {
            Dist::Dense { weights, .. } => weights.len(),
            Dist::Sparse(v) => v.len(),
        }
    }

    fn get(&self, m: u64) -> (f64, u128) {
        match self {
            Dist::Dense { weights, counts } => {
                let i = m as usize;
                if i >= weights.len() {
                    return (0.0, 0);
                }
                (weights[i], counts.as_ref().map_or(0, |c| c[i]))
            }
            Dist::Sparse(v) => match v.binary_search_by_key(&m, |e| e.0) {
                Ok(i) => (v[i].1, v[i].2),
                Err(_) => (0.0, 0),
            },
        }
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(u64, f64, u128)) {
        match self {
            Dist::Dense { weights, counts } => {
                for (i, &w) in weights.iter().enumerate() {
                    let c = counts.as_ref().map_or(0, |c| c[i]);
                    if w != 0.0 || c != 0 {
                        f(i as u64, w, c);
                    }
                }
            }
            Dist::Sparse(v) => v.iter().for_each(|&(m, w, c)| f(m, w, c)),
        }
    }

    fn to_dense(&self, limit: u64, counts: bool) -> (Vec<f64>, Option<Vec<u128>>) {
        match self {
            Dist::Dense { weights, counts: c } => (weights.clone(), c.clone()),
            Dist::Sparse(v) => {
                let mut w = vec![0.0; limit as usize + 1];
                let mut c = counts.then(|| vec![0u128; limit as usize + 1]);
                for &(m, wm, cm) in v {
                    w[m as usize] = wm;
                    if let Some(c) = c.as_mut() {
                        c[m as usize] = cm;
                    }
                }
                (w, c)
            }
        }
    }
}

const DENSE_CHUNK: usize = 4096;

/// Partial-sum distributions for multisets of slot types, memoised.
pub struct Engine {
    limit: u64,
    counts: bool,
    slots: Vec<Slot>,
    memo: HashMap<Vec<usize>, Arc<Dist>>,
    merged: HashMap<Vec<usize>, usize>,
}

/// Weighted total and (when tracked) exact number of ordered tuples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub weighted: f64,
    pub count: i128,
}

impl Engine {
    /// Sums above `limit` are never stored. With `counts` off only the
    /// weighted totals are kept.
    pub fn new(limit: u64, counts: bool) -> Result<Self> {
        check_cells("representation engine row", 2 * (limit as u128 + 1))?;
        Ok(Self { limit, counts, slots: Vec::new(), memo: HashMap::new(), merged: HashMap::new() })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn slot(&self, id: usize) -> &Slot {
        &self.slots[id]
    }

    pub fn add_slot(&mut self, slot: Slot) -> usize {
        if let Some(i) = self.slots.iter().position(|s| *s == slot) {
            return i;
        }
        self.slots.push(slot);
        self.slots.len() - 1
    }

    fn merged_slot(&mut self, mut ids: Vec<usize>) -> usize {
        ids.sort_unstable();
        if ids.len() == 1 {
            return ids[0];
        }
        if let Some(&i) = self.merged.get(&ids) {
            return i;
        }
        let parts: Vec<&Slot> = ids.iter().map(|&i| &self.slots[i]).collect();
        let slot = Slot::merge(&parts);
        let i = self.add_slot(slot);
        self.merged.insert(ids, i);
        i
    }

    fn dist(&mut self, ids: &[usize]) -> Result<Arc<Dist>> {
        if ids.is_empty() {
            return Ok(Arc::new(Dist::unit()));
        }
        if let Some(d) = self.memo.get(ids) {
            return Ok(d.clone());
        }
        let parent = self.dist(&ids[..ids.len() - 1])?;
        let slot = &self.slots[ids[ids.len() - 1]];
        let d = Arc::new(fold(&parent, slot, self.limit, self.counts)?);
        self.memo.insert(ids.to_vec(), d.clone());
        Ok(d)
    }

    /// Σ over ordered tuples (one variable per listed slot) summing to n.
    pub fn at(&mut self, ids: &[usize], n: u64) -> Result<Tally> {
        if n > self.limit {
            return Err(Error::Domain(format!("target {n} exceeds engine limit {}", self.limit)));
        }
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let split = ids.len().div_ceil(2);
        let left = self.dist(&ids[..split])?;
        let right = self.dist(&ids[split..])?;
        let (small, large) = if left.len() <= right.len() { (left, right) } else { (right, left) };
        let mut terms = Vec::new();
        let mut count: u128 = 0;
        let mut overflow = false;
        small.for_each_nonzero(|m, w, c| {
            if m > n {
                return;
            }
            let (w2, c2) = large.get(n - m);
            if w2 != 0.0 {
                terms.push(w * w2);
            }
            match c.checked_mul(c2).and_then(|p| count.checked_add(p)) {
                Some(v) => count = v,
                None => overflow = true,
            }
        });
        if overflow || count > i128::MAX as u128 {
            return Err(Error::Budget { what: "tuple count in 128 bits", needed: u128::MAX, limit: i128::MAX as u128 });
        }
        Ok(Tally { weighted: pairwise_sum(&terms), count: count as i128 })
    }

    /// Slot multisets and Möbius coefficients μ(0̂, π) over set partitions π,
    /// grouped by the resulting multiset of merged slots.
    fn mobius_signatures(&mut self, ids: &[usize]) -> Result<Vec<(Vec<usize>, i128)>> {
        let s = ids.len();
        if s as u32 > MAX_DISTINCT_S {
            return Err(Error::Unsupported(format!("distinctness for s = {s} > {MAX_DISTINCT_S}")));
        }
        // Relabel slot ids by first occurrence so equal patterns share a cache entry.
        let mut distinct: Vec<usize> = Vec::new();
        let labels: Vec<usize> = ids
            .iter()
            .map(|id| match distinct.iter().position(|d| d == id) {
                Some(i) => i,
                None => {
                    distinct.push(*id);
                    distinct.len() - 1
                }
            })
            .collect();
        let mut by_signature: BTreeMap<Vec<usize>, i128> = BTreeMap::new();
        for (blocks, mu) in label_signatures(&labels).iter() {
            let mut sig: Vec<usize> = blocks
                .iter()
                .map(|b| self.merged_slot(b.iter().map(|&l| distinct[l]).collect()))
                .collect();
            sig.sort_unstable();
            *by_signature.entry(sig).or_insert(0) += mu;
        }
        Ok(by_signature.into_iter().filter(|(_, mu)| *mu != 0).collect())
    }

    /// Like [`Engine::at`] but over tuples with pairwise distinct x.
    pub fn at_distinct(&mut self, ids: &[usize], n: u64) -> Result<Tally> {
        let mut weighted = Vec::new();
        let mut count: i128 = 0;
        for (sig, mu) in self.mobius_signatures(ids)? {
            let t = self.at(&sig, n)?;
            weighted.push(mu as f64 * t.weighted);
            count += mu * t.count;
        }
        Ok(Tally { weighted: pairwise_sum(&weighted), count })
    }

    /// [`Engine::at`] for every n in [lo, hi].
    pub fn window(&mut self, ids: &[usize], lo: u64, hi: u64) -> Result<Vec<Tally>> {
        if hi > self.limit || lo > hi {
            return Err(Error::Domain(format!("window [{lo}, {hi}] outside engine limit {}", self.limit)));
        }
        check_cells("representation window", 2 * (hi - lo + 1) as u128)?;
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let split = ids.len().div_ceil(2);
        let left = self.dist(&ids[..split])?;
        let right = self.dist(&ids[split..])?;
        let len = (hi - lo + 1) as usize;
        let mut weights = vec![0.0; len];
        let mut counts = vec![0u128; len];
        let mut overflow = false;
        let mut add = |t: u64, w: f64, c: u128| {
            let i = (t - lo) as usize;
            weights[i] += w;
            match counts[i].checked_add(c) {
                Some(v) => counts[i] = v,
                None => overflow = true,
            }
        };
        left.for_each_nonzero(|a, wa, ca| {
            if a > hi {
                return;
            }
            let from = lo.saturating_sub(a);
            let to = hi - a;
            match &*right {
                Dist::Sparse(v) => {
                    let start = v.partition_point(|e| e.0 < from);
                    for &(b, wb, cb) in v[start..].iter().take_while(|e| e.0 <= to) {
                        add(a + b, wa * wb, ca * cb);
                    }
                }
                Dist::Dense { weights: rw, counts: rc } => {
                    let end = (to as usize).min(rw.len().saturating_sub(1));
                    for b in from as usize..=end {
                        let cb = rc.as_ref().map_or(0, |c| c[b]);
                        if rw[b] != 0.0 || cb != 0 {
                            add(a + b as u64, wa * rw[b], ca * cb);
                        }
                    }
                }
            }
        });
        if overflow || counts.iter().any(|&c| c > i128::MAX as u128) {
            return Err(Error::Budget { what: "tuple count in 128 bits", needed: u128::MAX, limit: i128::MAX as u128 });
        }
        Ok(weights
            .into_iter()
            .zip(counts)
            .map(|(weighted, c)| Tally { weighted, count: c as i128 })
            .collect())
    }

    /// [`Engine::at_distinct`] for every n in [lo, hi].
    pub fn window_distinct(&mut self, ids: &[usize], lo: u64, hi: u64) -> Result<Vec<Tally>> {
        let mut out = vec![Tally::default(); (hi - lo + 1) as usize];
        for (sig, mu) in self.mobius_signatures(ids)? {
            for (o, t) in out.iter_mut().zip(self.window(&sig, lo, hi)?) {
                o.weighted += mu as f64 * t.weighted;
                o.count += mu * t.count;
            }
        }
        Ok(out)
    }

    /// Σ over ordered tuples whose coincidence pattern is not the finest
    /// partition (some x_i = x_j), with a tuple's weight taken once per
    /// distinct value. Base entries must carry value x^k.
    pub fn window_repeated(&mut self, base: usize, s: u32, lo: u64, hi: u64) -> Result<Vec<Tally>> {
        self.window_patterns(base, s, lo, hi, false)
    }

    /// Σ over all ordered tuples of the product of weights over the distinct
    /// values occurring (so E[Π t_x] when weights are probabilities).
    pub fn window_all_patterns(&mut self, base: usize, s: u32, lo: u64, hi: u64) -> Result<Vec<Tally>> {
        self.window_patterns(base, s, lo, hi, true)
    }

    fn window_patterns(&mut self, base: usize, s: u32, lo: u64, hi: u64, finest: bool) -> Result<Vec<Tally>> {
        let mut out = vec![Tally::default(); (hi - lo + 1) as usize];
        let base_slot = self.slots[base].clone();
        for shape in integer_partitions(s) {
            if !finest && shape.iter().all(|&b| b == 1) {
                continue;
            }
            // Number of set partitions of [s] with this block-size shape.
            let mut mult = factorial(s as u64);
            for &b in &shape {
                mult /= factorial(b as u64);
            }
            let mut run = 1u128;
            for w in shape.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                    mult /= run;
                } else {
                    run = 1;
                }
            }
            let ids: Vec<usize> = shape
                .iter()
                .map(|&b| {
                    let entries = base_slot
                        .entries
                        .iter()
                        .filter_map(|e| {
                            let v = e.value.checked_mul(b as u64)?;
                            (v <= self.limit).then_some(SlotEntry { x: e.x, value: v, weight: e.weight })
                        })
                        .collect();
                    self.add_slot(Slot::new(entries))
                })
                .collect();
            for (o, t) in out.iter_mut().zip(self.window_distinct(&ids, lo, hi)?) {
                o.weighted += mult as f64 * t.weighted;
                o.count += mult as i128 * t.count;
            }
        }
        Ok(out)
    }
}

/// Partitions of s into positive parts, each sorted in non-increasing order.
pub fn integer_partitions(s: u32) -> Vec<Vec<u32>> {
    fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for b in (1..=rem.min(max)).rev() {
            cur.push(b);
            rec(rem - b, b, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(s, s, &mut Vec::new(), &mut out);
    out
}

fn fold(parent: &Dist, slot: &Slot, limit: u64, counts: bool) -> Result<Dist> {
    let entries = slot.entries();
    let work = parent.len() as u128 * entries.len() as u128;
    let sparse = matches!(parent, Dist::Sparse(_)) && work.saturating_mul(8) < limit as u128 + 1;
    if sparse {
        let Dist::Sparse(v) = parent else { unreachable!() };
        check_cells("sparse partial sums", 3 * work)?;
        let mut out: Vec<(u64, f64, u128)> = Vec::with_capacity(work as usize);
        for &(m, w, c) in v {
            for e in entries {
                let Some(t) = m.checked_add(e.value).filter(|&t| t <= limit) else { break };
                out.push((t, w * e.weight, c));
            }
        }
        out.sort_by_key(|e| e.0);
        let mut merged: Vec<(u64, f64, u128)> = Vec::with_capacity(out.len());
        for (t, w, c) in out {
            match merged.last_mut() {
                Some(last) if last.0 == t => {
                    last.1 += w;
                    last.2 += c;
                }
                _ => merged.push((t, w, c)),
            }
        }
        return Ok(Dist::Sparse(merged));
    }
    check_cells("dense partial sums", (limit as u128 + 1) * if counts { 3 } else { 1 })?;
    let (pw, pc) = parent.to_dense(limit, counts);
    let len = limit as usize + 1;
    let mut weights = vec![0.0; len];
    weights.par_chunks_mut(DENSE_CHUNK).enumerate().for_each(|(ci, chunk)| {
        let base = ci * DENSE_CHUNK;
        for (off, out) in chunk.iter_mut().enumerate() {
            let m = (base + off) as u64;
            let mut acc = 0.0;
            for e in entries {
                if e.value > m {
                    break;
                }
                acc += pw[(m - e.value) as usize] * e.weight;
            }
            *out = acc;
        }
    });
    let counts = pc.map(|pc| {
        let mut c = vec![0u128; len];
        c.par_chunks_mut(DENSE_CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * DENSE_CHUNK;
            for (off, out) in chunk.iter_mut().enumerate() {
                let m = (base + off) as u64;
                let mut acc = 0u128;
                for e in entries {
                    if e.value > m {
                        break;
                    }
                    acc += pc[(m - e.value) as usize];
                }
                *out = acc;
            }
        });
        c
    });
    Ok(Dist::Dense { weights, counts })
}

type LabelSignatures = Arc<Vec<(Vec<Vec<usize>>, i128)>>;

/// Set partitions of a labelled variable list grouped by their multiset of
/// block label-multisets, with summed Möbius coefficients.
///
/// A group is a partition of the label-count vector into block vectors
/// c_b; it contains Π_l n_l! / (Π_b Π_l c_{b,l}! · Π m!) set partitions
/// (m the multiplicities of repeated blocks), each with
/// μ = Π_b (−1)^{|b|−1}(|b|−1)!.
fn label_signatures(labels: &[usize]) -> LabelSignatures {
    static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, LabelSignatures>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("signature cache").get(labels) {
        return v.clone();
    }
    let n_labels = labels.iter().max().map_or(0, |&m| m + 1);
    let mut totals = vec![0u32; n_labels];
    labels.iter().for_each(|&l| totals[l] += 1);
    let numerator: i128 = totals.iter().map(|&n| factorial(n as u64) as i128).product();

    let mut grouped: BTreeMap<Vec<Vec<usize>>, i128> = BTreeMap::new();
    let mut parts: Vec<Vec<u32>> = Vec::new();
    vector_partitions(&mut totals.clone(), None, &mut parts, &mut |blocks| {
        let mut denom: i128 = 1;
        let mut mu: i128 = 1;
        let mut run = 1i128;
        for (i, b) in blocks.iter().enumerate() {
            let size: u32 = b.iter().sum();
            mu *= if size % 2 == 1 { 1 } else { -1 } * factorial(size as u64 - 1) as i128;
            denom *= b.iter().map(|&c| factorial(c as u64) as i128).product::<i128>();
            run = if i > 0 && blocks[i - 1] == *b { run + 1 } else { 1 };
            denom *= run;
        }
        let mut key: Vec<Vec<usize>> = blocks
            .iter()
            .map(|b| b.iter().enumerate().flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize)).collect())
            .collect();
        key.sort();
        *grouped.entry(key).or_insert(0) += numerator / denom * mu;
    });
    let v: LabelSignatures = Arc::new(grouped.into_iter().filter(|(_, mu)| *mu != 0).collect());
    cache.lock().expect("signature cache").insert(labels.to_vec(), v.clone());
    v
}

/// Partitions of the vector `rest` into non-zero parts listed in
/// lexicographically non-increasing order, each bounded by `max`.
fn vector_partitions(rest: &mut Vec<u32>, max: Option<&[u32]>, cur: &mut Vec<Vec<u32>>, f: &mut dyn FnMut(&[Vec<u32>])) {
    if rest.iter().all(|&c| c == 0) {
        f(cur);
        return;
    }
    // Odometer over 0 ≤ v ≤ rest.
    let mut v = vec![0u32; rest.len()];
    loop {
        let mut i = 0;
        while i < v.len() && v[i] == rest[i] {
            v[i] = 0;
            i += 1;
        }
        if i == v.len() {
            break;
        }
        v[i] += 1;
        if max.is_none_or(|m| v.as_slice() <= m) {
            rest.iter_mut().zip(&v).for_each(|(r, c)| *r -= c);
            cur.push(v.clone());
            let top = v.clone();
            vector_partitions(rest, Some(&top), cur, f);
            cur.pop();
            rest.iter_mut().zip(&v).for_each(|(r, c)| *r += c);
        }
    }
}

/// All set partitions of {0, …, s−1}, as lists of blocks.
pub fn set_partitions(s: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; s];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let s = rgs.len();
        if i == s {
            let blocks = if s == 0 { 0 } else { max + 1 };
            let mut parts = vec![Vec::new(); blocks];
            for (j, &b) in rgs.iter().enumerate() {
                parts[b].push(j);
            }
            out.push(parts);
            return;
        }
        let top = if i == 0 { 0 } else { max + 1 };
        for b in 0..=top {
            rgs[i] = b;
            rec(i + 1, max.max(b), rgs, out);
        }
    }
    rec(0, 0, &mut rgs, &mut out);
    out
}

/// Positive function of uniform growth, used for ψ and φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Growth {
    /// c·log x
    Log { c: f64 },
    /// c·(log x)^γ, γ ∈ (0, 1]
    LogPow { c: f64, gamma: f64 },
    /// c·(log x)^{1/2}
    SqrtLog { c: f64 },
}

impl Growth {
    pub fn log() -> Self {
        Growth::Log { c: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Growth::Log { c } | Growth::SqrtLog { c } => c > 0.0,
            Growth::LogPow { c, gamma } => c > 0.0 && gamma > 0.0 && gamma <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid growth function {self:?}")))
        }
    }

    /// Value at x; log is floored at 1 so the function stays positive near x = 1.
    pub fn eval(&self, x: f64) -> f64 {
        let l = x.ln().max(1.0);
        match *self {
            Growth::Log { c } => c * l,
            Growth::LogPow { c, gamma } => c * l.powf(gamma),
            Growth::SqrtLog { c } => c * l.sqrt(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Growth::Log { c } => Growth::Log { c: c * factor },
            Growth::LogPow { c, gamma } => Growth::LogPow { c: c * factor, gamma },
            Growth::SqrtLog { c } => Growth::SqrtLog { c: c * factor },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Smoothness {
    /// x ∈ 𝒜(P, R).
    FixedR { r: f64 },
    /// x ∈ 𝒜(x, x^η).
    SelfSmooth { eta: f64 },
}

/// One representation-count query. P = (2N)^{1/k}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepQuery {
    pub k: u32,
    pub s: u32,
    pub n: u64,
    #[serde(rename = "N")]
    pub big_n: u64,
    pub smoothness: Smoothness,
    /// Strict lower bound on every variable (x > cutoff).
    #[serde(default)]
    pub cutoff: Option<f64>,
    /// Variables x₁, …, x_j additionally satisfy x > P₋.
    #[serde(default)]
    pub j: u32,
    #[serde(default)]
    pub distinct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    /// Σ Π x_i^{−1+k/s}.
    pub weighted: f64,
    pub count: u128,
    pub slot_sizes: (usize, usize),
    pub in_range: bool,
}

impl RepQuery {
    pub fn plain(k: u32, s: u32, n: u64, big_n: u64, r: f64) -> Self {
        Self { k, s, n, big_n, smoothness: Smoothness::FixedR { r }, cutoff: None, j: 0, distinct: false }
    }

    pub fn p(&self) -> f64 {
        (2.0 * self.big_n as f64).powf(1.0 / self.k as f64)
    }

    pub fn p_minus(&self) -> f64 {
        p_minus(self.p(), self.k, self.s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.s == 0 || self.big_n == 0 {
            return Err(Error::Domain("repcount needs k, s, N >= 1".into()));
        }
        if self.j > self.s {
            return Err(Error::Domain(format!("j = {} exceeds s = {}", self.j, self.s)));
        }
        match self.smoothness {
            Smoothness::FixedR { r } if !(r >= 1.0) => Err(Error::Domain(format!("R must be >= 1, got {r}"))),
            Smoothness::SelfSmooth { eta } if !(eta > 0.0 && eta <= 1.0) => {
                Err(Error::Domain(format!("eta must lie in (0,1], got {eta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Admissible x (before cutoffs) with x^k ≤ limit.
fn admissible_xs(k: u32, limit: u64, smoothness: Smoothness, p: f64) -> Result<Vec<u64>> {
    let x_max = iroot(limit as u128, k);
    let lpf = largest_prime_factor_sieve(x_max)?;
    Ok((1..=x_max)
        .filter(|&x| match smoothness {
            Smoothness::FixedR { r } => (x as f64) <= p && (lpf[x as usize] as f64) <= r,
            Smoothness::SelfSmooth { eta } => prime_within(lpf[x as usize] as u64, x, eta),
        })
        .collect())
}

/// The slot types of a query: (slot for x₁..x_j, slot for the rest).
fn query_slots(q: &RepQuery, engine: &mut Engine) -> Result<(usize, usize)> {
    let xs = admissible_xs(q.k, engine.limit(), q.smoothness, q.p())?;
    let cut = q.cutoff.unwrap_or(0.0);
    let pm = q.p_minus();
    let (k, s) = (q.k, q.s);
    let rest: Vec<u64> = xs.iter().copied().filter(|&x| x as f64 > cut).collect();
    let big: Vec<u64> = rest.iter().copied().filter(|&x| x as f64 > pm).collect();
    let limit = engine.limit();
    let a = engine.add_slot(Slot::from_xs(big, k, 1, limit, |x| smooth_weight(x, k, s)));
    let b = engine.add_slot(Slot::from_xs(rest, k, 1, limit, |x| smooth_weight(x, k, s)));
    Ok((a, b))
}

fn slot_ids(q: &RepQuery, big: usize, rest: usize) -> Vec<usize> {
    (0..q.s).map(|i| if i < q.j { big } else { rest }).collect()
}

/// Exact r-type count for one query.
pub fn rep_count(q: &RepQuery) -> Result<RepResult> {
    q.validate()?;
    let mut engine = Engine::new(q.n, true)?;
    rep_count_with(q, &mut engine)
}

/// [`rep_count`] reusing an engine (its limit must cover q.n and its slots
/// must come from queries sharing k, s, N and smoothness).
pub fn rep_count_with(q: &RepQuery, engine: &mut Engine) -> Result<RepResult> {
    q.validate()?;
    let in_range = q.big_n <= q.n && q.n <= 2 * q.big_n;
    if q.n < q.s as u64 {
        return Ok(RepResult { weighted: 0.0, count: 0, slot_sizes: (0, 0), in_range });
    }
    let (big, rest) = query_slots(q, engine)?;
    let ids = slot_ids(q, big, rest);
    let t = if q.distinct { engine.at_distinct(&ids, q.n)? } else { engine.at(&ids, q.n)? };
    if t.count < 0 {
        return Err(Error::Invariant(format!("negative tuple count {} at n = {}", t.count, q.n)));
    }
    Ok(RepResult {
        weighted: t.weighted,
        count: t.count as u128,
        slot_sizes: (engine.slots[big].len(), engine.slots[rest].len()),
        in_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionExclusionReport {
    pub n: u64,
    pub r_sk: RepResult,
    pub r_j: Vec<RepResult>,
    /// Σ_j (−1)^{j+1} C(s,j) r_j.
    pub alternating_weighted: f64,
    pub alternating_count: i128,
    pub weighted_gap: f64,
    pub exact_count_match: bool,
    /// s·P₋^k < N/2 ≤ n, so max x_i > P₋ holds for every solution.
    pub max_condition_redundant: bool,
}

impl InclusionExclusionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.exact_count_match
            && self.max_condition_redundant
            && self.weighted_gap <= tol * self.r_sk.weighted.abs().max(f64::MIN_POSITIVE)
    }
}

/// Both sides of r_{s,k}(n,R) = Σ_{j=1}^{s} (−1)^{j+1} C(s,j) r_j(n,R).
pub fn inclusion_exclusion(k: u32, s: u32, n: u64, big_n: u64, r: f64) -> Result<InclusionExclusionReport> {
    let base = RepQuery::plain(k, s, n, big_n, r);
    base.validate()?;
    let mut engine = Engine::new(n, true)?;
    let r_sk = rep_count_with(&base, &mut engine)?;
    let mut r_j = Vec::with_capacity(s as usize);
    let mut weighted = Vec::new();
    let mut count: i128 = 0;
    for j in 1..=s {
        let res = rep_count_with(&RepQuery { j, ..base.clone() }, &mut engine)?;
        let c = binomial(s as u64, j as u64) as i128;
        let sign = if j % 2 == 1 { 1 } else { -1 };
        weighted.push((sign * c) as f64 * res.weighted);
        count += sign * c * res.count as i128;
        r_j.push(res);
    }
    let alternating_weighted = pairwise_sum(&weighted);
    let pm = base.p_minus();
    Ok(InclusionExclusionReport {
        n,
        r_sk,
        r_j,
        alternating_weighted,
        alternating_count: count,
        weighted_gap: (alternating_weighted - r_sk.weighted).abs(),
        exact_count_match: count == r_sk.count as i128,
        max_condition_redundant: s as f64 * pm.powi(k as i32) <= big_n as f64 / 2.0 && big_n as f64 / 2.0 < n as f64,
    })
}

/// Whether the identity holds (exact counts, weighted to 1e−9 relative).
pub fn inclusion_exclusion_check(k: u32, s: u32, n: u64, big_n: u64, r: f64) -> Result<bool> {
    Ok(inclusion_exclusion(k, s, n, big_n, r)?.holds(1e-9))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FCoefficient {
    pub value: f64,
    pub count: u128,
    /// m ∈ [N, 2N]; evaluation proceeds either way.
    pub in_range: bool,
}

/// F_{d,a}(m) = Σ over m = Σ_j a_j x_j^k with x₁ > P₋ and every x_j ∈ 𝒜(P,R)
/// of Π x_j^{−1+k/s}.
pub fn f_coefficient(d: u32, a: &[u64], m: u64, big_n: u64, k: u32, s: u32, r: f64) -> Result<FCoefficient> {
    if d >= s || a.len() != (s - d) as usize {
        return Err(Error::Domain(format!("need d < s and s − d = {} dilations, got {}", s.saturating_sub(d), a.len())));
    }
    if a.iter().any(|&x| x == 0 || x > s as u64) {
        return Err(Error::Domain("dilations must lie in [1, s]".into()));
    }
    let q = RepQuery::plain(k, s, m, big_n, r);
    q.validate()?;
    let mut engine = Engine::new(m, true)?;
    let xs = admissible_xs(k, m, q.smoothness, q.p())?;
    let pm = q.p_minus();
    let ids: Vec<usize> = a
        .iter()
        .enumerate()
        .map(|(i, &aj)| {
            let set = xs.iter().copied().filter(|&x| i > 0 || x as f64 > pm);
            engine.add_slot(Slot::from_xs(set, k, aj, m, |x| smooth_weight(x, k, s)))
        })
        .collect();
    let t = engine.at(&ids, m)?;
    Ok(FCoefficient { value: t.weighted, count: t.count as u128, in_range: big_n <= m && m <= 2 * big_n })
}

/// Ordered s-tuples from a sorted list of k-th powers summing to n.
pub fn rep_in_sequence(n: u64, s: u32, members: &[u64]) -> Result<u128> {
    if members.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("sequence must be sorted".into()));
    }
    if s == 0 {
        return Ok((n == 0) as u128);
    }
    let mut engine = Engine::new(n, true)?;
    let slot = Slot::new(
        members
            .iter()
            .filter(|&&v| v <= n)
            .map(|&v| SlotEntry { x: v, value: v, weight: 1.0 })
            .collect(),
    );
    let id = engine.add_slot(slot);
    Ok(engine.at(&vec![id; s as usize], n)?.count as u128)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub n: u64,
    pub r: f64,
    pub r_phi: f64,
    pub r_phi_eta: f64,
    pub c_ks: f64,
    pub singular: f64,
    pub ratio: f64,
    pub ratio_phi: f64,
    pub ratio_phi_eta: f64,
}

/// r_{s,k}(n, P^η), r^φ_{s,k}(n, P^η) and r^φ_{s,k,η}(n) against c_{k,s}(η)𝔖(n),
/// with N = n. 𝔖 is supplied by the caller.
pub fn rep_vs_asymptotic_row(k: u32, s: u32, eta: f64, n: u64, phi: Growth, singular: f64) -> Result<AsymptoticRow> {
    let p = (2.0 * n as f64).powf(1.0 / k as f64);
    let r = p.powf(eta);
    let base = RepQuery::plain(k, s, n, n, r);
    let mut engine = Engine::new(n, false)?;
    let weighted = |q: &RepQuery, e: &mut Engine| -> Result<f64> {
        let (big, rest) = query_slots(q, e)?;
        Ok(e.at(&slot_ids(q, big, rest), q.n)?.weighted)
    };
    let cut = (n as f64 / phi.eval(n as f64)).powf(1.0 / k as f64);
    let r_full = weighted(&base, &mut engine)?;
    let r_phi = weighted(&RepQuery { cutoff: Some(cut), ..base.clone() }, &mut engine)?;
    let self_q = RepQuery { smoothness: Smoothness::SelfSmooth { eta }, cutoff: Some(cut), ..base };
    let mut engine2 = Engine::new(n, false)?;
    let r_phi_eta = weighted(&self_q, &mut engine2)?;
    let c = crate::singular::c_ks(k, s, eta)?;
    let denom = c * singular;
    Ok(AsymptoticRow {
        n,
        r: r_full,
        r_phi,
        r_phi_eta,
        c_ks: c,
        singular,
        ratio: r_full / denom,
        ratio_phi: r_phi / denom,
        ratio_phi_eta: r_phi_eta / denom,
    })
}

/// [`rep_vs_asymptotic_row`] over several n, 𝔖 by the q-sum route with Q = `q_max`.
pub fn rep_vs_asymptotic(k: u32, s: u32, eta: f64, ns: &[u64], phi: Growth, q_max: u64) -> Result<Vec<AsymptoticRow>> {
    let ev = crate::singular::QSumEvaluator::new(k, s, q_max)?;
    ns.iter()
        .map(|&n| rep_vs_asymptotic_row(k, s, eta, n, phi, ev.eval(n as i128)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::largest_prime_factor;

    fn brute(k: u32, s: u32, n: u64, ok: &dyn Fn(usize, u64) -> bool, distinct: bool) -> (f64, u128) {
        let x_max = iroot(n as u128, k);
        let mut tuple = vec![0u64; s as usize];
        let mut acc = (0.0, 0u128);
        #[allow(clippy::too_many_arguments)]
        fn rec(
            i: usize,
            rem: u64,
            k: u32,
            x_max: u64,
            tuple: &mut Vec<u64>,
            ok: &dyn Fn(usize, u64) -> bool,
            distinct: bool,
            acc: &mut (f64, u128),
        ) {
            let s = tuple.len();
            if i == s {
                if rem == 0 {
                    if distinct {
                        let mut t = tuple.clone();
                        t.sort_unstable();
                        if t.windows(2).any(|w| w[0] == w[1]) {
                            return;
                        }
                    }
                    acc.0 += tuple.iter().map(|&x| smooth_weight(x, k, s as u32)).product::<f64>();
                    acc.1 += 1;
                }
                return;
            }
            for x in 1..=x_max {
                let v = x.pow(k);
                if v > rem {
                    break;
                }
                if ok(i, x) {
                    tuple[i] = x;
                    rec(i + 1, rem - v, k, x_max, tuple, ok, distinct, acc);
                }
            }
        }
        rec(0, n, k, x_max, &mut tuple, ok, distinct, &mut acc);
        acc
    }

    #[test]
    fn all_ones() {
        let r = rep_count(&RepQuery::plain(2, 5, 5, 5, 5.0)).unwrap();
        assert_eq!(r.count, 1);
        assert!((r.weighted - 1.0).abs() < 1e-15);
        let r = rep_count(&RepQuery::plain(2, 5, 4, 4, 5.0)).unwrap();
        assert_eq!((r.count, r.weighted), (0, 0.0));
    }

    #[test]
    fn engine_matches_nested_loops() {
        for (k, s, n, r) in [(2u32, 4u32, 200u64, 5.0), (2, 5, 317, 3.0), (3, 4, 400, 7.0), (2, 3, 1000, 100.0)] {
            for j in 0..=s.min(2) {
                let q = RepQuery { j, ..RepQuery::plain(k, s, n, n, r) };
                let p = q.p();
                let pm = q.p_minus();
                let ok = |i: usize, x: u64| {
                    (x as f64) <= p && largest_prime_factor(x) as f64 <= r && (i >= j as usize || x as f64 > pm)
                };
                let (w, c) = brute(k, s, n, &ok, false);
                let got = rep_count(&q).unwrap();
                assert_eq!(got.count, c, "k={k} s={s} n={n} j={j}");
                assert!((got.weighted - w).abs() <= 1e-12 * w.max(1.0));
            }
        }
    }

    #[test]
    fn distinct_matches_filter() {
        for (k, s, n) in [(2u32, 4u32, 300u64), (2, 5, 250), (3, 3, 500)] {
            let q = RepQuery { distinct: true, ..RepQuery::plain(k, s, n, n, 1e9) };
            let (w, c) = brute(k, s, n, &|_, _| true, true);
            let got = rep_count(&q).unwrap();
            assert_eq!(got.count, c);
            assert!((got.weighted - w).abs() <= 1e-11 * w.max(1.0));
        }
    }

    #[test]
    fn distinct_unsupported_above_limit() {
        let q = RepQuery { distinct: true, ..RepQuery::plain(2, MAX_DISTINCT_S + 1, 100, 100, 10.0) };
        assert!(matches!(rep_count(&q), Err(Error::Unsupported(_))));
    }

    #[test]
    fn signatures_match_set_partition_grouping() {
        let cases: [&[usize]; 6] = [&[0], &[0, 0, 0], &[0, 1], &[0, 0, 1, 1, 1], &[0, 1, 2, 0, 1], &[0, 0, 0, 0, 0, 0, 1]];
        for labels in cases {
            let mut grouped: BTreeMap<Vec<Vec<usize>>, i128> = BTreeMap::new();
            for partition in set_partitions(labels.len()) {
                let mut mu = 1i128;
                let mut key: Vec<Vec<usize>> = partition
                    .iter()
                    .map(|block| {
                        let b = block.len() as u64;
                        mu *= if b % 2 == 1 { 1 } else { -1 } * factorial(b - 1) as i128;
                        let mut ls: Vec<usize> = block.iter().map(|&i| labels[i]).collect();
                        ls.sort_unstable();
                        ls
                    })
                    .collect();
                key.sort();
                *grouped.entry(key).or_insert(0) += mu;
            }
            let brute: Vec<_> = grouped.into_iter().filter(|(_, mu)| *mu != 0).collect();
            assert_eq!(*label_signatures(labels), brute, "{labels:?}");
        }
    }

    #[test]
    fn distinct_counts_at_s13() {
        // {1,…,13}: the only distinct 13-tuples summing to 91 are its permutations.
        let members: Vec<u64> = (1..=13).collect();
        let mut engine = Engine::new(91, true).unwrap();
        let id = engine.add_slot(Slot::new(members.iter().map(|&v| SlotEntry { x: v, value: v, weight: 1.0 }).collect()));
        let t = engine.at_distinct(&[id; 13], 91).unwrap();
        assert_eq!(t.count as u128, factorial(13));
    }

    #[test]
    fn set_partition_counts() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877];
        for (s, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(s).len(), b);
        }
    }

    #[test]
    fn inclusion_exclusion_small() {
        let rep = inclusion_exclusion(2, 5, 700, 400, 10.0).unwrap();
        assert!(rep.holds(1e-10), "{rep:?}");
    }

    #[test]
    fn f_coefficient_cases() {
        // s − d = 1: one term at most.
        let f = f_coefficient(4, &[2], 50, 30, 2, 5, 100.0).unwrap();
        assert_eq!(f.count, 1);
        assert!((f.value - smooth_weight(5, 2, 5)).abs() < 1e-15);
        // P = 2, P₋ < 1: (1,1) counts for m = 2.
        let f = f_coefficient(3, &[1, 1], 2, 2, 2, 5, 2.0).unwrap();
        assert_eq!(f.count, 1);
        assert!((f.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f_symmetric_in_untilded_slots() {
        let a = f_coefficient(2, &[1, 2, 3], 900, 600, 2, 5, 50.0).unwrap();
        let b = f_coefficient(2, &[1, 3, 2], 900, 600, 2, 5, 50.0).unwrap();
        assert_eq!(a.count, b.count);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn sequence_counts() {
        assert_eq!(rep_in_sequence(10, 3, &[]).unwrap(), 0);
        assert_eq!(rep_in_sequence(4, 4, &[1]).unwrap(), 1);
        let xs = [1u64, 4, 9, 25, 49];
        let mut brute = 0;
        for a in xs {
            for b in xs {
                for c in xs {
                    if a + b + c == 59 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(rep_in_sequence(59, 3, &xs).unwrap(), brute);
    }

    #[test]
    fn windows_and_patterns() {
        let xs: Vec<u64> = vec![1, 2, 3, 5, 6, 8];
        let mut e = Engine::new(200, true).unwrap();
        let id = e.add_slot(Slot::from_xs(xs.clone(), 2, 1, 200, |_| 1.0));
        let ids = vec![id; 4];
        let all = e.window(&ids, 50, 120).unwrap();
        let dis = e.window_distinct(&ids, 50, 120).unwrap();
        let rep = e.window_repeated(id, 4, 50, 120).unwrap();
        let ok = |_: usize, x: u64| xs.contains(&x);
        for (i, n) in (50..=120).enumerate() {
            assert_eq!(all[i].count, e.at(&ids, n).unwrap().count);
            let (_, c_all) = brute(2, 4, n, &ok, false);
            let (_, c_dis) = brute(2, 4, n, &ok, true);
            assert_eq!(all[i].count as u128, c_all);
            assert_eq!(dis[i].count as u128, c_dis);
            assert_eq!(rep[i].count as u128, c_all - c_dis);
        }
        assert_eq!(integer_partitions(9).len(), 30);
    }

    #[test]
    fn pattern_weights_count_each_value_once() {
        // Two values with weights p, q; tuples of length 2 summing to 2·1 or 1+4.
        let mut e = Engine::new(10, false).unwrap();
        let slot = Slot::new(vec![
            SlotEntry { x: 1, value: 1, weight: 0.5 },
            SlotEntry { x: 2, value: 4, weight: 0.25 },
        ]);
        let id = e.add_slot(slot);
        let t = e.window_all_patterns(id, 2, 2, 8).unwrap();
        assert!((t[0].weighted - 0.5).abs() < 1e-15); // (1,1): p once
        assert!((t[3].weighted - 2.0 * 0.125).abs() < 1e-15); // (1,2),(2,1)
        assert!((t[6].weighted - 0.25).abs() < 1e-15); // (2,2)
    }

    #[test]
    fn monotone_in_r() {
        let mut last = 0;
        for r in [2.0, 3.0, 5.0, 7.0, 11.0, 100.0] {
            let c = rep_count(&RepQuery::plain(2, 5, 1500, 1000, r)).unwrap().count;
            assert!(c >= last);
            last = c;
        }
    }
}
