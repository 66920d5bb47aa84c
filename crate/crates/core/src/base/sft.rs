//! Two-sided subshifts of finite type with exact, eventually periodic points.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_metric_base() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftSpec {
    pub adjacency: Vec<Vec<u8>>,
    #[serde(default = "default_metric_base")]
    pub metric_base: f64,
    #[serde(default = "default_true")]
    pub mixing: bool,
}

#[derive(Debug, Clone)]
pub struct Sft {
    adjacency: Vec<Vec<bool>>,
    metric_base: f64,
    mixing: bool,
    mixing_time: Option<usize>,
    /// Parry transition probabilities, row-major cumulative.
    parry_cumulative: Vec<Vec<f64>>,
    parry_stationary: Vec<f64>,
}

fn bool_mat_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).any(|m| a[i][m] && b[m][j])).collect())
        .collect()
}

fn lcm(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        let t = x % y;
        x = y;
        y = t;
    }
    a / x * b
}

impl Sft {
    pub fn new(spec: &SftSpec) -> Result<Self> {
        let k = spec.adjacency.len();
        if k == 0 || k > 255 {
            return Err(Error::InvalidBase(format!("alphabet size {k} out of range")));
        }
        if spec.adjacency.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidBase("adjacency must be square".into()));
        }
        if spec.adjacency.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidBase("adjacency entries must be 0 or 1".into()));
        }
        if !(spec.metric_base > 0.0 && spec.metric_base < 1.0) {
            return Err(Error::InvalidBase(format!("metric_base {} not in (0,1)", spec.metric_base)));
        }
        let adjacency: Vec<Vec<bool>> =
            spec.adjacency.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect();
        for s in 0..k {
            let out = adjacency[s].iter().any(|&b| b);
            let inc = (0..k).any(|r| adjacency[r][s]);
            if !out || !inc {
                return Err(Error::InvalidBase(format!("symbol {s} lacks an incoming or outgoing edge")));
            }
        }
        // primitive matrices reach positivity by (k−1)²+1 (Wielandt)
        let mut power = adjacency.clone();
        let mut mixing_time = None;
        for t in 1..=((k - 1) * (k - 1) + 1) {
            if power.iter().flatten().all(|&b| b) {
                mixing_time = Some(t);
                break;
            }
            power = bool_mat_mul(&power, &adjacency);
        }
        if spec.mixing && mixing_time.is_none() {
            return Err(Error::NotMixing);
        }
        let (parry_cumulative, parry_stationary) = parry(&adjacency);
        Ok(Sft { adjacency, metric_base: spec.metric_base, mixing: spec.mixing, mixing_time, parry_cumulative, parry_stationary })
    }

    pub fn spec(&self) -> SftSpec {
        SftSpec {
            adjacency: self.adjacency.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect(),
            metric_base: self.metric_base,
            mixing: self.mixing,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.adjacency.len()
    }
    pub fn metric_base(&self) -> f64 {
        self.metric_base
    }
    pub fn mixing_time(&self) -> Option<usize> {
        self.mixing_time
    }
    /// `τ = −log metric_base`: one shift step doubles (for base 1/2) distances
    /// along unstable leaves.
    pub fn expansion_rate(&self) -> f64 {
        -self.metric_base.ln()
    }

    pub fn admissible(&self, a: u8, b: u8) -> bool {
        self.adjacency[a as usize][b as usize]
    }

    pub fn word_admissible(&self, w: &[u8]) -> bool {
        w.iter().all(|&s| (s as usize) < self.alphabet_size()) && w.windows(2).all(|p| self.admissible(p[0], p[1]))
    }

    /// Parry measure of the cylinder `[w]` at any position.
    pub fn cylinder_measure(&self, w: &[u8]) -> f64 {
        let Some(&first) = w.first() else { return 1.0 };
        let mut m = self.parry_stationary[first as usize];
        for p in w.windows(2) {
            let row = &self.parry_cumulative[p[0] as usize];
            let j = p[1] as usize;
            m *= row[j] - if j == 0 { 0.0 } else { row[j - 1] };
        }
        m
    }

    /// `trace(A^n)`, the number of points with `σ^n x = x`.
    pub fn trace_power(&self, n: usize) -> u128 {
        let k = self.alphabet_size();
        let a: Vec<Vec<u128>> = self.adjacency.iter().map(|r| r.iter().map(|&b| b as u128).collect()).collect();
        let mut p: Vec<Vec<u128>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u128).collect()).collect();
        for _ in 0..n {
            p = (0..k).map(|i| (0..k).map(|j| (0..k).map(|m| p[i][m] * a[m][j]).sum()).collect()).collect();
        }
        (0..k).map(|i| p[i][i]).sum()
    }

    pub fn point(&self, word: Vec<u8>, origin: i64, left: Vec<u8>, right: Vec<u8>) -> Result<SymbolicPoint> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::InvalidPoint("tail period words must be nonempty".into()));
        }
        let mut check = Vec::with_capacity(left.len() * 2 + word.len() + right.len() * 2);
        check.extend_from_slice(&left);
        check.extend_from_slice(&left);
        check.extend_from_slice(&word);
        check.extend_from_slice(&right);
        check.extend_from_slice(&right);
        if !self.word_admissible(&check) {
            return Err(Error::InvalidPoint("inadmissible symbol sequence".into()));
        }
        Ok(SymbolicPoint { word: word.into(), origin, left: left.into(), right: right.into() })
    }

    /// The periodic point `…www.www…` with `x_0 = w_0`.
    pub fn periodic_point(&self, w: &[u8]) -> Result<SymbolicPoint> {
        if w.is_empty() {
            return Err(Error::InvalidPoint("empty period word".into()));
        }
        self.point(w.to_vec(), 0, w.to_vec(), w.to_vec())
    }

    pub fn iterate(&self, x: &SymbolicPoint, n: i64) -> SymbolicPoint {
        x.shifted(n)
    }

    /// `metric_base^k` with `k = min{|i| : x_i ≠ y_i}`.
    pub fn distance(&self, x: &SymbolicPoint, y: &SymbolicPoint) -> f64 {
        match first_difference(x, y) {
            Some(k) => self.metric_base.powi(k as i32),
            None => 0.0,
        }
    }

    /// Future (`i ≥ 0`) from `y`, past (`i < 0`) from `z`.
    pub fn bracket(&self, y: &SymbolicPoint, z: &SymbolicPoint, radius: f64) -> Result<SymbolicPoint> {
        let dist = self.distance(y, z);
        if dist >= radius {
            return Err(Error::TooFarApart { distance: dist, radius });
        }
        let (l, r) = (z.symbol(-1), y.symbol(0));
        if !self.admissible(l, r) {
            return Err(Error::InadmissibleSplice { left: l, right: r });
        }
        Ok(splice(z, y))
    }

    /// Word-repetition closing: requires `x_0 = x_n`; returns the periodic
    /// point with period word `x_0 … x_{n−1}`.
    pub fn close(&self, x: &SymbolicPoint, n: usize) -> Result<(SymbolicPoint, f64)> {
        if n == 0 {
            return Err(Error::ClosingFailed("period must be positive".into()));
        }
        let delta = self.distance(x, &x.shifted(n as i64));
        if x.symbol(0) != x.symbol(n as i64) {
            return Err(Error::NotCloseEnough { distance: delta, radius: 1.0 });
        }
        let w: Vec<u8> = (0..n as i64).map(|i| x.symbol(i)).collect();
        Ok((self.periodic_point(&w)?, delta))
    }

    /// Orbits of minimal period exactly `n` as primitive cycle words that are
    /// lexicographically minimal among their rotations, in lexicographic order.
    pub fn cycle_words(&self, n: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut w = Vec::with_capacity(n);
        self.dfs_cycles(n, &mut w, &mut out);
        out
    }

    fn dfs_cycles(&self, n: usize, w: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if w.len() == n {
            if self.admissible(w[n - 1], w[0]) && is_primitive_min_rotation(w) {
                out.push(w.clone());
            }
            return;
        }
        for s in 0..self.alphabet_size() as u8 {
            if let Some(&last) = w.last() {
                if !self.admissible(last, s) {
                    continue;
                }
            }
            // a minimal rotation never has a symbol below its first
            if !w.is_empty() && s < w[0] {
                continue;
            }
            w.push(s);
            self.dfs_cycles(n, w, out);
            w.pop();
        }
    }

    /// Lexicographically smallest word `c` of length `len` with
    /// `a → c_1 → … → c_len → b` admissible.
    pub fn connector(&self, a: u8, b: u8, len: usize) -> Option<Vec<u8>> {
        let k = self.alphabet_size();
        // reach[t][s]: a path of t transitions leads from s to b
        let mut reach = vec![vec![false; k]; len + 2];
        reach[0][b as usize] = true;
        for t in 1..=len + 1 {
            for s in 0..k {
                reach[t][s] = (0..k).any(|m| self.adjacency[s][m] && reach[t - 1][m]);
            }
        }
        if !reach[len + 1][a as usize] {
            return None;
        }
        let mut out = Vec::with_capacity(len);
        let mut cur = a as usize;
        for t in (1..=len).rev() {
            let next = (0..k).find(|&m| self.adjacency[cur][m] && reach[t][m])?;
            out.push(next as u8);
            cur = next;
        }
        Some(out)
    }

    /// Gluing with connectors of length exactly `gap` between consecutive
    /// segments (cyclically).
    pub fn glue_specification(&self, segments: &[Vec<u8>], gap: usize) -> Result<GluedOrbit> {
        if self.mixing_time.is_none() {
            return Err(Error::NotMixing);
        }
        if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidPoint("segments must be nonempty words".into()));
        }
        for s in segments {
            if !self.word_admissible(s) {
                return Err(Error::InadmissibleWord(format!("{s:?}")));
            }
        }
        let mut itinerary = Vec::new();
        let mut offsets = Vec::with_capacity(segments.len());
        for (i, seg) in segments.iter().enumerate() {
            offsets.push(itinerary.len());
            itinerary.extend_from_slice(seg);
            let next = &segments[(i + 1) % segments.len()];
            let c = self
                .connector(*seg.last().unwrap(), next[0], gap)
                .ok_or(Error::NoConnector(gap))?;
            itinerary.extend_from_slice(&c);
        }
        let period = minimal_word_period(&itinerary);
        let start = self.periodic_point(&itinerary)?;
        let points = (0..period as i64).map(|i| start.shifted(i)).collect();
        Ok(GluedOrbit { itinerary, offsets, points })
    }

    /// Copy of `x` with the symbol at `−k` (stable side) or `+k` (unstable
    /// side) replaced by `c`, keeping every coordinate closer to 0 and
    /// closing the altered side with a periodic tail. `None` when `c` does
    /// not fit admissibly or equals the old symbol.
    pub fn perturb_at(&self, x: &SymbolicPoint, k: i64, c: u8, past: bool) -> Option<SymbolicPoint> {
        let (lo, hi) = x.extent();
        if past {
            if c == x.symbol(-k) || !self.admissible(c, x.symbol(-k + 1)) {
                return None;
            }
            let hi = hi.max(-k + 1);
            let mut word = vec![c];
            word.extend(x.window(-k + 1, hi));
            let left = rotate_to_predecessor(&self.return_cycle(c), c, &self.adjacency);
            let right = rotate_tail_right(x, hi);
            self.point(word, k, left, right).ok()
        } else {
            if c == x.symbol(k) || !self.admissible(x.symbol(k - 1), c) {
                return None;
            }
            let lo = lo.min(k);
            let mut word = x.window(lo, k);
            word.push(c);
            let left = rotate_tail_left(x, lo);
            let right = rotate_to_successor(&self.return_cycle(c), c, &self.adjacency);
            self.point(word, -lo, left, right).ok()
        }
    }

    /// Sample from the Parry measure: a stationary Markov chain of length
    /// `len` placed at indices `[−back, len − back)`, tails closed by cycles.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, len: usize, back: usize) -> SymbolicPoint {
        let k = self.alphabet_size();
        let mut w = Vec::with_capacity(len.max(1));
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut s = k - 1;
        for (i, p) in self.parry_stationary.iter().enumerate() {
            acc += p;
            if u < acc {
                s = i;
                break;
            }
        }
        w.push(s as u8);
        while w.len() < len.max(1) {
            let cur = *w.last().unwrap() as usize;
            let u: f64 = rng.gen();
            let row = &self.parry_cumulative[cur];
            let next = row.iter().position(|&c| u < c).unwrap_or_else(|| {
                (0..k).rev().find(|&m| self.adjacency[cur][m]).unwrap_or(0)
            });
            w.push(next as u8);
        }
        let right = self.return_cycle(*w.last().unwrap());
        let left = self.return_cycle(w[0]);
        // left tail must end in a predecessor of w[0]: rotate the cycle so that
        // its last symbol precedes w[0]
        let left = rotate_to_predecessor(&left, w[0], &self.adjacency);
        let right = rotate_to_successor(&right, *w.last().unwrap(), &self.adjacency);
        SymbolicPoint { word: w.into(), origin: back as i64, left: left.into(), right: right.into() }
    }

    /// Shortest cycle through `s` (lexicographically least among shortest),
    /// starting at `s`.
    fn return_cycle(&self, s: u8) -> Vec<u8> {
        let k = self.alphabet_size();
        for len in 1..=k {
            if let Some(c) = self.connector(s, s, len - 1) {
                let mut w = vec![s];
                w.extend(c);
                return w;
            }
        }
        vec![s]
    }
}

fn rotate_to_predecessor(cycle: &[u8], first: u8, adj: &[Vec<bool>]) -> Vec<u8> {
    let n = cycle.len();
    for r in 0..n {
        let rot: Vec<u8> = (0..n).map(|i| cycle[(i + r) % n]).collect();
        if adj[rot[n - 1] as usize][first as usize] {
            return rot;
        }
    }
    cycle.to_vec()
}

fn rotate_to_successor(cycle: &[u8], last: u8, adj: &[Vec<bool>]) -> Vec<u8> {
    let n = cycle.len();
    for r in 0..n {
        let rot: Vec<u8> = (0..n).map(|i| cycle[(i + r) % n]).collect();
        if adj[last as usize][rot[0] as usize] {
            return rot;
        }
    }
    cycle.to_vec()
}

/// Cumulative Parry transition rows and stationary vector.
fn parry(adj: &[Vec<bool>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = adj.len();
    let power = |transpose: bool| -> (f64, Vec<f64>) {
        let mut v = vec![1.0; k];
        let mut lambda = 1.0;
        for _ in 0..2000 {
            let mut nv = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    let e = if transpose { adj[j][i] } else { adj[i][j] };
                    if e {
                        nv[i] += v[j];
                    }
                }
            }
            // average with the previous iterate to damp periodic oscillation
            for i in 0..k {
                nv[i] = 0.5 * (nv[i] + v[i]);
            }
            let s: f64 = nv.iter().sum();
            lambda = s / v.iter().sum::<f64>();
            for x in nv.iter_mut() {
                *x /= s;
            }
            v = nv;
        }
        (2.0 * lambda - 1.0, v)
    };
    let (lambda, right) = power(false);
    let (_, left) = power(true);
    let mut stat: Vec<f64> = (0..k).map(|i| left[i] * right[i]).collect();
    let s: f64 = stat.iter().sum();
    stat.iter_mut().for_each(|x| *x /= s);
    let cumulative = (0..k)
        .map(|i| {
            let mut acc = 0.0;
            (0..k)
                .map(|j| {
                    if adj[i][j] {
                        acc += right[j] / (lambda * right[i]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    (cumulative, stat)
}

fn is_primitive_min_rotation(w: &[u8]) -> bool {
    let n = w.len();
    for r in 1..n {
        let rot = w[r..].iter().chain(w[..r].iter());
        match rot.cmp(w.iter()) {
            std::cmp::Ordering::Less | std::cmp::Ordering::Equal => return false,
            std::cmp::Ordering::Greater => {}
        }
    }
    true
}

/// Smallest `p` dividing `len` with `w` invariant under rotation by `p`.
pub fn minimal_word_period(w: &[u8]) -> usize {
    let n = w.len();
    (1..=n).find(|&p| n % p == 0 && (0..n).all(|i| w[i] == w[(i + p) % n])).unwrap_or(n)
}

/// A point `…LLL W RRR…` with coordinate 0 at `word[origin]`.
#[derive(Debug, Clone)]
pub struct SymbolicPoint {
    word: Arc<[u8]>,
    origin: i64,
    left: Arc<[u8]>,
    right: Arc<[u8]>,
}

impl SymbolicPoint {
    pub fn symbol(&self, i: i64) -> u8 {
        let j = self.origin + i;
        let len = self.word.len() as i64;
        if j < 0 {
            self.left[j.rem_euclid(self.left.len() as i64) as usize]
        } else if j < len {
            self.word[j as usize]
        } else {
            self.right[((j - len) % self.right.len() as i64) as usize]
        }
    }

    pub fn shifted(&self, n: i64) -> SymbolicPoint {
        SymbolicPoint { word: self.word.clone(), origin: self.origin + n, left: self.left.clone(), right: self.right.clone() }
    }

    /// Coordinates `[lo, hi)` outside of which both tails are periodic.
    fn extent(&self) -> (i64, i64) {
        (-self.origin, self.word.len() as i64 - self.origin)
    }

    pub fn window(&self, lo: i64, hi: i64) -> Vec<u8> {
        (lo..hi).map(|i| self.symbol(i)).collect()
    }

    /// Periodic point test with its minimal period (≤ cap).
    pub fn is_periodic(&self, n: i64) -> bool {
        first_difference(self, &self.shifted(n)).is_none()
    }
}

impl PartialEq for SymbolicPoint {
    fn eq(&self, other: &Self) -> bool {
        first_difference(self, other).is_none()
    }
}

/// Scan bound beyond which both points are periodic with a common period on
/// each side.
fn scan_bounds(x: &SymbolicPoint, y: &SymbolicPoint) -> (i64, i64) {
    let (xl, xh) = x.extent();
    let (yl, yh) = y.extent();
    let lp = lcm(x.left.len(), y.left.len()) as i64;
    let rp = lcm(x.right.len(), y.right.len()) as i64;
    (xl.min(yl) - lp, xh.max(yh) + rp)
}

/// `min{|i| : x_i ≠ y_i}`, or `None` when the points coincide.
pub fn first_difference(x: &SymbolicPoint, y: &SymbolicPoint) -> Option<u64> {
    let (lo, hi) = scan_bounds(x, y);
    let reach = lo.unsigned_abs().max(hi.unsigned_abs()) as i64 + 1;
    for k in 0..=reach {
        if (k <= hi && x.symbol(k) != y.symbol(k)) || (k > 0 && -k >= lo && x.symbol(-k) != y.symbol(-k)) {
            return Some(k as u64);
        }
        if k > hi && -k < lo {
            break;
        }
    }
    None
}

/// Smallest `k ≥ 0` with `x_{−k} ≠ y_{−k}` (`past`) or `x_k ≠ y_k`, or
/// `None` when the points agree on that whole half-line.
pub fn first_difference_on(x: &SymbolicPoint, y: &SymbolicPoint, past: bool) -> Option<u64> {
    let (lo, hi) = scan_bounds(x, y);
    let reach = if past { -lo } else { hi }.max(0) + 1;
    let sign = if past { -1 } else { 1 };
    (0..=reach).find(|&k| x.symbol(sign * k) != y.symbol(sign * k)).map(|k| k as u64)
}

/// Coordinates `i < 0` from `past`, `i ≥ 0` from `future`.
fn splice(past: &SymbolicPoint, future: &SymbolicPoint) -> SymbolicPoint {
    let (pl, _) = past.extent();
    let (_, fh) = future.extent();
    let lo = pl.min(0);
    let hi = fh.max(0);
    let mut word = Vec::with_capacity((hi - lo) as usize);
    for i in lo..0 {
        word.push(past.symbol(i));
    }
    for i in 0..hi {
        word.push(future.symbol(i));
    }
    // align the tails with the new word boundaries
    let left = rotate_tail_left(past, lo);
    let right = rotate_tail_right(future, hi);
    SymbolicPoint { word: word.into(), origin: -lo, left: left.into(), right: right.into() }
}

/// Period word `L'` with `…L'L'` equal to `x` on `(−∞, lo)`.
fn rotate_tail_left(x: &SymbolicPoint, lo: i64) -> Vec<u8> {
    let p = x.left.len() as i64;
    (lo - p..lo).map(|i| x.symbol(i)).collect()
}

/// Period word `R'` with `R'R'…` equal to `x` on `[hi, ∞)`.
fn rotate_tail_right(x: &SymbolicPoint, hi: i64) -> Vec<u8> {
    let p = x.right.len() as i64;
    (hi..hi + p).map(|i| x.symbol(i)).collect()
}

/// Result of gluing: the itinerary of length `Σ|segments| + count·gap`, where
/// each segment starts, and the orbit of the corresponding periodic point.
#[derive(Debug, Clone)]
pub struct GluedOrbit {
    pub itinerary: Vec<u8>,
    pub offsets: Vec<usize>,
    pub points: Vec<SymbolicPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full2() -> Sft {
        Sft::new(&SftSpec { adjacency: vec![vec![1, 1], vec![1, 1]], metric_base: 0.5, mixing: true }).unwrap()
    }
    fn golden() -> Sft {
        Sft::new(&SftSpec { adjacency: vec![vec![1, 1], vec![1, 0]], metric_base: 0.5, mixing: true }).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert_eq!(golden().mixing_time(), Some(2));
        assert_eq!(full2().mixing_time(), Some(1));
        let periodic = SftSpec { adjacency: vec![vec![0, 1], vec![1, 0]], metric_base: 0.5, mixing: true };
        assert_eq!(Sft::new(&periodic).unwrap_err(), Error::NotMixing);
        let dead = SftSpec { adjacency: vec![vec![1, 1], vec![0, 0]], metric_base: 0.5, mixing: false };
        assert!(Sft::new(&dead).is_err());
    }

    #[test]
    fn shift_moves_pattern_right() {
        let f = full2();
        let x = f.point(vec![1], 0, vec![0], vec![0]).unwrap();
        let y = f.iterate(&x, -1);
        assert_eq!(y.symbol(0), 0);
        assert_eq!(y.symbol(1), 1);
        assert_eq!(f.iterate(&y, 1), x);
    }

    #[test]
    fn distance_examples() {
        let f = full2();
        let x = f.periodic_point(&[0]).unwrap();
        let y = f.point(vec![1], 3, vec![0], vec![0]).unwrap();
        assert_eq!(y.symbol(-3), 1);
        assert_eq!(f.distance(&x, &y), 0.125);
        let z = f.point(vec![1], -3, vec![0], vec![0]).unwrap();
        assert_eq!(f.distance(&x, &z), 0.125);
        assert_eq!(f.distance(&x, &x), 0.0);
        // different representations of the same point
        let x2 = f.point(vec![0, 0, 0], 1, vec![0, 0], vec![0]).unwrap();
        assert_eq!(f.distance(&x, &x2), 0.0);
    }

    #[test]
    fn bracket_splices() {
        let f = full2();
        let y = f.point(vec![], 0, vec![1], vec![0]).unwrap();
        let z = f.point(vec![], 0, vec![0], vec![1]).unwrap();
        // these differ at index 0 so use an unbounded radius for the splice itself
        let w = f.bracket(&y, &z, 2.0).unwrap();
        assert_eq!(w, f.periodic_point(&[0]).unwrap());
        let g = golden();
        let y = g.point(vec![1, 0], 0, vec![0], vec![0]).unwrap();
        let z = g.point(vec![1, 0], 1, vec![0], vec![0]).unwrap();
        assert!(matches!(g.bracket(&y, &z, 2.0), Err(Error::InadmissibleSplice { left: 1, right: 1 })));
    }

    #[test]
    fn closing_repeats_word() {
        let f = full2();
        let x = f.point(vec![1, 0, 1, 1], 0, vec![0], vec![0]).unwrap();
        let (p, _) = f.close(&x, 2).unwrap();
        assert_eq!(p, f.periodic_point(&[1, 0]).unwrap());
        assert!(p.is_periodic(2));
        let x = f.periodic_point(&[0, 1, 1]).unwrap();
        let (p, delta) = f.close(&x, 3).unwrap();
        assert_eq!(p, x);
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn cycle_counts_match_traces() {
        for f in [full2(), golden()] {
            for n in 1..=10usize {
                let total: u128 = (1..=n)
                    .filter(|m| n % m == 0)
                    .map(|m| m as u128 * f.cycle_words(m).len() as u128)
                    .sum();
                assert_eq!(total, f.trace_power(n), "n = {n}");
            }
        }
        assert_eq!(golden().cycle_words(2), vec![vec![0, 1]]);
    }

    #[test]
    fn glue_examples() {
        let f = full2();
        let g = f.glue_specification(&[vec![1, 1], vec![0, 0]], 1).unwrap();
        assert_eq!(g.itinerary.len(), 6);
        assert_eq!(&g.itinerary[g.offsets[0]..g.offsets[0] + 2], &[1, 1]);
        assert_eq!(&g.itinerary[g.offsets[1]..g.offsets[1] + 2], &[0, 0]);
        let h = golden();
        let g = h.glue_specification(&[vec![0], vec![0]], 1).unwrap();
        assert_eq!(g.itinerary.len(), 4);
        let mut cyc = g.itinerary.clone();
        cyc.push(cyc[0]);
        assert!(h.word_admissible(&cyc));
        let single = h.glue_specification(&[vec![0, 1, 0, 1]], 2).unwrap();
        assert_eq!(&single.itinerary[..4], &[0, 1, 0, 1]);
    }

    #[test]
    fn parry_stationary_golden() {
        let g = golden();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // π_0 = φ² / (1 + φ²)
        let want = phi * phi / (1.0 + phi * phi);
        assert!((g.parry_stationary[0] - want).abs() < 1e-12);
    }

    #[test]
    fn random_points_are_admissible() {
        use rand::SeedableRng;
        let g = golden();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = g.random_point(&mut rng, 200, 100);
        let w = x.window(-150, 150);
        assert!(g.word_admissible(&w));
    }
}
