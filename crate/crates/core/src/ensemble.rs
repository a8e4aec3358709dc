// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Sparse binary matrices drawn from the `d`-ones-per-column ensemble.
//!
//! Everything stochastic here is driven by a [`Seed`]: trial `t` of any Monte
//! Carlo routine draws from its own ChaCha stream, so results do not depend on
//! how rayon splits the work.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::domain::{ExpanderParams, ProblemSize};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of column sets an exhaustive routine may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 100_000_000;

/// Seed for every stochastic operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    /// Generator for stream `stream`. Stream 0 is used by [`sample`]; Monte Carlo
    /// trial `t` uses stream `t + 1`.
    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

/// An `n x N` 0/1 matrix with exactly `d` ones in every column, stored by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    columns: usize,
    degree: usize,
    // column j occupies indices[j * degree..(j + 1) * degree], sorted ascending
    indices: Vec<usize>,
}

impl SparseBinaryMatrix {
    /// Builds a matrix from explicit column row-lists, checking every invariant.
    pub fn from_columns(rows: usize, degree: usize, columns: &[Vec<usize>]) -> Result<Self> {
        if degree == 0 || degree > rows {
            return Err(Error::InvalidParams(format!(
                "degree {degree} must lie in 1..={rows}"
            )));
        }
        let mut indices = Vec::with_capacity(columns.len() * degree);
        for (j, col) in columns.iter().enumerate() {
            check_column(col, rows, degree)
                .map_err(|msg| Error::InvalidParams(format!("column {j}: {msg}")))?;
            indices.extend_from_slice(col);
        }
        Ok(Self { rows, columns: columns.len(), degree, indices })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Sorted row indices of column `j`.
    pub fn column(&self, j: usize) -> &[usize] {
        &self.indices[j * self.degree..(j + 1) * self.degree]
    }

    pub fn iter_columns(&self) -> impl Iterator<Item = &[usize]> {
        self.indices.chunks_exact(self.degree)
    }

    /// Serialises to the text format: a `N n d` header, then one line per column.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.indices.len() * 4 + 32);
        let _ = writeln!(out, "{} {} {}", self.columns, self.rows, self.degree);
        for col in self.iter_columns() {
            for (k, r) in col.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{r}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format written by [`SparseBinaryMatrix::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        if text.contains('\r') {
            return Err(parse_err(1, "CR characters are not allowed".into()));
        }
        if !text.ends_with('\n') {
            return Err(parse_err(text.lines().count().max(1), "missing final LF".into()));
        }
        let lines: Vec<&str> = text[..text.len() - 1].split('\n').collect();
        let fields = |line_no: usize, line: &str| -> Result<Vec<usize>> {
            if line.is_empty() {
                return Err(parse_err(line_no, "empty line".into()));
            }
            if line.starts_with(' ') || line.ends_with(' ') || line.contains("  ") {
                return Err(parse_err(line_no, "stray whitespace".into()));
            }
            line.split(' ')
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("not an integer: {tok:?}")))
                })
                .collect()
        };
        let header = fields(1, lines[0])?;
        let [big_n, n, d] = header[..] else {
            return Err(parse_err(1, "header must be `N n d`".into()));
        };
        if lines.len() != big_n + 1 {
            return Err(parse_err(
                lines.len().min(big_n + 1) + 1,
                format!("expected {big_n} column lines, found {}", lines.len() - 1),
            ));
        }
        if d == 0 || d > n {
            return Err(parse_err(1, format!("degree {d} must lie in 1..={n}")));
        }
        let mut indices = Vec::with_capacity(big_n * d);
        for (k, line) in lines[1..].iter().enumerate() {
            let col = fields(k + 2, line)?;
            check_column(&col, n, d).map_err(|msg| parse_err(k + 2, msg))?;
            indices.extend_from_slice(&col);
        }
        Ok(Self { rows: n, columns: big_n, degree: d, indices })
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    fn row_bitsets(&self) -> Vec<RowSet> {
        self.iter_columns().map(|col| RowSet::from_rows(self.rows, col)).collect()
    }
}

fn check_column(col: &[usize], rows: usize, degree: usize) -> std::result::Result<(), String> {
    if col.len() != degree {
        return Err(format!("expected {degree} row indices, found {}", col.len()));
    }
    if let Some(&r) = col.iter().find(|&&r| r >= rows) {
        return Err(format!("row index {r} out of range for {rows} rows"));
    }
    if col.windows(2).any(|w| w[0] >= w[1]) {
        return Err("row indices must be strictly ascending".into());
    }
    Ok(())
}

/// Fixed-width bitset over the rows of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RowSet(Vec<u64>);

impl RowSet {
    fn empty(rows: usize) -> Self {
        Self(vec![0; rows.div_ceil(64)])
    }

    fn from_rows(rows: usize, set: &[usize]) -> Self {
        let mut out = Self::empty(rows);
        for &r in set {
            out.0[r / 64] |= 1 << (r % 64);
        }
        out
    }

    fn union_into(&self, other: &Self, out: &mut Self) {
        for ((o, a), b) in out.0.iter_mut().zip(&self.0).zip(&other.0) {
            *o = a | b;
        }
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Uniform `d`-subset of `0..buf.len()` by a partial Fisher-Yates shuffle of `buf`.
///
/// `buf` must hold a permutation of `0..n`; it is left permuted.
fn draw_column<R: Rng>(rng: &mut R, buf: &mut [usize], degree: usize, out: &mut Vec<usize>) {
    let n = buf.len();
    for i in 0..degree {
        let k = rng.random_range(i..n);
        buf.swap(i, k);
    }
    out.clear();
    out.extend_from_slice(&buf[..degree]);
    out.sort_unstable();
}

fn draw_columns<R: Rng>(rng: &mut R, rows: usize, degree: usize, count: usize) -> Vec<usize> {
    let mut buf: Vec<usize> = (0..rows).collect();
    let mut col = Vec::with_capacity(degree);
    let mut indices = Vec::with_capacity(count * degree);
    for _ in 0..count {
        draw_column(rng, &mut buf, degree, &mut col);
        indices.extend_from_slice(&col);
    }
    indices
}

fn to_usize(x: u64, what: &str) -> Result<usize> {
    usize::try_from(x).map_err(|_| Error::InvalidParams(format!("{what} too large to sample")))
}

/// Draws an `n x N` matrix with `d` uniformly placed ones in every column.
pub fn sample(size: &ProblemSize, seed: Seed) -> Result<SparseBinaryMatrix> {
    size.validate()?;
    let rows = to_usize(size.rows, "n")?;
    let columns = to_usize(size.columns, "N")?;
    let degree = to_usize(size.degree, "d")?;
    let mut rng = seed.rng(0);
    let indices = draw_columns(&mut rng, rows, degree, columns);
    Ok(SparseBinaryMatrix { rows, columns, degree, indices })
}

/// `|Γ(S)|`: the number of rows with a nonzero in at least one column of `set`.
pub fn neighbors(matrix: &SparseBinaryMatrix, set: &[usize]) -> Result<usize> {
    if let Some(&index) = set.iter().find(|&&j| j >= matrix.columns) {
        return Err(Error::IndexOutOfRange { index, columns: matrix.columns });
    }
    let mut seen = vec![false; matrix.rows];
    let mut count = 0;
    for &j in set {
        for &r in matrix.column(j) {
            if !seen[r] {
                seen[r] = true;
                count += 1;
            }
        }
    }
    Ok(count)
}

/// `Σ_{k=1..s} C(N, k)`, saturating.
pub fn subsets_up_to(columns: u64, s: u64) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 1..=s.min(columns) {
        binom = binom.saturating_mul(u128::from(columns - k + 1)) / u128::from(k);
        total = total.saturating_add(binom);
    }
    total
}

fn check_budget(columns: u64, s: u64, top_level_only: bool, budget: u128) -> Result<u128> {
    let needed = if top_level_only {
        subsets_up_to(columns, s) - subsets_up_to(columns, s.saturating_sub(1))
    } else {
        subsets_up_to(columns, s)
    };
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed)
}

/// Options for [`certify_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertifyOptions {
    /// Only examine sets of size exactly `s`.
    pub top_level_only: bool,
    pub budget: u128,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { top_level_only: false, budget: DEFAULT_ENUMERATION_BUDGET }
    }
}

/// Outcome of an exhaustive expansion check.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub is_expander: bool,
    /// A set minimising `|Γ(S)| / ((1 - ε) d |S|)`; ties go to the smaller,
    /// then lexicographically first, set.
    pub worst_set: Vec<usize>,
    pub worst_ratio: f64,
    pub sets_checked: u128,
}

/// Exhaustively checks `|Γ(S)| >= (1 - ε) d |S|` for every `S` with `|S| <= s`.
pub fn certify<T: Real>(
    matrix: &SparseBinaryMatrix,
    params: &ExpanderParams<T>,
) -> Result<CertificationReport> {
    certify_with(matrix, params, CertifyOptions::default())
}

pub fn certify_with<T: Real>(
    matrix: &SparseBinaryMatrix,
    params: &ExpanderParams<T>,
    options: CertifyOptions,
) -> Result<CertificationReport> {
    let size = &params.size;
    if size.rows != matrix.rows as u64
        || size.columns != matrix.columns as u64
        || size.degree != matrix.degree as u64
    {
        return Err(Error::InvalidParams(format!(
            "matrix is {}x{} with d={}, parameters say {}x{} with d={}",
            matrix.rows, matrix.columns, matrix.degree, size.rows, size.columns, size.degree
        )));
    }
    if size.sparsity == 0 || size.sparsity > size.columns {
        return Err(Error::InvalidParams("s must lie in 1..=N".into()));
    }
    let eps = params.epsilon.as_f64();
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParams("epsilon out of range".into()));
    }
    check_budget(size.columns, size.sparsity, options.top_level_only, options.budget)?;

    let s = size.sparsity as usize;
    let per_column = (1.0 - eps) * matrix.degree as f64;
    let bitsets = matrix.row_bitsets();
    let partials: Vec<Worst> = (0..matrix.columns)
        .into_par_iter()
        .map(|first| {
            let mut walker = SubsetWalker::new(&bitsets, matrix.rows, s);
            let mut worst = Worst::default();
            walker.walk_from(first, &mut |set, count| {
                if options.top_level_only && set.len() != s {
                    return false;
                }
                worst.offer(set, count, per_column);
                false
            });
            worst
        })
        .collect();
    let mut worst = Worst::default();
    for part in partials {
        worst.merge(part);
    }
    let worst_set = worst.set;
    let is_expander = worst.violated == 0;
    Ok(CertificationReport {
        is_expander,
        worst_ratio: worst.ratio,
        worst_set,
        sets_checked: worst.checked,
    })
}

#[derive(Debug, Clone)]
struct Worst {
    ratio: f64,
    set: Vec<usize>,
    checked: u128,
    violated: u128,
}

impl Default for Worst {
    fn default() -> Self {
        Self { ratio: f64::INFINITY, set: Vec::new(), checked: 0, violated: 0 }
    }
}

impl Worst {
    fn offer(&mut self, set: &[usize], count: usize, per_column: f64) {
        self.checked += 1;
        let threshold = per_column * set.len() as f64;
        if (count as f64) < threshold {
            self.violated += 1;
        }
        let ratio = count as f64 / threshold;
        if self.better(ratio, set) {
            self.ratio = ratio;
            self.set.clear();
            self.set.extend_from_slice(set);
        }
    }

    fn better(&self, ratio: f64, set: &[usize]) -> bool {
        if self.set.is_empty() {
            return true;
        }
        match ratio.partial_cmp(&self.ratio) {
            Some(std::cmp::Ordering::Less) => true,
            Some(std::cmp::Ordering::Equal) => {
                (set.len(), set) < (self.set.len(), self.set.as_slice())
            }
            _ => false,
        }
    }

    fn merge(&mut self, other: Worst) {
        self.checked += other.checked;
        self.violated += other.violated;
        if !other.set.is_empty() && self.better(other.ratio, &other.set) {
            self.ratio = other.ratio;
            self.set = other.set;
        }
    }
}

/// Depth-first enumeration of column subsets of size `1..=max_size` in
/// lexicographic order, carrying the running union of row sets.
struct SubsetWalker<'a> {
    bitsets: &'a [RowSet],
    max_size: usize,
    stack: Vec<RowSet>,
    set: Vec<usize>,
}

impl<'a> SubsetWalker<'a> {
    fn new(bitsets: &'a [RowSet], rows: usize, max_size: usize) -> Self {
        Self {
            bitsets,
            max_size,
            stack: (0..max_size).map(|_| RowSet::empty(rows)).collect(),
            set: Vec::with_capacity(max_size),
        }
    }

    /// Visits every subset whose smallest element is `first`. The visitor gets
    /// the set and its neighbour count and returns `true` to stop early.
    /// Returns `true` if stopped.
    fn walk_from<F>(&mut self, first: usize, visit: &mut F) -> bool
    where
        F: FnMut(&[usize], usize) -> bool,
    {
        self.set.clear();
        self.set.push(first);
        self.stack[0].0.copy_from_slice(&self.bitsets[first].0);
        self.descend(visit)
    }

    fn descend<F>(&mut self, visit: &mut F) -> bool
    where
        F: FnMut(&[usize], usize) -> bool,
    {
        let depth = self.set.len() - 1;
        if visit(&self.set, self.stack[depth].count()) {
            return true;
        }
        if self.set.len() == self.max_size {
            return false;
        }
        let last = *self.set.last().expect("nonempty");
        for next in last + 1..self.bitsets.len() {
            let (lo, hi) = self.stack.split_at_mut(depth + 1);
            lo[depth].union_into(&self.bitsets[next], &mut hi[0]);
            self.set.push(next);
            let stop = self.descend(visit);
            self.set.pop();
            if stop {
                return true;
            }
        }
        false
    }
}

/// A Monte Carlo frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// `sqrt(p(1-p)/trials)`, or the rule-of-three `3/trials` when `p` is 0 or 1.
    pub std_error: f64,
    pub hits: u64,
    pub trials: u64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let t = trials as f64;
        let p = hits as f64 / t;
        let std_error = if hits == 0 || hits == trials {
            3.0 / t
        } else {
            (p * (1.0 - p) / t).sqrt()
        };
        Self { estimate: p, std_error, hits, trials }
    }
}

/// Monte Carlo estimate of `Prob(|A_s| <= a_s)`.
///
/// With `fixed_set` the event concerns the first `s` columns only. Otherwise a
/// trial counts as a hit when some set `S` with `|S| <= s` has
/// `|Γ(S)| <= a_s |S| / s` (the threshold scaled to the set size), which is
/// decided by exhaustive enumeration of each sampled matrix.
pub fn mc_tail(
    size: &ProblemSize,
    a_s: f64,
    fixed_set: bool,
    trials: u64,
    seed: Seed,
) -> Result<McEstimate> {
    mc_tail_with_budget(size, a_s, fixed_set, trials, seed, DEFAULT_ENUMERATION_BUDGET)
}

pub fn mc_tail_with_budget(
    size: &ProblemSize,
    a_s: f64,
    fixed_set: bool,
    trials: u64,
    seed: Seed,
    budget: u128,
) -> Result<McEstimate> {
    size.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let rows = to_usize(size.rows, "n")?;
    let degree = to_usize(size.degree, "d")?;
    let s = to_usize(size.sparsity, "s")?;
    let hits = if fixed_set {
        (0..trials)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = seed.rng(t + 1);
                let indices = draw_columns(&mut rng, rows, degree, s);
                (count_rows(rows, &indices) as f64) <= a_s
            })
            .count() as u64
    } else {
        check_budget(size.columns, size.sparsity, false, budget)?;
        let columns = to_usize(size.columns, "N")?;
        (0..trials)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = seed.rng(t + 1);
                let indices = draw_columns(&mut rng, rows, degree, columns);
                let bitsets: Vec<RowSet> = indices
                    .chunks_exact(degree)
                    .map(|c| RowSet::from_rows(rows, c))
                    .collect();
                let mut walker = SubsetWalker::new(&bitsets, rows, s);
                let per_column = a_s / s as f64;
                (0..columns).any(|first| {
                    walker.walk_from(first, &mut |set, count| {
                        count as f64 <= per_column * set.len() as f64
                    })
                })
            })
            .count() as u64
    };
    Ok(McEstimate::from_counts(hits, trials))
}

fn count_rows(rows: usize, indices: &[usize]) -> usize {
    let mut seen = RowSet::empty(rows);
    for &r in indices {
        seen.0[r / 64] |= 1 << (r % 64);
    }
    seen.count()
}

/// Histogram of `|A_s|` for the first `s` columns over `trials` draws;
/// entry `k` counts trials with exactly `k` neighbours.
pub fn mc_neighbor_histogram(size: &ProblemSize, trials: u64, seed: Seed) -> Result<Vec<u64>> {
    size.validate()?;
    let rows = to_usize(size.rows, "n")?;
    let degree = to_usize(size.degree, "d")?;
    let s = to_usize(size.sparsity, "s")?;
    let bins = (degree * s).min(rows) + 1;
    let hist = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut acc, t| {
                let mut rng = seed.rng(t + 1);
                let indices = draw_columns(&mut rng, rows, degree, s);
                acc[count_rows(rows, &indices)] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(hist)
}

/// Extremes of `‖(A/d) x‖₁ / ‖x‖₁` over random `s`-sparse vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rip1Range {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Empirical RIP-1 ratios: supports uniform among `s`-subsets, values standard normal.
pub fn rip1_ratio(
    matrix: &SparseBinaryMatrix,
    s: usize,
    trials: u64,
    seed: Seed,
) -> Result<Rip1Range> {
    if s == 0 || s > matrix.columns {
        return Err(Error::InvalidParams(format!(
            "s = {s} must lie in 1..={}",
            matrix.columns
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let (min_ratio, max_ratio) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.rng(t + 1);
            let mut support: Vec<usize> = (0..matrix.columns).collect();
            let mut values = Vec::with_capacity(s);
            for i in 0..s {
                let k = rng.random_range(i..matrix.columns);
                support.swap(i, k);
                values.push(rng.sample::<f64, _>(StandardNormal));
            }
            let r = l1_ratio(matrix, &support[..s], &values);
            (r, r)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    Ok(Rip1Range { min_ratio, max_ratio })
}

/// `‖A x‖₁ / (d ‖x‖₁)` for `x` supported on `support` with the given values.
pub fn l1_ratio(matrix: &SparseBinaryMatrix, support: &[usize], values: &[f64]) -> f64 {
    let mut y = vec![0.0; matrix.rows];
    for (&j, &v) in support.iter().zip(values) {
        for &r in matrix.column(j) {
            y[r] += v;
        }
    }
    let num: f64 = y.iter().map(|v| v.abs()).sum();
    let den: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * matrix.degree as f64;
    num / den
}
