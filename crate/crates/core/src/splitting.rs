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

//! Dyadic splitting: how a column set halves level by level, and the neighbour
//! counts `a_1, a_2, a_4, ..., a_s` attached to each level.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sizes produced at level `j` when `s` columns are split in halves repeatedly.
///
/// Level `j` has `q` sets of `big_q` columns and `r` sets of `big_r` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub level: u32,
    pub big_q: u64,
    pub big_r: u64,
    pub q: u64,
    pub r: u64,
}

/// Number of splitting levels, `max(1, ceil(log2 s))`.
fn levels(s: u64) -> u32 {
    if s <= 1 {
        1
    } else {
        u64::BITS - (s - 1).leading_zeros()
    }
}

pub fn split_counts(s: u64, level: u32) -> Result<SplitCounts> {
    if s == 0 {
        return Err(Error::InvalidParams("s must be positive".into()));
    }
    if level >= levels(s) {
        return Err(Error::InvalidParams(format!(
            "level {level} out of range for s = {s} (at most {})",
            levels(s) - 1
        )));
    }
    let width = 1u64 << level;
    let big_q = s.div_ceil(width);
    let q = s + width - width * big_q;
    Ok(SplitCounts { level, big_q, big_r: big_q - 1, q, r: width - q })
}

pub fn is_power_of_two(s: u64) -> bool {
    s.is_power_of_two()
}

/// Smallest power of two that is at least `s`.
pub fn round_up_pow2(s: u64) -> u64 {
    s.max(1).next_power_of_two()
}

/// Neighbour counts `a_{2^j}` for `j = 0..=log2 s`, produced by
/// `a_{2i} = 2 a_i + c a_i^2` with `c = -beta / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborChain<T> {
    s: u64,
    rows: u64,
    entries: Vec<T>,
    beta: T,
}

impl<T: Real> NeighborChain<T> {
    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// The chain constant `c = -beta / n`.
    pub fn c(&self) -> T {
        -self.beta / T::from_count(self.rows)
    }

    /// `a_1 = d`.
    pub fn first(&self) -> T {
        self.entries[0]
    }

    /// `a_s`.
    pub fn last(&self) -> T {
        *self.entries.last().expect("chains are never empty")
    }

    /// `a_i`, for `i` a power of two not exceeding `s`.
    pub fn get(&self, i: u64) -> Option<T> {
        if !i.is_power_of_two() || i > self.s {
            return None;
        }
        self.entries.get(i.trailing_zeros() as usize).copied()
    }

    /// `(i, a_i)` for `i = 1, 2, 4, ..., s`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, T)> + '_ {
        self.entries.iter().enumerate().map(|(j, &a)| (1u64 << j, a))
    }

    /// `a_{2^j}` for `j = 0..=log2 s`.
    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

fn check_chain_inputs(d: u64, n: u64, s: u64) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::InvalidParams(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    if !s.is_power_of_two() {
        return Err(Error::InvalidParams(format!("s = {s} is not a power of two")));
    }
    Ok(())
}

fn build_chain<T: Real>(d: u64, n: u64, s: u64, beta: T) -> NeighborChain<T> {
    let rows = T::from_count(n);
    let two = T::lit(2.0);
    let mut entries = Vec::with_capacity(s.trailing_zeros() as usize + 1);
    let mut a = T::from_count(d);
    entries.push(a);
    for _ in 0..s.trailing_zeros() {
        a = a * (two - beta * a / rows);
        entries.push(a);
    }
    NeighborChain { s, rows: n, entries, beta }
}

/// Expected neighbour counts `â_{2i} = â_i (2 - â_i / n)`, `â_1 = d`.
pub fn expected_chain<T: Real>(d: u64, n: u64, s: u64) -> Result<NeighborChain<T>> {
    check_chain_inputs(d, n, s)?;
    Ok(build_chain(d, n, s, T::one()))
}

/// Chain with `c = -beta / n`. Requires `beta >= 1` and `beta d < n`; the latter
/// keeps every `a_i` below the fixed point `n / beta`, so the chain grows strictly.
pub fn constrained_chain<T: Real>(d: u64, n: u64, s: u64, beta: T) -> Result<NeighborChain<T>> {
    check_chain_inputs(d, n, s)?;
    if !(beta >= T::one()) || !beta.is_finite() {
        return Err(Error::InvalidParams(format!("beta = {beta} must be finite and >= 1")));
    }
    let a1 = T::from_count(d);
    if s > 1 && beta * a1 >= T::from_count(n) {
        let next = a1 * (T::lit(2.0) - beta * a1 / T::from_count(n));
        return Err(Error::ChainCollapse { level: 0, current: a1.as_f64(), next: next.as_f64() });
    }
    Ok(build_chain(d, n, s, beta))
}

/// Chain whose last entry equals `target`.
///
/// When `target >= â_s` the expected chain is returned unchanged. Otherwise
/// `beta` is found by bisection on `[1, n/d]`, over which `a_s` decreases from
/// `â_s` to `d`; `target = d` gives the flat chain at `beta = n/d`.
pub fn fitted_chain<T: Real>(d: u64, n: u64, s: u64, target: T) -> Result<NeighborChain<T>> {
    let expected = expected_chain::<T>(d, n, s)?;
    if s == 1 || target >= expected.last() {
        return Ok(expected);
    }
    let a1 = T::from_count(d);
    if !(target >= a1) {
        return Err(Error::Domain(format!(
            "target a_s = {target} is below a_1 = {d} for s = {s}"
        )));
    }
    let mut hi = T::from_count(n) / a1;
    if target == a1 {
        return Ok(build_chain(d, n, s, hi));
    }
    let mut lo = T::one();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if build_chain(d, n, s, mid).last() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(build_chain(d, n, s, lo))
}

/// Parameters of the `beta` quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams<T> {
    pub eps_n: T,
    pub alpha: T,
    pub d: u64,
}

impl<T: Real> BetaParams<T> {
    fn x(&self) -> T {
        (-self.alpha * T::from_count(self.d)).exp()
    }

    pub fn discriminant(&self) -> T {
        let x = self.x();
        let one_minus = T::one() - self.eps_n;
        T::one() - T::lit(4.0) * one_minus * one_minus * (T::one() - x) * x
    }
}

/// The "+" root of `(1 - eps_n)(1 - x) beta^2 - beta + (1 - eps_n) x = 0`,
/// `x = exp(-alpha d)`.
pub fn beta<T: Real>(params: BetaParams<T>) -> Result<T> {
    let BetaParams { eps_n, alpha, d } = params;
    if !(eps_n >= T::zero() && eps_n < T::one()) {
        return Err(Error::InvalidParams(format!("eps_n = {eps_n} must lie in [0, 1)")));
    }
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if d == 0 {
        return Err(Error::InvalidParams("d must be positive".into()));
    }
    let disc = params.discriminant();
    if disc < T::zero() {
        return Err(Error::NegativeDiscriminant(disc.as_f64()));
    }
    let x = params.x();
    Ok((T::one() + disc.sqrt()) / (T::lit(2.0) * (T::one() - eps_n) * (T::one() - x)))
}

/// Left-hand side of the `beta` quadratic at `beta`.
pub fn beta_quadratic_residual<T: Real>(params: BetaParams<T>, beta: T) -> T {
    let x = params.x();
    let k = T::one() - params.eps_n;
    k * (T::one() - x) * beta * beta - beta + k * x
}

/// `a_{2i}^3 - 2 a_i a_{2i}^2 + 2 a_i^2 a_{2i} - a_i^2 a_{4i}`.
pub fn cubic_residual<T: Real>(a_i: T, a_2i: T, a_4i: T) -> T {
    let two = T::lit(2.0);
    a_2i * a_2i * a_2i - two * a_i * a_2i * a_2i + two * a_i * a_i * a_2i - a_i * a_i * a_4i
}

/// [`cubic_residual`] divided by the sum of the magnitudes of its four terms.
pub fn cubic_residual_relative<T: Real>(a_i: T, a_2i: T, a_4i: T) -> T {
    let two = T::lit(2.0);
    let scale = a_2i * a_2i * a_2i
        + two * a_i * a_2i * a_2i
        + two * a_i * a_i * a_2i
        + a_i * a_i * a_4i;
    if scale == T::zero() {
        return T::zero();
    }
    cubic_residual(a_i, a_2i, a_4i).abs() / scale
}

/// Largest relative cubic residual over consecutive triples of the chain.
pub fn max_cubic_residual<T: Real>(chain: &NeighborChain<T>) -> T {
    chain
        .entries
        .windows(3)
        .map(|w| cubic_residual_relative(w[0], w[1], w[2]))
        .fold(T::zero(), T::max)
}

/// Largest deviation from `c a_{2^l} + 1 = (c a_1 + 1)^{2^l}`, each measured
/// relative to `|c a_{2^l}| + 1`.
pub fn max_induction_residual<T: Real>(chain: &NeighborChain<T>) -> T {
    let c = chain.c();
    let base = c * chain.first() + T::one();
    let mut power = base;
    let mut worst = T::zero();
    for (l, &a) in chain.entries.iter().enumerate() {
        if l > 0 {
            power = power * power;
        }
        let lhs = c * a + T::one();
        let err = (lhs - power).abs() / ((c * a).abs() + T::one());
        worst = worst.max(err);
    }
    worst
}

/// Closed form `a_{2^l} = (n / beta)(1 - (1 - beta d / n)^{2^l})`.
pub fn closed_form<T: Real>(d: u64, n: u64, beta: T, level: u32) -> T {
    let rows = T::from_count(n);
    let q = T::one() - beta * T::from_count(d) / rows;
    rows / beta * (T::one() - q.powf(T::lit(2f64.powi(level as i32))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn split_examples() {
        let c = split_counts(5, 1).unwrap();
        assert_eq!((c.big_q, c.big_r, c.q, c.r), (3, 2, 1, 1));
        let c = split_counts(8, 1).unwrap();
        assert_eq!((c.big_q, c.q, c.r), (4, 2, 0));
        let c = split_counts(1, 0).unwrap();
        assert_eq!((c.big_q, c.q, c.r), (1, 1, 0));
        assert!(split_counts(8, 3).is_err());
        assert!(split_counts(5, 3).is_err());
        split_counts(5, 2).unwrap();
    }

    #[test]
    fn split_counts_partition_s() {
        for s in 1..=4096u64 {
            for level in 0..levels(s) {
                let c = split_counts(s, level).unwrap();
                assert_eq!(c.q * c.big_q + c.r * c.big_r, s, "s={s} j={level}");
                assert!(c.q >= 1 && c.q <= 1 << level);
            }
        }
    }

    #[test]
    fn expected_chain_values() {
        let c = expected_chain::<f64>(2, 10, 2).unwrap();
        assert_relative_eq!(c.last(), 3.6, epsilon = 1e-14);
        let c = expected_chain::<f64>(4, 100, 4).unwrap();
        assert_relative_eq!(c.get(2).unwrap(), 7.84, epsilon = 1e-13);
        assert_relative_eq!(c.get(4).unwrap(), 15.065344, epsilon = 1e-12);
        assert_eq!(c.get(3), None);
        let full = expected_chain::<f64>(7, 7, 16).unwrap();
        assert!(full.entries().iter().all(|&a| a == 7.0));
    }

    #[test]
    fn beta_one_matches_expected_chain() {
        let e = expected_chain::<f64>(4, 100, 64).unwrap();
        let c = constrained_chain(4, 100, 64, 1.0).unwrap();
        assert_eq!(e, c);
        assert_relative_eq!(c.c(), -0.01);
    }

    #[test]
    fn cubic_examples() {
        assert_eq!(cubic_residual(1.0, 2.0, 4.0), 0.0);
        assert_eq!(cubic_residual(1.0, 1.0, 1.0), 0.0);
        assert!(cubic_residual_relative(4.0, 7.84, 15.065344) < 1e-14);
    }

    #[test]
    fn collapse_is_reported() {
        assert!(matches!(
            constrained_chain(10, 20, 4, 2.0),
            Err(Error::ChainCollapse { level: 0, .. })
        ));
        assert!(constrained_chain(10, 20, 4, 1.9).is_ok());
        assert!(constrained_chain(10, 20, 4, 0.5).is_err());
    }

    #[test]
    fn beta_examples() {
        for d in [1u64, 2, 8, 32] {
            let b = beta(BetaParams { eps_n: 0.0, alpha: 1.0, d }).unwrap();
            assert_relative_eq!(b, 1.0, epsilon = 1e-15);
        }
        let p = BetaParams { eps_n: 1.0f64 / 6.0, alpha: 1.0, d: 32 };
        let b = beta(p).unwrap();
        assert!(b > 1.0);
        assert!(beta_quadratic_residual(p, b).abs() < 1e-12);
        let b_small = beta(BetaParams { eps_n: 1e-9, alpha: 1.0, d: 8 }).unwrap();
        assert_relative_eq!(b_small, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn fitted_chain_hits_target() {
        let chain = fitted_chain::<f64>(4, 40, 4, 40.0 / 3.0).unwrap();
        assert_relative_eq!(chain.last(), 40.0 / 3.0, max_relative = 1e-12);
        assert!(chain.beta() > 1.0);
        let unconstrained = fitted_chain::<f64>(4, 40, 4, 16.0).unwrap();
        assert_eq!(unconstrained.beta(), 1.0);
        assert!(fitted_chain::<f64>(4, 40, 4, 3.0).is_err());
        let flat = fitted_chain::<f64>(4, 40, 4, 4.0).unwrap();
        assert!(flat.entries().iter().all(|&a| a == 4.0));
    }

    #[test]
    fn closed_form_agrees() {
        let chain = constrained_chain(4, 1000, 256, 1.3).unwrap();
        for (l, &a) in chain.entries().iter().enumerate() {
            assert_relative_eq!(a, closed_form(4, 1000, 1.3, l as u32), max_relative = 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let c = expected_chain::<f32>(4, 100, 4).unwrap();
        assert!((c.last() - 15.065344).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn beta_is_at_least_one_and_solves_quadratic(
            eps_n in 0.0f64..0.99, alpha in 0.01f64..=1.0, d in 1u64..64,
        ) {
            let p = BetaParams { eps_n, alpha, d };
            let b = beta(p).unwrap();
            prop_assert!(b >= 1.0 - 1e-12, "beta = {b}");
            let scale = b * b + b + 1.0;
            prop_assert!(beta_quadratic_residual(p, b).abs() <= 1e-12 * scale);
        }

        #[test]
        fn constrained_chains_solve_the_cubic_system(
            d in 1u64..40, n in 100u64..100_000, log_s in 0u32..11, extra in 0.0f64..1.0,
        ) {
            let beta_max = n as f64 / d as f64;
            let b = 1.0 + extra * (beta_max.min(4.0) - 1.0) * 0.99;
            let s = 1u64 << log_s;
            let chain = constrained_chain(d, n, s, b).unwrap();
            prop_assert!(max_cubic_residual(&chain) <= 1e-9);
            prop_assert!(max_induction_residual(&chain) <= 1e-9);
            for (i, a) in chain.iter() {
                prop_assert!(a <= (n as f64).min((d * i) as f64) * (1.0 + 1e-12));
            }
            for w in chain.entries().windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }
}
