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

//! Closed-form bounds on the probability that a set of columns fails to expand.
//!
//! All quantities are kept in log space. A [`BoundResult`] is only turned into
//! a probability on request, clamped to 1.

use num_rational::Ratio;
use statrs::function::factorial::ln_binomial as ln_binomial_f64;

use crate::domain::{BetaMode, BoundConfig, ExpanderParams};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::splitting::{self, BetaParams, NeighborChain};

/// Slack allowed when a computed ratio lands just outside `[0, 1]`.
const DOMAIN_SLACK: f64 = 1e-12;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Shannon entropy in nats, `H(0) = H(1) = 0`.
pub fn entropy<T: Real>(z: T) -> Result<T> {
    if !(z >= T::zero() && z <= T::one()) {
        return domain(format!("entropy argument {z} outside [0, 1]"));
    }
    Ok(h(z))
}

fn h<T: Real>(z: T) -> T {
    if z <= T::zero() || z >= T::one() {
        return T::zero();
    }
    -z * z.ln() - (T::one() - z) * (-z).ln_1p()
}

/// `H'(z) = log((1 - z) / z)` on the open interval.
pub fn entropy_derivative<T: Real>(z: T) -> Result<T> {
    if !(z > T::zero() && z < T::one()) {
        return domain(format!("entropy derivative argument {z} outside (0, 1)"));
    }
    Ok((-z).ln_1p() - z.ln())
}

/// `H(num / den)` for a ratio that should lie in `[0, 1]`; tiny rounding
/// excursions are clamped, a zero denominator gives a zero term.
fn h_ratio<T: Real>(num: T, den: T, what: &str) -> Result<T> {
    if den == T::zero() {
        return Ok(T::zero());
    }
    let z = num / den;
    let slack = T::lit(DOMAIN_SLACK);
    if !(z >= -slack && z <= T::one() + slack) {
        return domain(format!("{what}: entropy argument {z} outside [0, 1]"));
    }
    Ok(h(z.max(T::zero()).min(T::one())))
}

/// `log C(n, k)`.
pub fn ln_binomial<T: Real>(n: u64, k: u64) -> T {
    T::lit(ln_binomial_f64(n, k))
}

/// `P_n(b, b1, b2)`: probability that the union of independent uniform subsets of
/// sizes `b1` and `b2` of `[n]` has exactly `b` elements.
pub fn p_n_intersect<T: Real>(n: u64, b: u64, b1: u64, b2: u64) -> Result<T> {
    if b1 > n || b2 > n || b < b1.max(b2) || b > n.min(b1 + b2) {
        return domain(format!("P_n({b}, {b1}, {b2}) with n = {n} is not admissible"));
    }
    let log = ln_binomial::<f64>(b1, b1 + b2 - b) + ln_binomial::<f64>(n - b1, b - b1)
        - ln_binomial::<f64>(n, b2);
    Ok(T::lit(log.exp()))
}

fn check_triple<T: Real>(n: u64, x: T, y: T, z: T) -> Result<()> {
    let rows = T::from_count(n);
    let tol = T::lit(DOMAIN_SLACK) * rows;
    let ok = y > T::zero()
        && z > T::zero()
        && x <= rows + tol
        && x + tol >= y.max(z)
        && x <= y + z + tol;
    if !ok {
        return domain(format!(
            "(x, y, z) = ({x}, {y}, {z}) needs max(y, z) <= x <= min(n, y + z) with n = {n}"
        ));
    }
    Ok(())
}

/// Polynomial prefactor `π(x, y, z)` with `P_n(x, y, z) <= π e^{ψ_n(x, y, z)}`.
///
/// Cases are matched exactly: `x = y = z`, `x = y + z`, `x = y > z` (or
/// `x = z > y`, using the symmetry of `P_n` in its last two arguments), and
/// the interior `max(y, z) < x < y + z`. Returns `+inf` where the formula
/// divides by zero, which happens only when `x = n`, except for `x = y = z = n`
/// whose law is a point mass and gets `π = 1`.
pub fn pi_poly<T: Real>(n: u64, x: T, y: T, z: T) -> Result<T> {
    check_triple(n, x, y, z)?;
    let rows = T::from_count(n);
    let c = T::lit(1.25);
    let root = |v: T| if v.is_nan() { T::infinity() } else { v.sqrt() };
    if x == y && y == z {
        if z == rows {
            return Ok(T::one());
        }
        return Ok(c.powi(2) * (T::lit(2.0) * T::PI() * z * (rows - z) / rows).sqrt());
    }
    if x == y + z {
        return Ok(c.powi(3) * root((rows - y) * (rows - z) / (rows * (rows - y - z))));
    }
    let (y, z) = if x == z && z > y { (z, y) } else { (y, z) };
    if x == y && y > z {
        return Ok(c.powi(3) * root(y * (rows - z) / (rows * (y - z))));
    }
    if x > y && x > z && x < y + z {
        let num = y * z * (rows - y) * (rows - z);
        let den = T::lit(2.0) * T::PI() * rows * (y + z - x) * (x - y) * (x - z) * (rows - x);
        return Ok(c.powi(4) * root(num / den));
    }
    domain(format!("(x, y, z) = ({x}, {y}, {z}) matches no case of π"))
}

/// `ψ_n(x, y, z) = y H((x - z)/y) + (n - y) H((x - y)/(n - y)) - n H(z/n)`.
pub fn psi_n_exponent<T: Real>(n: u64, x: T, y: T, z: T) -> Result<T> {
    check_triple(n, x, y, z)?;
    let rows = T::from_count(n);
    Ok(y * h_ratio(x - z, y, "psi_n")?
        + (rows - y) * h_ratio(x - y, rows - y, "psi_n")?
        - rows * h_ratio(z, rows, "psi_n")?)
}

/// `ψ_i = ψ_n(a_{2i}, a_i, a_i)`.
pub fn psi_i<T: Real>(n: u64, a_i: T, a_2i: T) -> Result<T> {
    let rows = T::from_count(n);
    let tol = T::lit(DOMAIN_SLACK) * rows;
    if !(a_i > T::zero() && a_2i + tol >= a_i && a_2i <= (a_i + a_i).min(rows) + tol) {
        return domain(format!(
            "psi_i needs a_i <= a_2i <= min(2 a_i, n), got a_i = {a_i}, a_2i = {a_2i}, n = {n}"
        ));
    }
    psi_n_exponent(n, a_2i.max(a_i), a_i, a_i)
}

/// The level terms of a chain and their weighted sum `Σ_{i ∈ Ω} (s / 2i) ψ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTerms<T> {
    /// `(i, ψ_i)` for `i = 1, 2, ..., s/2`.
    pub levels: Vec<(u64, T)>,
    pub weighted_sum: T,
}

pub fn psi_terms<T: Real>(chain: &NeighborChain<T>) -> Result<PsiTerms<T>> {
    let s = chain.s();
    let mut levels = Vec::new();
    let mut weighted_sum = T::zero();
    for (j, w) in chain.entries().windows(2).enumerate() {
        let i = 1u64 << j;
        let psi = psi_i(chain.rows(), w[0], w[1])?;
        weighted_sum = weighted_sum + T::from_count(s / (2 * i)) * psi;
        levels.push((i, psi));
    }
    Ok(PsiTerms { levels, weighted_sum })
}

fn log2<T: Real>(x: T) -> T {
    x.log2()
}

/// `log p_n(s, d) = log(2 / (25 sqrt(2π s^3 d^3)))`.
pub fn log_p_n_old<T: Real>(s: u64, d: u64) -> T {
    let (s, d) = (T::from_count(s), T::from_count(d));
    T::LN_2() - T::lit(25.0).ln()
        - T::lit(0.5) * (T::lit(2.0) * T::PI() * s.powi(3) * d.powi(3)).ln()
}

pub fn p_n_old<T: Real>(s: u64, d: u64) -> T {
    log_p_n_old::<T>(s, d).exp()
}

/// `n Ψ_n = 3 s log(5d) + Σ (s/2i) ψ_i`.
pub fn psi_cap_n_old<T: Real>(chain: &NeighborChain<T>) -> Result<T> {
    let s = T::from_count(chain.s());
    let terms = psi_terms(chain)?;
    Ok(T::lit(3.0) * s * (T::lit(5.0) * chain.first()).ln() + terms.weighted_sum)
}

/// `log p_n(s) = log(2^{-3} s^{9/2} e^{1/4})`.
pub fn log_p_n_new<T: Real>(s: u64) -> T {
    -T::lit(3.0) * T::LN_2() + T::lit(4.5) * T::from_count(s).ln() + T::lit(0.25)
}

pub fn p_n_new<T: Real>(s: u64) -> T {
    log_p_n_new::<T>(s).exp()
}

/// `n Ψ_n = (3 log 2 / 2) log2² s + (log2 s - 3/2) log a_s + Σ (s/2i) ψ_i`,
/// with `a_s` the threshold being bounded.
pub fn psi_cap_n_new<T: Real>(chain: &NeighborChain<T>, a_s: T) -> Result<T> {
    let l = log2(T::from_count(chain.s()));
    let terms = psi_terms(chain)?;
    Ok(T::lit(1.5) * T::LN_2() * l * l + (l - T::lit(1.5)) * a_s.ln() + terms.weighted_sum)
}

/// Which `(p_n, Ψ_n)` pair a dyadic bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVersion {
    /// `p_n = 2/(25 sqrt(2π s³d³))`, exponent with `3 s log(5d)`.
    Old,
    /// `p_n = 2^{-3} s^{9/2} e^{1/4}`, exponent polylogarithmic in `s`.
    New,
}

/// A bound `p · e^{exponent}` held in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult<T> {
    pub log_poly_factor: T,
    /// The exponent already multiplied by its scale (`n` or `N`).
    pub exponent: T,
    pub log_prob_bound: T,
    /// The power-of-two set size the bound was evaluated at.
    pub sparsity: u64,
}

impl<T: Real> BoundResult<T> {
    fn new(log_poly_factor: T, exponent: T, sparsity: u64) -> Result<Self> {
        let log_prob_bound = log_poly_factor + exponent;
        if !log_prob_bound.is_finite() {
            return domain(format!("bound is not finite: log p = {log_poly_factor}, exponent = {exponent}"));
        }
        Ok(Self { log_poly_factor, exponent, log_prob_bound, sparsity })
    }

    pub fn poly_factor(&self) -> T {
        self.log_poly_factor.exp()
    }

    /// `p · e^{exponent}` without clamping; may exceed 1.
    pub fn raw_bound(&self) -> T {
        self.log_prob_bound.exp()
    }

    /// `min(1, p · e^{exponent})`.
    pub fn probability(&self) -> T {
        self.log_prob_bound.min(T::zero()).exp()
    }
}

/// Bound on `Prob(|A_s| <= a_s)` for a fixed set, from a neighbour chain.
///
/// `a_s` is `(1 - ε) d s'` with `s'` the power of two at or above `s`; the chain
/// must be built for `s'` and the same `n` and `d`.
pub fn prob_bound_dyadic<T: Real>(
    params: &ExpanderParams<T>,
    chain: &NeighborChain<T>,
    version: BoundVersion,
) -> Result<BoundResult<T>> {
    let s = splitting::round_up_pow2(params.size.sparsity);
    check_chain(params, chain, s)?;
    let d = params.size.degree;
    match version {
        BoundVersion::Old => BoundResult::new(log_p_n_old(s, d), psi_cap_n_old(chain)?, s),
        BoundVersion::New => {
            let a_s = threshold(params, s);
            BoundResult::new(log_p_n_new(s), psi_cap_n_new(chain, a_s)?, s)
        }
    }
}

fn threshold<T: Real>(params: &ExpanderParams<T>, s: u64) -> T {
    (T::one() - params.epsilon) * T::from_count(params.size.degree) * T::from_count(s)
}

fn check_chain<T: Real>(params: &ExpanderParams<T>, chain: &NeighborChain<T>, s: u64) -> Result<()> {
    let inconsistent = |msg: String| Err(Error::InvalidParams(format!("inconsistent chain: {msg}")));
    if chain.s() != s {
        return inconsistent(format!("chain has s = {}, bound needs {s}", chain.s()));
    }
    if chain.rows() != params.size.rows {
        return inconsistent(format!("chain has n = {}, parameters say {}", chain.rows(), params.size.rows));
    }
    if chain.first() != T::from_count(params.size.degree) {
        return inconsistent(format!("a_1 = {} but d = {}", chain.first(), params.size.degree));
    }
    let target = threshold(params, s);
    if chain.beta() > T::one() && chain.last() > target * (T::one() + T::lit(1e-9)) {
        return inconsistent(format!("constrained a_s = {} exceeds (1 - ε) d s = {target}", chain.last()));
    }
    Ok(())
}

/// Chain used for the fixed-set bound at `(1 - ε) d s'`: the expected chain when
/// the threshold is at or above its last entry, otherwise the constant-`c`
/// chain ending exactly at the threshold.
pub fn bound_chain<T: Real>(params: &ExpanderParams<T>) -> Result<NeighborChain<T>> {
    let s = splitting::round_up_pow2(params.size.sparsity);
    splitting::fitted_chain(params.size.degree, params.size.rows, s, threshold(params, s))
}

/// `β` per the configured mode.
pub fn beta_for<T: Real>(epsilon: T, degree: u64, config: &BoundConfig<T>) -> Result<T> {
    match config.beta_mode {
        BetaMode::ApproxOnePlusEps => Ok(T::one() + epsilon),
        BetaMode::QuadraticRoot => {
            splitting::beta(BetaParams { eps_n: epsilon, alpha: config.alpha, d: degree })
        }
    }
}

/// `τ = η (β - 1) / β`.
pub fn tau<T: Real>(epsilon: T, degree: u64, config: &BoundConfig<T>) -> Result<T> {
    config.validate()?;
    let beta = beta_for(epsilon, degree, config)?;
    Ok(config.eta * (beta - T::one()) / beta)
}

fn pow2_at_least_two<T: Real>(params: &ExpanderParams<T>) -> Result<u64> {
    params.validate()?;
    let s = splitting::round_up_pow2(params.size.sparsity);
    if s < 2 {
        return Err(Error::InvalidParams("closed-form bounds need s >= 2".into()));
    }
    Ok(s)
}

/// `n Ψ_n(s, d, ε) <= -(1/2)[τ(1-ε) d s log2(s/2) - 5 log 2 log2² s - 2 log d log2 s]`.
pub fn psi_cap_n_epsilon<T: Real>(s: u64, d: u64, epsilon: T, tau: T) -> T {
    let l = log2(T::from_count(s));
    let sd = T::from_count(s) * T::from_count(d);
    -T::lit(0.5)
        * (tau * (T::one() - epsilon) * sd * (l - T::one())
            - T::lit(5.0) * T::LN_2() * l * l
            - T::lit(2.0) * T::from_count(d).ln() * l)
}

/// Fixed-set bound at `a_s = (1 - ε) d s` with no chain, independent of `n`.
pub fn prob_bound_epsilon<T: Real>(
    params: &ExpanderParams<T>,
    config: &BoundConfig<T>,
) -> Result<BoundResult<T>> {
    let s = pow2_at_least_two(params)?;
    let d = params.size.degree;
    let eps = params.epsilon;
    let tau = tau(eps, d, config)?;
    let k = T::one() - eps;
    let log_p = T::lit(0.25) + (log2(k) + T::lit(3.0)) * T::from_count(s).ln()
        - T::lit(0.5)
            * (T::lit(6.0) * T::LN_2() + T::lit(3.0) * k.ln() + T::lit(3.0) * T::from_count(d).ln());
    BoundResult::new(log_p, psi_cap_n_epsilon(s, d, eps, tau), s)
}

/// The union-bound exponent `N Ψ_N` with its `o(N)` part kept explicitly.
pub fn psi_cap_big_n<T: Real>(s: u64, big_n: u64, d: u64, epsilon: T, tau: T) -> T {
    let sf = T::from_count(s);
    let l = log2(sf);
    let df = T::from_count(d);
    -sf * (sf / T::from_count(big_n)).ln() + sf
        - tau * (T::one() - epsilon) * df * sf * (sf / T::lit(2.0)).ln() / (T::lit(2.0) * T::LN_2())
        + T::lit(2.5) * T::LN_2() * l * l
        + df.ln() * l
}

/// Bound on the probability that some set of at most `s` columns fails to expand.
pub fn prob_bound_union<T: Real>(
    params: &ExpanderParams<T>,
    config: &BoundConfig<T>,
) -> Result<BoundResult<T>> {
    let s = pow2_at_least_two(params)?;
    let big_n = params.size.columns;
    if s >= big_n {
        return Err(Error::InvalidParams(format!("need s < N, got s = {s} (rounded), N = {big_n}")));
    }
    let d = params.size.degree;
    let eps = params.epsilon;
    let tau = tau(eps, d, config)?;
    let k = T::one() - eps;
    let sf = T::from_count(s);
    let log_p = T::lit(5.0).ln() + T::lit(0.25) + (log2(k) + T::lit(2.5)) * sf.ln()
        - T::lit(0.5)
            * (T::lit(10.0) * T::LN_2()
                + T::lit(3.0) * k.ln()
                + T::lit(3.0) * T::from_count(d).ln()
                + T::PI().ln()
                + (-sf / T::from_count(big_n)).ln_1p());
    BoundResult::new(log_p, psi_cap_big_n(s, big_n, d, eps, tau), s)
}

/// `Σ_{i ∈ Ω} (s / 2i)(a_i / n)`.
pub fn series_sum<T: Real>(chain: &NeighborChain<T>) -> T {
    let s = chain.s();
    let rows = T::from_count(chain.rows());
    chain
        .iter()
        .take_while(|&(i, _)| i < s)
        .map(|(i, a)| T::from_count(s / (2 * i)) * a / rows)
        .fold(T::zero(), |acc, x| acc + x)
}

/// `(log2(s/2) / 2n)(1 - ε) d s`.
pub fn series_lower_bound<T: Real>(s: u64, d: u64, n: u64, epsilon: T) -> T {
    let sf = T::from_count(s);
    log2(sf / T::lit(2.0)) / (T::lit(2.0) * T::from_count(n))
        * (T::one() - epsilon)
        * T::from_count(d)
        * sf
}

/// `-a_i η (β - 1) / (β (1 - β a_i / n))`.
pub fn psi_i_upper<T: Real>(n: u64, a_i: T, beta: T, eta: T) -> T {
    -a_i * eta * (beta - T::one()) / (beta * (T::one() - beta * a_i / T::from_count(n)))
}

/// The `η` at which [`psi_i_upper`] equals `ψ_i` for the step `a_i -> a_{2i}`
/// of a chain with this `β`.
pub fn implied_eta<T: Real>(n: u64, a_i: T, beta: T) -> Result<T> {
    if !(beta > T::one()) {
        return domain("implied eta needs beta > 1");
    }
    let a_2i = a_i * (T::lit(2.0) - beta * a_i / T::from_count(n));
    let psi = psi_i(n, a_i, a_2i)?;
    Ok(psi / psi_i_upper(n, a_i, beta, T::one()))
}

/// Stirling bounds around `C(N, pN)`, as natural logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich<T> {
    pub ln_lower: T,
    pub ln_exact: T,
    pub ln_upper: T,
}

impl<T: Real> Sandwich<T> {
    pub fn lower(&self) -> T {
        self.ln_lower.exp()
    }

    pub fn exact(&self) -> T {
        self.ln_exact.exp()
    }

    pub fn upper(&self) -> T {
        self.ln_upper.exp()
    }

    pub fn holds(&self) -> bool {
        self.ln_lower <= self.ln_exact && self.ln_exact <= self.ln_upper
    }
}

/// `16 e^{NH(p)} / (25 sqrt(2π p(1-p) N)) <= C(N, pN) <= 5 e^{NH(p)} / (4 sqrt(2π p(1-p) N))`.
pub fn binom_sandwich<T: Real>(big_n: u64, p: Ratio<u64>) -> Result<Sandwich<T>> {
    if big_n < 2 {
        return domain("binomial sandwich needs N >= 2");
    }
    let (num, den) = (u128::from(*p.numer()), u128::from(*p.denom()));
    if num == 0 || num >= den {
        return domain(format!("p = {p} must lie in (0, 1)"));
    }
    let scaled = num * u128::from(big_n);
    if scaled % den != 0 {
        return domain(format!("p N = {p} * {big_n} is not an integer"));
    }
    let k = u64::try_from(scaled / den).expect("k <= N");
    let pf = T::lit(num as f64 / den as f64);
    let nf = T::from_count(big_n);
    let core = nf * h(pf) - T::lit(0.5) * (T::lit(2.0) * T::PI() * pf * (T::one() - pf) * nf).ln();
    Ok(Sandwich {
        ln_lower: core + (T::lit(16.0) / T::lit(25.0)).ln(),
        ln_exact: ln_binomial(big_n, k),
        ln_upper: core + T::lit(1.25).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProblemSize;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(entropy(0.5).unwrap(), std::f64::consts::LN_2, epsilon = 1e-16);
        assert!(entropy(1.5).is_err());
        assert!(entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_derivative_matches_finite_differences() {
        let h = 1e-5f64;
        let mut z = 0.05f64;
        while z <= 0.95 {
            let fd = (entropy(z + h).unwrap() - entropy(z - h).unwrap()) / (2.0 * h);
            assert!((entropy_derivative(z).unwrap() - fd).abs() <= 1e-6, "z = {z}");
            assert_relative_eq!(
                entropy_derivative(z).unwrap(),
                -entropy_derivative(1.0 - z).unwrap(),
                epsilon = 1e-12
            );
            z += 0.01;
        }
    }

    #[test]
    fn intersection_law_examples() {
        assert_relative_eq!(p_n_intersect::<f64>(4, 2, 1, 1).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(p_n_intersect::<f64>(4, 1, 1, 1).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(p_n_intersect::<f64>(4, 4, 2, 2).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert!(p_n_intersect::<f64>(4, 5, 2, 3).is_err());
        assert!(p_n_intersect::<f64>(4, 1, 2, 2).is_err());
    }

    #[test]
    fn intersection_law_sums_to_one() {
        for n in 1..=30u64 {
            for b1 in 0..=n {
                for b2 in 0..=n {
                    let total: f64 = (b1.max(b2)..=n.min(b1 + b2))
                        .map(|b| p_n_intersect::<f64>(n, b, b1, b2).unwrap())
                        .sum();
                    assert!((total - 1.0).abs() <= 1e-12, "n={n} b1={b1} b2={b2}: {total}");
                }
            }
        }
    }

    #[test]
    fn intersection_law_is_symmetric() {
        for (b, b1, b2) in [(5, 3, 4), (7, 3, 4), (6, 2, 5)] {
            assert_relative_eq!(
                p_n_intersect::<f64>(12, b, b1, b2).unwrap(),
                p_n_intersect::<f64>(12, b, b2, b1).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn pi_psi_dominate_exact_law() {
        let n = 20u64;
        for y in 1..=n {
            for z in 1..=n {
                for x in y.max(z)..=n.min(y + z) {
                    let exact = p_n_intersect::<f64>(n, x, y, z).unwrap();
                    let (xf, yf, zf) = (x as f64, y as f64, z as f64);
                    let bound = pi_poly(n, xf, yf, zf).unwrap()
                        * psi_n_exponent(n, xf, yf, zf).unwrap().exp();
                    assert!(exact <= bound * (1.0 + 1e-12), "({x},{y},{z}): {exact} > {bound}");
                }
            }
        }
    }

    #[test]
    fn pi_equal_case_formula() {
        let (n, z) = (30u64, 7.0);
        let expect = 1.5625 * (2.0 * std::f64::consts::PI * z * (30.0 - z) / 30.0).sqrt();
        assert_relative_eq!(pi_poly(n, z, z, z).unwrap(), expect, max_relative = 1e-15);
        assert_eq!(pi_poly(n, 30.0, 30.0, 30.0).unwrap(), 1.0);
        assert!(pi_poly(n, 3.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn pi_monotone_on_diagonal() {
        let n = 100u64;
        for y in 1..49 {
            let a = pi_poly(n, y as f64, y as f64, y as f64).unwrap();
            let b = pi_poly(n, y as f64 + 1.0, y as f64 + 1.0, y as f64 + 1.0).unwrap();
            assert!(b > a);
        }
    }

    // Expected size of the union of independent uniform y- and z-subsets of [n].
    fn mean_union(n: f64, y: f64, z: f64) -> f64 {
        y + z - y * z / n
    }

    #[test]
    fn psi_n_orderings_in_the_lower_tail() {
        for n in [60u64, 400] {
            let nf = n as f64;
            for y in 2..n / 2 {
                let yf = y as f64;
                for x in y + 1..2 * y {
                    let xf = x as f64;
                    if xf > mean_union(nf, yf, yf) {
                        continue;
                    }
                    let diag = psi_n_exponent(n, xf, yf, yf).unwrap();
                    if x > y + 1 {
                        let lower = psi_n_exponent(n, xf - 1.0, yf, yf).unwrap();
                        assert!(diag > lower, "increasing in x at n={n} x={x} y={y}");
                    }
                    for z in (x - y).max(1)..y {
                        let zf = z as f64;
                        if xf > mean_union(nf, yf, zf) {
                            continue;
                        }
                        let mid = psi_n_exponent(n, xf, yf, zf).unwrap();
                        assert!(diag <= mid + 1e-12, "n={n} x={x} y={y} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn psi_n_scaling_and_right_ordering_fail_somewhere() {
        // ψ_n(x,y,y) < ψ_n(αx,αy,αy) and ψ_n(x,y,z) <= ψ_n(x,z,z) are not
        // universal: both break on admissible lower-tail points.
        let diag = psi_n_exponent(60, 7.0, 4.0, 4.0).unwrap();
        let scaled = psi_n_exponent(60, 6.3, 3.6, 3.6).unwrap();
        assert!(diag > scaled);
        let mut right_breaks = 0;
        for y in 2..30u64 {
            for x in y + 1..2 * y {
                for z in (x - y).max(1)..y {
                    let (xf, yf, zf) = (x as f64, y as f64, z as f64);
                    if xf <= 2.0 * zf && xf <= mean_union(60.0, yf, zf) {
                        let mid = psi_n_exponent(60, xf, yf, zf).unwrap();
                        let top = psi_n_exponent(60, xf, zf, zf).unwrap();
                        right_breaks += usize::from(mid > top + 1e-12);
                    }
                }
            }
        }
        assert!(right_breaks > 0);
    }

    #[test]
    fn psi_i_without_growth() {
        let (n, a) = (50u64, 10.0);
        let expect = -50.0 * entropy(0.2).unwrap();
        assert_relative_eq!(psi_i(n, a, a).unwrap(), expect, max_relative = 1e-15);
        assert!(psi_i(n, a, 21.0).is_err());
    }

    #[test]
    fn psi_i_vanishes_at_the_expected_step() {
        // the expected union size is the mode of the exponent
        let (n, a) = (200u64, 10.0);
        let a2 = a * (2.0 - a / n as f64);
        assert!(psi_i(n, a, a2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_column_bound_dominates_exact_law() {
        for n in [10u64, 20, 40] {
            for d in 1..=4u64 {
                for a in d..=2 * d {
                    let a = a as f64;
                    let exact: f64 = (d..=2 * d)
                        .filter(|&b| b as f64 <= a)
                        .map(|b| p_n_intersect::<f64>(n, b, d, d).unwrap())
                        .sum();
                    let chain = crate::splitting::fitted_chain::<f64>(d, n, 2, a).unwrap();
                    let new = log_p_n_new::<f64>(2) + psi_cap_n_new(&chain, a).unwrap();
                    let old = log_p_n_old::<f64>(2, d) + psi_cap_n_old(&chain).unwrap();
                    assert!(exact <= new.exp(), "new n={n} d={d} a={a}");
                    assert!(exact <= old.exp(), "old n={n} d={d} a={a}");
                }
            }
        }
    }

    #[test]
    fn new_exponent_overhead_is_polylog() {
        let (s, d, eps) = (1u64 << 10, 32u64, 1.0 / 6.0);
        let a_s = (1.0 - eps) * (d * s) as f64;
        let l = 10.0f64;
        let new = 1.5 * std::f64::consts::LN_2 * l * l + (l - 1.5) * a_s.ln();
        let old = 3.0 * s as f64 * (5.0 * d as f64).ln();
        assert!(new < old);
    }

    fn params(s: u64, n: u64, big_n: u64, d: u64, eps: f64) -> ExpanderParams<f64> {
        ExpanderParams::new(ProblemSize::new(s, n, big_n, d), eps)
    }

    #[test]
    fn new_dyadic_bound_beats_old_for_large_s() {
        for log_s in 6..=10u32 {
            let s = 1u64 << log_s;
            for d in [8u64, 16, 32] {
                for eps in [1.0 / 6.0, 0.25] {
                    let p = params(s, 1 << 20, 1 << 22, d, eps);
                    let chain = bound_chain(&p).unwrap();
                    let new = prob_bound_dyadic(&p, &chain, BoundVersion::New).unwrap();
                    let old = prob_bound_dyadic(&p, &chain, BoundVersion::Old).unwrap();
                    assert!(new.log_prob_bound <= old.log_prob_bound, "s={s} d={d}");
                }
            }
        }
    }

    #[test]
    fn dyadic_bound_rejects_mismatched_chain() {
        let p = params(4, 40, 200, 4, 1.0 / 6.0);
        let wrong_s = crate::splitting::expected_chain::<f64>(4, 40, 8).unwrap();
        assert!(prob_bound_dyadic(&p, &wrong_s, BoundVersion::New).is_err());
        let wrong_n = crate::splitting::expected_chain::<f64>(4, 41, 4).unwrap();
        assert!(prob_bound_dyadic(&p, &wrong_n, BoundVersion::New).is_err());
        let too_big = crate::splitting::constrained_chain::<f64>(4, 40, 4, 1.01).unwrap();
        assert!(prob_bound_dyadic(&p, &too_big, BoundVersion::Old).is_err());
    }

    #[test]
    fn rounding_up_s() {
        let p = params(3, 40, 200, 4, 0.25);
        let chain = bound_chain(&p).unwrap();
        assert_eq!(chain.s(), 4);
        let b = prob_bound_dyadic(&p, &chain, BoundVersion::New).unwrap();
        assert_eq!(b.sparsity, 4);
        assert!(b.probability() <= 1.0);
    }

    #[test]
    fn epsilon_bound_decreases_in_d() {
        let mut last = f64::INFINITY;
        for d in [8u64, 16, 32, 64] {
            let p = params(16, 1 << 16, 1 << 20, d, 1.0 / 6.0);
            let b = prob_bound_epsilon(&p, &BoundConfig::default()).unwrap();
            assert!(b.exponent < last, "d = {d}");
            last = b.exponent;
        }
    }

    #[test]
    fn epsilon_bound_degenerates_as_eps_vanishes() {
        let p = params(16, 1 << 12, 1 << 14, 8, 1e-9);
        let b = prob_bound_epsilon(&p, &BoundConfig::default()).unwrap();
        assert!(b.exponent > 0.0);
        assert_eq!(b.probability(), 1.0);
    }

    #[test]
    fn quadratic_beta_mode_runs() {
        let config = BoundConfig { beta_mode: BetaMode::QuadraticRoot, ..BoundConfig::default() };
        let p = params(64, 1 << 16, 1 << 20, 32, 1.0 / 6.0);
        let b = prob_bound_epsilon(&p, &config).unwrap();
        assert!(b.log_prob_bound.is_finite());
        assert!(tau(1.0 / 6.0, 32, &config).unwrap() > 0.0);
    }

    #[test]
    fn union_bound_dominates_fixed_set_bound() {
        for log_s in 1..=8u32 {
            for d in [4u64, 16, 32] {
                for eps in [1.0 / 6.0, 0.25] {
                    let s = 1u64 << log_s;
                    let p = params(s, 1 << 18, 1 << 20, d, eps);
                    let config = BoundConfig::default();
                    let union = prob_bound_union(&p, &config).unwrap();
                    let fixed = prob_bound_epsilon(&p, &config).unwrap();
                    assert!(union.log_prob_bound >= fixed.log_prob_bound, "s={s} d={d}");
                }
            }
        }
    }

    #[test]
    fn union_exponent_falls_without_bound_in_d() {
        let config = BoundConfig::default();
        let exps: Vec<f64> = [16u64, 64, 256, 1024]
            .iter()
            .map(|&d| {
                let p = params(64, 1 << 20, 1 << 22, d, 0.25);
                prob_bound_union(&p, &config).unwrap().exponent
            })
            .collect();
        assert!(exps.windows(2).all(|w| w[1] < w[0]));
        assert!(exps[3] < -1e3);
    }

    #[test]
    fn union_bound_needs_s_below_n() {
        let p = params(16, 16, 16, 2, 0.25);
        assert!(prob_bound_union(&p, &BoundConfig::default()).is_err());
        let p = params(1, 16, 32, 2, 0.25);
        assert!(prob_bound_union(&p, &BoundConfig::default()).is_err());
    }

    #[test]
    fn sandwich_spot_values() {
        let sw = binom_sandwich::<f64>(10, Ratio::new(1, 2)).unwrap();
        assert!((sw.lower() - 165.4).abs() < 0.1, "{}", sw.lower());
        assert_relative_eq!(sw.exact(), 252.0, max_relative = 1e-13);
        assert!((sw.upper() - 322.98).abs() < 0.1, "{}", sw.upper());
        assert_relative_eq!(sw.ln_upper - sw.ln_lower, (125.0f64 / 64.0).ln(), epsilon = 1e-12);
        assert!(binom_sandwich::<f64>(10, Ratio::new(1, 3)).is_err());
        assert!(binom_sandwich::<f64>(10, Ratio::new(1, 1)).is_err());
    }

    #[test]
    fn sandwich_holds_up_to_2000() {
        for (num, den) in [(1u64, 4u64), (1, 2), (3, 4)] {
            for big_n in (2..=2000u64).filter(|n| n * num % den == 0) {
                let sw = binom_sandwich::<f64>(big_n, Ratio::new(num, den)).unwrap();
                assert!(sw.holds(), "N={big_n} p={num}/{den}");
            }
        }
    }

    #[test]
    fn prop_6_3_bound_and_implied_eta() {
        for (d, n, beta) in [(4u64, 1000u64, 1.1), (8, 10_000, 1.25), (32, 1_000_000, 7.0 / 6.0)] {
            let chain = crate::splitting::constrained_chain::<f64>(d, n, 64, beta).unwrap();
            for &a in &chain.entries()[..chain.entries().len() - 1] {
                let a2 = a * (2.0 - beta * a / n as f64);
                assert!(psi_i(n, a, a2).unwrap() <= 0.0);
                let eta = implied_eta(n, a, beta).unwrap();
                let x2 = a / n as f64;
                let x3 = beta * x2;
                let x1 = x2 * (1.0 - beta * x2) / (1.0 - x2);
                assert!(eta > 0.0 && eta <= x3 - x1, "eta={eta}, x3-x1={}", x3 - x1);
                assert_relative_eq!(
                    psi_i_upper(n, a, beta, eta),
                    psi_i(n, a, a2).unwrap(),
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn series_bound_on_constrained_chains() {
        for (d, n, eps) in [(8u64, 1_000_000u64, 1.0 / 6.0), (32, 1_000_000, 0.25)] {
            for log_s in 2..=10u32 {
                let s = 1u64 << log_s;
                let target = (1.0 - eps) * (d * s) as f64;
                let chain = crate::splitting::fitted_chain::<f64>(d, n, s, target).unwrap();
                let covered = chain.iter().all(|(i, a)| a >= (1.0 - eps) * (d * i) as f64 - 1e-9);
                if covered {
                    assert!(series_sum(&chain) >= series_lower_bound(s, d, n, eps) * (1.0 - 1e-12));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(z in 0.0f64..=1.0) {
            prop_assert!((entropy(z).unwrap() - entropy(1.0 - z).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn bounds_are_probabilities(
            log_s in 1u32..12, d in 2u64..64, eps in 0.01f64..0.49, eta in 0.1f64..3.0,
        ) {
            let s = 1u64 << log_s;
            let n = (d * s * 4).max(64);
            let p = params(s, n, n * 8, d, eps);
            let config = BoundConfig { eta, ..BoundConfig::default() };
            for b in [prob_bound_epsilon(&p, &config).unwrap(), prob_bound_union(&p, &config).unwrap()] {
                prop_assert!(b.log_prob_bound.is_finite());
                let prob = b.probability();
                prop_assert!((0.0..=1.0).contains(&prob));
            }
        }
    }
}
