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

//! Phase-transition curves `ρ(δ)` for the construction, for two earlier
//! constructions, and for the expansion conditions of recovery algorithms.

use rayon::prelude::*;

use crate::bounds;
use crate::domain::{AsymptoticRatios, BoundConfig, ExpanderParams, ProblemSize};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const GRID_POINTS: usize = 100;
pub const SCAN_POINTS: usize = 10_000;
pub const MAX_BISECTIONS: u32 = 200;
pub const RHO_MIN: f64 = 1e-12;

/// Residual tolerance for roots: `1e-12`, widened for low-precision scalars.
pub fn default_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::lit(1e3) * T::epsilon())
}

/// `-ρ log(δρ) + ρ - τ(1-ε)dρ log(δρ)/(2 log 2) - τε(1-ε)d/(2 c_n log 2) + τ(1-ε)dρ/2`.
pub fn f_bt_tau<T: Real>(rho: T, delta: T, d: u64, epsilon: T, tau: T, c_n: T) -> T {
    let k = tau * (T::one() - epsilon) * T::from_count(d);
    let l = (delta * rho).ln();
    let two_ln2 = T::lit(2.0) * T::LN_2();
    -rho * l + rho - k * rho * l / two_ln2 - k * epsilon / (c_n * two_ln2)
        + k * rho / T::lit(2.0)
}

pub fn f_bt<T: Real>(rho: T, delta: T, d: u64, epsilon: T, config: &BoundConfig<T>) -> Result<T> {
    let tau = bounds::tau(epsilon, d, config)?;
    Ok(f_bt_tau(rho, delta, d, epsilon, tau, config.c_n))
}

/// `(εd - 1) log ρ - log δ + (1 + εd) - εd log(ε/d)`.
pub fn f_bi<T: Real>(rho: T, delta: T, d: u64, epsilon: T) -> T {
    let ed = epsilon * T::from_count(d);
    (ed - T::one()) * rho.ln() - delta.ln() + (T::one() + ed)
        - ed * (epsilon / T::from_count(d)).ln()
}

/// `(εd - 1) log ρ - log δ + 1 - εd log(νε/d)`.
pub fn f_bm<T: Real>(rho: T, delta: T, d: u64, epsilon: T, nu: T) -> T {
    let ed = epsilon * T::from_count(d);
    (ed - T::one()) * rho.ln() - delta.ln() + T::one()
        - ed * (nu * epsilon / T::from_count(d)).ln()
}

/// Result of a root solve at one `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootReport<T> {
    /// `None` when the scan found no sign change.
    pub rho: Option<T>,
    pub residual: Option<T>,
    pub iterations: u32,
}

impl<T: Real> RootReport<T> {
    pub fn bracket_found(&self) -> bool {
        self.rho.is_some()
    }

    fn unsolved() -> Self {
        Self { rho: None, residual: None, iterations: 0 }
    }
}

fn scan_point<T: Real>(k: usize) -> T {
    let lo = T::lit(RHO_MIN).ln();
    let hi = (-T::lit(RHO_MIN)).ln_1p();
    let t = T::lit(k as f64 / (SCAN_POINTS - 1) as f64);
    (lo + t * (hi - lo)).exp()
}

/// Smallest root of `f` on `[1e-12, 1 - 1e-12]`: a log-spaced scan locates the
/// first sign change, then bisection runs until `|f| <= tol` or 200 steps.
pub fn solve_rho<T: Real, F: Fn(T) -> T>(f: F) -> RootReport<T> {
    solve_rho_with(f, default_tolerance())
}

pub fn solve_rho_with<T: Real, F: Fn(T) -> T>(f: F, tol: T) -> RootReport<T> {
    let mut prev_x = scan_point::<T>(0);
    let mut prev_f = f(prev_x);
    if prev_f == T::zero() {
        return RootReport { rho: Some(prev_x), residual: Some(prev_f), iterations: 0 };
    }
    for k in 1..SCAN_POINTS {
        let x = scan_point::<T>(k);
        let fx = f(x);
        if fx == T::zero() {
            return RootReport { rho: Some(x), residual: Some(fx), iterations: 0 };
        }
        if prev_f.is_finite() && fx.is_finite() && (prev_f < T::zero()) != (fx < T::zero()) {
            return bisect(&f, (prev_x, prev_f), (x, fx), tol);
        }
        prev_x = x;
        prev_f = fx;
    }
    RootReport::unsolved()
}

fn bisect<T: Real, F: Fn(T) -> T>(f: &F, mut lo: (T, T), mut hi: (T, T), tol: T) -> RootReport<T> {
    let mut best = if lo.1.abs() <= hi.1.abs() { lo } else { hi };
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS && best.1.abs() > tol {
        let mid = (lo.0 + hi.0) / T::lit(2.0);
        if mid <= lo.0 || mid >= hi.0 {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if (fm < T::zero()) == (lo.1 < T::zero()) {
            lo = (mid, fm);
        } else {
            hi = (mid, fm);
        }
    }
    RootReport { rho: Some(best.0), residual: Some(best.1), iterations }
}

/// `δ_i = 10^{-6 (1 - i/99)}`, `i = 0..99`.
pub fn delta_grid<T: Real>() -> Vec<T> {
    (0..GRID_POINTS)
        .map(|i| {
            let e = -6.0 * (1.0 - i as f64 / (GRID_POINTS - 1) as f64);
            T::lit(10f64.powf(e))
        })
        .collect()
}

/// The construction whose transition a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    /// The dyadic-splitting construction.
    Bt,
    /// Berinde's bound.
    Bi,
    /// Buhrman et al.'s bound, with `ν` from the config.
    Bm,
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::Bt => "BT",
            CurveKind::Bi => "BI",
            CurveKind::Bm => "BM",
        }
    }
}

/// `ρ` over the standard `δ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PTCurve<T> {
    pub label: String,
    pub delta: Vec<T>,
    pub points: Vec<RootReport<T>>,
}

impl<T: Real> PTCurve<T> {
    pub fn rho(&self) -> Vec<Option<T>> {
        self.points.iter().map(|p| p.rho).collect()
    }

    fn scaled(mut self, label: String, divisor: T) -> Self {
        self.label = label;
        for p in &mut self.points {
            p.rho = p.rho.map(|r| r / divisor);
        }
        self
    }
}

fn check_curve_inputs<T: Real>(d: u64, epsilon: T, config: &BoundConfig<T>) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParams("d must be positive".into()));
    }
    if !(epsilon > T::zero() && epsilon < T::lit(0.5)) {
        return Err(Error::InvalidParams("epsilon out of range".into()));
    }
    config.validate()
}

fn solve_grid<T: Real, F: Fn(T, T) -> T + Sync>(label: &str, f: F) -> PTCurve<T> {
    let delta = delta_grid::<T>();
    let points = delta.par_iter().map(|&dl| solve_rho(|rho| f(rho, dl))).collect();
    PTCurve { label: label.to_string(), delta, points }
}

pub fn curve<T: Real>(
    kind: CurveKind,
    d: u64,
    epsilon: T,
    config: &BoundConfig<T>,
) -> Result<PTCurve<T>> {
    check_curve_inputs(d, epsilon, config)?;
    Ok(match kind {
        CurveKind::Bt => {
            let tau = bounds::tau(epsilon, d, config)?;
            let c_n = config.c_n;
            solve_grid(kind.label(), |rho, dl| f_bt_tau(rho, dl, d, epsilon, tau, c_n))
        }
        CurveKind::Bi => solve_grid(kind.label(), |rho, dl| f_bi(rho, dl, d, epsilon)),
        CurveKind::Bm => {
            let nu = config.nu;
            solve_grid(kind.label(), |rho, dl| f_bm(rho, dl, d, epsilon, nu))
        }
    })
}

/// `ρ_BT(δ)` at a single `δ`.
pub fn rho_bt<T: Real>(delta: T, d: u64, epsilon: T, config: &BoundConfig<T>) -> Result<RootReport<T>> {
    check_curve_inputs(d, epsilon, config)?;
    let tau = bounds::tau(epsilon, d, config)?;
    Ok(solve_rho(|rho| f_bt_tau(rho, delta, d, epsilon, tau, config.c_n)))
}

/// Whether `ρ < (1 - γ) ρ_BT(δ)`; `None` when the curve is unsolved at `δ`.
pub fn below_curve<T: Real>(
    ratios: &AsymptoticRatios<T>,
    d: u64,
    epsilon: T,
    config: &BoundConfig<T>,
    gamma: T,
) -> Result<Option<bool>> {
    ratios.validate()?;
    let root = rho_bt(ratios.delta, d, epsilon, config)?;
    Ok(root.rho.map(|r| ratios.rho < (T::one() - gamma) * r))
}

/// Recovery algorithms whose guarantees need a `(k, d, ε_k)` expander.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ssmp,
    Er,
    Eiht,
    Eld,
    L1Min,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Ssmp, Algorithm::Er, Algorithm::Eiht, Algorithm::Eld, Algorithm::L1Min];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ssmp => "SSMP",
            Algorithm::Er => "ER",
            Algorithm::Eiht => "EIHT",
            Algorithm::Eld => "ELD",
            Algorithm::L1Min => "L1MIN",
        }
    }
}

/// Expansion requirement of one algorithm: `ε_k` at set size `k = k_multiplier · s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoCondition<T> {
    pub name: Algorithm,
    pub epsilon_k: T,
    pub k_multiplier: T,
    pub slack: T,
}

impl<T: Real> AlgoCondition<T> {
    /// Conditions with slack `e`; `ssmp_k` is 3 or `2 + e`.
    pub fn table(e: T, ssmp_k: T) -> Vec<Self> {
        let c = |name, eps: f64, sub: bool, k: T| AlgoCondition {
            name,
            epsilon_k: if sub { T::lit(eps) - e } else { T::lit(eps) },
            k_multiplier: k,
            slack: e,
        };
        vec![
            c(Algorithm::Ssmp, 1.0 / 16.0, true, ssmp_k),
            c(Algorithm::Er, 0.25, true, T::lit(2.0)),
            c(Algorithm::Eiht, 1.0 / 12.0, true, T::lit(3.0)),
            c(Algorithm::Eld, 0.25, false, T::one()),
            c(Algorithm::L1Min, 1.0 / 6.0, true, T::lit(2.0)),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_k > T::zero() && self.epsilon_k < T::lit(0.5)) {
            return Err(Error::InvalidParams(format!("{}: epsilon_k out of range", self.name.label())));
        }
        if !(self.k_multiplier >= T::one()) {
            return Err(Error::InvalidParams(format!("{}: k multiplier below 1", self.name.label())));
        }
        Ok(())
    }
}

/// `ρ_alg(δ) = ρ_BT(δ; d, ε_k) / k_multiplier` for every algorithm, in table order.
pub fn algo_curves<T: Real>(
    d: u64,
    e: T,
    ssmp_k: T,
    config: &BoundConfig<T>,
) -> Result<Vec<PTCurve<T>>> {
    AlgoCondition::table(e, ssmp_k)
        .into_iter()
        .map(|cond| {
            cond.validate()?;
            let bt = curve(CurveKind::Bt, d, cond.epsilon_k, config)?;
            Ok(bt.scaled(cond.name.label().to_string(), cond.k_multiplier))
        })
        .collect()
}

/// Outcome of the finite-size feasibility test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility<T> {
    pub feasible: bool,
    /// `-exponent`: positive exactly when feasible.
    pub margin: T,
    /// `N Ψ_N` of the union bound.
    pub exponent: T,
    pub log_prob_bound: T,
    /// `2 log 2 (log(N/s) + 1) / (τ (1 - ε) log(s/2))`: the degree above which
    /// the bound's leading terms turn negative.
    pub d_threshold: T,
    /// `c_n s log(N/s) / ε²`.
    pub n_threshold: T,
}

/// Whether the union bound certifies expansion with probability tending to 1:
/// true iff its exponent `N Ψ_N` is negative.
pub fn feasible<T: Real>(
    s: u64,
    n: u64,
    big_n: u64,
    d: u64,
    epsilon: T,
    config: &BoundConfig<T>,
) -> Result<Feasibility<T>> {
    if s < 4 {
        return Err(Error::InvalidParams("feasibility needs s >= 4".into()));
    }
    if s >= big_n {
        return Err(Error::InvalidParams("feasibility needs s < N".into()));
    }
    let params = ExpanderParams::new(ProblemSize::new(s, n, big_n, d), epsilon);
    let bound = bounds::prob_bound_union(&params, config)?;
    let s_used = T::from_count(bound.sparsity);
    let ratio = T::from_count(big_n) / s_used;
    let tau = bounds::tau(epsilon, d, config)?;
    let d_threshold = T::lit(2.0) * T::LN_2() * (ratio.ln() + T::one())
        / (tau * (T::one() - epsilon) * (s_used / T::lit(2.0)).ln());
    let n_threshold = config.c_n * s_used * ratio.ln() / (epsilon * epsilon);
    Ok(Feasibility {
        feasible: bound.exponent < T::zero(),
        margin: -bound.exponent,
        exponent: bound.exponent,
        log_prob_bound: bound.log_prob_bound,
        d_threshold,
        n_threshold,
    })
}
