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

//! Problem-size and configuration types shared by every other module.
//!
//! These are plain values; the only logic here is invariant checking. Each
//! `validate` reports the first violated invariant in declaration order.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dimensions of a sparse binary matrix experiment.
///
/// `sparsity` is the column-set size `s`, `rows` is `n`, `columns` is `N` and
/// `degree` is the number of ones per column `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemSize {
    pub sparsity: u64,
    pub rows: u64,
    pub columns: u64,
    pub degree: u64,
}

impl ProblemSize {
    pub fn new(sparsity: u64, rows: u64, columns: u64, degree: u64) -> Self {
        Self { sparsity, rows, columns, degree }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.sparsity == 0 {
            return fail("s must be positive");
        }
        if self.rows == 0 {
            return fail("n must be positive");
        }
        if self.columns == 0 {
            return fail("N must be positive");
        }
        if self.degree == 0 {
            return fail("d must be positive");
        }
        if self.degree > self.rows {
            return fail("d exceeds n");
        }
        if self.sparsity > self.columns {
            return fail("s exceeds N");
        }
        if self.rows > self.columns {
            return fail("n exceeds N");
        }
        Ok(())
    }
}

/// An `(s, d, epsilon)` expansion target in an `n x N` ambient size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpanderParams<T> {
    pub size: ProblemSize,
    pub epsilon: T,
}

impl<T: Real> ExpanderParams<T> {
    pub fn new(size: ProblemSize, epsilon: T) -> Self {
        Self { size, epsilon }
    }

    /// `(1 - epsilon) d s`, the neighbour count every `s`-set must reach.
    pub fn target_neighbors(&self) -> T {
        (T::one() - self.epsilon)
            * T::from_count(self.size.degree)
            * T::from_count(self.size.sparsity)
    }

    pub fn validate(&self) -> Result<()> {
        self.size.validate()?;
        let half = T::lit(0.5);
        if !(self.epsilon > T::zero() && self.epsilon < half) {
            return Err(Error::InvalidParams("epsilon out of range".into()));
        }
        // The lower end d <= a_s holds automatically for s >= 2 once epsilon < 1/2;
        // s = 1 is allowed so that single-column sets can be certified.
        let target = self.target_neighbors();
        if target > T::from_count(self.size.rows) {
            return Err(Error::InvalidParams("target neighbour count exceeds n".into()));
        }
        Ok(())
    }
}

/// Which root of the beta quadratic feeds `tau = eta (beta - 1) / beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaMode {
    /// `beta = 1 + epsilon`.
    #[default]
    ApproxOnePlusEps,
    /// The "+" root of the quadratic, with `epsilon_n = epsilon`.
    QuadraticRoot,
}

/// Tunable constants of the closed-form bounds and the phase-transition curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig<T> {
    pub eta: T,
    pub alpha: T,
    pub c_n: T,
    pub nu: T,
    pub beta_mode: BetaMode,
}

impl<T: Real> Default for BoundConfig<T> {
    fn default() -> Self {
        Self {
            eta: T::one(),
            alpha: T::one(),
            c_n: T::lit(2.0),
            nu: T::one(),
            beta_mode: BetaMode::ApproxOnePlusEps,
        }
    }
}

impl<T: Real> BoundConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.eta > T::zero()) {
            return fail("eta must be positive");
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return fail("alpha out of range (0, 1]");
        }
        if !(self.c_n > T::zero()) {
            return fail("c_n must be positive");
        }
        if !(self.nu > T::zero()) {
            return fail("nu must be positive");
        }
        Ok(())
    }
}

/// Limits `s/n -> rho` and `n/N -> delta` of proportional growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRatios<T> {
    pub rho: T,
    pub delta: T,
}

impl<T: Real> AsymptoticRatios<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x > T::zero() && x < T::one();
        if !unit(self.rho) {
            return Err(Error::InvalidParams("rho out of range (0, 1)".into()));
        }
        if !unit(self.delta) {
            return Err(Error::InvalidParams("delta out of range (0, 1)".into()));
        }
        Ok(())
    }
}

/// Checks every invariant of an [`ExpanderParams`].
pub fn validate<T: Real>(params: &ExpanderParams<T>) -> Result<()> {
    params.validate()
}
