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

//! Random sparse binary matrices as lossless expanders.
//!
//! The crate samples `n x N` matrices with `d` ones per column, certifies
//! expansion exactly on small instances, evaluates dyadic-splitting bounds on
//! the probability that expansion fails, and computes phase-transition curves
//! for the construction and for sparse-recovery conditions.
//!
//! Real-valued code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

// `!(x >= y)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod domain;
pub mod ensemble;
pub mod error;
pub mod phase_transition;
pub mod scalar;
pub mod splitting;

pub use domain::{BetaMode, ProblemSize};
pub use ensemble::{CertificationReport, Seed, SparseBinaryMatrix};
pub use error::{Error, Result};
pub use scalar::Real;

pub type ExpanderParams = domain::ExpanderParams<f64>;
pub type BoundConfig = domain::BoundConfig<f64>;
pub type AsymptoticRatios = domain::AsymptoticRatios<f64>;
pub type NeighborChain = splitting::NeighborChain<f64>;
pub type BetaParams = splitting::BetaParams<f64>;
pub type BoundResult = bounds::BoundResult<f64>;
pub type PsiTerms = bounds::PsiTerms<f64>;
pub type PTCurve = phase_transition::PTCurve<f64>;
