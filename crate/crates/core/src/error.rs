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

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set violates one of its type invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A function was called outside its mathematical domain.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("column index {index} out of range for {columns} columns")]
    IndexOutOfRange { index: usize, columns: usize },

    /// Exhaustive enumeration would visit more sets than allowed.
    #[error("enumeration budget exceeded: {needed} sets needed, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    /// A constrained neighbour chain stopped growing.
    #[error("chain collapse at level {level}: a_{{2i}} = {next} does not exceed a_i = {current}")]
    ChainCollapse { level: usize, current: f64, next: f64 },

    #[error("negative discriminant {0} in beta quadratic")]
    NegativeDiscriminant(f64),

    #[error("malformed matrix file, line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
