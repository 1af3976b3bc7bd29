// SPDX-License-Identifier: Apache-2.0

//! Finite epistemic state spaces, experimental contexts with knowability
//! levels, amplitude propagation, contextual Hilbert spaces and a numerical
//! check that `|a|²` is the only workable amplitude-to-probability map.

pub mod context;
pub mod evolution;
pub mod exact;
pub mod hilbert;
pub mod statespace;
pub mod uniqueness;
