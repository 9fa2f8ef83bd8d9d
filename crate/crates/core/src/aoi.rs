//! Age of information at the event trigger (`zeta`) and at the controller
//! (`eta`).

use serde::{Deserialize, Serialize};
use std::fmt;

/// An age that may be infinite. The controller starts with no observation at
/// all, which is represented by [`Age::Infinite`] rather than a large number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Age {
    Finite(usize),
    Infinite,
}

impl Age {
    pub fn succ(self) -> Age {
        match self {
            Age::Finite(a) => Age::Finite(a + 1),
            Age::Infinite => Age::Infinite,
        }
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Age::Finite(a) => Some(a),
            Age::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Age::Infinite)
    }

    /// CSV encoding: the age itself, or -1 for infinity.
    pub fn to_signed(self) -> i64 {
        match self {
            Age::Finite(a) => a as i64,
            Age::Infinite => -1,
        }
    }

    pub fn from_signed(v: i64) -> Age {
        if v < 0 {
            Age::Infinite
        } else {
            Age::Finite(v as usize)
        }
    }
}

impl fmt::Display for Age {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Age::Finite(a) => write!(f, "{a}"),
            Age::Infinite => f.write_str("inf"),
        }
    }
}

/// Trigger-side age update. Returns the new age and whether the delayed
/// output `x_{k - tau}` was informative (fresher than what the trigger holds).
pub fn update_zeta(zeta_prev: usize, tau: usize) -> (usize, bool) {
    if tau < zeta_prev + 1 {
        (tau, true)
    } else {
        (zeta_prev + 1, false)
    }
}

/// Controller-side age update after the previous transmission decision.
pub fn update_eta(eta_prev: Age, zeta_prev: usize, delta_prev: bool) -> Age {
    if delta_prev {
        Age::Finite(zeta_prev + 1)
    } else {
        eta_prev.succ()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AoiState {
    pub zeta: usize,
    pub eta: Age,
}

impl AoiState {
    /// Ages at time 0: the trigger holds `x_0`, the controller holds nothing.
    pub fn initial() -> Self {
        AoiState {
            zeta: 0,
            eta: Age::Infinite,
        }
    }

    /// Ages at `k + 1` from the ages at `k`, the decision `delta_k` and the
    /// delay `tau_{k+1}`. Also reports informativeness of the new output.
    pub fn advance(self, delta: bool, tau_next: usize) -> (AoiState, bool) {
        let eta = update_eta(self.eta, self.zeta, delta);
        let (zeta, informative) = update_zeta(self.zeta, tau_next);
        (AoiState { zeta, eta }, informative)
    }
}
