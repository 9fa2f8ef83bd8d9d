//! Triggering policies and their decision functions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::aoi::Age;
use crate::error::{Result, VoiError};
use crate::solver::path::PathValueTable;
use crate::solver::restricted::RestrictedValueTable;

/// What the event trigger knows when it decides at time `k`.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub k: usize,
    pub zeta: usize,
    pub eta: Age,
    pub e_tilde: &'a DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub transmit: bool,
    /// Value of information when the policy has one, `NaN` otherwise.
    pub voi: f64,
    /// The mismatch fell outside the solved grid and was clamped.
    pub clamped: bool,
}

impl Decision {
    fn plain(transmit: bool) -> Self {
        Decision {
            transmit,
            voi: f64::NAN,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TriggerPolicy {
    PathVoi(Arc<PathValueTable>),
    RestrictedVoi(Arc<RestrictedValueTable>),
    /// Transmit when `k` is a multiple of the period.
    Periodic(usize),
    /// Transmit when the controller's age reaches the threshold.
    AoiThreshold(usize),
    AlwaysOn,
    Never,
    /// Transmit iff the first mismatch component exceeds `c`. Not symmetric,
    /// so the controller's no-news estimate becomes biased.
    OneSided(f64),
}

impl TriggerPolicy {
    pub fn decide(&self, snap: &Snapshot<'_>) -> Result<Decision> {
        match self {
            TriggerPolicy::PathVoi(table) => {
                if snap.e_tilde.len() != 1 {
                    return Err(VoiError::dim("path VoI snapshot", 1, snap.e_tilde.len()));
                }
                let zeta = snap.zeta.min(table.zeta_cap());
                let (voi, clamped) = table.voi_at(snap.k, zeta, snap.e_tilde[0])?;
                Ok(Decision {
                    transmit: voi >= 0.0,
                    voi,
                    clamped,
                })
            }
            TriggerPolicy::RestrictedVoi(table) => {
                let zeta = snap.zeta.min(table.zeta_cap());
                let voi = table.voi(snap.k, zeta, snap.eta)?;
                Ok(Decision {
                    transmit: voi >= 0.0,
                    voi,
                    clamped: false,
                })
            }
            TriggerPolicy::Periodic(period) => Ok(Decision::plain(snap.k.is_multiple_of(*period))),
            TriggerPolicy::AoiThreshold(h) => Ok(Decision::plain(match snap.eta {
                Age::Finite(e) => e >= *h,
                Age::Infinite => true,
            })),
            TriggerPolicy::AlwaysOn => Ok(Decision::plain(true)),
            TriggerPolicy::Never => Ok(Decision::plain(false)),
            TriggerPolicy::OneSided(c) => Ok(Decision::plain(snap.e_tilde.get(0).is_some_and(|&v| v > *c))),
        }
    }

    pub fn label(&self) -> String {
        PolicySpec::from(self).to_string()
    }

    pub fn uses_voi(&self) -> bool {
        matches!(self, TriggerPolicy::PathVoi(_) | TriggerPolicy::RestrictedVoi(_))
    }
}

/// Policy named on the command line, before any table is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    PathVoi,
    RestrictedVoi,
    Periodic(usize),
    AoiThreshold(usize),
    AlwaysOn,
    Never,
    OneSided(f64),
}

impl PolicySpec {
    pub fn needs_path_table(&self) -> bool {
        matches!(self, PolicySpec::PathVoi)
    }

    pub fn needs_restricted_table(&self) -> bool {
        matches!(self, PolicySpec::RestrictedVoi)
    }

    /// Builds the policy, taking solved tables from the caller when needed.
    pub fn resolve(
        &self,
        path: Option<&Arc<PathValueTable>>,
        restricted: Option<&Arc<RestrictedValueTable>>,
    ) -> Result<TriggerPolicy> {
        Ok(match *self {
            PolicySpec::PathVoi => TriggerPolicy::PathVoi(
                path.cloned()
                    .ok_or_else(|| VoiError::InvalidConfig("path-voi needs a solved path table".into()))?,
            ),
            PolicySpec::RestrictedVoi => TriggerPolicy::RestrictedVoi(
                restricted
                    .cloned()
                    .ok_or_else(|| VoiError::InvalidConfig("restricted-voi needs a solved restricted table".into()))?,
            ),
            PolicySpec::Periodic(p) => TriggerPolicy::Periodic(p),
            PolicySpec::AoiThreshold(h) => TriggerPolicy::AoiThreshold(h),
            PolicySpec::AlwaysOn => TriggerPolicy::AlwaysOn,
            PolicySpec::Never => TriggerPolicy::Never,
            PolicySpec::OneSided(c) => TriggerPolicy::OneSided(c),
        })
    }
}

impl From<&TriggerPolicy> for PolicySpec {
    fn from(p: &TriggerPolicy) -> Self {
        match p {
            TriggerPolicy::PathVoi(_) => PolicySpec::PathVoi,
            TriggerPolicy::RestrictedVoi(_) => PolicySpec::RestrictedVoi,
            TriggerPolicy::Periodic(n) => PolicySpec::Periodic(*n),
            TriggerPolicy::AoiThreshold(h) => PolicySpec::AoiThreshold(*h),
            TriggerPolicy::AlwaysOn => PolicySpec::AlwaysOn,
            TriggerPolicy::Never => PolicySpec::Never,
            TriggerPolicy::OneSided(c) => PolicySpec::OneSided(*c),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::PathVoi => f.write_str("path-voi"),
            PolicySpec::RestrictedVoi => f.write_str("restricted-voi"),
            PolicySpec::Periodic(n) => write!(f, "periodic:{n}"),
            PolicySpec::AoiThreshold(h) => write!(f, "aoi-threshold:{h}"),
            PolicySpec::AlwaysOn => f.write_str("always"),
            PolicySpec::Never => f.write_str("never"),
            PolicySpec::OneSided(c) => write!(f, "one-sided:{c}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = VoiError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            VoiError::InvalidConfig(format!(
                "unknown policy '{s}' (expected path-voi, restricted-voi, periodic:N, \
                 aoi-threshold:N, always, never or one-sided:C)"
            ))
        };
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let int = |a: Option<&str>| -> Result<usize> { a.and_then(|v| v.parse().ok()).ok_or_else(bad) };
        Ok(match name {
            "path-voi" if arg.is_none() => PolicySpec::PathVoi,
            "restricted-voi" if arg.is_none() => PolicySpec::RestrictedVoi,
            "always" if arg.is_none() => PolicySpec::AlwaysOn,
            "never" if arg.is_none() => PolicySpec::Never,
            "periodic" => match int(arg)? {
                0 => return Err(VoiError::InvalidConfig("period must be positive".into())),
                n => PolicySpec::Periodic(n),
            },
            "aoi-threshold" => PolicySpec::AoiThreshold(int(arg)?),
            "one-sided" => {
                let c: f64 = arg.and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                if !c.is_finite() {
                    return Err(bad());
                }
                PolicySpec::OneSided(c)
            }
            _ => return Err(bad()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::solve_riccati;
    use crate::model::ModelSpec;
    use crate::solver::restricted::solve_restricted_dp;

    fn snap(k: usize, zeta: usize, eta: Age, e: &DVector<f64>) -> Snapshot<'_> {
        Snapshot {
            k,
            zeta,
            eta,
            e_tilde: e,
        }
    }

    #[test]
    fn baselines() {
        let e = DVector::from_element(1, 0.3);
        let p = TriggerPolicy::AoiThreshold(5);
        assert!(p.decide(&snap(7, 1, Age::Finite(6), &e)).unwrap().transmit);
        assert!(!p.decide(&snap(7, 1, Age::Finite(4), &e)).unwrap().transmit);
        assert!(p.decide(&snap(0, 0, Age::Infinite, &e)).unwrap().transmit);
        let p = TriggerPolicy::Periodic(10);
        assert!(p.decide(&snap(20, 0, Age::Finite(3), &e)).unwrap().transmit);
        assert!(!p.decide(&snap(21, 0, Age::Finite(3), &e)).unwrap().transmit);
        let p = TriggerPolicy::OneSided(0.5);
        assert!(!p.decide(&snap(3, 0, Age::Finite(3), &e)).unwrap().transmit);
        let big = DVector::from_element(1, 0.6);
        assert!(p.decide(&snap(3, 0, Age::Finite(3), &big)).unwrap().transmit);
        let neg = DVector::from_element(1, -5.0);
        assert!(!p.decide(&snap(3, 0, Age::Finite(3), &neg)).unwrap().transmit);
    }

    #[test]
    fn restricted_never_transmits_at_horizon() {
        let model = ModelSpec::scalar_benchmark().validate().unwrap();
        let sched = solve_riccati(&model).unwrap();
        let table = Arc::new(solve_restricted_dp(&model, &sched).unwrap());
        let p = TriggerPolicy::RestrictedVoi(table);
        let e = DVector::zeros(1);
        let d = p.decide(&snap(200, 2, Age::Finite(40), &e)).unwrap();
        assert!(!d.transmit);
        assert_eq!(d.voi, -10.0);
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            "path-voi",
            "restricted-voi",
            "periodic:10",
            "aoi-threshold:5",
            "always",
            "never",
            "one-sided:0.25",
        ] {
            let p: PolicySpec = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in [
            "",
            "periodic",
            "periodic:0",
            "periodic:x",
            "always:1",
            "one-sided:nan",
            "voi",
        ] {
            assert!(s.parse::<PolicySpec>().is_err(), "{s}");
        }
        assert!(PolicySpec::PathVoi.resolve(None, None).is_err());
    }
}
