//! Model coefficients and classification of the control regime they imply.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance under which `d1 == d2` and `a1 == a2` are treated as equal.
const SYMMETRY_RTOL: f64 = 1e-12;

/// Coefficients of the two-species competition system on `(0, length)`.
///
/// ```text
/// u_t = d1 u_xx + u (a1 - b1 u - c1 v) [+ h u]
/// v_t = d2 v_xx + v (a2 - b2 u - c2 v) [+ h v]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub length: f64,
    /// Support `(lo, hi)` of the interior control.
    pub omega: (f64, f64),
}

impl Params {
    pub const KEYS: [&'static str; 9] = ["a1", "a2", "b1", "b2", "c1", "c2", "d1", "d2", "L"];

    /// Parameters of the barrier-crossing experiment (weak `u`, dominant `v` kinetics, `L = 10`).
    pub fn barrier_preset() -> Self {
        Params {
            a1: 1.0,
            a2: 1.0,
            b1: 1.0,
            b2: 1.0,
            c1: 0.8,
            c2: 0.7,
            d1: 0.1,
            d2: 0.1,
            length: 10.0,
            omega: (0.0, 10.0),
        }
    }

    /// Parameters of the minimum-time experiment (symmetric `d`, `a`, `L = 1`).
    pub fn coexistence_preset() -> Self {
        Params {
            a1: 10.0,
            a2: 10.0,
            b1: 1.8,
            b2: 1.0,
            c1: 0.2,
            c2: 1.4,
            d1: 1.0,
            d2: 1.0,
            length: 1.0,
            omega: (0.0, 1.0),
        }
    }

    /// Checks the positivity and support invariants.
    pub fn validate(self) -> Result<Self> {
        let named = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("L", self.length),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveCoefficient {
                    name: name.to_string(),
                    value,
                });
            }
        }
        let (lo, hi) = self.omega;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::EmptyOmega { lo, hi });
        }
        if lo < 0.0 || hi > self.length {
            return Err(Error::OmegaOutOfRange {
                lo,
                hi,
                length: self.length,
            });
        }
        Ok(self)
    }

    /// Builds parameters from a name → value map.
    ///
    /// Required keys: `a1 a2 b1 b2 c1 c2 d1 d2 L`. The support of the
    /// interior control is read from `omega_lo`/`omega_hi` and defaults to
    /// the whole interval.
    pub fn from_map(raw: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| raw.get(k).copied().ok_or_else(|| Error::MissingKey(k.to_string()));
        let length = get("L")?;
        let p = Params {
            a1: get("a1")?,
            a2: get("a2")?,
            b1: get("b1")?,
            b2: get("b2")?,
            c1: get("c1")?,
            c2: get("c2")?,
            d1: get("d1")?,
            d2: get("d2")?,
            length,
            omega: (
                raw.get("omega_lo").copied().unwrap_or(0.0),
                raw.get("omega_hi").copied().unwrap_or(length),
            ),
        };
        p.validate()
    }

    /// Carrying capacity of `u`.
    pub fn cap_u(&self) -> f64 {
        self.a1 / self.b1
    }

    /// Carrying capacity of `v`.
    pub fn cap_v(&self) -> f64 {
        self.a2 / self.c2
    }

    /// `b1 c2 - b2 c1`, the determinant of the competition matrix.
    pub fn competition_det(&self) -> f64 {
        self.b1 * self.c2 - self.b2 * self.c1
    }

    /// True when `d1 = d2` and `a1 = a2` up to a relative 1e-12.
    pub fn is_symmetric(&self) -> bool {
        rel_close(self.d1, self.d2) && rel_close(self.a1, self.a2)
    }

    pub fn coexistence_admissible(&self) -> bool {
        self.b1 > self.b2 && self.c1 < self.c2
    }

    /// Returns a copy with the domain scaled by `k` (support scaled too).
    pub fn with_length(mut self, length: f64) -> Self {
        let k = length / self.length;
        self.omega = (self.omega.0 * k, self.omega.1 * k);
        self.length = length;
        self
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SYMMETRY_RTOL * a.abs().max(b.abs())
}

/// Long-time regime of the zero-flux system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpaoCase {
    /// `a1/a2 < b1/b2` and `a1/a2 < c1/c2`: convergence to `(0, a2/c2)`.
    CaseI,
    /// `a1/a2 > b1/b2` and `a1/a2 > c1/c2`: convergence to `(a1/b1, 0)`.
    CaseII,
    /// `c1/c2 < a1/a2 < b1/b2`: convergence to the homogeneous coexistence state.
    CaseIII,
    None,
}

impl fmt::Display for TpaoCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TpaoCase::CaseI => "CaseI",
            TpaoCase::CaseII => "CaseII",
            TpaoCase::CaseIII => "CaseIII",
            TpaoCase::None => "None",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub lambda1: f64,
    /// Admissible interior potential `(-a1, lambda1 d1 - a1)` for the `u`-extinction strategy.
    pub sigma_window: Option<(f64, f64)>,
    /// `d < a / lambda1`; `None` outside the symmetric regime.
    pub h12_satisfied: Option<bool>,
    /// `(d1 > a1/lambda1, d2 > a2/lambda1)`.
    pub dd_satisfied: (bool, bool),
    pub tpao_case: TpaoCase,
    pub coexistence_admissible: bool,
    pub notes: Vec<String>,
}

impl RegimeReport {
    /// Whether `sigma = 0` already lies in the window, i.e. boundary controls alone suffice.
    pub fn interior_control_needed(&self) -> Option<bool> {
        self.sigma_window.map(|(lo, hi)| !(lo < 0.0 && 0.0 < hi))
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda1 = {}", self.lambda1)?;
        match self.sigma_window {
            Some((lo, hi)) => writeln!(f, "sigma_window = ({lo}, {hi})")?,
            None => writeln!(f, "sigma_window = absent")?,
        }
        match self.h12_satisfied {
            Some(b) => writeln!(f, "h12_satisfied = {b}")?,
            None => writeln!(f, "h12_satisfied = not applicable")?,
        }
        writeln!(
            f,
            "dd_satisfied = ({}, {})",
            self.dd_satisfied.0, self.dd_satisfied.1
        )?;
        writeln!(f, "tpao_case = {}", self.tpao_case)?;
        writeln!(f, "coexistence_admissible = {}", self.coexistence_admissible)?;
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

/// Evaluates every regime inequality for `p` given the principal eigenvalue.
///
/// All comparisons are strict; ties are reported as failures with a note.
pub fn classify_regime(p: &Params, lambda1: f64) -> RegimeReport {
    let mut notes = Vec::new();
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        notes.push(format!("lambda1 = {lambda1} is not positive; nothing classified"));
        return RegimeReport {
            lambda1,
            sigma_window: None,
            h12_satisfied: None,
            dd_satisfied: (false, false),
            tpao_case: TpaoCase::None,
            coexistence_admissible: p.coexistence_admissible(),
            notes,
        };
    }

    let sigma_window = Some((-p.a1, lambda1 * p.d1 - p.a1));

    let h12_satisfied = if p.is_symmetric() {
        let lhs = p.d1;
        let rhs = p.a1 / lambda1;
        if lhs == rhs {
            notes.push("d = a/lambda1 exactly: h12 tie reported as unsatisfied".into());
        }
        Some(lhs < rhs)
    } else {
        notes.push("h12 not applicable: requires d1 = d2 and a1 = a2".into());
        None
    };

    let dd1 = p.d1 > p.a1 / lambda1;
    let dd2 = p.d2 > p.a2 / lambda1;
    if p.d1 == p.a1 / lambda1 || p.d2 == p.a2 / lambda1 {
        notes.push("dd tie: equality reported as unsatisfied".into());
    }

    let ra = p.a1 / p.a2;
    let rb = p.b1 / p.b2;
    let rc = p.c1 / p.c2;
    let tpao_case = if ra < rb && ra < rc {
        TpaoCase::CaseI
    } else if ra > rb && ra > rc {
        TpaoCase::CaseII
    } else if rc < ra && ra < rb {
        TpaoCase::CaseIII
    } else {
        if ra == rb || ra == rc {
            notes.push("zero-flux regime tie: a1/a2 equals b1/b2 or c1/c2".into());
        } else {
            notes.push("zero-flux regime is bistable (b1/b2 < a1/a2 < c1/c2)".into());
        }
        TpaoCase::None
    };

    let coexistence_admissible = p.coexistence_admissible();
    if p.b1 == p.b2 || p.c1 == p.c2 {
        notes.push("coexistence tie: b1 = b2 or c1 = c2".into());
    }

    RegimeReport {
        lambda1,
        sigma_window,
        h12_satisfied,
        dd_satisfied: (dd1, dd2),
        tpao_case,
        coexistence_admissible,
        notes,
    }
}

/// Interior-potential window `(-a1, min{a2 b1/b2 - a1, a2 c1/c2 - a1})` for which
/// the zero-flux system with growth `a1 + sigma` falls into [`TpaoCase::CaseI`].
pub fn neumann_sigma_window(p: &Params) -> (f64, f64) {
    let hi = (p.a2 * p.b1 / p.b2 - p.a1).min(p.a2 * p.c1 / p.c2 - p.a1);
    (-p.a1, hi)
}
