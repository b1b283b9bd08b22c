//! Structural screening for transitions that can interfere and for
//! zero-frequency off-diagonal elements that feed a transition's source term.
//!
//! A transition `m → n` is the sideband element `r_nm`, resonant at
//! `ω̃ = ω_n − ω_m`. For an ordered pair of transitions `(m → n, s → t)`:
//!
//! * (i) `parity(t) ≠ parity(n)` and `parity(s) ≠ parity(m)` (coupling
//!   through the recycling term `X_nt X*_ms`);
//! * (ii) `s = m` and `parity(t) = parity(n)` (through `Y_nt`);
//! * (iii) `t = n` and `parity(s) = parity(m)` (through `Y_sm`);
//! * (iv) both lines lie within the closeness window of the probe range;
//! * (v) both lines carry population above the floor.
//!
//! An off-diagonal `ρ_ts[0]` enters the source of `r_nm` when `s = m` and
//! `parity(t) ≠ parity(n)`, or `t = n` and `parity(s) ≠ parity(m)`.

use crate::fock::parity_of;
use crate::model::CouplingMatrices;
use crate::scalar::{cabs, lit, to_f64, Real};
use crate::steady::{LossSpec, SteadyState};

#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceThresholds {
    /// Closeness window in units of `κ`.
    pub closeness: f64,
    pub population_floor: f64,
    pub offdiag_floor: f64,
}

impl Default for InterferenceThresholds {
    fn default() -> Self {
        Self { closeness: 5.0, population_floor: 1e-3, offdiag_floor: 1e-3 }
    }
}

/// Probe range `[lo, hi]` in `ω̃` (/2π, MHz). A single frequency has
/// `lo = hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeWindow<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> ProbeWindow<T> {
    pub fn at(omega: T) -> Self {
        Self { lo: omega, hi: omega }
    }

    pub fn span(lo: T, hi: T) -> Self {
        Self { lo: lo.min(hi), hi: lo.max(hi) }
    }

    /// Distance from `omega` to the window, zero inside it.
    pub fn distance(&self, omega: T) -> T {
        if omega < self.lo {
            self.lo - omega
        } else if omega > self.hi {
            omega - self.hi
        } else {
            T::zero()
        }
    }
}

/// Transition `from → to`, i.e. the sideband element `r_{to,from}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Conditions {
    pub recycling: bool,
    pub shared_lower: bool,
    pub shared_upper: bool,
    pub close: bool,
    pub populated: bool,
}

impl Conditions {
    /// Labels `i`–`v` of the satisfied conditions.
    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (on, name) in [
            (self.recycling, "i"),
            (self.shared_lower, "ii"),
            (self.shared_upper, "iii"),
            (self.close, "iv"),
            (self.populated, "v"),
        ] {
            if on {
                v.push(name);
            }
        }
        v
    }

    pub fn structural(&self) -> bool {
        self.recycling || self.shared_lower || self.shared_upper
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterferingPair {
    pub first: Transition,
    pub second: Transition,
    pub conditions: Conditions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagonalInfluence<T: Real> {
    pub transition: Transition,
    /// `(t, s)` of the influencing element `ρ_ts[0]`.
    pub element: (usize, usize),
    pub magnitude: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceReport<T: Real> {
    /// Ordered pairs meeting a structural condition and (iv) and (v).
    pub pairs: Vec<InterferingPair>,
    pub offdiag: Vec<OffDiagonalInfluence<T>>,
}

impl<T: Real> InterferenceReport<T> {
    pub fn find(&self, first: Transition, second: Transition) -> Option<&InterferingPair> {
        self.pairs.iter().find(|p| p.first == first && p.second == second)
    }
}

/// Structural conditions (i)–(iii) for `(m → n, s → t)`.
pub fn structural_conditions(first: Transition, second: Transition) -> Conditions {
    let (m, n) = (first.from, first.to);
    let (s, t) = (second.from, second.to);
    Conditions {
        recycling: parity_of(t) != parity_of(n) && parity_of(s) != parity_of(m),
        shared_lower: s == m && parity_of(t) == parity_of(n),
        shared_upper: t == n && parity_of(s) == parity_of(m),
        close: false,
        populated: false,
    }
}

/// Whether `ρ_ts[0]` (`t ≠ s`) enters the source term of `m → n`.
pub fn offdiag_feeds(transition: Transition, t: usize, s: usize) -> bool {
    let (m, n) = (transition.from, transition.to);
    t != s
        && ((s == m && parity_of(t) != parity_of(n)) || (t == n && parity_of(s) != parity_of(m)))
}

pub fn interference_report<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    window: ProbeWindow<T>,
    thresholds: &InterferenceThresholds,
) -> InterferenceReport<T> {
    let n = c.n_levels();
    let kappa = loss.kappa_tot();
    let reach = lit::<T>(thresholds.closeness) * kappa;
    let floor = lit::<T>(thresholds.population_floor);
    let transitions: Vec<Transition> = (0..n)
        .flat_map(|from| (0..n).map(move |to| Transition { from, to }))
        .filter(|tr| parity_of(tr.from) != parity_of(tr.to))
        .collect();
    let near = |tr: &Transition| window.distance(c.transition_frequency(tr.from, tr.to)) < reach;
    let populated =
        |tr: &Transition| steady.population(tr.from).max(steady.population(tr.to)) > floor;

    let mut pairs = Vec::new();
    for a in &transitions {
        for b in &transitions {
            if a == b {
                continue;
            }
            let mut cond = structural_conditions(*a, *b);
            cond.close = near(a) && near(b);
            cond.populated = populated(a) && populated(b);
            if cond.structural() && cond.close && cond.populated {
                pairs.push(InterferingPair { first: *a, second: *b, conditions: cond });
            }
        }
    }

    let off_floor = lit::<T>(thresholds.offdiag_floor);
    let mut offdiag = Vec::new();
    for tr in transitions.iter().filter(|tr| near(tr)) {
        for t in 0..n {
            for s in 0..n {
                let mag = cabs(steady.element(t, s));
                if mag > off_floor && offdiag_feeds(*tr, t, s) {
                    offdiag.push(OffDiagonalInfluence { transition: *tr, element: (t, s), magnitude: mag });
                }
            }
        }
    }
    debug_assert!(to_f64(kappa).is_finite());
    InterferenceReport { pairs, offdiag }
}
