//! Time-stepping driver shared by both propagators: recording cadence,
//! observable hooks and breakdown detection.

use serde::Serialize;

use crate::error::{non_negative, positive, Error, Result};
use crate::observables::{ObservableRecord, ObservableSeries};

/// A fixed-step integrator over some state type.
pub trait Propagator {
    type State;

    fn dt(&self) -> f64;

    fn time(state: &Self::State) -> f64;

    fn set_time(state: &mut Self::State, t: f64);

    /// Advance by one step. A non-finite result is reported as
    /// [`Error::NonFinite`].
    fn step(&mut self, state: &mut Self::State) -> Result<()>;

    fn observe(&mut self, state: &Self::State) -> Result<ObservableRecord>;
}

/// Kinetic energy exceeding `factor` times its value `window` earlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakdownRule {
    pub window: f64,
    pub factor: f64,
}

impl BreakdownRule {
    pub const DEFAULT_FACTOR: f64 = 10.0;

    pub fn new(window: f64, factor: f64) -> Result<Self> {
        positive("breakdown.window", window)?;
        if !(factor.is_finite() && factor > 1.0) {
            return Err(Error::InvalidParameter {
                name: "breakdown.factor",
                reason: format!("must exceed 1, got {factor}"),
            });
        }
        Ok(Self { window, factor })
    }

    /// Checks the newest record of `history` (time, kinetic energy) against
    /// the latest record at least `window` older.
    ///
    /// Records within `window` of the start are never used as the reference:
    /// a minimum-uncertainty initial state heats by an order of magnitude
    /// over the first couple of time units without anything breaking down.
    pub fn triggered(&self, history: &[(f64, f64)]) -> bool {
        let (Some(&(t0, _)), Some(&(t, ke))) = (history.first(), history.last()) else {
            return false;
        };
        let lag = history
            .iter()
            .rev()
            .find(|(s, _)| *s <= t - self.window + 1e-9)
            .filter(|(s, _)| *s >= t0 + self.window - 1e-9);
        match lag {
            Some(&(_, old)) => ke > self.factor * old,
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownReason {
    NonFinite,
    KineticEnergyJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    pub t: f64,
    pub reason: BreakdownReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    /// Record observables every this many steps (and at the last step).
    pub record_every: usize,
    pub breakdown: Option<BreakdownRule>,
    /// Stop at a kinetic-energy breakdown; non-finite states always stop.
    pub halt_on_breakdown: bool,
}

impl RunOptions {
    pub fn new(t_final: f64, record_every: usize) -> Self {
        Self { t_final, record_every, breakdown: None, halt_on_breakdown: true }
    }

    pub fn with_breakdown(mut self, rule: BreakdownRule, halt: bool) -> Self {
        self.breakdown = Some(rule);
        self.halt_on_breakdown = halt;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub series: ObservableSeries,
    pub breakdown: Option<Breakdown>,
}

/// Steps `state` to `t_final`, recording at the start, every `record_every`
/// steps and at the end. `hook` sees the state at every record.
///
/// Nothing is recorded when `t_final` equals the current time.
pub fn propagate<P, H>(prop: &mut P, state: &mut P::State, options: &RunOptions, mut hook: H) -> Result<RunOutcome>
where
    P: Propagator,
    H: FnMut(&P::State, &ObservableRecord) -> Result<()>,
{
    let t0 = P::time(state);
    non_negative("t_final - t", options.t_final - t0)?;
    if options.record_every == 0 {
        return Err(Error::InvalidParameter { name: "record_every", reason: "must be at least 1".into() });
    }
    let dt = prop.dt();
    let steps = ((options.t_final - t0) / dt).round() as usize;
    let mut outcome = RunOutcome::default();
    if steps == 0 {
        return Ok(outcome);
    }
    let mut ke_history = Vec::new();
    let mut record = |prop: &mut P, state: &P::State, outcome: &mut RunOutcome| -> Result<bool> {
        let rec = prop.observe(state)?;
        hook(state, &rec)?;
        ke_history.push((rec.t, rec.kinetic_energy));
        let t = rec.t;
        let finite = rec.width.is_finite() && rec.kinetic_energy.is_finite();
        outcome.series.push(rec)?;
        if !finite {
            outcome.breakdown.get_or_insert(Breakdown { t, reason: BreakdownReason::NonFinite });
            return Ok(true);
        }
        if let Some(rule) = options.breakdown {
            if outcome.breakdown.is_none() && rule.triggered(&ke_history) {
                outcome.breakdown = Some(Breakdown { t, reason: BreakdownReason::KineticEnergyJump });
                return Ok(options.halt_on_breakdown);
            }
        }
        Ok(false)
    };
    if record(prop, state, &mut outcome)? {
        return Ok(outcome);
    }
    for n in 1..=steps {
        match prop.step(state) {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                let t = t0 + n as f64 * dt;
                P::set_time(state, t);
                outcome.breakdown = Some(Breakdown { t, reason: BreakdownReason::NonFinite });
                return Ok(outcome);
            }
            Err(e) => return Err(e),
        }
        P::set_time(state, t0 + n as f64 * dt);
        if (n % options.record_every == 0 || n == steps) && record(prop, state, &mut outcome)? {
            break;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_window_rule() {
        let rule = BreakdownRule::new(2.0, 10.0).unwrap();
        let mut h = vec![(0.0, 0.1), (1.0, 0.5), (2.0, 5.0), (3.0, 9.0)];
        // The start-up transient is not a reference: 9 > 10 * 0.1 is ignored.
        assert!(!rule.triggered(&h));
        h.push((4.0, 45.0));
        assert!(!rule.triggered(&h));
        // Compared against t = 3 (KE 9): 95 > 90.
        h.push((5.0, 95.0));
        assert!(rule.triggered(&h));
        assert!(BreakdownRule::new(0.0, 10.0).is_err());
        assert!(BreakdownRule::new(1.0, 0.5).is_err());
    }

    struct Counter {
        blow_up_at: Option<usize>,
        steps: usize,
    }

    impl Propagator for Counter {
        type State = (f64, f64);

        fn dt(&self) -> f64 {
            0.1
        }

        fn time(state: &Self::State) -> f64 {
            state.0
        }

        fn set_time(state: &mut Self::State, t: f64) {
            state.0 = t;
        }

        fn step(&mut self, state: &mut Self::State) -> Result<()> {
            self.steps += 1;
            state.1 *= 2.0;
            if Some(self.steps) == self.blow_up_at {
                return Err(Error::NonFinite("test".into()));
            }
            Ok(())
        }

        fn observe(&mut self, state: &Self::State) -> Result<ObservableRecord> {
            Ok(ObservableRecord::new(state.0, 1.0, 1.0, state.1))
        }
    }

    #[test]
    fn recording_cadence_and_no_op() {
        let mut p = Counter { blow_up_at: None, steps: 0 };
        let mut s = (0.0, 1.0);
        let out = propagate(&mut p, &mut s, &RunOptions::new(0.0, 1), |_, _| Ok(())).unwrap();
        assert!(out.series.is_empty());
        let out = propagate(&mut p, &mut s, &RunOptions::new(1.0, 3), |_, _| Ok(())).unwrap();
        let t: Vec<f64> = out.series.times();
        assert_eq!(t.len(), 5);
        assert!((t[1] - 0.3).abs() < 1e-12 && (t[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn breakdowns_are_recorded() {
        let mut p = Counter { blow_up_at: Some(4), steps: 0 };
        let mut s = (0.0, 1.0);
        let out = propagate(&mut p, &mut s, &RunOptions::new(2.0, 1), |_, _| Ok(())).unwrap();
        let b = out.breakdown.unwrap();
        assert_eq!(b.reason, BreakdownReason::NonFinite);
        assert!((b.t - 0.4).abs() < 1e-12);

        let mut p = Counter { blow_up_at: None, steps: 0 };
        let mut s = (0.0, 1.0);
        let opts = RunOptions::new(2.0, 1).with_breakdown(BreakdownRule::new(0.35, 10.0).unwrap(), true);
        let out = propagate(&mut p, &mut s, &opts, |_, _| Ok(())).unwrap();
        let b = out.breakdown.unwrap();
        assert_eq!(b.reason, BreakdownReason::KineticEnergyJump);
        // KE doubles per step; the first usable reference is t = 0.4, so
        // 2^4 = 16 > 10 at t = 0.8.
        assert!((b.t - 0.8).abs() < 1e-12);
        assert_eq!(out.series.len(), 9);
    }
}
