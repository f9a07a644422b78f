use super::{AutonomyEvent, AutopilotId, EventKind, HomeRecord, MasterState};
use log::debug;

/// Outcome of one (state, event) lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    To(MasterState),
    /// Explicitly ignored, with the reason for the log.
    Ignore(&'static str),
}

/// Autopilot calls issued by the master on a state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterCommand {
    pub abort: Option<AutopilotId>,
    pub wake: Option<AutopilotId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutonomyContext {
    pub state: MasterState,
    /// Last persisted home record, if any.
    pub home: Option<HomeRecord>,
    /// False when the home store is present but unreadable; takeoff is
    /// refused until it is fixed.
    pub home_store_ok: bool,
}

impl AutonomyContext {
    pub fn new(state: MasterState) -> Self {
        Self { state, home: None, home_store_ok: true }
    }

    pub fn active_autopilot(&self) -> Option<AutopilotId> {
        autopilot_of(self.state)
    }
}

fn autopilot_of(s: MasterState) -> Option<AutopilotId> {
    match s {
        MasterState::Takeoff => Some(AutopilotId::Takeoff),
        MasterState::Mission => Some(AutopilotId::Mission),
        MasterState::ReturnHome => Some(AutopilotId::ReturnHome),
        MasterState::Landing => Some(AutopilotId::Landing),
        MasterState::EmergencyLanding => Some(AutopilotId::EmergencyLanding),
        _ => None,
    }
}

/// The master transition table. This is a reconstruction from the mission
/// cycle (charge, take off, fly, return, land) plus the four user-forced
/// events; there is no other logic.
pub fn transition(state: MasterState, event: EventKind, home_store_ok: bool) -> Transition {
    use EventKind::*;
    use MasterState::*;
    use Transition::{Ignore, To};
    match (state, event) {
        (s, BatteryCritical | EmergencyLand) if s.is_airborne() => To(EmergencyLanding),
        (Charging, BatteryFull) | (Charging | Idle | Landed, ForceTakeoff) => {
            if home_store_ok {
                To(Takeoff)
            } else {
                Ignore("home store unreadable; takeoff refused")
            }
        }
        (Takeoff, TakeoffComplete) => To(Mission),
        (Takeoff, MotorCheckFailed) | (Takeoff | Mission | ReturnHome, AutopilotFailed) => To(Fault),
        (Takeoff | Mission, BatteryLow | ReturnToHome | ForceLand) => To(ReturnHome),
        (Mission, MissionComplete) => To(ReturnHome),
        (ReturnHome, ArrivedHome | ForceLand) => To(Landing),
        (Landing, Touchdown) => To(Charging),
        (Landing, DetectionTimeout) => To(EmergencyLanding),
        (EmergencyLanding, Touchdown) => To(Landed),
        (Fault, _) => Ignore("terminal fault"),
        (EmergencyLanding, _) => Ignore("emergency landing runs to touchdown"),
        (s, BatteryCritical | EmergencyLand) if !s.is_airborne() => Ignore("not airborne"),
        _ => Ignore("no transition defined"),
    }
}

/// One master tick: applies `events` in order. Returns the autopilot calls
/// and one `(time, from, event, to)` row per event for the transition log;
/// ignored events have `from == to`.
pub fn master_step(
    ctx: &AutonomyContext,
    events: &[AutonomyEvent],
) -> (AutonomyContext, Vec<MasterCommand>, Vec<(f64, MasterState, EventKind, MasterState)>) {
    let mut next = ctx.clone();
    let mut cmds = Vec::new();
    let mut log = Vec::new();
    for ev in events {
        let from = next.state;
        match transition(from, ev.kind, next.home_store_ok) {
            Transition::To(to) => {
                cmds.push(MasterCommand { abort: autopilot_of(from), wake: autopilot_of(to) });
                next.state = to;
                log.push((ev.time, from, ev.kind, to));
            }
            Transition::Ignore(why) => {
                debug!("{:.2}: {} ignored in {}: {}", ev.time, ev.kind, from, why);
                log.push((ev.time, from, ev.kind, from));
            }
        }
    }
    (next, cmds, log)
}
