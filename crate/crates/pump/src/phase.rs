use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Authenticating,
    AcquiringIndex,
    Infusing,
    Completed,
    Fault,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Idle,
        Phase::Authenticating,
        Phase::AcquiringIndex,
        Phase::Infusing,
        Phase::Completed,
        Phase::Fault,
    ];

    /// The firmware's transition graph.
    ///
    /// `Authenticating -> Infusing` is the resume edge taken when a
    /// mid-infusion re-login cannot reach the server; the motor never stopped.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, to),
            (Idle, Authenticating)
                | (Authenticating, Authenticating)
                | (Authenticating, AcquiringIndex)
                | (Authenticating, Fault)
                | (Authenticating, Infusing)
                | (AcquiringIndex, Infusing)
                | (AcquiringIndex, Authenticating)
                | (AcquiringIndex, Fault)
                | (Infusing, Infusing)
                | (Infusing, Completed)
                | (Infusing, Fault)
                | (Infusing, Authenticating)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Completed | Phase::Fault)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Idle => "idle",
            Phase::Authenticating => "authenticating",
            Phase::AcquiringIndex => "acquiring_index",
            Phase::Infusing => "infusing",
            Phase::Completed => "completed",
            Phase::Fault => "fault",
        };
        f.write_str(s)
    }
}
