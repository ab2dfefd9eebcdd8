//! Error types for every module of the core crate.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::network::BusId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no slack bus")]
    NoSlack,
    #[error("network has more than one slack bus: {0:?}")]
    MultipleSlack(Vec<BusId>),
    #[error("bus id {0} appears more than once")]
    DuplicateBus(BusId),
    #[error("branch {from}-{to} references missing bus {missing}")]
    DanglingBranch {
        from: BusId,
        to: BusId,
        missing: BusId,
    },
    #[error("branch connects bus {0} to itself")]
    SelfLoop(BusId),
    #[error("branch {from}-{to} has zero or non-finite impedance")]
    ZeroImpedance { from: BusId, to: BusId },
    #[error("more than one branch joins buses {from} and {to}")]
    ParallelBranch { from: BusId, to: BusId },
    #[error("buses {0:?} are not connected to the slack bus")]
    Disconnected(Vec<BusId>),
    #[error("bus {0} has a non-positive voltage setpoint")]
    BadSetpoint(BusId),
    #[error("PV bus {0} carries a reactive injection")]
    PvReactiveInjection(BusId),
    #[error("bus {0} has q_min > q_max")]
    QLimitOrder(BusId),
    #[error("bus {0} has a non-finite field")]
    NonFinite(BusId),
    #[error("no bus with id {0}")]
    UnknownBus(BusId),
    #[error("no branch joins buses {from} and {to}")]
    UnknownBranch { from: BusId, to: BusId },
    #[error("field `{field}` is not legal for bus {id}")]
    IllegalField { id: BusId, field: &'static str },
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("embedded system matrix is singular at elimination step {step}")]
    SingularEmbedding { step: usize },
    #[error("precision exhausted at order {order}: about {lost:.0} of {digits} digits lost; raise the precision")]
    PrecisionExhausted { order: usize, digits: u32, lost: f64 },
    #[error("series belongs to a different system")]
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PadeError {
    #[error("PA[{m}/{m}] needs {need} coefficients, got {have}")]
    TooFewCoefficients { m: usize, need: usize, have: usize },
    #[error("Pade table degenerate at PA[{m}/{m}] ({digits} digits): reduce the order or raise the precision")]
    DegenerateTable { m: usize, digits: u32 },
    #[error("denominator vanishes at the evaluation point")]
    PoleAtPoint,
    #[error("root refinement stalled after {iterations} iterations ({unconverged} roots unconverged, last correction 1e{log10_correction:.1})")]
    RootFindingStalled {
        iterations: usize,
        unconverged: usize,
        log10_correction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("alternative Jacobian undefined: |V| = 0 at bus {0}")]
    DivisionByZeroVm(BusId),
    #[error("Jacobian singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("augmented Jacobian has no usable tangent direction")]
    SingularAugmented,
    #[error("state has {got} buses, network has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bus {0} must be a PQ bus here")]
    NotPq(BusId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("schedule must be non-empty, ascending and start at 1 or above")]
    BadSchedule,
    #[error("bracket [{lo}, {hi}] does not straddle the feasibility boundary ({lo_status} at lo, {hi_status} at hi)")]
    BadBracket {
        lo: f64,
        hi: f64,
        lo_status: &'static str,
        hi_status: &'static str,
    },
    #[error("bad range: from {from}, to {to}, step {step}")]
    BadSweep { from: f64, to: f64, step: f64 },
    #[error("no feasible solution to analyse")]
    NotFeasible,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Pade(#[from] PadeError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
}
