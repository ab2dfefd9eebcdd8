//! Feasibility verdicts, parameter sweeps, saddle-node bisection and
//! reactive-limit enforcement.
//!
//! A verdict combines two pieces of evidence from the embedded series: whether
//! the diagonal Padé values at `z = 1` settle as the order grows, and where the
//! branch point on the positive real axis sits relative to `z = 1`. When they
//! disagree the schedule is raised once; if they still disagree the verdict is
//! [`FeasibilityStatus::Indeterminate`] and carries the branch-point margin.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{NewtonError, SeriesError, StabilityError};
use crate::network::{ybus, BusId, BusKind, Network, ParameterRef};
use crate::newton::{self, BusState, JacobianVariant, NrResult, NrStatus, Start};
use crate::pade::{self, ConvergenceStatus, ConvergenceVerdict};
use crate::mp::Precision;
use crate::series;

/// Runs independent jobs. The core crate only ships [`Sequential`]; a
/// threaded implementation can be plugged in from outside.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

pub const DEFAULT_SCHEDULE: [usize; 5] = [20, 30, 40, 50, 60];
/// Per-bus delta between the top two orders.
pub const DEFAULT_TOL: f64 = 5e-5;
/// Ceiling for the one-off schedule escalation.
pub const DEFAULT_MAX_HALF_ORDER: usize = 150;
/// A reactive output must pass its limit by more than this to count.
pub const Q_LIMIT_TOL: f64 = 1e-6;
/// NR and embedding profiles "match" below this infinity-norm difference.
pub const MATCH_TOL: f64 = 1e-4;

/// Knobs shared by every operation in this module.
#[derive(Debug, Clone, PartialEq)]
pub struct StableOptions {
    /// Ascending Padé half-orders.
    pub schedule: Vec<usize>,
    pub tol: f64,
    /// Escalated orders are clipped to this.
    pub max_half_order: usize,
    /// Working precision in decimal digits; `None` follows the series
    /// precision policy for the largest order of each attempt.
    pub digits: Option<u32>,
}

impl Default for StableOptions {
    fn default() -> Self {
        StableOptions {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            tol: DEFAULT_TOL,
            max_half_order: DEFAULT_MAX_HALF_ORDER,
            digits: None,
        }
    }
}

impl StableOptions {
    pub fn with_schedule(schedule: Vec<usize>) -> Self {
        StableOptions {
            schedule,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), StabilityError> {
        let ascending = self.schedule.windows(2).all(|w| w[0] < w[1]);
        if self.schedule.is_empty() || self.schedule[0] == 0 || !ascending {
            return Err(StabilityError::BadSchedule);
        }
        Ok(())
    }

    /// The schedule raised by half, clipped and deduplicated; `None` when
    /// that changes nothing.
    fn escalated(&self) -> Option<Vec<usize>> {
        let cap = self.max_half_order.max(*self.schedule.last()?);
        let mut up: Vec<usize> = self
            .schedule
            .iter()
            .map(|&m| (3 * m).div_ceil(2).min(cap))
            .collect();
        up.dedup();
        (up.last() > self.schedule.last()).then_some(up)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl FeasibilityStatus {
    pub fn name(self) -> &'static str {
        match self {
            FeasibilityStatus::Feasible => "Feasible",
            FeasibilityStatus::Infeasible => "Infeasible",
            FeasibilityStatus::Indeterminate => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusVoltage {
    pub id: BusId,
    pub v: Complex64,
}

impl BusVoltage {
    pub fn mag(&self) -> f64 {
        self.v.norm()
    }

    pub fn deg(&self) -> f64 {
        self.v.arg().to_degrees()
    }
}

/// What a verdict was based on.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    /// Half-orders of the final attempt.
    pub orders: Vec<usize>,
    /// Per-bus convergence record of the final attempt (non-slack buses).
    pub buses: Vec<(BusId, ConvergenceVerdict)>,
    /// Bus whose top-order delta was largest; its poles locate the branch
    /// point.
    pub slowest_bus: Option<BusId>,
    /// Branch-point estimate at each of the top orders examined.
    pub branch_points: Vec<(usize, Option<f64>)>,
    /// The first attempt conflicted and the schedule was raised.
    pub escalated: bool,
    /// Infinity norm of the power mismatch at the reported solution.
    pub mismatch: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    /// Padé values at `z = 1` at the largest order, all buses in network
    /// order. Absent for infeasible cases.
    pub solution: Option<Vec<BusVoltage>>,
    /// Branch-point estimate `z_c`.
    pub margin: Option<f64>,
    pub evidence: Evidence,
}

impl FeasibilityVerdict {
    pub fn voltage(&self, id: BusId) -> Option<Complex64> {
        self.solution
            .as_ref()?
            .iter()
            .find(|b| b.id == id)
            .map(|b| b.v)
    }

    /// Solution as an NR state.
    pub fn state(&self) -> Option<BusState> {
        let sol = self.solution.as_ref()?;
        let ids = sol.iter().map(|b| b.id).collect();
        let v: Vec<Complex64> = sol.iter().map(|b| b.v).collect();
        Some(BusState::from_phasors(ids, &v))
    }

    /// Feasible, or Indeterminate with the branch point beyond `z = 1`.
    pub fn leans_feasible(&self) -> bool {
        match self.status {
            FeasibilityStatus::Feasible => true,
            FeasibilityStatus::Infeasible => false,
            FeasibilityStatus::Indeterminate => self.margin.is_some_and(|c| c > 1.0),
        }
    }
}

/// Branch point extrapolated from estimates at two orders. The estimates
/// approach the limit roughly like `m^-4`.
pub fn extrapolate_branch_point(m1: usize, c1: f64, m2: usize, c2: f64) -> f64 {
    let quartic = |m: usize| {
        let m2 = (m * m) as f64;
        m2 * m2
    };
    let (a1, a2) = (quartic(m1), quartic(m2));
    (a2 * c2 - a1 * c1) / (a2 - a1)
}

enum Attempt {
    Done(FeasibilityVerdict),
    Conflict(FeasibilityVerdict),
}

fn slack_voltage(net: &Network) -> BusVoltage {
    let s = net.slack();
    BusVoltage {
        id: s.id,
        v: Complex64::from_polar(s.v_setpoint, s.slack_angle),
    }
}

fn attempt<E: Executor>(
    net: &Network,
    orders: &[usize],
    opts: &StableOptions,
    exec: &E,
) -> Result<Attempt, StabilityError> {
    let tol = opts.tol;
    let top = *orders.last().expect("validated schedule");
    let sys = match opts.digits {
        Some(d) => series::embed(net, Precision::digits(d))?,
        None => series::embed_for_order(net, top)?,
    };
    let s = match sys.series(2 * top) {
        Ok(s) => s,
        Err(e @ SeriesError::PrecisionExhausted { .. }) => {
            return Ok(Attempt::Done(FeasibilityVerdict {
                status: FeasibilityStatus::Indeterminate,
                solution: None,
                margin: None,
                evidence: Evidence {
                    orders: orders.to_vec(),
                    buses: Vec::new(),
                    slowest_bus: None,
                    branch_points: Vec::new(),
                    escalated: false,
                    mismatch: None,
                    note: Some(format!("{e}")),
                },
            }))
        }
        Err(e) => return Err(e.into()),
    };
    let prec = s.precision();
    let targets: Vec<_> = s.buses().iter().filter(|b| b.kind != BusKind::Slack).collect();
    let buses: Vec<(BusId, ConvergenceVerdict)> = exec
        .map(targets, |b| {
            pade::assess_series(&b.v, orders, tol, prec).map(|v| (b.id, v))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    let last_delta = |v: &ConvergenceVerdict| v.deltas.last().copied().unwrap_or(0.0);
    let converged = buses.iter().all(|(_, v)| v.status == ConvergenceStatus::Converged);
    let slowest = buses
        .iter()
        .max_by(|a, b| {
            let (x, y) = (last_delta(&a.1), last_delta(&b.1));
            x.partial_cmp(&y).unwrap_or(if x.is_nan() {
                core::cmp::Ordering::Greater
            } else {
                core::cmp::Ordering::Less
            })
        })
        .map(|(id, _)| *id);

    // Branch point from the poles of the slowest bus at the top two orders.
    let mut branch_points = Vec::new();
    if let Some(id) = slowest {
        let coeffs = &s.bus(id).expect("series covers every bus").v;
        let probe: Vec<usize> = orders.iter().rev().take(2).rev().copied().collect();
        let found = exec.map(probe.clone(), |m| {
            pade::pade_or_lower(coeffs, m, prec)
                .and_then(|pa| pade::poles(&pa))
                .ok()
                .and_then(|(p, s)| pade::branch_point_of(&p, &s))
        });
        branch_points = probe.into_iter().zip(found).collect();
    }
    let margin = match branch_points.as_slice() {
        [(m1, Some(c1)), (m2, Some(c2))] => Some(extrapolate_branch_point(*m1, *c1, *m2, *c2)),
        [.., (_, c)] => *c,
        [] => None,
    };

    let mut solution: Vec<BusVoltage> = buses
        .iter()
        .map(|(id, v)| BusVoltage {
            id: *id,
            v: v.last_value().unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
        })
        .collect();
    solution.push(slack_voltage(net));
    let mismatch = {
        let ids = solution.iter().map(|b| b.id).collect();
        let v: Vec<Complex64> = solution.iter().map(|b| b.v).collect();
        let st = BusState::from_phasors(ids, &v);
        let f = newton::mismatch(net, &ybus(net), &st);
        f.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
    };

    let beyond = margin.map(|c| c > 1.0);
    let (status, conflict) = match (converged, beyond) {
        (true, Some(true)) | (true, None) => (FeasibilityStatus::Feasible, false),
        (false, Some(false)) | (false, None) => (FeasibilityStatus::Infeasible, false),
        _ => (FeasibilityStatus::Indeterminate, true),
    };
    let verdict = FeasibilityVerdict {
        status,
        solution: (status != FeasibilityStatus::Infeasible).then_some(solution),
        margin,
        evidence: Evidence {
            orders: orders.to_vec(),
            buses,
            slowest_bus: slowest,
            branch_points,
            escalated: false,
            mismatch: (status != FeasibilityStatus::Infeasible).then_some(mismatch),
            note: None,
        },
    };
    Ok(if conflict {
        Attempt::Conflict(verdict)
    } else {
        Attempt::Done(verdict)
    })
}

/// Feasibility verdict for `net` with the default options, run sequentially.
pub fn solve_stable(net: &Network, opts: &StableOptions) -> Result<FeasibilityVerdict, StabilityError> {
    solve_stable_with(net, opts, &Sequential)
}

pub fn solve_stable_with<E: Executor>(
    net: &Network,
    opts: &StableOptions,
    exec: &E,
) -> Result<FeasibilityVerdict, StabilityError> {
    opts.validate()?;
    match attempt(net, &opts.schedule, opts, exec)? {
        Attempt::Done(v) => Ok(v),
        Attempt::Conflict(first) => {
            let Some(up) = opts.escalated() else {
                return Ok(first);
            };
            let mut v = match attempt(net, &up, opts, exec)? {
                Attempt::Done(v) | Attempt::Conflict(v) => v,
            };
            v.evidence.escalated = true;
            Ok(v)
        }
    }
}

/// One point of a parameter sweep. Errors are kept per record.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub value: f64,
    pub helm: Result<FeasibilityVerdict, StabilityError>,
    pub nr_flat: Result<NrResult, NewtonError>,
    pub nr_alt: Result<NrResult, NewtonError>,
    pub match_flat: bool,
    pub match_alt: bool,
}

/// Whether a converged NR state equals the feasible embedding solution to
/// within [`MATCH_TOL`] in every complex bus voltage.
pub fn profiles_match(helm: &FeasibilityVerdict, nr: &NrResult) -> bool {
    if helm.status != FeasibilityStatus::Feasible || nr.status != NrStatus::Converged {
        return false;
    }
    let v = nr.state.phasors();
    nr.state.ids.iter().zip(&v).all(|(id, vn)| {
        helm.voltage(*id)
            .is_some_and(|vh| (vh - vn).norm() < MATCH_TOL)
    })
}

/// Parameter values `from, from + step, ...` up to `to` inclusive.
pub fn sweep_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>, StabilityError> {
    if !(step > 0.0) || !(from <= to) || !from.is_finite() || !to.is_finite() {
        return Err(StabilityError::BadSweep { from, to, step });
    }
    let n = libm::floor((to - from) / step + 1e-9) as usize;
    // Snap to a 1e-12 grid so 0.9 + 0.05 prints as 0.95.
    Ok((0..=n)
        .map(|k| libm::round((from + k as f64 * step) * 1e12) / 1e12)
        .collect())
}

pub fn sweep_point(net: &Network, param: &ParameterRef, value: f64, opts: &StableOptions) -> SweepRecord {
    let point = param.apply(net, value);
    let helm = point
        .clone()
        .map_err(StabilityError::from)
        .and_then(|n| solve_stable(&n, opts));
    let nr = |variant| {
        point.clone().map_err(NewtonError::from).and_then(|n| {
            newton::solve_nr(&n, &Start::Flat, variant, newton::DEFAULT_TOL, newton::DEFAULT_MAX_ITER)
        })
    };
    let nr_flat = nr(JacobianVariant::Standard);
    let nr_alt = nr(JacobianVariant::AltDiagonal);
    let matches = |r: &Result<NrResult, NewtonError>| match (&helm, r) {
        (Ok(h), Ok(r)) => profiles_match(h, r),
        _ => false,
    };
    SweepRecord {
        value,
        match_flat: matches(&nr_flat),
        match_alt: matches(&nr_alt),
        helm,
        nr_flat,
        nr_alt,
    }
}

/// Embedding verdict and both flat-start NR variants at each parameter
/// value. Records come back in parameter order whatever the executor does.
pub fn sweep<E: Executor>(
    net: &Network,
    param: &ParameterRef,
    from: f64,
    to: f64,
    step: f64,
    opts: &StableOptions,
    exec: &E,
) -> Result<Vec<SweepRecord>, StabilityError> {
    opts.validate()?;
    param.value(net)?;
    let values = sweep_values(from, to, step)?;
    Ok(exec.map(values, |v| sweep_point(net, param, v, opts)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub probe: f64,
    pub status: FeasibilityStatus,
    pub margin: Option<f64>,
    /// Side taken: `true` when the probe became the new lower end.
    pub feasible_side: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnbResult {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub history: Vec<BracketStep>,
    /// Probes that stayed Indeterminate and were placed by their margin.
    pub indeterminate: usize,
}

/// Bisects the feasibility boundary of `param` inside `[lo, hi]` down to
/// width `tol` and returns the midpoint of the final bracket.
///
/// A probe that stays Indeterminate after escalation goes to the side its
/// branch-point margin points to (feasible when `z_c > 1`).
pub fn find_snb<E: Executor>(
    net: &Network,
    param: &ParameterRef,
    bracket: (f64, f64),
    tol: f64,
    opts: &StableOptions,
    exec: &E,
) -> Result<SnbResult, StabilityError> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(StabilityError::BadSweep { from: lo, to: hi, step: tol });
    }
    let at = |x: f64| -> Result<FeasibilityVerdict, StabilityError> {
        solve_stable_with(&param.apply(net, x)?, opts, exec)
    };
    let (vl, vh) = (at(lo)?, at(hi)?);
    if !vl.leans_feasible() || vh.leans_feasible() || (vh.status == FeasibilityStatus::Indeterminate && vh.margin.is_none()) {
        return Err(StabilityError::BadBracket {
            lo,
            hi,
            lo_status: vl.status.name(),
            hi_status: vh.status.name(),
        });
    }
    let mut history = Vec::new();
    let mut indeterminate = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = at(mid)?;
        if v.status == FeasibilityStatus::Indeterminate {
            indeterminate += 1;
        }
        let feasible = v.leans_feasible();
        history.push(BracketStep {
            lo,
            hi,
            probe: mid,
            status: v.status,
            margin: v.margin,
            feasible_side: feasible,
        });
        if feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SnbResult {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        history,
        indeterminate,
    })
}

/// Smallest singular value of the power-flow Jacobian at the embedding
/// solution for `param = value`. The Padé values are first polished with a
/// few Newton steps so the diagnostic is not dominated by truncation error
/// close to the bifurcation.
pub fn snb_singularity_check(
    net: &Network,
    param: &ParameterRef,
    value: f64,
    opts: &StableOptions,
) -> Result<f64, StabilityError> {
    let net = param.apply(net, value)?;
    let v = solve_stable(&net, opts)?;
    let start = match (v.leans_feasible(), v.state()) {
        (true, Some(s)) => s,
        _ => return Err(StabilityError::NotFeasible),
    };
    let polished = newton::solve_nr(
        &net,
        &Start::State(start.clone()),
        JacobianVariant::Standard,
        newton::DEFAULT_TOL,
        newton::DEFAULT_MAX_ITER,
    )
    .ok()
    .filter(|r| r.status == NrStatus::Converged && close(&r.state, &start))
    .map(|r| r.state)
    .unwrap_or(start);
    let st = polished.aligned(&net)?;
    let j = newton::jacobian(&net, &ybus(&net), &st, JacobianVariant::Standard)?;
    Ok(newton::min_singular_value(&j))
}

/// The polish must not jump to another branch.
fn close(a: &BusState, b: &BusState) -> bool {
    let (va, vb) = (a.phasors(), b.phasors());
    va.iter().zip(&vb).all(|(x, y)| (x - y).norm() < 0.05)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitStatus {
    NoViolation,
    SwitchedStable,
    LimitInducedBifurcation,
    InfeasibleOnLimit,
}

impl LimitStatus {
    pub fn name(self) -> &'static str {
        match self {
            LimitStatus::NoViolation => "NoViolation",
            LimitStatus::SwitchedStable => "SwitchedStable",
            LimitStatus::LimitInducedBifurcation => "LimitInducedBifurcation",
            LimitStatus::InfeasibleOnLimit => "InfeasibleOnLimit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitSide {
    QMax,
    QMin,
}

impl LimitSide {
    pub fn name(self) -> &'static str {
        match self {
            LimitSide::QMax => "q_max",
            LimitSide::QMin => "q_min",
        }
    }
}

/// A PV bus pinned at a reactive limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedBus {
    pub id: BusId,
    pub side: LimitSide,
    pub limit: f64,
    /// Reactive output the unconstrained solution asked for.
    pub q_requested: f64,
    pub v_setpoint: f64,
    /// Magnitude at the on-limit solution, when there is one.
    pub v_on_limit: Option<f64>,
    /// `d|V|/dQ` at the on-limit solution.
    pub sensitivity: Option<f64>,
}

impl SwitchedBus {
    /// Above its setpoint with a positive `d|V|/dQ`: an unstable operating
    /// point.
    pub fn unstable(&self) -> bool {
        self.v_on_limit.is_some_and(|v| v > self.v_setpoint) && self.sensitivity.is_some_and(|s| s > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub status: LimitStatus,
    pub off_limit: FeasibilityVerdict,
    pub on_limit: Option<FeasibilityVerdict>,
    pub switched: Vec<SwitchedBus>,
    /// Reactive output of every PV bus at the off-limit solution.
    pub q_off_limit: Vec<(BusId, f64)>,
    /// Switching rounds performed.
    pub rounds: usize,
}

/// Combines the on-limit verdict with the switched-bus diagnostics.
pub fn classify_limit(on_limit: FeasibilityStatus, switched: &[SwitchedBus]) -> LimitStatus {
    match on_limit {
        FeasibilityStatus::Feasible if switched.iter().any(SwitchedBus::unstable) => {
            LimitStatus::LimitInducedBifurcation
        }
        FeasibilityStatus::Feasible => LimitStatus::SwitchedStable,
        _ => LimitStatus::LimitInducedBifurcation,
    }
}

/// Reactive output of each PV bus at `state`.
pub fn pv_reactive_output(net: &Network, state: &BusState) -> Result<Vec<(BusId, f64)>, StabilityError> {
    let st = state.aligned(net)?;
    let s = newton::bus_powers(&ybus(net), &st);
    Ok(net
        .buses()
        .iter()
        .zip(&s)
        .filter(|(b, _)| b.kind == BusKind::Pv)
        .map(|(b, s)| (b.id, s.im))
        .collect())
}

fn violations(net: &Network, q: &[(BusId, f64)]) -> Vec<(BusId, LimitSide, f64, f64)> {
    q.iter()
        .filter_map(|&(id, q)| {
            let b = net.bus(id)?;
            if b.q_max.is_some_and(|m| q > m + Q_LIMIT_TOL) {
                Some((id, LimitSide::QMax, b.q_max?, q))
            } else if b.q_min.is_some_and(|m| q < m - Q_LIMIT_TOL) {
                Some((id, LimitSide::QMin, b.q_min?, q))
            } else {
                None
            }
        })
        .collect()
}

/// Solves with all generators regulating, then pins any generator whose
/// reactive output breaks a limit to that limit and re-solves, repeating
/// for cascading violations at most `2 * N_pv` times.
pub fn enforce_q_limits<E: Executor>(
    net: &Network,
    opts: &StableOptions,
    exec: &E,
) -> Result<LimitOutcome, StabilityError> {
    let off = solve_stable_with(net, opts, exec)?;
    let Some(state) = off.leans_feasible().then(|| off.state()).flatten() else {
        return Ok(LimitOutcome {
            status: LimitStatus::InfeasibleOnLimit,
            off_limit: off,
            on_limit: None,
            switched: Vec::new(),
            q_off_limit: Vec::new(),
            rounds: 0,
        });
    };
    let q_off = pv_reactive_output(net, &state)?;
    let mut pending = violations(net, &q_off);
    if pending.is_empty() {
        return Ok(LimitOutcome {
            status: LimitStatus::NoViolation,
            off_limit: off,
            on_limit: None,
            switched: Vec::new(),
            q_off_limit: q_off,
            rounds: 0,
        });
    }

    let mut cur = net.clone();
    let mut switched: Vec<SwitchedBus> = Vec::new();
    let mut on = off.clone();
    let mut rounds = 0;
    while !pending.is_empty() && rounds < 2 * net.n_pv().max(1) {
        rounds += 1;
        for (id, side, limit, q) in pending.drain(..) {
            let v_setpoint = cur.bus(id).expect("violation names a bus").v_setpoint;
            cur = cur.with_pv_as_pq(id, limit)?;
            switched.push(SwitchedBus {
                id,
                side,
                limit,
                q_requested: q,
                v_setpoint,
                v_on_limit: None,
                sensitivity: None,
            });
        }
        on = solve_stable_with(&cur, opts, exec)?;
        match on.leans_feasible().then(|| on.state()).flatten() {
            Some(st) => pending = violations(&cur, &pv_reactive_output(&cur, &st)?),
            None => break,
        }
    }

    let on_status = match on.status {
        FeasibilityStatus::Indeterminate if on.leans_feasible() => FeasibilityStatus::Feasible,
        FeasibilityStatus::Indeterminate => FeasibilityStatus::Infeasible,
        s => s,
    };
    if on_status == FeasibilityStatus::Feasible {
        if let Some(st) = on.state() {
            for sb in &mut switched {
                sb.v_on_limit = st.vm_of(sb.id).map(f64::abs);
                sb.sensitivity = newton::vq_sensitivity(&cur, &st, sb.id).ok();
            }
        }
    }
    Ok(LimitOutcome {
        status: classify_limit(on_status, &switched),
        off_limit: off,
        on_limit: Some(on),
        switched,
        q_off_limit: q_off,
        rounds,
    })
}
