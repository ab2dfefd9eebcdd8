//! Polar Newton-Raphson power flow in double precision.
//!
//! Unknowns are the angles of all non-slack buses followed by the magnitudes
//! of the PQ buses; equations are the active-power mismatches of all
//! non-slack buses followed by the reactive mismatches of the PQ buses. PV
//! buses hold their magnitude and drop their reactive equation. Steps are
//! full Newton steps without damping, so the solver shows the textbook
//! failure modes (non-convergence, convergence to low-voltage solutions).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::NewtonError;
use crate::network::{AdmittanceMatrix, BusId, BusKind, Network, ParameterRef};

/// Mismatch above this, or any non-finite value, declares divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Polar bus voltages, tagged with the bus ids they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct BusState {
    pub ids: Vec<BusId>,
    pub vm: Vec<f64>,
    /// Radians.
    pub va: Vec<f64>,
}

impl BusState {
    /// Zero angles, PQ magnitudes at the slack magnitude, setpoints elsewhere.
    pub fn flat(net: &Network) -> Self {
        let vr = net.slack().v_setpoint;
        let mut s = BusState {
            ids: net.buses().iter().map(|b| b.id).collect(),
            vm: net
                .buses()
                .iter()
                .map(|b| if b.kind == BusKind::Pq { vr } else { b.v_setpoint })
                .collect(),
            va: vec![0.0; net.len()],
        };
        let last = s.va.len() - 1;
        s.va[last] = net.slack().slack_angle;
        s
    }

    pub fn from_phasors(ids: Vec<BusId>, v: &[Complex64]) -> Self {
        BusState {
            ids,
            vm: v.iter().map(|c| c.norm()).collect(),
            va: v.iter().map(|c| c.arg()).collect(),
        }
    }

    pub fn phasors(&self) -> Vec<Complex64> {
        self.vm
            .iter()
            .zip(&self.va)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    pub fn vm_of(&self, id: BusId) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|k| self.vm[k])
    }

    /// The same state listed in `net`'s internal bus order.
    pub fn aligned(&self, net: &Network) -> Result<BusState, NewtonError> {
        if self.ids.len() != net.len() {
            return Err(NewtonError::DimensionMismatch {
                expected: net.len(),
                got: self.ids.len(),
            });
        }
        let mut out = BusState {
            ids: Vec::with_capacity(net.len()),
            vm: Vec::with_capacity(net.len()),
            va: Vec::with_capacity(net.len()),
        };
        for b in net.buses() {
            let k = self.ids.iter().position(|&i| i == b.id).ok_or(
                NewtonError::DimensionMismatch {
                    expected: net.len(),
                    got: self.ids.len(),
                },
            )?;
            out.ids.push(b.id);
            out.vm.push(self.vm[k]);
            out.va.push(self.va[k]);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JacobianVariant {
    /// Exact partial derivatives.
    Standard,
    /// `dP_i/d|V_i|` and `dQ_i/d|V_i|` replaced by `P_i/|V_i| + G_ii |V_i|`
    /// and `Q_i/|V_i| - B_ii |V_i|` with the specified `P_i`, `Q_i`.
    AltDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NrStatus {
    Converged,
    Diverged,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub mismatch_norm: f64,
    pub min_vm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrResult {
    pub status: NrStatus,
    pub state: BusState,
    pub iterations: usize,
    /// Infinity norm of the power mismatch at `state`.
    pub final_mismatch: f64,
    pub trajectory: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub enum Start {
    Flat,
    State(BusState),
    /// Linear prediction from a solved neighbouring operating point along
    /// `param`, to the value `param` has in the network being solved.
    Tangent {
        base_net: Network,
        base: BusState,
        param: ParameterRef,
    },
}

/// Complex power `V_i conj(sum_k Y_ik V_k)` leaving each bus into the grid.
pub fn bus_powers(y: &AdmittanceMatrix, state: &BusState) -> Vec<Complex64> {
    let v = state.phasors();
    let i = y.mul_vec(&v);
    v.iter().zip(&i).map(|(v, i)| v * i.conj()).collect()
}

/// `P_i - P_i^spec` for non-slack buses, then `Q_i - Q_i^spec` for PQ buses.
pub fn mismatch(net: &Network, y: &AdmittanceMatrix, state: &BusState) -> Vec<f64> {
    let s = bus_powers(y, state);
    let ns = net.slack_index();
    let mut f: Vec<f64> = (0..ns).map(|i| s[i].re - net.buses()[i].p_inject).collect();
    f.extend((0..net.n_pq()).map(|i| s[i].im - net.buses()[i].q_inject));
    f
}

fn inf_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Power-flow Jacobian with respect to `(theta non-slack, |V| PQ)`.
pub fn jacobian(
    net: &Network,
    y: &AdmittanceMatrix,
    state: &BusState,
    variant: JacobianVariant,
) -> Result<DMatrix<f64>, NewtonError> {
    let ns = net.slack_index();
    let npq = net.n_pq();
    let n = net.len();
    let dim = ns + npq;
    let (vm, va) = (&state.vm, &state.va);
    let s = bus_powers(y, state);
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..ns {
        let (gii, bii) = (y.g(i, i), y.b(i, i));
        // sums over k != i
        let mut sum_p = 0.0;
        let mut sum_q = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let (g, b) = (y.g(i, k), y.b(i, k));
            let (st, ct) = libm::sincos(va[i] - va[k]);
            sum_p += vm[k] * (g * ct + b * st);
            sum_q += vm[k] * (g * st - b * ct);
            if k < ns {
                j[(i, k)] = vm[i] * vm[k] * (g * st - b * ct);
                if i < npq {
                    j[(ns + i, k)] = -vm[i] * vm[k] * (g * ct + b * st);
                }
            }
            if k < npq {
                j[(i, ns + k)] = vm[i] * (g * ct + b * st);
                if i < npq {
                    j[(ns + i, ns + k)] = vm[i] * (g * st - b * ct);
                }
            }
        }
        j[(i, i)] = -s[i].im - bii * vm[i] * vm[i];
        if i < npq {
            j[(ns + i, i)] = s[i].re - gii * vm[i] * vm[i];
            let (dp, dq) = match variant {
                JacobianVariant::Standard => {
                    (sum_p + 2.0 * gii * vm[i], sum_q - 2.0 * bii * vm[i])
                }
                JacobianVariant::AltDiagonal => {
                    if vm[i] == 0.0 {
                        return Err(NewtonError::DivisionByZeroVm(net.buses()[i].id));
                    }
                    let bus = &net.buses()[i];
                    (
                        bus.p_inject / vm[i] + gii * vm[i],
                        bus.q_inject / vm[i] - bii * vm[i],
                    )
                }
            };
            j[(i, ns + i)] = dp;
            j[(ns + i, ns + i)] = dq;
        }
    }
    Ok(j)
}

fn apply_step(net: &Network, state: &mut BusState, dx: &[f64]) {
    let ns = net.slack_index();
    for (a, d) in state.va[..ns].iter_mut().zip(dx) {
        *a += d;
    }
    for (m, d) in state.vm[..net.n_pq()].iter_mut().zip(&dx[ns..]) {
        *m += d;
    }
}

/// Full-step Newton-Raphson.
pub fn solve_nr(
    net: &Network,
    start: &Start,
    variant: JacobianVariant,
    tol: f64,
    max_iter: usize,
) -> Result<NrResult, NewtonError> {
    let y = crate::network::ybus(net);
    let mut state = match start {
        Start::Flat => BusState::flat(net),
        Start::State(s) => s.aligned(net)?,
        Start::Tangent {
            base_net,
            base,
            param,
        } => {
            let target = param.value(net)?;
            tangent_predict(base_net, base, param, target)?.aligned(net)?
        }
    };
    let mut trajectory = Vec::new();
    let mut it = 0;
    loop {
        let f = mismatch(net, &y, &state);
        let norm = inf_norm(&f);
        let min_vm = state.vm.iter().cloned().fold(f64::INFINITY, f64::min);
        trajectory.push(TraceRow {
            iteration: it,
            mismatch_norm: norm,
            min_vm,
        });
        let finite = norm.is_finite() && state.vm.iter().chain(&state.va).all(|x| x.is_finite());
        let status = if !finite || norm > DIVERGENCE_LIMIT {
            Some(NrStatus::Diverged)
        } else if norm < tol {
            Some(NrStatus::Converged)
        } else if it == max_iter {
            Some(NrStatus::MaxIterations)
        } else {
            None
        };
        if let Some(status) = status {
            if finite {
                normalize(&mut state);
            }
            return Ok(NrResult {
                status,
                state,
                iterations: it,
                final_mismatch: norm,
                trajectory,
            });
        }
        let j = jacobian(net, &y, &state, variant)?;
        let rhs = DVector::from_iterator(f.len(), f.iter().map(|x| -x));
        let dx = j
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|x| x.is_finite()))
            .ok_or(NewtonError::SingularJacobian { iteration: it })?;
        apply_step(net, &mut state, dx.as_slice());
        it += 1;
    }
}

/// Polar coordinates are not unique: the iteration may end on a negative
/// magnitude. Report the same phasor with `|V| >= 0` and the angle wrapped
/// to `(-pi, pi]`.
fn normalize(state: &mut BusState) {
    use core::f64::consts::PI;
    for (m, a) in state.vm.iter_mut().zip(state.va.iter_mut()) {
        if *m < 0.0 {
            *m = -*m;
            *a += PI;
        }
        *a = libm::remainder(*a, 2.0 * PI);
        if *a <= -PI {
            *a += 2.0 * PI;
        }
    }
}

pub fn min_singular_value(j: &DMatrix<f64>) -> f64 {
    j.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `d|V_b| / dQ_b` at a solution, for a unit reactive injection at `bus`.
/// A PV bus is treated as PQ pinned at its current reactive output.
pub fn vq_sensitivity(net: &Network, solution: &BusState, bus: BusId) -> Result<f64, NewtonError> {
    let net = match net.bus(bus).map(|b| b.kind) {
        None => return Err(NewtonError::Network(crate::NetworkError::UnknownBus(bus))),
        Some(BusKind::Slack) => return Err(NewtonError::NotPq(bus)),
        Some(BusKind::Pq) => net.clone(),
        Some(BusKind::Pv) => {
            let y = crate::network::ybus(net);
            let st = solution.aligned(net)?;
            let k = net.index_of(bus).expect("checked");
            let q = bus_powers(&y, &st)[k].im;
            net.with_pv_as_pq(bus, q)?
        }
    };
    let y = crate::network::ybus(&net);
    let st = solution.aligned(&net)?;
    let j = jacobian(&net, &y, &st, JacobianVariant::Standard)?;
    let ns = net.slack_index();
    let k = net.index_of(bus).expect("checked");
    let mut e = DVector::zeros(j.nrows());
    e[ns + k] = 1.0;
    let x = j
        .lu()
        .solve(&e)
        .ok_or(NewtonError::SingularJacobian { iteration: 0 })?;
    Ok(x[ns + k])
}

/// Step from a solution of `net` along the tangent of the solution curve
/// (null vector of the Jacobian augmented with the parameter column) until
/// `param` reaches `target`.
pub fn tangent_predict(
    net: &Network,
    base: &BusState,
    param: &ParameterRef,
    target: f64,
) -> Result<BusState, NewtonError> {
    let base = base.aligned(net)?;
    let delta = target - param.value(net)?;
    if delta == 0.0 {
        return Ok(base);
    }
    let y = crate::network::ybus(net);
    let j = jacobian(net, &y, &base, JacobianVariant::Standard)?;
    let n = j.nrows();
    let ns = net.slack_index();
    let k = net.index_of(param.bus).expect("validated parameter");
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&j);
    match param.field {
        crate::network::ParamField::ActiveInjection => aug[(k, n)] = -1.0,
        crate::network::ParamField::ReactiveLoad => aug[(ns + k, n)] = 1.0,
    }
    let svd = aug.svd(false, true);
    let v_t = svd.v_t.ok_or(NewtonError::SingularAugmented)?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let t = v_t.row(imin);
    let tp = t[n];
    if !(tp.abs() > 1e-12) {
        return Err(NewtonError::SingularAugmented);
    }
    let scale = delta / tp;
    let dx: Vec<f64> = (0..n).map(|i| t[i] * scale).collect();
    let mut out = base;
    apply_step(net, &mut out, &dx);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{builtin_network, ybus, Branch, Bus};

    #[test]
    fn normalize_keeps_the_phasor() {
        let mut s = BusState {
            ids: vec![1, 2, 3],
            vm: vec![-0.15, 0.8, -1.0],
            va: vec![0.3, 7.0, -3.0],
        };
        let before = s.phasors();
        normalize(&mut s);
        assert!(s.vm.iter().all(|&m| m >= 0.0));
        assert!(s.va.iter().all(|a| a.abs() <= core::f64::consts::PI));
        for (a, b) in before.iter().zip(s.phasors()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn random_state(net: &Network, seed: u64) -> BusState {
        // small LCG, enough for test states
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut s = BusState::flat(net);
        let ns = net.slack_index();
        for i in 0..ns {
            s.va[i] = (next() - 0.5) * 1.0;
            if i < net.n_pq() {
                s.vm[i] = 0.5 + next();
            }
        }
        s
    }

    #[test]
    fn flat_state_without_injections_has_zero_mismatch() {
        let net = Network::new(
            "idle",
            vec![Bus::slack(0, 1.0), Bus::pq(1, 0.0, 0.0), Bus::pv(2, 0.0, 1.0)],
            vec![Branch::new(0, 1, 0.1, 0.2), Branch::new(1, 2, 0.1, 0.3)],
        )
        .unwrap();
        let f = mismatch(&net, &ybus(&net), &BusState::flat(&net));
        assert!(f.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn variants_differ_only_on_replaced_diagonals() {
        let net = builtin_network("paper-7bus").unwrap();
        let y = ybus(&net);
        let s = random_state(&net, 7);
        let a = jacobian(&net, &y, &s, JacobianVariant::Standard).unwrap();
        let b = jacobian(&net, &y, &s, JacobianVariant::AltDiagonal).unwrap();
        let ns = net.slack_index();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                let replaced = (r < net.n_pq() && c == ns + r) || (r >= ns && c == r);
                if replaced {
                    assert!((a[(r, c)] - b[(r, c)]).abs() > 1e-6);
                } else {
                    assert_eq!(a[(r, c)], b[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn alt_diagonal_rejects_zero_magnitude() {
        let net = builtin_network("paper-7bus").unwrap();
        let mut s = BusState::flat(&net);
        s.vm[2] = 0.0;
        assert_eq!(
            jacobian(&net, &ybus(&net), &s, JacobianVariant::AltDiagonal),
            Err(NewtonError::DivisionByZeroVm(3))
        );
    }

    #[test]
    fn smallest_singular_value_of_diagonal() {
        let j = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert!((min_singular_value(&j) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn state_alignment_follows_ids() {
        let net = builtin_network("paper-7bus").unwrap();
        let mut s = BusState::flat(&net);
        s.ids.reverse();
        s.vm.reverse();
        s.va.reverse();
        assert_eq!(s.aligned(&net).unwrap(), BusState::flat(&net));
        let short = BusState {
            ids: vec![0],
            vm: vec![1.0],
            va: vec![0.0],
        };
        assert!(short.aligned(&net).is_err());
    }

    #[test]
    fn zero_tangent_step_returns_base() {
        let net = builtin_network("paper-7bus").unwrap();
        let base = BusState::flat(&net);
        let p = ParameterRef::active(6);
        assert_eq!(tangent_predict(&net, &base, &p, 1.0).unwrap(), base);
    }
}
