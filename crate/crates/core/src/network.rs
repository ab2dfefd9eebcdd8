//! Per-unit network model, validation, admittance matrix and built-in fixtures.
//!
//! Buses are stored in a fixed internal order: PQ buses by id, then PV buses
//! by id, then the slack bus. Every solver indexes state vectors in this
//! order; [`Network::index_of`] maps an external id to its position.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::NetworkError;

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusKind {
    Slack,
    Pq,
    Pv,
}

impl BusKind {
    fn rank(self) -> u8 {
        match self {
            BusKind::Pq => 0,
            BusKind::Pv => 1,
            BusKind::Slack => 2,
        }
    }
}

/// One bus. Injections use the generator convention: positive `p_inject` is
/// generation, a load of `0.2 + j0.1` is `p_inject = -0.2, q_inject = -0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub p_inject: f64,
    /// PQ buses only.
    pub q_inject: f64,
    /// Slack and PV buses only.
    pub v_setpoint: f64,
    pub q_max: Option<f64>,
    pub q_min: Option<f64>,
    /// Slack only, radians.
    pub slack_angle: f64,
}

impl Bus {
    pub fn slack(id: BusId, v_setpoint: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Slack,
            p_inject: 0.0,
            q_inject: 0.0,
            v_setpoint,
            q_max: None,
            q_min: None,
            slack_angle: 0.0,
        }
    }

    pub fn pq(id: BusId, p_inject: f64, q_inject: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Pq,
            p_inject,
            q_inject,
            v_setpoint: 1.0,
            q_max: None,
            q_min: None,
            slack_angle: 0.0,
        }
    }

    /// PQ bus drawing `p + jq`.
    pub fn load(id: BusId, p: f64, q: f64) -> Self {
        Bus::pq(id, -p, -q)
    }

    pub fn pv(id: BusId, p_inject: f64, v_setpoint: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Pv,
            p_inject,
            q_inject: 0.0,
            v_setpoint,
            q_max: None,
            q_min: None,
            slack_angle: 0.0,
        }
    }

    pub fn with_q_limits(mut self, q_min: Option<f64>, q_max: Option<f64>) -> Self {
        self.q_min = q_min;
        self.q_max = q_max;
        self
    }

    /// Complex power injection `p + jq` (PQ buses).
    pub fn s_inject(&self) -> Complex64 {
        Complex64::new(self.p_inject, self.q_inject)
    }
}

/// Series branch `from - to` with impedance `r + jx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub impedance: Complex64,
}

impl Branch {
    pub fn new(from: BusId, to: BusId, r: f64, x: f64) -> Self {
        Branch {
            from,
            to,
            impedance: Complex64::new(r, x),
        }
    }

    pub fn admittance(&self) -> Complex64 {
        self.impedance.inv()
    }
}

/// A validated network. Immutable; modified copies come from the `with_*`
/// builders, which re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
}

impl Network {
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
    ) -> Result<Self, NetworkError> {
        let mut buses = buses;
        buses.sort_by_key(|b| (b.kind.rank(), b.id));
        let net = Network {
            name: name.into(),
            buses,
            branches,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(NetworkError::DuplicateBus(b.id));
            }
            let finite = [b.p_inject, b.q_inject, b.v_setpoint, b.slack_angle]
                .iter()
                .chain(b.q_max.iter())
                .chain(b.q_min.iter())
                .all(|x| x.is_finite());
            if !finite {
                return Err(NetworkError::NonFinite(b.id));
            }
            match b.kind {
                BusKind::Slack | BusKind::Pv if b.v_setpoint <= 0.0 => {
                    return Err(NetworkError::BadSetpoint(b.id));
                }
                BusKind::Pv if b.q_inject != 0.0 => {
                    return Err(NetworkError::PvReactiveInjection(b.id));
                }
                _ => {}
            }
            if let (Some(lo), Some(hi)) = (b.q_min, b.q_max) {
                if lo > hi {
                    return Err(NetworkError::QLimitOrder(b.id));
                }
            }
        }
        let slacks: Vec<BusId> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
            .collect();
        match slacks.len() {
            0 => return Err(NetworkError::NoSlack),
            1 => {}
            _ => return Err(NetworkError::MultipleSlack(slacks)),
        }

        let mut pairs = BTreeSet::new();
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !seen.contains(&end) {
                    return Err(NetworkError::DanglingBranch {
                        from: br.from,
                        to: br.to,
                        missing: end,
                    });
                }
            }
            if br.from == br.to {
                return Err(NetworkError::SelfLoop(br.from));
            }
            if !(br.impedance.re.is_finite() && br.impedance.im.is_finite())
                || br.impedance.norm() == 0.0
            {
                return Err(NetworkError::ZeroImpedance {
                    from: br.from,
                    to: br.to,
                });
            }
            let key = (br.from.min(br.to), br.from.max(br.to));
            if !pairs.insert(key) {
                return Err(NetworkError::ParallelBranch {
                    from: br.from,
                    to: br.to,
                });
            }
        }

        // Connectivity from the slack bus.
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            let (a, b) = (self.idx(br.from), self.idx(br.to));
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut reached = vec![false; n];
        let mut stack = vec![self.slack_index()];
        reached[self.slack_index()] = true;
        while let Some(i) = stack.pop() {
            for &k in &adj[i] {
                if !reached[k] {
                    reached[k] = true;
                    stack.push(k);
                }
            }
        }
        let unreachable: Vec<BusId> = reached
            .iter()
            .zip(&self.buses)
            .filter(|(r, _)| !**r)
            .map(|(_, b)| b.id)
            .collect();
        if !unreachable.is_empty() {
            return Err(NetworkError::Disconnected(unreachable));
        }
        Ok(())
    }

    fn idx(&self, id: BusId) -> usize {
        self.buses.iter().position(|b| b.id == id).expect("validated id")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Buses in internal order (PQ, PV, slack).
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Position of the slack bus (always last).
    pub fn slack_index(&self) -> usize {
        self.buses.len() - 1
    }

    pub fn slack(&self) -> &Bus {
        &self.buses[self.slack_index()]
    }

    pub fn n_pq(&self) -> usize {
        self.buses.iter().filter(|b| b.kind == BusKind::Pq).count()
    }

    pub fn n_pv(&self) -> usize {
        self.buses.iter().filter(|b| b.kind == BusKind::Pv).count()
    }

    /// Ids of all non-slack buses in internal order.
    pub fn non_slack_ids(&self) -> Vec<BusId> {
        self.buses[..self.slack_index()].iter().map(|b| b.id).collect()
    }

    /// Ids of all buses sorted ascending (report order).
    pub fn sorted_ids(&self) -> Vec<BusId> {
        let mut ids: Vec<BusId> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Network {
            name: name.into(),
            ..self.clone()
        }
    }

    /// Copy with `f` applied to bus `id`, re-validated.
    pub fn with_bus(&self, id: BusId, f: impl FnOnce(&mut Bus)) -> Result<Self, NetworkError> {
        let mut buses = self.buses.clone();
        let bus = buses
            .iter_mut()
            .find(|b| b.id == id)
            .ok_or(NetworkError::UnknownBus(id))?;
        f(bus);
        Network::new(self.name.clone(), buses, self.branches.clone())
    }

    /// The slack balances the network and has no scheduled injection.
    pub fn with_active_injection(&self, id: BusId, p: f64) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Slack) => Err(NetworkError::IllegalField {
                id,
                field: "active injection",
            }),
            Some(_) => self.with_bus(id, |b| b.p_inject = p),
        }
    }

    /// Set the reactive load (consumption) at a PQ bus.
    pub fn with_reactive_load(&self, id: BusId, q_load: f64) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Pq) => self.with_bus(id, |b| b.q_inject = -q_load),
            Some(_) => Err(NetworkError::IllegalField {
                id,
                field: "reactive load",
            }),
        }
    }

    pub fn with_voltage_setpoint(&self, id: BusId, v: f64) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Pq) => Err(NetworkError::IllegalField {
                id,
                field: "voltage setpoint",
            }),
            Some(_) => self.with_bus(id, |b| b.v_setpoint = v),
        }
    }

    pub fn with_q_max(&self, id: BusId, q_max: Option<f64>) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Pv) => self.with_bus(id, |b| b.q_max = q_max),
            Some(_) => Err(NetworkError::IllegalField { id, field: "q_max" }),
        }
    }

    pub fn with_q_min(&self, id: BusId, q_min: Option<f64>) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Pv) => self.with_bus(id, |b| b.q_min = q_min),
            Some(_) => Err(NetworkError::IllegalField { id, field: "q_min" }),
        }
    }

    /// Turn PV bus `id` into a PQ bus injecting `p + j q`.
    pub fn with_pv_as_pq(&self, id: BusId, q: f64) -> Result<Self, NetworkError> {
        match self.bus(id).map(|b| b.kind) {
            None => Err(NetworkError::UnknownBus(id)),
            Some(BusKind::Pv) => self.with_bus(id, |b| {
                b.kind = BusKind::Pq;
                b.q_inject = q;
            }),
            Some(_) => Err(NetworkError::IllegalField {
                id,
                field: "PV to PQ switch",
            }),
        }
    }

    /// Copy without the branch joining `a` and `b`.
    pub fn without_branch(&self, a: BusId, b: BusId) -> Result<Self, NetworkError> {
        let before = self.branches.len();
        let branches: Vec<Branch> = self
            .branches
            .iter()
            .filter(|br| !((br.from == a && br.to == b) || (br.from == b && br.to == a)))
            .cloned()
            .collect();
        if branches.len() == before {
            return Err(NetworkError::UnknownBranch { from: a, to: b });
        }
        Network::new(self.name.clone(), self.buses.clone(), branches)
    }
}

/// Which scalar of a bus a sweep or bisection varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamField {
    /// `p_inject` (generation positive).
    ActiveInjection,
    /// Reactive consumption of a PQ bus (`-q_inject`).
    ReactiveLoad,
}

/// A free scalar parameter of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParameterRef {
    pub bus: BusId,
    pub field: ParamField,
}

impl ParameterRef {
    /// Checks that `bus` exists in `net` and that `field` is legal for it.
    pub fn new(net: &Network, bus: BusId, field: ParamField) -> Result<Self, NetworkError> {
        let kind = net.bus(bus).ok_or(NetworkError::UnknownBus(bus))?.kind;
        match (field, kind) {
            (_, BusKind::Slack) | (ParamField::ReactiveLoad, BusKind::Pv) => {
                Err(NetworkError::IllegalField {
                    id: bus,
                    field: field.name(),
                })
            }
            _ => Ok(ParameterRef { bus, field }),
        }
    }

    pub fn active(bus: BusId) -> Self {
        ParameterRef {
            bus,
            field: ParamField::ActiveInjection,
        }
    }

    pub fn reactive_load(bus: BusId) -> Self {
        ParameterRef {
            bus,
            field: ParamField::ReactiveLoad,
        }
    }

    pub fn value(&self, net: &Network) -> Result<f64, NetworkError> {
        let b = net.bus(self.bus).ok_or(NetworkError::UnknownBus(self.bus))?;
        Ok(match self.field {
            ParamField::ActiveInjection => b.p_inject,
            ParamField::ReactiveLoad => -b.q_inject,
        })
    }

    pub fn apply(&self, net: &Network, value: f64) -> Result<Network, NetworkError> {
        match self.field {
            ParamField::ActiveInjection => net.with_active_injection(self.bus, value),
            ParamField::ReactiveLoad => net.with_reactive_load(self.bus, value),
        }
    }

    /// Dotted form used on the command line, e.g. `bus6.p`.
    pub fn description(&self) -> String {
        alloc::format!("bus{}.{}", self.bus, self.field.name())
    }
}

impl ParamField {
    pub fn name(self) -> &'static str {
        match self {
            ParamField::ActiveInjection => "p",
            ParamField::ReactiveLoad => "qload",
        }
    }
}

/// Dense bus admittance matrix in internal bus order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    y: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.y[i * self.n + k]
    }

    pub fn g(&self, i: usize, k: usize) -> f64 {
        self.get(i, k).re
    }

    pub fn b(&self, i: usize, k: usize) -> f64 {
        self.get(i, k).im
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.y[i * self.n..(i + 1) * self.n]
    }

    /// Bus currents `Y V`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(y, v)| y * v).sum())
            .collect()
    }
}

pub fn ybus(net: &Network) -> AdmittanceMatrix {
    let n = net.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for br in net.branches() {
        let a = net.index_of(br.from).expect("validated");
        let b = net.index_of(br.to).expect("validated");
        let ys = br.admittance();
        y[a * n + a] += ys;
        y[b * n + b] += ys;
        y[a * n + b] -= ys;
        y[b * n + a] -= ys;
    }
    AdmittanceMatrix { n, y }
}

pub const FIXTURES: [&str; 3] = ["paper-6bus", "paper-7bus", "paper-7bus-no12"];

/// The built-in test networks. The slack bus has id 0.
pub fn builtin_network(name: &str) -> Result<Network, NetworkError> {
    match name {
        "paper-6bus" => Network::new(
            name,
            vec![
                Bus::slack(0, 1.0),
                Bus::load(1, 0.25, 0.10),
                Bus::load(2, 0.35, 0.10),
                Bus::load(3, 0.35, 0.20),
                Bus::pv(4, 0.90, 1.10),
                Bus::pv(5, 1.00, 1.10),
            ],
            vec![
                Branch::new(0, 1, 0.70, 0.40),
                Branch::new(1, 2, 0.50, 0.50),
                Branch::new(2, 5, 0.40, 0.50),
                Branch::new(2, 4, 0.30, 0.50),
                Branch::new(3, 5, 0.60, 0.80),
                Branch::new(2, 3, 0.50, 0.80),
            ],
        ),
        "paper-7bus" => Network::new(name, seven_bus_buses(), seven_bus_branches()),
        "paper-7bus-no12" => Network::new(name, seven_bus_buses(), seven_bus_branches())?
            .without_branch(1, 2)
            .map(|n| n.renamed(name)),
        other => Err(NetworkError::UnknownFixture(other.to_string())),
    }
}

fn seven_bus_buses() -> Vec<Bus> {
    vec![
        Bus::slack(0, 1.0),
        Bus::load(1, 0.20, 0.10),
        Bus::load(2, 0.10, 0.05),
        Bus::load(3, 0.20, 0.10),
        Bus::load(4, 0.20, 0.10),
        Bus::pv(5, 1.00, 1.10),
        Bus::pv(6, 1.00, 1.10),
    ]
}

fn seven_bus_branches() -> Vec<Branch> {
    vec![
        Branch::new(0, 1, 0.70, 0.40),
        Branch::new(1, 3, 0.50, 0.50),
        Branch::new(3, 6, 0.40, 0.50),
        Branch::new(1, 2, 0.40, 0.60),
        Branch::new(3, 5, 0.30, 0.50),
        Branch::new(2, 5, 0.30, 0.60),
        Branch::new(6, 4, 0.60, 0.80),
        Branch::new(3, 4, 0.50, 0.80),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> Network {
        Network::new(
            "two",
            vec![Bus::slack(0, 1.0), Bus::load(1, 0.1, 0.0)],
            vec![Branch::new(0, 1, 0.0, 0.1)],
        )
        .unwrap()
    }

    #[test]
    fn internal_order_is_pq_pv_slack() {
        let net = builtin_network("paper-7bus").unwrap();
        let ids: Vec<BusId> = net.buses().iter().map(|b| b.id).collect();
        assert_eq!(ids, [1, 2, 3, 4, 5, 6, 0]);
        assert_eq!(net.slack().id, 0);
    }

    #[test]
    fn fixture_shapes() {
        let n7 = builtin_network("paper-7bus").unwrap();
        assert_eq!((n7.len(), n7.branches().len(), n7.n_pv()), (7, 8, 2));
        let n12 = builtin_network("paper-7bus-no12").unwrap();
        assert_eq!((n12.len(), n12.branches().len(), n12.n_pv()), (7, 7, 2));
        assert!(n12
            .branches()
            .iter()
            .all(|b| !(b.from.min(b.to) == 1 && b.from.max(b.to) == 2)));
        let n6 = builtin_network("paper-6bus").unwrap();
        assert_eq!((n6.len(), n6.branches().len(), n6.n_pv()), (6, 6, 2));
        assert_eq!(
            builtin_network("nope"),
            Err(NetworkError::UnknownFixture("nope".into()))
        );
    }

    #[test]
    fn two_bus_admittance() {
        let y = ybus(&two_bus());
        // internal order: bus 1 then slack
        assert!((y.get(0, 0) - Complex64::new(0.0, -10.0)).norm() < 1e-12);
        assert!((y.get(0, 1) - Complex64::new(0.0, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn seven_bus_entries() {
        let net = builtin_network("paper-7bus").unwrap();
        let y = ybus(&net);
        let i = |id| net.index_of(id).unwrap();
        assert_eq!(y.get(i(1), i(6)), Complex64::new(0.0, 0.0));
        let expect = -Complex64::new(0.40, 0.50).inv();
        assert!((y.get(i(3), i(6)) - expect).norm() < 1e-15);
    }

    #[test]
    fn admittance_symmetric_with_zero_row_sums() {
        for name in FIXTURES {
            let y = ybus(&builtin_network(name).unwrap());
            for i in 0..y.dim() {
                let s: Complex64 = y.row(i).iter().sum();
                assert!(s.norm() < 1e-12);
                for k in 0..y.dim() {
                    assert_eq!(y.get(i, k), y.get(k, i));
                }
            }
        }
    }

    #[test]
    fn validation_errors_name_the_element() {
        let dangling = Network::new(
            "x",
            vec![Bus::slack(0, 1.0), Bus::load(1, 0.1, 0.0)],
            vec![Branch::new(0, 1, 0.0, 0.1), Branch::new(1, 3, 0.0, 0.1)],
        );
        assert_eq!(
            dangling,
            Err(NetworkError::DanglingBranch {
                from: 1,
                to: 3,
                missing: 3
            })
        );
        let two_slacks = Network::new(
            "x",
            vec![Bus::slack(0, 1.0), Bus::slack(1, 1.0)],
            vec![Branch::new(0, 1, 0.0, 0.1)],
        );
        assert_eq!(two_slacks, Err(NetworkError::MultipleSlack(vec![0, 1])));
        let zero_z = Network::new(
            "x",
            vec![Bus::slack(0, 1.0), Bus::load(1, 0.1, 0.0)],
            vec![Branch::new(0, 1, 0.0, 0.0)],
        );
        assert_eq!(zero_z, Err(NetworkError::ZeroImpedance { from: 0, to: 1 }));
        let island = Network::new(
            "x",
            vec![
                Bus::slack(0, 1.0),
                Bus::load(1, 0.1, 0.0),
                Bus::load(2, 0.1, 0.0),
            ],
            vec![Branch::new(0, 1, 0.0, 0.1)],
        );
        assert_eq!(island, Err(NetworkError::Disconnected(vec![2])));
        let limits = Network::new(
            "x",
            vec![
                Bus::slack(0, 1.0),
                Bus::pv(1, 0.1, 1.0).with_q_limits(Some(1.0), Some(0.5)),
            ],
            vec![Branch::new(0, 1, 0.0, 0.1)],
        );
        assert_eq!(limits, Err(NetworkError::QLimitOrder(1)));
    }

    #[test]
    fn parameter_edits() {
        let net = builtin_network("paper-7bus").unwrap();
        let n2 = net.with_reactive_load(2, 0.0518).unwrap();
        assert_eq!(n2.bus(2).unwrap().q_inject, -0.0518);
        assert!(net.with_reactive_load(5, 0.1).is_err());
        assert!(matches!(
            net.with_active_injection(0, 1.0),
            Err(NetworkError::IllegalField { id: 0, .. })
        ));
        let n3 = net.with_pv_as_pq(5, 0.75).unwrap();
        assert_eq!(n3.bus(5).unwrap().kind, BusKind::Pq);
        assert_eq!(n3.buses().last().unwrap().id, 0);
        assert_eq!(n3.index_of(5), Some(4));
    }
}
