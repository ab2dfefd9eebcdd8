//! Newton-Raphson properties: Jacobian against finite differences,
//! quadratic convergence, variant agreement, V-Q sensitivity and the
//! tangent predictor.

use helmflow_core::newton::{self, BusState, JacobianVariant, NrStatus, Start};
use helmflow_core::stability::{solve_stable, StableOptions};
use helmflow_core::{builtin_network, ybus, BusKind, Network, ParameterRef};
use proptest::prelude::*;

fn seven_bus(p6: f64) -> Network {
    builtin_network("paper-7bus").unwrap().with_active_injection(6, p6).unwrap()
}

fn solve(net: &Network, variant: JacobianVariant, tol: f64) -> BusState {
    let r = newton::solve_nr(net, &Start::Flat, variant, tol, 50).unwrap();
    assert_eq!(r.status, NrStatus::Converged);
    r.state
}

/// Mismatch as a function of the unknowns `(theta non-slack, |V| PQ)`.
fn residual(net: &Network, base: &BusState, x: &[f64]) -> Vec<f64> {
    let ns = net.slack_index();
    let mut s = base.clone();
    s.va[..ns].copy_from_slice(&x[..ns]);
    s.vm[..net.n_pq()].copy_from_slice(&x[ns..]);
    newton::mismatch(net, &ybus(net), &s)
}

fn unknowns(net: &Network, s: &BusState) -> Vec<f64> {
    let ns = net.slack_index();
    let mut x = s.va[..ns].to_vec();
    x.extend_from_slice(&s.vm[..net.n_pq()]);
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_central_differences(
        fixture in 0usize..3,
        angles in prop::collection::vec(-0.6f64..0.6, 6),
        mags in prop::collection::vec(0.5f64..1.3, 6),
    ) {
        let net = builtin_network(["paper-6bus", "paper-7bus", "paper-7bus-no12"][fixture]).unwrap();
        let mut st = BusState::flat(&net);
        for i in 0..net.slack_index() {
            st.va[i] = angles[i];
            if net.buses()[i].kind == BusKind::Pq {
                st.vm[i] = mags[i];
            }
        }
        let j = newton::jacobian(&net, &ybus(&net), &st, JacobianVariant::Standard).unwrap();
        let x = unknowns(&net, &st);
        let h = 1e-6;
        for c in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (residual(&net, &st, &xp), residual(&net, &st, &xm));
            for r in 0..x.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                prop_assert!((j[(r, c)] - fd).abs() < 1e-6, "J[{},{}] = {} vs {}", r, c, j[(r, c)], fd);
            }
        }
    }
}

#[test]
fn convergence_is_quadratic() {
    let net = seven_bus(0.2);
    let r = newton::solve_nr(&net, &Start::Flat, JacobianVariant::Standard, 1e-12, 50).unwrap();
    assert_eq!(r.status, NrStatus::Converged);
    let e: Vec<f64> = r.trajectory.iter().map(|t| t.mismatch_norm).collect();
    // Once inside the basin the error roughly squares every step.
    let tail: Vec<_> = e.windows(2).filter(|w| w[0] < 1e-2 && w[1] > 1e-14).collect();
    assert!(!tail.is_empty(), "{e:?}");
    for w in tail {
        assert!(w[1] < 50.0 * w[0] * w[0], "{e:?}");
    }
}

#[test]
fn variants_agree_at_a_solution() {
    for (net, _) in [(seven_bus(0.2), 0), (seven_bus(0.9), 1)] {
        let a = solve(&net, JacobianVariant::Standard, 1e-10);
        let b = solve(&net, JacobianVariant::AltDiagonal, 1e-10);
        for (x, y) in a.phasors().iter().zip(b.phasors()) {
            assert!((x - y).norm() < 1e-8);
        }
        let y = ybus(&net);
        let js = newton::jacobian(&net, &y, &a, JacobianVariant::Standard).unwrap();
        let ja = newton::jacobian(&net, &y, &a, JacobianVariant::AltDiagonal).unwrap();
        assert!((js - ja).amax() < 1e-7);
    }
}

/// `|V|` at `bus` after adding `dq` of reactive injection there, solved from
/// `start`.
fn vm_after(net: &Network, start: &BusState, bus: u32, dq: f64) -> f64 {
    let n = net.with_bus(bus, |b| b.q_inject += dq).unwrap();
    let r = newton::solve_nr(&n, &Start::State(start.clone()), JacobianVariant::Standard, 1e-14, 20).unwrap();
    assert!(r.final_mismatch < 1e-12);
    r.state.vm_of(bus).unwrap()
}

#[test]
fn vq_sensitivity_matches_finite_difference() {
    let net = seven_bus(0.75);
    let st = solve(&net, JacobianVariant::Standard, 1e-13);
    let dq = 1e-6;
    for bus in [1, 2, 4] {
        let s = newton::vq_sensitivity(&net, &st, bus).unwrap();
        let fd = (vm_after(&net, &st, bus, dq) - vm_after(&net, &st, bus, -dq)) / (2.0 * dq);
        assert!((s - fd).abs() < 1e-5, "bus {bus}: {s} vs {fd}");
        assert!(s > 0.0, "stable branch has positive dV/dQ");
    }
    // PV bus: pinned at its present output.
    let q5 = newton::bus_powers(&ybus(&net), &st)[net.index_of(5).unwrap()].im;
    let pinned = net.with_pv_as_pq(5, q5).unwrap();
    let s = newton::vq_sensitivity(&net, &st, 5).unwrap();
    let fd = (vm_after(&pinned, &st, 5, dq) - vm_after(&pinned, &st, 5, -dq)) / (2.0 * dq);
    assert!((s - fd).abs() < 1e-5, "bus 5: {s} vs {fd}");
}

#[test]
fn short_tangent_step_lands_on_the_embedding_solution() {
    let base_net = seven_bus(0.0);
    let base = solve(&base_net, JacobianVariant::Standard, 1e-12);
    let param = ParameterRef::active(6);
    let target = seven_bus(0.05);
    let r = newton::solve_nr(
        &target,
        &Start::Tangent { base_net: base_net.clone(), base: base.clone(), param },
        JacobianVariant::Standard,
        1e-10,
        50,
    )
    .unwrap();
    assert_eq!(r.status, NrStatus::Converged);
    let helm = solve_stable(&target, &StableOptions::with_schedule(vec![10, 15, 20])).unwrap();
    for (id, v) in r.state.ids.iter().zip(r.state.phasors()) {
        assert!((helm.voltage(*id).unwrap() - v).norm() < 1e-6, "bus {id}");
    }
}

#[test]
fn tangent_predictor_error_is_second_order() {
    let base_net = seven_bus(0.0);
    let base = solve(&base_net, JacobianVariant::Standard, 1e-12);
    let err = |d: f64| {
        let exact = newton::solve_nr(
            &seven_bus(d),
            &Start::State(base.clone()),
            JacobianVariant::Standard,
            1e-13,
            50,
        )
        .unwrap()
        .state;
        let pred = newton::tangent_predict(&base_net, &base, &ParameterRef::active(6), d).unwrap();
        pred.phasors()
            .iter()
            .zip(exact.phasors())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    let ratio = err(0.01) / err(0.001);
    assert!((50.0..200.0).contains(&ratio), "error ratio {ratio}");
}

/// Slow to settle: about 70 full steps, past the default iteration cap.
#[test]
fn long_tangent_step_reaches_a_false_solution() {
    let base_net = seven_bus(0.0);
    let base = solve(&base_net, JacobianVariant::Standard, 1e-12);
    let target = seven_bus(1.0);
    let r = newton::solve_nr(
        &target,
        &Start::Tangent { base_net, base, param: ParameterRef::active(6) },
        JacobianVariant::Standard,
        1e-8,
        150,
    )
    .unwrap();
    assert_eq!(r.status, NrStatus::Converged);
    let helm = solve_stable(&target, &StableOptions::default()).unwrap();
    let gap = r
        .state
        .ids
        .iter()
        .zip(r.state.phasors())
        .map(|(id, v)| (helm.voltage(*id).unwrap() - v).norm())
        .fold(0.0, f64::max);
    assert!(gap > 0.1, "landed on the embedding solution: {:?}", r.state.vm);
}
