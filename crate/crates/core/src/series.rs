//! Holomorphic embedding of the power-flow equations and its power series.
//!
//! With `z` the embedding parameter and `W_i(z)` the series satisfying
//! `W_i(z) * conj(V_i(conj z)) = 1`:
//!
//! * slack: `V_s(z) = 1 + (V_s^sp - 1) z`
//! * PQ: `sum_k Y_ik V_k(z) = z conj(S_i) W_i(z)`, `S_i` the complex injection
//! * PV: `sum_k Y_ik V_k(z) = (z P_i - j Q_i(z)) W_i(z)` with `Q_i` real,
//!   `Q_i(0) = 0`, and `V_i(z) conj(V_i(conj z)) = 1 + (|V_i^sp|^2 - 1) z`
//!
//! At `z = 0` every bus sits at `1 + 0j` with no current flowing; at `z = 1`
//! the equations are the original ones. Matching powers of `z` gives a real
//! linear system per order whose matrix does not depend on the order, so it
//! is factored once.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::SeriesError;
use crate::linalg::Lu;
use crate::mp::{self, Float, MpComplex, Precision};
use crate::network::{ybus, AdmittanceMatrix, BusId, BusKind, Network};

/// Digits kept in reserve when judging cancellation in the recurrences.
const LOSS_MARGIN: f64 = 10.0;

#[derive(Debug, Clone)]
enum Rule {
    Pq { s_conj: MpComplex },
    Pv { p: Float, mag_step: Float },
}

#[derive(Debug, Clone)]
struct Slot {
    /// First real unknown (and first equation row) of the bus.
    col: usize,
    rule: Rule,
}

/// The embedded equations of one network at a fixed working precision.
#[derive(Debug, Clone)]
pub struct EmbeddedSystem {
    net: Network,
    y: AdmittanceMatrix,
    prec: Precision,
    slots: Vec<Slot>,
    nvar: usize,
    lu: Lu<Float>,
    /// Non-slack block of Y, row-major.
    y_mp: Vec<MpComplex>,
    /// Column of Y towards the slack bus.
    y_slack: Vec<MpComplex>,
    /// First-order coefficient of the slack series, `V_s^sp - 1`.
    slack_step: MpComplex,
    factorizations: usize,
}

/// Series coefficients of one bus.
#[derive(Debug, Clone, PartialEq)]
pub struct BusSeries {
    pub id: BusId,
    pub kind: BusKind,
    pub v: Vec<MpComplex>,
    /// Reciprocal-conjugate series `W`.
    pub w: Vec<MpComplex>,
    /// Reactive series `Q` (PV buses only, empty otherwise).
    pub q: Vec<Float>,
}

/// Power series of every bus voltage through `order`, in internal bus order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSeries {
    buses: Vec<BusSeries>,
    precision: Precision,
}

impl VoltageSeries {
    /// Highest power of `z` present.
    pub fn order(&self) -> usize {
        self.buses[0].v.len() - 1
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// All buses, slack last.
    pub fn buses(&self) -> &[BusSeries] {
        &self.buses
    }

    pub fn bus(&self, id: BusId) -> Option<&BusSeries> {
        self.buses.iter().find(|b| b.id == id)
    }
}

/// Build and factor the embedded system at precision `prec`.
pub fn embed(net: &Network, prec: Precision) -> Result<EmbeddedSystem, SeriesError> {
    let y = ybus(net);
    let ns = net.slack_index();
    let mut slots = Vec::with_capacity(ns);
    let mut col = 0;
    for bus in &net.buses()[..ns] {
        let rule = match bus.kind {
            BusKind::Pq => Rule::Pq {
                s_conj: MpComplex::from_c64(bus.s_inject().conj(), prec),
            },
            BusKind::Pv => Rule::Pv {
                p: mp::from_f64(bus.p_inject, prec),
                mag_step: &mp::from_f64(bus.v_setpoint, prec) * &mp::from_f64(bus.v_setpoint, prec)
                    - mp::one(prec),
            },
            BusKind::Slack => unreachable!("slack is last"),
        };
        let width = if matches!(rule, Rule::Pv { .. }) { 3 } else { 2 };
        slots.push(Slot { col, rule });
        col += width;
    }
    let nvar = col;

    // Y at working precision, built from the impedances so row sums vanish
    // to working precision rather than to f64 rounding.
    let n = net.len();
    let mut y_all = vec![MpComplex::zero(prec); n * n];
    for br in net.branches() {
        let a = net.index_of(br.from).expect("validated");
        let b = net.index_of(br.to).expect("validated");
        let ys = MpComplex::from_c64(br.impedance, prec).recip();
        y_all[a * n + a] += &ys;
        y_all[b * n + b] += &ys;
        y_all[a * n + b] -= &ys;
        y_all[b * n + a] -= &ys;
    }

    let mut a = vec![mp::zero(prec); nvar * nvar];
    for (i, si) in slots.iter().enumerate() {
        let r = si.col;
        for (k, sk) in slots.iter().enumerate() {
            let yik = &y_all[i * n + k];
            let c = sk.col;
            a[r * nvar + c] = yik.re.clone();
            a[r * nvar + c + 1] = -&yik.im;
            a[(r + 1) * nvar + c] = yik.im.clone();
            a[(r + 1) * nvar + c + 1] = yik.re.clone();
        }
        if let Rule::Pv { .. } = si.rule {
            // +j q[n] w[0] lands in the imaginary row; 2 Re v[n] in the magnitude row.
            a[(r + 1) * nvar + r + 2] = mp::one(prec);
            a[(r + 2) * nvar + r] = mp::from_f64(2.0, prec);
        }
    }
    let lu = Lu::factor(nvar, a, prec)
        .map_err(|e| SeriesError::SingularEmbedding { step: e.step })?;

    let y_mp = (0..ns)
        .flat_map(|i| (0..ns).map(move |k| i * n + k))
        .map(|ik| y_all[ik].clone())
        .collect();
    let y_slack = (0..ns).map(|i| y_all[i * n + ns].clone()).collect();
    let slack = net.slack();
    let vs = Complex64::from_polar(slack.v_setpoint, slack.slack_angle);
    Ok(EmbeddedSystem {
        net: net.clone(),
        y,
        prec,
        slots,
        nvar,
        lu,
        y_mp,
        y_slack,
        slack_step: MpComplex::from_c64(vs - 1.0, prec),
        factorizations: 1,
    })
}

/// Embed with the precision policy for Padé half-orders up to `max_half_order`.
pub fn embed_for_order(net: &Network, max_half_order: usize) -> Result<EmbeddedSystem, SeriesError> {
    embed(net, Precision::for_half_order(max_half_order))
}

impl EmbeddedSystem {
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn admittance(&self) -> &AdmittanceMatrix {
        &self.y
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Real unknowns per order.
    pub fn unknowns(&self) -> usize {
        self.nvar
    }

    /// How many times the system matrix has been factored (always 1).
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    /// The order-0 series: every bus at `1 + 0j`, `W = 1`, `Q = 0`.
    pub fn germ(&self) -> VoltageSeries {
        let p = self.prec;
        let buses = self
            .net
            .buses()
            .iter()
            .map(|b| BusSeries {
                id: b.id,
                kind: b.kind,
                v: vec![MpComplex::one(p)],
                w: vec![MpComplex::one(p)],
                q: if b.kind == BusKind::Pv {
                    vec![mp::zero(p)]
                } else {
                    Vec::new()
                },
            })
            .collect();
        VoltageSeries {
            buses,
            precision: p,
        }
    }

    /// Series through order `target_order`, starting from the germ.
    pub fn series(&self, target_order: usize) -> Result<VoltageSeries, SeriesError> {
        self.extend(&self.germ(), target_order)
    }

    /// Continue `s` to `target_order`. A no-op when `s` is already that long.
    pub fn extend(&self, s: &VoltageSeries, target_order: usize) -> Result<VoltageSeries, SeriesError> {
        let consistent = s.precision == self.prec
            && s.buses.len() == self.net.len()
            && s.buses.iter().zip(self.net.buses()).all(|(a, b)| a.id == b.id && a.kind == b.kind);
        if !consistent {
            return Err(SeriesError::Mismatch);
        }
        let mut out = s.clone();
        for n in out.order() + 1..=target_order {
            self.step(&mut out.buses, n)?;
        }
        Ok(out)
    }

    fn step(&self, buses: &mut [BusSeries], n: usize) -> Result<(), SeriesError> {
        let p = self.prec;
        let ns = self.slots.len();
        let mut rhs = vec![mp::zero(p); self.nvar];
        let mut biggest_term = f64::NEG_INFINITY;
        for (i, slot) in self.slots.iter().enumerate() {
            let b = &buses[i];
            let mut val = match &slot.rule {
                Rule::Pq { s_conj } => s_conj * &b.w[n - 1],
                Rule::Pv { p: pw, .. } => {
                    let mut acc = b.w[n - 1].scale(pw);
                    let mut conv = MpComplex::zero(p);
                    for m in 1..n {
                        conv += &b.w[n - m].scale(&b.q[m]);
                    }
                    acc -= &conv.mul_i();
                    acc
                }
            };
            if n == 1 {
                val -= &(&self.y_slack[i] * &self.slack_step);
            }
            rhs[slot.col] = val.re;
            rhs[slot.col + 1] = val.im;
            if let Rule::Pv { mag_step, .. } = &slot.rule {
                let mut acc = if n == 1 { mag_step.clone() } else { mp::zero(p) };
                for m in 1..n {
                    let t = &b.v[m] * &b.v[n - m].conj();
                    biggest_term = biggest_term.max(t.log10_abs());
                    acc -= &t.re;
                }
                rhs[slot.col + 2] = acc;
            }
        }
        let x = self.lu.solve(&rhs);

        let mut biggest_result = f64::NEG_INFINITY;
        for (i, slot) in self.slots.iter().enumerate() {
            let b = &mut buses[i];
            let v = MpComplex::new(x[slot.col].clone(), x[slot.col + 1].clone());
            biggest_result = biggest_result.max(v.log10_abs());
            b.v.push(v);
            if let Rule::Pv { .. } = slot.rule {
                b.q.push(x[slot.col + 2].clone());
            }
            push_reciprocal(b, n);
        }
        // Slack series is linear in z.
        let slack = &mut buses[ns];
        slack.v.push(if n == 1 {
            &MpComplex::one(p) * &self.slack_step
        } else {
            MpComplex::zero(p)
        });
        push_reciprocal(slack, n);

        let lost = biggest_term - biggest_result;
        let budget = p.decimal_digits() as f64 - LOSS_MARGIN;
        if lost.is_finite() && lost > budget {
            return Err(SeriesError::PrecisionExhausted {
                order: n,
                digits: p.decimal_digits(),
                lost,
            });
        }
        Ok(())
    }

    /// Largest relative residual, as `log10`, of the embedded equations
    /// evaluated on the truncated series, over every bus and order up to the
    /// series order. Computed from the full products, independently of the
    /// recurrence used by [`extend`](Self::extend).
    pub fn residual_log10(&self, s: &VoltageSeries) -> f64 {
        let p = self.prec;
        let ns = self.slots.len();
        let y_full = |i: usize, k: usize| -> MpComplex {
            if k == ns {
                self.y_slack[i].clone()
            } else {
                self.y_mp[i * ns + k].clone()
            }
        };
        let mut worst = f64::NEG_INFINITY;
        let mut record = |res: &MpComplex, scale: f64| {
            let r = res.log10_abs() - scale.max(0.0);
            worst = worst.max(r);
        };
        for n in 0..=s.order() {
            for (i, slot) in self.slots.iter().enumerate() {
                let b = &s.buses[i];
                let mut lhs = MpComplex::zero(p);
                let mut scale = f64::NEG_INFINITY;
                for k in 0..=ns {
                    let t = &y_full(i, k) * &s.buses[k].v[n];
                    scale = scale.max(t.log10_abs());
                    lhs += &t;
                }
                let rhs = match (&slot.rule, n) {
                    (_, 0) => MpComplex::zero(p),
                    (Rule::Pq { s_conj }, _) => s_conj * &b.w[n - 1],
                    (Rule::Pv { p: pw, .. }, _) => {
                        let mut conv = MpComplex::zero(p);
                        for m in 0..=n {
                            conv += &b.w[n - m].scale(&b.q[m]);
                        }
                        &b.w[n - 1].scale(pw) - &conv.mul_i()
                    }
                };
                record(&(&lhs - &rhs), scale);
                if let Rule::Pv { mag_step, .. } = &slot.rule {
                    let mut prod = MpComplex::zero(p);
                    let mut scale = 0.0f64;
                    for m in 0..=n {
                        let t = &b.v[m] * &b.v[n - m].conj();
                        scale = scale.max(t.log10_abs());
                        prod += &t;
                    }
                    let target = match n {
                        0 => MpComplex::one(p),
                        1 => MpComplex::from_real(mag_step.clone(), p),
                        _ => MpComplex::zero(p),
                    };
                    record(&(&prod - &target), scale);
                }
            }
        }
        worst
    }
}

/// `w[n] = -sum_{m=1..n} conj(v[m]) w[n-m]`.
fn push_reciprocal(b: &mut BusSeries, n: usize) {
    let mut acc = &b.v[1].conj() * &b.w[n - 1];
    for m in 2..=n {
        acc += &(&b.v[m].conj() * &b.w[n - m]);
    }
    b.w.push(-&acc);
}
