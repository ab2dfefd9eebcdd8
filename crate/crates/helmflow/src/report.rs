//! Report bodies and their JSON, CSV and SVG renderings.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use helmflow_core::mp;
use helmflow_core::newton::{NrResult, NrStatus, TraceRow};
use helmflow_core::pade::ZeroPoleSet;
use helmflow_core::series::VoltageSeries;
use helmflow_core::stability::{
    BusVoltage, FeasibilityVerdict, LimitOutcome, SnbResult, SweepRecord, SwitchedBus,
};
use helmflow_core::{BusId, NewtonError, StabilityError};
use num_complex::Complex64;
use serde::Serialize;

/// Envelope shared by every JSON report: the resolved configuration, a
/// timestamp, and the command-specific body flattened alongside.
#[derive(Debug, Serialize)]
pub struct Report<'a, C: Serialize, B: Serialize> {
    pub timestamp: u64,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

impl<'a, C: Serialize, B: Serialize> Report<'a, C, B> {
    pub fn new(config: &'a C, body: B) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report { timestamp, config, body }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VoltageRow {
    pub bus: BusId,
    pub re: f64,
    pub im: f64,
    pub mag: f64,
    pub deg: f64,
}

impl From<&BusVoltage> for VoltageRow {
    fn from(b: &BusVoltage) -> Self {
        VoltageRow {
            bus: b.id,
            re: b.v.re,
            im: b.v.im,
            mag: b.mag(),
            deg: b.deg(),
        }
    }
}

fn voltage_rows(v: &FeasibilityVerdict) -> Option<Vec<VoltageRow>> {
    v.solution.as_ref().map(|s| s.iter().map(VoltageRow::from).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct BusDeltas {
    pub bus: BusId,
    pub status: &'static str,
    /// `|V(1)|` at every order.
    pub magnitudes: Vec<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveBody {
    pub network: String,
    pub status: &'static str,
    pub voltages: Option<Vec<VoltageRow>>,
    pub margin_zc: Option<f64>,
    pub orders: Vec<usize>,
    pub deltas: Vec<BusDeltas>,
    pub branch_points: Vec<(usize, Option<f64>)>,
    pub escalated: bool,
    pub mismatch: Option<f64>,
    pub note: Option<String>,
}

impl SolveBody {
    pub fn new(network: &str, v: &FeasibilityVerdict) -> Self {
        let e = &v.evidence;
        SolveBody {
            network: network.to_string(),
            status: v.status.name(),
            voltages: voltage_rows(v),
            margin_zc: v.margin,
            orders: e.orders.clone(),
            deltas: e
                .buses
                .iter()
                .map(|(id, c)| BusDeltas {
                    bus: *id,
                    status: match c.status {
                        helmflow_core::pade::ConvergenceStatus::Converged => "Converged",
                        helmflow_core::pade::ConvergenceStatus::Diverged => "Diverged",
                    },
                    magnitudes: c.values.iter().map(|z| z.norm()).collect(),
                    deltas: c.deltas.clone(),
                })
                .collect(),
            branch_points: e.branch_points.clone(),
            escalated: e.escalated,
            mismatch: e.mismatch,
            note: e.note.clone(),
        }
    }
}

pub fn nr_status_name(s: NrStatus) -> &'static str {
    match s {
        NrStatus::Converged => "Converged",
        NrStatus::Diverged => "Diverged",
        NrStatus::MaxIterations => "MaxIterations",
    }
}

fn nr_name(r: &Result<NrResult, NewtonError>) -> &'static str {
    match r {
        Ok(r) => nr_status_name(r.status),
        Err(_) => "Error",
    }
}

fn helm_name(r: &Result<FeasibilityVerdict, StabilityError>) -> &'static str {
    match r {
        Ok(v) => v.status.name(),
        Err(_) => "Error",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NrSummary {
    pub status: &'static str,
    pub iterations: Option<usize>,
    pub final_mismatch: Option<f64>,
    pub magnitudes: Option<Vec<(BusId, f64)>>,
    pub error: Option<String>,
}

impl From<&Result<NrResult, NewtonError>> for NrSummary {
    fn from(r: &Result<NrResult, NewtonError>) -> Self {
        match r {
            Ok(r) => NrSummary {
                status: nr_status_name(r.status),
                iterations: Some(r.iterations),
                final_mismatch: Some(r.final_mismatch),
                magnitudes: Some(r.state.ids.iter().copied().zip(r.state.vm.iter().copied()).collect()),
                error: None,
            },
            Err(e) => NrSummary {
                status: "Error",
                iterations: None,
                final_mismatch: None,
                magnitudes: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub helm_status: &'static str,
    pub helm_voltages: Option<Vec<VoltageRow>>,
    pub margin_zc: Option<f64>,
    pub helm_error: Option<String>,
    pub nr_flat: NrSummary,
    pub nr_alt: NrSummary,
    pub match_flat: bool,
    pub match_alt: bool,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        let (helm_voltages, margin_zc, helm_error) = match &r.helm {
            Ok(v) => (voltage_rows(v), v.margin, None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        SweepRow {
            value: r.value,
            helm_status: helm_name(&r.helm),
            helm_voltages,
            margin_zc,
            helm_error,
            nr_flat: (&r.nr_flat).into(),
            nr_alt: (&r.nr_alt).into(),
            match_flat: r.match_flat,
            match_alt: r.match_alt,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepBody {
    pub network: String,
    pub param: String,
    pub records: Vec<SweepRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketRow {
    pub lo: f64,
    pub hi: f64,
    pub probe: f64,
    pub status: &'static str,
    pub margin_zc: Option<f64>,
    pub feasible_side: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnbBody {
    pub network: String,
    pub param: String,
    pub snb: f64,
    pub lo: f64,
    pub hi: f64,
    pub indeterminate_probes: usize,
    pub history: Vec<BracketRow>,
}

impl SnbBody {
    pub fn new(network: &str, param: String, r: &SnbResult) -> Self {
        SnbBody {
            network: network.to_string(),
            param,
            snb: r.value,
            lo: r.lo,
            hi: r.hi,
            indeterminate_probes: r.indeterminate,
            history: r
                .history
                .iter()
                .map(|s| BracketRow {
                    lo: s.lo,
                    hi: s.hi,
                    probe: s.probe,
                    status: s.status.name(),
                    margin_zc: s.margin,
                    feasible_side: s.feasible_side,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchedRow {
    pub bus: BusId,
    pub side: &'static str,
    pub limit: f64,
    pub q_requested: f64,
    pub v_setpoint: f64,
    pub v_on_limit: Option<f64>,
    pub dv_dq: Option<f64>,
    pub unstable: bool,
}

impl From<&SwitchedBus> for SwitchedRow {
    fn from(s: &SwitchedBus) -> Self {
        SwitchedRow {
            bus: s.id,
            side: s.side.name(),
            limit: s.limit,
            q_requested: s.q_requested,
            v_setpoint: s.v_setpoint,
            v_on_limit: s.v_on_limit,
            dv_dq: s.sensitivity,
            unstable: s.unstable(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitsBody {
    pub network: String,
    pub status: &'static str,
    pub off_limit: SolveBody,
    pub q_off_limit: Vec<(BusId, f64)>,
    pub on_limit: Option<SolveBody>,
    pub switched: Vec<SwitchedRow>,
    pub rounds: usize,
}

impl LimitsBody {
    pub fn new(network: &str, o: &LimitOutcome) -> Self {
        LimitsBody {
            network: network.to_string(),
            status: o.status.name(),
            off_limit: SolveBody::new(network, &o.off_limit),
            q_off_limit: o.q_off_limit.clone(),
            on_limit: o.on_limit.as_ref().map(|v| SolveBody::new(network, v)),
            switched: o.switched.iter().map(SwitchedRow::from).collect(),
            rounds: o.rounds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleBus {
    pub bus: BusId,
    pub order: usize,
    pub branch_point: Option<f64>,
    pub zeros: usize,
    pub poles: usize,
    pub spurious_pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolesBody {
    pub source: String,
    pub order: usize,
    pub digits: u32,
    /// Smallest per-bus estimate.
    pub branch_point: Option<f64>,
    pub buses: Vec<PoleBus>,
}

// --- CSV --------------------------------------------------------------------

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// `bus,order,re,im` with each coefficient as a decimal string at the
/// series' working precision.
pub fn write_series_csv<W: Write>(out: W, s: &VoltageSeries) -> io::Result<()> {
    let digits = s.precision().decimal_digits();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "order", "re", "im"]).map_err(csv_err)?;
    for b in s.buses() {
        for (k, c) in b.v.iter().enumerate() {
            w.write_record([
                b.id.to_string(),
                k.to_string(),
                mp::to_decimal_string(&c.re, digits),
                mp::to_decimal_string(&c.im, digits),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

/// `bus,kind,re,im,spurious` for every zero and pole.
pub fn write_zero_pole_csv<W: Write>(out: W, sets: &[(BusId, ZeroPoleSet)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "kind", "re", "im", "spurious"]).map_err(csv_err)?;
    for (id, zp) in sets {
        let rows = zp
            .zeros
            .iter()
            .zip(&zp.zero_spurious)
            .map(|r| ("zero", r))
            .chain(zp.poles.iter().zip(&zp.pole_spurious).map(|r| ("pole", r)));
        for (kind, (z, sp)) in rows {
            w.write_record([
                id.to_string(),
                kind.to_string(),
                format!("{:.12e}", z.re),
                format!("{:.12e}", z.im),
                sp.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

fn mags(ids: &[BusId], v: impl Fn(BusId) -> Option<f64>) -> Vec<String> {
    ids.iter()
        .map(|&id| v(id).map(|m| format!("{m:.6}")).unwrap_or_default())
        .collect()
}

/// One row per parameter value; voltage columns are magnitudes of the
/// non-slack buses `ids`.
pub fn write_sweep_csv<W: Write>(out: W, ids: &[BusId], records: &[SweepRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["param".to_string(), "helm_status".to_string()];
    head.extend(ids.iter().map(|id| format!("helm_V{id}")));
    head.push("zc".into());
    for tag in ["nr_flat", "nr_alt"] {
        head.push(format!("{tag}_status"));
        head.extend(ids.iter().map(|id| format!("{tag}_V{id}")));
    }
    head.push("match_flat".into());
    head.push("match_alt".into());
    w.write_record(&head).map_err(csv_err)?;

    for r in records {
        let mut row = vec![format!("{}", r.value), helm_name(&r.helm).to_string()];
        let helm = r.helm.as_ref().ok();
        row.extend(mags(ids, |id| helm.and_then(|v| v.voltage(id)).map(|c| c.norm())));
        row.push(helm.and_then(|v| v.margin).map(|c| format!("{c:.6}")).unwrap_or_default());
        for nr in [&r.nr_flat, &r.nr_alt] {
            row.push(nr_name(nr).to_string());
            let st = nr.as_ref().ok().filter(|n| n.status == NrStatus::Converged);
            row.extend(mags(ids, |id| st.and_then(|n| n.state.vm_of(id))));
        }
        row.push(r.match_flat.to_string());
        row.push(r.match_alt.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

/// `iteration,mismatch_norm,min_vm`.
pub fn write_nr_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "mismatch_norm", "min_vm"]).map_err(csv_err)?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            format!("{:e}", t.mismatch_norm),
            format!("{}", t.min_vm),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

// --- SVG --------------------------------------------------------------------

/// Scatter of one zero-pole set: circles for zeros, crosses for poles,
/// spurious pairs greyed, `z = 1` marked with a red diamond.
pub fn zero_pole_svg(title: &str, zp: &ZeroPoleSet) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    let pts = zp.zeros.iter().chain(&zp.poles).filter(|p| p.re.is_finite() && p.im.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 1.5f64, -0.5f64, 0.5f64);
    for p in pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let s = ((W - 2.0 * PAD) / (x1 - x0)).min((H - 2.0 * PAD) / (y1 - y0));
    let at = |p: Complex64| (PAD + (p.re - x0) * s, H - PAD - (p.im - y0) * s);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        escape(title)
    );
    let (ax0, ay) = at(Complex64::new(x0, 0.0));
    let (ax1, _) = at(Complex64::new(x1, 0.0));
    let (ox, oy0) = at(Complex64::new(0.0, y0));
    let (_, oy1) = at(Complex64::new(0.0, y1));
    svg += &format!("<line x1=\"{ax0:.1}\" y1=\"{ay:.1}\" x2=\"{ax1:.1}\" y2=\"{ay:.1}\" stroke=\"#999\"/>\n");
    svg += &format!("<line x1=\"{ox:.1}\" y1=\"{oy0:.1}\" x2=\"{ox:.1}\" y2=\"{oy1:.1}\" stroke=\"#999\"/>\n");
    for (z, sp) in zp.zeros.iter().zip(&zp.zero_spurious) {
        let (x, y) = at(*z);
        let c = if *sp { "#bbb" } else { "#1f4e9c" };
        svg += &format!("<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"none\" stroke=\"{c}\"/>\n");
    }
    for (p, sp) in zp.poles.iter().zip(&zp.pole_spurious) {
        let (x, y) = at(*p);
        let c = if *sp { "#bbb" } else { "#b22222" };
        svg += &format!(
            "<path d=\"M{:.1} {:.1}L{:.1} {:.1}M{:.1} {:.1}L{:.1} {:.1}\" stroke=\"{c}\"/>\n",
            x - 3.0,
            y - 3.0,
            x + 3.0,
            y + 3.0,
            x - 3.0,
            y + 3.0,
            x + 3.0,
            y - 3.0
        );
    }
    let (x, y) = at(Complex64::new(1.0, 0.0));
    svg += &format!(
        "<path d=\"M{x:.1} {:.1}L{:.1} {y:.1}L{x:.1} {:.1}L{:.1} {y:.1}Z\" fill=\"red\"/>\n",
        y - 5.0,
        x + 5.0,
        y + 5.0,
        x - 5.0
    );
    svg += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">z=1</text>\n</svg>\n",
        x + 6.0,
        y - 6.0
    );
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
