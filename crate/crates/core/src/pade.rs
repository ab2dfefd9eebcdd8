//! Diagonal Padé approximants in working precision, their zeros and poles,
//! the branch-point estimate on the positive real axis, and order-convergence
//! assessment at `z = 1`.
//!
//! Series are rescaled by a power of two before the Toeplitz solve so that
//! the coefficients are of order one; the approximant stores the scaled
//! polynomials together with the scale exponent.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::PadeError;
use crate::linalg::Lu;
use crate::mp::{self, MpComplex, Precision};
use crate::series::VoltageSeries;
use crate::network::{BusId, BusKind};

/// Poles with `|Im| <= AXIS_WEDGE * Re` count as lying on the positive real
/// axis. Series with complex coefficients put the cut slightly off the axis,
/// so an absolute tolerance is far too tight.
pub const AXIS_WEDGE: f64 = 0.05;

/// Digits of headroom below working precision for "numerically zero".
const ZERO_MARGIN: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct PadeApproximant {
    pub m: usize,
    /// Numerator of the scaled approximant, ascending powers of `u = 2^k z`.
    num: Vec<MpComplex>,
    /// Denominator of the scaled approximant, `den[0] = 1`.
    den: Vec<MpComplex>,
    scale_log2: isize,
    pub precision: Precision,
}

impl PadeApproximant {
    /// Numerator coefficients in powers of `z`.
    pub fn num(&self) -> Vec<MpComplex> {
        self.unscale(&self.num)
    }

    /// Denominator coefficients in powers of `z`; the first is 1.
    pub fn den(&self) -> Vec<MpComplex> {
        self.unscale(&self.den)
    }

    fn unscale(&self, p: &[MpComplex]) -> Vec<MpComplex> {
        p.iter()
            .enumerate()
            .map(|(i, c)| c.scale(&mp::pow2(self.scale_log2 * i as isize)))
            .collect()
    }

    fn to_u(&self, z: &MpComplex) -> MpComplex {
        z.scale(&mp::pow2(self.scale_log2))
    }

    /// Taylor coefficients of `num/den` through order `n`.
    pub fn expand(&self, n: usize) -> Vec<MpComplex> {
        let mut t: Vec<MpComplex> = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = self
                .num
                .get(k)
                .cloned()
                .unwrap_or_else(|| MpComplex::zero(self.precision));
            for j in 1..=k.min(self.den.len() - 1) {
                acc -= &(&self.den[j] * &t[k - j]);
            }
            t.push(acc);
        }
        let k = self.scale_log2;
        t.into_iter()
            .enumerate()
            .map(|(i, c)| c.scale(&mp::pow2(k * i as isize)))
            .collect()
    }
}

/// Largest power-of-two growth rate of the coefficients, `round(max log2|c_n| / n)`.
fn growth_log2(coeffs: &[MpComplex]) -> isize {
    let g = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| c.log10_abs() * core::f64::consts::LOG2_10 / n as f64)
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if g.is_finite() {
        libm::round(g) as isize
    } else {
        0
    }
}

/// `PA[m/m]` of the series `coeffs` (at least `2m + 1` terms).
pub fn pade(coeffs: &[MpComplex], m: usize, prec: Precision) -> Result<PadeApproximant, PadeError> {
    let need = 2 * m + 1;
    if coeffs.len() < need {
        return Err(PadeError::TooFewCoefficients {
            m,
            need,
            have: coeffs.len(),
        });
    }
    let k = growth_log2(&coeffs[..need]);
    let c: Vec<MpComplex> = coeffs[..need]
        .iter()
        .enumerate()
        .map(|(n, c)| c.with_precision(prec).scale(&mp::pow2(-k * n as isize)))
        .collect();

    let mut den = vec![MpComplex::one(prec)];
    if m > 0 {
        // sum_{j=1..m} b_j c_{m+r-j} = -c_{m+r}, r = 1..m. The matrix is
        // Toeplitz; the O(m^2) recursion is tried first and checked, with
        // pivoted LU as the fallback that also decides degeneracy.
        let rhs: Vec<MpComplex> = (1..=m).map(|r| -&c[m + r]).collect();
        match levinson(&c[1..2 * m], &rhs, prec).filter(|b| toeplitz_residual_ok(&c, m, b, prec)) {
            Some(b) => den.extend(b),
            None => {
                let mut a = Vec::with_capacity(m * m);
                for r in 1..=m {
                    for j in 1..=m {
                        a.push(c[m + r - j].clone());
                    }
                }
                let lu = Lu::factor(m, a, prec).map_err(|_| PadeError::DegenerateTable {
                    m,
                    digits: prec.decimal_digits(),
                })?;
                den.extend(lu.solve(&rhs));
            }
        }
    }
    let num = (0..=m)
        .map(|i| {
            let mut acc = c[i].clone();
            for j in 1..=i {
                acc += &(&den[j] * &c[i - j]);
            }
            acc
        })
        .collect();
    Ok(PadeApproximant {
        m,
        num,
        den,
        scale_log2: k,
        precision: prec,
    })
}

/// Solves `sum_j r[n-1+i-j] x_j = y_i` (`i, j = 0..n`) for a general Toeplitz
/// matrix given by its `2n-1` diagonals, by the bordering recursion of
/// Levinson and Trench. `None` when a leading principal minor is
/// numerically singular; the recursion does not pivot.
fn levinson(r: &[MpComplex], y: &[MpComplex], prec: Precision) -> Option<Vec<MpComplex>> {
    let n = y.len();
    debug_assert_eq!(r.len(), 2 * n - 1);
    let scale = r.iter().map(MpComplex::log10_abs).fold(f64::NEG_INFINITY, f64::max);
    let floor = scale - (prec.decimal_digits() as f64 - ZERO_MARGIN);
    let tiny = |d: &MpComplex| !(d.log10_abs() >= floor);
    // 1-based views to keep the index algebra readable
    let rr = |k: usize| &r[k - 1];
    let zero = MpComplex::zero(prec);
    let mut x = vec![zero.clone(); n + 1];
    let mut g = vec![zero.clone(); n + 1];
    let mut h = vec![zero; n + 1];
    if tiny(rr(n)) {
        return None;
    }
    x[1] = &y[0] / rr(n);
    if n == 1 {
        x.remove(0);
        return Some(x);
    }
    g[1] = rr(n - 1) / rr(n);
    h[1] = rr(n + 1) / rr(n);
    for m in 1..n {
        let m1 = m + 1;
        let mut sxn = -&y[m1 - 1];
        let mut sd = -rr(n);
        for j in 1..=m {
            sxn += &(rr(n + m1 - j) * &x[j]);
            sd += &(rr(n + m1 - j) * &g[m - j + 1]);
        }
        if tiny(&sd) {
            return None;
        }
        x[m1] = &sxn / &sd;
        for j in 1..=m {
            let t = &x[m1] * &g[m - j + 1];
            x[j] -= &t;
        }
        if m1 == n {
            x.remove(0);
            return Some(x);
        }
        let mut sgn = -rr(n - m1);
        let mut shn = -rr(n + m1);
        let mut sgd = -rr(n);
        for j in 1..=m {
            sgn += &(rr(n + j - m1) * &g[j]);
            shn += &(rr(n + m1 - j) * &h[j]);
            sgd += &(rr(n + j - m1) * &h[m - j + 1]);
        }
        if tiny(&sgd) {
            return None;
        }
        g[m1] = &sgn / &sgd;
        h[m1] = &shn / &sd;
        let (pp, qq) = (g[m1].clone(), h[m1].clone());
        let mut k = m;
        for j in 1..=m.div_ceil(2) {
            let (pt1, pt2) = (g[j].clone(), g[k].clone());
            let (qt1, qt2) = (h[j].clone(), h[k].clone());
            g[j] = &pt1 - &(&pp * &qt2);
            g[k] = &pt2 - &(&pp * &qt1);
            h[j] = &qt1 - &(&qq * &pt2);
            h[k] = &qt2 - &(&qq * &pt1);
            k -= 1;
        }
    }
    None
}

/// Backward-error check of a Padé denominator solve: the residual must sit
/// at rounding level relative to the terms that produced it.
fn toeplitz_residual_ok(c: &[MpComplex], m: usize, b: &[MpComplex], prec: Precision) -> bool {
    let blog = b.iter().map(MpComplex::log10_abs).fold(0.0f64, f64::max);
    let clog = c[1..=2 * m].iter().map(MpComplex::log10_abs).fold(f64::NEG_INFINITY, f64::max);
    let floor = clog + blog + libm::log10(m as f64) - (prec.decimal_digits() as f64 - 2.0 * ZERO_MARGIN);
    (1..=m).all(|r| {
        let mut acc = c[m + r].clone();
        for j in 1..=m {
            acc += &(&c[m + r - j] * &b[j - 1]);
        }
        !(acc.log10_abs() > floor)
    })
}

/// `log10` of the worst relative Taylor mismatch of `pa` against `coeffs`
/// through order `n`, measured on the rescaled coefficients.
pub fn taylor_mismatch_log10(pa: &PadeApproximant, coeffs: &[MpComplex], n: usize) -> f64 {
    let t = pa.expand(n);
    let k = pa.scale_log2;
    let mut worst = f64::NEG_INFINITY;
    let mut scale = 0.0f64;
    for (i, (a, b)) in t.iter().zip(coeffs).enumerate() {
        let s = mp::pow2(-k * i as isize);
        scale = scale.max(b.scale(&s).log10_abs());
        worst = worst.max((a - b).scale(&s).log10_abs());
    }
    worst - scale
}

/// Like [`pade`], but when the table is degenerate at `m` (typically because
/// the series is an exact rational of lower degree) falls back to the largest
/// lower order whose approximant still reproduces the series through `2m`.
pub fn pade_or_lower(
    coeffs: &[MpComplex],
    m: usize,
    prec: Precision,
) -> Result<PadeApproximant, PadeError> {
    match pade(coeffs, m, prec) {
        Err(PadeError::DegenerateTable { .. }) => {
            let accept = -(prec.decimal_digits() as f64 - ZERO_MARGIN);
            for lower in (0..m).rev() {
                if let Ok(pa) = pade(coeffs, lower, prec) {
                    if taylor_mismatch_log10(&pa, coeffs, 2 * m) < accept {
                        return Ok(PadeApproximant { m, ..pa });
                    }
                }
            }
            Err(PadeError::DegenerateTable {
                m,
                digits: prec.decimal_digits(),
            })
        }
        other => other,
    }
}

fn horner(p: &[MpComplex], u: &MpComplex) -> MpComplex {
    let mut acc = p.last().cloned().expect("non-empty polynomial");
    for c in p.iter().rev().skip(1) {
        acc = &(&acc * u) + c;
    }
    acc
}

/// `num(z) / den(z)` in working precision.
pub fn eval(pa: &PadeApproximant, z: &MpComplex) -> Result<MpComplex, PadeError> {
    let u = pa.to_u(z);
    let d = horner(&pa.den, &u);
    let u_abs = u.log10_abs();
    let size = pa
        .den
        .iter()
        .enumerate()
        .map(|(j, b)| b.log10_abs() + if j == 0 { 0.0 } else { j as f64 * u_abs })
        .fold(f64::NEG_INFINITY, f64::max);
    if d.log10_abs() < size - (pa.precision.decimal_digits() as f64 - ZERO_MARGIN) {
        return Err(PadeError::PoleAtPoint);
    }
    Ok(&horner(&pa.num, &u) / &d)
}

pub fn eval_c64(pa: &PadeApproximant, z: Complex64) -> Result<Complex64, PadeError> {
    eval(pa, &MpComplex::from_c64(z, pa.precision)).map(|v| v.to_c64())
}

/// Zeros and poles of an approximant.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPoleSet {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    /// Froissart-doublet markers, parallel to `zeros` / `poles`.
    pub zero_spurious: Vec<bool>,
    pub pole_spurious: Vec<bool>,
    pub branch_point: Option<f64>,
}

/// All zeros and poles of `pa`, with near-coincident zero/pole pairs
/// (closer than `10^(-digits/4)`) flagged as spurious.
pub fn roots(pa: &PadeApproximant) -> Result<ZeroPoleSet, PadeError> {
    let prec = pa.precision;
    let back = mp::pow2(-pa.scale_log2);
    let zeros: Vec<MpComplex> = poly_roots(&pa.num, prec)?
        .iter()
        .map(|u| u.scale(&back))
        .collect();
    let poles: Vec<MpComplex> = poly_roots(&pa.den, prec)?
        .iter()
        .map(|u| u.scale(&back))
        .collect();
    let pair = -(prec.decimal_digits() as f64) / 4.0;
    let mut zero_spurious = vec![false; zeros.len()];
    let mut pole_spurious = vec![false; poles.len()];
    for (pi, p) in poles.iter().enumerate() {
        let rel = p.log10_abs().max(0.0);
        for (zi, z) in zeros.iter().enumerate() {
            if (p - z).log10_abs() < pair + rel {
                pole_spurious[pi] = true;
                zero_spurious[zi] = true;
            }
        }
    }
    let mut zp = ZeroPoleSet {
        zeros: zeros.iter().map(MpComplex::to_c64).collect(),
        poles: poles.iter().map(MpComplex::to_c64).collect(),
        zero_spurious,
        pole_spurious,
        branch_point: None,
    };
    zp.branch_point = branch_point(&zp);
    Ok(zp)
}

/// Poles of `pa` with Froissart markers, without locating the zeros: a pole
/// is spurious when a Newton step on the numerator from it is shorter than
/// the pairing distance used by [`roots`]. Cheaper than [`roots`] when only
/// the branch point is wanted.
pub fn poles(pa: &PadeApproximant) -> Result<(Vec<Complex64>, Vec<bool>), PadeError> {
    let prec = pa.precision;
    let pair = -(prec.decimal_digits() as f64) / 4.0;
    let back = mp::pow2(-pa.scale_log2);
    let mut out = Vec::new();
    let mut spurious = Vec::new();
    for u in poly_roots(&pa.den, prec)? {
        let p = u.scale(&back);
        let (f, df) = horner_with_derivative(&pa.num, &u, prec);
        // distance in u, mapped back to z
        let step = if df.is_zero() {
            f64::INFINITY
        } else {
            (&f / &df).scale(&back).log10_abs()
        };
        spurious.push(f.is_zero() || step < pair + p.log10_abs().max(0.0));
        out.push(p.to_c64());
    }
    Ok((out, spurious))
}

/// Closest branch point on the positive real axis, estimated from the pole
/// cluster the cut leaves there. Needs at least two non-spurious poles in the
/// axis wedge; with three or more, fits `p_k = c + (a + b k)^2` to the first
/// three (the spacing law of poles accumulating at a square-root branch
/// point) and returns `c`.
pub fn branch_point(zp: &ZeroPoleSet) -> Option<f64> {
    branch_point_of(&zp.poles, &zp.pole_spurious)
}

pub fn branch_point_of(poles: &[Complex64], spurious: &[bool]) -> Option<f64> {
    let mut axis: Vec<f64> = poles
        .iter()
        .zip(spurious)
        .filter(|(p, s)| !**s && p.re > 0.0 && p.im.abs() <= AXIS_WEDGE * p.re + 1e-6 * (1.0 + p.norm()))
        .map(|(p, _)| p.re)
        .collect();
    axis.sort_by(f64::total_cmp);
    match axis.len() {
        0 | 1 => None,
        2 => Some(axis[0]),
        _ => Some(sqrt_cluster_origin(axis[0], axis[1], axis[2])),
    }
}

/// Solves `sqrt(p1-c) + sqrt(p3-c) = 2 sqrt(p2-c)` for `c <= p1` by bisection.
/// Falls back to `p1` when the spacing does not fit the law.
fn sqrt_cluster_origin(p1: f64, p2: f64, p3: f64) -> f64 {
    let f = |c: f64| libm::sqrt(p1 - c) + libm::sqrt(p3 - c) - 2.0 * libm::sqrt(p2 - c);
    let hi = p1;
    let f_hi = f(hi);
    let mut lo = p1 - (p2 - p1).max(1e-12);
    let mut expansions = 0;
    while f(lo).signum() == f_hi.signum() {
        lo = p1 - 2.0 * (p1 - lo);
        expansions += 1;
        if expansions > 40 || lo <= 0.0 {
            return p1;
        }
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(a).signum() * f(mid).signum() <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let c = 0.5 * (a + b);
    if c > 0.0 {
        c
    } else {
        p1
    }
}

// --- polynomial roots -----------------------------------------------------

const F64_ITERS: usize = 300;
const MP_ITERS: usize = 200;

/// Roots of `sum_i p[i] u^i` by Aberth-Ehrlich simultaneous iteration: a
/// double-precision pass from Bini's initial circles, then refinement in
/// working precision.
pub fn poly_roots(p: &[MpComplex], prec: Precision) -> Result<Vec<MpComplex>, PadeError> {
    let logs: Vec<f64> = p.iter().map(MpComplex::log10_abs).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(Vec::new());
    }
    let negligible = top - (prec.decimal_digits() as f64 - ZERO_MARGIN);
    // Drop numerically vanishing leading coefficients and split off roots at 0.
    let hi = logs.iter().rposition(|&l| l > negligible).expect("top is finite");
    let lo = logs.iter().position(|&l| l > negligible).expect("top is finite");
    let mut out: Vec<MpComplex> = (0..lo).map(|_| MpComplex::zero(prec)).collect();
    let q = &p[lo..=hi];
    let qlogs = &logs[lo..=hi];
    let d = q.len() - 1;
    match d {
        0 => return Ok(out),
        1 => {
            out.push(-&(&q[0] / &q[1]));
            return Ok(out);
        }
        _ => {}
    }

    let mut z = initial_guesses(qlogs);
    let q64: Vec<Complex64> = {
        let shift = mp::pow2(-(libm::round(top * core::f64::consts::LOG2_10) as isize));
        q.iter().map(|c| c.scale(&shift).to_c64()).collect()
    };
    let guess = z.clone();
    aberth_f64(&q64, &mut z);
    for (zi, g) in z.iter_mut().zip(&guess) {
        if !(zi.re.is_finite() && zi.im.is_finite()) {
            *zi = *g;
        }
    }
    let mut zm: Vec<MpComplex> = z.iter().map(|c| MpComplex::from_c64(*c, prec)).collect();
    aberth_mp(q, &mut zm, prec)?;
    out.extend(zm);
    Ok(out)
}

/// Bini's starting points: one circle per edge of the upper convex hull of
/// `(i, log|p_i|)`, with radius from the edge slope.
fn initial_guesses(logs: &[f64]) -> Vec<Complex64> {
    let d = logs.len() - 1;
    let pts: Vec<(usize, f64)> = logs
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .map(|(i, &l)| (i, l))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let sigma = 0.7;
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut z = Vec::with_capacity(d);
    for w in hull.windows(2) {
        let ((i, li), (j, lj)) = (w[0], w[1]);
        let k = j - i;
        let r = libm::pow(10.0, (li - lj) / k as f64);
        for t in 0..k {
            let ang = two_pi * t as f64 / k as f64 + two_pi * i as f64 / d as f64 + sigma;
            z.push(Complex64::from_polar(r, ang));
        }
    }
    z
}

fn horner_with_derivative_f64(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut f = p[p.len() - 1];
    let mut df = Complex64::new(0.0, 0.0);
    for c in p.iter().rev().skip(1) {
        df = df * z + f;
        f = f * z + c;
    }
    (f, df)
}

/// Newton ratio `p(z)/p'(z)`; for `|z| > 1` evaluated through the reversed
/// polynomial to avoid overflow and cancellation.
fn newton_ratio_f64(p: &[Complex64], rev: &[Complex64], z: Complex64) -> Complex64 {
    if z.norm() <= 1.0 {
        let (f, df) = horner_with_derivative_f64(p, z);
        f / df
    } else {
        let w = z.inv();
        let (r, dr) = horner_with_derivative_f64(rev, w);
        let n = (p.len() - 1) as f64;
        z / (Complex64::new(n, 0.0) - w * dr / r)
    }
}

fn aberth_f64(p: &[Complex64], z: &mut [Complex64]) {
    let n = z.len();
    let rev: Vec<Complex64> = p.iter().rev().cloned().collect();
    let mut done = vec![false; n];
    for _ in 0..F64_ITERS {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let ratio = newton_ratio_f64(p, &rev, z[i]);
            if ratio == Complex64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let corr = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if !(corr.re.is_finite() && corr.im.is_finite()) {
                done[i] = true;
                continue;
            }
            z[i] -= corr;
            if corr.norm() <= 1e-14 * z[i].norm() {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }
}

fn aberth_mp(p: &[MpComplex], z: &mut [MpComplex], prec: Precision) -> Result<(), PadeError> {
    let n = z.len();
    let digits = prec.decimal_digits() as f64;
    // Corrections below this (relative) mean the next step would be at
    // working precision; one extra step is taken after crossing it.
    let tight = -(digits / 2.0);
    // Accept a root whose correction stalls above `tight` but below this;
    // clustered roots are only determined to about this many digits.
    let loose = -(digits / 4.0);
    let mut state = vec![0u8; n]; // 0 active, 1 last step, 2 done
    let mut last_corr = vec![0.0f64; n];
    let one = MpComplex::one(prec);
    for _ in 0..MP_ITERS {
        if state.iter().all(|&s| s == 2) {
            return Ok(());
        }
        for i in 0..n {
            if state[i] == 2 {
                continue;
            }
            let (f, df) = horner_with_derivative(p, &z[i], prec);
            if f.is_zero() {
                state[i] = 2;
                continue;
            }
            let ratio = &f / &df;
            let mut s = MpComplex::zero(prec);
            for j in 0..n {
                if j != i {
                    s += &(&z[i] - &z[j]).recip();
                }
            }
            let corr = &ratio / &(&one - &(&ratio * &s));
            let rel = corr.log10_abs() - z[i].log10_abs().max(-digits);
            z[i] -= &corr;
            last_corr[i] = rel;
            state[i] = match state[i] {
                1 => 2,
                _ if rel < tight || corr.is_zero() => 1,
                _ => 0,
            };
        }
    }
    let unconverged: Vec<f64> = (0..n).filter(|&i| state[i] == 0).map(|i| last_corr[i]).collect();
    let worst = unconverged.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst > loose {
        return Err(PadeError::RootFindingStalled {
            iterations: MP_ITERS,
            unconverged: unconverged.len(),
            log10_correction: worst,
        });
    }
    Ok(())
}

fn horner_with_derivative(p: &[MpComplex], z: &MpComplex, prec: Precision) -> (MpComplex, MpComplex) {
    let mut f = p[p.len() - 1].clone();
    let mut df = MpComplex::zero(prec);
    for c in p.iter().rev().skip(1) {
        df = &(&df * z) + &f;
        f = &(&f * z) + c;
    }
    (f, df)
}

// --- order convergence ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceStatus {
    Converged,
    Diverged,
}

/// Behaviour of `PA[m/m](1)` over an ascending list of half-orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict {
    pub status: ConvergenceStatus,
    /// Value at the largest order, present when converged.
    pub value: Option<Complex64>,
    /// Value at every order (NaN where the approximant has a pole at 1).
    pub values: Vec<Complex64>,
    pub orders_used: Vec<usize>,
    /// `|PA_k(1) - PA_{k-1}(1)|` for consecutive orders.
    pub deltas: Vec<f64>,
}

impl ConvergenceVerdict {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn last_value(&self) -> Option<Complex64> {
        self.values.last().copied().filter(|v| v.re.is_finite())
    }
}

/// Assess one series at `z = 1`: converged when the delta between the two
/// largest orders is below `tol`.
pub fn assess_series(
    coeffs: &[MpComplex],
    orders: &[usize],
    tol: f64,
    prec: Precision,
) -> Result<ConvergenceVerdict, PadeError> {
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut values = Vec::with_capacity(orders.len());
    for &m in orders {
        // Lower orders need fewer digits; cap at what the series carries.
        let p = Precision::for_half_order(m);
        let p = if p.bits() < prec.bits() { p } else { prec };
        let c: Vec<MpComplex> = coeffs.iter().map(|x| x.with_precision(p)).collect();
        let pa = pade_or_lower(&c, m, p)?;
        values.push(match eval(&pa, &MpComplex::one(p)) {
            Ok(v) => v.to_c64(),
            Err(PadeError::PoleAtPoint) => nan,
            Err(e) => return Err(e),
        });
    }
    let deltas: Vec<f64> = values
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]).norm();
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        })
        .collect();
    let converged = deltas.last().is_some_and(|&d| d < tol);
    Ok(ConvergenceVerdict {
        status: if converged {
            ConvergenceStatus::Converged
        } else {
            ConvergenceStatus::Diverged
        },
        value: if converged { values.last().copied() } else { None },
        values,
        orders_used: orders.to_vec(),
        deltas,
    })
}

/// [`assess_series`] for every non-slack bus voltage of `s`, in internal
/// bus order. The slack voltage is linear in `z` and needs no assessment.
pub fn assess(
    s: &VoltageSeries,
    orders: &[usize],
    tol: f64,
) -> Result<Vec<(BusId, ConvergenceVerdict)>, PadeError> {
    s.buses()
        .iter()
        .filter(|b| b.kind != BusKind::Slack)
        .map(|b| Ok((b.id, assess_series(&b.v, orders, tol, s.precision())?)))
        .collect()
}
