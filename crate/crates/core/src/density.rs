//! Explicit points of the graph `{(alpha, D~(alpha)) : alpha in K}` near a prescribed
//! point `(x, (sqrt|d| i)^{-1} I(x - z))`.
//!
//! Given convergent matrices `M_x = M_{m,x}` and `M_z = M_{n,z}`, the witness is
//! `A = M_x T^u S* T^{-u} M_z^{-1}` with `S = M_x^{-1} M_z` and `S* = S`, or
//! `[[0, -1], [1, 0]] S` when `S(inf) = inf`. Then `alpha = A(inf)` is close to `x`,
//! `beta = A^{-1}(inf)` is close to `z`, and `Phi(A) = 0` forces
//! `D~(alpha) = (sqrt|d| i)^{-1} I(alpha - beta)`.
//!
//! On `GL_2(O_K)`, `Phi` satisfies `Phi(XY) = Phi(X) + det(X) Phi(Y)`, so the
//! telescoped certificate weights each factor by the determinant of the product to
//! its left. Its total is `(det M_x - det M_z) E2 I(u)`, and the construction only
//! uses depth pairs with `det M_x = det M_z`.
//!
//! When a convergent matrix is not in `GL_2(O_K)` (class number > 1), `u` is a
//! multiple `k g` of a translation `g` for which both `P_x(g)` and `P_z(g)` are
//! integral, with `P(t) = M T^t M^{-1}`. Then `A = P_x(u) P_z(-u)` and
//! `Phi(A) = k (Phi(P_x(g)) - Phi(P_z(g)))`. The map `t -> Phi(P(t))` is additive
//! but need not vanish on real `t` at a cusp outside the principal class, so `g`
//! is chosen in its kernel.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::cfmartin::{expand, AdmissibleSet, CFExpansion};
use crate::dedekind::{dedekind_sum, normalizer, phi, sum_with_table};
use crate::eisenstein::EisensteinContext;
use crate::error::{Error, Result};
use crate::matrix::{KMat2, Mat2O};
use crate::qfield::{CosetTable, Field, KElement, QuadInt};

/// Expansion depth explored when looking for certified convergents.
pub const DEFAULT_DEPTH_CAP: usize = 30;

#[derive(Clone, Debug)]
pub struct WitnessParams {
    pub x: Complex64,
    pub z: Complex64,
    pub eps_target: f64,
    /// Admissible set driving both expansions.
    pub adm: AdmissibleSet,
    pub depth_cap: usize,
    /// Largest `N(u)` tried.
    pub u_norm_bound: f64,
    /// Replaces the lower bound `2/zeta` on `|W(inf)|` (then `|delta_i| < eps` is
    /// checked directly instead of being certified in advance).
    pub w_floor_override: Option<f64>,
    /// Largest `N(c)` for each factor of the `Phi` certificate.
    pub phi_budget: u64,
    /// Largest `N(c)` of `A` for which `D~(alpha)` is summed directly.
    pub direct_budget: u64,
}

impl WitnessParams {
    pub fn new(x: Complex64, z: Complex64, eps_target: f64, adm: AdmissibleSet) -> Result<Self> {
        if !(eps_target > 0.0) {
            return Err(Error::Usage(format!("eps_target must be positive, got {eps_target}")));
        }
        if x.im == 0.0 || z.im == 0.0 {
            return Err(Error::Usage("targets need nonzero imaginary parts".into()));
        }
        Ok(WitnessParams {
            x,
            z,
            eps_target,
            adm,
            depth_cap: DEFAULT_DEPTH_CAP,
            u_norm_bound: 1e8,
            w_floor_override: None,
            phi_budget: 8_000_000,
            direct_budget: 100_000,
        })
    }

    /// `zeta = (1 - eps^2)^2 / (4 eps^2 mu^2)` of the admissible set.
    pub fn zeta(&self) -> f64 {
        self.adm.zeta()
    }

    /// `delta = zeta / 2`.
    pub fn delta(&self) -> f64 {
        self.zeta() / 2.0
    }

    /// `1 / (zeta - delta) = 2 / zeta`, unless overridden.
    pub fn w_floor(&self) -> f64 {
        self.w_floor_override
            .unwrap_or(1.0 / (self.zeta() - self.delta()))
    }

    fn certified(&self) -> bool {
        self.w_floor_override.is_none()
    }
}

/// Bound on `|z - M_n W(inf)|` valid for every `W` with `|1/W(inf)| <= v`:
/// `(|r_n| + v |r_{n-1}|) / (|q_n| - v |q_{n-1}|)` with `r_k = q_k z - p_k`.
/// `None` when the denominator is not positive.
pub fn lemma_bound(exp: &CFExpansion, n: usize, v: f64) -> Option<f64> {
    if n == 0 || n > exp.len() {
        return None;
    }
    let den = exp.q(n).abs() - v * exp.q(n - 1).abs();
    if den <= 0.0 {
        return None;
    }
    Some((exp.errors[n].norm() + v * exp.errors[n - 1].norm()) / den)
}

/// Per-step data of [`approx_diagnostic`].
#[derive(Clone, Debug, Serialize)]
pub struct ApproxRow {
    pub n: usize,
    /// `|q_n + w q_{n-1}| / |q_{n-1}|` (infinite for `n = 1`).
    pub denominator_ratio: f64,
    /// `|z - M_n W(inf)|`.
    pub distance: f64,
    /// [`lemma_bound`] at `v = |w|`.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    /// `false` when `W` does not meet the precondition; no rows are produced then.
    pub accepted: bool,
    pub reason: Option<String>,
    pub rows: Vec<ApproxRow>,
    /// Whether `|q_n + w q_{n-1}| > delta |q_{n-1}|` held at every step.
    pub denominators_ok: bool,
}

impl ApproxReport {
    /// First depth at which `|z - M_n W(inf)| < eps`.
    pub fn first_within(&self, eps: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.distance < eps).map(|r| r.n)
    }
}

/// Checks the approximation lemma along an expansion for a fixed `W`.
pub fn approx_diagnostic(exp: &CFExpansion, w: &KMat2, delta: f64) -> ApproxReport {
    let zeta = exp.adm.zeta();
    let reject = |reason: String| ApproxReport {
        accepted: false,
        reason: Some(reason),
        rows: Vec::new(),
        denominators_ok: false,
    };
    if !(delta > 0.0 && delta < zeta) {
        return reject(format!("delta = {delta} outside (0, zeta = {zeta})"));
    }
    let Some(w_inf) = w.at_infinity() else {
        return reject("W(inf) = inf".into());
    };
    let floor = 1.0 / (zeta - delta);
    if w_inf.abs() < floor {
        return reject(format!("|W(inf)| = {} < 1/(zeta - delta) = {floor}", w_inf.abs()));
    }
    let winv = match w_inf.inv() {
        Ok(v) => v,
        Err(_) => return reject("W(inf) = 0".into()),
    };
    let wc = winv.to_complex();
    let mut rows = Vec::new();
    let mut denominators_ok = true;
    for n in 1..=exp.len() {
        let q = exp.q(n).to_complex();
        let q1 = exp.q(n - 1).to_complex();
        let ratio = if n == 1 {
            f64::INFINITY
        } else {
            (q + wc * q1).norm() / q1.norm()
        };
        if !(ratio > delta) {
            denominators_ok = false;
        }
        let image = exp.mats[n].apply_exact(&w_inf);
        let distance = image
            .map(|p| (exp.z - p.to_complex()).norm())
            .unwrap_or(f64::INFINITY);
        rows.push(ApproxRow {
            n,
            denominator_ratio: ratio,
            distance,
            bound: lemma_bound(exp, n, wc.norm()),
        });
    }
    ApproxReport {
        accepted: true,
        reason: None,
        rows,
        denominators_ok,
    }
}

/// `S* = S` if `S(inf) != inf`, else `[[0, -1], [1, 0]] S`.
pub fn build_sstar(s: &KMat2) -> (KMat2, bool) {
    if s.c.is_zero() {
        (&KMat2::quarter_turn(s.field()) * s, true)
    } else {
        (s.clone(), false)
    }
}

/// Least positive integer `L` with `M T^L M^{-1}` integral.
pub fn parabolic_period(m: &KMat2) -> Result<BigInt> {
    let e = KMat2::new(
        KElement::zero(m.field()),
        KElement::one(m.field()),
        KElement::zero(m.field()),
        KElement::zero(m.field()),
    );
    let n = &(m * &e) * &m.inverse()?;
    Ok(n.entries()
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.den())))
}

/// `M T^t M^{-1}`.
pub fn parabolic(m: &KMat2, t: &KElement) -> Result<KMat2> {
    Ok(&(m * &KMat2::translation(t)) * &m.inverse()?)
}

/// How `Phi(A) = 0` was certified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Route {
    /// `M_x, M_z` in `GL_2(O_K)` with equal determinants: the det-weighted
    /// telescoping sum over the five factors.
    Telescoping,
    /// `u = k g` with `P_x(g)`, `P_z(g)` integral and equal `Phi`:
    /// `Phi(A) = k (Phi(P_x(g)) + Phi(P_z(-g)))`.
    Parabolic { generator: String, k: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiTerm {
    pub label: String,
    pub value: [f64; 2],
    /// Coefficient of this term in the sum.
    pub weight: String,
    /// `N(c)` of the matrix evaluated.
    pub norm_c: String,
}

#[derive(Clone, Debug)]
pub struct WitnessResult {
    pub m: usize,
    pub n: usize,
    pub mx: KMat2,
    pub mz: KMat2,
    pub s: KMat2,
    pub sstar: KMat2,
    pub quarter_turn_applied: bool,
    pub u: QuadInt,
    pub a: Mat2O,
    pub alpha: KElement,
    pub beta: KElement,
    pub delta1: Complex64,
    pub delta2: Complex64,
    /// `|W_1(inf)|`, `|W_2(inf)|`.
    pub w_abs: (f64, f64),
    /// Certified bounds on `|delta_1|`, `|delta_2|` (absent with an overridden floor).
    pub certified_bounds: Option<(f64, f64)>,
    /// `(sqrt|d| i)^{-1} I(x + delta_1 - z - delta_2)`.
    pub predicted: f64,
    /// `(sqrt|d| i)^{-1} I(x - z)`.
    pub target: f64,
    /// `D~(alpha)` summed directly, when `N(c)` of `A` is within budget.
    pub computed: Option<f64>,
    /// `Phi(A)` from its definition, when `N(c)` of `A` is within budget.
    pub phi_direct: Option<Complex64>,
    pub route: Route,
    pub phi_terms: Vec<PhiTerm>,
    /// `Phi(A)` assembled from the factors.
    pub phi_total: Complex64,
    pub phi_err_bound: f64,
    /// `N(c)` of `A`.
    pub norm_c: BigInt,
}

impl WitnessResult {
    /// `4 eps / sqrt|d|`.
    pub fn dalpha_bound(&self, eps: f64) -> f64 {
        4.0 * eps / self.alpha.field().sqrt_abs_disc()
    }

    pub fn to_json(&self, params: &WitnessParams) -> serde_json::Value {
        let c = |z: Complex64| [z.re, z.im];
        serde_json::json!({
            "D": self.alpha.field().d(),
            "x": c(params.x),
            "z": c(params.z),
            "eps": params.eps_target,
            "m": self.m,
            "n": self.n,
            "u": self.u.to_string(),
            "quarter_turn_applied": self.quarter_turn_applied,
            "A": [self.a.a.to_string(), self.a.b.to_string(), self.a.c.to_string(), self.a.d.to_string()],
            "det_A": self.a.det().to_string(),
            "norm_c": self.norm_c.to_string(),
            "alpha": self.alpha.to_string(),
            "beta": self.beta.to_string(),
            "delta1": c(self.delta1),
            "delta2": c(self.delta2),
            "abs_delta1": self.delta1.norm(),
            "abs_delta2": self.delta2.norm(),
            "w_abs": [self.w_abs.0, self.w_abs.1],
            "certified_bounds": self.certified_bounds.map(|(a, b)| [a, b]),
            "predicted": self.predicted,
            "target": self.target,
            "dalpha_bound": self.dalpha_bound(params.eps_target),
            "computed": self.computed,
            "phi_direct": self.phi_direct.map(c),
            "route": self.route,
            "phi_terms": self.phi_terms,
            "phi_total": c(self.phi_total),
            "phi_total_err_bound": self.phi_err_bound,
        })
    }
}

/// `(sqrt|d| i)^{-1} I(w) = 2 Im(w) / sqrt|d|`.
pub fn normalized_target(field: Field, w: Complex64) -> f64 {
    2.0 * w.im / field.sqrt_abs_disc()
}

/// Convergent depths tried for each of `x` and `z`.
const DEPTHS_PER_SIDE: usize = 6;
/// Depth pairs tried before giving up.
const MAX_DEPTH_PAIRS: usize = 16;

/// Visits `O_K` in order of increasing norm (ties by coordinates) up to `max_norm`.
pub fn for_each_by_norm(
    field: Field,
    max_norm: f64,
    mut visit: impl FnMut(&QuadInt) -> bool,
) -> bool {
    let (t, nw) = (field.trace_omega() as f64, field.norm_omega() as f64);
    let im = field.omega().im;
    let rmax = max_norm.sqrt().ceil() as i64;
    let mut band: Vec<(i128, i64, i64)> = Vec::new();
    for r in 0..=rmax {
        let (lo, hi) = ((r * r) as i128, ((r + 1) * (r + 1)) as i128);
        band.clear();
        let ymax = ((r + 1) as f64 / im).ceil() as i64;
        for y in -ymax..=ymax {
            let yf = y as f64;
            let disc = t * t * yf * yf / 4.0 - nw * yf * yf + hi as f64;
            if disc < 0.0 {
                continue;
            }
            let c = -t * yf / 2.0;
            let s = disc.sqrt();
            for x in (c - s).floor() as i64 - 1..=(c + s).ceil() as i64 + 1 {
                let (xi, yi) = (x as i128, y as i128);
                let norm = xi * xi + (t as i128) * xi * yi + (nw as i128) * yi * yi;
                if norm >= lo && norm < hi {
                    band.push((norm, x, y));
                }
            }
        }
        band.sort_unstable();
        for &(norm, x, y) in &band {
            if norm as f64 > max_norm {
                return false;
            }
            if visit(&field.int(x, y)) {
                return true;
            }
        }
    }
    false
}

/// Floating-point data for screening `u` before the exact check.
struct Screen {
    s: [Complex64; 4],
    qz: (Complex64, Complex64),
    qx: (Complex64, Complex64),
}

impl Screen {
    /// `(|W_1(inf)|, |W_2(inf)|)` for a trial `u`.
    fn w_abs(&self, u: Complex64) -> (f64, f64) {
        let [s1, s2, s3, s4] = self.s;
        let (q, q1) = self.qz;
        let y = q1 + q * u;
        let w1 = u + (s1 * y - s2 * q) / (s3 * y - s4 * q);
        // S*^{-1} is proportional to [[s4, -s2], [-s3, s1]].
        let (qx, qx1) = self.qx;
        let y2 = qx1 + qx * u;
        let w2 = u + (s4 * y2 + s2 * qx) / (-s3 * y2 - s1 * qx);
        (w1.norm(), w2.norm())
    }
}

/// The two values of `u` for which `W_1(inf)` or `W_2(inf)` is infinite:
/// `(s_4 q_n - s_3 q_{n-1}) / (s_3 q_n)` and `(s_1 q_m + s_3 q_{m-1}) / (-s_3 q_m)`.
pub fn exclusions(sstar: &KMat2, mx: &KMat2, mz: &KMat2) -> Result<(KElement, KElement)> {
    let (s1, s3, s4) = (&sstar.a, &sstar.c, &sstar.d);
    let (qn, qn1) = (&mz.c, &mz.d);
    let (qm, qm1) = (&mx.c, &mx.d);
    let e1 = (&(s4 * qn) - &(s3 * qn1)).checked_div(&(s3 * qn))?;
    let e2 = (&(s1 * qm) + &(s3 * qm1)).checked_div(&-(s3 * qm))?;
    Ok((e1, e2))
}

struct Chosen {
    u: QuadInt,
    a: Mat2O,
    w_abs: (f64, f64),
}

/// `W_1 = T^u S* T^{-u} M_z^{-1}` and `W_2 = T^u S*^{-1} T^{-u} M_x^{-1}`.
fn w_matrices(u: &KElement, sstar: &KMat2, mx: &KMat2, mz: &KMat2) -> Result<(KMat2, KMat2)> {
    let tu = KMat2::translation(u);
    let tmu = KMat2::translation(&-u.clone());
    let w1 = &(&(&tu * sstar) * &tmu) * &mz.inverse()?;
    let w2 = &(&(&tu * &sstar.inverse()?) * &tmu) * &mx.inverse()?;
    Ok((w1, w2))
}

fn try_u(
    u: &QuadInt,
    screen: &Screen,
    floor: f64,
    sstar: &KMat2,
    mx: &KMat2,
    mz: &KMat2,
    excluded: &(KElement, KElement),
) -> Result<Option<Chosen>> {
    let (a1, a2) = screen.w_abs(u.to_complex());
    // Generous margin: the exact test below decides.
    if !(a1 >= floor * (1.0 - 1e-6) && a2 >= floor * (1.0 - 1e-6)) {
        return Ok(None);
    }
    let uk = KElement::from(u.clone());
    if uk == excluded.0 || uk == excluded.1 {
        return Ok(None);
    }
    let (w1, w2) = w_matrices(&uk, sstar, mx, mz)?;
    let (Some(i1), Some(i2)) = (w1.at_infinity(), w2.at_infinity()) else {
        return Ok(None);
    };
    let exact = (i1.abs(), i2.abs());
    if !(exact.0 >= floor && exact.1 >= floor) {
        return Ok(None);
    }
    let a = &(&(mx * &KMat2::translation(&uk)) * sstar) * &(&KMat2::translation(&-uk.clone()) * &mz.inverse()?);
    let Some(a) = a.to_integral() else {
        return Ok(None);
    };
    if !a.det().is_one() {
        return Ok(None);
    }
    Ok(Some(Chosen {
        u: u.clone(),
        a,
        w_abs: exact,
    }))
}

/// Smallest admissible `u`: by increasing norm over `O_K` when `step` is `None`,
/// otherwise over the multiples of `step`.
pub fn choose_u(
    sstar: &KMat2,
    mx: &KMat2,
    mz: &KMat2,
    params: &WitnessParams,
    step: Option<&QuadInt>,
) -> Result<(QuadInt, Mat2O, (f64, f64))> {
    let field = mx.field();
    let floor = params.w_floor();
    let screen = Screen {
        s: [
            sstar.a.to_complex(),
            sstar.b.to_complex(),
            sstar.c.to_complex(),
            sstar.d.to_complex(),
        ],
        qz: (mz.c.to_complex(), mz.d.to_complex()),
        qx: (mx.c.to_complex(), mx.d.to_complex()),
    };
    let excluded = exclusions(sstar, mx, mz)?;
    let mut found: Option<Chosen> = None;
    let mut failure: Option<Error> = None;
    let mut best = 0.0f64;
    let mut visit = |u: &QuadInt| -> bool {
        let (a1, a2) = screen.w_abs(u.to_complex());
        best = best.max(a1.min(a2));
        match try_u(u, &screen, floor, sstar, mx, mz, &excluded) {
            Ok(Some(c)) => {
                found = Some(c);
                true
            }
            Ok(None) => false,
            Err(e) => {
                failure = Some(e);
                true
            }
        }
    };
    match step {
        None => {
            for_each_by_norm(field, params.u_norm_bound, &mut visit);
        }
        Some(g) => {
            let gn = g.norm().to_f64().unwrap_or(f64::INFINITY);
            let kmax = (params.u_norm_bound / gn).sqrt().floor() as i64;
            'outer: for k in 1..=kmax {
                for sign in [1i64, -1] {
                    let u = &QuadInt::new(field, BigInt::from(sign * k), BigInt::from(0)) * g;
                    if visit(&u) {
                        break 'outer;
                    }
                }
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    match found {
        Some(c) => Ok((c.u, c.a, c.w_abs)),
        None => Err(Error::SearchFailure(format!(
            "no u with N(u) <= {} gives |W(inf)| >= {floor}; largest min(|W1|, |W2|) reached {best}",
            params.u_norm_bound
        ))),
    }
}

fn phi_term(
    label: &str,
    m: &KMat2,
    weight: &KElement,
    ctx: &EisensteinContext,
    budget: u64,
) -> Result<(PhiTerm, Complex64)> {
    let mo = m.to_integral().ok_or(Error::NotIntegral)?;
    let v = phi(&mo, ctx, budget)?;
    Ok((
        PhiTerm {
            label: label.to_string(),
            value: [v.re, v.im],
            weight: weight.to_string(),
            norm_c: mo.c.norm().to_string(),
        },
        v * weight.to_complex(),
    ))
}

/// `Phi(F_1 ... F_k) = sum_i det(F_1 ... F_{i-1}) Phi(F_i)`.
fn phi_product(
    factors: &[(&str, KMat2)],
    ctx: &EisensteinContext,
    budget: u64,
) -> Result<Vec<(PhiTerm, Complex64)>> {
    let field = ctx.field();
    let mut weight = KElement::one(field);
    let mut out = Vec::with_capacity(factors.len());
    for (label, f) in factors {
        out.push(phi_term(label, f, &weight, ctx, budget)?);
        weight = &weight * &f.det();
    }
    Ok(out)
}

/// Factors of `M_x T^u S* T^{-u} M_z^{-1}`; `S*` is split as `[Q] M_x^{-1} M_z`
/// when its own `N(c)` is over budget.
fn telescoping_factors(
    sstar: &KMat2,
    quarter: bool,
    mx: &KMat2,
    mz: &KMat2,
    u: &KElement,
    budget: u64,
) -> Result<Vec<(&'static str, KMat2)>> {
    let mut f = vec![("M_x", mx.clone()), ("T^u", KMat2::translation(u))];
    let norm = sstar.c.norm();
    if norm <= num_rational::BigRational::from_integer(BigInt::from(budget)) {
        f.push(("S*", sstar.clone()));
    } else {
        if quarter {
            f.push(("Q", KMat2::quarter_turn(mx.field())));
        }
        f.push(("M_x^-1", mx.inverse()?));
        f.push(("M_z", mz.clone()));
    }
    f.push(("T^-u", KMat2::translation(&-u.clone())));
    f.push(("M_z^-1", mz.inverse()?));
    Ok(f)
}

/// Tolerance for `Phi(P_x(g)) = Phi(P_z(g))`.
const CHARACTER_TOL: f64 = 1e-7;
/// Largest coefficient tried when combining the two lattice generators.
const DIRECTION_SEARCH: i64 = 12;

/// A nonzero `g = L (p + q w)` with both `P_x(g)`, `P_z(g)` integral and
/// `Phi(P_x(g)) = Phi(P_z(g))`, where `L` is the common parabolic period.
/// `Phi(P(t))` is additive in `t`, so it suffices to test the two generators.
pub fn parabolic_direction(
    mx: &KMat2,
    mz: &KMat2,
    ctx: &EisensteinContext,
    budget: u64,
) -> Result<Option<QuadInt>> {
    let field = mx.field();
    let l = parabolic_period(mx)?.lcm(&parabolic_period(mz)?);
    let mut chars = Vec::with_capacity(2);
    for (i, g) in [
        QuadInt::new(field, l.clone(), BigInt::zero()),
        QuadInt::new(field, BigInt::zero(), l.clone()),
    ]
    .into_iter()
    .enumerate()
    {
        let gk = KElement::from(g.clone());
        let px = parabolic(mx, &gk)?.to_integral().ok_or(Error::NotIntegral)?;
        let pz = parabolic(mz, &gk)?.to_integral().ok_or(Error::NotIntegral)?;
        let ch = match (phi(&px, ctx, budget), phi(&pz, ctx, budget)) {
            (Ok(a), Ok(b)) => a - b,
            (Err(Error::BudgetExceeded { .. }), _) | (_, Err(Error::BudgetExceeded { .. })) => {
                return Ok(None)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if i == 0 && ch.norm() <= CHARACTER_TOL * (1.0 + ch.norm()) {
            return Ok(Some(g));
        }
        chars.push(ch);
    }
    let scale = 1.0 + chars[0].norm().max(chars[1].norm());
    let mut best: Option<(i64, i64)> = None;
    for p in -DIRECTION_SEARCH..=DIRECTION_SEARCH {
        for q in -DIRECTION_SEARCH..=DIRECTION_SEARCH {
            if !(p > 0 || (p == 0 && q > 0)) {
                continue;
            }
            let v = chars[0] * p as f64 + chars[1] * q as f64;
            if v.norm() > CHARACTER_TOL * scale * (p.abs() + q.abs()) as f64 {
                continue;
            }
            let size = |(p, q): (i64, i64)| {
                QuadInt::new(field, p.into(), q.into()).norm()
            };
            if best.is_none_or(|b| size((p, q)) < size(b)) {
                best = Some((p, q));
            }
        }
    }
    Ok(best.map(|(p, q)| QuadInt::new(field, &l * p, &l * q)))
}

/// `k` with `u = k g`.
fn multiple_of(u: &QuadInt, g: &QuadInt) -> BigInt {
    if g.x().is_zero() {
        u.y() / g.y()
    } else {
        u.x() / g.x()
    }
}

/// Builds a witness for `(x, z)`.
pub fn witness(params: &WitnessParams, ctx: &EisensteinContext) -> Result<WitnessResult> {
    let adm = &params.adm;
    let field = adm.field();
    if ctx.field() != field {
        return Err(Error::Usage("context and admissible set use different fields".into()));
    }
    let ex = expand(params.x, params.depth_cap, adm)?;
    let ez = expand(params.z, params.depth_cap, adm)?;
    let v = 1.0 / params.w_floor();
    let eps = params.eps_target;
    let depths = |e: &CFExpansion, from: usize| -> Vec<usize> {
        let all = from.max(1)..=e.len();
        if params.certified() {
            all.filter(|&n| n >= 2 && lemma_bound(e, n, v).is_some_and(|b| b < eps))
                .take(DEPTHS_PER_SIDE)
                .collect()
        } else {
            all.take(DEPTHS_PER_SIDE).collect()
        }
    };
    let no_depth = |which: &str| {
        Error::SearchFailure(format!(
            "no certified convergent of {which} within depth {}",
            params.depth_cap
        ))
    };
    let dx = depths(&ex, 1);
    let dz = depths(&ez, 1);
    if dx.is_empty() {
        return Err(no_depth("x"));
    }
    if dz.is_empty() {
        return Err(no_depth("z"));
    }
    let mut pairs: Vec<(usize, usize)> = dx
        .iter()
        .flat_map(|&m| dz.iter().map(move |&n| (m, n)))
        .collect();
    pairs.sort_by_key(|&(m, n)| (m + n, n));
    let mut last_err = None;
    for (m, n) in pairs.into_iter().take(MAX_DEPTH_PAIRS) {
        match witness_at(params, ctx, &ex, &ez, m, n) {
            Ok(Some(w)) => return Ok(w),
            Ok(None) => {}
            Err(e @ (Error::SearchFailure(_) | Error::BudgetExceeded { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::SearchFailure(format!(
            "no usable pair of convergent depths among the first {MAX_DEPTH_PAIRS}"
        ))
    }))
}

/// `Ok(None)` asks the caller to try other depths.
fn witness_at(
    params: &WitnessParams,
    ctx: &EisensteinContext,
    ex: &CFExpansion,
    ez: &CFExpansion,
    m: usize,
    n: usize,
) -> Result<Option<WitnessResult>> {
    let field = params.adm.field();
    let mx = ex.mats[m].clone();
    let mz = ez.mats[n].clone();
    let unimodular = ex.is_unimodular(m) && ez.is_unimodular(n);
    let s = &mx.inverse()? * &mz;
    let (sstar, quarter) = build_sstar(&s);
    if quarter && !unimodular {
        // The quarter turn does not commute past M_x; A would not be integral.
        return Ok(None);
    }
    if unimodular && mx.det() != mz.det() {
        // Phi(A) = (det M_x - det M_z) E2 I(u), which need not vanish.
        return Ok(None);
    }
    let step = if unimodular {
        None
    } else {
        match parabolic_direction(&mx, &mz, ctx, params.phi_budget)? {
            Some(g) => Some(g),
            None => return Ok(None),
        }
    };
    let (u, a, w_abs) = choose_u(&sstar, &mx, &mz, params, step.as_ref())?;

    let ak = a.to_k();
    let alpha = ak.at_infinity().ok_or(Error::InvariantViolation {
        what: "A(inf) finite".into(),
        index: m,
    })?;
    let beta = ak.inverse_at_infinity().ok_or(Error::InvariantViolation {
        what: "A^{-1}(inf) finite".into(),
        index: n,
    })?;
    let delta1 = alpha.to_complex() - params.x;
    let delta2 = beta.to_complex() - params.z;
    let eps = params.eps_target;
    if !(delta1.norm() < eps && delta2.norm() < eps) {
        if params.certified() {
            return Err(Error::InvariantViolation {
                what: format!("|delta_1|, |delta_2| < {eps} at certified depths"),
                index: m.max(n),
            });
        }
        return Ok(None);
    }
    let v = 1.0 / params.w_floor();
    let certified_bounds = if params.certified() {
        Some((
            lemma_bound(ex, m, v).unwrap_or(f64::INFINITY),
            lemma_bound(ez, n, v).unwrap_or(f64::INFINITY),
        ))
    } else {
        None
    };

    let budget = params.phi_budget;
    let mut terms: Vec<(PhiTerm, Complex64)> = Vec::new();
    let uk = KElement::from(u.clone());
    let route = if unimodular {
        let factors = telescoping_factors(&sstar, quarter, &mx, &mz, &uk, budget)?;
        terms = phi_product(&factors, ctx, budget)?;
        Route::Telescoping
    } else {
        let g = step.expect("parabolic route has a step");
        let k = multiple_of(&u, &g);
        let gk = KElement::from(g.clone());
        let kk = KElement::from(QuadInt::new(field, k.clone(), 0.into()));
        terms.push(phi_term("P_x(g)", &parabolic(&mx, &gk)?, &kk, ctx, budget)?);
        terms.push(phi_term("P_z(-g)", &parabolic(&mz, &-gk)?, &kk, ctx, budget)?);
        Route::Parabolic {
            generator: g.to_string(),
            k: k.to_string(),
        }
    };
    let phi_total: Complex64 = terms.iter().map(|(_, v)| *v).sum();
    let scale: f64 = match &route {
        Route::Telescoping => 1.0,
        Route::Parabolic { k, .. } => k.parse::<f64>().map(f64::abs).unwrap_or(f64::INFINITY).max(1.0),
    };
    let phi_err_bound = scale * terms.len() as f64 * 1e-8;

    let target = normalized_target(field, params.x - params.z);
    let predicted = normalized_target(field, params.x + delta1 - params.z - delta2);
    let norm_c = a.c.norm();
    let (computed, phi_direct) = if norm_c <= BigInt::from(params.direct_budget) {
        let d = dedekind_sum(&a.a, &a.c, ctx, params.direct_budget)?;
        let direct = phi(&a, ctx, params.direct_budget)?;
        (d.normalized.map(|v| v.re), Some(direct))
    } else {
        (None, None)
    };
    Ok(Some(WitnessResult {
        m,
        n,
        mx,
        mz,
        s,
        sstar,
        quarter_turn_applied: quarter,
        u,
        a,
        alpha,
        beta,
        delta1,
        delta2,
        w_abs,
        certified_bounds,
        predicted,
        target,
        computed,
        phi_direct,
        route,
        phi_terms: terms.into_iter().map(|(t, _)| t).collect(),
        phi_total,
        phi_err_bound,
        norm_c,
    }))
}

/// One point `(alpha, D~(alpha))` of the graph.
#[derive(Clone, Debug, Serialize)]
pub struct GraphPoint {
    pub re_alpha: f64,
    pub im_alpha: f64,
    pub d_tilde: f64,
    /// Imaginary part left after normalization (zero up to rounding).
    #[serde(skip)]
    pub residual_imag: f64,
    #[serde(skip)]
    pub a: QuadInt,
    #[serde(skip)]
    pub c: QuadInt,
}

/// `count` points `alpha = a/c` with random `0 < N(c) <= max_norm` and random `a`
/// modulo `c`.
pub fn graph_sample<R: Rng>(
    ctx: &EisensteinContext,
    count: usize,
    max_norm: u64,
    rng: &mut R,
) -> Result<Vec<GraphPoint>> {
    let field = ctx.field();
    let norm = normalizer(ctx).ok_or(Error::NormalizationUndefined(field.d()))?;
    let mut out = Vec::with_capacity(count);
    let r = (max_norm as f64).sqrt().ceil() as i64 + 1;
    while out.len() < count {
        let c = field.int(rng.random_range(-r..=r), rng.random_range(-r..=r));
        if c.is_zero() || c.norm() > BigInt::from(max_norm) {
            continue;
        }
        let table = CosetTable::new(&c)?;
        let values = ctx.e1_table(&table, max_norm)?;
        let a = table.rep(rng.random_range(0..table.len()));
        let d = sum_with_table(&a, &table, &values) / norm;
        let alpha = KElement::from(a.clone()).checked_div(&KElement::from(c.clone()))?;
        let z = alpha.to_complex();
        out.push(GraphPoint {
            re_alpha: z.re,
            im_alpha: z.im,
            d_tilde: d.re,
            residual_imag: d.im,
            a,
            c,
        });
    }
    Ok(out)
}

/// CSV with header `re_alpha,im_alpha,d_tilde`.
pub fn graph_csv(points: &[GraphPoint]) -> String {
    let mut s = String::from("re_alpha,im_alpha,d_tilde\n");
    for p in points {
        s.push_str(&format!("{:.12},{:.12},{:.12}\n", p.re_alpha, p.im_alpha, p.d_tilde));
    }
    s
}

/// Smallest and largest `D~` among the points.
pub fn d_tilde_range(points: &[GraphPoint]) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.d_tilde), hi.max(p.d_tilde))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfmartin::default_admissible;
    use crate::dedekind::random_sl2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn approx_k(field: Field, v: f64) -> KElement {
        let den = 1_000_000i64;
        KElement::new(field.int((v * den as f64).round() as i64, 0), BigInt::from(den)).unwrap()
    }

    #[test]
    fn sstar_of_identity_is_quarter_turn() {
        let f = Field::new(5).unwrap();
        let (s, q) = build_sstar(&KMat2::identity(f));
        assert!(q);
        assert_eq!(s, KMat2::quarter_turn(f));
        assert!(s.at_infinity().unwrap().is_zero());
        assert!(s.inverse_at_infinity().is_some());
    }

    #[test]
    fn sstar_keeps_nonzero_corner() {
        let f = Field::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sl2(f, 50, &mut rng).to_k();
        assert!(!s.c.is_zero());
        assert_eq!(build_sstar(&s), (s, false));
    }

    #[test]
    fn sstar_has_same_phi_and_det() {
        let f = Field::new(5).unwrap();
        let ctx = EisensteinContext::new(f);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..20 {
            let s = if i % 4 == 0 {
                Mat2O::translation(&f.int(i as i64 - 7, 1))
            } else {
                random_sl2(f, 200, &mut rng)
            };
            let (ss, _) = build_sstar(&s.to_k());
            let ss = ss.to_integral().unwrap();
            assert_eq!(ss.det(), s.det());
            let d = phi(&ss, &ctx, 10_000).unwrap() - phi(&s, &ctx, 10_000).unwrap();
            assert!(d.norm() < 1e-8, "{d}");
        }
    }

    #[test]
    fn lemma_denominators_stay_large() {
        let f = Field::new(2).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let zeta = adm.zeta();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let exp = expand(z, 15, &adm).unwrap();
            // W(inf) = 1/w with w = zeta/4.
            let w = KMat2::new(
                KElement::one(f),
                KElement::zero(f),
                approx_k(f, zeta / 4.0),
                KElement::one(f),
            );
            let r = approx_diagnostic(&exp, &w, zeta / 2.0);
            assert!(r.accepted, "{:?}", r.reason);
            assert!(r.denominators_ok);
            for row in &r.rows {
                if let Some(b) = row.bound {
                    assert!(row.distance <= b * (1.0 + 1e-9), "{row:?}");
                }
            }
        }
    }

    #[test]
    fn lemma_images_converge() {
        let f = Field::new(2).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let zeta = adm.zeta();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let exp = expand(z, 25, &adm).unwrap();
            let r: f64 = rng.random_range(2.0..10.0) / zeta;
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let w = KMat2::new(
                approx_k(f, r * t.cos()) + &(&approx_k(f, r * t.sin() / 2f64.sqrt()) * &KElement::from(f.int(0, 1))),
                -KElement::one(f),
                KElement::one(f),
                KElement::zero(f),
            );
            let rep = approx_diagnostic(&exp, &w, zeta / 2.0);
            assert!(rep.accepted, "{:?}", rep.reason);
            assert!(rep.first_within(1e-3).is_some_and(|n| n <= 25));
        }
    }

    #[test]
    fn lemma_rejects_bad_input() {
        let f = Field::new(2).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let exp = expand(Complex64::new(0.3, 0.4), 5, &adm).unwrap();
        let zeta = adm.zeta();
        assert!(!approx_diagnostic(&exp, &KMat2::identity(f), zeta / 2.0).accepted);
        assert!(!approx_diagnostic(&exp, &KMat2::quarter_turn(f), zeta / 2.0).accepted);
        assert!(!approx_diagnostic(&exp, &KMat2::quarter_turn(f), 2.0 * zeta).accepted);
    }

    #[test]
    fn excluded_values_send_w_to_infinity() {
        let f = Field::new(7).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let ex = expand(Complex64::new(0.21, 0.63), 4, &adm).unwrap();
        let ez = expand(Complex64::new(-0.47, 0.18), 4, &adm).unwrap();
        let (mx, mz) = (&ex.mats[3], &ez.mats[3]);
        let (sstar, _) = build_sstar(&(&mx.inverse().unwrap() * mz));
        let (e1, e2) = exclusions(&sstar, mx, mz).unwrap();
        let (w1, _) = w_matrices(&e1, &sstar, mx, mz).unwrap();
        let (_, w2) = w_matrices(&e2, &sstar, mx, mz).unwrap();
        assert!(w1.at_infinity().is_none());
        assert!(w2.at_infinity().is_none());
    }

    #[test]
    fn small_u_fails_a_large_floor() {
        let f = Field::new(7).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let x = Complex64::new(0.21, 0.63);
        let z = Complex64::new(-0.47, 0.18);
        let ex = expand(x, 4, &adm).unwrap();
        let ez = expand(z, 4, &adm).unwrap();
        let (mx, mz) = (&ex.mats[2], &ez.mats[2]);
        let (sstar, _) = build_sstar(&(&mx.inverse().unwrap() * mz));
        let params = WitnessParams::new(x, z, 0.05, adm).unwrap();
        let (u, _, (a1, a2)) = choose_u(&sstar, mx, mz, &params, None).unwrap();
        let floor = params.w_floor();
        assert!(a1 >= floor && a2 >= floor);
        let zero = KElement::zero(f);
        let (w1, w2) = w_matrices(&zero, &sstar, mx, mz).unwrap();
        let small = |w: &KMat2| w.at_infinity().is_none_or(|v| v.abs() < floor);
        assert!(small(&w1) || small(&w2));
        assert!(u.norm() > BigInt::from(1000));
    }

    #[test]
    fn coincident_targets_stay_near_zero() {
        let f = Field::new(7).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let ctx = EisensteinContext::new(f);
        let x = Complex64::new(0.42, -0.77);
        let eps = 0.05;
        let w = witness(&WitnessParams::new(x, x, eps, adm).unwrap(), &ctx).unwrap();
        assert_eq!(w.target, 0.0);
        assert!(w.predicted.abs() <= 4.0 * eps / f.sqrt_abs_disc());
        assert!(w.a.det().is_one());
        assert!(w.phi_total.norm() < 1e-6);
    }

    #[test]
    fn witness_d5_fixed_targets() {
        let f = Field::new(5).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let ctx = EisensteinContext::new(f);
        let x = Complex64::new(0.31, 0.77);
        let z = Complex64::new(-1.12, 0.40);
        let eps = 0.05;
        let params = WitnessParams::new(x, z, eps, adm).unwrap();
        let w = witness(&params, &ctx).unwrap();
        assert!(w.a.det().is_one());
        assert!(w.delta1.norm() < eps && w.delta2.norm() < eps);
        assert!(w.phi_total.norm() < 1e-6, "{}", w.phi_total);
        let target = normalized_target(f, x - z);
        assert_eq!(w.target, target);
        assert!((w.predicted - target).abs() <= 4.0 * eps / 20f64.sqrt() + 1e-5);
        let json = w.to_json(&params);
        assert_eq!(json["D"], 5);
        assert!(json["phi_terms"].as_array().is_some_and(|t| !t.is_empty()));
    }

    #[test]
    fn two_way_check_with_relaxed_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for d in [2i64, 5, 7] {
            let f = Field::new(d).unwrap();
            let adm = default_admissible(f, 0.9).unwrap();
            let ctx = EisensteinContext::new(f);
            for _ in 0..4 {
                let x = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                let z = x + Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
                let mut p = WitnessParams::new(x, z, 0.5, adm.clone()).unwrap();
                p.w_floor_override = Some(2.0);
                let w = witness(&p, &ctx).unwrap();
                assert!(w.a.det().is_one());
                assert!(w.delta1.norm() < 0.5 && w.delta2.norm() < 0.5);
                if let (Some(c), Some(pd)) = (w.computed, w.phi_direct) {
                    assert!((c - w.predicted).abs() < 1e-5, "{c} vs {}", w.predicted);
                    assert!((pd - w.phi_total).norm() < 1e-6);
                    checked += 1;
                }
            }
        }
        assert!(checked >= 8, "only {checked} direct checks");
    }

    #[test]
    fn graph_points() {
        let f = Field::new(2).unwrap();
        let ctx = EisensteinContext::new(f);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = graph_sample(&ctx, 40, 50, &mut rng).unwrap();
        assert_eq!(pts.len(), 40);
        let norm = normalizer(&ctx).unwrap();
        for p in &pts {
            assert!(p.residual_imag.abs() < 1e-6);
            let table = CosetTable::new(&p.c).unwrap();
            let values = ctx.e1_table(&table, 100).unwrap();
            let shifted = &p.a + &p.c;
            let d = sum_with_table(&shifted, &table, &values) / norm;
            assert!((d.re - p.d_tilde).abs() < 1e-9);
        }
        let csv = graph_csv(&pts);
        assert!(csv.starts_with("re_alpha,im_alpha,d_tilde\n"));
        assert_eq!(csv.lines().count(), 41);
    }

    #[test]
    fn graph_needs_nontrivial_normalizer() {
        for d in [1, 3] {
            let ctx = EisensteinContext::new(Field::new(d).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            assert!(matches!(
                graph_sample(&ctx, 3, 20, &mut rng),
                Err(Error::NormalizationUndefined(_))
            ));
        }
    }
}
