//! Continued fractions over an arbitrary imaginary quadratic field.
//!
//! The expansion keeps convergent matrices
//! `M_n = M_{n-1} S(a_n / b_{n-1}, b_n / b_{n-1})` with `S(x, y) = [[x, 1], [y, 0]]`,
//! `b_0 = 1`, so that `M_n = [[p_n, p_{n-1}], [q_n, q_{n-1}]]` and
//! `det M_n = (-1)^n b_n`. Each step picks `a_n` in `O_K` and `b_n` in a finite
//! admissible set `B` with `|b_n z_{n-1} - a_n| <= eps`; the remainder
//! `z_n = (q_{n-1} z - p_{n-1}) / (p_n - q_n z)` then satisfies `|z_n| >= 1/eps`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::KMat2;
use crate::qfield::{linear_form, Field, KElement, QuadInt};

/// Default admissibility radius.
pub const DEFAULT_EPS: f64 = 0.9;

/// Residuals must clear `eps` by this relative margin, so that `|z_n| >= 1/eps`
/// survives rounding.
const FEASIBILITY_MARGIN: f64 = 1e-12;

/// A residual below this (relative to `|b z_n|`) means the input is a point of `K`.
const RATIONAL_TOL: f64 = 1e-12;

/// Relative slack allowed in the contraction monitor.
pub const CONTRACTION_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct AdmissibleSet {
    field: Field,
    denominators: Vec<QuadInt>,
    eps: f64,
    mu: f64,
}

impl AdmissibleSet {
    /// Checks `eps` against the measured covering radius of `denominators`.
    pub fn new(field: Field, denominators: Vec<QuadInt>, eps: f64) -> Result<AdmissibleSet> {
        let floor = covering_epsilon(&denominators, field);
        if !(eps > 0.0 && eps < 1.0) || eps < floor {
            return Err(Error::InadmissibleEpsilon { eps, floor });
        }
        Ok(Self::new_unchecked(field, denominators, eps))
    }

    /// Skips the covering check. The step rule reports infeasible steps instead.
    pub fn new_unchecked(field: Field, denominators: Vec<QuadInt>, eps: f64) -> AdmissibleSet {
        assert!(!denominators.is_empty(), "admissible set must be nonempty");
        assert!(denominators.iter().all(|b| !b.is_zero()));
        let mu = denominators
            .iter()
            .map(|b| b.to_complex().norm())
            .fold(0.0, f64::max);
        AdmissibleSet {
            field,
            denominators,
            eps,
            mu,
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn denominators(&self) -> &[QuadInt] {
        &self.denominators
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `mu = max |b|`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `zeta = (1 - eps^2)^2 / (4 eps^2 mu^2)`, the per-step growth floor of `|q_n|`.
    pub fn zeta(&self) -> f64 {
        let e2 = self.eps * self.eps;
        (1.0 - e2).powi(2) / (4.0 * e2 * self.mu * self.mu)
    }
}

/// `B = {1, 2, ..., floor(sqrt(|d_K|))}`.
pub fn default_denominators(field: Field) -> Vec<QuadInt> {
    let top = (field.discriminant().unsigned_abs() as f64).sqrt().floor() as i64;
    (1..=top.max(1)).map(|k| field.int(k, 0)).collect()
}

pub fn default_admissible(field: Field, eps: f64) -> Result<AdmissibleSet> {
    AdmissibleSet::new(field, default_denominators(field), eps)
}

fn lattice_distance(field: Field, w: Complex64) -> f64 {
    let (x, y) = field.coords(w);
    let (fx, fy) = (x - x.floor(), y - y.floor());
    let mut best = f64::INFINITY;
    for (cx, cy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        best = best.min(field.embed_coords(fx - cx, fy - cy).norm());
    }
    best
}

fn covering_objective(field: Field, bs: &[Complex64], s: f64, t: f64) -> f64 {
    let w = field.embed_coords(s, t);
    bs.iter()
        .map(|b| lattice_distance(field, b * w))
        .fold(f64::INFINITY, f64::min)
}

/// Largest `min_{b in B} dist(b w, O_K)` over the fundamental parallelogram,
/// sampled on a `grid x grid` mesh and refined by pattern search around the best
/// sample points.
pub fn covering_epsilon_grid(denominators: &[QuadInt], field: Field, grid: usize) -> f64 {
    let bs: Vec<Complex64> = denominators.iter().map(QuadInt::to_complex).collect();
    let g = grid.max(4);
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let s = (i as f64 + 0.5) / g as f64;
            let t = (j as f64 + 0.5) / g as f64;
            samples.push((covering_objective(field, &bs, s, t), s, t));
        }
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = samples[0].0;
    for &(v0, s0, t0) in samples.iter().take(48) {
        let (mut v, mut s, mut t) = (v0, s0, t0);
        let mut h = 1.0 / g as f64;
        while h > 1e-13 {
            let mut moved = false;
            for (ds, dt) in [
                (1.0, 0.0),
                (-1.0, 0.0),
                (0.0, 1.0),
                (0.0, -1.0),
                (1.0, 1.0),
                (1.0, -1.0),
                (-1.0, 1.0),
                (-1.0, -1.0),
            ] {
                let (s1, t1) = (s + ds * h, t + dt * h);
                let v1 = covering_objective(field, &bs, s1, t1);
                if v1 > v {
                    (v, s, t) = (v1, s1, t1);
                    moved = true;
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}

type CoverKey = (u64, Vec<(String, String)>);

/// Memoized [`covering_epsilon_grid`] on a 400 x 400 mesh.
pub fn covering_epsilon(denominators: &[QuadInt], field: Field) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<CoverKey, f64>>> = OnceLock::new();
    let key: CoverKey = (
        field.d(),
        denominators
            .iter()
            .map(|b| (b.x().to_string(), b.y().to_string()))
            .collect(),
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache poisoned").get(&key) {
        return *v;
    }
    let v = covering_epsilon_grid(denominators, field, 400);
    cache.lock().expect("cache poisoned").insert(key, v);
    v
}

/// One feasible `(a, b)` for a step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepChoice {
    pub a: QuadInt,
    pub b: QuadInt,
    /// `|b z_n - a|`.
    pub residual: f64,
}

/// Every `(a, b)` with `|b z_n - a| <= eps`, best first: smaller `N(b)`, then smaller
/// residual, then the nearest-lattice tie-break on `a`.
pub fn step_candidates(z_n: Complex64, adm: &AdmissibleSet) -> Vec<StepChoice> {
    let field = adm.field;
    let limit = adm.eps * (1.0 - FEASIBILITY_MARGIN);
    let mut out = Vec::new();
    for b in &adm.denominators {
        let t = b.to_complex() * z_n;
        let (x, y) = field.coords(t);
        let (fx, fy) = (x.floor(), y.floor());
        // eps < 1 and the basis is reduced, so a 4 x 4 window around t suffices.
        for dy in -1..=2 {
            for dx in -1..=2 {
                let (cx, cy) = (fx + dx as f64, fy + dy as f64);
                let residual = field.embed_coords(x - cx, y - cy).norm();
                if residual <= limit {
                    let a = QuadInt::new(
                        field,
                        BigInt::from(cx as i64),
                        BigInt::from(cy as i64),
                    );
                    out.push(StepChoice {
                        a,
                        b: b.clone(),
                        residual,
                    });
                }
            }
        }
    }
    out.sort_by(|l, r| {
        l.b.norm()
            .cmp(&r.b.norm())
            .then(l.residual.total_cmp(&r.residual))
            .then(l.a.norm().cmp(&r.a.norm()))
            .then(l.a.x().cmp(r.a.x()))
            .then(l.a.y().cmp(r.a.y()))
    });
    out
}

fn is_rational_hit(choice: &StepChoice, z_n: Complex64) -> bool {
    let scale = 1.0 + (choice.b.to_complex() * z_n).norm();
    choice.residual < RATIONAL_TOL * scale
}

fn best_residual(z_n: Complex64, adm: &AdmissibleSet) -> f64 {
    adm.denominators
        .iter()
        .map(|b| {
            let t = b.to_complex() * z_n;
            (t - adm.field.nearest_lattice(t).to_complex()).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Single step of the algorithm: returns `(a, b)` and the next remainder
/// `b_prev / (b z_n - a)`.
pub fn cf_step(
    z_n: Complex64,
    b_prev: &QuadInt,
    adm: &AdmissibleSet,
) -> Result<(StepChoice, Complex64)> {
    let cands = step_candidates(z_n, adm);
    let choice = cands.into_iter().next().ok_or(Error::StepInfeasible {
        step: 0,
        best: best_residual(z_n, adm),
    })?;
    if is_rational_hit(&choice, z_n) {
        return Err(Error::RationalPointReached { step: 0 });
    }
    let z_next = b_prev.to_complex() / (choice.b.to_complex() * z_n - choice.a.to_complex());
    Ok((choice, z_next))
}

/// `S(a / b_prev, b / b_prev)`.
fn step_matrix(a: &QuadInt, b: &QuadInt, b_prev: &QuadInt) -> Result<KMat2> {
    let field = a.field();
    let bp = KElement::from(b_prev.clone());
    Ok(KMat2::new(
        KElement::from(a.clone()).checked_div(&bp)?,
        KElement::one(field),
        KElement::from(b.clone()).checked_div(&bp)?,
        KElement::zero(field),
    ))
}

/// A finite run of the algorithm on one input.
#[derive(Clone, Debug)]
pub struct CFExpansion {
    pub z: Complex64,
    pub field: Field,
    pub adm: AdmissibleSet,
    /// `a_1, ..., a_N`.
    pub a: Vec<QuadInt>,
    /// `b_0 = 1, b_1, ..., b_N`.
    pub b: Vec<QuadInt>,
    /// `M_0 = I, M_1, ..., M_N`.
    pub mats: Vec<KMat2>,
    /// `z_0 = z, z_1, ..., z_N`; the last entry is infinite when the run terminated.
    pub remainders: Vec<Complex64>,
    /// `q_n z - p_n` for `n = 0..=N`, evaluated without cancellation.
    pub errors: Vec<Complex64>,
    /// `|b_n z_{n-1} - a_n|` for `n = 1..=N`.
    pub residuals: Vec<f64>,
    /// Set when the input turned out to be a point of `K`.
    pub terminated: bool,
}

/// Runs up to `n_max` steps.
///
/// When `M_{n-1}` has integral entries, candidates keeping `M_n` integral are
/// preferred over the plain ordering of [`step_candidates`].
pub fn expand(z: Complex64, n_max: usize, adm: &AdmissibleSet) -> Result<CFExpansion> {
    let field = adm.field;
    let mut exp = CFExpansion {
        z,
        field,
        adm: adm.clone(),
        a: Vec::new(),
        b: vec![field.one()],
        mats: vec![KMat2::identity(field)],
        remainders: vec![z],
        errors: vec![Complex64::new(-1.0, 0.0)],
        residuals: Vec::new(),
        terminated: false,
    };
    for n in 1..=n_max {
        let z_prev = exp.remainders[n - 1];
        let b_prev = exp.b[n - 1].clone();
        let m_prev = exp.mats[n - 1].clone();
        let cands = step_candidates(z_prev, adm);
        if cands.is_empty() {
            return Err(Error::StepInfeasible {
                step: n,
                best: best_residual(z_prev, adm),
            });
        }
        let mut picked: Option<(StepChoice, KMat2)> = None;
        if m_prev.is_integral() {
            for c in &cands {
                let m = &m_prev * &step_matrix(&c.a, &c.b, &b_prev)?;
                if m.is_integral() {
                    picked = Some((c.clone(), m));
                    break;
                }
            }
        }
        let (choice, m) = match picked {
            Some(p) => p,
            None => {
                let c = cands[0].clone();
                let m = &m_prev * &step_matrix(&c.a, &c.b, &b_prev)?;
                (c, m)
            }
        };
        let rational = is_rational_hit(&choice, z_prev);
        let err = linear_form(&m.c, z, &m.a);
        exp.a.push(choice.a.clone());
        exp.b.push(choice.b.clone());
        exp.residuals.push(choice.residual);
        exp.mats.push(m);
        exp.errors.push(err);
        if rational || err == Complex64::new(0.0, 0.0) {
            exp.terminated = true;
            exp.remainders
                .push(Complex64::new(f64::INFINITY, f64::INFINITY));
            break;
        }
        // z_n = (q_{n-1} z - p_{n-1}) / (p_n - q_n z)
        exp.remainders.push(-exp.errors[n - 1] / err);
    }
    Ok(exp)
}

impl CFExpansion {
    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn p(&self, n: usize) -> &KElement {
        &self.mats[n].a
    }

    pub fn q(&self, n: usize) -> &KElement {
        &self.mats[n].c
    }

    /// `p_n / q_n`, `None` for `n = 0`.
    pub fn convergent(&self, n: usize) -> Option<KElement> {
        self.mats[n].at_infinity()
    }

    /// `det M_n == (-1)^n b_n` exactly.
    pub fn det_check(&self, n: usize) -> bool {
        let b = KElement::from(self.b[n].clone());
        let expected = if n.is_multiple_of(2) { b } else { -b };
        self.mats[n].det() == expected
    }

    /// Whether `M_n` lies in `GL_2(O_K)`.
    pub fn is_unimodular(&self, n: usize) -> bool {
        self.mats[n]
            .to_integral()
            .map(|m| m.is_invertible())
            .unwrap_or(false)
    }

    /// `|z - p_n / q_n|`.
    pub fn approximation_error(&self, n: usize) -> f64 {
        self.errors[n].norm() / self.q(n).abs()
    }

    /// Shift structure: the right column of `M_n` is the left column of `M_{n-1}`.
    pub fn shift_check(&self, n: usize) -> bool {
        n == 0 || (self.mats[n].b == self.mats[n - 1].a && self.mats[n].d == self.mats[n - 1].c)
    }

    pub fn to_json(&self) -> CfJson {
        let steps = (1..=self.len())
            .map(|n| {
                let abs = self.errors[n].norm();
                CfStepJson {
                    n,
                    a: self.a[n - 1].to_string(),
                    b: self.b[n].to_string(),
                    p: self.p(n).to_string(),
                    q: self.q(n).to_string(),
                    det_check: self.det_check(n),
                    abs_residual: abs,
                    abs_residual_err_bound: 8.0 * f64::EPSILON * abs,
                }
            })
            .collect();
        CfJson {
            d: self.field.d(),
            eps: self.adm.eps,
            z: [self.z.re, self.z.im],
            terminated: self.terminated,
            steps,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CfStepJson {
    pub n: usize,
    pub a: String,
    pub b: String,
    pub p: String,
    pub q: String,
    pub det_check: bool,
    pub abs_residual: f64,
    pub abs_residual_err_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CfJson {
    #[serde(rename = "D")]
    pub d: u64,
    pub eps: f64,
    pub z: [f64; 2],
    pub terminated: bool,
    pub steps: Vec<CfStepJson>,
}

/// Counts of the inequalities confirmed by [`check_growth`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GrowthReport {
    pub det_checks: usize,
    pub remainder_bounds: usize,
    pub contraction_checks: usize,
    pub growth_pairs: usize,
    pub approximation_bounds: usize,
    pub ratio_checks: usize,
}

impl GrowthReport {
    pub fn total(&self) -> usize {
        self.det_checks
            + self.remainder_bounds
            + self.contraction_checks
            + self.growth_pairs
            + self.approximation_bounds
            + self.ratio_checks
    }
}

fn violation(what: &str, index: usize) -> Error {
    Error::InvariantViolation {
        what: what.to_string(),
        index,
    }
}

/// Checks every quantitative property of the expansion:
///
/// * `det M_n = (-1)^n b_n`,
/// * `|z_n| >= 1/eps`,
/// * `|q_n z - p_n| <= eps |q_{n-1} z - p_{n-1}|`,
/// * `|q_n| > (1 - eps^2)^2 |q_{n'} z_{n'}| / (4 eps^{n-n'} mu^2)` for `0 <= n' < n`,
/// * `|z - p_n/q_n| < 4 eps^{2n} mu^2 / (1 - eps^2)^2`,
/// * `|q_n| > zeta |q_{n-1}|` for `n >= 2`.
pub fn check_growth(exp: &CFExpansion) -> Result<GrowthReport> {
    let eps = exp.adm.eps();
    let mu = exp.adm.mu();
    let lead = (1.0 - eps * eps).powi(2) / (4.0 * mu * mu);
    let zeta = exp.adm.zeta();
    let qabs: Vec<f64> = (0..=exp.len()).map(|n| exp.q(n).abs()).collect();
    let mut rep = GrowthReport::default();
    for n in 1..=exp.len() {
        if !exp.det_check(n) {
            return Err(violation("det M_n = (-1)^n b_n", n));
        }
        rep.det_checks += 1;

        let zn = exp.remainders[n];
        if !(zn.norm() >= 1.0 / eps) {
            return Err(violation("|z_n| >= 1/eps", n));
        }
        rep.remainder_bounds += 1;

        let lhs = exp.errors[n].norm();
        let rhs = eps * exp.errors[n - 1].norm();
        if lhs > rhs * (1.0 + CONTRACTION_RTOL) {
            return Err(violation("|q_n z - p_n| <= eps |q_{n-1} z - p_{n-1}|", n));
        }
        rep.contraction_checks += 1;

        for np in 0..n {
            let bound = lead * qabs[np] * exp.remainders[np].norm() / eps.powi((n - np) as i32);
            if !(qabs[n] > bound) {
                return Err(violation("|q_n| > (1-eps^2)^2 |q_n' z_n'| / (4 eps^(n-n') mu^2)", n));
            }
            rep.growth_pairs += 1;
        }

        let approx = exp.approximation_error(n);
        let cap = 4.0 * eps.powi(2 * n as i32) * mu * mu / (1.0 - eps * eps).powi(2);
        if !(approx < cap) {
            return Err(violation("|z - p_n/q_n| < 4 eps^(2n) mu^2 / (1-eps^2)^2", n));
        }
        rep.approximation_bounds += 1;

        if n >= 2 {
            if !(qabs[n] > zeta * qabs[n - 1]) {
                return Err(violation("|q_n| > zeta |q_{n-1}|", n));
            }
            rep.ratio_checks += 1;
        }
    }
    Ok(rep)
}

/// Norm of the largest denominator in the expansion, as a float (for reporting).
pub fn max_denominator_size(exp: &CFExpansion) -> f64 {
    exp.mats
        .iter()
        .map(|m| m.c.den().abs().to_f64().unwrap_or(f64::INFINITY))
        .fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn default_sets() {
        let f5 = Field::new(5).unwrap();
        let adm = default_admissible(f5, 0.9).unwrap();
        assert_eq!(
            adm.denominators(),
            &[f5.int(1, 0), f5.int(2, 0), f5.int(3, 0), f5.int(4, 0)]
        );
        assert_eq!(adm.mu(), 4.0);
        let f2 = Field::new(2).unwrap();
        let adm = default_admissible(f2, 0.9).unwrap();
        assert_eq!(adm.denominators().len(), 2);
        assert_eq!(adm.mu(), 2.0);
        let f1 = Field::new(1).unwrap();
        let adm = default_admissible(f1, 0.9).unwrap();
        assert_eq!(adm.denominators(), &[f1.int(1, 0), f1.int(2, 0)]);
    }

    #[test]
    fn default_rejects_small_eps() {
        let f2 = Field::new(2).unwrap();
        assert!(matches!(
            default_admissible(f2, 0.05),
            Err(Error::InadmissibleEpsilon { .. })
        ));
        assert!(default_admissible(f2, 1.0).is_err());
    }

    #[test]
    fn covering_radius_known_lattices() {
        let f1 = Field::new(1).unwrap();
        let v = covering_epsilon(&[f1.one()], f1);
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-9, "{v}");
        let f3 = Field::new(3).unwrap();
        let v = covering_epsilon(&[f3.one()], f3);
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn step_example_gaussian() {
        let f1 = Field::new(1).unwrap();
        let adm = AdmissibleSet::new(f1, default_denominators(f1), 0.75).unwrap();
        let (choice, z_next) = cf_step(c(3.2, 0.1), &f1.one(), &adm).unwrap();
        assert_eq!(choice.a, f1.int(3, 0));
        assert_eq!(choice.b, f1.one());
        assert!((z_next - c(1.0, 0.0) / c(0.2, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn step_at_lattice_point_is_rational() {
        for d in [1, 2, 5, 7] {
            let f = Field::new(d).unwrap();
            let adm = default_admissible(f, DEFAULT_EPS).unwrap();
            let z = f.int(2, -1).to_complex();
            assert_eq!(
                cf_step(z, &f.one(), &adm).unwrap_err(),
                Error::RationalPointReached { step: 0 }
            );
        }
    }

    #[test]
    fn expansion_of_omega_terminates() {
        let f = Field::new(5).unwrap();
        let adm = default_admissible(f, DEFAULT_EPS).unwrap();
        let exp = expand(f.omega(), 10, &adm).unwrap();
        assert!(exp.terminated);
        assert_eq!(exp.len(), 1);
        assert_eq!(exp.convergent(1).unwrap(), KElement::from(f.int(0, 1)));
    }

    #[test]
    fn expansion_invariants_d2() {
        let f = Field::new(2).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let exp = expand(c(0.7345, 1.2813), 15, &adm).unwrap();
        assert_eq!(exp.len(), 15);
        for n in 0..=15 {
            assert!(exp.det_check(n), "det at {n}");
            assert!(exp.shift_check(n));
        }
        let rep = check_growth(&exp).unwrap();
        assert_eq!(rep.det_checks, 15);
        assert_eq!(rep.growth_pairs, 15 * 16 / 2);
    }

    #[test]
    fn json_shape() {
        let f = Field::new(2).unwrap();
        let adm = default_admissible(f, 0.9).unwrap();
        let exp = expand(c(0.7345, 1.2813), 3, &adm).unwrap();
        let v = serde_json::to_value(exp.to_json()).unwrap();
        assert_eq!(v["D"], 2);
        assert_eq!(v["steps"].as_array().unwrap().len(), 3);
        assert_eq!(v["steps"][0]["n"], 1);
        assert_eq!(v["steps"][0]["det_check"], true);
    }
}
