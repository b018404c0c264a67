//! Eisenstein-Kronecker quantities for the lattice `O_K = Z + Z w`.
//!
//! `E_1(z) = zeta_W(z) - s_2 z - (pi/A) conj(z)` and `E_2(0) = s_2 = eta_1 - pi/A`,
//! where `zeta_W` is the Weierstrass zeta function, `eta_1 = zeta_W(z+1) - zeta_W(z)`
//! and `A` is the covolume. `zeta_W` is evaluated from its q-expansion in `tau = w`
//! after reducing the argument to `|Re| <= 1/2`, `|Im| <= Im(tau)/2`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qfield::{CosetTable, Field, KElement};

pub const DEFAULT_PREC: f64 = 1e-10;

/// Smallest absolute accuracy the double-precision evaluation can certify.
pub const PREC_FLOOR: f64 = 1e-13;

/// Arguments this close to a lattice point are treated as lattice points.
const LATTICE_TOL: f64 = 1e-13;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug)]
pub struct EisensteinContext {
    field: Field,
    tau: Complex64,
    q2: Complex64,
    eta1: Complex64,
    eta2: Complex64,
    s2: Complex64,
    pi_over_a: f64,
    prec: f64,
    terms: usize,
    evaluations: AtomicU64,
}

impl Clone for EisensteinContext {
    fn clone(&self) -> Self {
        EisensteinContext {
            evaluations: AtomicU64::new(self.evaluations()),
            ..*self
        }
    }
}

impl EisensteinContext {
    pub fn new(field: Field) -> EisensteinContext {
        Self::with_prec(field, DEFAULT_PREC).expect("default precision is certifiable")
    }

    pub fn with_prec(field: Field, prec: f64) -> Result<EisensteinContext> {
        if !(prec >= PREC_FLOOR) {
            return Err(Error::PrecisionUnavailable {
                requested: prec,
                floor: PREC_FLOOR,
            });
        }
        let tau = field.omega();
        let q2 = (2.0 * PI * I * tau).exp();
        // Terms of both series decay at least like exp(-pi k Im tau); run well past 1e-18.
        let terms = ((18.0 * 10f64.ln()) / (PI * tau.im)).ceil() as usize + 4;
        let mut lambert = Complex64::zero();
        let mut qn = Complex64::new(1.0, 0.0);
        for n in 1..=terms {
            qn *= q2;
            lambert += (n as f64) * qn / (1.0 - qn);
        }
        let eta1 = (PI * PI / 3.0) * (1.0 - 24.0 * lambert);
        let eta2 = tau * eta1 - 2.0 * PI * I;
        let pi_over_a = PI / field.area();
        let s2 = eta1 - pi_over_a;
        Ok(EisensteinContext {
            field,
            tau,
            q2,
            eta1,
            eta2,
            s2,
            pi_over_a,
            prec,
            terms,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn prec(&self) -> f64 {
        self.prec
    }

    /// `eta_1 = zeta_W(z + 1) - zeta_W(z)`.
    pub fn eta1(&self) -> Complex64 {
        self.eta1
    }

    /// `eta_2 = zeta_W(z + w) - zeta_W(z)`.
    pub fn eta2(&self) -> Complex64 {
        self.eta2
    }

    pub fn pi_over_area(&self) -> f64 {
        self.pi_over_a
    }

    /// Number of q-series terms used per evaluation.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Number of `E_1` evaluations since construction or the last reset.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    /// Error bound on the returned value, never below the context precision.
    pub fn err_bound(&self, value: Complex64) -> f64 {
        self.prec.max(64.0 * f64::EPSILON * (1.0 + value.norm()))
    }

    /// Splits `z = z0 + m + n tau` with `z0` reduced.
    fn reduce(&self, z: Complex64) -> (Complex64, f64, f64) {
        let n = (z.im / self.tau.im).round();
        let z1 = z - n * self.tau;
        let m = z1.re.round();
        (z1 - m, m, n)
    }

    /// The q-series for `zeta_W`, valid for `|Im z0| < Im tau`.
    fn zeta_series(&self, z0: Complex64) -> Complex64 {
        let mut acc = self.eta1 * z0 + PI * cot(PI * z0);
        let mut qk = Complex64::new(1.0, 0.0);
        for k in 1..=self.terms {
            qk *= self.q2;
            acc += 4.0 * PI * qk / (1.0 - qk) * (2.0 * PI * (k as f64) * z0).sin();
        }
        acc
    }

    /// Weierstrass zeta function of `O_K`.
    pub fn weierstrass_zeta(&self, z: Complex64) -> Result<Complex64> {
        let (z0, m, n) = self.reduce(z);
        if z0.norm() < self.prec {
            return Err(Error::Pole(format!("{z}")));
        }
        Ok(self.zeta_series(z0) + m * self.eta1 + n * self.eta2)
    }

    /// `E_2(0) = s_2`.
    pub fn e2_zero(&self) -> Complex64 {
        self.s2
    }

    /// `E_1(z) = zeta_W(z) - s_2 z - (pi/A) conj(z)`, computed from the closed form
    /// without first reducing `z` modulo the lattice.
    pub fn e1_unreduced(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.weierstrass_zeta(z)? - self.s2 * z - self.pi_over_a * z.conj())
    }

    fn e1_reduced(&self, z0: Complex64) -> Complex64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if z0.norm() < LATTICE_TOL {
            return Complex64::zero();
        }
        self.zeta_series(z0) - self.s2 * z0 - self.pi_over_a * z0.conj()
    }

    /// `E_1(z)`, lattice periodic, with `E_1 = 0` on the lattice.
    pub fn e1(&self, z: Complex64) -> Complex64 {
        let (x, y) = self.field.coords(z);
        let z0 = self.field.embed_coords(x - x.round(), y - y.round());
        self.e1_reduced(z0)
    }

    /// `E_1` at the point with lattice coordinates `(u, v)`, reduced exactly first.
    pub fn e1_rational(&self, u: &BigRational, v: &BigRational) -> Complex64 {
        let (u0, v0) = (centered(u), centered(v));
        let z0 = self.field.embed_coords(ratio_f64(&u0), ratio_f64(&v0));
        self.e1_reduced(z0)
    }

    /// `E_1(w)` for `w` in `K`.
    pub fn e1_at(&self, w: &KElement) -> Complex64 {
        let (u, v) = w.rational_coords();
        self.e1_rational(&u, &v)
    }

    /// `E_1(mu / c)` for every coset representative `mu` of `O_K / c O_K`, in the
    /// order of `table`. The `mu = 0` entry is exactly 0.
    pub fn e1_table(&self, table: &CosetTable, budget: u64) -> Result<Vec<Complex64>> {
        let c = table.modulus();
        let norm = c.norm();
        if norm > BigInt::from(budget) {
            return Err(Error::BudgetExceeded {
                norm: norm.to_string(),
                budget,
            });
        }
        let nn = norm.to_i128().expect("within budget");
        let (cx, cy) = c.to_i128_pair().expect("within budget");
        let (t, nw) = (self.field.trace_omega() as i128, self.field.norm_omega() as i128);
        // mu / c = mu conj(c) / N(c)
        let (gx, gy) = (cx + t * cy, -cy);
        let vals: Vec<Complex64> = (0..table.len())
            .into_par_iter()
            .map(|idx| {
                let (x, y) = table.rep_coords(idx);
                let px = x * gx - nw * y * gy;
                let py = x * gy + y * gx + t * y * gy;
                let u = centered_int(px, nn) as f64 / nn as f64;
                let v = centered_int(py, nn) as f64 / nn as f64;
                self.e1_reduced(self.field.embed_coords(u, v))
            })
            .collect();
        Ok(vals)
    }

    /// `|eta_1 tau - eta_2 - 2 pi i|` with `eta_2 = 2 zeta_W(tau/2)` taken straight
    /// from the series, i.e. independently of the stored `eta_2`.
    pub fn legendre_residual(&self) -> f64 {
        let eta2 = 2.0 * self.zeta_series(self.tau / 2.0);
        (self.eta1 * self.tau - eta2 - 2.0 * PI * I).norm()
    }
}

/// `cot w = i (e^{2iw} + 1) / (e^{2iw} - 1)`, using whichever exponential is small.
pub(crate) fn cot(w: Complex64) -> Complex64 {
    if w.im >= 0.0 {
        let e = (2.0 * I * w).exp();
        I * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-2.0 * I * w).exp();
        I * (1.0 + e) / (1.0 - e)
    }
}

/// Representative of `x` modulo 1 in `(-1/2, 1/2]`.
fn centered(x: &BigRational) -> BigRational {
    let num = x.numer();
    let den = x.denom();
    let r = num.mod_floor(den);
    let r = if BigInt::from(2) * &r > *den { r - den } else { r };
    BigRational::new(r, den.clone())
}

fn centered_int(x: i128, n: i128) -> i128 {
    let r = x.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

fn ratio_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Naive lattice sums, kept as independent cross-checks of the q-series path.
pub mod oracle {
    use super::*;

    fn lattice_points_in_disc(field: Field, radius: f64, mut visit: impl FnMut(Complex64)) {
        let tau = field.omega();
        let rows = (radius / tau.im).ceil() as i64 + 1;
        for n in -rows..=rows {
            let off = n as f64 * tau;
            if off.im.abs() > radius {
                continue;
            }
            let half = (radius * radius - off.im * off.im).sqrt();
            let lo = (-half - off.re).ceil() as i64;
            let hi = (half - off.re).floor() as i64;
            for m in lo..=hi {
                visit(off + m as f64);
            }
        }
    }

    /// `sum_{0 < |x| <= R} x^{-2} |x|^{-s}` over the lattice.
    pub fn e2_disc_sum(field: Field, s: f64, radius: f64) -> Complex64 {
        let mut acc = Complex64::zero();
        lattice_points_in_disc(field, radius, |x| {
            let r2 = x.norm_sqr();
            if r2 > 0.0 {
                acc += x.conj() * x.conj() / (r2 * r2) * r2.powf(-0.5 * s);
            }
        });
        acc
    }

    /// `sum' x^{-2} |x|^{-s}` over the whole lattice for `s > 0`, split at `t = pi / A`
    /// in `|x|^{-4-s} = Gamma(a)^{-1} int t^{a-1} e^{-t|x|^2} dt` (`a = 2 + s/2`); the
    /// small-`t` half goes to the dual lattice, where the `xi = 0` term vanishes.
    pub fn e2_hecke(field: Field, s: f64) -> Complex64 {
        use statrs::function::gamma::{gamma, gamma_ur};
        let area = field.area();
        let t = PI / area;
        let a = 2.0 + 0.5 * s;
        // e^{-t r^2} < 1e-20 beyond this radius, likewise for the dual sum.
        let radius = (46.0 / t).sqrt();
        let mut direct = Complex64::zero();
        lattice_points_in_disc(field, radius, |x| {
            let r2 = x.norm_sqr();
            if r2 > 0.0 {
                let xb = x.conj();
                direct += xb * xb * r2.powf(-a) * gamma_ur(a, t * r2);
            }
        });
        // Dual lattice: Re(x conj(xi)) in Z; generators 1/conj(...) in coordinates.
        let tau = field.omega();
        let (b1, b2) = (
            Complex64::new(1.0, -tau.re / tau.im),
            Complex64::new(0.0, 1.0 / tau.im),
        );
        let dual_radius = (46.0 * t).sqrt() / PI;
        let rows = (dual_radius * tau.im).ceil() as i64 + 1;
        let cols = (dual_radius * 2.0 * (1.0 + tau.re.abs() / tau.im)).ceil() as i64 + 2;
        let b = 3.0 - a;
        let gb = gamma(b) / gamma(a);
        let mut dual = Complex64::zero();
        for j in -rows..=rows {
            for i in -cols..=cols {
                let xi = b1 * i as f64 + b2 * j as f64;
                let r2 = xi.norm_sqr();
                if r2 == 0.0 || r2 > dual_radius * dual_radius {
                    continue;
                }
                let y = PI * PI * r2;
                let xb = xi.conj();
                dual += xb * xb * y.powf(a - 3.0) * gamma_ur(b, y / t) * gb;
            }
        }
        direct - dual * (PI.powi(3) / area)
    }

    /// Quadratic extrapolation to `s = 0` of [`e2_hecke`] at `s in {0.01, 0.02, 0.04}`.
    pub fn e2_extrapolated(field: Field) -> Complex64 {
        let s = [0.01, 0.02, 0.04];
        let f: Vec<Complex64> = s.iter().map(|&si| e2_hecke(field, si)).collect();
        let mut acc = Complex64::zero();
        for i in 0..3 {
            let mut w = 1.0;
            for j in 0..3 {
                if i != j {
                    w *= (0.0 - s[j]) / (s[i] - s[j]);
                }
            }
            acc += w * f[i];
        }
        acc
    }

    /// `1/z + sum' [1/(z-w) + 1/w + z/w^2]` over lattice points `0 < |w| <= R`.
    pub fn zeta_direct(field: Field, z: Complex64, radius: f64) -> Complex64 {
        let mut acc = 1.0 / z;
        lattice_points_in_disc(field, radius, |w| {
            if w.norm_sqr() > 0.0 {
                acc += 1.0 / (z - w) + 1.0 / w + z / (w * w);
            }
        });
        acc
    }

    /// `E_1(z) = sum_{|n| <= rows} pi cot(pi (z + n w)) + (pi/A)(z - conj(z))`:
    /// Eisenstein summation, rows of the lattice summed first.
    pub fn e1_row_sum(field: Field, z: Complex64, rows: i64) -> Complex64 {
        let tau = field.omega();
        let mut acc = Complex64::zero();
        for n in -rows..=rows {
            acc += PI * cot(PI * (z + n as f64 * tau));
        }
        acc + (PI / field.area()) * (z - z.conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ctx(d: i64) -> EisensteinContext {
        EisensteinContext::new(Field::new(d).unwrap())
    }

    #[test]
    fn square_lattice_half_period() {
        let e = ctx(1);
        let z = e.weierstrass_zeta(c(0.5, 0.0)).unwrap();
        assert!((z - c(PI / 2.0, 0.0)).norm() < 1e-12);
        let direct = oracle::zeta_direct(e.field(), c(0.5, 0.0), 300.0);
        assert!((direct - z).norm() < 1e-4, "{direct} vs {z}");
    }

    #[test]
    fn zeta_matches_direct_sum() {
        for d in [2, 5, 7] {
            let e = ctx(d);
            let z = c(0.31, 0.47);
            let q = e.weierstrass_zeta(z).unwrap();
            let direct = oracle::zeta_direct(e.field(), z, 300.0);
            assert!((q - direct).norm() < 1e-4, "D={d}: {q} vs {direct}");
        }
    }

    #[test]
    fn zeta_pole_and_oddness() {
        let e = ctx(5);
        assert!(matches!(
            e.weierstrass_zeta(e.field().int(2, 1).to_complex()),
            Err(Error::Pole(_))
        ));
        let z = c(0.7, -1.3);
        let s = e.weierstrass_zeta(z).unwrap() + e.weierstrass_zeta(-z).unwrap();
        assert!(s.norm() < 1e-11);
    }

    #[test]
    fn quasi_periodicity() {
        let e = ctx(7);
        for z in [c(0.1, 0.2), c(-0.4, 1.1), c(2.3, -0.8)] {
            let d = e.weierstrass_zeta(z + 1.0).unwrap() - e.weierstrass_zeta(z).unwrap();
            assert!((d - e.eta1()).norm() < 1e-10);
        }
    }

    #[test]
    fn e2_vanishes_with_extra_units() {
        assert!(ctx(1).e2_zero().norm() < 1e-12);
        assert!(ctx(3).e2_zero().norm() < 1e-12);
        assert!(ctx(2).e2_zero().norm() > 0.5);
    }

    #[test]
    fn e2_values() {
        // Frozen from the extrapolated lattice sum oracle.
        for (d, v) in [(2, 1.0574989), (5, 1.8848427), (7, 0.9344235)] {
            let s2 = ctx(d).e2_zero();
            assert!((s2.re - v).abs() < 1e-6 && s2.im.abs() < 1e-12, "D={d}: {s2}");
        }
    }

    #[test]
    fn e2_matches_continued_hecke_sum() {
        for d in [2, 5, 6, 7] {
            let c = ctx(d);
            let o = oracle::e2_extrapolated(c.field());
            assert!((o - c.e2_zero()).norm() < 1e-6, "D={d}: {o} vs {}", c.e2_zero());
        }
        for d in [1, 3] {
            assert!(oracle::e2_extrapolated(Field::new(d).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn hecke_sum_agrees_with_disc_sum() {
        for d in [2, 7] {
            let f = Field::new(d).unwrap();
            let diff = oracle::e2_hecke(f, 0.3) - oracle::e2_disc_sum(f, 0.3, 400.0);
            assert!(diff.norm() < 1e-4, "D={d}: {diff}");
        }
    }

    #[test]
    fn legendre_relation() {
        for d in [1, 2, 3, 5, 7, 10, 11] {
            let e = ctx(d);
            assert!(e.legendre_residual() < 1e-11, "D={d}");
            let eta1 = 2.0 * e.weierstrass_zeta(c(0.5, 0.0)).unwrap();
            assert!((eta1 - e.eta1()).norm() < 1e-11);
        }
    }

    #[test]
    fn e1_periodic_odd_and_matches_row_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1, 2, 3, 5, 7] {
            let e = ctx(d);
            let w = e.field().omega();
            for _ in 0..10 {
                let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let v = e.e1_unreduced(z).unwrap();
                assert!((e.e1_unreduced(z + w).unwrap() - v).norm() < 1e-9);
                assert!((e.e1_unreduced(z - 3.0).unwrap() - v).norm() < 1e-9);
                assert!((e.e1_unreduced(-z).unwrap() + v).norm() < 1e-9);
                assert!((e.e1(z) - v).norm() < 1e-9);
                let rows = oracle::e1_row_sum(e.field(), z, 40);
                assert!((rows - v).norm() < 1e-9, "D={d} z={z}: {rows} vs {v}");
            }
        }
    }

    #[test]
    fn e1_rotation_gaussian() {
        let e = ctx(1);
        let z = c(0.23, 0.41);
        assert!((e.e1(I * z) + I * e.e1(z)).norm() < 1e-10);
    }

    #[test]
    fn e1_half_lattice_points() {
        for d in [2, 5, 7] {
            let e = ctx(d);
            let w = e.field().omega();
            for z in [c(0.5, 0.0), w / 2.0, (1.0 + w) / 2.0] {
                assert!(e.e1(z).norm() < 1e-10);
            }
            assert_eq!(e.e1(w), Complex64::zero());
        }
    }

    #[test]
    fn tables() {
        let f = Field::new(2).unwrap();
        let e = EisensteinContext::new(f);
        let t1 = f.coset_table(&f.one()).unwrap();
        assert_eq!(e.e1_table(&t1, 10).unwrap(), vec![Complex64::zero()]);

        let t2 = f.coset_table(&f.int(2, 0)).unwrap();
        let v2 = e.e1_table(&t2, 10).unwrap();
        assert_eq!(v2.len(), 4);
        assert!(v2.iter().all(|v| v.norm() < 1e-10));

        let t3 = f.coset_table(&f.int(3, 0)).unwrap();
        e.reset_evaluations();
        let v3 = e.e1_table(&t3, 10).unwrap();
        assert_eq!(e.evaluations(), 9);
        for (idx, mu) in t3.reps().enumerate() {
            let neg = t3.reduce_mod(&-mu.clone());
            assert!((v3[idx] + v3[neg]).norm() < 1e-10);
            let direct = e.e1(mu.to_complex() / 3.0);
            assert!((direct - v3[idx]).norm() < 1e-10);
        }
        assert!(matches!(
            e.e1_table(&t3, 8),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn precision_floor() {
        let f = Field::new(2).unwrap();
        assert!(matches!(
            EisensteinContext::with_prec(f, 1e-15),
            Err(Error::PrecisionUnavailable { .. })
        ));
    }

    #[test]
    fn exact_coordinates_agree() {
        let f = Field::new(5).unwrap();
        let e = EisensteinContext::new(f);
        let w = KElement::new(f.int(7, -3), BigInt::from(11)).unwrap();
        assert!((e.e1_at(&w) - e.e1(w.to_complex())).norm() < 1e-10);
        let shifted = &w + &KElement::from(f.int(-4, 9));
        assert!((e.e1_at(&w) - e.e1_at(&shifted)).norm() < 1e-14);
    }
}
