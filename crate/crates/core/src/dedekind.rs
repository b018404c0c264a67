//! Elliptic Dedekind sums `D(a, c) = (1/c) sum_{mu in O_K / c O_K} E_1(a mu / c) E_1(mu / c)`
//! and the homomorphism `Phi` on `GL_2(O_K)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use crate::eisenstein::EisensteinContext;
use crate::error::{Error, Result};
use crate::matrix::Mat2O;
use crate::qfield::{CosetTable, Field, KElement, QuadInt};

/// Default cap on `N(c)`.
pub const DEFAULT_BUDGET: u64 = 100_000;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct DedekindResult {
    pub a: QuadInt,
    pub c: QuadInt,
    /// `D(a, c)`.
    pub value: Complex64,
    /// `D(a, c) / (i sqrt|d_K| E_2(0))`; `None` when `E_2(0) = 0`.
    pub normalized: Option<Complex64>,
    /// `N(c)`, the number of cosets summed.
    pub ncosets: u64,
    pub err_bound: f64,
}

impl DedekindResult {
    /// Real part of the normalized sum.
    pub fn normalized_value(&self) -> Result<f64> {
        self.normalized
            .map(|v| v.re)
            .ok_or(Error::NormalizationUndefined(self.a.field().d()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out {
            #[serde(rename = "D")]
            d: u64,
            a: String,
            c: String,
            value: [f64; 2],
            value_err_bound: f64,
            normalized: Option<f64>,
            normalized_imag: Option<f64>,
            ncosets: u64,
        }
        serde_json::to_value(Out {
            d: self.a.field().d(),
            a: self.a.to_string(),
            c: self.c.to_string(),
            value: [self.value.re, self.value.im],
            value_err_bound: self.err_bound,
            normalized: self.normalized.map(|v| v.re),
            normalized_imag: self.normalized.map(|v| v.im),
            ncosets: self.ncosets,
        })
        .expect("plain data serializes")
    }
}

/// `i sqrt|d_K| E_2(0)`, or `None` for `D in {1, 3}` where `E_2(0) = 0`.
pub fn normalizer(ctx: &EisensteinContext) -> Option<Complex64> {
    let f = ctx.field();
    if f.has_extra_units() {
        None
    } else {
        Some(I * f.sqrt_abs_disc() * ctx.e2_zero())
    }
}

/// `(1/c) sum_mu table[a mu mod c] table[mu]` for a prebuilt table of `E_1(mu / c)`.
pub fn sum_with_table(a: &QuadInt, table: &CosetTable, values: &[Complex64]) -> Complex64 {
    let f = a.field();
    let (ax, ay) = table.rep_coords(table.reduce_mod(a));
    let (t, n) = (f.trace_omega() as i128, f.norm_omega() as i128);
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, v) in values.iter().enumerate() {
        let (x, y) = table.rep_coords(idx);
        let px = ax * x - n * ay * y;
        let py = ax * y + ay * x + t * ay * y;
        acc += values[table.index_of_coords(px, py)] * v;
    }
    acc / table.modulus().to_complex()
}

/// `D(a, c)` from one table of `N(c)` values of `E_1`.
pub fn dedekind_sum(
    a: &QuadInt,
    c: &QuadInt,
    ctx: &EisensteinContext,
    budget: u64,
) -> Result<DedekindResult> {
    if c.is_zero() {
        return Err(Error::ZeroModulus);
    }
    let table = CosetTable::new(c)?;
    let values = ctx.e1_table(&table, budget)?;
    let value = sum_with_table(a, &table, &values);
    let ncosets = table.len() as u64;
    let scale: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() / c.to_complex().norm();
    let err_bound = ctx.prec() * (1.0 + 2.0 * scale.sqrt() * (ncosets as f64).sqrt())
        + 16.0 * f64::EPSILON * ncosets as f64 * scale;
    let normalized = normalizer(ctx).map(|z| value / z);
    Ok(DedekindResult {
        a: a.clone(),
        c: c.clone(),
        value,
        normalized,
        ncosets,
        err_bound,
    })
}

/// `|D(a, c) - D(lambda a, lambda c)| < tol`.
pub fn scaling_check(
    a: &QuadInt,
    c: &QuadInt,
    lambda: &QuadInt,
    ctx: &EisensteinContext,
    budget: u64,
    tol: f64,
) -> Result<bool> {
    if lambda.is_zero() {
        return Err(Error::ZeroModulus);
    }
    let lhs = dedekind_sum(a, c, ctx, budget)?;
    let rhs = dedekind_sum(&(lambda * a), &(lambda * c), ctx, budget)?;
    Ok((lhs.value - rhs.value).norm() < tol)
}

/// `I(z) = z - conj(z)`.
pub fn imag_part_form(z: &KElement) -> Complex64 {
    2.0 * I * z.to_complex().im
}

/// `Phi(A) = E_2(0) I(A(inf) - det(A) A^{-1}(inf)) - D(a, c)` when `c != 0`, and
/// `E_2(0) I(A(0))` when `c = 0`.
///
/// Additive on `SL_2(O_K)`. Across all of `GL_2(O_K)` the rule is
/// `Phi(AB) = Phi(A) + det(A) Phi(B)`.
pub fn phi(m: &Mat2O, ctx: &EisensteinContext, budget: u64) -> Result<Complex64> {
    let det = m.det();
    if !det.is_unit() {
        return Err(Error::NotInvertible(det.to_string()));
    }
    let s2 = ctx.e2_zero();
    if m.c.is_zero() {
        let at_zero = KElement::from(m.b.clone()).checked_div(&KElement::from(m.d.clone()))?;
        return Ok(s2 * imag_part_form(&at_zero));
    }
    // A(inf) - det A^{-1}(inf) = a/c + det d/c
    let num = &m.a + &(&det * &m.d);
    let point = KElement::from(num).checked_div(&KElement::from(m.c.clone()))?;
    let d = dedekind_sum(&m.a, &m.c, ctx, budget)?;
    Ok(s2 * imag_part_form(&point) - d.value)
}

/// `Phi(A B) - Phi(A) - Phi(B)`.
pub fn homomorphism_defect(
    a: &Mat2O,
    b: &Mat2O,
    ctx: &EisensteinContext,
    budget: u64,
) -> Result<Complex64> {
    Ok(phi(&(a * b), ctx, budget)? - phi(a, ctx, budget)? - phi(b, ctx, budget)?)
}

/// Random `u` in `O_K` with `0 < N(u) <= max_norm`.
pub fn random_small_int<R: Rng>(field: Field, max_norm: u64, rng: &mut R) -> QuadInt {
    let r = (max_norm as f64).sqrt().ceil() as i64 + 1;
    loop {
        let u = field.int(rng.random_range(-r..=r), rng.random_range(-r..=r));
        let n = u.norm();
        if !u.is_zero() && n <= BigInt::from(max_norm) {
            return u;
        }
    }
}

/// A word of length `1..=max_len` in `T^u` (with `0 < N(u) <= 10`) and the quarter turn.
pub fn random_sl2_word<R: Rng>(field: Field, max_len: usize, rng: &mut R) -> Mat2O {
    let len = rng.random_range(1..=max_len.max(1));
    let mut m = Mat2O::identity(field);
    for _ in 0..len {
        let g = if rng.random_bool(0.5) {
            Mat2O::translation(&random_small_int(field, 10, rng))
        } else {
            Mat2O::quarter_turn(field)
        };
        m = &m * &g;
    }
    m
}

/// A random word of length at most 8 whose lower-left entry has norm at most `max_c_norm`.
pub fn random_sl2<R: Rng>(field: Field, max_c_norm: u64, rng: &mut R) -> Mat2O {
    loop {
        let m = random_sl2_word(field, 8, rng);
        if m.c.norm().to_u64().is_some_and(|n| n <= max_c_norm) {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(d: i64) -> EisensteinContext {
        EisensteinContext::new(Field::new(d).unwrap())
    }

    #[test]
    fn trivial_sums() {
        let e = ctx(2);
        let f = e.field();
        let d = dedekind_sum(&f.int(3, 1), &f.one(), &e, 10).unwrap();
        assert_eq!(d.value, Complex64::new(0.0, 0.0));
        let d = dedekind_sum(&f.zero(), &f.int(2, 1), &e, 100).unwrap();
        assert_eq!(d.value, Complex64::new(0.0, 0.0));
        let d = dedekind_sum(&f.one(), &f.int(2, 0), &e, 100).unwrap();
        assert!(d.value.norm() < 1e-10);
        assert_eq!(
            dedekind_sum(&f.one(), &f.zero(), &e, 100).unwrap_err(),
            Error::ZeroModulus
        );
    }

    #[test]
    fn sum_matches_row_sum_oracle() {
        let e = ctx(2);
        let f = e.field();
        let (a, c) = (f.int(1, 1), f.int(3, 0));
        let got = dedekind_sum(&a, &c, &e, 100).unwrap();
        assert!(got.value.norm() > 1e-3);
        let cc = c.to_complex();
        let table = CosetTable::new(&c).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        let e1 = |x: &QuadInt| {
            if table.reduce_mod(x) == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                oracle::e1_row_sum(f, x.to_complex() / cc, 40)
            }
        };
        for mu in table.reps() {
            acc += e1(&(&a * &mu)) * e1(&mu);
        }
        acc /= cc;
        assert!((acc - got.value).norm() < 1e-6, "{acc} vs {}", got.value);
        assert_eq!(got.ncosets, 9);
        let n = got.normalized.unwrap();
        assert!(n.im.abs() < 1e-6);
    }

    #[test]
    fn scaling_examples() {
        let e = ctx(2);
        let f = e.field();
        let (a, c) = (f.int(1, 1), f.int(3, 0));
        for lambda in [f.one(), -f.one(), f.int(0, 1)] {
            assert!(scaling_check(&a, &c, &lambda, &e, 1000, 1e-6).unwrap());
        }
    }

    #[test]
    fn periodicity_and_oddness() {
        let e = ctx(5);
        let f = e.field();
        let c = f.int(4, 1);
        let a = f.int(2, -1);
        let base = dedekind_sum(&a, &c, &e, 1000).unwrap().value;
        let shifted = &a + &(&f.int(-3, 2) * &c);
        assert!((dedekind_sum(&shifted, &c, &e, 1000).unwrap().value - base).norm() < 1e-9);
        // mu -> -mu flips one factor only
        assert!((dedekind_sum(&-a.clone(), &c, &e, 1000).unwrap().value + base).norm() < 1e-9);
        assert!((dedekind_sum(&-a, &-c, &e, 1000).unwrap().value - base).norm() < 1e-9);
    }

    #[test]
    fn one_evaluation_per_coset() {
        let e = ctx(7);
        let f = e.field();
        let c = f.int(9, 4);
        e.reset_evaluations();
        let d = dedekind_sum(&f.int(1, 2), &c, &e, 1000).unwrap();
        assert_eq!(e.evaluations(), d.ncosets);
        assert_eq!(BigInt::from(d.ncosets), c.norm());
    }

    #[test]
    fn normalization_undefined_with_extra_units() {
        let e = ctx(3);
        let f = e.field();
        let d = dedekind_sum(&f.int(1, 1), &f.int(5, 2), &e, 1000).unwrap();
        assert_eq!(d.normalized_value(), Err(Error::NormalizationUndefined(3)));
        assert!(d.value.norm() < 1e-6);
    }

    #[test]
    fn phi_examples() {
        let e = ctx(5);
        let f = e.field();
        let id = Mat2O::identity(f);
        assert!(phi(&id, &e, 10).unwrap().norm() < 1e-10);
        assert!(phi(&Mat2O::quarter_turn(f), &e, 10).unwrap().norm() < 1e-10);
        assert!(phi(&Mat2O::translation(&f.int(7, 0)), &e, 10).unwrap().norm() < 1e-10);
        let u = f.int(1, 2);
        let expected = e.e2_zero() * imag_part_form(&KElement::from(u.clone()));
        let got = phi(&Mat2O::translation(&u), &e, 10).unwrap();
        assert!((got - expected).norm() < 1e-12);
        let bad = Mat2O::new(f.int(2, 0), f.zero(), f.zero(), f.one());
        assert!(matches!(phi(&bad, &e, 10), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn homomorphism_small_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for d in [2, 7] {
            let e = ctx(d);
            for _ in 0..4 {
                let a = random_sl2(e.field(), 50, &mut rng);
                let b = random_sl2(e.field(), 50, &mut rng);
                let defect = homomorphism_defect(&a, &b, &e, 1_000_000).unwrap();
                assert!(defect.norm() < 1e-6, "D={d}: {a} {b} {defect}");
            }
        }
    }

    #[test]
    fn determinant_twists_the_second_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut twisted = 0;
        for d in [2, 5, 7] {
            let e = ctx(d);
            let f = e.field();
            let flip = Mat2O::new(f.int(1, 0), f.int(0, 0), f.int(0, 0), f.int(-1, 0));
            for _ in 0..6 {
                let a = &random_sl2(f, 40, &mut rng) * &flip;
                let b = &flip * &random_sl2(f, 40, &mut rng);
                let (pa, pb) = (phi(&a, &e, 100_000).unwrap(), phi(&b, &e, 100_000).unwrap());
                let pab = phi(&(&a * &b), &e, 100_000).unwrap();
                assert!((pab - pa + pb).norm() < 1e-6, "D={d}: {a} {b}");
                if pb.norm() > 1e-3 {
                    twisted += 1;
                }
            }
        }
        // The plain sum would fail on these.
        assert!(twisted > 0);
    }
}
