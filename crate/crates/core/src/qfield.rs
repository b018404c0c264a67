//! Exact arithmetic in the ring of integers `O_K` of `K = Q(sqrt(-D))` and in `K`
//! itself, together with the lattice geometry of `O_K` inside the complex plane.
//!
//! Every element is written over the integral basis `(1, w)` where `w = i*sqrt(D)`
//! when `-D != 1 (mod 4)` and `w = (1 + i*sqrt(D))/2` otherwise. With `t = w + conj(w)`
//! and `n = w * conj(w)` we have `w^2 = t*w - n`, which is all the multiplication
//! table needs.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The field `Q(sqrt(-D))` with its integral basis and lattice constants.
#[derive(Clone, Copy, Debug)]
pub struct Field {
    d: u64,
    disc: i64,
    trace: i64,
    omega_norm: i64,
    omega: Complex64,
    area: f64,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
    }
}

impl Eq for Field {}

impl Hash for Field {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.d.hash(state)
    }
}

fn is_squarefree(d: u64) -> bool {
    let mut p = 2u64;
    while p * p <= d {
        if d.is_multiple_of(p * p) {
            return false;
        }
        p += 1;
    }
    true
}

impl Field {
    /// Builds `Q(sqrt(-D))` for a squarefree `D >= 1`.
    pub fn new(d: i64) -> Result<Field> {
        if d < 1 || !is_squarefree(d as u64) {
            return Err(Error::InvalidField(d));
        }
        let du = d as u64;
        let sqrt_d = (d as f64).sqrt();
        let (disc, trace, omega_norm, omega) = if d % 4 == 3 {
            (-d, 1, (1 + d) / 4, Complex64::new(0.5, sqrt_d / 2.0))
        } else {
            (-4 * d, 0, d, Complex64::new(0.0, sqrt_d))
        };
        let area = ((-disc) as f64).sqrt() / 2.0;
        Ok(Field {
            d: du,
            disc,
            trace,
            omega_norm,
            omega,
            area,
        })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    /// Field discriminant `d_K`.
    pub fn discriminant(&self) -> i64 {
        self.disc
    }

    pub fn sqrt_abs_disc(&self) -> f64 {
        ((-self.disc) as f64).sqrt()
    }

    /// Complex embedding of the basis element `w`.
    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    /// `w + conj(w)`.
    pub fn trace_omega(&self) -> i64 {
        self.trace
    }

    /// `w * conj(w)`.
    pub fn norm_omega(&self) -> i64 {
        self.omega_norm
    }

    /// Covolume of `O_K` in the complex plane.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// E2(0) vanishes exactly for the fields with extra units.
    pub fn has_extra_units(&self) -> bool {
        self.d == 1 || self.d == 3
    }

    pub fn int(&self, x: i64, y: i64) -> QuadInt {
        QuadInt::new(*self, BigInt::from(x), BigInt::from(y))
    }

    pub fn zero(&self) -> QuadInt {
        self.int(0, 0)
    }

    pub fn one(&self) -> QuadInt {
        self.int(1, 0)
    }

    /// Real coordinates of `w` over the basis `(1, omega)`.
    pub fn coords(&self, w: Complex64) -> (f64, f64) {
        let y = w.im / self.omega.im;
        (w.re - y * self.omega.re, y)
    }

    pub fn embed_coords(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(x + y * self.omega.re, y * self.omega.im)
    }

    /// Closest element of `O_K` to `w`.
    ///
    /// Ties are broken by the smaller norm, then lexicographically on `(x, y)`.
    pub fn nearest_lattice(&self, w: Complex64) -> QuadInt {
        let (x, y) = self.coords(w);
        let (fx, fy) = (x.floor(), y.floor());
        let mut best: Option<(f64, i128, f64, f64)> = None;
        for dy in -1..=2 {
            for dx in -1..=2 {
                let cx = fx + dx as f64;
                let cy = fy + dy as f64;
                let r = self.embed_coords(x - cx, y - cy).norm_sqr();
                let nrm = self.approx_norm(cx, cy);
                let better = match best {
                    None => true,
                    Some((br, bn, bx, by)) => {
                        r < br || (r == br && (nrm < bn || (nrm == bn && (cx, cy) < (bx, by))))
                    }
                };
                if better {
                    best = Some((r, nrm, cx, cy));
                }
            }
        }
        let (_, _, cx, cy) = best.expect("candidate window is never empty");
        QuadInt::new(
            *self,
            BigInt::from_f64(cx).unwrap_or_default(),
            BigInt::from_f64(cy).unwrap_or_default(),
        )
    }

    fn approx_norm(&self, x: f64, y: f64) -> i128 {
        let (x, y) = (x as i128, y as i128);
        x * x + self.trace as i128 * x * y + self.omega_norm as i128 * y * y
    }

    /// Coset representatives of `O_K / c O_K` from the Hermite normal form of
    /// multiplication by `c`.
    pub fn coset_table(&self, c: &QuadInt) -> Result<CosetTable> {
        CosetTable::new(c)
    }

    /// Parses `"x+y*w"` style text into an element of `O_K`.
    pub fn parse_int(&self, s: &str) -> Result<QuadInt> {
        parse_quadint(*self, s)
    }

    /// Parses either an integral element or `"(x+y*w)/den"`.
    pub fn parse_element(&self, s: &str) -> Result<KElement> {
        parse_kelement(*self, s)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(sqrt(-{}))", self.d)
    }
}

/// An element `x + y*w` of `O_K`.
#[derive(Clone, Debug)]
pub struct QuadInt {
    field: Field,
    x: BigInt,
    y: BigInt,
}

impl PartialEq for QuadInt {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.x == other.x && self.y == other.y
    }
}

impl Eq for QuadInt {}

impl Hash for QuadInt {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.field.hash(state);
        self.x.hash(state);
        self.y.hash(state);
    }
}

impl QuadInt {
    pub fn new(field: Field, x: BigInt, y: BigInt) -> QuadInt {
        QuadInt { field, x, y }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn x(&self) -> &BigInt {
        &self.x
    }

    pub fn y(&self) -> &BigInt {
        &self.y
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.x.is_one() && self.y.is_zero()
    }

    /// `N(x + y*w) = x^2 + t*x*y + n*y^2`.
    pub fn norm(&self) -> BigInt {
        let f = &self.field;
        &self.x * &self.x + BigInt::from(f.trace) * &self.x * &self.y
            + BigInt::from(f.omega_norm) * &self.y * &self.y
    }

    pub fn is_unit(&self) -> bool {
        self.norm().is_one()
    }

    pub fn conj(&self) -> QuadInt {
        let t = BigInt::from(self.field.trace);
        QuadInt::new(self.field, &self.x + t * &self.y, -&self.y)
    }

    /// True when the element is a rational integer.
    pub fn is_rational(&self) -> bool {
        self.y.is_zero()
    }

    pub fn to_complex(&self) -> Complex64 {
        let x = self.x.to_f64().unwrap_or(f64::NAN);
        let y = self.y.to_f64().unwrap_or(f64::NAN);
        self.field.embed_coords(x, y)
    }

    /// Coordinates as machine integers, if they fit.
    pub fn to_i128_pair(&self) -> Option<(i128, i128)> {
        Some((self.x.to_i128()?, self.y.to_i128()?))
    }

    pub fn scale(&self, k: &BigInt) -> QuadInt {
        QuadInt::new(self.field, &self.x * k, &self.y * k)
    }

    /// Exact division by a rational integer, when it divides both coordinates.
    pub fn div_exact_int(&self, k: &BigInt) -> Option<QuadInt> {
        if k.is_zero() {
            return None;
        }
        let (qx, rx) = self.x.div_rem(k);
        let (qy, ry) = self.y.div_rem(k);
        (rx.is_zero() && ry.is_zero()).then(|| QuadInt::new(self.field, qx, qy))
    }

    /// `gcd` of the two coordinates (content over `Z`).
    pub fn content(&self) -> BigInt {
        self.x.gcd(&self.y)
    }
}

impl<'a> Add<&'a QuadInt> for &'a QuadInt {
    type Output = QuadInt;
    fn add(self, rhs: &QuadInt) -> QuadInt {
        debug_assert!(self.field == rhs.field);
        QuadInt::new(self.field, &self.x + &rhs.x, &self.y + &rhs.y)
    }
}

impl<'a> Sub<&'a QuadInt> for &'a QuadInt {
    type Output = QuadInt;
    fn sub(self, rhs: &QuadInt) -> QuadInt {
        debug_assert!(self.field == rhs.field);
        QuadInt::new(self.field, &self.x - &rhs.x, &self.y - &rhs.y)
    }
}

impl<'a> Mul<&'a QuadInt> for &'a QuadInt {
    type Output = QuadInt;
    fn mul(self, rhs: &QuadInt) -> QuadInt {
        debug_assert!(self.field == rhs.field);
        let f = &self.field;
        let yy = &self.y * &rhs.y;
        let x = &self.x * &rhs.x - BigInt::from(f.omega_norm) * &yy;
        let y = &self.x * &rhs.y + &self.y * &rhs.x + BigInt::from(f.trace) * yy;
        QuadInt::new(self.field, x, y)
    }
}

impl Neg for &QuadInt {
    type Output = QuadInt;
    fn neg(self) -> QuadInt {
        QuadInt::new(self.field, -&self.x, -&self.y)
    }
}

macro_rules! forward_owned {
    ($t:ty, $($tr:ident $m:ident),*) => {$(
        impl $tr<$t> for $t {
            type Output = $t;
            fn $m(self, rhs: $t) -> $t { (&self).$m(&rhs) }
        }
        impl<'a> $tr<&'a $t> for $t {
            type Output = $t;
            fn $m(self, rhs: &'a $t) -> $t { (&self).$m(rhs) }
        }
    )*};
}

forward_owned!(QuadInt, Add add, Sub sub, Mul mul);

impl Neg for QuadInt {
    type Output = QuadInt;
    fn neg(self) -> QuadInt {
        -&self
    }
}

fn write_coords(f: &mut fmt::Formatter<'_>, x: &BigInt, y: &BigInt) -> fmt::Result {
    match (x.is_zero(), y.is_zero()) {
        (_, true) => write!(f, "{x}"),
        (true, false) => write!(f, "{y}*w"),
        (false, false) if y.is_negative() => write!(f, "{x}-{}*w", -y),
        (false, false) => write!(f, "{x}+{y}*w"),
    }
}

impl fmt::Display for QuadInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coords(f, &self.x, &self.y)
    }
}

/// An element `(x + y*w)/den` of `K` with `den > 0` and `gcd(x, y, den) = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KElement {
    num: QuadInt,
    den: BigInt,
}

impl KElement {
    pub fn new(num: QuadInt, den: BigInt) -> Result<KElement> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: QuadInt, den: BigInt) -> KElement {
        let mut g = num.content().gcd(&den);
        if den.is_negative() {
            g = -g;
        }
        if g.is_one() {
            return KElement { num, den };
        }
        let field = num.field;
        KElement {
            num: QuadInt::new(field, &num.x / &g, &num.y / &g),
            den: den / g,
        }
    }

    pub fn zero(field: Field) -> KElement {
        KElement::from(field.zero())
    }

    pub fn one(field: Field) -> KElement {
        KElement::from(field.one())
    }

    pub fn from_int(field: Field, k: i64) -> KElement {
        KElement::from(field.int(k, 0))
    }

    pub fn field(&self) -> Field {
        self.num.field
    }

    pub fn num(&self) -> &QuadInt {
        &self.num
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.den.is_one()
    }

    pub fn to_integral(&self) -> Option<QuadInt> {
        self.is_integral().then(|| self.num.clone())
    }

    pub fn to_complex(&self) -> Complex64 {
        let den = self.den.to_f64().unwrap_or(f64::NAN);
        if den.is_finite() && self.num.x.bits() < 1000 && self.num.y.bits() < 1000 {
            return self.num.to_complex() / den;
        }
        // Large entries: scale through rationals to avoid overflow.
        let x = BigRational::new(self.num.x.clone(), self.den.clone());
        let y = BigRational::new(self.num.y.clone(), self.den.clone());
        self.field()
            .embed_coords(x.to_f64().unwrap_or(f64::NAN), y.to_f64().unwrap_or(f64::NAN))
    }

    pub fn conj(&self) -> KElement {
        KElement::normalized(self.num.conj(), self.den.clone())
    }

    /// Field norm as an exact rational.
    pub fn norm(&self) -> BigRational {
        BigRational::new(self.num.norm(), &self.den * &self.den)
    }

    pub fn inv(&self) -> Result<KElement> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        // 1/(u/d) = d*conj(u)/N(u)
        let n = self.num.norm();
        Ok(KElement::normalized(self.num.conj().scale(&self.den), n))
    }

    pub fn checked_div(&self, rhs: &KElement) -> Result<KElement> {
        Ok(self * &rhs.inv()?)
    }

    /// Rational coordinates over `(1, w)`.
    pub fn rational_coords(&self) -> (BigRational, BigRational) {
        (
            BigRational::new(self.num.x.clone(), self.den.clone()),
            BigRational::new(self.num.y.clone(), self.den.clone()),
        )
    }

    /// Complex absolute value.
    pub fn abs(&self) -> f64 {
        self.to_complex().norm()
    }
}

impl From<QuadInt> for KElement {
    fn from(num: QuadInt) -> KElement {
        KElement {
            num,
            den: BigInt::one(),
        }
    }
}

impl<'a> Add<&'a KElement> for &'a KElement {
    type Output = KElement;
    fn add(self, rhs: &KElement) -> KElement {
        if self.den == rhs.den {
            return KElement::normalized(&self.num + &rhs.num, self.den.clone());
        }
        let num = self.num.scale(&rhs.den) + rhs.num.scale(&self.den);
        KElement::normalized(num, &self.den * &rhs.den)
    }
}

impl<'a> Sub<&'a KElement> for &'a KElement {
    type Output = KElement;
    fn sub(self, rhs: &KElement) -> KElement {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a KElement> for &'a KElement {
    type Output = KElement;
    fn mul(self, rhs: &KElement) -> KElement {
        KElement::normalized(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &KElement {
    type Output = KElement;
    fn neg(self) -> KElement {
        KElement {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

forward_owned!(KElement, Add add, Sub sub, Mul mul);

impl Neg for KElement {
    type Output = KElement;
    fn neg(self) -> KElement {
        -&self
    }
}

impl fmt::Display for KElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        write!(f, "(")?;
        write_coords(f, &self.num.x, &self.num.y)?;
        write!(f, ")/{}", self.den)
    }
}

/// Evaluates `q*z - p` for exact `p, q` and a binary floating `z` without the
/// cancellation a naive float product suffers once `q` is large.
///
/// The real and imaginary parts are both of the form `r1 + r2*sqrt(D)` with exact
/// rationals; opposite signs are combined through the conjugate quotient.
pub fn linear_form(q: &KElement, z: Complex64, p: &KElement) -> Complex64 {
    let field = q.field();
    let d = BigRational::from_integer(BigInt::from(field.d));
    let zr = BigRational::from_float(z.re).unwrap_or_default();
    let zi = BigRational::from_float(z.im).unwrap_or_default();
    // w = t/2 + i*s*sqrt(D) with s = 1 (t = 0) or 1/2 (t = 1).
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let (wr, s) = if field.trace == 1 {
        (half.clone(), half)
    } else {
        (BigRational::zero(), BigRational::one())
    };
    let (qx, qy) = q.rational_coords();
    let (px, py) = p.rational_coords();
    let qa = &qx + &qy * &wr;
    let qb = &qy * &s;
    let pa = &px + &py * &wr;
    let pb = &py * &s;
    let re_rat = &qa * &zr - &pa;
    let re_surd = -(&qb * &zi);
    let im_rat = &qa * &zi;
    let im_surd = &qb * &zr - &pb;
    Complex64::new(
        eval_surd(&re_rat, &re_surd, &d),
        eval_surd(&im_rat, &im_surd, &d),
    )
}

fn eval_surd(r1: &BigRational, r2: &BigRational, d: &BigRational) -> f64 {
    let sqrt_d = d.to_f64().unwrap_or(f64::NAN).sqrt();
    if r1.is_zero() || r2.is_zero() || r1.is_positive() == r2.is_positive() {
        return r1.to_f64().unwrap_or(f64::NAN) + r2.to_f64().unwrap_or(f64::NAN) * sqrt_d;
    }
    let numer = r1 * r1 - d * r2 * r2;
    let denom = r1.to_f64().unwrap_or(f64::NAN) - r2.to_f64().unwrap_or(f64::NAN) * sqrt_d;
    numer.to_f64().unwrap_or(f64::NAN) / denom
}

/// Coset representatives of `O_K / c O_K`.
///
/// The sublattice `c O_K` has a basis `(d1, 0), (h, d2)` in coordinates over
/// `(1, w)` with `0 <= h < d1` and `d1 * d2 = N(c)`. Representatives are the box
/// `{(i, j) : 0 <= i < d1, 0 <= j < d2}` indexed by `i * d2 + j`.
#[derive(Clone, Debug)]
pub struct CosetTable {
    modulus: QuadInt,
    d1: i128,
    d2: i128,
    h: i128,
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

impl CosetTable {
    pub fn new(c: &QuadInt) -> Result<CosetTable> {
        if c.is_zero() {
            return Err(Error::ZeroModulus);
        }
        let overflow = || Error::BudgetExceeded {
            norm: c.norm().to_string(),
            budget: i64::MAX as u64,
        };
        let (cx, cy) = c.to_i128_pair().ok_or_else(overflow)?;
        if cx.abs() > 1 << 40 || cy.abs() > 1 << 40 {
            return Err(overflow());
        }
        let f = c.field();
        let (t, n) = (f.trace as i128, f.omega_norm as i128);
        // Columns c*1 = (cx, cy) and c*w = (-n*cy, cx + t*cy).
        let (v1, v2) = ((cx, cy), (-n * cy, cx + t * cy));
        let (g, s, r) = ext_gcd(v1.1, v2.1);
        let norm = cx * cx + t * cx * cy + n * cy * cy;
        let d2 = g;
        let d1 = norm / g;
        let h = (s * v1.0 + r * v2.0).rem_euclid(d1);
        Ok(CosetTable {
            modulus: c.clone(),
            d1,
            d2,
            h,
        })
    }

    pub fn modulus(&self) -> &QuadInt {
        &self.modulus
    }

    /// Number of cosets, `N(c)`.
    pub fn len(&self) -> usize {
        (self.d1 * self.d2) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// HNF box dimensions `(d1, d2)` and shear `h`.
    pub fn hnf(&self) -> (i128, i128, i128) {
        (self.d1, self.d2, self.h)
    }

    pub fn rep_coords(&self, index: usize) -> (i128, i128) {
        let i = index as i128;
        (i / self.d2, i % self.d2)
    }

    pub fn rep(&self, index: usize) -> QuadInt {
        let (x, y) = self.rep_coords(index);
        QuadInt::new(self.modulus.field(), BigInt::from(x), BigInt::from(y))
    }

    pub fn reps(&self) -> impl Iterator<Item = QuadInt> + '_ {
        (0..self.len()).map(move |i| self.rep(i))
    }

    /// Canonical representative coordinates of `(x, y)` modulo `c O_K`.
    pub fn reduce_coords(&self, x: i128, y: i128) -> (i128, i128) {
        let j = y.rem_euclid(self.d2);
        let k = (y - j) / self.d2;
        let i = (x - k * self.h).rem_euclid(self.d1);
        (i, j)
    }

    pub fn index_of_coords(&self, x: i128, y: i128) -> usize {
        let (i, j) = self.reduce_coords(x, y);
        (i * self.d2 + j) as usize
    }

    /// Position of the canonical representative of `mu`.
    pub fn reduce_mod(&self, mu: &QuadInt) -> usize {
        if let Some((x, y)) = mu.to_i128_pair() {
            if x.abs() < 1 << 100 && y.abs() < 1 << 100 {
                return self.index_of_coords(x, y);
            }
        }
        let d2 = BigInt::from(self.d2);
        let j = mu.y().mod_floor(&d2);
        let k = (mu.y() - &j) / &d2;
        let i = (mu.x() - k * BigInt::from(self.h)).mod_floor(&BigInt::from(self.d1));
        (i.to_i128().expect("reduced below d1") * self.d2 + j.to_i128().expect("reduced below d2"))
            as usize
    }
}

fn parse_err(input: &str, reason: &str) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

/// Grammar: a sum of terms `[+-] int`, `[+-] [int] [*] w`.
fn parse_quadint(field: Field, input: &str) -> Result<QuadInt> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(parse_err(input, "empty"));
    }
    let mut x = BigInt::zero();
    let mut y = BigInt::zero();
    let bytes = s.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        let mut sign = BigInt::one();
        if bytes[pos] == b'+' || bytes[pos] == b'-' {
            if bytes[pos] == b'-' {
                sign = -sign;
            }
            pos += 1;
        } else if pos != 0 {
            return Err(parse_err(input, "expected '+' or '-'"));
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let coeff = if start == pos {
            None
        } else {
            Some(
                s[start..pos]
                    .parse::<BigInt>()
                    .map_err(|_| parse_err(input, "bad integer"))?,
            )
        };
        let mut is_w = false;
        if pos < bytes.len() && bytes[pos] == b'*' {
            pos += 1;
            if pos >= bytes.len() || bytes[pos] != b'w' {
                return Err(parse_err(input, "expected 'w' after '*'"));
            }
        }
        if pos < bytes.len() && bytes[pos] == b'w' {
            is_w = true;
            pos += 1;
        }
        match (coeff, is_w) {
            (None, false) => return Err(parse_err(input, "missing term")),
            (Some(c), false) => x += sign * c,
            (c, true) => y += sign * c.unwrap_or_else(BigInt::one),
        }
    }
    Ok(QuadInt::new(field, x, y))
}

fn parse_kelement(field: Field, input: &str) -> Result<KElement> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    match s.rfind('/') {
        None => Ok(KElement::from(parse_quadint(field, &s)?)),
        Some(idx) => {
            let (head, tail) = (&s[..idx], &s[idx + 1..]);
            let head = head
                .strip_prefix('(')
                .and_then(|h| h.strip_suffix(')'))
                .unwrap_or(head);
            let den = tail
                .parse::<BigInt>()
                .map_err(|_| parse_err(input, "bad denominator"))?;
            KElement::new(parse_quadint(field, head)?, den)
                .map_err(|_| parse_err(input, "zero denominator"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn make_field_cases() {
        let f1 = Field::new(1).unwrap();
        assert_eq!(f1.discriminant(), -4);
        assert_eq!(f1.omega(), Complex64::new(0.0, 1.0));
        assert!(close(f1.area(), 1.0, 1e-15));

        let f7 = Field::new(7).unwrap();
        assert_eq!(f7.discriminant(), -7);
        assert!(close(f7.omega().re, 0.5, 0.0));
        assert!(close(f7.omega().im, 7f64.sqrt() / 2.0, 1e-15));
        assert!(close(f7.area(), 7f64.sqrt() / 2.0, 1e-15));

        let f5 = Field::new(5).unwrap();
        assert_eq!(f5.discriminant(), -20);
        assert!(close(f5.omega().im, 5f64.sqrt(), 1e-15));
        assert!(close(f5.area(), 5f64.sqrt(), 1e-15));
    }

    #[test]
    fn make_field_rejects() {
        assert_eq!(Field::new(0), Err(Error::InvalidField(0)));
        assert_eq!(Field::new(-3), Err(Error::InvalidField(-3)));
        assert_eq!(Field::new(12), Err(Error::InvalidField(12)));
        assert!(Field::new(30).is_ok());
    }

    #[test]
    fn area_matches_basis_parallelogram() {
        for d in [1, 2, 3, 5, 6, 7, 10, 11, 15, 23] {
            let f = Field::new(d).unwrap();
            let w = f.omega();
            // |Im(conj(1) * w)|
            assert!(close(w.im.abs(), f.area(), 1e-14));
            assert!(w.im > 0.0);
        }
    }

    #[test]
    fn nearest_lattice_examples() {
        let f1 = Field::new(1).unwrap();
        assert_eq!(f1.nearest_lattice(Complex64::new(0.2, 0.1)), f1.zero());
        assert_eq!(f1.nearest_lattice(Complex64::new(0.5, 0.5)), f1.zero());
        let f5 = Field::new(5).unwrap();
        let w = Complex64::new(1.6, 0.7 * 5f64.sqrt());
        assert_eq!(f5.nearest_lattice(w), f5.int(2, 1));
    }

    #[test]
    fn nearest_lattice_matches_brute_force() {
        let f5 = Field::new(5).unwrap();
        let w = Complex64::new(1.6, 0.7 * 5f64.sqrt());
        let mut best = (f64::INFINITY, 0, 0);
        for x in -3..=3 {
            for y in -3..=3 {
                let r = (w - f5.int(x, y).to_complex()).norm();
                if r < best.0 {
                    best = (r, x, y);
                }
            }
        }
        assert_eq!((best.1, best.2), (2, 1));
    }

    #[test]
    fn coset_examples() {
        let f2 = Field::new(2).unwrap();
        let t1 = f2.coset_table(&f2.one()).unwrap();
        assert_eq!(t1.len(), 1);
        assert_eq!(t1.rep(0), f2.zero());

        let t2 = f2.coset_table(&f2.int(2, 0)).unwrap();
        let reps: Vec<_> = t2.reps().collect();
        assert_eq!(reps.len(), 4);
        for r in [f2.zero(), f2.one(), f2.int(0, 1), f2.int(1, 1)] {
            assert!(reps.contains(&r));
        }
        assert_eq!(t2.reduce_mod(&f2.int(3, 2)), t2.reduce_mod(&f2.one()));
        assert_eq!(t2.reduce_mod(&f2.zero()), 0);

        let tw = f2.coset_table(&f2.int(0, 1)).unwrap();
        assert_eq!(tw.len(), 2);
        assert_eq!(tw.reduce_mod(&f2.int(0, 1)), tw.reduce_mod(&f2.zero()));
        assert_ne!(tw.reduce_mod(&f2.one()), tw.reduce_mod(&f2.zero()));

        assert_eq!(f2.coset_table(&f2.zero()).unwrap_err(), Error::ZeroModulus);
    }

    /// Brute-force check: representatives are pairwise inequivalent and every small
    /// lattice point lands on the representative it is congruent to.
    #[test]
    fn coset_reps_pairwise_inequivalent() {
        for d in [1, 2, 3, 5, 7] {
            let f = Field::new(d).unwrap();
            for c in [f.int(0, 1), f.int(3, 0), f.int(1, 1), f.int(2, -1), f.int(4, 3)] {
                let table = f.coset_table(&c).unwrap();
                let n = c.norm().to_usize().unwrap();
                assert_eq!(table.len(), n);
                let reps: Vec<_> = table.reps().collect();
                let divides = |u: &QuadInt| {
                    let q = KElement::from(u.clone())
                        .checked_div(&KElement::from(c.clone()))
                        .unwrap();
                    q.is_integral()
                };
                for i in 0..n {
                    for j in (i + 1)..n {
                        assert!(!divides(&(&reps[i] - &reps[j])));
                    }
                }
                for x in -6..=6 {
                    for y in -6..=6 {
                        let mu = f.int(x, y);
                        let r = &reps[table.reduce_mod(&mu)];
                        assert!(divides(&(&mu - r)));
                    }
                }
            }
        }
    }

    #[test]
    fn display_and_parse() {
        let f = Field::new(2).unwrap();
        assert_eq!(f.int(3, 1).to_string(), "3+1*w");
        assert_eq!(f.int(0, -2).to_string(), "-2*w");
        assert_eq!(f.int(-4, -1).to_string(), "-4-1*w");
        assert_eq!(f.int(0, 0).to_string(), "0");
        assert_eq!(f.parse_int("3+1*w").unwrap(), f.int(3, 1));
        assert_eq!(f.parse_int("-2*w").unwrap(), f.int(0, -2));
        assert_eq!(f.parse_int("w").unwrap(), f.int(0, 1));
        assert_eq!(f.parse_int("-w+5").unwrap(), f.int(5, -1));
        assert_eq!(f.parse_int(" 7 ").unwrap(), f.int(7, 0));
        assert!(f.parse_int("3+").is_err());
        assert!(f.parse_int("x").is_err());
        let k = KElement::new(f.int(1, 3), BigInt::from(4)).unwrap();
        assert_eq!(k.to_string(), "(1+3*w)/4");
        assert_eq!(f.parse_element("(1+3*w)/4").unwrap(), k);
        assert_eq!(f.parse_element("(2+6*w)/8").unwrap(), k);
    }

    #[test]
    fn kelement_field_ops() {
        let f = Field::new(5).unwrap();
        let a = KElement::from(f.int(2, 1));
        let b = KElement::new(f.int(1, -1), BigInt::from(3)).unwrap();
        let q = a.checked_div(&b).unwrap();
        assert_eq!(&q * &b, a);
        assert_eq!(&(&a + &b) - &b, a);
        assert!(KElement::zero(f).inv().is_err());
        let z = (a.to_complex() / b.to_complex() - q.to_complex()).norm();
        assert!(z < 1e-12);
    }

    #[test]
    fn linear_form_is_accurate() {
        let f = Field::new(2).unwrap();
        let z = Complex64::new(0.7345, 1.2813);
        let q = KElement::from(f.int(123457, -98765));
        let p = KElement::from(f.nearest_lattice(q.to_complex() * z));
        let exact = linear_form(&q, z, &p);
        let naive = q.to_complex() * z - p.to_complex();
        assert!((exact - naive).norm() < 1e-9);
        assert!(exact.norm() < 1.0);
    }
}
