//! 2x2 matrices over `K` and over `O_K`, acting on the extended complex plane by
//! Moebius transformations.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qfield::{Field, KElement, QuadInt};

/// A matrix `[[a, b], [c, d]]` with entries in `K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KMat2 {
    pub a: KElement,
    pub b: KElement,
    pub c: KElement,
    pub d: KElement,
}

impl KMat2 {
    pub fn new(a: KElement, b: KElement, c: KElement, d: KElement) -> KMat2 {
        KMat2 { a, b, c, d }
    }

    pub fn identity(field: Field) -> KMat2 {
        Mat2O::identity(field).to_k()
    }

    /// `[[0, -1], [1, 0]]`.
    pub fn quarter_turn(field: Field) -> KMat2 {
        Mat2O::quarter_turn(field).to_k()
    }

    /// `T^u = [[1, u], [0, 1]]`.
    pub fn translation(u: &KElement) -> KMat2 {
        let f = u.field();
        KMat2::new(
            KElement::one(f),
            u.clone(),
            KElement::zero(f),
            KElement::one(f),
        )
    }

    pub fn field(&self) -> Field {
        self.a.field()
    }

    pub fn det(&self) -> KElement {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    pub fn inverse(&self) -> Result<KMat2> {
        let inv_det = self.det().inv()?;
        Ok(KMat2::new(
            &self.d * &inv_det,
            &(-&self.b) * &inv_det,
            &(-&self.c) * &inv_det,
            &self.a * &inv_det,
        ))
    }

    /// `M(inf) = a/c`, or `None` for the point at infinity.
    pub fn at_infinity(&self) -> Option<KElement> {
        if self.c.is_zero() {
            return None;
        }
        self.a.checked_div(&self.c).ok()
    }

    /// `M^{-1}(inf) = -d/c`, or `None` for the point at infinity.
    pub fn inverse_at_infinity(&self) -> Option<KElement> {
        if self.c.is_zero() {
            return None;
        }
        Some(-self.d.checked_div(&self.c).ok()?)
    }

    /// Moebius action on an exact point; `None` means infinity.
    pub fn apply_exact(&self, w: &KElement) -> Option<KElement> {
        let den = &(&self.c * w) + &self.d;
        if den.is_zero() {
            return None;
        }
        (&(&self.a * w) + &self.b).checked_div(&den).ok()
    }

    /// Moebius action on a complex point; `None` means infinity.
    pub fn apply(&self, w: Complex64) -> Option<Complex64> {
        let den = self.c.to_complex() * w + self.d.to_complex();
        if den == Complex64::new(0.0, 0.0) {
            return None;
        }
        Some((self.a.to_complex() * w + self.b.to_complex()) / den)
    }

    pub fn is_integral(&self) -> bool {
        self.entries().iter().all(|e| e.is_integral())
    }

    pub fn to_integral(&self) -> Option<Mat2O> {
        Some(Mat2O::new(
            self.a.to_integral()?,
            self.b.to_integral()?,
            self.c.to_integral()?,
            self.d.to_integral()?,
        ))
    }

    pub fn entries(&self) -> [&KElement; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }
}

impl<'a> Mul<&'a KMat2> for &'a KMat2 {
    type Output = KMat2;
    fn mul(self, r: &KMat2) -> KMat2 {
        KMat2::new(
            &(&self.a * &r.a) + &(&self.b * &r.c),
            &(&self.a * &r.b) + &(&self.b * &r.d),
            &(&self.c * &r.a) + &(&self.d * &r.c),
            &(&self.c * &r.b) + &(&self.d * &r.d),
        )
    }
}

impl fmt::Display for KMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// A matrix `[[a, b], [c, d]]` with entries in `O_K`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat2O {
    pub a: QuadInt,
    pub b: QuadInt,
    pub c: QuadInt,
    pub d: QuadInt,
}

impl Mat2O {
    pub fn new(a: QuadInt, b: QuadInt, c: QuadInt, d: QuadInt) -> Mat2O {
        Mat2O { a, b, c, d }
    }

    pub fn identity(field: Field) -> Mat2O {
        Mat2O::new(field.one(), field.zero(), field.zero(), field.one())
    }

    pub fn quarter_turn(field: Field) -> Mat2O {
        Mat2O::new(field.zero(), -field.one(), field.one(), field.zero())
    }

    pub fn translation(u: &QuadInt) -> Mat2O {
        let f = u.field();
        Mat2O::new(f.one(), u.clone(), f.zero(), f.one())
    }

    pub fn field(&self) -> Field {
        self.a.field()
    }

    pub fn det(&self) -> QuadInt {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    /// Membership in `GL_2(O_K)`.
    pub fn is_invertible(&self) -> bool {
        self.det().is_unit()
    }

    pub fn inverse(&self) -> Result<Mat2O> {
        let det = self.det();
        if !det.is_unit() {
            return Err(Error::NotInvertible(det.to_string()));
        }
        // For a unit, det^{-1} = conj(det).
        let inv = det.conj();
        Ok(Mat2O::new(
            &self.d * &inv,
            -(&self.b * &inv),
            -(&self.c * &inv),
            &self.a * &inv,
        ))
    }

    pub fn to_k(&self) -> KMat2 {
        KMat2::new(
            self.a.clone().into(),
            self.b.clone().into(),
            self.c.clone().into(),
            self.d.clone().into(),
        )
    }
}

impl<'a> Mul<&'a Mat2O> for &'a Mat2O {
    type Output = Mat2O;
    fn mul(self, r: &Mat2O) -> Mat2O {
        Mat2O::new(
            &(&self.a * &r.a) + &(&self.b * &r.c),
            &(&self.a * &r.b) + &(&self.b * &r.d),
            &(&self.c * &r.a) + &(&self.d * &r.c),
            &(&self.c * &r.b) + &(&self.d * &r.d),
        )
    }
}

impl fmt::Display for Mat2O {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_has_order_four() {
        let f = Field::new(5).unwrap();
        let q = Mat2O::quarter_turn(f);
        let q2 = &q * &q;
        let q4 = &q2 * &q2;
        assert_eq!(q4, Mat2O::identity(f));
        assert_eq!(q.to_k().at_infinity(), Some(KElement::zero(f)));
    }

    #[test]
    fn inverse_and_infinity_images() {
        let f = Field::new(2).unwrap();
        let m = Mat2O::new(f.int(1, 1), f.int(2, 0), f.int(0, 1), f.int(-1, 1));
        // det = (1+w)(-1+w) - 2w = w^2 - 1 - 2w = -3 - 2w: not a unit.
        assert!(!m.is_invertible());
        assert!(m.inverse().is_err());
        let k = m.to_k();
        let inv = k.inverse().unwrap();
        assert_eq!(&k * &inv, KMat2::identity(f));
        let a_inf = k.at_infinity().unwrap();
        let back = inv.apply_exact(&a_inf);
        assert_eq!(back, None);
        assert_eq!(
            k.inverse_at_infinity().unwrap(),
            -k.d.checked_div(&k.c).unwrap()
        );
    }

    #[test]
    fn unimodular_inverse_is_integral() {
        let f = Field::new(7).unwrap();
        let t = Mat2O::translation(&f.int(2, -1));
        let q = Mat2O::quarter_turn(f);
        let m = &(&t * &q) * &t;
        let inv = m.inverse().unwrap();
        assert_eq!(&m * &inv, Mat2O::identity(f));
    }
}
