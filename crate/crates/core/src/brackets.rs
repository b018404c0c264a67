//! The bracket recurrence
//! `[b_0, ..., a_n, b_n] = (a_n / b_{n-1}) [b_0, ..., a_{n-1}, b_{n-1}]
//!                       + (b_n / b_{n-1}) [b_0, ..., a_{n-2}, b_{n-2}]`
//! with `[b_0] = b_0` and `[b_0, a_1, b_1] = a_1`, evaluated exactly.

use rand::Rng;
use serde::Serialize;

use crate::cfmartin::CFExpansion;
use crate::error::{Error, Result};
use crate::qfield::{Field, KElement, QuadInt};

/// `b_0, a_1, b_1, ..., a_n, b_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketSeq {
    /// `a_1, ..., a_n`.
    pub a: Vec<KElement>,
    /// `b_0, ..., b_n`.
    pub b: Vec<KElement>,
}

impl BracketSeq {
    pub fn new(b: Vec<KElement>, a: Vec<KElement>) -> Result<BracketSeq> {
        if b.is_empty() || a.len() + 1 != b.len() {
            return Err(Error::Usage(format!(
                "bracket sequence needs n+1 b's and n a's, got {} and {}",
                b.len(),
                a.len()
            )));
        }
        if b.iter().any(KElement::is_zero) {
            return Err(Error::DivisionByZero);
        }
        Ok(BracketSeq { a, b })
    }

    /// The `(a, b)` data of an expansion.
    pub fn from_expansion(exp: &CFExpansion) -> BracketSeq {
        BracketSeq {
            a: exp.a.iter().cloned().map(KElement::from).collect(),
            b: exp.b.iter().cloned().map(KElement::from).collect(),
        }
    }

    /// `n`, the number of `a`'s.
    pub fn depth(&self) -> usize {
        self.a.len()
    }

    /// `b_n, a_n, ..., a_1, b_0`.
    pub fn reversed(&self) -> BracketSeq {
        BracketSeq {
            a: self.a.iter().rev().cloned().collect(),
            b: self.b.iter().rev().cloned().collect(),
        }
    }

    /// Random entries `(x + y w) / k` with `x, y` in `[-5, 5]`, `x != 0`, and `k` in
    /// `1..=max_den`. With `max_den = 1` the entries lie in `O_K`.
    pub fn random<R: Rng>(field: Field, depth: usize, max_den: i64, rng: &mut R) -> BracketSeq {
        let draw = |rng: &mut R| {
            let mut x = 0;
            while x == 0 {
                x = rng.random_range(-5..=5);
            }
            let y = rng.random_range(-5..=5);
            let k = rng.random_range(1..=max_den.max(1));
            KElement::new(field.int(x, y), k.into()).expect("nonzero denominator")
        };
        let b = (0..=depth).map(|_| draw(rng)).collect();
        let a = (0..depth).map(|_| draw(rng)).collect();
        BracketSeq { a, b }
    }
}

/// All sub-brackets `[b_i, a_{i+1}, ..., a_j, b_j]`, memoized by `(i, j)`.
///
/// The empty range `j = i - 1` evaluates to 0, which is what the recurrence needs
/// to reproduce `[b_i, a_{i+1}, b_{i+1}] = a_{i+1}`.
#[derive(Clone, Debug)]
pub struct BracketTable {
    n: usize,
    zero: KElement,
    rows: Vec<Vec<KElement>>,
}

impl BracketTable {
    pub fn new(seq: &BracketSeq) -> Result<BracketTable> {
        let n = seq.depth();
        let field = seq.b[0].field();
        let mut rows = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut row: Vec<KElement> = Vec::with_capacity(n + 1 - i);
            row.push(seq.b[i].clone());
            for j in i + 1..=n {
                let prev = &row[j - 1 - i];
                let bj1 = &seq.b[j - 1];
                let head = (&seq.a[j - 1] * prev).checked_div(bj1)?;
                let tail = if j >= i + 2 {
                    (&seq.b[j] * &row[j - 2 - i]).checked_div(bj1)?
                } else {
                    KElement::zero(field)
                };
                row.push(&head + &tail);
            }
            rows.push(row);
        }
        Ok(BracketTable {
            n,
            zero: KElement::zero(field),
            rows,
        })
    }

    /// `[b_i, ..., b_j]`; `j + 1 == i` gives the empty bracket 0.
    pub fn get(&self, i: usize, j: usize) -> &KElement {
        assert!(i <= self.n + 1 && j <= self.n && i <= j + 1, "bracket range {i}..{j}");
        if j + 1 == i {
            &self.zero
        } else {
            &self.rows[i][j - i]
        }
    }
}

/// `[b_0, a_1, ..., a_n, b_n]`.
pub fn bracket(seq: &BracketSeq) -> Result<KElement> {
    let table = BracketTable::new(seq)?;
    Ok(table.get(0, seq.depth()).clone())
}

fn violation(what: String, index: usize) -> Error {
    Error::InvariantViolation { what, index }
}

/// `p_n = [b_0, ..., b_n]` and `q_n = [b_1, ..., b_n]` for every `n` of the expansion.
pub fn verify_convergent_lemma(exp: &CFExpansion) -> Result<usize> {
    let seq = BracketSeq::from_expansion(exp);
    let table = BracketTable::new(&seq)?;
    for n in 0..=exp.len() {
        if table.get(0, n) != exp.p(n) {
            return Err(violation("p_n = [b_0, ..., b_n]".into(), n));
        }
        if table.get(1, n) != exp.q(n) {
            return Err(violation("q_n = [b_1, ..., b_n]".into(), n));
        }
    }
    Ok(2 * (exp.len() + 1))
}

/// Counts of exact equalities confirmed by [`verify_identities`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub first_step: usize,
    pub reversal: usize,
    pub determinant: usize,
}

impl IdentityReport {
    pub fn total(&self) -> usize {
        self.first_step + self.reversal + self.determinant
    }

    fn absorb(&mut self, other: &IdentityReport) {
        self.first_step += other.first_step;
        self.reversal += other.reversal;
        self.determinant += other.determinant;
    }
}

/// Checks, on every contiguous window `b_i, ..., b_j` of the sequence,
///
/// * `[b_i..b_j] = (a_{i+1}/b_{i+1}) [b_{i+1}..b_j] + (b_i/b_{i+1}) [b_{i+2}..b_j]`,
/// * `[b_i, a_{i+1}, ..., a_j, b_j] = [b_j, a_j, ..., a_{i+1}, b_i]`,
/// * `[b_m..b_n][b_{m+1}..b_{n-1}] - [b_m..b_{n-1}][b_{m+1}..b_n] = (-1)^{n-m} b_n b_m`.
pub fn verify_identities(seq: &BracketSeq) -> Result<IdentityReport> {
    let n = seq.depth();
    let fwd = BracketTable::new(seq)?;
    let rev = BracketTable::new(&seq.reversed())?;
    let mut rep = IdentityReport::default();

    for i in 0..=n {
        for j in i..=n {
            // Window i..j of the sequence is window (n-j)..(n-i) of its reversal.
            if fwd.get(i, j) != rev.get(n - j, n - i) {
                return Err(violation(format!("reversal on window {i}..{j}"), j));
            }
            rep.reversal += 1;

            if j > i {
                let lhs = fwd.get(i, j);
                let b1 = &seq.b[i + 1];
                let rhs = &(&seq.a[i] * fwd.get(i + 1, j)).checked_div(b1)?
                    + &(&seq.b[i] * fwd.get(i + 2, j)).checked_div(b1)?;
                if *lhs != rhs {
                    return Err(violation(format!("first-step expansion on window {i}..{j}"), j));
                }
                rep.first_step += 1;

                let (m, k) = (i, j);
                let cross = &(fwd.get(m, k) * fwd.get(m + 1, k - 1))
                    - &(fwd.get(m, k - 1) * fwd.get(m + 1, k));
                let mut expected = &seq.b[k] * &seq.b[m];
                if (k - m) % 2 == 1 {
                    expected = -expected;
                }
                if cross != expected {
                    return Err(violation(format!("determinant identity at (m, n) = ({m}, {k})"), k));
                }
                rep.determinant += 1;
            }
        }
    }
    Ok(rep)
}

/// Runs [`verify_identities`] over `trials` random sequences of depth `1..=max_depth`.
pub fn verify_random<R: Rng>(
    field: Field,
    max_depth: usize,
    trials: usize,
    max_den: i64,
    rng: &mut R,
) -> Result<IdentityReport> {
    let mut total = IdentityReport::default();
    for _ in 0..trials {
        let depth = rng.random_range(1..=max_depth.max(1));
        let seq = BracketSeq::random(field, depth, max_den, rng);
        total.absorb(&verify_identities(&seq)?);
    }
    Ok(total)
}

/// Helper for callers holding `O_K` data.
pub fn seq_from_ints(b: &[QuadInt], a: &[QuadInt]) -> Result<BracketSeq> {
    BracketSeq::new(
        b.iter().cloned().map(KElement::from).collect(),
        a.iter().cloned().map(KElement::from).collect(),
    )
}
