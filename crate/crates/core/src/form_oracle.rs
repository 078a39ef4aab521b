//! Exact exterior algebra over C³.
//!
//! Forms are sums of canonical monomials `dz^I ∧ dz̄^J` with `I`, `J` strictly
//! increasing. The generator order is `dz¹, dz², dz³, dz̄¹, dz̄², dz̄³`; every sign
//! in the crate descends from that single choice. The algebra is generic over the
//! coefficient ring so the same code runs in double precision and in exact
//! Gaussian-rational arithmetic.
//!
//! Index conventions shared with the rest of the crate (all 0-based):
//! * a (1,1)-form matrix `phi[k][j]` is the coefficient `φ_{k̄j}` of
//!   `i φ_{k̄j} dz^j ∧ dz̄^k` (row = barred index);
//! * a (2,2)-form matrix `psi[k][j]` is `Ψ^{kj̄}` in the
//!   `i^{n-1}(n-1)! sgn(k,j)` component convention with n = 3.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{AnomalyError, Result};

pub const DIM: usize = 3;

/// 3×3 array of coefficients, row-major.
pub type Mat3<C> = [[C; DIM]; DIM];

/// Gaussian rationals: exact complex numbers with rational parts.
pub type GaussRational = Complex<BigRational>;

/// Coefficient ring of the exterior algebra.
pub trait Coefficient:
    Clone
    + PartialEq
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn imag_unit() -> Self;
    fn from_int(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn conj(&self) -> Self;
    /// Division; only ever called with a unit-modulus power of `i` times an integer.
    fn div(&self, other: &Self) -> Self;
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn from_int(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
}

impl Coefficient for GaussRational {
    fn zero() -> Self {
        Complex::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Complex::new(BigRational::one(), BigRational::zero())
    }
    fn imag_unit() -> Self {
        Complex::new(BigRational::zero(), BigRational::one())
    }
    fn from_int(v: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(v)), BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn div(&self, other: &Self) -> Self {
        self.clone() / other.clone()
    }
}

/// Build a Gaussian rational from integer numerators and denominators.
pub fn gauss(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> GaussRational {
    Complex::new(
        BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
        BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
    )
}

/// A canonical monomial `dz^I ∧ dz̄^J`, stored as two bit masks over {0,1,2}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub holo: u8,
    pub anti: u8,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { holo: 0, anti: 0 };
    pub const TOP: Monomial = Monomial { holo: 0b111, anti: 0b111 };

    pub fn bidegree(self) -> (usize, usize) {
        (self.holo.count_ones() as usize, self.anti.count_ones() as usize)
    }

    fn generators(self) -> u8 {
        self.holo | (self.anti << DIM)
    }

    /// Sign of `self ∧ other` relative to the canonical monomial of the union,
    /// or `None` when a generator repeats.
    fn wedge_sign(self, other: Monomial) -> Option<(Monomial, bool)> {
        let a = self.generators();
        let b = other.generators();
        if a & b != 0 {
            return None;
        }
        // inversions: pairs (x in a, y in b) with x > y
        let mut inversions = 0u32;
        for x in 0..2 * DIM {
            if a & (1 << x) != 0 {
                inversions += (b & ((1u8 << x) - 1)).count_ones();
            }
        }
        let merged = Monomial {
            holo: self.holo | other.holo,
            anti: self.anti | other.anti,
        };
        Some((merged, inversions % 2 == 1))
    }
}

/// An element of the exterior algebra over `dz¹..dz³, dz̄¹..dz̄³`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiVector<C: Coefficient> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> Default for MultiVector<C> {
    fn default() -> Self {
        Self { terms: BTreeMap::new() }
    }
}

impl<C: Coefficient> MultiVector<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: C) -> Self {
        Self::term(Monomial::ONE, c)
    }

    pub fn term(m: Monomial, c: C) -> Self {
        let mut out = Self::zero();
        out.add_term(m, c);
        out
    }

    /// `dz^j`, 0-based.
    pub fn dz(j: usize) -> Self {
        Self::term(Monomial { holo: 1 << j, anti: 0 }, C::one())
    }

    /// `dz̄^k`, 0-based.
    pub fn dzbar(k: usize) -> Self {
        Self::term(Monomial { holo: 0, anti: 1 << k }, C::one())
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn coefficient(&self, m: Monomial) -> C {
        self.terms.get(&m).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.add_term(*m, v.clone() * c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_term(*m, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_term(*m, -v.clone());
        }
        out
    }

    /// Complex conjugate as a form: conjugates coefficients and swaps `dz ↔ dz̄`.
    pub fn conjugate(&self) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            // conj(dz^I ∧ dz̄^J) = dz̄^I ∧ dz^J, reorder to dz^J ∧ dz̄^I
            let swapped = MultiVector::<C>::term(Monomial { holo: 0, anti: m.holo }, C::one())
                .wedge(&MultiVector::term(Monomial { holo: m.anti, anti: 0 }, C::one()));
            for (sm, sv) in swapped.terms {
                out.add_term(sm, sv * v.conj());
            }
        }
        out
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, negative)) = ma.wedge_sign(*mb) {
                    let c = ca.clone() * cb.clone();
                    out.add_term(m, if negative { -c } else { c });
                }
            }
        }
        out
    }

    /// True when every term has bidegree `(p, q)`.
    pub fn is_pure(&self, p: usize, q: usize) -> bool {
        self.terms.keys().all(|m| m.bidegree() == (p, q))
    }
}

/// `i φ_{k̄j} dz^j ∧ dz̄^k`.
pub fn from_form11<C: Coefficient>(phi: &Mat3<C>) -> MultiVector<C> {
    let mut out = MultiVector::zero();
    for (k, row) in phi.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let m = Monomial { holo: 1 << j, anti: 1 << k };
            out.add_term(m, C::imag_unit() * v.clone());
        }
    }
    out
}

/// Basis (2,2)-monomial for the `(k, j)` component: the ordered product over
/// ℓ of `dz^ℓ ∧ dz̄^ℓ` with `dz^k` and `dz̄^j` removed.
fn form22_basis_monomial<C: Coefficient>(k: usize, j: usize) -> MultiVector<C> {
    let mut out = MultiVector::scalar(C::one());
    for l in 0..DIM {
        let keep_holo = l != k;
        let keep_anti = l != j;
        if keep_holo {
            out = out.wedge(&MultiVector::dz(l));
        }
        if keep_anti {
            out = out.wedge(&MultiVector::dzbar(l));
        }
    }
    out
}

/// Prefactor `i^{n-1} (n-1)! sgn(k,j)` for n = 3.
fn form22_prefactor<C: Coefficient>(k: usize, j: usize) -> C {
    let sgn = if k > j { -2 } else { 2 };
    C::imag_unit() * C::imag_unit() * C::from_int(sgn)
}

/// Canonical monomial and coefficient of the basis (2,2)-form for component `(k, j)`.
fn form22_basis<C: Coefficient>(k: usize, j: usize) -> (Monomial, C) {
    let mono = form22_basis_monomial::<C>(k, j);
    let (m, c) = mono
        .terms()
        .next()
        .map(|(m, c)| (*m, c.clone()))
        .expect("basis monomial is nonzero");
    (m, c * form22_prefactor::<C>(k, j))
}

pub fn from_form22<C: Coefficient>(psi: &Mat3<C>) -> MultiVector<C> {
    let mut out = MultiVector::zero();
    for (k, row) in psi.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let (m, c) = form22_basis::<C>(k, j);
            out.add_term(m, c * v.clone());
        }
    }
    out
}

pub fn to_form22<C: Coefficient>(m: &MultiVector<C>) -> Result<Mat3<C>> {
    if !m.is_pure(2, 2) {
        return Err(AnomalyError::Bidegree { p: 2, q: 2 });
    }
    let mut out: Mat3<C> = std::array::from_fn(|_| std::array::from_fn(|_| C::zero()));
    for (k, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (mono, c) = form22_basis::<C>(k, j);
            *v = m.coefficient(mono).div(&c);
        }
    }
    Ok(out)
}

/// Coefficient of `m` on `∏_ℓ i dz^ℓ ∧ dz̄^ℓ`; zero if `m` has no top-degree term.
pub fn top_coefficient<C: Coefficient>(m: &MultiVector<C>) -> C {
    let mut top = MultiVector::scalar(C::one());
    for l in 0..DIM {
        let pair = MultiVector::dz(l).wedge(&MultiVector::dzbar(l)).scale(&C::imag_unit());
        top = top.wedge(&pair);
    }
    let unit = top.coefficient(Monomial::TOP);
    m.coefficient(Monomial::TOP).div(&unit)
}

/// `Σ_j ξ_j dz^j`.
pub fn form10<C: Coefficient>(xi: &[C; DIM]) -> MultiVector<C> {
    let mut out = MultiVector::zero();
    for (j, v) in xi.iter().enumerate() {
        out.add_term(Monomial { holo: 1 << j, anti: 0 }, v.clone());
    }
    out
}

/// Convert a double-precision matrix into the array form used by the oracle.
pub fn mat3_from_fn<C, F: FnMut(usize, usize) -> C>(mut f: F) -> Mat3<C> {
    std::array::from_fn(|r| std::array::from_fn(|c| f(r, c)))
}
