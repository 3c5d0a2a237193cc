//! Rational self-maps of the sphere in homogeneous form.
//!
//! A map of degree `d` is a pair `(P, Q)` of degree-`d` binary forms, stored
//! through their affine parts `num(z) = P(z, 1)` and `den(z) = Q(z, 1)`. The
//! homogeneous degree is kept explicitly, so a drop in affine degree encodes a
//! zero or pole at infinity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{homogeneous_roots, ComplexPoly, DEFAULT_CLUSTER_TOL};
use crate::sphere::{chordal_distance, dedup_points, P1Point, Rotation};

/// Chordal tolerance for detecting a root shared by numerator and denominator.
pub const COMMON_ROOT_TOL: f64 = 1e-7;

/// Guard band above 1 for classifying a multiplier as repelling.
pub const REPELLING_GUARD: f64 = 1e-9;

/// Default cap on the degree of symbolically composed maps.
pub const DEFAULT_DEGREE_CAP: usize = 512;

/// Above this degree, compositions skip the shared-root scan. The resultant
/// of a composition of reduced maps is a product of nonzero resultants, so the
/// scan can only find numerical noise there.
const REDUCE_SCAN_MAX_DEGREE: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct RationalMap {
    num: ComplexPoly,
    den: ComplexPoly,
    degree: usize,
    num_rev: ComplexPoly,
    den_rev: ComplexPoly,
}

/// A fixed point with multiplicity and spherical multiplier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub point: P1Point,
    pub multiplicity: usize,
    pub multiplier: f64,
}

impl FixedPoint {
    pub fn is_repelling(&self) -> bool {
        self.multiplier > 1.0 + REPELLING_GUARD
    }
}

/// Homogeneous values of `P`, `Q` and their partials at a normalized point.
struct Jet {
    p: Complex64,
    q: Complex64,
    pz: Complex64,
    pw: Complex64,
    qz: Complex64,
    qw: Complex64,
}

impl RationalMap {
    /// Builds `num / den`, removing common factors.
    pub fn new(num: ComplexPoly, den: ComplexPoly) -> Result<Self> {
        let degree = num.degree().max(den.degree());
        Self::build(num, den, degree, true)
    }

    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(ComplexPoly::from_real(num), ComplexPoly::from_real(den))
    }

    /// `z^d`.
    pub fn power(d: usize) -> Self {
        Self::new(ComplexPoly::monomial(d), ComplexPoly::one()).expect("power map is valid")
    }

    pub fn identity() -> Self {
        Self::power(1)
    }

    /// The Möbius map of the matrix `[[a, b], [c, d]]`.
    pub fn mobius(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = m;
        if (a * d - b * c).norm() == 0.0 {
            return Err(Error::ConstantMap);
        }
        Self::build(
            ComplexPoly::new(vec![b, a]),
            ComplexPoly::new(vec![d, c]),
            1,
            false,
        )
    }

    fn build(num: ComplexPoly, den: ComplexPoly, degree: usize, scan: bool) -> Result<Self> {
        if num.is_zero() || den.is_zero() {
            return Err(Error::ConstantMap);
        }
        let (num, den, degree) = if scan {
            reduce(num, den, degree)?
        } else {
            (num, den, degree)
        };
        if degree == 0 {
            return Err(Error::ConstantMap);
        }
        let num_rev = num.reversed(degree);
        let den_rev = den.reversed(degree);
        Ok(RationalMap {
            num,
            den,
            degree,
            num_rev,
            den_rev,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num(&self) -> &ComplexPoly {
        &self.num
    }

    pub fn den(&self) -> &ComplexPoly {
        &self.den
    }

    fn jet(&self, x: &P1Point) -> Jet {
        let d = self.degree as f64;
        if x.in_unit_chart() {
            let z = x.h0();
            let (p, pz) = self.num.eval_derive(z);
            let (q, qz) = self.den.eval_derive(z);
            Jet {
                p,
                q,
                pz,
                pw: p * d - z * pz,
                qz,
                qw: q * d - z * qz,
            }
        } else {
            let u = x.h1();
            let (p, pw) = self.num_rev.eval_derive(u);
            let (q, qw) = self.den_rev.eval_derive(u);
            Jet {
                p,
                q,
                pz: p * d - u * pw,
                pw,
                qz: q * d - u * qw,
                qw,
            }
        }
    }

    /// `[P(x) : Q(x)]`; fails only for an unreduced pair.
    pub fn evaluate(&self, x: &P1Point) -> Result<P1Point> {
        let j = self.jet(x);
        let size = j.p.norm() + j.q.norm();
        if size <= 1e-13 * (self.num.scale() + self.den.scale()) {
            return Err(Error::Unreduced);
        }
        P1Point::from_homogeneous(j.p, j.q).ok_or(Error::Unreduced)
    }

    /// Derivative norm for the spherical metric, `|det DF| |x|^2 / (d |F(x)|^2)`
    /// in homogeneous coordinates. Equals `|g'(z)| (1+|z|^2) / (1+|g(z)|^2)`
    /// in any affine chart and needs no chart change at poles or infinity.
    pub fn spherical_multiplier(&self, x: &P1Point) -> f64 {
        let j = self.jet(x);
        let det = j.pz * j.qw - j.pw * j.qz;
        let xn = x.h0().norm_sqr() + x.h1().norm_sqr();
        let fn2 = j.p.norm_sqr() + j.q.norm_sqr();
        det.norm() * xn / (self.degree as f64 * fn2)
    }

    /// Affine derivative `g'(z)`; `None` at a pole.
    pub fn affine_derivative(&self, z: Complex64) -> Option<Complex64> {
        let (p, pz) = self.num.eval_derive(z);
        let (q, qz) = self.den.eval_derive(z);
        if q.norm() <= 1e-14 * self.den.scale() {
            return None;
        }
        Some((pz * q - p * qz) / (q * q))
    }

    /// `self ∘ inner`, with the default degree cap.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap> {
        self.compose_capped(inner, DEFAULT_DEGREE_CAP)
    }

    pub fn compose_capped(&self, inner: &RationalMap, degree_cap: usize) -> Result<RationalMap> {
        let degree = self
            .degree
            .checked_mul(inner.degree)
            .filter(|&d| d <= degree_cap)
            .ok_or(Error::CapExceeded {
                what: "degree",
                requested: self.degree as u128 * inner.degree as u128,
                cap: degree_cap as u128,
            })?;
        let d = self.degree;
        // num_pows[k] = inner.num^k, den_pows[k] = inner.den^k
        let mut num_pows = vec![ComplexPoly::one()];
        let mut den_pows = vec![ComplexPoly::one()];
        for k in 1..=d {
            num_pows.push(num_pows[k - 1].mul(&inner.num));
            den_pows.push(den_pows[k - 1].mul(&inner.den));
        }
        let mut num = ComplexPoly::zero();
        let mut den = ComplexPoly::zero();
        for k in 0..=d {
            let term = num_pows[k].mul(&den_pows[d - k]);
            let (a, b) = (self.num.coeff(k), self.den.coeff(k));
            if a != ZERO {
                num = num.add(&term.scaled(a));
            }
            if b != ZERO {
                den = den.add(&term.scaled(b));
            }
        }
        Self::build(num, den, degree, degree <= REDUCE_SCAN_MAX_DEGREE)
    }

    /// `R ∘ self ∘ R^{-1}`.
    pub fn conjugate(&self, r: &Rotation) -> Result<RationalMap> {
        let outer = RationalMap::mobius(r.matrix())?;
        let inner = RationalMap::mobius(r.inverse().matrix())?;
        outer.compose_capped(&self.compose_capped(&inner, usize::MAX)?, usize::MAX)
    }

    /// Preimages of `q = [a : b]`: the roots of `b P - a Q`, `deg` of them
    /// counted with multiplicity.
    pub fn preimages(&self, q: &P1Point) -> Result<Vec<(P1Point, usize)>> {
        let form = self.num.scaled(q.h1()).sub(&self.den.scaled(q.h0()));
        let rs = homogeneous_roots(&form, self.degree, DEFAULT_CLUSTER_TOL)?;
        Ok(rs
            .roots
            .into_iter()
            .map(|r| (r.point, r.multiplicity))
            .collect())
    }

    /// Fixed points: roots of `w P - z Q`, `deg + 1` with multiplicity.
    pub fn fixed_points(&self) -> Result<Vec<FixedPoint>> {
        let form = self.num.sub(&self.den.shifted(1));
        if form.is_zero() {
            return Err(Error::IdentityMap);
        }
        let rs = homogeneous_roots(&form, self.degree + 1, DEFAULT_CLUSTER_TOL)?;
        Ok(rs
            .roots
            .into_iter()
            .map(|r| {
                let multiplier = self.spherical_multiplier(&r.point);
                debug_assert!(
                    r.point.affine().is_none_or(|z| z.norm() > 1e3
                        || self.affine_derivative(z).is_none_or(
                            |g| (g.norm() - multiplier).abs() <= 1e-6 * (1.0 + multiplier)
                        )),
                    "spherical and affine multipliers disagree at a fixed point"
                );
                FixedPoint {
                    point: r.point,
                    multiplicity: r.multiplicity,
                    multiplier,
                }
            })
            .collect())
    }

    /// Critical points: roots of the Jacobian form, `2d - 2` with multiplicity.
    pub fn critical_points(&self) -> Result<Vec<(P1Point, usize)>> {
        if self.degree == 1 {
            return Ok(Vec::new());
        }
        let (dn, dd) = (self.num.derivative(), self.den.derivative());
        let form = dn.mul(&self.den).sub(&self.num.mul(&dd));
        let rs = homogeneous_roots(&form, 2 * self.degree - 2, DEFAULT_CLUSTER_TOL)?;
        Ok(rs
            .roots
            .into_iter()
            .map(|r| (r.point, r.multiplicity))
            .collect())
    }

    pub fn critical_values(&self) -> Result<Vec<P1Point>> {
        let values = self
            .critical_points()?
            .iter()
            .map(|(p, _)| self.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(dedup_points(&values, DEFAULT_CLUSTER_TOL))
    }

    /// Same map up to `tol`, by cross-multiplication `num_f den_g - num_g den_f`.
    pub fn approx_eq(&self, other: &RationalMap, tol: f64) -> bool {
        if self.degree != other.degree {
            return false;
        }
        let a = self.num.mul(&other.den);
        let b = other.num.mul(&self.den);
        let size = (self.num.scale() * other.den.scale()).max(other.num.scale() * self.den.scale());
        a.max_abs_diff(&b) <= tol * size
    }
}

/// Cancels common factors of `num` and `den` as binary forms of degree `degree`.
fn reduce(
    mut num: ComplexPoly,
    mut den: ComplexPoly,
    mut degree: usize,
) -> Result<(ComplexPoly, ComplexPoly, usize)> {
    // Common root at infinity.
    let at_inf = (degree - num.degree()).min(degree - den.degree());
    degree -= at_inf;
    // Common root at zero.
    let at_zero = num.valuation().min(den.valuation());
    if at_zero > 0 {
        num = num.unshifted(at_zero);
        den = den.unshifted(at_zero);
        degree -= at_zero;
    }
    if num.degree() == 0 || den.degree() == 0 {
        return Ok((num, den, degree));
    }
    let rn = homogeneous_roots(&num, num.degree(), DEFAULT_CLUSTER_TOL)?;
    let rd = homogeneous_roots(&den, den.degree(), DEFAULT_CLUSTER_TOL)?;
    let mut den_roots: Vec<(P1Point, usize)> =
        rd.roots.iter().map(|r| (r.point, r.multiplicity)).collect();
    for r in &rn.roots {
        let Some(slot) = den_roots
            .iter_mut()
            .find(|(p, m)| *m > 0 && chordal_distance(p, &r.point) <= COMMON_ROOT_TOL)
        else {
            continue;
        };
        let shared = slot.1.min(r.multiplicity);
        slot.1 -= shared;
        // Both points are finite here: exact zeros and infinity were removed.
        let z = r.point.affine().unwrap_or(ZERO);
        for _ in 0..shared {
            num = num.deflate(z);
            den = den.deflate(z);
            degree -= 1;
        }
    }
    Ok((num, den, degree))
}

#[derive(Serialize, Deserialize)]
struct MapRecord {
    num: ComplexPoly,
    #[serde(default = "unit_den")]
    den: ComplexPoly,
}

fn unit_den() -> ComplexPoly {
    ComplexPoly::one()
}

impl Serialize for RationalMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapRecord {
            num: self.num.clone(),
            den: self.den.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MapRecord::deserialize(d)?;
        RationalMap::new(r.num, r.den).map_err(serde::de::Error::custom)
    }
}

/// Unit complex number helper for tests and callers.
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

impl Default for RationalMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl PartialEq for RationalMap {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, 1e-12)
    }
}
