//! Riemann-sphere geometry in homogeneous coordinates.
//!
//! Points are stored as `[h0 : h1]` with the larger-modulus coordinate equal to
//! exactly `1`, so the affine value `h0 / h1` is read off directly when
//! `|z| <= 1` and its reciprocal otherwise. The chordal metric is scaled so
//! that antipodal points are at distance 1.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance under which two points are considered the same projective point.
pub const POINT_EQ_TOL: f64 = 1e-9;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct P1Point {
    h0: Complex64,
    h1: Complex64,
}

impl P1Point {
    pub const INFINITY: P1Point = P1Point { h0: ONE, h1: ZERO };
    pub const ZERO: P1Point = P1Point { h0: ZERO, h1: ONE };

    /// Builds `[h0 : h1]`. Returns `None` when both coordinates vanish or
    /// either is not finite.
    pub fn from_homogeneous(h0: Complex64, h1: Complex64) -> Option<Self> {
        if !(h0.re.is_finite() && h0.im.is_finite() && h1.re.is_finite() && h1.im.is_finite()) {
            return None;
        }
        let (m0, m1) = (h0.norm(), h1.norm());
        if m0 == 0.0 && m1 == 0.0 {
            return None;
        }
        Some(if m0 > m1 {
            P1Point {
                h0: ONE,
                h1: h1 / h0,
            }
        } else {
            P1Point {
                h0: h0 / h1,
                h1: ONE,
            }
        })
    }

    /// The affine point `z`.
    pub fn finite(z: Complex64) -> Self {
        Self::from_homogeneous(z, ONE).expect("finite affine coordinate")
    }

    pub fn from_re_im(re: f64, im: f64) -> Self {
        Self::finite(Complex64::new(re, im))
    }

    /// Unit-circle point `e^{i theta}`.
    pub fn on_circle(theta: f64) -> Self {
        Self::finite(Complex64::from_polar(1.0, theta))
    }

    pub fn h0(&self) -> Complex64 {
        self.h0
    }

    pub fn h1(&self) -> Complex64 {
        self.h1
    }

    /// True when the stored representative is `[h0 : 1]`, i.e. `|z| <= 1`.
    pub fn in_unit_chart(&self) -> bool {
        self.h1 == ONE
    }

    pub fn is_infinity(&self) -> bool {
        self.h1 == ZERO
    }

    /// Affine value, or `None` at infinity.
    pub fn affine(&self) -> Option<Complex64> {
        if self.is_infinity() {
            None
        } else if self.in_unit_chart() {
            Some(self.h0)
        } else {
            Some(self.h0 / self.h1)
        }
    }

    /// `(is_infinity, value)`; the value is zero at infinity.
    pub fn project_affine(&self) -> (bool, Complex64) {
        match self.affine() {
            Some(z) => (false, z),
            None => (true, ZERO),
        }
    }

    /// Coordinates on the unit sphere in R^3 under inverse stereographic
    /// projection (infinity is the north pole).
    pub fn to_unit_sphere(&self) -> [f64; 3] {
        let n = self.h0.norm_sqr() + self.h1.norm_sqr();
        let cross = self.h0 * self.h1.conj();
        [
            2.0 * cross.re / n,
            2.0 * cross.im / n,
            (self.h0.norm_sqr() - self.h1.norm_sqr()) / n,
        ]
    }

    pub fn from_unit_sphere(v: [f64; 3]) -> Self {
        let [x, y, z] = v;
        // [x + iy : 1 - z] and [1 + z : x - iy] are the two charts.
        if z <= 0.0 {
            Self::from_homogeneous(Complex64::new(x, y), Complex64::new(1.0 - z, 0.0))
        } else {
            Self::from_homogeneous(Complex64::new(1.0 + z, 0.0), Complex64::new(x, -y))
        }
        .unwrap_or(P1Point::ZERO)
    }

    pub fn chordal_distance(&self, other: &P1Point) -> f64 {
        chordal_distance(self, other)
    }

    pub fn approx_eq(&self, other: &P1Point, tol: f64) -> bool {
        chordal_distance(self, other) <= tol
    }
}

/// Chordal distance scaled to `[0, 1]`.
pub fn chordal_distance(p: &P1Point, q: &P1Point) -> f64 {
    let num = (p.h0 * q.h1 - p.h1 * q.h0).norm();
    let den =
        (p.h0.norm_sqr() + p.h1.norm_sqr()).sqrt() * (q.h0.norm_sqr() + q.h1.norm_sqr()).sqrt();
    (num / den).min(1.0)
}

/// Max pairwise chordal distance.
pub fn diameter(points: &[P1Point]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(chordal_distance(p, q));
        }
    }
    Ok(best)
}

/// Deterministic point, approximately uniform for spherical area.
pub fn random_point(seed: u64) -> P1Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_point_with(&mut rng)
}

/// Uniform point drawn from `rng`: a ratio of two independent standard complex
/// Gaussians is distributed according to the spherical area measure.
pub fn random_point_with<R: rand::Rng + ?Sized>(rng: &mut R) -> P1Point {
    loop {
        let mut g = || -> f64 { StandardNormal.sample(rng) };
        let h0 = Complex64::new(g(), g());
        let h1 = Complex64::new(g(), g());
        if let Some(p) = P1Point::from_homogeneous(h0, h1) {
            return p;
        }
    }
}

/// A rigid rotation of the sphere, acting on homogeneous coordinates by the
/// unitary matrix `[[a, -conj(b)], [b, conj(a)]]` with `|a|^2 + |b|^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    a: Complex64,
    b: Complex64,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { a: ONE, b: ZERO }
    }

    pub fn new(a: Complex64, b: Complex64) -> Self {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Rotation { a: a / n, b: b / n }
    }

    /// `z -> e^{i theta} z`.
    pub fn about_vertical_axis(theta: f64) -> Self {
        Rotation {
            a: Complex64::from_polar(1.0, theta / 2.0),
            b: ZERO,
        }
    }

    /// The rotation sending `p` to infinity.
    pub fn sending_to_infinity(p: &P1Point) -> Self {
        let n = (p.h0.norm_sqr() + p.h1.norm_sqr()).sqrt();
        let (u, v) = (p.h0 / n, p.h1 / n);
        // Rows (conj u, conj v) and (-v, u).
        Rotation { a: u.conj(), b: -v }
    }

    /// The rotation sending `p` to zero.
    pub fn sending_to_zero(p: &P1Point) -> Self {
        // z -> -1/z swaps 0 and infinity.
        let swap = Rotation { a: ZERO, b: -ONE };
        swap.then_after(&Rotation::sending_to_infinity(p))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn then_after(&self, first: &Rotation) -> Self {
        let m = self.matrix();
        let f = first.matrix();
        // First column of the product determines (a, b).
        let a = m[0][0] * f[0][0] + m[0][1] * f[1][0];
        let b = m[1][0] * f[0][0] + m[1][1] * f[1][0];
        Rotation::new(a, b)
    }

    /// The 2x2 matrix `[[m00, m01], [m10, m11]]`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.a, -self.b.conj()], [self.b, self.a.conj()]]
    }

    pub fn inverse(&self) -> Self {
        Rotation {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn apply(&self, p: &P1Point) -> P1Point {
        let [[m00, m01], [m10, m11]] = self.matrix();
        P1Point::from_homogeneous(m00 * p.h0 + m01 * p.h1, m10 * p.h0 + m11 * p.h1)
            .expect("unitary image of a valid point")
    }
}

/// Groups points lying within `tol` (chordal) of an earlier representative.
///
/// Returns, for each input point, the index of its representative among the
/// first occurrences. Representatives are chosen in input order, so the result
/// is deterministic.
pub fn cluster_representatives(points: &[P1Point], tol: f64) -> Vec<usize> {
    // Chordal distance is half the Euclidean distance on the unit sphere.
    let cell = (2.0 * tol).max(1e-15);
    let key = |v: [f64; 3]| {
        [
            (v[0] / cell).floor() as i64,
            (v[1] / cell).floor() as i64,
            (v[2] / cell).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut rep = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let k = key(p.to_unit_sphere());
        let mut found: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if chordal_distance(p, &points[j]) <= tol && found.is_none_or(|f| j < f) {
                            found = Some(j);
                        }
                    }
                }
            }
        }
        match found {
            Some(j) => rep.push(j),
            None => {
                grid.entry(k).or_default().push(i);
                rep.push(i);
            }
        }
    }
    rep
}

/// Deduplicates by chordal tolerance, keeping first occurrences.
pub fn dedup_points(points: &[P1Point], tol: f64) -> Vec<P1Point> {
    cluster_representatives(points, tol)
        .into_iter()
        .enumerate()
        .filter(|(i, r)| i == r)
        .map(|(i, _)| points[i])
        .collect()
}

/// Roughly uniform points on the sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<P1Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            P1Point::from_unit_sphere([r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PointRecord {
    re: f64,
    im: f64,
    inf: bool,
}

impl Serialize for P1Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (inf, z) = self.project_affine();
        PointRecord {
            re: z.re,
            im: z.im,
            inf,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for P1Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PointRecord::deserialize(d)?;
        if r.inf {
            return Ok(P1Point::INFINITY);
        }
        P1Point::from_homogeneous(Complex64::new(r.re, r.im), ONE)
            .ok_or_else(|| serde::de::Error::custom("point coordinates must be finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> P1Point {
        P1Point::from_re_im(re, im)
    }

    #[test]
    fn chordal_examples() {
        assert!((chordal_distance(&P1Point::ZERO, &P1Point::INFINITY) - 1.0).abs() < 1e-15);
        assert!((chordal_distance(&pt(1.0, 0.0), &pt(-1.0, 0.0)) - 1.0).abs() < 1e-15);
        let d = chordal_distance(&P1Point::ZERO, &pt(1.0, 0.0));
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn affine_projection() {
        let inf = P1Point::from_homogeneous(ONE, ZERO).unwrap();
        assert!(inf.project_affine().0);
        let two = P1Point::from_homogeneous(Complex64::new(2.0, 0.0), ONE).unwrap();
        assert_eq!(two.project_affine(), (false, Complex64::new(2.0, 0.0)));
        let six_three =
            P1Point::from_homogeneous(Complex64::new(6.0, 0.0), Complex64::new(3.0, 0.0)).unwrap();
        let (inf, z) = six_three.project_affine();
        assert!(!inf);
        assert!((z - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(P1Point::from_homogeneous(ZERO, ZERO).is_none());
    }

    #[test]
    fn diameter_examples() {
        assert!((diameter(&[P1Point::ZERO, P1Point::INFINITY]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(diameter(&[pt(0.3, 0.2)]).unwrap(), 0.0);
        let d = diameter(&[pt(1.0, 0.0), pt(-1.0, 0.0), pt(0.0, 1.0)]).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(matches!(diameter(&[]), Err(Error::EmptySet)));
    }

    #[test]
    fn random_point_determinism_and_balance() {
        assert_eq!(random_point(7), random_point(7));
        assert!(chordal_distance(&random_point(7), &random_point(8)) > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let inside = (0..10_000)
            .filter(|_| {
                random_point_with(&mut rng)
                    .affine()
                    .is_some_and(|z| z.norm() <= 1.0)
            })
            .count();
        let frac = inside as f64 / 10_000.0;
        assert!((frac - 0.5).abs() <= 0.02, "fraction {frac}");
    }

    #[test]
    fn rotation_to_infinity_and_back() {
        let p = pt(0.3, -1.7);
        let r = Rotation::sending_to_infinity(&p);
        assert!(r.apply(&p).approx_eq(&P1Point::INFINITY, 1e-12));
        let q = pt(-2.0, 0.5);
        assert!(r.inverse().apply(&r.apply(&q)).approx_eq(&q, 1e-12));
    }

    #[test]
    fn rotation_to_zero_and_composition() {
        let p = pt(-0.4, 2.2);
        let r = Rotation::sending_to_zero(&p);
        assert!(r.apply(&p).approx_eq(&P1Point::ZERO, 1e-12));
        let s = Rotation::about_vertical_axis(0.3);
        let q = pt(0.5, 0.5);
        assert!(s
            .then_after(&r)
            .apply(&q)
            .approx_eq(&s.apply(&r.apply(&q)), 1e-12));
        // Rotations preserve chordal distance.
        let d = chordal_distance(&p, &q);
        assert!((chordal_distance(&r.apply(&p), &r.apply(&q)) - d).abs() < 1e-12);
    }

    #[test]
    fn sphere_coordinates_round_trip() {
        for p in [
            P1Point::ZERO,
            P1Point::INFINITY,
            pt(3.0, -2.0),
            pt(0.1, 0.9),
        ] {
            assert!(P1Point::from_unit_sphere(p.to_unit_sphere()).approx_eq(&p, 1e-12));
        }
    }

    #[test]
    fn serde_json_shape() {
        let s = serde_json::to_string(&P1Point::INFINITY).unwrap();
        assert_eq!(s, r#"{"re":0.0,"im":0.0,"inf":true}"#);
        let p: P1Point = serde_json::from_str(r#"{"re":2.0,"im":-1.0,"inf":false}"#).unwrap();
        assert!(p.approx_eq(&pt(2.0, -1.0), 1e-15));
    }

    #[test]
    fn clustering_merges_close_points() {
        let a = pt(1.0, 0.0);
        let b = pt(1.0 + 1e-12, 0.0);
        let c = pt(-1.0, 0.0);
        assert_eq!(
            cluster_representatives(&[a, b, c, a], 1e-9),
            vec![0, 0, 2, 0]
        );
        assert_eq!(dedup_points(&[a, b, c], 1e-9).len(), 2);
    }

    fn arb_point() -> impl Strategy<Value = P1Point> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0)
            .prop_filter_map("nonzero", |(a, b, c, d)| {
                P1Point::from_homogeneous(Complex64::new(a, b), Complex64::new(c, d))
            })
    }

    proptest! {
        #[test]
        fn triangle_inequality(p in arb_point(), q in arb_point(), r in arb_point()) {
            prop_assert!(chordal_distance(&p, &r) <= chordal_distance(&p, &q) + chordal_distance(&q, &r) + 1e-12);
        }

        #[test]
        fn projective_scaling_invariance(a in -3.0f64..3.0, b in -3.0f64..3.0, lr in 0.1f64..10.0, lt in 0.0f64..std::f64::consts::TAU) {
            let h0 = Complex64::new(a, b);
            let h1 = Complex64::new(1.0, -0.5);
            let lam = Complex64::from_polar(lr, lt);
            let p = P1Point::from_homogeneous(h0, h1).unwrap();
            let q = P1Point::from_homogeneous(lam * h0, lam * h1).unwrap();
            let other = P1Point::from_re_im(0.4, 0.1);
            prop_assert!((chordal_distance(&p, &other) - chordal_distance(&q, &other)).abs() < 1e-12);
            prop_assert!(chordal_distance(&p, &q) < 1e-12);
        }

        #[test]
        fn two_point_diameter(p in arb_point(), q in arb_point()) {
            prop_assert_eq!(diameter(&[p, q]).unwrap(), chordal_distance(&p, &q));
        }

        #[test]
        fn chordal_matches_affine_formula(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let (z, w) = (Complex64::new(a, b), Complex64::new(c, d));
            let expect = (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt();
            prop_assert!((chordal_distance(&P1Point::finite(z), &P1Point::finite(w)) - expect).abs() < 1e-12);
        }
    }
}
