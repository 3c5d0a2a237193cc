//! Complex polynomials and a simultaneous-iteration root finder.
//!
//! Coefficients are kept in ascending order and normalized so the largest
//! modulus is 1; the factor taken out is remembered in `scale`. Arithmetic
//! works on the true values, so normalization never changes meaning.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_distance, P1Point};

/// Default chordal tolerance for merging roots into one multiple root.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Residual bound, relative to `scale`, accepted from the root finder.
pub const RESIDUAL_TOL: f64 = 1e-8;

const MAX_ITERATIONS: usize = 800;

/// Groups within this chordal radius are tested for being a numerically
/// multiple root even when they exceed the cluster tolerance.
const MULTIPLE_ROOT_PROBE: f64 = 1e-3;

const EPS: f64 = f64::EPSILON;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPoly {
    coeffs: Vec<Complex64>,
    scale: f64,
}

impl ComplexPoly {
    /// Builds from ascending coefficients; trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            for c in &mut coeffs {
                *c /= scale;
            }
        }
        ComplexPoly { coeffs, scale }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        ComplexPoly {
            coeffs: Vec::new(),
            scale: 0.0,
        }
    }

    pub fn one() -> Self {
        Self::new(vec![ONE])
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![ZERO; k + 1];
        c[k] = ONE;
        Self::new(c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Normalized coefficients (max modulus 1).
    pub fn normalized(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// True coefficient of `z^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).map_or(ZERO, |c| c * self.scale)
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c * self.scale).collect()
    }

    /// Number of exactly vanishing low-order coefficients.
    pub fn valuation(&self) -> usize {
        self.coeffs.iter().take_while(|c| **c == ZERO).count()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coeffs, z) * self.scale
    }

    /// Horner value and first derivative.
    pub fn eval_derive(&self, z: Complex64) -> (Complex64, Complex64) {
        let (v, d) = horner_derive(&self.coeffs, z);
        (v * self.scale, d * self.scale)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * self.scale * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &ComplexPoly) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let s = self.scale * other.scale;
        Self::new(out.into_iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &ComplexPoly) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &ComplexPoly) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(
            self.coefficients()
                .into_iter()
                .map(|c| c * factor)
                .collect(),
        )
    }

    /// Multiplies by `z^k`.
    pub fn shifted(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![ZERO; k];
        c.extend(self.coefficients());
        Self::new(c)
    }

    /// `self^k`.
    pub fn pow(&self, k: usize) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Quotient of division by `(z - root)`, discarding the remainder.
    pub fn deflate(&self, root: Complex64) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let n = self.coeffs.len() - 1;
        let mut q = vec![ZERO; n];
        let mut acc = ZERO;
        for k in (1..=n).rev() {
            acc = acc * root + self.coeffs[k];
            q[k - 1] = acc;
        }
        Self::new(q.into_iter().map(|c| c * self.scale).collect())
    }

    /// Drops the lowest `k` coefficients (division by `z^k` when they vanish).
    pub fn unshifted(&self, k: usize) -> Self {
        Self::new(self.coefficients().into_iter().skip(k).collect())
    }

    /// Coefficients of the homogeneous form of degree `hdeg` read in the chart
    /// around infinity: `sum c_k u^(hdeg - k)`.
    pub fn reversed(&self, hdeg: usize) -> Self {
        let mut c = vec![ZERO; hdeg + 1];
        for (k, v) in self.coefficients().into_iter().enumerate() {
            c[hdeg - k] = v;
        }
        Self::new(c)
    }

    pub fn max_abs_diff(&self, other: &ComplexPoly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Finite roots with multiplicities; the polynomial must have degree >= 1.
    pub fn roots(&self, cluster_tol: f64) -> Result<RootSet> {
        if self.is_zero() || self.degree() == 0 {
            return Err(Error::ConstantPolynomial);
        }
        homogeneous_roots(self, self.degree(), cluster_tol)
    }
}

impl Serialize for ComplexPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = if self.is_zero() {
            vec![[0.0, 0.0]]
        } else {
            self.coefficients()
                .into_iter()
                .map(|c| [c.re, c.im])
                .collect()
        };
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        if pairs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("coefficients must be finite"));
        }
        Ok(ComplexPoly::new(
            pairs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        ))
    }
}

/// One root with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub point: P1Point,
    pub multiplicity: usize,
}

/// Roots of a polynomial or homogeneous form.
#[derive(Clone, Debug)]
pub struct RootSet {
    pub roots: Vec<Root>,
    /// Max of `|p(r)| / max(1, |r|)^n` over finite roots, `n` the degree.
    pub residual: f64,
    pub degree: usize,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(ZERO, |acc, &a| acc * z + a)
}

fn horner_derive(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = ZERO;
    let mut d = ZERO;
    for &a in c.iter().rev() {
        d = d * z + v;
        v = v * z + a;
    }
    (v, d)
}

/// Value, derivative and the running bound `sum |a_k| |z|^k` for rounding
/// error estimates.
fn horner_with_bound(c: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64) {
    let r = z.norm();
    let mut v = ZERO;
    let mut d = ZERO;
    let mut b = 0.0;
    for &a in c.iter().rev() {
        d = d * z + v;
        v = v * z + a;
        b = b * r + a.norm();
    }
    (v, d, b)
}

/// Newton correction `p(z)/p'(z)`, evaluated in the reversed chart when
/// `|z| > 1`, and the relative size of `|p(z)|` against its rounding bound.
fn newton_step(c: &[Complex64], rev: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let n = (c.len() - 1) as f64;
    if z.norm() <= 1.0 {
        let (v, d, b) = horner_with_bound(c, z);
        (v / d, v.norm() / b.max(f64::MIN_POSITIVE))
    } else {
        let u = z.inv();
        let (v, d, b) = horner_with_bound(rev, u);
        (z * v / (v * n - u * d), v.norm() / b.max(f64::MIN_POSITIVE))
    }
}

/// Homogeneous residual `|p(z)| / max(1, |z|)^n` on normalized coefficients.
fn homogeneous_residual(c: &[Complex64], rev: &[Complex64], z: Complex64) -> f64 {
    if z.norm() <= 1.0 {
        horner(c, z).norm()
    } else {
        horner(rev, z.inv()).norm()
    }
}

/// Initial approximations from the upper convex hull of `(k, ln|a_k|)`:
/// each hull edge contributes as many points as its width on a circle whose
/// radius matches the root moduli implied by that edge.
fn initial_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != ZERO)
        .map(|(k, a)| (k, a.norm().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross =
                (b.0 as f64 - a.0 as f64) * (p.1 - a.1) - (b.1 - a.1) * (p.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut guesses = Vec::with_capacity(n);
    let sigma = 0.7;
    for w in hull.windows(2) {
        let (i, li) = w[0];
        let (j, lj) = w[1];
        let width = j - i;
        let radius = ((li - lj) / width as f64).exp();
        for m in 0..width {
            let theta =
                std::f64::consts::TAU * (m as f64 / width as f64 + i as f64 / n as f64) + sigma;
            guesses.push(Complex64::from_polar(radius, theta));
        }
    }
    guesses
}

/// Runs Aberth-Ehrlich iteration on a polynomial with nonzero constant and
/// leading coefficients. Returns the approximations and whether every one of
/// them met the stopping rule.
fn aberth(c: &[Complex64]) -> (Vec<Complex64>, bool) {
    let n = c.len() - 1;
    let rev: Vec<Complex64> = c.iter().rev().copied().collect();
    let mut z = initial_guesses(c);
    if n == 1 {
        return (vec![-c[0] / c[1]], true);
    }
    let mut done = vec![false; n];
    let mut all_done = false;
    for _ in 0..MAX_ITERATIONS {
        all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (ratio, rel) = newton_step(c, &rev, z[i]);
            if rel <= 4.0 * n as f64 * EPS || !ratio.re.is_finite() || !ratio.im.is_finite() {
                done[i] = true;
                continue;
            }
            let mut s = ZERO;
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff != ZERO {
                        s += diff.inv();
                    }
                }
            }
            let corr = ratio / (ONE - ratio * s);
            if corr.re.is_finite() && corr.im.is_finite() {
                z[i] -= corr;
                if corr.norm() <= 2.0 * EPS * z[i].norm() {
                    done[i] = true;
                }
            } else {
                done[i] = true;
            }
            all_done &= done[i];
        }
        if all_done {
            break;
        }
    }
    (z, all_done)
}

/// Union-find over approximations merged when `linked(i, j)` holds.
fn components(n: usize, linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let next = p[k];
            p[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if linked(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn lift(z: Complex64) -> P1Point {
    P1Point::from_homogeneous(z, ONE).unwrap_or(P1Point::INFINITY)
}

/// Taylor coefficients of `p` at `c` up to order `m - 1`, with rounding bounds
/// for each (computed from `|a_k|` and `|c|`).
fn taylor_head(coeffs: &[Complex64], c: Complex64, m: usize) -> Vec<(Complex64, f64)> {
    let mut work: Vec<Complex64> = coeffs.to_vec();
    let mut bound: Vec<f64> = coeffs.iter().map(|a| a.norm()).collect();
    let r = c.norm();
    let n = work.len() - 1;
    let mut out = Vec::with_capacity(m);
    // Repeated synthetic division: after pass k, work[k] is the k-th Taylor
    // coefficient.
    for k in 0..m.min(n + 1) {
        for i in (k..n).rev() {
            work[i] = work[i] + c * work[i + 1];
            bound[i] += r * bound[i + 1];
        }
        out.push((work[k], bound[k]));
    }
    out
}

/// Decides whether approximations scattered around `centroid` are a
/// perturbed `m`-fold root: the scatter radius must be explained by rounding,
/// i.e. `rho^m |t_m|` stays within the evaluation error bound of `p(centroid)`.
fn is_numerical_multiple_root(
    coeffs: &[Complex64],
    members: &[Complex64],
    centroid: Complex64,
) -> bool {
    let n = coeffs.len() - 1;
    let m = members.len();
    if m > n {
        return false;
    }
    let (chart, center, pts): (Vec<Complex64>, Complex64, Vec<Complex64>) =
        if centroid.norm() <= 1.0 {
            (coeffs.to_vec(), centroid, members.to_vec())
        } else {
            (
                coeffs.iter().rev().copied().collect(),
                centroid.inv(),
                members.iter().map(|z| z.inv()).collect(),
            )
        };
    let rho = pts.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    let head = taylor_head(&chart, center, m + 1);
    let (_, b0) = head[0];
    let (tm, _) = head[m];
    rho.powi(m as i32) * tm.norm() <= 16.0 * n as f64 * EPS * b0
}

fn polish(c: &[Complex64], rev: &[Complex64], z: Complex64) -> Complex64 {
    let mut best = z;
    let mut best_res = homogeneous_residual(c, rev, z);
    let mut cur = z;
    for _ in 0..3 {
        let (ratio, _) = newton_step(c, rev, cur);
        let next = cur - ratio;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        let res = homogeneous_residual(c, rev, next);
        if res < best_res {
            best = next;
            best_res = res;
        }
        cur = next;
    }
    best
}

/// Roots of the homogeneous form of degree `hdeg` whose affine
/// dehomogenization is `p`. Roots at infinity carry multiplicity
/// `hdeg - deg(p)`; exactly vanishing low-order coefficients give an exact
/// root at 0.
pub fn homogeneous_roots(p: &ComplexPoly, hdeg: usize, cluster_tol: f64) -> Result<RootSet> {
    if p.is_zero() {
        return Err(Error::InvalidArgument(
            "zero form has no isolated roots".into(),
        ));
    }
    if p.degree() > hdeg {
        return Err(Error::InvalidArgument(format!(
            "affine degree {} exceeds homogeneous degree {hdeg}",
            p.degree()
        )));
    }
    let at_infinity = hdeg - p.degree();
    let at_zero = p.valuation();
    let core: Vec<Complex64> = p.normalized()[at_zero..].to_vec();
    let core_deg = core.len() - 1;

    let mut roots: Vec<Root> = Vec::new();
    let mut residual: f64 = 0.0;
    let mut converged = true;
    if core_deg > 0 {
        let (approx, ok) = aberth(&core);
        converged = ok;
        let rev: Vec<Complex64> = core.iter().rev().copied().collect();
        let approx: Vec<Complex64> = approx.into_iter().map(|z| polish(&core, &rev, z)).collect();
        let lifted: Vec<P1Point> = approx.iter().map(|&z| lift(z)).collect();

        let tight = components(core_deg, |i, j| {
            chordal_distance(&lifted[i], &lifted[j]) <= cluster_tol
        });
        let tight_members = &tight;
        let mut centers: Vec<(Complex64, usize)> = tight
            .iter()
            .map(|g| {
                (
                    g.iter().map(|&i| approx[i]).sum::<Complex64>() / g.len() as f64,
                    g.len(),
                )
            })
            .collect();

        // Wider groups that pass the Taylor test are one multiple root.
        let lifted_centers: Vec<P1Point> = centers.iter().map(|c| lift(c.0)).collect();
        let loose = components(centers.len(), |i, j| {
            chordal_distance(&lifted_centers[i], &lifted_centers[j]) <= MULTIPLE_ROOT_PROBE
        });
        let mut merged = Vec::with_capacity(centers.len());
        for g in loose {
            if g.len() == 1 {
                merged.push(centers[g[0]]);
                continue;
            }
            let m: usize = g.iter().map(|&i| centers[i].1).sum();
            let centroid = g
                .iter()
                .map(|&i| centers[i].0 * centers[i].1 as f64)
                .sum::<Complex64>()
                / m as f64;
            let members: Vec<Complex64> = g
                .iter()
                .flat_map(|&i| tight_members[i].iter().map(|&k| approx[k]))
                .collect();
            if is_numerical_multiple_root(&core, &members, centroid) {
                merged.push((centroid, m));
            } else {
                merged.extend(g.iter().map(|&i| centers[i]));
            }
        }
        centers = merged;

        for (z, m) in centers {
            residual = residual.max(homogeneous_residual(&core, &rev, z));
            roots.push(Root {
                point: lift(z),
                multiplicity: m,
            });
        }
    }
    if at_zero > 0 {
        roots.push(Root {
            point: P1Point::ZERO,
            multiplicity: at_zero,
        });
    }
    if at_infinity > 0 {
        roots.push(Root {
            point: P1Point::INFINITY,
            multiplicity: at_infinity,
        });
    }
    // Huge finite approximations may coincide chordally with exact roots at
    // infinity or zero.
    let roots = merge_root_list(roots, cluster_tol);
    if !converged && residual > RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        });
    }
    Ok(RootSet {
        roots,
        residual: residual * p.scale(),
        degree: hdeg,
    })
}

fn merge_root_list(roots: Vec<Root>, tol: f64) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match out
            .iter_mut()
            .find(|o| chordal_distance(&o.point, &r.point) <= tol)
        {
            Some(o) => {
                // Keep the exact representative when one side is 0 or infinity.
                if r.point == P1Point::ZERO || r.point == P1Point::INFINITY {
                    o.point = r.point;
                }
                o.multiplicity += r.multiplicity;
            }
            None => out.push(r),
        }
    }
    out
}
