//! Atomic measures on the sphere: Dirac pullbacks, repelling-point measures,
//! binned comparison and the inverse-branch shrinkage probe.
//!
//! All randomized procedures derive one ChaCha stream per task from the
//! master seed (`set_stream(task index)`), so results do not depend on how
//! rayon schedules the tasks.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correspondence::{Chain, Word};
use crate::error::{Error, Result};
use crate::rational::{RationalMap, DEFAULT_DEGREE_CAP};
use crate::sphere::{
    chordal_distance, cluster_representatives, dedup_points, diameter, P1Point, Rotation,
    POINT_EQ_TOL,
};

/// Default cap on the number of atoms in an exact pullback level.
pub const DEFAULT_ATOM_CAP: usize = 5_000_000;

/// Grid resolution for the fall-back fixed-point solver.
pub const FALLBACK_GRID: usize = 200;

/// Frame points on the boundary of the probe disk.
const FRAME_POINTS: usize = 16;

/// Two candidate preimages closer than this (relative) are ambiguous.
const AMBIGUITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub point: P1Point,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    /// Builds from atoms; nonpositive weights are dropped.
    pub fn new(atoms: Vec<Atom>) -> Self {
        AtomicMeasure {
            atoms: atoms.into_iter().filter(|a| a.weight > 0.0).collect(),
        }
    }

    pub fn dirac(p: P1Point) -> Self {
        Self::new(vec![Atom {
            point: p,
            weight: 1.0,
        }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).fold(0.0, |s, w| s + w)
    }

    pub fn points(&self) -> Vec<P1Point> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    /// Merges atoms within `tol` of an earlier atom, summing weights.
    pub fn merged(&self, tol: f64) -> Self {
        let pts = self.points();
        let rep = cluster_representatives(&pts, tol);
        let mut slot = vec![usize::MAX; pts.len()];
        let mut out: Vec<Atom> = Vec::new();
        for (i, r) in rep.into_iter().enumerate() {
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Atom {
                    point: self.atoms[r].point,
                    weight: 0.0,
                });
            }
            out[slot[r]].weight += self.atoms[i].weight;
        }
        AtomicMeasure { atoms: out }
    }

    /// Mass of atoms within chordal `tol` of the unit circle.
    pub fn mass_near_unit_circle(&self, tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| distance_to_unit_circle(&a.point) <= tol)
            .map(|a| a.weight)
            .fold(0.0, |s, w| s + w)
    }

    /// Mass per arc `[2πk/bins, 2π(k+1)/bins)` of `arg z`; atoms at 0 and
    /// infinity are skipped.
    pub fn angular_histogram(&self, bins: usize) -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for a in &self.atoms {
            let Some(z) = a.point.affine() else { continue };
            if z.norm() == 0.0 {
                continue;
            }
            let t = z.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            let k = ((t * bins as f64) as usize).min(bins - 1);
            h[k] += a.weight;
        }
        h
    }

    /// Mass per cube-sphere cell (`6 grid^2` cells).
    pub fn cube_sphere_bins(&self, grid: usize) -> Vec<f64> {
        let mut bins = vec![0.0; 6 * grid * grid];
        for a in &self.atoms {
            bins[cube_sphere_cell(&a.point, grid)] += a.weight;
        }
        bins
    }
}

/// Chordal distance from `p` to the unit circle.
pub fn distance_to_unit_circle(p: &P1Point) -> f64 {
    match p.affine() {
        None => 0.5f64.sqrt(),
        Some(z) if z.norm() == 0.0 => 0.5f64.sqrt(),
        Some(z) => chordal_distance(p, &P1Point::finite(z / z.norm())),
    }
}

/// Orientation of the binning cube. An axis-aligned cube puts cell walls on
/// the equator, i.e. on the unit circle, where the measures of interest
/// live; tilting it lets the circle cross cells transversally.
const CUBE_TILT: (f64, f64) = (0.5, 0.25);

fn tilt(v: [f64; 3]) -> [f64; 3] {
    let (sa, ca) = CUBE_TILT.0.sin_cos();
    let (sb, cb) = CUBE_TILT.1.sin_cos();
    // About the x-axis, then about the z-axis.
    let (x, y, z) = (v[0], ca * v[1] - sa * v[2], sa * v[1] + ca * v[2]);
    [cb * x - sb * y, sb * x + cb * y, z]
}

/// Cell index on a (tilted) cube circumscribing the unit sphere: the face is
/// the dominant axis with its sign, and each face is split into `grid x grid`.
pub fn cube_sphere_cell(p: &P1Point, grid: usize) -> usize {
    let v = tilt(p.to_unit_sphere());
    let axis = (0..3)
        .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .unwrap_or(0);
    let face = 2 * axis + usize::from(v[axis] < 0.0);
    let m = v[axis].abs();
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let cell = |x: f64| (((x / m + 1.0) / 2.0 * grid as f64) as usize).min(grid - 1);
    face * grid * grid + cell(v[a]) * grid + cell(v[b])
}

/// Total variation between the binned measures, `½ Σ |a_i - b_i|`.
pub fn binned_tv(a: &AtomicMeasure, b: &AtomicMeasure, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid must be at least 2".into()));
    }
    let (ba, bb) = (a.cube_sphere_bins(grid), b.cube_sphere_bins(grid));
    Ok(0.5
        * ba.iter()
            .zip(&bb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, |s, d| s + d))
}

/// `d1^{-n}` times the iterated pullback of `δ_{w0}` under the chain.
///
/// Each atom `z` of weight `c` spawns, for every component `(g_j, m_j)`, each
/// preimage `y` of `z` with multiplicity `k`, carrying `c m_j k / d1`.
pub fn pullback_exact(
    chain: &Chain,
    w0: &P1Point,
    n: usize,
    atom_cap: usize,
) -> Result<AtomicMeasure> {
    if n == 0 {
        return Ok(AtomicMeasure::dirac(*w0));
    }
    chain.require_key_condition()?;
    let d1 = chain.d1() as f64;
    let fanout: usize = chain.components().iter().map(|c| c.map.degree()).sum();
    let mut level = AtomicMeasure::dirac(*w0);
    for _ in 0..n {
        let requested = level.len().saturating_mul(fanout);
        if requested > atom_cap {
            return Err(Error::CapExceeded {
                what: "atom",
                requested: requested as u128,
                cap: atom_cap as u128,
            });
        }
        let next: Vec<Vec<Atom>> = level
            .atoms
            .par_iter()
            .map(|a| -> Result<Vec<Atom>> {
                let mut out = Vec::with_capacity(fanout);
                for c in chain.components() {
                    for (y, k) in c.map.preimages(&a.point)? {
                        out.push(Atom {
                            point: y,
                            weight: a.weight * c.mult as f64 * k as f64 / d1,
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        level = AtomicMeasure::new(next.into_iter().flatten().collect()).merged(POINT_EQ_TOL);
    }
    Ok(level)
}

/// Component choice weighted by `m_j deg g_j / d1`.
fn component_distribution(chain: &Chain) -> WeightedIndex<u64> {
    WeightedIndex::new(
        chain
            .components()
            .iter()
            .map(|c| c.mult * c.map.degree() as u64),
    )
    .expect("chain has positive weights")
}

/// `(component, preimages with multiplicity, chosen index)`.
type BackwardStep = (usize, Vec<(P1Point, usize)>, usize);

/// Steps one backward orbit: draws a component, then one of its preimages
/// with probability proportional to multiplicity.
fn backward_step(
    chain: &Chain,
    pick: &WeightedIndex<u64>,
    z: &P1Point,
    rng: &mut ChaCha8Rng,
) -> Result<BackwardStep> {
    let j = pick.sample(rng);
    let pre = chain.map(j).preimages(z)?;
    let which = WeightedIndex::new(pre.iter().map(|(_, m)| *m))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(rng);
    Ok((j, pre, which))
}

fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Empirical measure of `count` independent random backward orbits of depth `n`.
pub fn pullback_sample(
    chain: &Chain,
    w0: &P1Point,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<AtomicMeasure> {
    chain.require_key_condition()?;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    let pick = component_distribution(chain);
    let weight = 1.0 / count as f64;
    let atoms = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Atom> {
            let mut rng = task_rng(seed, i as u64);
            let mut z = *w0;
            for _ in 0..n {
                let (_, pre, which) = backward_step(chain, &pick, &z, &mut rng)?;
                z = pre[which].0;
            }
            Ok(Atom { point: z, weight })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AtomicMeasure::new(atoms))
}

/// A repelling fixed point of a word.
#[derive(Clone, Debug, PartialEq)]
pub struct RepellingPoint {
    pub point: P1Point,
    pub word: Word,
    pub multiplier: f64,
    /// Word weight times multiplicity within the word.
    pub weight: u64,
}

/// Any fixed point of a word, as reported in the census.
#[derive(Clone, Debug, PartialEq)]
pub struct WordFixedPoint {
    pub point: P1Point,
    pub word: Word,
    pub multiplicity: usize,
    pub multiplier: f64,
    pub weight: u64,
}

impl WordFixedPoint {
    pub fn is_repelling(&self) -> bool {
        self.multiplier > 1.0 + crate::rational::REPELLING_GUARD
    }
}

#[derive(Clone, Debug)]
pub struct RepellingReport {
    /// `d1^{-n} Σ` over repelling fixed points, with weights.
    pub measure: AtomicMeasure,
    pub points: Vec<RepellingPoint>,
    pub fixed_points: Vec<WordFixedPoint>,
    /// Σ weight × multiplicity over all fixed points of all words.
    pub total_fixed_count: u64,
    pub repelling_count: u64,
    /// Some words were solved by the grid-seeded fall-back, so multiplicities
    /// and completeness are not guaranteed.
    pub lower_bound_only: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct RepellingCaps {
    pub word_cap: u64,
    pub degree_cap: usize,
    pub fallback_grid: usize,
}

impl Default for RepellingCaps {
    fn default() -> Self {
        RepellingCaps {
            word_cap: crate::correspondence::DEFAULT_WORD_CAP,
            degree_cap: DEFAULT_DEGREE_CAP,
            fallback_grid: FALLBACK_GRID,
        }
    }
}

/// Repelling fixed points of all words of length `n` and the measure
/// `d1^{-n} Σ δ_x` they carry. A point fixed by several words counts once per
/// word.
pub fn repelling_measure(chain: &Chain, n: usize, caps: RepellingCaps) -> Result<RepellingReport> {
    if chain.max_degree() < 2 {
        return Err(Error::InvalidArgument(
            "some generator must have degree >= 2".into(),
        ));
    }
    let words = chain.enumerate_words(n, caps.word_cap)?;
    let per_word = words
        .par_iter()
        .map(|w| -> Result<(Vec<WordFixedPoint>, bool)> {
            if chain.word_degree(w) <= caps.degree_cap as u128 {
                let g = chain.word_map(w, caps.degree_cap)?;
                let fps = g.fixed_points()?;
                Ok((
                    fps.into_iter()
                        .map(|f| WordFixedPoint {
                            point: f.point,
                            word: w.clone(),
                            multiplicity: f.multiplicity,
                            multiplier: f.multiplier,
                            weight: w.weight * f.multiplicity as u64,
                        })
                        .collect(),
                    false,
                ))
            } else {
                let fps = fallback_fixed_points(chain, w, caps.fallback_grid)?;
                Ok((fps, true))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = (chain.d1() as f64).powi(n as i32);
    let mut fixed_points = Vec::new();
    let mut lower_bound_only = false;
    for (fps, fallback) in per_word {
        lower_bound_only |= fallback;
        fixed_points.extend(fps);
    }
    let points: Vec<RepellingPoint> = fixed_points
        .iter()
        .filter(|f| f.is_repelling())
        .map(|f| RepellingPoint {
            point: f.point,
            word: f.word.clone(),
            multiplier: f.multiplier,
            weight: f.weight,
        })
        .collect();
    let measure = AtomicMeasure::new(
        points
            .iter()
            .map(|r| Atom {
                point: r.point,
                weight: r.weight as f64 / scale,
            })
            .collect(),
    )
    .merged(POINT_EQ_TOL);
    Ok(RepellingReport {
        measure,
        total_fixed_count: fixed_points.iter().map(|f| f.weight).sum(),
        repelling_count: points.iter().map(|r| r.weight).sum(),
        points,
        fixed_points,
        lower_bound_only,
    })
}

/// Grid-seeded Newton search for fixed points of a word too large to compose
/// symbolically. Works in the chart `|z| <= 1` or its reciprocal, with the
/// derivative by central differences. Multiplicities are reported as 1.
pub fn fallback_fixed_points(chain: &Chain, w: &Word, grid: usize) -> Result<Vec<WordFixedPoint>> {
    let eval = |p: &P1Point| chain.word_evaluate(w, p);
    let seeds = sphere_grid(grid);
    let found: Vec<P1Point> = seeds
        .par_iter()
        .filter_map(|s| newton_fixed_point(&eval, s))
        .collect();
    let found = dedup_points(&found, 1e-8);
    found
        .into_iter()
        .map(|p| {
            Ok(WordFixedPoint {
                point: p,
                word: w.clone(),
                multiplicity: 1,
                multiplier: chain.word_multiplier(w, &p)?,
                weight: w.weight,
            })
        })
        .collect()
}

/// `grid x grid` points, uniform in `(cos colatitude, longitude)`.
pub fn sphere_grid(grid: usize) -> Vec<P1Point> {
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        let zc = -1.0 + (2.0 * i as f64 + 1.0) / grid as f64;
        let r = (1.0 - zc * zc).sqrt();
        for j in 0..grid {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / grid as f64;
            out.push(P1Point::from_unit_sphere([
                r * phi.cos(),
                r * phi.sin(),
                zc,
            ]));
        }
    }
    out
}

fn newton_fixed_point(
    eval: &impl Fn(&P1Point) -> Result<P1Point>,
    seed: &P1Point,
) -> Option<P1Point> {
    // Chart: z itself when |z| <= 1, else u = 1/z.
    let flip = !seed.in_unit_chart();
    let to_point = |u: Complex64| -> P1Point {
        if flip {
            P1Point::from_homogeneous(Complex64::new(1.0, 0.0), u).unwrap_or(P1Point::INFINITY)
        } else {
            P1Point::finite(u)
        }
    };
    let from_point = |p: &P1Point| -> Option<Complex64> {
        if flip {
            P1Point::from_homogeneous(p.h1(), p.h0()).and_then(|q| q.affine())
        } else {
            p.affine()
        }
    };
    let h = |u: Complex64| -> Option<Complex64> {
        from_point(&eval(&to_point(u)).ok()?).map(|v| v - u)
    };
    let mut u = from_point(seed)?;
    for _ in 0..60 {
        let f = h(u)?;
        let step = 1e-7 * (1.0 + u.norm());
        let df = (h(u + step)? - h(u - step)?) / (2.0 * step);
        if df.norm() == 0.0 {
            return None;
        }
        let delta = f / df;
        u -= delta;
        if !(u.re.is_finite() && u.im.is_finite()) || u.norm() > 4.0 {
            return None;
        }
        if delta.norm() < 1e-13 {
            break;
        }
    }
    let p = to_point(u);
    let image = eval(&p).ok()?;
    (chordal_distance(&image, &p) <= 1e-10).then_some(p)
}

/// Parameters of the inverse-branch shrinkage probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShrinkProbeParams {
    pub center: P1Point,
    /// Chordal radius of the disk `W`.
    pub radius: f64,
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
    /// Reported quantile is `1 - epsilon`.
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkReport {
    pub median_diam: f64,
    pub quantile_diam: f64,
    /// Median frame diameter at levels `0..=depth`.
    pub per_level: Vec<f64>,
    pub per_level_quantile: Vec<f64>,
    /// Branches discarded for ambiguous continuation.
    pub discarded: usize,
}

/// Boundary frame of the chordal disk plus its center (last).
pub fn disk_frame(center: &P1Point, radius: f64, k: usize) -> Vec<P1Point> {
    let chart = Rotation::sending_to_zero(center).inverse();
    let t = radius / (1.0 - radius * radius).sqrt();
    let mut frame: Vec<P1Point> = (0..k)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / k as f64;
            chart.apply(&P1Point::finite(Complex64::from_polar(t, theta)))
        })
        .collect();
    frame.push(*center);
    frame
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Pulls a disk frame back along random words, each frame point following the
/// preimage nearest to the center's, and reports diameter statistics per level.
pub fn branch_shrink_probe(chain: &Chain, params: &ShrinkProbeParams) -> Result<ShrinkReport> {
    chain.require_key_condition()?;
    if !(0.0 < params.radius && params.radius < 1.0) || params.samples == 0 {
        return Err(Error::InvalidArgument(
            "radius in (0,1) and samples > 0 required".into(),
        ));
    }
    if !(0.0..1.0).contains(&params.epsilon) {
        return Err(Error::InvalidArgument("epsilon must lie in [0,1)".into()));
    }
    let pick = component_distribution(chain);
    let frame0 = disk_frame(&params.center, params.radius, FRAME_POINTS);
    let d0 = diameter(&frame0)?;
    const MAX_ATTEMPTS: u64 = 64;

    let runs = (0..params.samples)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, usize)> {
            let mut discarded = 0;
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = task_rng(params.seed, i as u64 * MAX_ATTEMPTS + attempt);
                match track_branch(chain, &pick, &frame0, params.depth, &mut rng)? {
                    Some(mut diams) => {
                        diams.insert(0, d0);
                        return Ok((diams, discarded));
                    }
                    None => discarded += 1,
                }
            }
            Err(Error::InvalidArgument(
                "continuation ambiguous on every attempt".into(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_level = Vec::with_capacity(params.depth + 1);
    let mut per_level_quantile = Vec::with_capacity(params.depth + 1);
    for lvl in 0..=params.depth {
        let mut v: Vec<f64> = runs.iter().map(|(d, _)| d[lvl]).collect();
        v.sort_by(f64::total_cmp);
        per_level.push(quantile(&v, 0.5));
        per_level_quantile.push(quantile(&v, 1.0 - params.epsilon));
    }
    Ok(ShrinkReport {
        median_diam: per_level[params.depth],
        quantile_diam: per_level_quantile[params.depth],
        per_level,
        per_level_quantile,
        discarded: runs.iter().map(|(_, k)| k).sum(),
    })
}

/// One random inverse branch; `None` on ambiguous continuation.
fn track_branch(
    chain: &Chain,
    pick: &WeightedIndex<u64>,
    frame0: &[P1Point],
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let mut frame = frame0.to_vec();
    let ci = frame.len() - 1;
    let mut diams = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (j, pre, which) = backward_step(chain, pick, &frame[ci], rng)?;
        let anchor = pre[which].0;
        let g: &RationalMap = chain.map(j);
        let mut next = Vec::with_capacity(frame.len());
        for p in &frame[..ci] {
            let cands = g.preimages(p)?;
            let mut d: Vec<(f64, P1Point)> = cands
                .iter()
                .map(|(q, _)| (chordal_distance(q, &anchor), *q))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            if d.len() > 1 && d[1].0 - d[0].0 <= AMBIGUITY_TOL * d[1].0.max(1e-300) {
                return Ok(None);
            }
            next.push(d[0].1);
        }
        next.push(anchor);
        frame = next;
        diams.push(diameter(&frame)?);
    }
    Ok(Some(diams))
}
