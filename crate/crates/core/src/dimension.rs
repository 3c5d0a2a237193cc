//! Hausdorff-dimension machinery: coordinate choice, the derivative bound `M`,
//! the weighted-family ladder `λ(k)`, box counting and the power families.

use std::collections::HashSet;

use kiddo::{KdTree, SquaredEuclidean};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::Chain;
use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::rational::RationalMap;
pub use crate::sphere::fibonacci_sphere;
use crate::sphere::{chordal_distance, random_point_with, P1Point, Rotation};

/// Infinity closer than this to the sample (or its images) triggers a change
/// of coordinates.
pub const RECOORDINATE_THRESHOLD: f64 = 0.05;
/// Minimal clearance of the point sent to infinity.
pub const MIN_CLEARANCE: f64 = 0.01;
pub const RECOORDINATE_CANDIDATES: usize = 10_000;
const RECOORDINATE_SEED: u64 = 0x5eed_0f1f;

/// Chordal radius of the covering net used for the density check.
pub const CASE_A_NET_RADIUS: f64 = 0.05;

/// Box counting reports a dimension only above this coefficient of determination.
pub const MIN_FIT_QUALITY: f64 = 0.98;

/// Spherical multiplier below which a sample point counts as critical.
pub const CRITICAL_TOL: f64 = 1e-6;

/// Image within this chordal distance of infinity counts as a pole.
const POLE_TOL: f64 = 1e-9;

pub fn default_scales() -> Vec<f64> {
    (3..=8).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    Repelling,
    Pullback,
    CircleAnalytic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JuliaSample {
    points: Vec<P1Point>,
    source: SampleSource,
}

impl JuliaSample {
    pub fn new(points: Vec<P1Point>, source: SampleSource) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(JuliaSample { points, source })
    }

    /// `count` equally spaced points on the unit circle.
    pub fn unit_circle(count: usize) -> Result<Self> {
        let pts = (0..count)
            .map(|i| P1Point::on_circle(std::f64::consts::TAU * i as f64 / count as f64))
            .collect();
        Self::new(pts, SampleSource::CircleAnalytic)
    }

    pub fn from_measure(m: &AtomicMeasure, source: SampleSource) -> Result<Self> {
        Self::new(m.points(), source)
    }

    /// Atoms of a depth-`n` pullback of `w0`, each checked to map back onto
    /// `w0` along some word within chordal `1e-5`.
    pub fn from_pullback(chain: &Chain, m: &AtomicMeasure, w0: &P1Point, n: usize) -> Result<Self> {
        let words = chain.enumerate_words(n, crate::correspondence::DEFAULT_WORD_CAP)?;
        let pts = m.points();
        let bad = pts.par_iter().position_first(|p| {
            !words.iter().any(|w| {
                chain
                    .word_evaluate(w, p)
                    .map(|q| chordal_distance(&q, w0) <= 1e-5)
                    .unwrap_or(false)
            })
        });
        if let Some(i) = bad {
            return Err(Error::DegenerateSample(format!(
                "atom {i} fails forward verification"
            )));
        }
        Self::new(pts, SampleSource::Pullback)
    }

    pub fn points(&self) -> &[P1Point] {
        &self.points
    }

    pub fn source(&self) -> SampleSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, r: &Rotation) -> JuliaSample {
        JuliaSample {
            points: self.points.iter().map(|p| r.apply(p)).collect(),
            source: self.source,
        }
    }
}

/// Nearest-neighbour index over points of the unit sphere.
struct SphereIndex {
    tree: KdTree<f64, 3>,
}

impl SphereIndex {
    fn new(points: &[P1Point]) -> Self {
        let mut tree = KdTree::with_capacity(points.len().max(1));
        for (i, p) in points.iter().enumerate() {
            tree.add(&p.to_unit_sphere(), i as u64);
        }
        SphereIndex { tree }
    }

    /// Chordal distance to the nearest indexed point.
    fn clearance(&self, p: &P1Point) -> f64 {
        let d2 = self
            .tree
            .nearest_one::<SquaredEuclidean>(&p.to_unit_sphere())
            .distance;
        0.5 * d2.sqrt()
    }
}

/// Sample together with its images under every generator; poles map to infinity.
fn sample_with_images(chain: &Chain, s: &JuliaSample) -> Vec<P1Point> {
    let mut all = s.points.clone();
    for c in chain.components() {
        all.extend(
            s.points
                .iter()
                .map(|p| c.map.evaluate(p).unwrap_or(P1Point::INFINITY)),
        );
    }
    all
}

#[derive(Clone, Debug)]
pub struct Recoordinated {
    pub chain: Chain,
    pub sample: JuliaSample,
    /// New coordinate = `rotation` applied to the old one.
    pub rotation: Rotation,
    pub recoordinated: bool,
}

/// Moves infinity away from the sample and its images when it is closer than
/// [`RECOORDINATE_THRESHOLD`], choosing the farthest of a fixed set of
/// pseudo-random candidates.
pub fn recoordinate(chain: &Chain, s: &JuliaSample) -> Result<Recoordinated> {
    let all = sample_with_images(chain, s);
    let index = SphereIndex::new(&all);
    if index.clearance(&P1Point::INFINITY) >= RECOORDINATE_THRESHOLD {
        return Ok(Recoordinated {
            chain: chain.clone(),
            sample: s.clone(),
            rotation: Rotation::identity(),
            recoordinated: false,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RECOORDINATE_SEED);
    let candidates: Vec<P1Point> = (0..RECOORDINATE_CANDIDATES)
        .map(|_| random_point_with(&mut rng))
        .collect();
    let (best, clearance) = candidates
        .par_iter()
        .map(|c| (*c, index.clearance(c)))
        .reduce_with(|a, b| if b.1 > a.1 { b } else { a })
        .expect("candidates are nonempty");
    if clearance < MIN_CLEARANCE {
        return Err(Error::CaseASuspected { clearance });
    }
    let rotation = Rotation::sending_to_infinity(&best);
    Ok(Recoordinated {
        chain: chain.conjugate(&rotation)?,
        sample: s.transformed(&rotation),
        rotation,
        recoordinated: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MEstimate {
    pub m: f64,
    /// Some generator is (numerically) critical at a sample point.
    pub critical_warning: bool,
}

/// Supremum of `|g_j'|` over the sample in the affine chart.
pub fn estimate_m(chain: &Chain, s: &JuliaSample) -> Result<MEstimate> {
    let per_point = s
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<(f64, bool)> {
            let z = p.affine().ok_or(Error::SampleAtInfinity)?;
            let mut m = 0.0f64;
            let mut critical = false;
            for c in chain.components() {
                let g: &RationalMap = &c.map;
                let image = g.evaluate(p)?;
                if chordal_distance(&image, &P1Point::INFINITY) <= POLE_TOL {
                    return Err(Error::PoleOnSample { index: i });
                }
                let d = g
                    .affine_derivative(z)
                    .ok_or(Error::PoleOnSample { index: i })?;
                m = m.max(d.norm());
                critical |= g.spherical_multiplier(p) < CRITICAL_TOL;
            }
            Ok((m, critical))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MEstimate {
        m: per_point.iter().map(|x| x.0).fold(0.0, f64::max),
        critical_warning: per_point.iter().any(|x| x.1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaRow {
    pub k: u64,
    #[serde(rename = "R_k")]
    pub r: f64,
    #[serde(rename = "lambda_k")]
    pub lambda: f64,
}

/// Closed-form ladder for `Γ(k) = Γ + (k-1) graph(g_N)`, `g_N` of top degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladder {
    pub d1: u64,
    pub d0: u64,
    pub top_degree: u64,
    pub m: f64,
}

impl Ladder {
    pub fn new(chain: &Chain, m: f64) -> Result<Self> {
        if m.is_nan() || m <= 1.0 {
            return Err(Error::DegenerateM(m));
        }
        Ok(Ladder {
            d1: chain.d1(),
            d0: chain.d0(),
            top_degree: chain.max_degree() as u64,
            m,
        })
    }

    pub fn ratio(&self, k: u64) -> f64 {
        let extra = (k - 1) as f64;
        (self.d1 as f64 + extra * self.top_degree as f64) / (self.d0 as f64 + extra)
    }

    pub fn lambda(&self, k: u64) -> f64 {
        self.ratio(k).ln() / self.m.ln()
    }

    pub fn bound(&self) -> f64 {
        (self.top_degree as f64).ln() / self.m.ln()
    }

    pub fn row(&self, k: u64) -> LambdaRow {
        LambdaRow {
            k,
            r: self.ratio(k),
            lambda: self.lambda(k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    /// Sample estimate of `M`, absent in the covering case.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub max_deg: u64,
    /// `log(max_deg)/log(M)`, or 2 in the covering case.
    #[serde(rename = "bound (sample-M)")]
    pub bound: f64,
    pub lambda_table: Vec<LambdaRow>,
    pub lambda_monotone: bool,
    pub box_dim: Option<f64>,
    pub fit_quality: Option<f64>,
    pub case_a: bool,
    pub recoordinated: bool,
    pub critical_warning: bool,
    pub sample_source: SampleSource,
    pub sample_size: usize,
}

/// Full report: coordinates, `M`, the ladder up to `k_max` and, if `scales`
/// are given, a box-counting estimate on the recoordinated sample.
pub fn lower_bound(
    chain: &Chain,
    s: &JuliaSample,
    k_max: u64,
    scales: Option<&[f64]>,
) -> Result<DimensionReport> {
    chain.require_key_condition()?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let max_deg = chain.max_degree() as u64;
    if case_a_check(chain, s)? {
        return Ok(DimensionReport {
            m: None,
            max_deg,
            bound: 2.0,
            lambda_table: Vec::new(),
            lambda_monotone: true,
            box_dim: None,
            fit_quality: None,
            case_a: true,
            recoordinated: false,
            critical_warning: false,
            sample_source: s.source,
            sample_size: s.len(),
        });
    }
    let rc = recoordinate(chain, s)?;
    let est = estimate_m(&rc.chain, &rc.sample)?;
    let ladder = Ladder::new(chain, est.m)?;
    let lambda_table: Vec<LambdaRow> = (1..=k_max).map(|k| ladder.row(k)).collect();
    let bound = ladder.bound();
    let lambda_monotone = lambda_table.windows(2).all(|w| w[1].lambda >= w[0].lambda)
        && lambda_table.iter().all(|r| r.lambda <= bound + 1e-12);
    let (box_dim, fit_quality) = match scales {
        Some(sc) => {
            let (dim, fit) = box_dimension(&rc.sample, sc)?;
            ((fit >= MIN_FIT_QUALITY).then_some(dim), Some(fit))
        }
        None => (None, None),
    };
    Ok(DimensionReport {
        m: Some(est.m),
        max_deg,
        bound,
        lambda_table,
        lambda_monotone,
        box_dim,
        fit_quality,
        case_a: false,
        recoordinated: rc.recoordinated,
        critical_warning: est.critical_warning,
        sample_source: s.source,
        sample_size: s.len(),
    })
}

/// Box-counting slope of `log N(ε)` against `log(1/ε)` in the affine chart,
/// and the `R²` of that fit.
pub fn box_dimension(s: &JuliaSample, scales: &[f64]) -> Result<(f64, f64)> {
    if scales.len() < 4 || scales.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return Err(Error::InvalidArgument(
            "need at least 4 scales in (0, 0.5)".into(),
        ));
    }
    let pts = s
        .points
        .iter()
        .map(|p| p.affine().ok_or(Error::SampleAtInfinity))
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = scales
        .par_iter()
        .map(|&eps| {
            let boxes: HashSet<(i64, i64)> = pts
                .iter()
                .map(|z| ((z.re / eps).floor() as i64, (z.im / eps).floor() as i64))
                .collect();
            ((1.0 / eps).ln(), (boxes.len() as f64).ln())
        })
        .collect();
    Ok(least_squares(&xy))
}

/// Slope and coefficient of determination; a constant response fits perfectly.
fn least_squares(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    if syy == 0.0 {
        return (slope, 1.0);
    }
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    (slope, 1.0 - ss_res / syy)
}

/// Whether `n` is a product of elements of `gens` (all `>= 2`).
fn in_semigroup(n: u32, gens: &[u32]) -> bool {
    gens.iter()
        .any(|&g| n.is_multiple_of(g) && (n == g || in_semigroup(n / g, gens)))
}

/// The chain `{z^{d_1}, ..., z^{d_N}}`, with each degree outside the
/// multiplicative semigroup of the earlier ones.
pub fn power_family(degrees: &[u32]) -> Result<Chain> {
    if degrees.is_empty() {
        return Err(Error::EmptyChain);
    }
    if degrees.iter().any(|&d| d < 2) || degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "degrees must be >= 2 and strictly increasing".into(),
        ));
    }
    for (j, &d) in degrees.iter().enumerate() {
        if in_semigroup(d, &degrees[..j]) {
            return Err(Error::RepresentableDegree {
                degree: d,
                earlier: degrees[..j].to_vec(),
            });
        }
    }
    Chain::from_maps(
        degrees
            .iter()
            .map(|&d| RationalMap::power(d as usize))
            .collect(),
    )
}

/// Net size whose spiral spacing is about the covering radius.
fn case_a_net() -> Vec<P1Point> {
    // Each net point owns area 4π/n; match it to a chordal cap of radius r
    // (Euclidean 2r), area π(2r)².
    let r = CASE_A_NET_RADIUS;
    let n = (4.0 / (4.0 * r * r)).ceil() as usize;
    fibonacci_sphere(n)
}

/// True when the sample and its generator images meet every cell of a
/// `0.05`-chordal net on the sphere.
pub fn case_a_check(chain: &Chain, s: &JuliaSample) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let index = SphereIndex::new(&sample_with_images(chain, s));
    Ok(case_a_net()
        .par_iter()
        .all(|q| index.clearance(q) <= CASE_A_NET_RADIUS))
}
