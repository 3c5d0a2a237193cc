//! Correspondences given as weighted sums of graphs of rational maps.
//!
//! A [`Chain`] stands for `Γ = Σ m_j · graph(g_j)`. Its topological degree is
//! `d1 = Σ m_j deg g_j` and the degree of its adjoint is `d0 = Σ m_j`.
//! Words are written `w = g_{j_n} ∘ … ∘ g_{j_1}`: index `j_1` is applied first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::DEFAULT_CLUSTER_TOL;
use crate::rational::{RationalMap, DEFAULT_DEGREE_CAP};
use crate::sphere::{chordal_distance, dedup_points, fibonacci_sphere, P1Point, Rotation};

/// Coefficient tolerance for merging equal components after composition.
pub const MERGE_TOL: f64 = 1e-9;

/// Default cap on the number of enumerated words.
pub const DEFAULT_WORD_CAP: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(flatten)]
    pub map: RationalMap,
    #[serde(default = "one")]
    pub mult: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    components: Vec<Component>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDegrees {
    pub d1: u64,
    pub d0: u64,
    pub key_condition: bool,
}

/// A word over the components of a chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    /// Component positions, applied left to right.
    pub indices: Vec<usize>,
    /// Product of the component multiplicities.
    pub weight: u64,
}

impl Word {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// One-based indices joined by `.`, as written to CSV.
    pub fn label(&self) -> String {
        self.indices
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchBoundReport {
    pub n: u32,
    pub l: u32,
    pub tau: usize,
    pub bound: f64,
    pub fraction: f64,
}

/// Outcome of tracking inverse branches over a disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchCount {
    /// Regular branches, counted with word weights.
    pub regular: u64,
    /// All branches at the center, counted with multiplicity and weights.
    pub total: u64,
}

impl Chain {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyChain);
        }
        if components.iter().any(|c| c.mult == 0) {
            return Err(Error::InvalidArgument(
                "multiplicities must be positive".into(),
            ));
        }
        Ok(Chain { components })
    }

    /// Each map once, multiplicity 1.
    pub fn from_maps(maps: Vec<RationalMap>) -> Result<Self> {
        Self::new(
            maps.into_iter()
                .map(|map| Component { map, mult: 1 })
                .collect(),
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn map(&self, j: usize) -> &RationalMap {
        &self.components[j].map
    }

    pub fn d1(&self) -> u64 {
        self.components
            .iter()
            .map(|c| c.mult * c.map.degree() as u64)
            .sum()
    }

    pub fn d0(&self) -> u64 {
        self.components.iter().map(|c| c.mult).sum()
    }

    pub fn degrees(&self) -> ChainDegrees {
        let (d1, d0) = (self.d1(), self.d0());
        ChainDegrees {
            d1,
            d0,
            key_condition: d1 > d0,
        }
    }

    pub fn require_key_condition(&self) -> Result<()> {
        let d = self.degrees();
        if d.key_condition {
            Ok(())
        } else {
            Err(Error::KeyCondition { d1: d.d1, d0: d.d0 })
        }
    }

    pub fn max_degree(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.map.degree())
            .max()
            .unwrap_or(0)
    }

    /// `other ∘ self`: all compositions `b_l ∘ a_j` with multiplicity
    /// `m_j m_l`; numerically equal maps are merged.
    pub fn then(&self, other: &Chain) -> Result<Chain> {
        self.then_capped(other, DEFAULT_DEGREE_CAP)
    }

    pub fn then_capped(&self, other: &Chain, degree_cap: usize) -> Result<Chain> {
        let mut out: Vec<Component> = Vec::new();
        for a in &self.components {
            for b in &other.components {
                let map = b.map.compose_capped(&a.map, degree_cap)?;
                let mult = a.mult * b.mult;
                match out.iter_mut().find(|c| c.map.approx_eq(&map, MERGE_TOL)) {
                    Some(c) => c.mult += mult,
                    None => out.push(Component { map, mult }),
                }
            }
        }
        Chain::new(out)
    }

    /// `R ∘ g_j ∘ R^{-1}` for every component.
    pub fn conjugate(&self, r: &Rotation) -> Result<Chain> {
        Chain::new(
            self.components
                .iter()
                .map(|c| {
                    Ok(Component {
                        map: c.map.conjugate(r)?,
                        mult: c.mult,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Every index sequence of length `n` in lexicographic order.
    pub fn enumerate_words(&self, n: usize, word_cap: u64) -> Result<Vec<Word>> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "word length must be at least 1".into(),
            ));
        }
        let k = self.components.len() as u64;
        let count =
            k.checked_pow(n as u32)
                .filter(|&c| c <= word_cap)
                .ok_or(Error::CapExceeded {
                    what: "word",
                    requested: (k as u128).saturating_pow(n as u32),
                    cap: word_cap as u128,
                })?;
        let mut words = Vec::with_capacity(count as usize);
        let mut idx = vec![0usize; n];
        loop {
            let weight = idx.iter().map(|&j| self.components[j].mult).product();
            words.push(Word {
                indices: idx.clone(),
                weight,
            });
            // Odometer with the last position fastest.
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(words);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < k as usize {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// The composed map of a word.
    pub fn word_map(&self, w: &Word, degree_cap: usize) -> Result<RationalMap> {
        let mut it = w.indices.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty word".into()))?;
        let mut acc = self.map(*first).clone();
        for &j in it {
            acc = self.map(j).compose_capped(&acc, degree_cap)?;
        }
        Ok(acc)
    }

    pub fn word_degree(&self, w: &Word) -> u128 {
        w.indices
            .iter()
            .map(|&j| self.map(j).degree() as u128)
            .product()
    }

    pub fn word_evaluate(&self, w: &Word, p: &P1Point) -> Result<P1Point> {
        w.indices
            .iter()
            .try_fold(*p, |x, &j| self.map(j).evaluate(&x))
    }

    /// Spherical multiplier of the word at `p`, by the chain rule along the
    /// orbit.
    pub fn word_multiplier(&self, w: &Word, p: &P1Point) -> Result<f64> {
        let mut x = *p;
        let mut m = 1.0;
        for &j in &w.indices {
            let g = self.map(j);
            m *= g.spherical_multiplier(&x);
            x = g.evaluate(&x)?;
        }
        Ok(m)
    }

    /// Forward images of `points` under every component, deduplicated.
    pub fn forward_image(&self, points: &[P1Point]) -> Result<Vec<P1Point>> {
        let mut out = Vec::with_capacity(points.len() * self.components.len());
        for p in points {
            for c in &self.components {
                out.push(c.map.evaluate(p)?);
            }
        }
        Ok(dedup_points(&out, DEFAULT_CLUSTER_TOL))
    }

    /// Critical values of all words of length at most `l`.
    ///
    /// For a word `g_{j_m} ∘ … ∘ g_{j_1}` the critical values are the images of
    /// `crit(g_{j_i})` under the suffixes `g_{j_m} ∘ … ∘ g_{j_{i+1}}`; over all
    /// words of length `<= l` these suffixes are exactly the words of length
    /// `< l`, so the union is built by pushing `crit(Γ)` forward `l - 1` times.
    pub fn critical_union(&self, l: usize, word_cap: u64) -> Result<Vec<P1Point>> {
        if l == 0 {
            return Err(Error::InvalidArgument("l must be at least 1".into()));
        }
        let k = self.components.len() as u64;
        if k.checked_pow(l as u32).is_none_or(|c| c > word_cap) {
            return Err(Error::CapExceeded {
                what: "word",
                requested: (k as u128).saturating_pow(l as u32),
                cap: word_cap as u128,
            });
        }
        let mut base = Vec::new();
        for c in &self.components {
            base.extend(c.map.critical_values()?);
        }
        let mut all = dedup_points(&base, DEFAULT_CLUSTER_TOL);
        let mut frontier = all.clone();
        for _ in 1..l {
            frontier = self.forward_image(&frontier)?;
            all.extend(frontier.iter().copied());
            all = dedup_points(&all, DEFAULT_CLUSTER_TOL);
        }
        Ok(all)
    }

    /// Lower bound `d1^n [1 - (d0/d1)^l τ (d0 + 1)]` on the number of regular
    /// inverse branches over a simply connected set missing `C_l`, with
    /// `τ = Card(C_1)`.
    pub fn branch_count_bound(&self, n: u32, l: u32) -> Result<BranchBoundReport> {
        if n == 0 || l == 0 {
            return Err(Error::InvalidArgument("n and l must be at least 1".into()));
        }
        let tau = self.critical_union(1, u64::MAX)?.len();
        let (d1, d0) = (self.d1() as f64, self.d0() as f64);
        let fraction = (1.0 - (d0 / d1).powi(l as i32) * tau as f64 * (d0 + 1.0)).max(0.0);
        Ok(BranchBoundReport {
            n,
            l,
            tau,
            bound: d1.powi(n as i32) * fraction,
            fraction,
        })
    }

    /// Preimages of `p` under a word with multiplicities: preimages under
    /// `g_{j_n}` first, then `g_{j_{n-1}}`, down to `g_{j_1}`.
    pub fn word_preimages(&self, w: &Word, p: &P1Point) -> Result<Vec<(P1Point, usize)>> {
        let mut level = vec![(*p, 1usize)];
        for &j in w.indices.iter().rev() {
            let g = self.map(j);
            let mut next = Vec::with_capacity(level.len() * g.degree());
            for (x, m) in &level {
                for (y, k) in g.preimages(x)? {
                    next.push((y, m * k));
                }
            }
            level = next;
        }
        Ok(level)
    }

    /// A chordal disk missing `C_l`: the center is the point of a spiral net
    /// farthest from `C_l`, the radius half that clearance (at most 0.2).
    pub fn disk_avoiding(&self, l: usize, word_cap: u64) -> Result<(P1Point, f64)> {
        let crit = self.critical_union(l, word_cap)?;
        let far = fibonacci_sphere(2000)
            .into_iter()
            .map(|q| {
                let d = crit
                    .iter()
                    .map(|c| chordal_distance(&q, c))
                    .fold(1.0, f64::min);
                (q, d)
            })
            .fold((P1Point::ZERO, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        Ok((far.0, (0.5 * far.1).min(0.2)))
    }

    /// Counts regular inverse branches of `Γ^n` over the chordal disk of
    /// `radius` around `center`.
    ///
    /// Every simple preimage of the center under every word starts a branch.
    /// Branches are continued along `rays` radial paths of `steps` steps each
    /// by nearest-preimage tracking; a branch is regular when along every path
    /// it stays on a simple preimage that no other branch of the same word
    /// claims.
    pub fn regular_branch_count(
        &self,
        center: &P1Point,
        radius: f64,
        n: usize,
        rays: usize,
        steps: usize,
        word_cap: u64,
    ) -> Result<BranchCount> {
        if !(0.0 < radius && radius < 1.0) || rays == 0 || steps == 0 {
            return Err(Error::InvalidArgument(
                "radius in (0,1), rays and steps positive".into(),
            ));
        }
        let words = self.enumerate_words(n, word_cap)?;
        let chart = Rotation::sending_to_zero(center).inverse();
        let t_max = radius / (1.0 - radius * radius).sqrt();
        let per_word = words
            .par_iter()
            .map(|w| -> Result<(u64, u64)> {
                let start = self.word_preimages(w, center)?;
                let total: usize = start.iter().map(|(_, m)| m).sum();
                let mut alive: Vec<bool> = start.iter().map(|(_, m)| *m == 1).collect();
                for r in 0..rays {
                    let theta = std::f64::consts::TAU * r as f64 / rays as f64;
                    let mut pos: Vec<P1Point> = start.iter().map(|(p, _)| *p).collect();
                    for s in 1..=steps {
                        let t = t_max * s as f64 / steps as f64;
                        let target = chart.apply(&P1Point::finite(
                            num_complex::Complex64::from_polar(t, theta),
                        ));
                        let leaves = self.word_preimages(w, &target)?;
                        let mut claimed = vec![0usize; leaves.len()];
                        let mut choice = vec![usize::MAX; pos.len()];
                        for (b, p) in pos.iter().enumerate() {
                            if !alive[b] {
                                continue;
                            }
                            let (best, _) = leaves
                                .iter()
                                .enumerate()
                                .map(|(i, (q, _))| (i, chordal_distance(p, q)))
                                .fold((usize::MAX, f64::INFINITY), |acc, x| {
                                    if x.1 < acc.1 {
                                        x
                                    } else {
                                        acc
                                    }
                                });
                            choice[b] = best;
                            claimed[best] += 1;
                        }
                        for b in 0..pos.len() {
                            if !alive[b] {
                                continue;
                            }
                            let i = choice[b];
                            if leaves[i].1 != 1 || claimed[i] != 1 {
                                alive[b] = false;
                            } else {
                                pos[b] = leaves[i].0;
                            }
                        }
                    }
                }
                let regular = alive.iter().filter(|a| **a).count() as u64;
                Ok((regular * w.weight, total as u64 * w.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BranchCount {
            regular: per_word.iter().map(|x| x.0).sum(),
            total: per_word.iter().map(|x| x.1).sum(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ChainRecord {
    generators: Vec<Component>,
}

impl Serialize for Chain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChainRecord {
            generators: self.components.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Chain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ChainRecord::deserialize(d)?;
        Chain::new(r.generators).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::cis;
    use proptest::prelude::*;

    fn powers(degs: &[usize]) -> Chain {
        Chain::from_maps(degs.iter().map(|&d| RationalMap::power(d)).collect()).unwrap()
    }

    fn mobius_2z1() -> RationalMap {
        RationalMap::from_real(&[1.0, 2.0], &[-1.0, 1.0]).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(
            powers(&[2, 3]).degrees(),
            ChainDegrees {
                d1: 5,
                d0: 2,
                key_condition: true
            }
        );
        let mob = Chain::from_maps(vec![
            mobius_2z1(),
            RationalMap::from_real(&[1.0], &[0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            mob.degrees(),
            ChainDegrees {
                d1: 2,
                d0: 2,
                key_condition: false
            }
        );
        let tripled = Chain::new(vec![Component {
            map: RationalMap::power(2),
            mult: 3,
        }])
        .unwrap();
        assert_eq!(
            tripled.degrees(),
            ChainDegrees {
                d1: 6,
                d0: 3,
                key_condition: true
            }
        );
    }

    #[test]
    fn composition_of_power_family() {
        let c = powers(&[2, 3]);
        let cc = c.then(&c).unwrap();
        let mut found: Vec<(usize, u64)> = cc
            .components()
            .iter()
            .map(|x| (x.map.degree(), x.mult))
            .collect();
        found.sort();
        assert_eq!(found, vec![(4, 1), (6, 2), (9, 1)]);
        assert_eq!(cc.d1(), 25);
        assert!(cc
            .components()
            .iter()
            .any(|x| x.map == RationalMap::power(6) && x.mult == 2));
    }

    #[test]
    fn identity_chain_is_neutral() {
        let c = Chain::from_maps(vec![RationalMap::power(2), mobius_2z1()]).unwrap();
        let id = powers(&[1]);
        assert_eq!(c.then(&id).unwrap(), c);
        assert_eq!(id.then(&c).unwrap(), c);
        let sq = powers(&[2]);
        let sq2 = sq.then(&sq).unwrap();
        assert_eq!(sq2.len(), 1);
        assert_eq!(sq2.d0(), 1);
        assert_eq!(sq2.map(0), &RationalMap::power(4));
    }

    #[test]
    fn word_enumeration() {
        assert_eq!(powers(&[2, 3]).enumerate_words(2, 100).unwrap().len(), 4);
        let doubled = Chain::new(vec![Component {
            map: RationalMap::power(2),
            mult: 2,
        }])
        .unwrap();
        let w = doubled.enumerate_words(3, 100).unwrap();
        assert_eq!(
            w,
            vec![Word {
                indices: vec![0, 0, 0],
                weight: 8
            }]
        );
        let w1 = powers(&[2, 3]).enumerate_words(1, 100).unwrap();
        assert_eq!(
            w1.iter().map(|w| (w.label(), w.weight)).collect::<Vec<_>>(),
            vec![("1".into(), 1), ("2".into(), 1)]
        );
        assert!(matches!(
            powers(&[2, 3]).enumerate_words(11, 1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn word_order_applies_first_index_first() {
        // w = (z^2) ∘ (z + 1): 1 -> 2 -> 4.
        let c = Chain::from_maps(vec![
            RationalMap::from_real(&[1.0, 1.0], &[1.0]).unwrap(),
            RationalMap::power(2),
        ])
        .unwrap();
        let w = Word {
            indices: vec![0, 1],
            weight: 1,
        };
        let img = c.word_evaluate(&w, &P1Point::from_re_im(1.0, 0.0)).unwrap();
        assert!(img.approx_eq(&P1Point::from_re_im(4.0, 0.0), 1e-14));
        let sym = c.word_map(&w, 512).unwrap();
        assert!(sym
            .evaluate(&P1Point::from_re_im(1.0, 0.0))
            .unwrap()
            .approx_eq(&img, 1e-14));
    }

    #[test]
    fn word_multiplier_examples() {
        let c = powers(&[2, 3]);
        let one = P1Point::from_re_im(1.0, 0.0);
        let w = Word {
            indices: vec![0, 1],
            weight: 1,
        };
        assert!((c.word_multiplier(&w, &one).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(c.word_multiplier(&w, &P1Point::ZERO).unwrap(), 0.0);
        let w = Word {
            indices: vec![0, 0],
            weight: 1,
        };
        assert!((c.word_multiplier(&w, &one).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn critical_union_examples() {
        let c = powers(&[2, 3]);
        for l in [1, 2] {
            let cu = c.critical_union(l, 1000).unwrap();
            assert_eq!(cu.len(), 2);
            assert!(cu.contains(&P1Point::ZERO));
            assert!(cu.iter().any(|p| p.is_infinity()));
        }
        let q = Chain::from_maps(vec![
            RationalMap::from_real(&[1.0, 0.0, 1.0], &[1.0]).unwrap()
        ])
        .unwrap();
        let cu = q.critical_union(1, 1000).unwrap();
        assert_eq!(cu.len(), 2);
        assert!(cu
            .iter()
            .any(|p| p.approx_eq(&P1Point::from_re_im(1.0, 0.0), 1e-12)));
        // l = 2 adds the forward image of 1, which is 2.
        let cu2 = q.critical_union(2, 1000).unwrap();
        assert_eq!(cu2.len(), 3);
    }

    #[test]
    fn branch_bound_examples() {
        let c = powers(&[2, 3]);
        let r2 = c.branch_count_bound(3, 2).unwrap();
        assert_eq!(r2.tau, 2);
        assert!((r2.fraction - 0.04).abs() < 1e-12);
        assert!((r2.bound - 125.0 * 0.04).abs() < 1e-9);
        let r3 = c.branch_count_bound(4, 3).unwrap();
        assert!((r3.fraction - 0.616).abs() < 1e-12);
        // A chain of Möbius maps has no critical values.
        let mob = Chain::from_maps(vec![mobius_2z1()]).unwrap();
        assert_eq!(mob.branch_count_bound(2, 1).unwrap().fraction, 1.0);
    }

    #[test]
    fn regular_branches_over_a_clean_disk() {
        let c = powers(&[2, 3]);
        let center = P1Point::finite(cis(0.7) * 1.1);
        let bc = c
            .regular_branch_count(&center, 0.08, 2, 6, 4, 1000)
            .unwrap();
        assert_eq!(bc.total, 25);
        assert_eq!(bc.regular, 25);
        // A disk around a critical value loses branches.
        let bad = c
            .regular_branch_count(&P1Point::from_re_im(0.01, 0.0), 0.1, 1, 6, 4, 1000)
            .unwrap();
        assert!(bad.regular < bad.total);
    }

    #[test]
    fn json_shape() {
        let c: Chain = serde_json::from_str(
            r#"{"generators": [{"num": [[0,0],[0,0],[1,0]], "den": [[1,0]]}, {"num": [[0,0],[0,0],[0,0],[1,0]], "den": [[1,0]], "mult": 2}]}"#,
        )
        .unwrap();
        assert_eq!(
            c.degrees(),
            ChainDegrees {
                d1: 8,
                d0: 3,
                key_condition: true
            }
        );
        let again: Chain = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        assert!(serde_json::from_str::<Chain>(r#"{"generators": []}"#).is_err());
    }

    fn arb_chain() -> impl Strategy<Value = Chain> {
        let map = (
            1usize..=3,
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
        )
            .prop_filter_map("valid map", |(d, c)| {
                let cx: Vec<_> = c
                    .iter()
                    .map(|&(a, b)| num_complex::Complex64::new(a, b))
                    .collect();
                RationalMap::new(
                    crate::poly::ComplexPoly::new(cx[..=d].to_vec()),
                    crate::poly::ComplexPoly::new(cx[4..4 + d].to_vec()),
                )
                .ok()
            });
        proptest::collection::vec((map, 1u64..=2), 1..=3).prop_map(|v| {
            Chain::new(
                v.into_iter()
                    .map(|(map, mult)| Component { map, mult })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn degrees_multiply(c in arb_chain()) {
            let cc = c.then(&c).unwrap();
            prop_assert_eq!(cc.d1(), c.d1() * c.d1());
            prop_assert_eq!(cc.d0(), c.d0() * c.d0());
        }

        #[test]
        fn word_weights_sum_to_d0_power(c in arb_chain(), n in 1usize..=3) {
            let total: u64 = c.enumerate_words(n, 1000).unwrap().iter().map(|w| w.weight).sum();
            prop_assert_eq!(total, c.d0().pow(n as u32));
        }

        #[test]
        fn composition_is_associative(a in arb_chain(), b in arb_chain(), c in arb_chain()) {
            let left = a.then(&b).unwrap().then(&c).unwrap();
            let right = a.then(&b.then(&c).unwrap()).unwrap();
            prop_assert_eq!(left.d1(), right.d1());
            prop_assert_eq!(left.d0(), right.d0());
            // Same multiset of (map, multiplicity) up to reordering.
            for x in left.components() {
                let m: u64 = right.components().iter().filter(|y| y.map.approx_eq(&x.map, 1e-7)).map(|y| y.mult).sum();
                let k: u64 = left.components().iter().filter(|y| y.map.approx_eq(&x.map, 1e-7)).map(|y| y.mult).sum();
                prop_assert_eq!(m, k);
            }
        }
    }
}
