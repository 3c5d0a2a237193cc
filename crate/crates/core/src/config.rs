//! Run configuration and the parsers for untrusted text input.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correspondence::{Chain, Component};
use crate::error::{Error, Result};
use crate::poly::ComplexPoly;
use crate::rational::RationalMap;
use crate::sphere::P1Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Degrees,
    Compose,
    Pullback,
    Repelling,
    Compare,
    ShrinkProbe,
    BranchBound,
    Dimension,
    Bound,
    Render,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Degrees => "degrees",
            Command::Compose => "compose",
            Command::Pullback => "pullback",
            Command::Repelling => "repelling",
            Command::Compare => "compare",
            Command::ShrinkProbe => "shrink-probe",
            Command::BranchBound => "branch-bound",
            Command::Dimension => "dimension",
            Command::Bound => "bound",
            Command::Render => "render",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PullbackMode {
    Exact,
    Sample,
}

/// Which two measures `compare` puts side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparePair {
    RepellingExact,
    SampleExact,
    RepellingSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSpec {
    Repelling,
    Pullback,
    CircleAnalytic,
}

/// A point as written in the config; kept verbatim so that re-serializing
/// the config reproduces it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inf: bool,
}

impl PointSpec {
    pub fn point(&self, field: &str) -> Result<P1Point> {
        if self.inf {
            return Ok(P1Point::INFINITY);
        }
        if !(self.re.is_finite() && self.im.is_finite()) {
            return Err(Error::config(field, "coordinates must be finite"));
        }
        Ok(P1Point::from_re_im(self.re, self.im))
    }
}

/// One generator as written in the config: coefficient pairs, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub num: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub den: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mult: Option<u64>,
}

fn poly_from_pairs(field: &str, pairs: &[[f64; 2]]) -> Result<ComplexPoly> {
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::config(field, "coefficients must be finite"));
    }
    Ok(ComplexPoly::new(
        pairs
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect(),
    ))
}

impl GeneratorSpec {
    pub fn component(&self, j: usize) -> Result<Component> {
        let field = format!("generators[{j}]");
        let num = poly_from_pairs(&field, &self.num)?;
        let den = match &self.den {
            Some(d) => poly_from_pairs(&field, d)?,
            None => ComplexPoly::one(),
        };
        let map = RationalMap::new(num, den).map_err(|e| Error::config(&field, e.to_string()))?;
        let mult = self.mult.unwrap_or(1);
        if mult == 0 {
            return Err(Error::config(
                format!("{field}.mult"),
                "multiplicity must be positive",
            ));
        }
        Ok(Component { map, mult })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

/// Everything a run needs. Unset optional fields are omitted on output, so
/// serializing a parsed config and parsing it again is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Caps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PullbackMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<PointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<PointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Affine window `[re_min, re_max, im_min, im_max]` for `render`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<ComparePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    /// Second chain for `compose`; the chain is composed with itself otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub then: Option<Vec<GeneratorSpec>>,
    /// Measure CSV rendered instead of a fresh pullback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

fn positive<T: PartialOrd + Default + Copy>(field: &str, v: Option<T>) -> Result<()> {
    match v {
        Some(x) if x <= T::default() => Err(Error::config(field, "must be positive")),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn minimal(generators: Vec<GeneratorSpec>, command: Command) -> Self {
        RunConfig {
            generators,
            command: Some(command),
            n: None,
            seed: None,
            caps: None,
            out: None,
            mode: None,
            count: None,
            grid: None,
            scales: None,
            k_max: None,
            l: None,
            w0: None,
            depth: None,
            radius: None,
            center: None,
            samples: None,
            epsilon: None,
            window: None,
            resolution: None,
            workers: None,
            pair: None,
            source: None,
            then: None,
            input: None,
        }
    }

    /// Canonical pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chain(&self) -> Result<Chain> {
        chain_from_specs(&self.generators)
    }

    pub fn caps(&self) -> Caps {
        self.caps.unwrap_or_default()
    }

    /// The command, or a config error naming the field.
    pub fn command(&self) -> Result<Command> {
        self.command
            .ok_or_else(|| Error::config("command", "missing"))
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::config("n", "required for this command"))
    }

    pub fn require_seed(&self, why: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::config("seed", format!("required {why}")))
    }

    pub fn center(&self) -> Result<Option<P1Point>> {
        self.center.map(|c| c.point("center")).transpose()
    }

    pub fn mode(&self) -> PullbackMode {
        self.mode.unwrap_or(PullbackMode::Exact)
    }

    /// Base point: the configured `w0`, else `random_point(seed)`.
    pub fn base_point(&self) -> Result<P1Point> {
        match self.w0 {
            Some(w) => w.point("w0"),
            None => Ok(crate::sphere::random_point(
                self.require_seed("when w0 is not given")?,
            )),
        }
    }

    /// Structural checks that do not depend on the command's numerics.
    pub fn validate(&self) -> Result<()> {
        self.chain()?;
        if let Some(then) = &self.then {
            chain_from_specs(then).map_err(|e| Error::config("then", e.to_string()))?;
        }
        if let Some(w) = &self.w0 {
            w.point("w0")?;
        }
        if let Some(c) = &self.center {
            c.point("center")?;
        }
        let caps = self.caps();
        positive("caps.atoms", caps.atoms)?;
        positive("caps.words", caps.words)?;
        positive("caps.degree", caps.degree)?;
        positive("count", self.count)?;
        positive("samples", self.samples)?;
        positive("k_max", self.k_max)?;
        positive("l", self.l)?;
        positive("resolution", self.resolution)?;
        positive("workers", self.workers)?;
        if matches!(self.grid, Some(g) if g < 2) {
            return Err(Error::config("grid", "must be at least 2"));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::config("radius", "must lie in (0, 1)"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::config("epsilon", "must lie in [0, 1)"));
            }
        }
        if let Some(s) = &self.scales {
            if s.len() < 4 || s.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
                return Err(Error::config(
                    "scales",
                    "need at least 4 scales in (0, 0.5)",
                ));
            }
        }
        if let Some([a, b, c, d]) = self.window {
            if !(a < b && c < d) || [a, b, c, d].iter().any(|x| !x.is_finite()) {
                return Err(Error::config(
                    "window",
                    "need re_min < re_max and im_min < im_max",
                ));
            }
        }
        let cmd = self.command()?;
        let sampling = match cmd {
            Command::Pullback => self.mode() == PullbackMode::Sample,
            Command::Compare => {
                self.pair.unwrap_or(ComparePair::RepellingExact) != ComparePair::RepellingExact
            }
            Command::ShrinkProbe => true,
            _ => false,
        };
        if sampling {
            self.require_seed("for sampling commands")?;
        }
        if sampling && cmd != Command::ShrinkProbe && self.count.is_none() {
            return Err(Error::config("count", "required for sampling"));
        }
        if cmd == Command::ShrinkProbe && self.depth.is_none() {
            return Err(Error::config("depth", "required for shrink-probe"));
        }
        Ok(())
    }
}

pub fn chain_from_specs(specs: &[GeneratorSpec]) -> Result<Chain> {
    if specs.is_empty() {
        return Err(Error::config(
            "generators",
            "at least one generator is required",
        ));
    }
    let comps = specs
        .iter()
        .enumerate()
        .map(|(j, g)| g.component(j))
        .collect::<Result<Vec<_>>>()?;
    Chain::new(comps).map_err(|e| Error::config("generators", e.to_string()))
}

/// Maps a serde error onto a config error naming the offending field when
/// serde reports one.
fn config_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = ["missing field `", "unknown field `", "duplicate field `"]
        .iter()
        .find_map(|p| msg.split(p).nth(1).and_then(|rest| rest.split('`').next()))
        .unwrap_or("config")
        .to_string();
    Error::Config {
        field,
        message: msg,
    }
}

/// Parses a run configuration without validating it, so that command-line
/// overrides can still fill in fields.
pub fn parse_run_config_unchecked(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(config_error)
}

/// Parses and validates a run configuration.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg = parse_run_config_unchecked(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `{"generators": [...]}`.
pub fn parse_chain(text: &str) -> Result<Chain> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        generators: Vec<GeneratorSpec>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(config_error)?;
    chain_from_specs(&raw.generators)
}

/// Parses `{"num": [...], "den": [...]}`.
pub fn parse_map(text: &str) -> Result<RationalMap> {
    let g: GeneratorSpec = serde_json::from_str(text).map_err(config_error)?;
    Ok(g.component(0)?.map)
}

/// Parses a coefficient list `[[re, im], ...]`, lowest degree first.
pub fn parse_poly(text: &str) -> Result<ComplexPoly> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text).map_err(config_error)?;
    poly_from_pairs("poly", &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S23: &str = r#"{"generators": [{"num": [[0,0],[0,0],[1,0]]}, {"num": [[0,0],[0,0],[0,0],[1,0]]}], "command": "degrees"}"#;

    #[test]
    fn parses_and_builds_chain() {
        let cfg = parse_run_config(S23).unwrap();
        let c = cfg.chain().unwrap();
        assert_eq!((c.d1(), c.d0()), (5, 2));
        assert_eq!(cfg.command().unwrap(), Command::Degrees);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let full = r#"{"generators": [{"num": [[0.1,-2.5e-7],[1,0]], "den": [[1,0],[0.3,0.7]], "mult": 2}, {"num": [[0,0],[0,0],[1,0]]}],
            "command": "pullback", "n": 4, "seed": 1, "caps": {"atoms": 1000000, "words": 4096, "degree": 512},
            "out": "out/x", "mode": "sample", "count": 100000, "grid": 8, "scales": [0.125, 0.0625, 0.03125, 0.015625],
            "k_max": 10, "l": 2, "w0": {"re": 0.5, "im": -0.25}, "depth": 6, "radius": 0.05,
            "center": {"re": 1.2, "im": 0.0}, "samples": 200, "epsilon": 0.1,
            "window": [-1.5, 1.5, -1.5, 1.5], "resolution": 256, "workers": 3, "pair": "sample-exact",
            "source": "pullback"}"#;
        let cfg = parse_run_config(full).unwrap();
        let once = cfg.to_json();
        let again = parse_run_config(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_json(), once);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |text: &str| match parse_run_config(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(r#"{"command": "degrees"}"#), "generators");
        assert_eq!(
            field(r#"{"generators": [{"num": [[1,0],[1,0]]}], "command": "degrees", "nn": 3}"#),
            "nn"
        );
        assert_eq!(
            field(
                r#"{"generators": [{"num": [[0,0],[1,0]]}], "command": "pullback", "mode": "sample", "count": 10}"#
            ),
            "seed"
        );
        assert_eq!(
            field(
                r#"{"generators": [{"num": [[0,0],[1,0]]}], "command": "degrees", "caps": {"atoms": 0}}"#
            ),
            "caps.atoms"
        );
        assert_eq!(
            field(r#"{"generators": [{"num": [[2,0]]}], "command": "degrees"}"#),
            "generators[0]"
        );
        assert_eq!(
            field(r#"{"generators": [{"num": [[0,0],[1,0]], "mult": 0}], "command": "degrees"}"#),
            "generators[0].mult"
        );
        assert_eq!(
            field(r#"{"generators": [], "command": "degrees"}"#),
            "generators"
        );
        assert_eq!(
            field(
                r#"{"generators": [{"num": [[0,0],[1,0]]}], "command": "render", "window": [1, 0, 0, 1]}"#
            ),
            "window"
        );
        assert!(parse_run_config("not json").unwrap_err().exit_code() == 2);
    }

    #[test]
    fn small_parsers() {
        assert_eq!(
            parse_chain(r#"{"generators": [{"num": [[0,0],[0,0],[1,0]], "mult": 3}]}"#)
                .unwrap()
                .d0(),
            3
        );
        assert_eq!(
            parse_map(r#"{"num": [[1,0],[2,0]], "den": [[-1,0],[1,0]]}"#)
                .unwrap()
                .degree(),
            1
        );
        assert_eq!(parse_poly("[[1,0],[0,0],[1,0]]").unwrap().degree(), 2);
        assert!(parse_poly("[[1,0],[1e999,0]]").is_err());
        assert!(parse_map(r#"{"num": [[0,0]]}"#).is_err());
    }
}
