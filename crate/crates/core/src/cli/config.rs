//! Run configuration: JSON on disk, every field defaulted, validated with
//! field paths in the error messages.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::continuation::NewtonSettings;
use crate::error::{Error, Result};
use crate::geometry::{SurfaceDescriptor, SurfaceKind, TriMesh};
use crate::spectra::{admissible_lambdas, check_sign_rule, eigenpairs, EigenPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindConfig {
    Sphere,
    ProjectivePlane,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    Fd,
    Legendre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: KindConfig,
    pub scheme: SchemeConfig,
    pub khat: f64,
    /// Grid nodes (FD) or invariant modes (Legendre).
    pub n: usize,
    pub mesh: Option<PathBuf>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig { kind: KindConfig::Sphere, scheme: SchemeConfig::Legendre, khat: 1.0, n: 32, mesh: None }
    }
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfaceDescriptor> {
        match self.kind {
            KindConfig::Mesh => {
                let path = self.mesh.as_ref().ok_or_else(|| Error::InvalidInput("surface.mesh: a mesh path is required".into()))?;
                SurfaceDescriptor::from_mesh(TriMesh::from_path(path)?, Some(self.khat))
            }
            kind => {
                let kind = if kind == KindConfig::Sphere { SurfaceKind::ZonalSphere } else { SurfaceKind::ZonalProjectivePlane };
                match self.scheme {
                    SchemeConfig::Legendre => SurfaceDescriptor::zonal_legendre(kind, self.n, self.khat),
                    SchemeConfig::Fd if kind == SurfaceKind::ZonalSphere => SurfaceDescriptor::zonal_sphere(self.n, self.khat),
                    SchemeConfig::Fd => SurfaceDescriptor::zonal_projective_plane(self.n, self.khat),
                }
            }
        }
    }
}

/// Which eigenvalue(s) to bifurcate from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSelection {
    /// The admissible discrete eigenvalue nearest this value.
    Value(f64),
    /// Position in the admissible list.
    Index(usize),
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: u32,
    pub r: f64,
    pub lambda: LambdaSelection,
    /// Eigenpairs computed when selecting λ.
    pub eigen_count: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig { p: 2, r: 1.0, lambda: LambdaSelection::Value(6.0), eigen_count: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub theta_min: f64,
    pub theta_max: f64,
    pub samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { theta_min: 0.5, theta_max: 5.0, samples: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YamabeConfig {
    pub q: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// a used for the search below the first crossing.
    pub a_below: f64,
    pub starts: usize,
    pub max_points: usize,
}

impl Default for YamabeConfig {
    fn default() -> Self {
        YamabeConfig { q: 4.0, a_min: 0.5, a_max: 10.0, a_below: 0.9, starts: 16, max_points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Directory holding x.csv, f.csv and solution.json.
    pub solution: Option<PathBuf>,
    pub full4d: bool,
    pub points: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { solution: None, full4d: false, points: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitReference {
    /// The reference closed-form constants.
    Claimed,
    /// Constants recomputed from the leading terms of Σ and Z.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub p_values: Vec<f64>,
    /// (ε, ε̃, μ, μ̃) per data set.
    pub data: Vec<[f64; 4]>,
    pub reference: LimitReference,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        IdentitiesConfig {
            p_values: vec![3.0, 4.0, 5.0, 8.0],
            data: vec![[2.0, 1.0, 0.7, -1.3], [0.5, -1.5, -2.0, 0.4]],
            reference: LimitReference::Claimed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub problem: ProblemConfig,
    pub solver: NewtonSettings,
    pub scan: ScanConfig,
    pub yamabe: YamabeConfig,
    pub verify: VerifyConfig,
    pub identities: IdentitiesConfig,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: SurfaceConfig::default(),
            problem: ProblemConfig::default(),
            solver: NewtonSettings { max_points: 24, ..NewtonSettings::default() },
            scan: ScanConfig::default(),
            yamabe: YamabeConfig::default(),
            verify: VerifyConfig::default(),
            identities: IdentitiesConfig::default(),
            output: PathBuf::from("hwarp-out"),
            seed: 1,
        }
    }
}

fn field(path: &str, ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{path}: {msg}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.surface;
        field("surface.khat", s.khat.is_finite(), "must be finite")?;
        if s.kind == KindConfig::Mesh {
            field("surface.mesh", s.mesh.is_some(), "required for a mesh surface")?;
        } else {
            field("surface.khat", s.khat > 0.0, "zonal surfaces need khat > 0")?;
            field("surface.n", s.n >= 4, "need at least 4 nodes or modes")?;
        }
        let p = &self.problem;
        field("problem.p", p.p >= 2, "must be at least 2")?;
        field("problem.r", p.r.is_finite() && p.r != 0.0, "must be finite and nonzero")?;
        check_sign_rule(p.p, p.r, s.khat).map_err(|e| Error::InvalidInput(format!("problem.r: {e}")))?;
        field("problem.eigen_count", p.eigen_count >= 2, "must be at least 2")?;
        if let LambdaSelection::Value(v) = p.lambda {
            field("problem.lambda", v.is_finite() && v > 0.0, "must be positive")?;
        }
        self.solver.validate().map_err(|e| Error::InvalidInput(format!("solver: {e}")))?;
        let sc = &self.scan;
        field("scan.theta_max", sc.theta_min.is_finite() && sc.theta_max > sc.theta_min, "must exceed scan.theta_min")?;
        field("scan.samples", sc.samples >= 2, "must be at least 2")?;
        let y = &self.yamabe;
        field("yamabe.q", y.q > 2.0, "must exceed 2")?;
        field("yamabe.a_max", y.a_max > y.a_min, "must exceed yamabe.a_min")?;
        field("verify.points", self.verify.points >= 1, "must be at least 1")?;
        field("identities.p_values", self.identities.p_values.iter().all(|p| *p > 2.0), "every p must exceed 2")?;
        Ok(())
    }

    /// Eigenpairs selected by `problem.lambda`.
    pub fn select_lambdas(&self, surface: &SurfaceDescriptor) -> Result<Vec<EigenPair>> {
        let p = &self.problem;
        let pairs = eigenpairs(surface, p.eigen_count)?;
        let adm: Vec<EigenPair> = admissible_lambdas(surface, p.p, p.r, &pairs)?.into_iter().map(|a| a.pair).collect();
        if adm.is_empty() {
            return Err(Error::Constraint("no admissible eigenvalue among the computed eigenpairs".into()));
        }
        match p.lambda {
            LambdaSelection::All => Ok(adm),
            LambdaSelection::Index(i) => adm
                .get(i)
                .cloned()
                .map(|e| vec![e])
                .ok_or_else(|| Error::InvalidInput(format!("problem.lambda: index {i} exceeds the {} admissible values", adm.len()))),
            LambdaSelection::Value(v) => {
                let best = adm
                    .iter()
                    .min_by(|a, b| (a.lambda - v).abs().total_cmp(&(b.lambda - v).abs()))
                    .cloned()
                    .unwrap();
                if (best.lambda - v).abs() > 1e-2 * v {
                    return Err(Error::InvalidInput(format!("problem.lambda: no admissible eigenvalue near {v} (nearest {})", best.lambda)));
                }
                Ok(vec![best])
            }
        }
    }
}
