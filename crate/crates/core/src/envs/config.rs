use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Ces, LocationFinding, Problem};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LocationFinding,
    Ces,
}

/// Flat problem description. Missing keys take the defaults of the chosen problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblemConfig")]
pub struct ProblemConfig {
    pub problem: ProblemKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub alpha: f64,
    pub b: f64,
    pub m: f64,
    pub sigma: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub design_lo: f64,
    pub design_hi: f64,
    #[serde(rename = "L_train")]
    pub l_train: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblemConfig {
    problem: ProblemKind,
    #[serde(rename = "K")]
    k: Option<usize>,
    d: Option<usize>,
    alpha: Option<f64>,
    b: Option<f64>,
    m: Option<f64>,
    sigma: Option<f64>,
    nu: Option<f64>,
    epsilon: Option<f64>,
    horizon: Option<usize>,
    design_lo: Option<f64>,
    design_hi: Option<f64>,
    #[serde(rename = "L_train")]
    l_train: Option<usize>,
}

impl TryFrom<RawProblemConfig> for ProblemConfig {
    type Error = Error;

    fn try_from(raw: RawProblemConfig) -> Result<Self> {
        let base = Self::defaults(raw.problem);
        let cfg = Self {
            problem: raw.problem,
            k: raw.k.unwrap_or(base.k),
            d: raw.d.unwrap_or(base.d),
            alpha: raw.alpha.unwrap_or(base.alpha),
            b: raw.b.unwrap_or(base.b),
            m: raw.m.unwrap_or(base.m),
            sigma: raw.sigma.unwrap_or(base.sigma),
            nu: raw.nu.unwrap_or(base.nu),
            epsilon: raw.epsilon.unwrap_or(base.epsilon),
            horizon: raw.horizon.unwrap_or(base.horizon),
            design_lo: raw.design_lo.unwrap_or(base.design_lo),
            design_hi: raw.design_hi.unwrap_or(base.design_hi),
            l_train: raw.l_train.unwrap_or(base.l_train),
        };
        cfg.build()?;
        Ok(cfg)
    }
}

impl ProblemConfig {
    pub fn defaults(problem: ProblemKind) -> Self {
        let location = problem == ProblemKind::LocationFinding;
        Self {
            problem,
            k: 2,
            d: 2,
            alpha: 1.0,
            b: 0.1,
            m: 1e-4,
            sigma: 0.5,
            nu: 0.005,
            epsilon: 2f64.powi(-22),
            horizon: if location { 30 } else { 10 },
            design_lo: if location { -4.0 } else { 0.0 },
            design_hi: if location { 4.0 } else { 100.0 },
            l_train: 100_000,
        }
    }

    pub fn location_finding() -> Self {
        Self::defaults(ProblemKind::LocationFinding)
    }

    pub fn ces() -> Self {
        Self::defaults(ProblemKind::Ces)
    }

    pub fn build(&self) -> Result<Problem> {
        if self.l_train == 0 {
            return invalid("L_train must be >= 1");
        }
        Ok(match self.problem {
            ProblemKind::LocationFinding => Problem::Location(LocationFinding::new(
                self.k,
                self.d,
                self.alpha,
                self.b,
                self.m,
                self.sigma,
                self.horizon,
                self.design_lo,
                self.design_hi,
            )?),
            ProblemKind::Ces => {
                Problem::Ces(Ces::new(self.nu, self.epsilon, self.horizon, self.design_lo, self.design_hi)?)
            }
        })
    }

    /// The evaluation problem under an override. Policy input and output
    /// dimensions, and the observation scaling, match the training problem.
    pub fn build_with(&self, ov: &Override) -> Result<Problem> {
        let base = self.build()?;
        match (ov, base) {
            (Override::None, p) => Ok(p),
            (Override::K(k), Problem::Location(p)) => Ok(Problem::Location(p.with_sources(*k)?)),
            (Override::Nu(nu), Problem::Ces(p)) => Ok(Problem::Ces(p.with_nu(*nu)?)),
            (ov, p) => invalid(format!("override {ov} does not apply to the {} problem", crate::envs::DesignProblem::name(&p))),
        }
    }
}

/// Evaluation-time model change used to probe generalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Override {
    None,
    K(usize),
    Nu(f64),
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Override::None => write!(f, "none"),
            Override::K(k) => write!(f, "K={k}"),
            Override::Nu(nu) => write!(f, "nu={nu}"),
        }
    }
}

impl Override {
    /// Parses `k=1,2,3` or `nu=0.005,0.01`.
    pub fn parse_list(spec: &str) -> Result<Vec<Override>> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override '{spec}' is not of the form key=v1,v2")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return invalid(format!("override '{spec}' lists no values"));
        }
        let bad = |v: &str| Error::InvalidArgument(format!("cannot parse '{v}' in override '{spec}'"));
        match key.trim().to_ascii_lowercase().as_str() {
            "k" => values.iter().map(|v| v.parse().map(Override::K).map_err(|_| bad(v))).collect(),
            "nu" => values.iter().map(|v| v.parse().map(Override::Nu).map_err(|_| bad(v))).collect(),
            other => invalid(format!("unknown override key '{other}' (expected k or nu)")),
        }
    }
}
