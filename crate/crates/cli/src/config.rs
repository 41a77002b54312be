use std::path::Path;

use lame_dtn::geometry::{CollarData, Monomial, Polynomial, MAX_DIM};
use lame_dtn::reference::{LayeredMedium, RampProfile};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Symbols,
    Recover,
    ValidateHalfspace,
    ValidateLayered,
    Residuals,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Symbols => "symbols",
            Mode::Recover => "recover",
            Mode::ValidateHalfspace => "validate-halfspace",
            Mode::ValidateLayered => "validate-layered",
            Mode::Residuals => "residuals",
        }
    }
}

/// A polynomial in the collar coordinates, either a bare constant or a list
/// of monomials.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Constant(f64),
    Terms(Vec<Monomial>),
}

impl PolySpec {
    fn to_polynomial(&self, dim: usize, path: &str) -> Result<Polynomial, CliError> {
        match self {
            PolySpec::Constant(c) => Ok(Polynomial::constant(*c, dim)),
            PolySpec::Terms(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if t.powers.len() != dim {
                        return Err(CliError::config(
                            format!("{path}[{i}].powers"),
                            format!("expected {dim} exponents, found {}", t.powers.len()),
                        ));
                    }
                    if !t.coeff.is_finite() {
                        return Err(CliError::config(format!("{path}[{i}].coeff"), "not finite"));
                    }
                }
                Ok(Polynomial {
                    terms: terms.clone(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LameSpec {
    pub lambda: PolySpec,
    pub mu: PolySpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub lambda: RampProfile,
    pub mu: RampProfile,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LamePair {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    #[serde(default)]
    pub samples: Vec<LamePair>,
    /// Additional random admissible pairs and covectors drawn from `seed`.
    #[serde(default)]
    pub random_pairs: usize,
    #[serde(default)]
    pub random_xi: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayeredSpec {
    /// Unit covector direction; frequencies are scaled copies.
    pub direction: Vec<f64>,
    pub xi_norms: Vec<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_rtol() -> f64 {
    1e-12
}

fn default_atol() -> f64 {
    1e-13
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSpec {
    pub m_max: usize,
}

impl Default for RecoverSpec {
    fn default() -> Self {
        RecoverSpec { m_max: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub principal: f64,
    pub sylvester: f64,
    pub residual: f64,
    pub two_route: f64,
    pub hermitian: f64,
    pub halfspace: f64,
    pub recovery: f64,
    pub xi_independence: f64,
    pub slope_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            principal: 1e-12,
            sylvester: 1e-11,
            residual: 1e-10,
            two_route: 1e-11,
            hermitian: 1e-13,
            halfspace: 1e-10,
            recovery: 1e-8,
            xi_independence: 1e-9,
            slope_slack: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub report: String,
    pub csv: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            report: "report.json".into(),
            csv: "decay.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub dim: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
    #[serde(default)]
    pub xi: Vec<Vec<f64>>,
    /// Tangential metric table; Euclidean when absent.
    #[serde(default)]
    pub metric: Option<Vec<Vec<PolySpec>>>,
    #[serde(default)]
    pub lame: Option<LameSpec>,
    #[serde(default)]
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub recover: RecoverSpec,
    #[serde(default)]
    pub halfspace: Option<HalfspaceSpec>,
    #[serde(default)]
    pub layered: Option<LayeredSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_order() -> usize {
    6
}

fn default_depth() -> usize {
    3
}

/// A parsed config with its canonical JSON form.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub canonical: serde_json::Value,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("<file>", format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let canonical: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("<document>", e.to_string()))?;
    let config: ExperimentConfig = serde_path_to_error::deserialize(&canonical)
        .map_err(|e| CliError::config(e.path().to_string(), e.inner().to_string()))?;
    Ok(LoadedConfig { config, canonical })
}

impl ExperimentConfig {
    /// Structural checks shared by all modes, then the mode's own inputs.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::config(
                    "mode",
                    format!("config is for {}, invoked as {}", m.name(), mode.name()),
                ));
            }
        }
        if !(2..=MAX_DIM).contains(&self.dim) {
            return Err(CliError::config("dim", format!("must be in 2..={MAX_DIM}")));
        }
        if self.depth == 0 {
            return Err(CliError::config("depth", "must be positive"));
        }
        if self.order < self.depth + 2 {
            return Err(CliError::config(
                "order",
                format!("jet order {} < depth + 2 = {}", self.order, self.depth + 2),
            ));
        }
        if let Some(b) = &self.base_point {
            if b.len() != self.dim || b.iter().any(|x| !x.is_finite()) {
                return Err(CliError::config(
                    "base_point",
                    format!("need {} finite entries", self.dim),
                ));
            }
        }
        for (i, xi) in self.xi.iter().enumerate() {
            check_covector(xi, self.dim, &format!("xi[{i}]"))?;
        }
        match mode {
            Mode::Symbols | Mode::Residuals | Mode::Recover => {
                if self.xi.is_empty() {
                    return Err(CliError::config("xi", "at least one covector is required"));
                }
                if self.lame.is_none() {
                    return Err(CliError::config("lame", "required for this mode"));
                }
                self.collar(&self.xi[0])?;
                if mode == Mode::Recover && self.order < self.recover.m_max + 3 {
                    return Err(CliError::config(
                        "recover.m_max",
                        format!("needs jet order at least {}", self.recover.m_max + 3),
                    ));
                }
            }
            Mode::ValidateHalfspace => {
                let h = self
                    .halfspace
                    .as_ref()
                    .ok_or_else(|| CliError::config("halfspace", "required for this mode"))?;
                for (i, s) in h.samples.iter().enumerate() {
                    if !(s.mu > 0.0) || s.lambda + s.mu < -1e-12 * s.mu {
                        return Err(CliError::config(
                            format!("halfspace.samples[{i}]"),
                            "inadmissible: need mu > 0 and lambda + mu >= 0",
                        ));
                    }
                }
                if h.samples.len() + h.random_pairs == 0 {
                    return Err(CliError::config("halfspace.samples", "no Lame pairs given"));
                }
                if self.xi.len() + h.random_xi == 0 {
                    return Err(CliError::config("xi", "no covectors given"));
                }
            }
            Mode::ValidateLayered => {
                let p = self
                    .profile
                    .ok_or_else(|| CliError::config("profile", "required for this mode"))?;
                self.medium_of(&p)
                    .validate()
                    .map_err(|e| CliError::config("profile", e.to_string()))?;
                let l = self
                    .layered
                    .as_ref()
                    .ok_or_else(|| CliError::config("layered", "required for this mode"))?;
                check_covector(&l.direction, self.dim, "layered.direction")?;
                if l.xi_norms.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
                    return Err(CliError::config("layered.xi_norms", "must be positive"));
                }
                if l.xi_norms.len() < 5 {
                    return Err(CliError::config(
                        "layered.xi_norms",
                        "at least 5 frequencies are needed",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.base_point
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dim])
    }

    fn metric_table(&self) -> Result<Vec<Vec<Polynomial>>, CliError> {
        let m = self.dim - 1;
        match &self.metric {
            None => Ok((0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| Polynomial::constant(if i == j { 1.0 } else { 0.0 }, self.dim))
                        .collect()
                })
                .collect()),
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(CliError::config(
                        "metric",
                        format!("expected a {m}x{m} table"),
                    ));
                }
                rows.iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, p)| p.to_polynomial(self.dim, &format!("metric[{i}][{j}]")))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// Collar data at the configured base point probed along `xi`.
    pub fn collar(&self, xi: &[f64]) -> Result<CollarData, CliError> {
        let lame = self
            .lame
            .as_ref()
            .ok_or_else(|| CliError::config("lame", "required for this mode"))?;
        let lam = lame.lambda.to_polynomial(self.dim, "lame.lambda")?;
        let mu = lame.mu.to_polynomial(self.dim, "lame.mu")?;
        let metric = self.metric_table()?;
        CollarData::from_polynomials(
            self.dim,
            self.order,
            self.base_point(),
            xi.to_vec(),
            &metric,
            &lam,
            &mu,
        )
        .map_err(|e| CliError::config("lame", e.to_string()))
    }

    pub fn medium_of(&self, p: &ProfileSpec) -> LayeredMedium {
        LayeredMedium {
            lam: p.lambda,
            mu: p.mu,
        }
    }
}

fn check_covector(xi: &[f64], dim: usize, path: &str) -> Result<(), CliError> {
    if xi.len() != dim - 1 {
        return Err(CliError::config(
            path,
            format!("expected {} components", dim - 1),
        ));
    }
    if xi.iter().any(|x| !x.is_finite()) || xi.iter().all(|&x| x == 0.0) {
        return Err(CliError::config(
            path,
            "covector must be finite and nonzero",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_reports_field_path() {
        let err = parse(r#"{"dim": 2, "lame": {"lambda": 1.0, "mu": "x"}}"#)
            .err()
            .unwrap();
        match err {
            CliError::Config { path, .. } => assert!(path.starts_with("lame.mu"), "{path}"),
            other => panic!("{other:?}"),
        }
        let err = parse(r#"{"dim": 2, "colour": 1}"#).err().unwrap();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn validation_checks_budget_and_admissibility() {
        let base = r#"{"dim": 2, "order": 4, "depth": 3, "xi": [[1.0]],
                       "lame": {"lambda": 1.0, "mu": 1.0}}"#;
        let c = parse(base).unwrap().config;
        match c.validate(Mode::Symbols) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "order"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"dim": 2, "xi": [[1.0]], "lame": {"lambda": -3.0, "mu": 1.0}}"#;
        let c = parse(bad).unwrap().config;
        assert!(matches!(
            c.validate(Mode::Symbols),
            Err(CliError::Config { .. })
        ));
        let zero = r#"{"dim": 3, "xi": [[0.0, 0.0]], "lame": {"lambda": 1.0, "mu": 1.0}}"#;
        let c = parse(zero).unwrap().config;
        match c.validate(Mode::Symbols) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "xi[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn polynomial_tables_accept_constants_and_terms() {
        let text = r#"{"dim": 2, "xi": [[1.0]], "lame": {"lambda": 1.0,
            "mu": [{"powers": [0, 0], "coeff": 1.0}, {"powers": [0, 1], "coeff": 0.2}]}}"#;
        let c = parse(text).unwrap().config;
        c.validate(Mode::Symbols).unwrap();
        let collar = c.collar(&[1.0]).unwrap();
        assert!((collar.mu().partial(1).value().re - 0.2).abs() < 1e-15);
    }
}
