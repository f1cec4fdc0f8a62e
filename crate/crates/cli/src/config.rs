//! Experiment configuration: a flat sectioned TOML file, validated with
//! field-specific messages, resolved into workbench objects.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use ruelle::markovbasis::{complete_depth2_kernel, kernel_a, MarkovSpec, Word};
use ruelle::{AprioriSpace, GridFunction};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub space: SpaceSection,
    #[serde(default)]
    pub markov: Option<MarkovSection>,
    #[serde(default)]
    pub potential: Option<FunctionSection>,
    #[serde(default)]
    pub observable: Option<FunctionSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    /// "finite" or "circle".
    pub kind: String,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub n_nodes: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    /// Row-stochastic 2x2 transition matrix.
    pub p: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    /// One of: "zero", "markov-log-j", "circle-cos", "plus-minus-one",
    /// "indicator-one", "coboundary", "markov-kernel", "markov-completion",
    /// "values".
    pub preset: String,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub values_file: Option<String>,
    /// Word of 0/1 symbols for "markov-kernel".
    #[serde(default)]
    pub word: Option<String>,
    /// 0 or 1 for "markov-completion".
    #[serde(default)]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Cylinder depth for measures and reports.
    pub depth: usize,
    pub tol: f64,
    /// Window length for Birkhoff sums.
    pub n: usize,
    /// Number of Monte Carlo windows.
    pub m: usize,
    pub seed: Option<u64>,
    pub fd_step: f64,
    pub z_grid: Option<Vec<f64>>,
    /// Grid for pressure-curve.
    pub t_grid: Option<Vec<f64>>,
    pub bins: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            depth: 3,
            tol: 1e-12,
            n: 2000,
            m: 50_000,
            seed: None,
            fd_step: 1e-2,
            z_grid: None,
            t_grid: None,
            bins: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Field-by-field range validation; the first violation is reported with
    /// its field path.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |field: &str, msg: String| Err(CliError::validation(format!("{field}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return err(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        match self.space.kind.as_str() {
            "finite" => {
                match self.space.d {
                    None => return err("space.d", "required for kind = \"finite\"".into()),
                    Some(d) if d < 2 => {
                        return err("space.d", format!("must be at least 2, got {d}"))
                    }
                    _ => {}
                }
                if let Some(w) = &self.space.weights {
                    if w.len() != self.space.d.unwrap() {
                        return err(
                            "space.weights",
                            format!("expected {} entries, got {}", self.space.d.unwrap(), w.len()),
                        );
                    }
                    if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                        return err("space.weights", "all weights must be positive".into());
                    }
                }
                if self.space.n_nodes.is_some() {
                    return err("space.n_nodes", "only valid for kind = \"circle\"".into());
                }
            }
            "circle" => {
                match self.space.n_nodes {
                    None => return err("space.n_nodes", "required for kind = \"circle\"".into()),
                    Some(n) if n < 4 => {
                        return err("space.n_nodes", format!("must be at least 4, got {n}"))
                    }
                    _ => {}
                }
                if self.space.d.is_some() {
                    return err("space.d", "only valid for kind = \"finite\"".into());
                }
                if self.space.weights.is_some() {
                    return err("space.weights", "only valid for kind = \"finite\"".into());
                }
            }
            other => return err("space.kind", format!("unknown kind {other:?}")),
        }
        if let Some(markov) = &self.markov {
            for (i, row) in markov.p.iter().enumerate() {
                if row.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                    return err("markov.p", format!("row {i} has a nonpositive entry"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return err("markov.p", format!("row {i} sums to {sum}, expected 1"));
                }
            }
        }
        if self.run.depth == 0 || self.run.depth > 12 {
            return err("run.depth", format!("must be in 1..=12, got {}", self.run.depth));
        }
        if !(self.run.tol > 0.0 && self.run.tol < 1.0) {
            return err("run.tol", format!("must be in (0, 1), got {}", self.run.tol));
        }
        if self.run.n == 0 {
            return err("run.n", "window length must be positive".into());
        }
        if self.run.m == 0 {
            return err("run.m", "sample count must be positive".into());
        }
        if !(self.run.fd_step > 0.0 && self.run.fd_step < 1.0) {
            return err(
                "run.fd_step",
                format!("must be in (0, 1), got {}", self.run.fd_step),
            );
        }
        if let Some(grid) = &self.run.z_grid {
            if grid.is_empty() {
                return err("run.z_grid", "must not be empty".into());
            }
            if grid.iter().any(|z| z.abs() > 1.0) {
                return err("run.z_grid", "points must lie in [-1, 1]".into());
            }
        }
        if let Some(grid) = &self.run.t_grid {
            if grid.is_empty() {
                return err("run.t_grid", "must not be empty".into());
            }
        }
        if self.run.bins == 0 || self.run.bins > 100_000 {
            return err("run.bins", format!("must be in 1..=100000, got {}", self.run.bins));
        }
        for f in &self.output.formats {
            if f != "json" && f != "csv" {
                return err("output.formats", format!("unknown format {f:?}"));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<Arc<AprioriSpace>, CliError> {
        let space = match self.space.kind.as_str() {
            "finite" => AprioriSpace::finite_alphabet(
                self.space.d.unwrap(),
                self.space.weights.as_deref(),
            )?,
            "circle" => AprioriSpace::circle(self.space.n_nodes.unwrap())?,
            _ => unreachable!("validated"),
        };
        Ok(space)
    }

    pub fn markov_spec(&self) -> Result<Option<MarkovSpec>, CliError> {
        match &self.markov {
            Some(m) => Ok(Some(MarkovSpec::new(m.p)?)),
            None => Ok(None),
        }
    }

    /// Sampling is requested by `clt` and the Monte Carlo variance; those
    /// commands insist on an explicit seed.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.run
            .seed
            .ok_or_else(|| CliError::validation("run.seed: required when sampling".into()))
    }

    pub fn z_grid(&self) -> Vec<f64> {
        self.run
            .z_grid
            .clone()
            .unwrap_or_else(ruelle::clt::default_z_grid)
    }

    fn resolve_function(
        &self,
        section: &FunctionSection,
        field: &str,
        base_dir: &Path,
    ) -> Result<GridFunction, CliError> {
        let space = self.space()?;
        let markov = self.markov_spec()?;
        let need_markov = || -> Result<MarkovSpec, CliError> {
            markov.clone().ok_or_else(|| {
                CliError::validation(format!(
                    "{field}.preset: requires a [markov] section"
                ))
            })
        };
        let need_d2 = || -> Result<(), CliError> {
            if space.len() != 2 {
                return Err(CliError::validation(format!(
                    "{field}.preset: needs a two-symbol space"
                )));
            }
            Ok(())
        };
        let f = match section.preset.as_str() {
            "zero" => GridFunction::constant(&space, 0.0),
            "markov-log-j" => {
                let spec = need_markov()?;
                if !spec.space().same_space(&space) {
                    return Err(CliError::validation(format!(
                        "{field}.preset: markov-log-j needs the counting-mode two-symbol space \
                         (kind = \"finite\", d = 2, weights = [1.0, 1.0])"
                    )));
                }
                spec.log_j_potential()
            }
            "circle-cos" => {
                if self.space.kind != "circle" {
                    return Err(CliError::validation(format!(
                        "{field}.preset: circle-cos needs kind = \"circle\""
                    )));
                }
                GridFunction::from_evaluator(&space, 1, |w| space.node(w[0])[0].cos())?
            }
            "plus-minus-one" => {
                need_d2()?;
                GridFunction::from_values(&space, 1, vec![-1.0, 1.0])?
            }
            "indicator-one" => {
                need_d2()?;
                GridFunction::from_values(&space, 1, vec![0.0, 1.0])?
            }
            "coboundary" => {
                need_d2()?;
                let v = GridFunction::from_values(&space, 1, vec![0.6, -0.4])?;
                v.sub(&v.compose_shift(1)?)?.add_scalar(0.25)
            }
            "markov-kernel" => {
                let spec = need_markov()?;
                let text = section.word.as_deref().ok_or_else(|| {
                    CliError::validation(format!("{field}.word: required for markov-kernel"))
                })?;
                let symbols: Vec<u8> = text
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        other => Err(CliError::validation(format!(
                            "{field}.word: invalid symbol {other:?}"
                        ))),
                    })
                    .collect::<Result<_, _>>()?;
                kernel_a(&spec, &Word::new(&symbols)?)?
            }
            "markov-completion" => {
                let spec = need_markov()?;
                let idx = section.index.unwrap_or(0);
                if idx > 1 {
                    return Err(CliError::validation(format!(
                        "{field}.index: must be 0 or 1, got {idx}"
                    )));
                }
                let pair = complete_depth2_kernel(&spec)?;
                pair[idx].clone()
            }
            "values" => {
                let depth = section.depth.ok_or_else(|| {
                    CliError::validation(format!("{field}.depth: required for values"))
                })?;
                if let Some(values) = &section.values {
                    GridFunction::from_values(&space, depth, values.clone())?
                } else if let Some(file) = &section.values_file {
                    let path = base_dir.join(file);
                    let reader = std::io::BufReader::new(std::fs::File::open(&path).map_err(
                        |e| {
                            CliError::validation(format!(
                                "{field}.values_file: cannot open {}: {e}",
                                path.display()
                            ))
                        },
                    )?);
                    GridFunction::read_csv(&space, depth, reader)?
                } else {
                    return Err(CliError::validation(format!(
                        "{field}: preset \"values\" needs values or values_file"
                    )));
                }
            }
            other => {
                return Err(CliError::validation(format!(
                    "{field}.preset: unknown preset {other:?}"
                )))
            }
        };
        Ok(f)
    }

    pub fn potential(&self, base_dir: &Path) -> Result<GridFunction, CliError> {
        let section = self.potential.as_ref().ok_or_else(|| {
            CliError::validation("potential: section required for this command".into())
        })?;
        self.resolve_function(section, "potential", base_dir)
    }

    pub fn observable(&self, base_dir: &Path) -> Result<GridFunction, CliError> {
        let section = self.observable.as_ref().ok_or_else(|| {
            CliError::validation("observable: section required for this command".into())
        })?;
        self.resolve_function(section, "observable", base_dir)
    }
}
