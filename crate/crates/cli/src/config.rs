use std::path::{Path, PathBuf};

use collbreak::analysis::{DiracPlacement, GridFamily};
use collbreak::{BoundaryRule, Grid, GridKind, IntegratorConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Vam,
    Midpoint,
    Fpt,
    Vam2d,
}

impl SchemeName {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Vam => "vam",
            SchemeName::Midpoint => "midpoint",
            SchemeName::Fpt => "fpt",
            SchemeName::Vam2d => "vam2d",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    #[default]
    MonodisperseTopCell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub family: GridKind,
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub seed: Option<u64>,
    /// Width ratio bound for random grids.
    pub max_ratio: f64,
    /// Geometric ratio; when set the cell count follows from it.
    pub ratio: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            family: GridKind::Geometric,
            x_min: 1e-9,
            x_max: 1.0,
            cells: 30,
            seed: None,
            max_ratio: 4.0,
            ratio: None,
        }
    }
}

impl GridConfig {
    pub fn check(&self, axis: &str) -> Result<(), CliError> {
        let random = self.family == GridKind::Random;
        if random && self.seed.is_none() {
            return Err(CliError::Config(format!("{axis}: random grids need a seed")));
        }
        if !random && self.seed.is_some() {
            return Err(CliError::Config(format!(
                "{axis}: a seed is only meaningful for random grids, not {}",
                self.family
            )));
        }
        if self.ratio.is_some() && self.family != GridKind::Geometric {
            return Err(CliError::Config(format!("{axis}: `ratio` applies to geometric grids only")));
        }
        Ok(())
    }

    pub fn family(&self) -> GridFamily {
        GridFamily {
            kind: self.family,
            x_min: self.x_min,
            x_max: self.x_max,
            seed: self.seed,
            max_ratio: self.max_ratio,
        }
    }

    pub fn build(&self, axis: &str) -> Result<Grid, CliError> {
        self.check(axis)?;
        let grid = match self.ratio {
            Some(r) => Grid::geometric_with_ratio(self.x_min, self.x_max, r),
            None => self.family().build(self.cells),
        };
        Ok(grid?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EocConfig {
    pub doublings: u32,
    pub families: Vec<GridKind>,
    pub placement: DiracPlacement,
    pub force_refined: bool,
}

impl Default for EocConfig {
    fn default() -> Self {
        EocConfig {
            doublings: 4,
            families: vec![
                GridKind::Geometric,
                GridKind::Uniform,
                GridKind::LocallyUniform,
                GridKind::Random,
            ],
            placement: DiracPlacement::default(),
            force_refined: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: u8,
    pub scheme: SchemeName,
    pub kernel: String,
    pub grid: GridConfig,
    /// Second axis in 2D; the first axis is reused when absent.
    pub grid2: Option<GridConfig>,
    pub integrator: IntegratorConfig,
    pub boundary_rule: BoundaryRule,
    pub initial_condition: InitialCondition,
    pub output_dir: Option<PathBuf>,
    pub eoc: EocConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 1,
            scheme: SchemeName::Vam,
            kernel: "product_xy/binary_2_over_y".into(),
            grid: GridConfig::default(),
            grid2: None,
            integrator: IntegratorConfig::default(),
            boundary_rule: BoundaryRule::default(),
            initial_condition: InitialCondition::default(),
            output_dir: None,
            eoc: EocConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the command-line seed to every random axis.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        let Some(seed) = seed else { return };
        if self.grid.family == GridKind::Random {
            self.grid.seed = Some(seed);
        }
        if let Some(g) = self.grid2.as_mut() {
            if g.family == GridKind::Random {
                g.seed = Some(seed);
            }
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        match (self.dimension, self.scheme) {
            (1, SchemeName::Vam2d) => Err(CliError::Config("scheme vam2d needs dimension 2".into())),
            (2, SchemeName::Vam2d) | (1, _) => Ok(()),
            (2, s) => Err(CliError::Config(format!("scheme {s:?} is one-dimensional; use vam2d"))),
            (d, _) => Err(CliError::Config(format!("dimension must be 1 or 2, got {d}"))),
        }?;
        self.integrator.validate()?;
        Ok(())
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
