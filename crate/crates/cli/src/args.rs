//! Command-line definitions.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::parse::{self, Ladder};

#[derive(Debug, Parser)]
#[command(name = "fanlab", version, about = "Boundary layers, wave-fan curves and boundary Riemann solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in models or certify one on a grid.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Boundary layer from a seed, or the seed fitted to a boundary state.
    Layer(LayerArgs),
    /// Wave-fan curve of one family.
    Wavefan(WavefanArgs),
    /// Self-similar viscous profiles along an epsilon ladder.
    Viscous(ViscousArgs),
    /// Boundary Riemann solution.
    Solve(SolveArgs),
    /// Viscous profiles against the fan and boundary layer.
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModelsAction {
    List,
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in model name.
    #[arg(long)]
    pub model: Option<String>,
    /// JSON model definition.
    #[arg(long, value_name = "PATH")]
    pub params_file: Option<PathBuf>,
    /// Extra model parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse::param)]
    pub params: Vec<(String, Value)>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub center: Option<DVector<f64>>,
    #[arg(long)]
    pub gap_c: Option<f64>,
}

impl ModelArgs {
    /// Resolved model name and parameter map; flags override the file.
    pub fn resolve(&self) -> Result<(String, BTreeMap<String, Value>), String> {
        let (mut name, mut params) = match &self.params_file {
            Some(path) => {
                let cfg = fanlab_core::models::ModelConfig::load(path)
                    .map_err(|e| format!("--params-file {}: {e}", path.display()))?;
                (Some(cfg.name.clone()), cfg.merged_params())
            }
            None => (None, BTreeMap::new()),
        };
        if let Some(m) = &self.model {
            name = Some(m.clone());
        }
        let name = name.ok_or("--model or --params-file is required")?;
        for (k, v) in &self.params {
            params.insert(k.clone(), v.clone());
        }
        if let Some(g) = self.gamma {
            params.insert("gamma".into(), json!(g));
        }
        if let Some(r) = self.radius {
            params.insert("radius".into(), json!(r));
        }
        if let Some(c) = &self.center {
            params.insert("center".into(), json!(c.as_slice()));
        }
        if let Some(c) = self.gap_c {
            params.insert("gap_c".into(), json!(c));
        }
        Ok((name, params))
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid points per axis.
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct LayerArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Far-field state.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub ubar: DVector<f64>,
    /// Layer seed S.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true, conflicts_with = "ub")]
    pub seed: Option<DVector<f64>>,
    /// Boundary state; the seed is fitted by membership.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub ub: Option<DVector<f64>>,
    /// Membership residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct WavefanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Right state U+.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub u0: DVector<f64>,
    /// 1-based family index.
    #[arg(long)]
    pub family: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub strength: f64,
    /// `envelope_engine` or `lax_oracle`.
    #[arg(long, default_value = "envelope_engine")]
    pub provider: String,
    /// Grid nodes on [0, s].
    #[arg(long, default_value_t = 1024)]
    pub nodes: usize,
    /// Picard tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ViscousArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Right state.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub u0: DVector<f64>,
    /// Boundary state.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub ub: DVector<f64>,
    /// `start:floor:xratio` or a decreasing list.
    #[arg(long, value_parser = parse::ladder)]
    pub eps: Ladder,
    /// Right end of the domain.
    #[arg(long)]
    pub xi_max: Option<f64>,
    /// Initial mesh nodes.
    #[arg(long, default_value_t = 2001)]
    pub nodes: usize,
    /// Newton tolerance on the scaled residual.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Initial state.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
    pub u0: DVector<f64>,
    /// Boundary state; repeat for independent scenarios.
    #[arg(long, value_parser = parse::vector, allow_hyphen_values = true, required = true)]
    pub ub: Vec<DVector<f64>>,
    /// `envelope_engine` or `lax_oracle`.
    #[arg(long, default_value = "envelope_engine")]
    pub provider: String,
    /// Newton tolerance on the boundary map.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Scenarios solved in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// `start:floor:xratio` or a decreasing list.
    #[arg(long, value_parser = parse::ladder)]
    pub eps: Ladder,
    /// Inner window length Z.
    #[arg(long, default_value_t = 20.0)]
    pub z_inner: f64,
    /// Right end of the viscous domain.
    #[arg(long)]
    pub xi_max: Option<f64>,
    /// Threshold on the inner distance at the smallest epsilon.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
}
