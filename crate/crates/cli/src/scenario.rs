//! Scenario files: TOML with `[potential]`, `[grid]`, `[evolve]`, `[search]`
//! and `[output]` sections and a top-level `delta0`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wpk::concentration::{HlsParams, KernelParams, ScanMode, SearchParams};
use wpk::potential::builtin;
use wpk::propagator::EvolveParams;
use wpk::{Builtin, Grid1D};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub evolve: EvolveParams,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_delta0() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub label: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self { label: "zero".into(), params: BTreeMap::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub dx: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: 2048, x_min: -20.0, dx: 40.0 / 2048.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    /// Defaults to the dyadic ladder resolved on the grid.
    pub lambda_ladder: Option<Vec<f64>>,
    /// Defaults to `δ₀/64`.
    pub t_stride: Option<f64>,
    pub max_evals: Option<usize>,
    pub refine: bool,
    /// Decomposition stops once the best correlation falls below this.
    pub stop_threshold: f64,
    pub hls_constant: f64,
    pub hls_mode: ScanMode,
    pub kernel_dt: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            lambda_ladder: None,
            t_stride: None,
            max_evals: None,
            refine: true,
            stop_threshold: 1e-3,
            hls_constant: 0.1,
            hls_mode: ScanMode::Exact,
            kernel_dt: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// `(q, r)` pairs for the mixed-norm table of `evolve`.
    pub norms: Vec<[f64; 2]>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), norms: vec![[6.0, 6.0], [8.0, 4.0]] }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            delta0: default_delta0(),
            potential: PotentialSpec::default(),
            grid: GridSpec::default(),
            evolve: EvolveParams::default(),
            search: SearchSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Time-step validity is left to the commands, so that `verify` can
    /// report a bad step as a failed check.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0 <= 1.0) {
            return Err(CliError::Config(format!("delta0 = {} must lie in (0, 1]", self.delta0)));
        }
        let p = self.potential()?;
        if let Builtin::Harmonic { omega } = p {
            let limit = PI / (2.0 * omega.abs());
            if !(self.delta0 < limit) {
                return Err(CliError::Config(format!(
                    "delta0 = {} must stay below the first focal time π/(2ω) = {limit}",
                    self.delta0
                )));
            }
        }
        self.grid()?;
        for [q, r] in &self.output.norms {
            if !(*q >= 1.0 && *r >= 1.0 && q.is_finite() && r.is_finite()) {
                return Err(CliError::Config(format!("norm pair ({q}, {r}) needs finite exponents >= 1")));
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Builtin> {
        builtin(&self.potential.label, &self.potential.params).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.n, self.grid.x_min, self.grid.dx).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn search(&self) -> Result<SearchParams> {
        let mut s = SearchParams::new(&self.grid()?, self.delta0);
        if let Some(l) = &self.search.lambda_ladder {
            s.lambda_ladder = l.clone();
        }
        if let Some(t) = self.search.t_stride {
            s.t_stride = t;
        }
        s.max_evals = self.search.max_evals;
        s.refine = self.search.refine;
        s.evolve = self.evolve;
        Ok(s)
    }

    pub fn hls(&self) -> HlsParams {
        HlsParams {
            delta0: self.delta0,
            evolve: self.evolve,
            constant: self.search.hls_constant,
            mode: self.search.hls_mode,
        }
    }

    pub fn kernel(&self) -> Result<KernelParams> {
        Ok(KernelParams { grid: self.grid()?, dt: self.search.kernel_dt, delta0: self.delta0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s, Scenario::default());
        let s = Scenario::parse(
            "delta0 = 0.25\n[potential]\nlabel = \"harmonic\"\nomega = 2.0\n[grid]\nn = 512\nx_min = -10.0\ndx = 0.04\n",
        )
        .unwrap();
        assert_eq!(s.potential().unwrap(), Builtin::harmonic(2.0));
        assert_eq!(s.grid().unwrap().n(), 512);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(Scenario::parse("delta0 = 1.5").is_err());
        assert!(Scenario::parse("[potential]\nlabel = \"quartic\"").is_err());
        assert!(Scenario::parse("delta0 = 0.9\n[potential]\nlabel = \"harmonic\"\nomega = 2.0").is_err());
        assert!(Scenario::parse("[grid]\nn = 0\nx_min = 0.0\ndx = 0.1").is_err());
        assert!(Scenario::parse("[unknown]\nx = 1").is_err());
    }
}
