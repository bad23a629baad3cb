//! Network architectures and the modules they decompose into.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{BlockLayout, DatasetParams};
use crate::error::{Error, Result};

/// Serialised as its display form, e.g. `"dense"` or `"imperfect:1:2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Architecture {
    Dense,
    Shallow,
    OutputPartitioned,
    FullyPartitioned,
    ImperfectPartition { k_y_left: usize, k_y_right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Depth {
    Shallow,
    #[default]
    Deep,
}

/// The dataset a single module effectively trains on.
///
/// `comp_in` is the number of sign-pattern input rows the module sees (either
/// `n_x` or 0), `comp_out` the number of pattern output rows it writes, and
/// `k_x`/`k_y` the identity blocks on either side. `patterns` is always the
/// full example count `2^n_x`, even for modules that see no pattern rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleShape {
    pub comp_in: usize,
    pub comp_out: usize,
    pub k_x: usize,
    pub k_y: usize,
    pub r: f64,
    pub patterns: usize,
}

impl ModuleShape {
    pub fn from_params(p: &DatasetParams) -> Self {
        ModuleShape {
            comp_in: p.n_x,
            comp_out: p.n_y,
            k_x: p.k_x,
            k_y: p.k_y,
            r: p.r,
            patterns: p.patterns(),
        }
    }

    /// Rank of the module's input-output covariance.
    pub fn io_rank(&self) -> usize {
        let mut rank = self.comp_out;
        if self.k_y > 0 {
            rank += self.comp_in - self.comp_out;
            if self.k_x > 0 {
                rank += self.patterns - self.comp_in;
            }
        }
        rank
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSpec {
    pub name: &'static str,
    pub input_rows: Range<usize>,
    pub output_rows: Range<usize>,
    pub shape: ModuleShape,
}

impl Architecture {
    pub fn validate(&self, params: &DatasetParams) -> Result<()> {
        if let Architecture::ImperfectPartition { k_y_left, k_y_right } = *self {
            if k_y_left + k_y_right != params.k_y {
                return Err(Error::param(
                    "architecture",
                    format!(
                        "imperfect partition {k_y_left}+{k_y_right} does not sum to k_y = {}",
                        params.k_y
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn is_modular(&self) -> bool {
        !matches!(self, Architecture::Dense | Architecture::Shallow)
    }

    /// Splits the network into modules over the given row layout. Modules
    /// that would see no inputs or produce no outputs are omitted.
    pub fn modules(&self, params: &DatasetParams, layout: &BlockLayout) -> Result<Vec<ModuleSpec>> {
        self.validate(params)?;
        let p = params.patterns();
        let all_in = 0..layout.input_dim();
        let comp_in = layout.comp_input_rows.len();
        let base = ModuleShape {
            comp_in,
            comp_out: params.n_y,
            k_x: params.k_x,
            k_y: params.k_y,
            r: params.r,
            patterns: p,
        };

        let mut out = Vec::new();
        let mut push = |name, input_rows: Range<usize>, output_rows: Range<usize>, shape| {
            if !input_rows.is_empty() && !output_rows.is_empty() {
                out.push(ModuleSpec {
                    name,
                    input_rows,
                    output_rows,
                    shape,
                });
            }
        };

        match *self {
            Architecture::Dense | Architecture::Shallow => {
                push("dense", all_in, 0..layout.output_dim(), base);
            }
            Architecture::OutputPartitioned => {
                push(
                    "compositional",
                    all_in.clone(),
                    layout.comp_output_rows.clone(),
                    ModuleShape { k_y: 0, ..base },
                );
                push(
                    "non-compositional",
                    all_in,
                    layout.noncomp_output_rows.clone(),
                    ModuleShape { comp_out: 0, ..base },
                );
            }
            Architecture::FullyPartitioned => {
                push(
                    "compositional",
                    layout.comp_input_rows.clone(),
                    layout.comp_output_rows.clone(),
                    ModuleShape { k_x: 0, k_y: 0, ..base },
                );
                push(
                    "non-compositional",
                    layout.noncomp_input_rows.clone(),
                    layout.noncomp_output_rows.clone(),
                    ModuleShape {
                        comp_in: 0,
                        comp_out: 0,
                        ..base
                    },
                );
            }
            Architecture::ImperfectPartition { k_y_left, k_y_right } => {
                let split = layout.comp_output_rows.end + k_y_left * p;
                push("left", all_in.clone(), 0..split, ModuleShape { k_y: k_y_left, ..base });
                push(
                    "right",
                    all_in,
                    split..layout.output_dim(),
                    ModuleShape {
                        comp_out: 0,
                        k_y: k_y_right,
                        ..base
                    },
                );
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Dense => f.write_str("dense"),
            Architecture::Shallow => f.write_str("shallow"),
            Architecture::OutputPartitioned => f.write_str("output-partitioned"),
            Architecture::FullyPartitioned => f.write_str("fully-partitioned"),
            Architecture::ImperfectPartition { k_y_left, k_y_right } => {
                write!(f, "imperfect:{k_y_left}:{k_y_right}")
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    /// Accepts `dense`, `shallow`, `output-partitioned`, `fully-partitioned`
    /// and `imperfect:<k_y_left>:<k_y_right>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("arch", format!("unrecognised architecture `{s}`"));
        match s {
            "dense" => Ok(Architecture::Dense),
            "shallow" => Ok(Architecture::Shallow),
            "output-partitioned" => Ok(Architecture::OutputPartitioned),
            "fully-partitioned" => Ok(Architecture::FullyPartitioned),
            _ => {
                let rest = s.strip_prefix("imperfect:").ok_or_else(bad)?;
                let (l, r) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Architecture::ImperfectPartition {
                    k_y_left: l.parse().map_err(|_| bad())?,
                    k_y_right: r.parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}
