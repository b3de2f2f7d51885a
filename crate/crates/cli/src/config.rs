//! Experiment configuration: the declarative description of a pipeline run.
//!
//! - A pipeline is an ordered subset of the canonical stage list
//!   `gen → cone → deelectrify → factor-check → prox-close → promote →
//!   hhs-verify`, closed under stage dependencies: every stage a listed
//!   stage consumes must itself be listed earlier.
//! - Each stage reads one optional parameter block; blocks for stages not
//!   in the pipeline are rejected, and unknown fields anywhere are errors,
//!   so a config that parses and validates runs exactly as written.
//! - Validation is total before execution: parameter shapes, cross-stage
//!   compatibility (coset families need a presentation, fixture members
//!   need the star), and dependency closure are all checked up front so a
//!   run never dies halfway through on a config mistake.

use std::collections::BTreeSet;
use std::fmt;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

/// The canonical pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Gen,
    Cone,
    Deelectrify,
    FactorCheck,
    ProxClose,
    Promote,
    HhsVerify,
}

impl Stage {
    /// Stages whose outputs this stage consumes.
    pub fn needs(self) -> &'static [Stage] {
        match self {
            Stage::Gen => &[],
            Stage::Cone => &[Stage::Gen],
            Stage::Deelectrify => &[Stage::Cone],
            Stage::FactorCheck => &[Stage::Cone],
            Stage::ProxClose => &[Stage::Gen],
            Stage::Promote => &[Stage::ProxClose],
            Stage::HhsVerify => &[Stage::Promote],
        }
    }

    /// File name of the stage's JSON artifact.
    pub fn artifact_name(self) -> &'static str {
        match self {
            Stage::Gen => "gen.json",
            Stage::Cone => "cone.json",
            Stage::Deelectrify => "deelectrify.json",
            Stage::FactorCheck => "factor-check.json",
            Stage::ProxClose => "prox-close.json",
            Stage::Promote => "promote.json",
            Stage::HhsVerify => "hhs-verify.json",
        }
    }

    /// Kebab-case name as it appears in configs and file names.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Cone => "cone",
            Stage::Deelectrify => "deelectrify",
            Stage::FactorCheck => "factor-check",
            Stage::ProxClose => "prox-close",
            Stage::Promote => "promote",
            Stage::HhsVerify => "hhs-verify",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the `gen` stage builds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenParams {
    /// A Cayley ball of the given radius for a finite presentation.
    Presentation {
        generators: Vec<String>,
        #[serde(default)]
        rules: Vec<(String, String)>,
        radius: usize,
    },
    /// The star fixture: `rays` arms of length `ray_length` around a spoke.
    Star { rays: usize, ray_length: usize },
}

/// Which family the `cone` stage cones off.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConeParams {
    /// Every coset of the listed subgroups meeting the ball core. Requires
    /// a presentation host; `margin` defaults to the family's own scale.
    Cosets {
        subgroups: Vec<Vec<String>>,
        #[serde(default)]
        margin: Option<u32>,
    },
    /// The star fixture's named members. Requires a star host.
    Members,
}

/// De-electrification sampling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeelectParams {
    /// Number of endpoint pairs sampled from the core.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub mode: SurgeryMode,
}

impl Default for DeelectParams {
    fn default() -> Self {
        DeelectParams { samples: default_samples(), mode: SurgeryMode::Total }
    }
}

/// Which de-electrification the surgery produces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SurgeryMode {
    #[default]
    Total,
    Embedded,
}

/// Which factor-system check runs and on which members.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCheckParams {
    #[serde(default)]
    pub mode: CheckMode,
    /// Restrict the check to the named members (star hosts only); `None`
    /// checks the whole coned family.
    #[serde(default)]
    pub members: Option<Vec<String>>,
    /// Diameter cutoff for the weak condition (3) scan.
    #[serde(default = "default_theta")]
    pub theta_max: u32,
}

impl Default for FactorCheckParams {
    fn default() -> Self {
        FactorCheckParams { mode: CheckMode::Weak, members: None, theta_max: default_theta() }
    }
}

/// Weak checks conditions (1)-(4); factor additionally requires the
/// intersection-closure condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    #[default]
    Weak,
    Factor,
}

/// Proximal-closure parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxCloseParams {
    /// Seed subgroups as lists of generating words.
    pub subgroups: Vec<Vec<String>>,
    /// Abort threshold on the closure's height probe.
    #[serde(default = "default_height_cap")]
    pub height_cap: u32,
}

/// Promotion parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromoteParams {
    /// Diameter cutoff handed to the weak check of the closed family.
    #[serde(default = "default_theta")]
    pub theta_max: u32,
}

impl Default for PromoteParams {
    fn default() -> Self {
        PromoteParams { theta_max: default_theta() }
    }
}

/// Axiom-verification parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HhsVerifyParams {
    /// Target number of sampled pairs per geodesic-driven check.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl Default for HhsVerifyParams {
    fn default() -> Self {
        HhsVerifyParams { budget: default_budget() }
    }
}

fn default_samples() -> usize {
    16
}
fn default_theta() -> u32 {
    8
}
fn default_height_cap() -> u32 {
    4
}
fn default_budget() -> usize {
    128
}
fn default_seed() -> u64 {
    1
}

/// A full experiment: the stage list plus one parameter block per stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Vec<Stage>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub gen: Option<GenParams>,
    #[serde(default)]
    pub cone: Option<ConeParams>,
    #[serde(default)]
    pub deelectrify: Option<DeelectParams>,
    #[serde(default, rename = "factor-check")]
    pub factor_check: Option<FactorCheckParams>,
    #[serde(default, rename = "prox-close")]
    pub prox_close: Option<ProxCloseParams>,
    #[serde(default)]
    pub promote: Option<PromoteParams>,
    #[serde(default, rename = "hhs-verify")]
    pub hhs_verify: Option<HhsVerifyParams>,
}

impl ExperimentConfig {
    /// Check the whole config before anything runs: stage order, dependency
    /// closure, required parameter blocks, and cross-stage compatibility.
    pub fn validate(&self) -> Result<()> {
        if self.pipeline.is_empty() {
            bail!("pipeline lists no stages");
        }
        let mut seen = BTreeSet::new();
        for pair in self.pipeline.windows(2) {
            if pair[1] <= pair[0] {
                bail!("pipeline stages out of order: {} before {}", pair[0], pair[1]);
            }
        }
        for &stage in &self.pipeline {
            for &dep in stage.needs() {
                if !seen.contains(&dep) {
                    bail!("stage {stage} needs {dep} earlier in the pipeline");
                }
            }
            seen.insert(stage);
        }

        let has = |s: Stage| self.pipeline.contains(&s);
        if has(Stage::Gen) && self.gen.is_none() {
            bail!("stage gen listed but no `gen` parameters given");
        }
        if has(Stage::Cone) && self.cone.is_none() {
            bail!("stage cone listed but no `cone` parameters given");
        }
        if has(Stage::ProxClose) && self.prox_close.is_none() {
            bail!("stage prox-close listed but no `prox-close` parameters given");
        }
        let blocks: [(Stage, bool); 7] = [
            (Stage::Gen, self.gen.is_some()),
            (Stage::Cone, self.cone.is_some()),
            (Stage::Deelectrify, self.deelectrify.is_some()),
            (Stage::FactorCheck, self.factor_check.is_some()),
            (Stage::ProxClose, self.prox_close.is_some()),
            (Stage::Promote, self.promote.is_some()),
            (Stage::HhsVerify, self.hhs_verify.is_some()),
        ];
        for (stage, present) in blocks {
            if present && !has(stage) {
                bail!("parameters given for {stage} but the stage is not in the pipeline");
            }
        }

        match (&self.gen, &self.cone) {
            (Some(GenParams::Star { .. }), Some(ConeParams::Cosets { .. })) => {
                bail!("coset families need a presentation host, not the star fixture");
            }
            (Some(GenParams::Presentation { .. }), Some(ConeParams::Members)) => {
                bail!("fixture members need the star host, not a presentation");
            }
            _ => {}
        }
        if has(Stage::ProxClose) && !matches!(self.gen, Some(GenParams::Presentation { .. })) {
            bail!("prox-close needs a presentation host");
        }
        if let Some(FactorCheckParams { members: Some(_), .. }) = &self.factor_check {
            if !matches!(self.gen, Some(GenParams::Star { .. })) {
                bail!("factor-check member selection by name needs the star host");
            }
        }

        if let Some(GenParams::Presentation { generators, radius, .. }) = &self.gen {
            if generators.is_empty() {
                bail!("presentation lists no generators");
            }
            if *radius == 0 {
                bail!("ball radius must be positive");
            }
        }
        if let Some(GenParams::Star { rays, ray_length }) = &self.gen {
            if *rays < 2 || *ray_length == 0 {
                bail!("star fixture needs at least two rays of positive length");
            }
        }
        if let Some(ConeParams::Cosets { subgroups, .. }) = &self.cone {
            if subgroups.is_empty() || subgroups.iter().any(|s| s.is_empty()) {
                bail!("coset family needs at least one nonempty subgroup");
            }
        }
        if let Some(p) = &self.deelectrify {
            if p.samples == 0 {
                bail!("deelectrify needs at least one sample pair");
            }
        }
        if let Some(p) = &self.prox_close {
            if p.subgroups.is_empty() || p.subgroups.iter().any(|s| s.is_empty()) {
                bail!("prox-close needs at least one nonempty subgroup");
            }
        }
        if let Some(p) = &self.hhs_verify {
            if p.budget == 0 {
                bail!("hhs-verify needs a positive sample budget");
            }
        }
        Ok(())
    }
}
