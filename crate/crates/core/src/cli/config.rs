use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynsim::SimConfig;
use crate::ecc::{Direction, ExcitationPlan, Reference, Shape, Weighting};
use crate::error::{Error, Result};
use crate::netmodel::BusId;
use crate::placement::{MadsConfig, Solver};
use crate::screening::{DEFAULT_CYCLES, DEFAULT_DURATIONS};
use crate::vsi::CriteriaSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "kebab-case")]
pub enum ModeName {
    FaultSpecified,
    FaultUnspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccSection {
    pub mode: ModeName,
    /// Contingency id for the fault-specified mode; the most severe one when absent.
    pub contingency: Option<String>,
    pub sizes: Option<Vec<f64>>,
    /// Pulse window of the fault-unspecified mode, seconds.
    pub pulse: Option<[f64; 2]>,
    pub weighting: Option<Weighting>,
    pub reference: Option<Reference>,
    pub monitored: Option<Vec<BusId>>,
}

impl Default for EccSection {
    fn default() -> Self {
        EccSection {
            mode: ModeName::FaultSpecified,
            contingency: None,
            sizes: None,
            pulse: None,
            weighting: None,
            reference: None,
            monitored: None,
        }
    }
}

impl EccSection {
    pub fn plan(&self) -> ExcitationPlan {
        let mut plan = match self.mode {
            ModeName::FaultSpecified => ExcitationPlan::fault_specified(),
            ModeName::FaultUnspecified => ExcitationPlan::fault_unspecified(),
        };
        if let Some(s) = &self.sizes {
            plan.sizes = s.clone();
        }
        if let (Some([t1, t2]), Shape::Pulse { .. }) = (self.pulse, &plan.shape) {
            plan.shape = Shape::Pulse { t1, t2 };
        }
        if let Some(w) = self.weighting {
            plan.weighting = w;
        }
        if let Some(r) = self.reference {
            plan.reference = r;
        }
        plan.monitored = self.monitored.clone();
        if self.mode == ModeName::FaultSpecified {
            plan.directions = vec![Direction::Positive];
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementSection {
    pub solver: Solver,
    /// Number of SVCs v.
    pub svcs: usize,
    pub mads: MadsConfig,
}

impl Default for PlacementSection {
    fn default() -> Self {
        PlacementSection { solver: Solver::Mads, svcs: 2, mads: MadsConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub c_svc: f64,
    pub c_fidvr: f64,
    /// Contingency total behind an external coverage table.
    pub n_cont: Option<usize>,
    pub coverage: Option<PathBuf>,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection { c_svc: 1.0, c_fidvr: 5.0, n_cont: None, coverage: None }
    }
}

/// One study, read from TOML and refined by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub case: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Fault durations for screening and coverage, cycles.
    pub durations: Vec<f64>,
    /// Fault duration of the N-1 list used for severity ranking, cycles.
    pub screen_cycles: f64,
    /// Rating of installed SVCs in coverage and resolution checks, Mvar.
    pub svc_rating: f64,
    pub probe_mvar: f64,
    /// Contingencies entering the sensitivity index, by severity.
    pub top_contingencies: usize,
    pub clip_negative: bool,
    pub criteria: CriteriaSpec,
    pub sim: SimConfig,
    pub ecc: EccSection,
    pub placement: PlacementSection,
    pub cost: CostSection,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            case: None,
            output: None,
            seed: 0,
            durations: DEFAULT_DURATIONS.to_vec(),
            screen_cycles: DEFAULT_CYCLES,
            svc_rating: 100.0,
            probe_mvar: 25.0,
            top_contingencies: 1,
            clip_negative: false,
            criteria: CriteriaSpec::default(),
            sim: SimConfig::default(),
            ecc: EccSection::default(),
            placement: PlacementSection::default(),
            cost: CostSection::default(),
        }
    }
}

impl StudyConfig {
    /// Reads a config file; relative paths inside it are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: StudyConfig = toml::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.case);
        rebase(&mut cfg.output);
        rebase(&mut cfg.cost.coverage);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.criteria.validate(self.sim.t_f)?;
        if self.durations.is_empty() || self.durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidInput("durations must be positive cycle counts".into()));
        }
        if !(self.screen_cycles > 0.0) {
            return Err(Error::InvalidInput("screen_cycles must be positive".into()));
        }
        if !(self.svc_rating > 0.0 && self.probe_mvar > 0.0) {
            return Err(Error::InvalidInput("svc_rating and probe_mvar must be positive".into()));
        }
        if self.top_contingencies == 0 {
            return Err(Error::InvalidInput("top_contingencies must be at least 1".into()));
        }
        if self.placement.svcs == 0 {
            return Err(Error::InvalidInput("the number of SVCs must be at least 1".into()));
        }
        self.ecc.plan().validate()
    }

    /// Canonical form for hashing: paths and the seed are excluded, they are
    /// reported separately.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.case = None;
        c.output = None;
        c.cost.coverage = None;
        c.seed = 0;
        serde_json::to_string(&c).expect("config serializes")
    }
}
