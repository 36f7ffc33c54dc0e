use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assembly::{Variant, MAX_OPERATOR_DIM};
use crate::error::{Error, Result};
use crate::experiments::{ResolutionRule, SweepDirection};
use crate::grid_kernel::{BoxDomain, CoefficientSpec, Grid, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Eig,
    Sweep,
    Exhaust,
    CompareLocal,
    EigfnConv,
    Growth,
    Invariance,
    MonoM0,
    CheckAll,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Eig,
        ExperimentKind::Sweep,
        ExperimentKind::Exhaust,
        ExperimentKind::CompareLocal,
        ExperimentKind::EigfnConv,
        ExperimentKind::Growth,
        ExperimentKind::Invariance,
        ExperimentKind::MonoM0,
        ExperimentKind::CheckAll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Eig => "eig",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Exhaust => "exhaust",
            ExperimentKind::CompareLocal => "compare_local",
            ExperimentKind::EigfnConv => "eigfn_conv",
            ExperimentKind::Growth => "growth",
            ExperimentKind::Invariance => "invariance",
            ExperimentKind::MonoM0 => "mono_m0",
            ExperimentKind::CheckAll => "check_all",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown experiment kind '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// Box plus either nodes per axis or a spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

impl GridSpec {
    pub fn domain(&self) -> BoxDomain {
        BoxDomain::new(self.lower.clone(), self.upper.clone())
    }

    pub fn counts(&self) -> Result<Vec<usize>> {
        match (&self.nodes, self.spacing) {
            (Some(n), None) => Ok(n.clone()),
            (None, Some(h)) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
                }
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(lo, hi)| {
                        let cells = (hi - lo) / h;
                        let r = cells.round();
                        if r >= 1.0 && (cells - r).abs() <= 1e-9 * cells {
                            Ok(r as usize)
                        } else {
                            Err(Error::InvalidGrid(format!(
                                "spacing {h} does not divide the box width {}",
                                hi - lo
                            )))
                        }
                    })
                    .collect()
            }
            _ => Err(Error::InvalidGrid("give exactly one of nodes or spacing".into())),
        }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::build(self.domain(), &self.counts()?)
    }
}

fn default_tol() -> f64 {
    crate::spectral::DEFAULT_TOL
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Also compute `λ_v` for symmetric operators.
    #[serde(default = "default_true")]
    pub lambda_v: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: None,
            lambda_v: true,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> crate::spectral::SolverOptions {
        crate::spectral::SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            record_trace: false,
        }
    }
}

/// Study parameters; which ones apply depends on the experiment kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<SweepDirection>,
    /// Richardson order (1 or 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mono_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
}

fn default_operator() -> Variant {
    Variant::MPlusA
}

fn zero_coefficient() -> CoefficientSpec {
    CoefficientSpec::constant(0.0)
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Seed of the randomized property suite.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default = "default_operator")]
    pub operator: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default = "zero_coefficient")]
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

impl ExperimentConfig {
    /// Minimal config of the given kind with every optional field defaulted.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: 0,
            output: None,
            operator: default_operator(),
            grid: None,
            kernel: None,
            coefficient: zero_coefficient(),
            solver: SolverConfig::default(),
            study: StudyConfig::default(),
        }
    }

    pub fn dim(&self) -> usize {
        if let Some(g) = &self.grid {
            g.lower.len()
        } else {
            self.study.center.as_ref().map_or(1, Vec::len)
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.study.center.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    /// Spacing of exhaustion boxes: `study.spacing`, else `grid.spacing`.
    pub fn exhaustion_spacing(&self) -> Option<f64> {
        self.study
            .spacing
            .or_else(|| self.grid.as_ref().and_then(|g| g.spacing))
    }

    /// Grid rule for sweeps: per-`σ` when `nodes_per_sigma` is set, else the
    /// grid's nodes.
    pub fn resolution_rule(&self) -> Result<ResolutionRule> {
        match (self.study.nodes_per_sigma, &self.grid) {
            (Some(k), _) => Ok(ResolutionRule::PerSigma { nodes_per_sigma: k }),
            (None, Some(g)) => Ok(ResolutionRule::Fixed { nodes: g.counts()? }),
            (None, None) => Err(Error::InvalidArgument("sweep needs a grid or nodes_per_sigma".into())),
        }
    }
}

/// One configuration problem, with the line it was found on when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// Dotted path of the offending key, empty for document-level errors.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if !self.key.is_empty() {
            write!(f, "{}: ", self.key)?;
        }
        f.write_str(&self.message)
    }
}

/// Line lookup for keys and table headers.
struct Locator<'a> {
    lines: Vec<&'a str>,
}

impl<'a> Locator<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().collect(),
        }
    }

    fn offset_line(&self, text: &str, offset: usize) -> usize {
        text[..offset.min(text.len())].matches('\n').count() + 1
    }

    fn header_of(line: &str) -> Option<&str> {
        let t = line.trim();
        t.strip_prefix('[')
            .and_then(|r| r.split(']').next())
            .filter(|_| !t.starts_with("[["))
            .map(str::trim)
    }

    /// 1-based line of the `[section]` header.
    fn section(&self, section: &str) -> Option<usize> {
        self.lines
            .iter()
            .position(|l| Self::header_of(l) == Some(section))
            .map(|i| i + 1)
    }

    /// 1-based line of `key = ...` inside `section` (top level when empty).
    fn key(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = "";
        for (i, l) in self.lines.iter().enumerate() {
            if let Some(h) = Self::header_of(l) {
                current = h;
                continue;
            }
            if current != section {
                continue;
            }
            let t = l.trim_start();
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
        None
    }

    fn best(&self, section: &str, key: &str) -> Option<usize> {
        self.key(section, key).or_else(|| self.section(section))
    }
}

const TOP_KEYS: [&str; 9] = [
    "kind",
    "seed",
    "output",
    "operator",
    "grid",
    "kernel",
    "coefficient",
    "solver",
    "study",
];

struct Collector<'a> {
    loc: Locator<'a>,
    errors: Vec<ConfigError>,
}

impl Collector<'_> {
    fn push(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let line = if key.is_empty() {
            self.loc.section(section)
        } else {
            self.loc.best(section, key)
        };
        let path = match (section.is_empty(), key.is_empty()) {
            (true, _) => key.to_string(),
            (false, true) => section.to_string(),
            (false, false) => format!("{section}.{key}"),
        };
        self.errors.push(ConfigError {
            line,
            key: path,
            message: message.into(),
        });
    }

    /// Deserialize one top-level entry, reporting serde errors in place.
    fn take<T: DeserializeOwned>(&mut self, table: &toml::Table, name: &str) -> Option<T> {
        let value = table.get(name)?;
        match value.clone().try_into::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                let msg = e.message().to_string();
                let (section, key) = if value.is_table() {
                    (name, quoted_field(&msg).unwrap_or_default())
                } else {
                    ("", name.to_string())
                };
                self.push(section, &key, msg.trim().to_string());
                None
            }
        }
    }

    /// Error from a validator whose message starts with the offending key.
    fn push_validation(&mut self, section: &str, keys: &[&str], err: Error) {
        let msg = match err {
            Error::InvalidKernel(m) | Error::InvalidCoefficient(m) | Error::InvalidGrid(m) => m,
            other => other.to_string(),
        };
        let key = keys
            .iter()
            .find(|k| msg.starts_with(&format!("{k} ")))
            .copied()
            .unwrap_or("");
        self.push(section, key, msg);
    }
}

/// Field name in serde messages like "unknown field `foo`, expected ...".
fn quoted_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Parse and validate a config document; every problem found is reported.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut c = Collector {
        loc: Locator::new(text),
        errors: Vec::new(),
    };
    let table: toml::Table = match toml::from_str(text) {
        Ok(t) => t,
        Err(e) => {
            let line = e.span().map(|s| c.loc.offset_line(text, s.start));
            return Err(Error::Config(vec![ConfigError {
                line,
                key: String::new(),
                message: e.message().trim().to_string(),
            }]));
        }
    };
    for key in table.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            let section = if table[key].is_table() { key.as_str() } else { "" };
            let k = if section.is_empty() { key.as_str() } else { "" };
            c.push(section, k, format!("unknown key '{key}'"));
        }
    }
    let kind = match table.get("kind") {
        None => {
            c.push("", "kind", "missing required key");
            None
        }
        Some(v) => match v.as_str().map(str::parse::<ExperimentKind>) {
            Some(Ok(k)) => Some(k),
            Some(Err(msg)) => {
                c.push("", "kind", msg);
                None
            }
            None => {
                c.push("", "kind", "expected a string");
                None
            }
        },
    };
    let seed = c.take::<u64>(&table, "seed");
    let output = c.take::<String>(&table, "output");
    let operator = c.take::<Variant>(&table, "operator");
    let grid = c.take::<GridSpec>(&table, "grid");
    let kernel = c.take::<KernelSpec>(&table, "kernel");
    let coefficient = c.take::<CoefficientSpec>(&table, "coefficient");
    let solver = c.take::<SolverConfig>(&table, "solver");
    let study = c.take::<StudyConfig>(&table, "study");
    let structurally_ok = c.errors.is_empty();
    let Some(kind) = kind else {
        return Err(Error::Config(c.errors));
    };
    let cfg = ExperimentConfig {
        kind,
        seed: seed.unwrap_or(0),
        output,
        operator: operator.unwrap_or_else(default_operator),
        grid,
        kernel,
        coefficient: coefficient.unwrap_or_else(zero_coefficient),
        solver: solver.unwrap_or_default(),
        study: study.unwrap_or_default(),
    };
    if structurally_ok {
        validate(&cfg, &mut c, &table);
    }
    if c.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(c.errors))
    }
}

const KERNEL_KEYS: [&str; 7] = ["radius", "sigma", "m", "drift", "amplitude", "alpha", "truncation"];
const COEFF_KEYS: [&str; 9] = [
    "value", "amplitude", "frequency", "offset", "support", "width", "nu", "beta", "center",
];

fn validate(cfg: &ExperimentConfig, c: &mut Collector, table: &toml::Table) {
    use ExperimentKind::*;
    let s = &cfg.study;

    if !(cfg.solver.tol.is_finite() && cfg.solver.tol > 0.0) {
        c.push("solver", "tol", format!("tol must be positive, got {}", cfg.solver.tol));
    }
    if cfg.solver.max_iter == Some(0) {
        c.push("solver", "max_iter", "max_iter must be positive");
    }
    if let Err(e) = cfg.coefficient.validate() {
        c.push_validation("coefficient", &COEFF_KEYS, e);
    }
    let kernel_ok = match &cfg.kernel {
        Some(k) => match k.validate() {
            Ok(()) => true,
            Err(e) => {
                c.push_validation("kernel", &KERNEL_KEYS, e);
                false
            }
        },
        None => false,
    };
    let grid = cfg.grid.as_ref().map(|g| {
        let built = g.build();
        if let Err(e) = &built {
            let msg = e.to_string();
            let key = ["nodes", "spacing", "lower", "upper"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("");
            c.push("grid", key, msg);
        }
        built.ok()
    });
    let grid = grid.flatten();

    // list-valued study fields
    let positive_list = |c: &mut Collector, key: &str, v: &Option<Vec<f64>>| {
        if let Some(list) = v {
            if list.is_empty() {
                c.push("study", key, format!("{key} must not be empty"));
            } else if let Some(bad) = list.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                c.push("study", key, format!("{key} entries must be positive, got {bad}"));
            }
        }
    };
    positive_list(c, "sigmas", &s.sigmas);
    positive_list(c, "scales", &s.scales);
    positive_list(c, "half_widths", &s.half_widths);
    if let Some(ms) = &s.ms {
        if let Some(bad) = ms.iter().find(|m| !(0.0..=2.0).contains(*m)) {
            c.push("study", "ms", format!("m must lie in [0,2], got {bad}"));
        }
    }
    if let Some(hw) = &s.half_widths {
        if hw.windows(2).any(|w| w[1] <= w[0]) {
            c.push("study", "half_widths", "half_widths must increase");
        }
    }
    if let Some(o) = s.order {
        if !(1..=2).contains(&o) {
            c.push("study", "order", format!("order must be 1 or 2, got {o}"));
        }
    }
    for (key, v) in [
        ("nodes_per_sigma", s.nodes_per_sigma),
        ("spacing", s.spacing),
        ("horizon", s.horizon),
        ("dt", s.dt),
        ("mono_tol", s.mono_tol),
    ] {
        if let Some(x) = v {
            if !(x.is_finite() && x > 0.0) {
                c.push("study", key, format!("{key} must be positive, got {x}"));
            }
        }
    }
    if let Some(m) = s.margin {
        if !(m.is_finite() && m >= 0.0) {
            c.push("study", "margin", format!("margin must be nonnegative, got {m}"));
        }
    }
    if s.instances == Some(0) {
        c.push("study", "instances", "instances must be positive");
    }
    if s.reference_nodes == Some(0) {
        c.push("study", "reference_nodes", "reference_nodes must be positive");
    }
    if let (Some(center), Some(g)) = (&s.center, &cfg.grid) {
        if center.len() != g.lower.len() {
            c.push("study", "center", "center dimension differs from the grid");
        }
    }

    if cfg.operator == Variant::MPlusA {
        if let Some(k) = &cfg.kernel {
            if k.sigma().is_none() {
                c.push("operator", "", "M_plus_a needs a convolution kernel");
            }
        }
    }

    let needs = |c: &mut Collector, what: &str, present: bool| {
        if !present {
            let (section, key) = match what.split_once('.') {
                Some((sec, k)) => (sec, k),
                None => (what, ""),
            };
            let line_section = if table.contains_key(section) { section } else { "" };
            let line_key = if line_section.is_empty() { "kind" } else { key };
            let line = c.loc.best(line_section, line_key);
            c.errors.push(ConfigError {
                line,
                key: what.to_string(),
                message: format!("required for kind '{}'", cfg.kind),
            });
        }
    };
    let needs_kernel = !matches!(cfg.kind, CheckAll);
    if needs_kernel {
        needs(c, "kernel", cfg.kernel.is_some());
    }
    match cfg.kind {
        Eig | Growth | Invariance => needs(c, "grid", cfg.grid.is_some()),
        Sweep | CompareLocal | EigfnConv => {
            needs(c, "grid", cfg.grid.is_some());
            needs(c, "study.sigmas", s.sigmas.is_some());
        }
        Exhaust => {
            needs(c, "study.half_widths", s.half_widths.is_some());
            needs(c, "study.spacing", cfg.exhaustion_spacing().is_some());
        }
        MonoM0 => {
            needs(c, "study.sigmas", s.sigmas.is_some());
            needs(c, "study.half_widths", s.half_widths.is_some());
            needs(c, "study.spacing", cfg.exhaustion_spacing().is_some());
        }
        CheckAll => {}
    }
    if matches!(cfg.kind, Sweep | CompareLocal | EigfnConv | MonoM0) {
        if let Some(k) = &cfg.kernel {
            if k.sigma().is_none() {
                c.push("kernel", "variant", format!("kind '{}' needs a convolution kernel", cfg.kind));
            }
        }
    }
    if matches!(cfg.kind, CompareLocal | EigfnConv) {
        let m = s.ms.clone().unwrap_or_else(|| cfg.kernel.as_ref().and_then(KernelSpec::m).into_iter().collect());
        if m.iter().any(|&m| m != 2.0) {
            c.push("kernel", "m", format!("kind '{}' needs m = 2", cfg.kind));
        }
        if cfg.operator != Variant::MPlusA {
            c.push("", "operator", format!("kind '{}' needs M_plus_a", cfg.kind));
        }
    }
    if cfg.kind == Invariance && cfg.operator != Variant::LPlusA {
        c.push("", "operator", "scaling invariance needs L_plus_a");
    }
    if cfg.kind == MonoM0 {
        if let Some(k) = &cfg.kernel {
            if k.m().is_some_and(|m| m != 0.0) {
                c.push("kernel", "m", "mono_m0 needs m = 0");
            }
        }
    }
    if !c.errors.is_empty() || !kernel_ok {
        return;
    }
    check_sizes(cfg, c, grid.as_ref());
}

/// Resolution rule and dense-size limit wherever they can be checked ahead
/// of running.
fn check_sizes(cfg: &ExperimentConfig, c: &mut Collector, grid: Option<&Grid>) {
    use ExperimentKind::*;
    let k = cfg.kernel.as_ref().expect("kernel validated");
    let s = &cfg.study;
    let check = |c: &mut Collector, grid: &Grid, k: &KernelSpec, key: (&str, &str)| {
        if let Err(e) = k.check_resolution(grid) {
            c.push(key.0, key.1, e.to_string());
        } else if grid.len() > MAX_OPERATOR_DIM {
            c.push(
                key.0,
                key.1,
                format!("{} nodes exceed the dense operator limit of {MAX_OPERATOR_DIM}", grid.len()),
            );
        }
    };
    match cfg.kind {
        Eig | Growth | Invariance => {
            if let Some(g) = grid {
                check(c, g, k, ("grid", "nodes"));
            }
        }
        Sweep | CompareLocal | EigfnConv => {
            let (Some(g), Some(sigmas)) = (cfg.grid.as_ref(), &s.sigmas) else { return };
            let Ok(rule) = cfg.resolution_rule() else { return };
            let radius = match k {
                KernelSpec::Convolution { radius, .. } => *radius,
                _ => return,
            };
            for &sigma in sigmas {
                let built = rule
                    .counts(&g.domain(), sigma, radius)
                    .and_then(|n| Grid::build(g.domain(), &n));
                match built {
                    Ok(grid) => check(c, &grid, &k.with_sigma(sigma), ("study", "sigmas")),
                    Err(e) => c.push("study", "sigmas", e.to_string()),
                }
                if !c.errors.is_empty() {
                    break;
                }
            }
        }
        Exhaust | MonoM0 => {
            let (Some(h), Some(hw)) = (cfg.exhaustion_spacing(), &s.half_widths) else { return };
            let center = cfg.center();
            let Some(&largest) = hw.last() else { return };
            let sigmas: Vec<Option<f64>> = match (&s.sigmas, cfg.kind) {
                (Some(list), MonoM0) => list.iter().copied().map(Some).collect(),
                _ => vec![None],
            };
            for sigma in sigmas {
                let kk = sigma.map_or_else(|| k.clone(), |s| k.with_sigma(s));
                for &l in [hw[0], largest].iter() {
                    match Grid::nested_box(&center, l, h) {
                        Ok(g) => check(c, &g, &kk, ("study", "spacing")),
                        Err(e) => c.push("study", "half_widths", e.to_string()),
                    }
                }
                if !c.errors.is_empty() {
                    break;
                }
            }
        }
        CheckAll => {}
    }
}

/// Canonical text form; `parse_config(render(c))` gives back `c`.
pub fn render(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config is always representable")
}
