//! Experiment files: `[section]` headers followed by flat `key = value` lines.
//!
//! ```text
//! [schedule]
//! kind = power_law
//! p = 10
//!
//! [perturbation]
//! envelope = zero
//!
//! [stopping]
//! rule = none
//!
//! [run]
//! x0 = 1.1, 0.5, -1.1
//! horizon = 1000
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys that do not
//! belong to a section, or do not apply to the chosen kind, are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use cubic_core::{Envelope, HepCase, Noise, PerturbationSpec, Schedule, ScheduleKind, Sign, StoppingRule};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1729;

/// Schedule as written in a file. A power law without `shift` takes its
/// shift from the indexing mode when it is built.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    PowerLaw { p: f64, shift: Option<u64> },
    SuperExpPlain,
    Case1Tower { k: u32 },
    ShiftedSuperExp { k: u32 },
    HepCase(HepCase),
    Table(Vec<f64>),
}

impl ScheduleSpec {
    pub fn build(&self, paper_exact: bool) -> Result<Schedule, CliError> {
        let kind = match self {
            ScheduleSpec::PowerLaw { p, shift } => {
                ScheduleKind::PowerLaw { p: *p, shift: shift.unwrap_or(if paper_exact { 0 } else { 1 }) }
            }
            ScheduleSpec::SuperExpPlain => ScheduleKind::SuperExpPlain,
            ScheduleSpec::Case1Tower { k } => ScheduleKind::Case1Tower { k: *k },
            ScheduleSpec::ShiftedSuperExp { k } => ScheduleKind::ShiftedSuperExp { k: *k },
            ScheduleSpec::HepCase(c) => ScheduleKind::HepCase(*c),
            ScheduleSpec::Table(v) => ScheduleKind::Table(v.clone()),
        };
        Schedule::new(kind).map_err(|e| CliError::Config(format!("[schedule]: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schedule: ScheduleSpec,
    pub envelope: Envelope,
    pub noise: Noise,
    pub rule: StoppingRule,
    pub x0: Vec<f64>,
    pub horizon: u64,
    /// Trajectories per initial value.
    pub paths: u64,
    pub seed: u64,
    pub output: PathBuf,
    pub paper_exact_indexing: bool,
}

impl ExperimentConfig {
    pub fn schedule(&self) -> Result<Schedule, CliError> {
        self.schedule.build(self.paper_exact_indexing)
    }

    pub fn perturbation(&self) -> Result<PerturbationSpec, CliError> {
        PerturbationSpec::new(self.envelope.clone(), self.noise, self.seed)
            .map_err(|e| CliError::Config(format!("[perturbation]: {e}")))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sections = split_sections(text)?;
        let get = |name: &str, allowed: &[&str]| -> Result<Section, CliError> {
            let entries = sections.get(name).cloned().unwrap_or_default();
            Section::new(name, entries, allowed)
        };
        let mut sched = get("schedule", &["kind", "p", "shift", "k", "case", "values"])?;
        let mut pert = get("perturbation", &["envelope", "beta", "k", "values", "tail", "noise"])?;
        let mut stop = get("stopping", &["rule"])?;
        let mut run = get("run", &["x0", "horizon", "paths", "seed", "output", "paper_exact_indexing"])?;

        let schedule = parse_schedule(&mut sched)?;
        let envelope = parse_envelope(&mut pert)?;
        let noise = match pert.take("noise")? {
            None => Noise::GaussianStd,
            Some(v) => parse_noise(&v).ok_or_else(|| pert.bad("noise", &v))?,
        };
        let rule = match stop.take("rule")? {
            None => StoppingRule::None,
            Some(v) => parse_rule(&v).ok_or_else(|| stop.bad("rule", &v))?,
        };
        let x0 = list(&run.require("x0")?, "run", "x0")?;
        if x0.is_empty() {
            return Err(CliError::Config("[run]: x0 needs at least one value".into()));
        }
        let cfg = ExperimentConfig {
            schedule,
            envelope,
            noise,
            rule,
            x0,
            horizon: run.number("horizon")?.unwrap_or(1000),
            paths: run.number("paths")?.unwrap_or(1),
            seed: run.number("seed")?.unwrap_or(DEFAULT_SEED),
            output: run.take("output")?.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            paper_exact_indexing: match run.take("paper_exact_indexing")? {
                None => false,
                Some(v) => v.parse().map_err(|_| run.bad("paper_exact_indexing", &v))?,
            },
        };
        for s in [&sched, &pert, &stop, &run] {
            s.finish()?;
        }
        Ok(cfg)
    }

    /// Text that [`ExperimentConfig::parse`] maps back to `self`.
    pub fn render(&self) -> String {
        let mut out = String::from("[schedule]\n");
        match &self.schedule {
            ScheduleSpec::PowerLaw { p, shift } => {
                kv(&mut out, "kind", "power_law");
                kv(&mut out, "p", p);
                if let Some(s) = shift {
                    kv(&mut out, "shift", s);
                }
            }
            ScheduleSpec::SuperExpPlain => kv(&mut out, "kind", "super_exp_plain"),
            ScheduleSpec::Case1Tower { k } => {
                kv(&mut out, "kind", "case1_tower");
                kv(&mut out, "k", k);
            }
            ScheduleSpec::ShiftedSuperExp { k } => {
                kv(&mut out, "kind", "shifted_super_exp");
                kv(&mut out, "k", k);
            }
            ScheduleSpec::HepCase(c) => {
                kv(&mut out, "kind", "hep_case");
                let (name, k) = match c {
                    HepCase::I => ("i", None),
                    HepCase::II => ("ii", None),
                    HepCase::III => ("iii", None),
                    HepCase::IV { k } => ("iv", Some(*k)),
                };
                kv(&mut out, "case", name);
                if let Some(k) = k {
                    kv(&mut out, "k", k);
                }
            }
            ScheduleSpec::Table(v) => {
                kv(&mut out, "kind", "table");
                kv(&mut out, "values", join(v));
            }
        }
        out.push_str("\n[perturbation]\n");
        render_envelope(&mut out, &self.envelope);
        kv(&mut out, "noise", noise_name(self.noise));
        out.push_str("\n[stopping]\n");
        kv(&mut out, "rule", rule_name(self.rule));
        out.push_str("\n[run]\n");
        kv(&mut out, "x0", join(&self.x0));
        kv(&mut out, "horizon", self.horizon);
        kv(&mut out, "paths", self.paths);
        kv(&mut out, "seed", self.seed);
        kv(&mut out, "output", self.output.display());
        kv(&mut out, "paper_exact_indexing", self.paper_exact_indexing);
        out
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn render_envelope(out: &mut String, env: &Envelope) {
    match env {
        Envelope::Zero => kv(out, "envelope", "zero"),
        Envelope::Table { head, tail } => {
            kv(out, "envelope", "table");
            kv(out, "values", join(head));
            match tail.as_deref() {
                None => {}
                Some(t) => {
                    let (name, k, beta) = family(t).expect("table tails are closed-form");
                    kv(out, "tail", name);
                    if let Some(k) = k {
                        kv(out, "k", k);
                    }
                    kv(out, "beta", format!("{beta:?}"));
                }
            }
        }
        other => {
            let (name, k, beta) = family(other).unwrap();
            kv(out, "envelope", name);
            if let Some(k) = k {
                kv(out, "k", k);
            }
            kv(out, "beta", format!("{beta:?}"));
        }
    }
}

fn family(env: &Envelope) -> Option<(&'static str, Option<u32>, f64)> {
    match env {
        Envelope::Plain { beta } => Some(("plain", None, *beta)),
        Envelope::Case1Tower { k, beta } => Some(("case1_tower", Some(*k), *beta)),
        Envelope::CompRho { k, beta } => Some(("comp_rho", Some(*k), *beta)),
        _ => None,
    }
}

pub fn noise_name(noise: Noise) -> &'static str {
    match noise {
        Noise::GaussianStd => "gaussian",
        Noise::BoundedUniform => "uniform",
        Noise::UnitConstant(Sign::Plus) => "plus",
        Noise::UnitConstant(Sign::Minus) => "minus",
    }
}

fn parse_noise(s: &str) -> Option<Noise> {
    Some(match s {
        "gaussian" => Noise::GaussianStd,
        "uniform" => Noise::BoundedUniform,
        "plus" => Noise::UnitConstant(Sign::Plus),
        "minus" => Noise::UnitConstant(Sign::Minus),
        _ => return None,
    })
}

pub fn rule_name(rule: StoppingRule) -> &'static str {
    match rule {
        StoppingRule::None => "none",
        StoppingRule::FreezeWhenSmall => "freeze_when_small",
        StoppingRule::FreezeAtN4Keep => "freeze_at_n4_keep",
        StoppingRule::FreezeAtN4Reciprocal => "freeze_at_n4_reciprocal",
    }
}

fn parse_rule(s: &str) -> Option<StoppingRule> {
    Some(match s {
        "none" => StoppingRule::None,
        "freeze_when_small" => StoppingRule::FreezeWhenSmall,
        "freeze_at_n4_keep" => StoppingRule::FreezeAtN4Keep,
        "freeze_at_n4_reciprocal" => StoppingRule::FreezeAtN4Reciprocal,
        _ => return None,
    })
}

fn parse_schedule(s: &mut Section) -> Result<ScheduleSpec, CliError> {
    let kind = s.require("kind")?;
    let spec = match kind.as_str() {
        "power_law" => ScheduleSpec::PowerLaw { p: s.require_number("p")?, shift: s.number("shift")? },
        "super_exp_plain" => ScheduleSpec::SuperExpPlain,
        "case1_tower" => ScheduleSpec::Case1Tower { k: s.require_number("k")? },
        "shifted_super_exp" => ScheduleSpec::ShiftedSuperExp { k: s.require_number("k")? },
        "hep_case" => {
            let case = s.require("case")?;
            ScheduleSpec::HepCase(match case.as_str() {
                "i" => HepCase::I,
                "ii" => HepCase::II,
                "iii" => HepCase::III,
                "iv" => HepCase::IV { k: s.require_number("k")? },
                _ => return Err(s.bad("case", &case)),
            })
        }
        "table" => ScheduleSpec::Table(list(&s.require("values")?, "schedule", "values")?),
        _ => return Err(s.bad("kind", &kind)),
    };
    Ok(spec)
}

fn parse_envelope(s: &mut Section) -> Result<Envelope, CliError> {
    let Some(kind) = s.take("envelope")? else {
        return Ok(Envelope::Zero);
    };
    if kind == "zero" {
        return Ok(Envelope::Zero);
    }
    if kind == "table" {
        let head = list(&s.require("values")?, "perturbation", "values")?;
        let tail = match s.take("tail")? {
            None => None,
            Some(t) => Some(Box::new(closed_form(s, &t)?.ok_or_else(|| s.bad("tail", &t))?)),
        };
        return Ok(Envelope::Table { head, tail });
    }
    closed_form(s, &kind)?.ok_or_else(|| s.bad("envelope", &kind))
}

fn closed_form(s: &mut Section, name: &str) -> Result<Option<Envelope>, CliError> {
    Ok(Some(match name {
        "plain" => Envelope::Plain { beta: s.require_number("beta")? },
        "case1_tower" => Envelope::Case1Tower { k: s.require_number("k")?, beta: s.require_number("beta")? },
        "comp_rho" => Envelope::CompRho { k: s.require_number("k")?, beta: s.require_number("beta")? },
        _ => return Ok(None),
    }))
}

fn list(value: &str, section: &str, key: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| CliError::Config(format!("[{section}] {key}: `{v}` is not a number"))))
        .collect()
}

type Entries = Vec<(usize, String, String)>;

fn split_sections(text: &str) -> Result<BTreeMap<String, Entries>, CliError> {
    let known = ["schedule", "perturbation", "stopping", "run"];
    let mut sections: BTreeMap<String, Entries> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !known.contains(&name) {
                return Err(CliError::Config(format!("line {line_no}: unknown section `[{name}]`")));
            }
            if sections.contains_key(name) {
                return Err(CliError::Config(format!("line {line_no}: section `[{name}]` repeated")));
            }
            sections.insert(name.to_string(), Vec::new());
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {line_no}: expected `key = value`, found `{line}`")));
        };
        let Some(section) = &current else {
            return Err(CliError::Config(format!(
                "line {line_no}: key `{}` outside any section",
                key.trim()
            )));
        };
        sections.get_mut(section).unwrap().push((line_no, key.trim().to_string(), value.trim().to_string()));
    }
    if !sections.contains_key("schedule") {
        return Err(CliError::Config("missing section `[schedule]`".into()));
    }
    Ok(sections)
}

/// Keys of one section, consumed as they are interpreted.
struct Section {
    name: String,
    values: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn new(name: &str, entries: Entries, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (line, key, value) in entries {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!("line {line}: unknown key `{key}` in [{name}]")));
            }
            if values.insert(key.clone(), (line, value)).is_some() {
                return Err(CliError::Config(format!("line {line}: key `{key}` repeated in [{name}]")));
            }
        }
        Ok(Self { name: name.to_string(), values })
    }

    fn take(&mut self, key: &str) -> Result<Option<String>, CliError> {
        Ok(self.values.remove(key).map(|(_, v)| v))
    }

    fn require(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key)?.ok_or_else(|| CliError::Config(format!("[{}]: missing key `{key}`", self.name)))
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.bad(key, &v)),
        }
    }

    fn require_number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| self.bad(key, &v))
    }

    fn bad(&self, key: &str, value: &str) -> CliError {
        CliError::Config(format!("[{}] {key}: invalid value `{value}`", self.name))
    }

    /// Rejects keys left over after interpretation.
    fn finish(&self) -> Result<(), CliError> {
        match self.values.iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(CliError::Config(format!(
                "line {line}: key `{key}` does not apply here in [{}]",
                self.name
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIG1: &str =
        "[schedule]\nkind = power_law\np = 10\nshift = 0\n\n[run]\nx0 = 1.1, 0.5, -1.1\nhorizon = 1000\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ExperimentConfig::parse(FIG1).unwrap();
        assert_eq!(c.schedule, ScheduleSpec::PowerLaw { p: 10.0, shift: Some(0) });
        assert_eq!(c.envelope, Envelope::Zero);
        assert_eq!(c.rule, StoppingRule::None);
        assert_eq!(c.x0, vec![1.1, 0.5, -1.1]);
        assert_eq!((c.horizon, c.paths, c.seed), (1000, 1, DEFAULT_SEED));
        assert!(!c.paper_exact_indexing);
    }

    #[test]
    fn power_law_shift_follows_indexing_mode() {
        let text = "[schedule]\nkind = power_law\np = 2\n[run]\nx0 = 1\n";
        let mut c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.schedule().unwrap().origin(), 0);
        assert_eq!(c.schedule().unwrap().step(1).unwrap(), 0.25);
        c.paper_exact_indexing = true;
        assert_eq!(c.schedule().unwrap().origin(), 1);
        assert_eq!(c.schedule().unwrap().step(1).unwrap(), 1.0);
    }

    #[test]
    fn unknown_and_misplaced_keys_are_named() {
        let bad = FIG1.replace("horizon", "horizn");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("horizn"), "{err}");
        let misplaced = FIG1.replace("shift = 0", "k = 2");
        let err = ExperimentConfig::parse(&misplaced).unwrap_err().to_string();
        assert!(err.contains("`k`"), "{err}");
        let err = ExperimentConfig::parse("[schedul]\n").unwrap_err().to_string();
        assert!(err.contains("schedul"), "{err}");
        let err = ExperimentConfig::parse("kind = table\n").unwrap_err().to_string();
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        for (from, to) in [
            ("p = 10", "p = ten"),
            ("kind = power_law", "kind = cubic"),
            ("x0 = 1.1, 0.5, -1.1", "x0 = 1, a"),
        ] {
            assert!(ExperimentConfig::parse(&FIG1.replace(from, to)).is_err(), "{to}");
        }
        let text = format!("{FIG1}\n[perturbation]\nenvelope = plain\nbeta = 2\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(c.perturbation().is_err());
    }

    fn schedule_spec() -> impl Strategy<Value = ScheduleSpec> {
        prop_oneof![
            (0.01..20.0f64, proptest::option::of(0u64..5))
                .prop_map(|(p, shift)| ScheduleSpec::PowerLaw { p, shift }),
            Just(ScheduleSpec::SuperExpPlain),
            (1u32..4).prop_map(|k| ScheduleSpec::Case1Tower { k }),
            (1u32..4).prop_map(|k| ScheduleSpec::ShiftedSuperExp { k }),
            prop_oneof![
                Just(HepCase::I),
                Just(HepCase::II),
                Just(HepCase::III),
                (1u32..4).prop_map(|k| HepCase::IV { k })
            ]
            .prop_map(ScheduleSpec::HepCase),
            proptest::collection::vec(1e-9..10.0f64, 1..5).prop_map(ScheduleSpec::Table),
        ]
    }

    fn closed_envelope() -> impl Strategy<Value = Envelope> {
        prop_oneof![
            (0.01..0.99f64).prop_map(|beta| Envelope::Plain { beta }),
            (1u32..4, 0.01..0.99f64).prop_map(|(k, beta)| Envelope::Case1Tower { k, beta }),
            (1u32..4, 0.01..8.0f64).prop_map(|(k, beta)| Envelope::CompRho { k, beta }),
        ]
    }

    fn envelope() -> impl Strategy<Value = Envelope> {
        prop_oneof![
            Just(Envelope::Zero),
            closed_envelope(),
            (proptest::collection::vec(-1.0..1.0f64, 1..4), proptest::option::of(closed_envelope()))
                .prop_map(|(head, tail)| Envelope::Table { head, tail: tail.map(Box::new) }),
        ]
    }

    fn config() -> impl Strategy<Value = ExperimentConfig> {
        let noise = prop_oneof![
            Just(Noise::GaussianStd),
            Just(Noise::BoundedUniform),
            Just(Noise::UnitConstant(Sign::Plus)),
            Just(Noise::UnitConstant(Sign::Minus)),
        ];
        let rule = prop_oneof![
            Just(StoppingRule::None),
            Just(StoppingRule::FreezeWhenSmall),
            Just(StoppingRule::FreezeAtN4Keep),
            Just(StoppingRule::FreezeAtN4Reciprocal),
        ];
        (
            schedule_spec(),
            envelope(),
            noise,
            rule,
            proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..4),
            (1u64..1_000_000, 1u64..100, any::<u64>(), "[a-z][a-z0-9_/]{0,12}", any::<bool>()),
        )
            .prop_map(
                |(
                    schedule,
                    envelope,
                    noise,
                    rule,
                    x0,
                    (horizon, paths, seed, output, paper_exact_indexing),
                )| {
                    ExperimentConfig {
                        schedule,
                        envelope,
                        noise,
                        rule,
                        x0,
                        horizon,
                        paths,
                        seed,
                        output: PathBuf::from(output),
                        paper_exact_indexing,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn parse_render_parse_is_identity(c in config()) {
            let text = c.render();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.render(), text);
        }
    }
}
