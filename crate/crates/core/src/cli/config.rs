//! Run configuration: a TOML document read as flat dotted key paths.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};
use toml::Value;

use crate::fracops::BetaVector;
use crate::levy::LevyModel;
use crate::spde::{heat_l2_condition, picard_condition, HeatScheme, PICARD_WARNING};

pub const SEED_ENV: &str = "FRLEVY_SEED";

const HEAT_WARNING: &str = "heat_l2_condition violated: 2 beta0 + sum(beta) + 1 > d/2 fails";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SimulateField,
    SolvePoisson,
    SolveHeat,
    SolveQuasilinear,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateField => "simulate-field",
            Command::SolvePoisson => "solve-poisson",
            Command::SolveHeat => "solve-heat",
            Command::SolveQuasilinear => "solve-quasilinear",
            Command::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::SimulateField,
            Command::SolvePoisson,
            Command::SolveHeat,
            Command::SolveQuasilinear,
            Command::Validate,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    fn uses_model(&self) -> bool {
        !matches!(self, Command::Validate)
    }

    fn uses_time(&self) -> bool {
        matches!(self, Command::SolveHeat | Command::SolveQuasilinear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    Zero,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearityKind {
    Zero,
    Sine,
    Constant(f64),
}

/// Field evaluation lattice `lower + i (upper - lower) / cells`, `i = 0..=cells` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLattice {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

impl FieldLattice {
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for k in 0..self.lower.len() {
            let n = self.cells[k];
            let h = (self.upper[k] - self.lower[k]) / n as f64;
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    (0..=n).map(move |i| {
                        let mut q = p.clone();
                        q.push(self.lower[k] + i as f64 * h);
                        q
                    })
                })
                .collect();
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub mass_tolerance: f64,
    pub allow_condition_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub replicas: usize,
    pub heat_replicas: usize,
    pub contrast_replicas: usize,
}

/// A validated configuration. Parameters that a command does not use keep
/// their defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub replicas: usize,
    pub model: LevyModel,
    pub beta: Option<BetaVector>,
    pub beta0: f64,
    pub domain_lower: Vec<f64>,
    pub domain_upper: Vec<f64>,
    pub domain_cells: Vec<usize>,
    pub horizon: f64,
    pub steps: usize,
    pub past: Option<f64>,
    pub field: Option<FieldLattice>,
    pub forcing: f64,
    pub scheme: HeatScheme,
    pub nonlinearity: NonlinearityKind,
    pub initial: InitialCondition,
    pub picard: PicardSettings,
    pub validate: ValidateSettings,
    pub plots: bool,
    /// `(condition, holds)` for the solvability conditions relevant to the command.
    pub conditions: Vec<(&'static str, bool)>,
    pub warnings: Vec<String>,
    /// Canonical `key = value` lines of every key given in the document.
    pub canonical: Vec<String>,
}

impl RunConfig {
    /// SHA-256 of the canonical key listing plus the effective replica count.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command = \"{}\"\n", self.command.name()));
        for line in &self.canonical {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        h.update(format!("effective.replicas = {}\n", self.replicas));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Every problem found in a document, one per line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.messages.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Typed, consuming access to the flattened keys with error collection.
struct Keys {
    map: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.take(key)? {
            Value::Float(x) => Some(x),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.errors.push(format!("{key}: expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> f64 {
        self.float(key).unwrap_or(default)
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.take(key)? {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            other => {
                self.errors.push(format!("{key}: expected a non-negative integer, got {other}"));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(other) => {
                self.errors.push(format!("{key}: expected a boolean, got {}", other.type_str()));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            Value::String(s) => Some(s),
            other => {
                self.errors.push(format!("{key}: expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.take(key)?;
        let parsed = match &v {
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            Value::Float(f) => Some(vec![*f]),
            Value::Integer(i) => Some(vec![*i as f64]),
            _ => None,
        };
        if parsed.is_none() {
            self.errors.push(format!("{key}: expected a number or an array of numbers"));
        }
        parsed
    }

    /// An integer, or an array of integers, broadcast to `d` entries.
    fn counts(&mut self, key: &str, d: usize) -> Option<Vec<usize>> {
        let v = self.take(key)?;
        let parsed = match &v {
            Value::Integer(i) if *i > 0 => Some(vec![*i as usize; d]),
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Integer(i) if *i > 0 => Some(*i as usize),
                    _ => None,
                })
                .collect::<Option<Vec<usize>>>(),
            _ => None,
        };
        match parsed {
            Some(c) if c.len() == d => Some(c),
            Some(c) => {
                self.errors.push(format!("{key}: expected {d} entries, got {}", c.len()));
                None
            }
            None => {
                self.errors.push(format!("{key}: expected a positive integer or an array of them"));
                None
            }
        }
    }

    fn require<T>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && !self.errors.iter().any(|e| e.starts_with(key)) {
            self.errors.push(format!("{key}: missing required key"));
        }
        v
    }
}

fn canonical_lines(map: &BTreeMap<String, Value>) -> Vec<String> {
    map.iter().map(|(k, v)| format!("{k} = {v}")).collect()
}

/// Parses a configuration document. `command` comes from the command line
/// and takes precedence over a `command` key in the document, which must
/// then agree with it.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        messages: vec![format!("malformed configuration: {}", e.message())],
    })?;
    let mut map = BTreeMap::new();
    flatten("", &table, &mut map);
    let canonical = canonical_lines(&map);
    let mut keys = Keys {
        map,
        errors: Vec::new(),
    };
    let command = match (keys.string("command"), command) {
        (Some(s), cli) => match Command::parse(&s) {
            Some(c) if cli.is_none() || cli == Some(c) => Some(c),
            Some(c) => {
                keys.errors.push(format!(
                    "command: document says {} but {} was requested",
                    c.name(),
                    cli.map(|c| c.name()).unwrap_or_default()
                ));
                cli
            }
            None => {
                keys.errors.push(format!("command: unknown command {s:?}"));
                cli
            }
        },
        (None, Some(c)) => Some(c),
        (None, None) => {
            keys.errors.push("command: missing required key".into());
            None
        }
    };
    let command = command.unwrap_or(Command::Validate);

    let seed = keys.uint("seed");
    let replicas = keys.uint("replicas").unwrap_or(1) as usize;
    if replicas == 0 {
        keys.errors.push("replicas: must be at least 1".into());
    }

    let model = parse_model(&mut keys, command.uses_model());

    let beta_values = keys.floats("beta");
    let beta = match beta_values {
        Some(b) => {
            let mut ok = true;
            for (i, v) in b.iter().enumerate() {
                if !(*v > 0.0 && *v < 0.5) {
                    keys.errors.push(format!("beta[{}] out of (0, 0.5)", i + 1));
                    ok = false;
                }
            }
            if ok {
                BetaVector::new(b).ok()
            } else {
                None
            }
        }
        None => {
            if command != Command::Validate {
                keys.require::<()>("beta", None);
            }
            None
        }
    };
    let beta0 = match keys.float("beta0") {
        Some(b) if !(b > 0.0 && b < 0.5) => {
            keys.errors.push("beta0 out of (0, 0.5)".into());
            b
        }
        Some(b) => b,
        None => {
            if command.uses_time() {
                keys.require::<()>("beta0", None);
            }
            0.25
        }
    };
    let d = beta.as_ref().map_or(1, |b| b.dim());

    let domain_lower = keys.floats("domain.lower").unwrap_or_else(|| vec![0.0; d]);
    let domain_upper = keys.floats("domain.upper").unwrap_or_else(|| vec![1.0; d]);
    let domain_cells = keys.counts("domain.cells", d).unwrap_or_else(|| vec![32; d]);
    if matches!(command, Command::SolvePoisson | Command::SolveHeat | Command::SolveQuasilinear) {
        for (name, v) in [("domain.lower", &domain_lower), ("domain.upper", &domain_upper)] {
            if v.len() != d {
                keys.errors.push(format!("{name}: expected {d} entries to match beta, got {}", v.len()));
            }
        }
    }
    let horizon = keys.float_or("domain.horizon", 1.0);
    let steps = keys.uint("domain.steps").unwrap_or(32) as usize;
    if command.uses_time() && !(horizon > 0.0 && steps > 0) {
        keys.errors.push("domain.horizon and domain.steps must be positive".into());
    }
    let past = keys.float("noise.past");
    if let Some(p) = past {
        if !(p.is_finite() && p >= 0.0) {
            keys.errors.push(format!("noise.past: must be finite and >= 0, got {p}"));
        }
    }

    let field = if command == Command::SimulateField {
        let lower = keys.floats("field.lower").unwrap_or_else(|| vec![0.0; d]);
        let upper = keys.floats("field.upper");
        let upper = keys.require("field.upper", upper).unwrap_or_else(|| vec![1.0; d]);
        let cells = keys.counts("field.cells", d).unwrap_or_else(|| vec![8; d]);
        if lower.len() != d || upper.len() != d {
            keys.errors.push(format!("field.lower / field.upper: expected {d} entries to match beta"));
        } else if lower.iter().zip(&upper).any(|(a, b)| !(*a >= 0.0 && a < b)) {
            keys.errors.push("field.lower / field.upper: need 0 <= lower < upper on every axis".into());
        }
        Some(FieldLattice { lower, upper, cells })
    } else {
        None
    };

    let forcing = keys.float_or("forcing", 0.0);
    let scheme = match keys.string("scheme").as_deref() {
        None | Some("exponential") => HeatScheme::Exponential,
        Some("explicit-euler") => HeatScheme::ExplicitEuler,
        Some(other) => {
            keys.errors.push(format!("scheme: unknown scheme {other:?} (exponential | explicit-euler)"));
            HeatScheme::Exponential
        }
    };
    let nonlinearity = match keys.string("nonlinearity.kind").as_deref() {
        None | Some("sine") => NonlinearityKind::Sine,
        Some("zero") => NonlinearityKind::Zero,
        Some("constant") => NonlinearityKind::Constant(keys.float_or("nonlinearity.value", 1.0)),
        Some(other) => {
            keys.errors.push(format!("nonlinearity.kind: unknown kind {other:?} (sine | zero | constant)"));
            NonlinearityKind::Sine
        }
    };
    let initial = match keys.string("initial").as_deref() {
        None | Some("zero") => InitialCondition::Zero,
        Some("sine") => InitialCondition::Sine,
        Some(other) => {
            keys.errors.push(format!("initial: unknown initial condition {other:?} (zero | sine)"));
            InitialCondition::Zero
        }
    };
    let picard = PicardSettings {
        tol: keys.float_or("picard.tol", 1e-8),
        max_iter: keys.uint("picard.max_iter").unwrap_or(50) as usize,
        mass_tolerance: keys.float_or("picard.mass_tolerance", 1e-6),
        allow_condition_violation: keys.boolean("picard.allow_condition_violation", false),
    };
    if !(picard.tol > 0.0 && picard.mass_tolerance > 0.0 && picard.mass_tolerance < 1.0) || picard.max_iter == 0 {
        keys.errors.push("picard: tol > 0, max_iter > 0 and mass_tolerance in (0, 1) required".into());
    }
    let defaults = crate::harness::SuiteConfig::default();
    let validate = ValidateSettings {
        replicas: keys.uint("validate.replicas").unwrap_or(defaults.replicas as u64) as usize,
        heat_replicas: keys.uint("validate.heat_replicas").unwrap_or(defaults.heat_replicas as u64) as usize,
        contrast_replicas: keys.uint("validate.contrast_replicas").unwrap_or(defaults.contrast_replicas as u64) as usize,
    };
    if validate.replicas < 2 || validate.heat_replicas < 2 || validate.contrast_replicas < 2 {
        keys.errors.push("validate: replica counts must be at least 2".into());
    }
    let plots = keys.boolean("plots", false);

    for k in keys.map.keys() {
        keys.errors.push(format!("{k}: unknown key"));
    }
    if !keys.errors.is_empty() {
        return Err(ConfigError { messages: keys.errors });
    }

    let mut conditions = Vec::new();
    let mut warnings = Vec::new();
    if let Some(b) = &beta {
        match command {
            Command::SolveHeat => {
                let ok = heat_l2_condition(beta0, b, d);
                conditions.push(("heat_l2_condition", ok));
                if !ok {
                    warnings.push(HEAT_WARNING.to_string());
                }
            }
            Command::SolveQuasilinear => {
                let heat = heat_l2_condition(beta0, b, d);
                let pic = picard_condition(b, d);
                conditions.push(("heat_l2_condition", heat));
                conditions.push(("picard_condition", pic));
                if !heat {
                    warnings.push(HEAT_WARNING.to_string());
                }
                if !pic {
                    warnings.push(PICARD_WARNING.to_string());
                }
            }
            _ => {}
        }
    }

    Ok(RunConfig {
        command,
        seed,
        replicas,
        model: model.unwrap_or_else(|| LevyModel::single_jump(2.0, 1.0).expect("valid default")),
        beta,
        beta0,
        domain_lower,
        domain_upper,
        domain_cells,
        horizon,
        steps,
        past,
        field,
        forcing,
        scheme,
        nonlinearity,
        initial,
        picard,
        validate,
        plots,
        conditions,
        warnings,
        canonical,
    })
}

fn parse_model(keys: &mut Keys, used: bool) -> Option<LevyModel> {
    let kind = keys.string("model.kind").unwrap_or_else(|| "finite".into());
    let epsilon = keys.float_or("model.epsilon", 0.0);
    let built = match kind.as_str() {
        "finite" => {
            let rate = keys.float_or("model.rate", 2.0);
            let marks = keys.floats("model.marks").unwrap_or_else(|| vec![1.0]);
            let probs = keys
                .floats("model.probabilities")
                .unwrap_or_else(|| vec![1.0 / marks.len() as f64; marks.len()]);
            if marks.len() != probs.len() {
                keys.errors.push("model.probabilities: expected one entry per mark".into());
                return None;
            }
            LevyModel::finite_activity(rate, marks.into_iter().zip(probs).collect(), epsilon)
        }
        "tempered-stable" => {
            let alpha = keys.float_or("model.alpha", 0.8);
            let lp = keys.float_or("model.lambda_plus", 1.0);
            let lm = keys.float_or("model.lambda_minus", 1.0);
            let scale = keys.float_or("model.scale", 1.0);
            LevyModel::tempered_stable(alpha, lp, lm, scale, epsilon)
        }
        other => {
            keys.errors.push(format!("model.kind: unknown kind {other:?} (finite | tempered-stable)"));
            return None;
        }
    };
    match built {
        Ok(m) => Some(m),
        Err(e) => {
            if used {
                keys.errors.push(format!("model: {e}"));
            }
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POISSON: &str = "command = \"solve-poisson\"\nbeta = [0.3]\n";

    #[test]
    fn minimal_poisson_config() {
        let c = parse_config(POISSON, None).unwrap();
        assert_eq!(c.command, Command::SolvePoisson);
        assert_eq!(c.replicas, 1);
        assert_eq!(c.domain_cells, vec![32]);
        assert_eq!(c.model.second_moment(), 2.0);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn beta_range_is_named() {
        let e = parse_config("command = \"solve-poisson\"\nbeta = [0.7]\n", None).unwrap_err();
        assert_eq!(e.messages, vec!["beta[1] out of (0, 0.5)".to_string()]);
        let e = parse_config("command = \"solve-poisson\"\nbeta = [0.2, 0.5]\n", None).unwrap_err();
        assert_eq!(e.messages, vec!["beta[2] out of (0, 0.5)".to_string()]);
    }

    #[test]
    fn picard_violation_is_a_warning() {
        let text = "command = \"solve-quasilinear\"\nbeta0 = 0.2\nbeta = [0.2, 0.2, 0.2, 0.2]\n";
        let c = parse_config(text, None).unwrap();
        assert!(c.warnings.iter().any(|w| w.starts_with("picard_condition violated")));
        assert!(c.conditions.contains(&("picard_condition", false)));
    }

    #[test]
    fn every_invalid_key_is_listed() {
        let text = "command = \"solve-heat\"\nbeta = [0.9]\nbogus = 1\n[domain]\nsteps = \"x\"\n";
        let e = parse_config(text, None).unwrap_err();
        let all = e.to_string();
        for needle in ["beta[1] out of (0, 0.5)", "bogus: unknown key", "domain.steps", "beta0: missing required key"] {
            assert!(all.contains(needle), "{needle} not in {all}");
        }
    }

    #[test]
    fn missing_beta_and_malformed_text() {
        let e = parse_config("command = \"solve-poisson\"\n", None).unwrap_err();
        assert_eq!(e.messages, vec!["beta: missing required key".to_string()]);
        assert!(parse_config("beta = [", Some(Command::SolvePoisson)).is_err());
        assert!(parse_config("", Some(Command::Validate)).is_ok());
        let e = parse_config(POISSON, Some(Command::SolveHeat)).unwrap_err();
        assert!(e.messages[0].starts_with("command:"));
    }

    #[test]
    fn hash_depends_on_content_only() {
        let a = parse_config(POISSON, None).unwrap();
        let b = parse_config("beta = [0.3]\ncommand = \"solve-poisson\"\n", None).unwrap();
        let c = parse_config("command = \"solve-poisson\"\nbeta = [0.31]\n", None).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn lattice_points() {
        let l = FieldLattice {
            lower: vec![0.0, 1.0],
            upper: vec![1.0, 2.0],
            cells: vec![2, 1],
        };
        let p = l.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0.0, 1.0]);
        assert_eq!(p[5], vec![1.0, 2.0]);
    }
}
