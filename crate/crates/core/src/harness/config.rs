use std::path::PathBuf;

use toml::{Table, Value};

use crate::domain::Domain;
use crate::engine::{MetaRunConfig, MetaUpdate, SimStrategy};
use crate::environments::{DriftSchedule, EnvKind, EnvSpec, LossKind};
use crate::error::ArubaError;
use crate::federated::{Displacement, FederatedConfig, Variant};
use crate::meta_init::InitStrategy;
use crate::param::ParamVector;
use crate::within_task::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Static,
    Dynamic,
    Geometry,
    Batch,
    Federated,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Static => "static",
            ExperimentKind::Dynamic => "dynamic",
            ExperimentKind::Geometry => "geometry",
            ExperimentKind::Batch => "batch",
            ExperimentKind::Federated => "federated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaBlock {
    pub init: InitStrategy,
    pub sim: SimStrategy,
    pub mode: Mode,
    pub update: MetaUpdate,
    pub diameter: Option<f64>,
}

impl MetaBlock {
    pub fn run_config(&self, env: &EnvSpec) -> MetaRunConfig {
        let mut config = MetaRunConfig::new(env.domain.clone(), env.tasks, self.init, self.sim);
        config.mode = self.mode;
        config.update = self.update;
        config.diameter = self.diameter;
        config
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchBlock {
    /// Prefix lengths T at which the averaged meta-state is evaluated.
    pub checkpoints: Vec<usize>,
    pub n_test_tasks: usize,
    pub m_test: usize,
    pub n_risk_samples: usize,
}

/// A validated experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub seeds: Vec<u64>,
    pub repetitions: usize,
    pub output: PathBuf,
    /// Environment template; its seed is replaced per run.
    pub env: Option<EnvSpec>,
    pub meta: Option<MetaBlock>,
    pub batch: Option<BatchBlock>,
    pub federated: Option<FederatedConfig>,
}

/// Schema errors, all of them.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} configuration error(s):\n  {}", .0.len(), .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

impl From<ConfigErrors> for ArubaError {
    fn from(e: ConfigErrors) -> Self {
        ArubaError::InvalidConfig(e.0.join("; "))
    }
}

struct Walker {
    errors: Vec<String>,
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walker {
    fn error(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn known_keys(&mut self, table: &Table, path: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.error(&join(path, key), format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }

    fn table<'a>(&mut self, table: &'a Table, path: &str, key: &str) -> Option<&'a Table> {
        match table.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                self.error(&join(path, key), format!("expected a table, found {}", type_name(v)));
                None
            }
        }
    }

    fn number(&mut self, table: &Table, path: &str, key: &str) -> Option<f64> {
        match table.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.error(&join(path, key), format!("expected a number, found {}", type_name(v)));
                None
            }
        }
    }

    /// A real number satisfying `check`, or `default` when absent.
    fn real(&mut self, table: &Table, path: &str, key: &str, default: f64, check: Constraint) -> f64 {
        self.opt_real(table, path, key, check).unwrap_or(default)
    }

    fn opt_real(&mut self, table: &Table, path: &str, key: &str, check: Constraint) -> Option<f64> {
        let x = self.number(table, path, key)?;
        if let Some(msg) = check.violation(x) {
            self.error(&join(path, key), format!("{msg} (got {x})"));
            return None;
        }
        Some(x)
    }

    fn integer(&mut self, table: &Table, path: &str, key: &str, default: usize, min: usize) -> usize {
        match table.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= min as i64 => *i as usize,
            Some(Value::Integer(i)) => {
                self.error(&join(path, key), format!("must be at least {min} (got {i})"));
                default
            }
            Some(v) => {
                self.error(&join(path, key), format!("expected an integer, found {}", type_name(v)));
                default
            }
        }
    }

    fn boolean(&mut self, table: &Table, path: &str, key: &str, default: bool) -> bool {
        match table.get(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.error(&join(path, key), format!("expected a boolean, found {}", type_name(v)));
                default
            }
        }
    }

    fn string<'a>(&mut self, table: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match table.get(key)? {
            Value::String(s) => Some(s),
            v => {
                self.error(&join(path, key), format!("expected a string, found {}", type_name(v)));
                None
            }
        }
    }

    fn choice<'a>(&mut self, table: &'a Table, path: &str, key: &str, default: &'a str, allowed: &[&str]) -> &'a str {
        match self.string(table, path, key) {
            None => default,
            Some(s) if allowed.contains(&s) => s,
            Some(s) => {
                self.error(&join(path, key), format!("unknown value \"{s}\" (expected one of: {})", allowed.join(", ")));
                default
            }
        }
    }

    fn reals(&mut self, table: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let full = join(path, key);
        match table.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Float(x) if x.is_finite() => out.push(*x),
                        Value::Integer(n) => out.push(*n as f64),
                        v => {
                            self.error(&format!("{full}[{i}]"), format!("expected a finite number, found {}", type_name(v)));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                self.error(&full, format!("expected an array, found {}", type_name(v)));
                None
            }
        }
    }

    fn vector(&mut self, table: &Table, path: &str, key: &str) -> Option<ParamVector> {
        let values = self.reals(table, path, key)?;
        match ParamVector::new(values) {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(&join(path, key), e);
                None
            }
        }
    }

    fn integers(&mut self, table: &Table, path: &str, key: &str) -> Option<Vec<u64>> {
        let full = join(path, key);
        match table.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Integer(n) if *n >= 0 => out.push(*n as u64),
                        v => {
                            self.error(&format!("{full}[{i}]"), format!("expected a nonnegative integer, found {v}"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                self.error(&full, format!("expected an array, found {}", type_name(v)));
                None
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Constraint {
    Positive,
    NonNegative,
    Fraction,
    UnitInterval,
}

impl Constraint {
    fn violation(&self, x: f64) -> Option<&'static str> {
        let ok = x.is_finite()
            && match self {
                Constraint::Positive => x > 0.0,
                Constraint::NonNegative => x >= 0.0,
                Constraint::Fraction => x > 0.0 && x < 1.0,
                Constraint::UnitInterval => x > 0.0 && x <= 1.0,
            };
        if ok {
            None
        } else {
            Some(match self {
                Constraint::Positive => "must be positive",
                Constraint::NonNegative => "must be nonnegative",
                Constraint::Fraction => "must lie strictly between 0 and 1",
                Constraint::UnitInterval => "must lie in (0, 1]",
            })
        }
    }
}

const TOP_KEYS: &[&str] = &["experiment", "name", "seeds", "repetitions", "output", "env", "meta", "batch", "federated"];

/// Parses and validates an experiment file, reporting every schema error.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let root: Table = toml::from_str(text).map_err(|e| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut w = Walker { errors: Vec::new() };
    w.known_keys(&root, "", TOP_KEYS);
    let kind = match w.string(&root, "", "experiment") {
        None if !root.contains_key("experiment") => {
            w.error("experiment", "missing (expected one of: static, dynamic, geometry, batch, federated)");
            None
        }
        None => None,
        Some("static") => Some(ExperimentKind::Static),
        Some("dynamic") => Some(ExperimentKind::Dynamic),
        Some("geometry") => Some(ExperimentKind::Geometry),
        Some("batch") => Some(ExperimentKind::Batch),
        Some("federated") => Some(ExperimentKind::Federated),
        Some(other) => {
            w.error("experiment", format!("unknown kind \"{other}\""));
            None
        }
    };
    let name = w.string(&root, "", "name").map(str::to_string);
    if let Some(n) = &name {
        if n.is_empty() || n.contains([',', '"', '\n', '\r']) {
            w.error("name", "must be non-empty and free of commas, quotes and line breaks");
        }
    }
    let seeds = w.integers(&root, "", "seeds").unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        w.error("seeds", "must list at least one seed");
    }
    let repetitions = w.integer(&root, "", "repetitions", 1, 1);
    let output = PathBuf::from(w.string(&root, "", "output").unwrap_or("results"));

    let Some(kind) = kind else {
        return Err(ConfigErrors(w.errors));
    };
    let empty = Table::new();
    let mut env = None;
    let mut meta = None;
    let mut batch = None;
    let mut federated = None;
    match kind {
        ExperimentKind::Federated => {
            for block in ["env", "meta", "batch"] {
                if root.contains_key(block) {
                    w.error(block, "not used by federated experiments");
                }
            }
            let t = w.table(&root, "", "federated").unwrap_or(&empty);
            federated = Some(parse_federated(&mut w, t));
        }
        _ => {
            if root.contains_key("federated") {
                w.error("federated", "only used by federated experiments");
            }
            if kind != ExperimentKind::Batch && root.contains_key("batch") {
                w.error("batch", "only used by batch experiments");
            }
            let env_table = w.table(&root, "", "env").unwrap_or(&empty);
            env = parse_env(&mut w, env_table, kind);
            let meta_table = w.table(&root, "", "meta").unwrap_or(&empty);
            meta = Some(parse_meta(&mut w, meta_table));
            if kind == ExperimentKind::Batch {
                let batch_table = w.table(&root, "", "batch").unwrap_or(&empty);
                batch = env.as_ref().map(|e| parse_batch(&mut w, batch_table, e));
            }
            if let (Some(env), Some(meta)) = (&env, &meta) {
                if let Err(e) = meta.run_config(env).validate() {
                    w.error("meta", e);
                }
            }
        }
    }
    if w.errors.is_empty() {
        Ok(ExperimentConfig {
            kind,
            name: name.unwrap_or_else(|| kind.as_str().to_string()),
            seeds,
            repetitions,
            output,
            env,
            meta,
            batch,
            federated,
        })
    } else {
        Err(ConfigErrors(w.errors))
    }
}

fn parse_domain(w: &mut Walker, table: &Table, dim: usize) -> Option<Domain> {
    let path = "env.domain";
    let kind = w.choice(table, path, "kind", "ball", &["ball", "box"]);
    let built = match kind {
        "ball" => {
            w.known_keys(table, path, &["kind", "radius", "center"]);
            let radius = w.real(table, path, "radius", 1.0, Constraint::Positive);
            let center = w.vector(table, path, "center").unwrap_or_else(|| ParamVector::zeros(dim));
            if center.dim() != dim {
                w.error(&join(path, "center"), format!("has {} coordinates, env.dim is {dim}", center.dim()));
                return None;
            }
            Domain::ball(center, radius)
        }
        _ => {
            w.known_keys(table, path, &["kind", "half_width", "lo", "hi"]);
            match (w.vector(table, path, "lo"), w.vector(table, path, "hi")) {
                (Some(lo), Some(hi)) => {
                    if lo.dim() != dim || hi.dim() != dim {
                        w.error(path, format!("lo and hi need {dim} coordinates"));
                        return None;
                    }
                    Domain::new(crate::domain::DomainKind::Box { lo, hi })
                }
                (None, None) => Domain::cube(dim, w.real(table, path, "half_width", 1.0, Constraint::Positive)),
                _ => {
                    w.error(path, "lo and hi must be given together");
                    return None;
                }
            }
        }
    };
    match built {
        Ok(d) => Some(d),
        Err(e) => {
            w.error(path, e);
            None
        }
    }
}

fn parse_env(w: &mut Walker, t: &Table, kind: ExperimentKind) -> Option<EnvSpec> {
    let path = "env";
    let mut allowed = vec!["dim", "m", "tasks", "family", "lipschitz", "noise", "center", "domain"];
    allowed.extend_from_slice(match kind {
        ExperimentKind::Static => &["deviation"][..],
        ExperimentKind::Dynamic => &["deviation", "schedule", "points", "step"],
        ExperimentKind::Geometry => &["spread", "rotate"],
        ExperimentKind::Batch => &["dispersion"],
        ExperimentKind::Federated => &[],
    });
    w.known_keys(t, path, &allowed);
    let dim = w.integer(t, path, "dim", 5, 1);
    let m = w.integer(t, path, "m", 50, 1);
    let tasks = w.integer(t, path, "tasks", 200, 1);
    let family = match w.choice(t, path, "family", "quadratic", &["quadratic", "logistic"]) {
        "logistic" => LossKind::Logistic,
        _ => LossKind::Quadratic,
    };
    let lipschitz = w.real(t, path, "lipschitz", 1.0, Constraint::Positive);
    let noise = w.real(t, path, "noise", 0.1, Constraint::NonNegative);
    let center = w.vector(t, path, "center");
    let empty = Table::new();
    let domain_table = w.table(t, path, "domain").unwrap_or(&empty);
    let domain = parse_domain(w, domain_table, dim);
    let env_kind = match kind {
        ExperimentKind::Static => {
            Some(EnvKind::Static { deviation: w.real(t, path, "deviation", 0.1, Constraint::NonNegative) })
        }
        ExperimentKind::Dynamic => {
            let deviation = w.real(t, path, "deviation", 0.05, Constraint::NonNegative);
            let schedule = match w.choice(t, path, "schedule", "phases", &["phases", "random_walk"]) {
                "random_walk" => {
                    if t.contains_key("points") {
                        w.error("env.points", "only used by the phases schedule");
                    }
                    Some(DriftSchedule::RandomWalk { step: w.real(t, path, "step", 0.01, Constraint::NonNegative) })
                }
                _ => {
                    if t.contains_key("step") {
                        w.error("env.step", "only used by the random_walk schedule");
                    }
                    phase_points(w, t, dim).map(|points| DriftSchedule::Phases { points })
                }
            };
            schedule.map(|schedule| EnvKind::Dynamic { schedule, deviation })
        }
        ExperimentKind::Geometry => {
            let spread = w.vector(t, path, "spread");
            let rotate = w.boolean(t, path, "rotate", false);
            match spread {
                Some(spread) => Some(EnvKind::Geometry { spread, rotate }),
                None => {
                    if !t.contains_key("spread") {
                        w.error("env.spread", "missing (per-coordinate deviations)");
                    }
                    None
                }
            }
        }
        ExperimentKind::Batch => {
            Some(EnvKind::Distributional { dispersion: w.real(t, path, "dispersion", 0.1, Constraint::NonNegative) })
        }
        ExperimentKind::Federated => None,
    };
    let spec = EnvSpec { kind: env_kind?, dim, m, tasks, family, domain: domain?, lipschitz, noise, center, seed: 0 };
    if let Err(e) = spec.validate().and_then(|_| spec.reference_center().map(|_| ())) {
        w.error(path, e);
        return None;
    }
    Some(spec)
}

fn phase_points(w: &mut Walker, t: &Table, dim: usize) -> Option<Vec<ParamVector>> {
    let Some(value) = t.get("points") else {
        w.error("env.points", "missing (one point per phase)");
        return None;
    };
    let Value::Array(rows) = value else {
        w.error("env.points", format!("expected an array of arrays, found {}", type_name(value)));
        return None;
    };
    let mut points = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut holder = Table::new();
        holder.insert("p".into(), row.clone());
        let p = w.vector(&holder, &format!("env.points[{i}]"), "p")?;
        if p.dim() != dim {
            w.error(&format!("env.points[{i}]"), format!("has {} coordinates, env.dim is {dim}", p.dim()));
            return None;
        }
        points.push(p);
    }
    if points.is_empty() {
        w.error("env.points", "needs at least one point");
        return None;
    }
    Some(points)
}

fn parse_meta(w: &mut Walker, t: &Table) -> MetaBlock {
    let path = "meta";
    w.known_keys(t, path, &["init", "lambda", "sim", "v", "eps", "zeta", "p", "mode", "update", "diameter"]);
    let init = match w.choice(t, path, "init", "ftl_mean", &["ftl_mean", "aogd", "ogd_dynamic"]) {
        "aogd" => InitStrategy::Aogd,
        "ogd_dynamic" => InitStrategy::OgdDynamic { lambda: w.real(t, path, "lambda", 0.1, Constraint::UnitInterval) },
        _ => InitStrategy::FtlMean,
    };
    if !matches!(init, InitStrategy::OgdDynamic { .. }) && t.contains_key("lambda") {
        w.error("meta.lambda", "only used by init = \"ogd_dynamic\"");
    }
    let sim_name =
        w.choice(t, path, "sim", "eps_ewoo", &["fixed", "eps_ftl", "eps_ewoo", "isotropic", "diagonal", "matrix"]);
    let uses: &[&str] = match sim_name {
        "fixed" => &["v"],
        "eps_ftl" | "eps_ewoo" | "matrix" => &["eps", "zeta"],
        _ => &["eps", "zeta", "p"],
    };
    for key in ["v", "eps", "zeta", "p"] {
        let used = uses.contains(&key) && !(key == "zeta" && sim_name != "matrix");
        if !used && t.contains_key(key) {
            w.error(&join(path, key), format!("not used by sim = \"{sim_name}\""));
        }
    }
    let sim = match sim_name {
        "fixed" => SimStrategy::Fixed { v: w.real(t, path, "v", 1.0, Constraint::Positive) },
        "eps_ftl" => SimStrategy::EpsFtl { eps: w.real(t, path, "eps", 0.1, Constraint::NonNegative) },
        "isotropic" => SimStrategy::Isotropic {
            eps: w.real(t, path, "eps", 0.05, Constraint::Positive),
            zeta: w.real(t, path, "zeta", 0.05, Constraint::Positive),
            p: w.real(t, path, "p", 1.0, Constraint::Positive),
        },
        "diagonal" => SimStrategy::Diagonal {
            eps: w.real(t, path, "eps", 0.05, Constraint::Positive),
            zeta: w.real(t, path, "zeta", 0.05, Constraint::Positive),
            p: w.real(t, path, "p", 1.0, Constraint::Positive),
        },
        "matrix" => SimStrategy::Matrix {
            eps: w.opt_real(t, path, "eps", Constraint::Positive),
            zeta: w.opt_real(t, path, "zeta", Constraint::Positive),
        },
        _ => SimStrategy::EpsEwoo { eps: w.opt_real(t, path, "eps", Constraint::Positive) },
    };
    let mode = match w.choice(t, path, "mode", "omd_linearized", &["omd_linearized", "ftrl_full"]) {
        "ftrl_full" => Mode::FtrlFull,
        _ => Mode::OmdLinearized,
    };
    let update =
        match w.choice(t, path, "update", "optimal_action", &["optimal_action", "last_iterate", "average_iterate"]) {
            "last_iterate" => MetaUpdate::LastIterate,
            "average_iterate" => MetaUpdate::AverageIterate,
            _ => MetaUpdate::OptimalAction,
        };
    let diameter = w.opt_real(t, path, "diameter", Constraint::Positive);
    MetaBlock { init, sim, mode, update, diameter }
}

fn parse_batch(w: &mut Walker, t: &Table, env: &EnvSpec) -> BatchBlock {
    let path = "batch";
    w.known_keys(t, path, &["checkpoints", "n_test_tasks", "m_test", "n_risk_samples"]);
    let checkpoints = match w.integers(t, path, "checkpoints") {
        Some(c) => c.into_iter().map(|x| x as usize).collect(),
        None => vec![env.tasks],
    };
    if checkpoints.is_empty() || checkpoints.iter().any(|&c| c == 0 || c > env.tasks) {
        w.error("batch.checkpoints", format!("each checkpoint must lie in 1..={}", env.tasks));
    }
    if checkpoints.windows(2).any(|p| p[1] <= p[0]) {
        w.error("batch.checkpoints", "must be strictly increasing");
    }
    BatchBlock {
        checkpoints,
        n_test_tasks: w.integer(t, path, "n_test_tasks", 100, 1),
        m_test: w.integer(t, path, "m_test", env.m, 1),
        n_risk_samples: w.integer(t, path, "n_risk_samples", 50, 1),
    }
}

fn parse_federated(w: &mut Walker, t: &Table) -> FederatedConfig {
    let path = "federated";
    w.known_keys(
        t,
        path,
        &[
            "dim",
            "clients",
            "samples_per_client",
            "dispersion",
            "noise",
            "rounds",
            "clients_per_round",
            "local_steps",
            "batch_size",
            "eps",
            "zeta",
            "p",
            "variant",
            "eta",
            "displacement",
            "train_fraction",
            "meta_train_fraction",
            "refine_steps",
        ],
    );
    let d = FederatedConfig::default();
    let variant = match w.choice(t, path, "variant", "per_coordinate", &["vanilla", "isotropic", "per_coordinate"]) {
        "vanilla" => Variant::Vanilla { eta: w.real(t, path, "eta", 1.0, Constraint::Positive) },
        "isotropic" => Variant::Isotropic,
        _ => Variant::PerCoordinate,
    };
    if !matches!(variant, Variant::Vanilla { .. }) && t.contains_key("eta") {
        w.error("federated.eta", "only used by variant = \"vanilla\"");
    }
    let displacement = match w.choice(t, path, "displacement", "server", &["server", "client_mean"]) {
        "client_mean" => Displacement::ClientMean,
        _ => Displacement::Server,
    };
    let config = FederatedConfig {
        dim: w.integer(t, path, "dim", d.dim, 1),
        clients: w.integer(t, path, "clients", d.clients, 2),
        samples_per_client: w.integer(t, path, "samples_per_client", d.samples_per_client, 2),
        dispersion: w.real(t, path, "dispersion", d.dispersion, Constraint::NonNegative),
        noise: w.real(t, path, "noise", d.noise, Constraint::NonNegative),
        rounds: w.integer(t, path, "rounds", d.rounds, 1),
        clients_per_round: w.integer(t, path, "clients_per_round", d.clients_per_round, 1),
        local_steps: w.integer(t, path, "local_steps", d.local_steps, 1),
        batch_size: w.integer(t, path, "batch_size", d.batch_size, 1),
        eps: w.real(t, path, "eps", d.eps, Constraint::Positive),
        zeta: w.real(t, path, "zeta", d.zeta, Constraint::Positive),
        p: w.real(t, path, "p", d.p, Constraint::Positive),
        variant,
        displacement,
        train_fraction: w.real(t, path, "train_fraction", d.train_fraction, Constraint::Fraction),
        meta_train_fraction: w.real(t, path, "meta_train_fraction", d.meta_train_fraction, Constraint::Fraction),
        refine_steps: w.integer(t, path, "refine_steps", d.refine_steps, 0),
        seed: 0,
    };
    if w.errors.is_empty() {
        if let Err(e) = config.validate() {
            w.error(path, e);
        }
    }
    config
}

pub fn load_config(path: &std::path::Path) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("{}: cannot read ({e})", path.display())]))?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// Replaces the seed list with a single seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    /// Seeds of every run in output order: seed-major, then repetition.
    pub fn run_seeds(&self) -> Vec<u64> {
        self.seeds
            .iter()
            .flat_map(|&s| {
                (0..self.repetitions).map(move |r| {
                    if r == 0 {
                        s
                    } else {
                        crate::rng::SeedStream::new(s).named("repetition").child(r as u64).seed()
                    }
                })
            })
            .collect()
    }
}
