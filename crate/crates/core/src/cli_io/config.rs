//! TOML configuration documents.
//!
//! Units: resistances in pu, reactances in pu at the nominal frequency,
//! time constants in seconds, angles in radians, gains dimensionless.

use crate::controller::{CurrentCtrlGains, PllGains, PowerCtrlGains, Topology};
use crate::frames::GridSourceParams;
use crate::grid_support::{FreqSupportParams, VoltVarParams};
use crate::network::NetworkParams;
use crate::numerics::{CompanionForm, SmoothingParams};
use crate::simulator::{validate, Event, Integrator, NetworkFrame, Scenario, ScheduledEvent, SimConfig, ValidationError};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value: {0}")]
    Invalid(#[from] ValidationError),
}

/// Per-phase resistance and reactance of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub r: [f64; 3],
    pub x: [f64; 3],
}

/// A configuration as written, before reactances are converted to inductances.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    pub grid: GridSourceParams,
    pub filter: Branch,
    pub network: Branch,
    pub pll: PllGains,
    pub power: PowerCtrlGains,
    pub p_ref: f64,
    pub q_ref: f64,
    pub current: CurrentCtrlGains,
    pub freq_support: FreqSupportParams,
    pub volt_var: VoltVarParams,
    pub simulation: SimConfig,
    pub events: Vec<ScheduledEvent>,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        let sc = Scenario::default();
        Self {
            grid: sc.grid,
            filter: Branch { r: [0.01; 3], x: [0.1; 3] },
            network: Branch { r: [0.01; 3], x: [0.05; 3] },
            pll: sc.pll,
            power: sc.power,
            p_ref: sc.p_ref,
            q_ref: sc.q_ref,
            current: sc.current,
            freq_support: sc.freq_support,
            volt_var: sc.volt_var,
            simulation: SimConfig::default(),
            events: Vec::new(),
        }
    }
}

const SECTIONS: [(&str, &[&str]); 9] = [
    ("grid", &["vm", "Vm", "f", "theta_dist", "t_dist"]),
    ("filter", &["rf", "xf"]),
    ("network", &["rg", "xg"]),
    ("pll", &["kp", "ki", "tf"]),
    ("power_control", &["kp", "ki", "tf", "p_ref", "q_ref"]),
    ("current_control", &["kp", "ki", "tf"]),
    ("frequency_support", &["enabled", "kf", "fdb"]),
    ("volt_var", &["enabled", "kv", "vdb", "vtarget", "qmax"]),
    (
        "simulation",
        &[
            "dt",
            "t_end",
            "topology",
            "network_frame",
            "companion_form",
            "integrator",
            "tol",
            "max_iter",
            "damping",
            "epsilon",
            "init_residual_bound",
        ],
    ),
];

const EVENT_KEYS: [&str; 5] = ["time", "kind", "value", "frequency", "volt_var"];

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(ValidationError::new(path, message))
}

/// Parses TOML text into a table, reporting syntax errors by line.
pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError::Parse { line, message: e.message().trim().to_string() }
    })
}

/// Parses and validates a document.
pub fn parse_document(text: &str) -> Result<ConfigDocument, ConfigError> {
    let doc = ConfigDocument::from_table(&parse_table(text)?)?;
    doc.resolve()?;
    Ok(doc)
}

/// Parses a document into a validated scenario and configuration.
pub fn parse_config(text: &str) -> Result<(Scenario, SimConfig), ConfigError> {
    ConfigDocument::from_table(&parse_table(text)?)?.resolve()
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| number(v, &self.path(key)))
    }

    fn required(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.get(key).ok_or_else(|| ConfigError::MissingKey(self.path(key)))?;
        number(v, &self.path(key))
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(invalid(&self.path(key), "expected true or false")),
        }
    }

    fn choice<T: Copy>(&self, key: &str, default: T, options: &[(&str, T)]) -> Result<T, ConfigError> {
        let Some(v) = self.get(key) else { return Ok(default) };
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        let expected = || invalid(&self.path(key), format!("expected one of {}", names.join(", ")));
        let s = v.as_str().ok_or_else(expected)?;
        options.iter().find(|(n, _)| *n == s).map(|(_, t)| *t).ok_or_else(expected)
    }

    fn phases(&self, key: &str, default: [f64; 3]) -> Result<[f64; 3], ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(a)) => {
                if a.len() != 3 {
                    return Err(invalid(&self.path(key), "expected a number or three per-phase numbers"));
                }
                let mut out = [0.0; 3];
                for (o, v) in out.iter_mut().zip(a) {
                    *o = number(v, &self.path(key))?;
                }
                Ok(out)
            }
            Some(v) => Ok([number(v, &self.path(key))?; 3]),
        }
    }
}

fn number(v: &Value, path: &str) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(path, "expected a number")),
    }
}

const TOPOLOGIES: [(&str, Topology); 2] = [("resistive", Topology::Resistive), ("rl", Topology::Rl)];
const FRAMES: [(&str, NetworkFrame); 2] = [("abc", NetworkFrame::Abc), ("dq", NetworkFrame::Dq)];
const FORMS: [(&str, CompanionForm); 2] = [("norton", CompanionForm::Norton), ("thevenin", CompanionForm::Thevenin)];
const INTEGRATORS: [(&str, Integrator); 2] =
    [("trapezoidal", Integrator::Trapezoidal), ("sequential_explicit", Integrator::SequentialExplicit)];

fn name_of<T: PartialEq>(options: &[(&'static str, T)], value: T) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).expect("listed option")
}

impl ConfigDocument {
    /// Reads a parsed table, filling defaults. Does not range-check values.
    pub fn from_table(table: &Table) -> Result<Self, ConfigError> {
        for (name, value) in table {
            if name == "events" {
                continue;
            }
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
                return Err(ConfigError::UnknownKey(name.clone()));
            };
            let Value::Table(t) = value else {
                return Err(invalid(name, "expected a table"));
            };
            if let Some(k) = t.keys().find(|k| !keys.contains(&k.as_str())) {
                return Err(ConfigError::UnknownKey(format!("{name}.{k}")));
            }
        }
        let section = |name: &'static str| Section { name, table: table.get(name).and_then(Value::as_table) };
        let d = Self::default();

        let grid = section("grid");
        if grid.get("vm").is_some() && grid.get("Vm").is_some() {
            return Err(invalid("grid.vm", "given twice (as vm and Vm)"));
        }
        let vm = match grid.get("Vm") {
            Some(v) => number(v, "grid.Vm")?,
            None => grid.required("vm")?,
        };
        let grid = GridSourceParams {
            vm,
            f: grid.required("f")?,
            theta_dist: grid.f64("theta_dist", d.grid.theta_dist)?,
            t_dist: grid.f64("t_dist", d.grid.t_dist)?,
        };

        let filter = section("filter");
        let filter = Branch { r: filter.phases("rf", d.filter.r)?, x: filter.phases("xf", d.filter.x)? };
        let network = section("network");
        let network = Branch { r: network.phases("rg", d.network.r)?, x: network.phases("xg", d.network.x)? };

        let s = section("pll");
        let pll = PllGains { kp: s.f64("kp", d.pll.kp)?, ki: s.f64("ki", d.pll.ki)?, tf: s.f64("tf", d.pll.tf)? };
        let s = section("power_control");
        let power = PowerCtrlGains { kp: s.f64("kp", d.power.kp)?, ki: s.f64("ki", d.power.ki)?, tf: s.f64("tf", d.power.tf)? };
        let (p_ref, q_ref) = (s.f64("p_ref", d.p_ref)?, s.f64("q_ref", d.q_ref)?);
        let s = section("current_control");
        let current =
            CurrentCtrlGains { kp: s.f64("kp", d.current.kp)?, ki: s.f64("ki", d.current.ki)?, tf: s.f64("tf", d.current.tf)? };

        let s = section("frequency_support");
        let fs = d.freq_support;
        let freq_support =
            FreqSupportParams { enabled: s.bool("enabled", fs.enabled)?, kf: s.f64("kf", fs.kf)?, fdb: s.f64("fdb", fs.fdb)? };
        let s = section("volt_var");
        let vv = d.volt_var;
        let volt_var = VoltVarParams {
            enabled: s.bool("enabled", vv.enabled)?,
            kv: s.f64("kv", vv.kv)?,
            vdb: s.f64("vdb", vv.vdb)?,
            vtarget: s.f64("vtarget", vv.vtarget)?,
            qmax: s.f64("qmax", vv.qmax)?,
        };

        let s = section("simulation");
        let c = d.simulation;
        let max_iter = match s.get("max_iter") {
            None => c.solver.max_iter,
            Some(Value::Integer(i)) if *i >= 1 => *i as usize,
            Some(_) => return Err(invalid("simulation.max_iter", "expected a positive integer")),
        };
        let simulation = SimConfig {
            dt: s.required("dt")?,
            t_end: s.required("t_end")?,
            topology: s.choice("topology", c.topology, &TOPOLOGIES)?,
            network_frame: s.choice("network_frame", c.network_frame, &FRAMES)?,
            companion_form: s.choice("companion_form", c.companion_form, &FORMS)?,
            integrator: s.choice("integrator", c.integrator, &INTEGRATORS)?,
            solver: crate::numerics::NewtonSettings {
                tol: s.f64("tol", c.solver.tol)?,
                max_iter,
                damping: s.f64("damping", c.solver.damping)?,
            },
            epsilon: SmoothingParams { epsilon: s.f64("epsilon", c.epsilon.epsilon)? },
            init_residual_bound: s.f64("init_residual_bound", c.init_residual_bound)?,
        };

        let events = match table.get("events") {
            None => Vec::new(),
            Some(Value::Array(items)) => {
                items.iter().enumerate().map(|(k, v)| read_event(k, v)).collect::<Result<_, _>>()?
            }
            Some(_) => return Err(invalid("events", "expected an array of tables ([[events]])")),
        };

        Ok(Self {
            grid,
            filter,
            network,
            pll,
            power,
            p_ref,
            q_ref,
            current,
            freq_support,
            volt_var,
            simulation,
            events,
        })
    }

    /// Converts reactances at the nominal frequency and validates the result.
    pub fn resolve(&self) -> Result<(Scenario, SimConfig), ConfigError> {
        let omega = self.grid.omega();
        let l = |x: [f64; 3]| x.map(|v| v / omega);
        let scenario = Scenario {
            grid: self.grid,
            network: NetworkParams { rf: self.filter.r, lf: l(self.filter.x), rg: self.network.r, lg: l(self.network.x) },
            pll: self.pll,
            power: self.power,
            current: self.current,
            freq_support: self.freq_support,
            volt_var: self.volt_var,
            p_ref: self.p_ref,
            q_ref: self.q_ref,
            events: self.events.clone(),
        };
        validate(&scenario, &self.simulation)?;
        Ok((scenario, self.simulation))
    }

    /// Every key written out explicitly, so the result parses back to `self`.
    pub fn to_table(&self) -> Table {
        fn table<const K: usize>(entries: [(&str, Value); K]) -> Value {
            Value::Table(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
        }
        let phases = |v: [f64; 3]| {
            if v.iter().all(|x| *x == v[0]) {
                Value::Float(v[0])
            } else {
                Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
            }
        };
        let f = Value::Float;
        let s = |v: &'static str| Value::String(v.to_string());
        let c = &self.simulation;
        let mut out = Table::new();
        out.insert(
            "grid".into(),
            table([
                ("vm", f(self.grid.vm)),
                ("f", f(self.grid.f)),
                ("theta_dist", f(self.grid.theta_dist)),
                ("t_dist", f(self.grid.t_dist)),
            ]),
        );
        out.insert("filter".into(), table([("rf", phases(self.filter.r)), ("xf", phases(self.filter.x))]));
        out.insert("network".into(), table([("rg", phases(self.network.r)), ("xg", phases(self.network.x))]));
        out.insert("pll".into(), table([("kp", f(self.pll.kp)), ("ki", f(self.pll.ki)), ("tf", f(self.pll.tf))]));
        out.insert(
            "power_control".into(),
            table([
                ("kp", f(self.power.kp)),
                ("ki", f(self.power.ki)),
                ("tf", f(self.power.tf)),
                ("p_ref", f(self.p_ref)),
                ("q_ref", f(self.q_ref)),
            ]),
        );
        out.insert(
            "current_control".into(),
            table([("kp", f(self.current.kp)), ("ki", f(self.current.ki)), ("tf", f(self.current.tf))]),
        );
        let fs = &self.freq_support;
        out.insert(
            "frequency_support".into(),
            table([("enabled", Value::Boolean(fs.enabled)), ("kf", f(fs.kf)), ("fdb", f(fs.fdb))]),
        );
        let vv = &self.volt_var;
        out.insert(
            "volt_var".into(),
            table([
                ("enabled", Value::Boolean(vv.enabled)),
                ("kv", f(vv.kv)),
                ("vdb", f(vv.vdb)),
                ("vtarget", f(vv.vtarget)),
                ("qmax", f(vv.qmax)),
            ]),
        );
        out.insert(
            "simulation".into(),
            table([
                ("dt", f(c.dt)),
                ("t_end", f(c.t_end)),
                ("topology", s(name_of(&TOPOLOGIES, c.topology))),
                ("network_frame", s(name_of(&FRAMES, c.network_frame))),
                ("companion_form", s(name_of(&FORMS, c.companion_form))),
                ("integrator", s(name_of(&INTEGRATORS, c.integrator))),
                ("tol", f(c.solver.tol)),
                ("max_iter", Value::Integer(c.solver.max_iter as i64)),
                ("damping", f(c.solver.damping)),
                ("epsilon", f(c.epsilon.epsilon)),
                ("init_residual_bound", f(c.init_residual_bound)),
            ]),
        );
        if !self.events.is_empty() {
            out.insert("events".into(), Value::Array(self.events.iter().map(write_event).collect()));
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table()).expect("tables of plain values always serialize")
    }
}

fn read_event(k: usize, v: &Value) -> Result<ScheduledEvent, ConfigError> {
    let name = format!("events[{k}]");
    let Value::Table(t) = v else {
        return Err(invalid(&name, "expected a table"));
    };
    if let Some(key) = t.keys().find(|key| !EVENT_KEYS.contains(&key.as_str())) {
        return Err(ConfigError::UnknownKey(format!("{name}.{key}")));
    }
    let s = Section { name: &name, table: Some(t) };
    let time = s.required("time")?;
    let kind = s.get("kind").and_then(Value::as_str).ok_or_else(|| ConfigError::MissingKey(s.path("kind")))?;
    let toggle = kind == "support_toggle";
    for key in if toggle { ["value"].as_slice() } else { ["frequency", "volt_var"].as_slice() } {
        if t.contains_key(*key) {
            return Err(invalid(&s.path(key), format!("not used by `{kind}` events")));
        }
    }
    let event = match kind {
        "phase_jump" => Event::PhaseJump(s.required("value")?),
        "p_step" => Event::PStep(s.required("value")?),
        "q_step" => Event::QStep(s.required("value")?),
        "freq_offset" => Event::FreqOffset(s.required("value")?),
        "support_toggle" => Event::SupportToggle { frequency: s.bool("frequency", false)?, volt_var: s.bool("volt_var", false)? },
        _ => {
            return Err(invalid(
                &s.path("kind"),
                "expected one of phase_jump, p_step, q_step, freq_offset, support_toggle",
            ))
        }
    };
    Ok(ScheduledEvent { time, event })
}

fn write_event(e: &ScheduledEvent) -> Value {
    let mut t = Table::new();
    t.insert("time".into(), Value::Float(e.time));
    let (kind, value) = match e.event {
        Event::PhaseJump(v) => ("phase_jump", Some(v)),
        Event::PStep(v) => ("p_step", Some(v)),
        Event::QStep(v) => ("q_step", Some(v)),
        Event::FreqOffset(v) => ("freq_offset", Some(v)),
        Event::SupportToggle { frequency, volt_var } => {
            t.insert("frequency".into(), Value::Boolean(frequency));
            t.insert("volt_var".into(), Value::Boolean(volt_var));
            ("support_toggle", None)
        }
    };
    t.insert("kind".into(), Value::String(kind.into()));
    if let Some(v) = value {
        t.insert("value".into(), Value::Float(v));
    }
    Value::Table(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nVm = 1.0\nf = 60\n\n[simulation]\ndt = 5e-5\nt_end = 0.1\n";

    #[test]
    fn minimal_document_gets_defaults() {
        let (sc, cfg) = parse_config(MINIMAL).unwrap();
        let d = Scenario::default();
        assert_eq!(sc.pll, d.pll);
        assert_eq!(sc.p_ref, d.p_ref);
        assert_eq!(cfg.dt, 5e-5);
        assert_eq!(cfg.topology, Topology::Rl);
        for k in 0..3 {
            assert!((sc.network.lf[k] - d.network.lf[k]).abs() < 1e-18);
        }
    }

    #[test]
    fn stability_guard_names_key() {
        let text = "[grid]\nvm = 1.0\nf = 60\n[pll]\ntf = 1e-3\n[simulation]\ndt = 1e-2\nt_end = 0.1\n";
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Invalid(_)), "{msg}");
        assert!(msg.contains("simulation.dt") && msg.contains("pll.tf"), "{msg}");
    }

    #[test]
    fn events_out_of_order_rejected() {
        let text = format!(
            "{MINIMAL}\n[[events]]\ntime = 0.05\nkind = \"p_step\"\nvalue = 0.1\n\n[[events]]\ntime = 0.02\nkind = \"q_step\"\nvalue = 0.1\n"
        );
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("events[1].time"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "[grid]\nvm = 1.0\nf = = 60\n";
        match parse_config(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse_config(&format!("{MINIMAL}[pll]\nkd = 1.0\n")).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey("pll.kd".into()));
        let e = parse_config(&format!("{MINIMAL}[plant]\nx = 1\n")).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey("plant".into()));
    }

    #[test]
    fn missing_required_key() {
        let e = parse_config("[grid]\nf = 60\n[simulation]\ndt = 1e-4\nt_end = 0.1\n").unwrap_err();
        assert_eq!(e, ConfigError::MissingKey("grid.vm".into()));
    }

    #[test]
    fn type_errors_name_key() {
        let msg = parse_config(&format!("{MINIMAL}[volt_var]\nkv = \"ten\"\n")).unwrap_err().to_string();
        assert!(msg.contains("volt_var.kv"), "{msg}");
    }

    #[test]
    fn echo_is_idempotent() {
        let text = format!(
            "{MINIMAL}[network]\nrg = [0.01, 0.01, 0.01]\nxg = 0.07\n[simulation.x]\n"
        );
        assert!(parse_document(&text).is_err());
        let text = format!(
            "{MINIMAL}[network]\nrg = [0.01, 0.01, 0.01]\nxg = 0.07\n\n[[events]]\ntime = 0.05\nkind = \"support_toggle\"\nvolt_var = true\n"
        );
        let doc = parse_document(&text).unwrap();
        let echoed = doc.to_toml();
        let again = parse_document(&echoed).unwrap();
        assert_eq!(doc, again);
        assert_eq!(doc.resolve().unwrap(), again.resolve().unwrap());
        assert_eq!(echoed, again.to_toml());
    }
}
