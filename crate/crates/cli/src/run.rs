//! Command dispatch, artifact writing and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use sdg_core::hamiltonian::{audit_isaacs, QueryBox};
use sdg_core::nash_engine::standard_deviations;
use sdg_core::sde_sim::FeedbackRule;
use sdg_core::strategies::fixed_point_demo;
use sdg_core::value_pde::{compute_values_audited, regularity_check};
use sdg_core::{
    construct_equilibrium, deviation_test, simulate, validate_spec, verify_certificate, Error, FeedbackTable, ValueField,
};

use crate::config::{Resolved, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Isaacs,
    Values,
    Equilibrium,
    Verify,
    Deviate,
    DemoFixedpoint,
}

/// Why a run did not pass.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation, configuration or input files: exit 1.
    Usage(String),
    /// The computation ran but a quantitative check failed: exit 2.
    Check(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IsaacsViolated { .. } | Error::NoQualifyingPair { .. } => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Serialize)]
struct Artifact {
    file: String,
    bytes: u64,
    sha256: String,
}

pub struct Run {
    pub command: Command,
    pub config: Option<RunConfig>,
    pub config_text: Option<String>,
    /// Directory relative paths in the configuration are resolved against.
    pub config_dir: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub quiet: bool,
    artifacts: Vec<Artifact>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(
        command: Command,
        config: Option<(RunConfig, String, PathBuf)>,
        seed: u64,
        out: PathBuf,
        quiet: bool,
    ) -> Self {
        let (config, config_text, config_dir) = match config {
            Some((c, t, d)) => (Some(c), Some(t), d),
            None => (None, None, PathBuf::from(".")),
        };
        Self {
            command,
            config,
            config_text,
            config_dir,
            seed,
            out,
            quiet,
            artifacts: Vec::new(),
        }
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn config(&self) -> Result<&RunConfig, Failure> {
        self.config
            .as_ref()
            .ok_or_else(|| Failure::Usage(format!("`{:?}` needs --config", self.command).to_lowercase()))
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> sdg_core::Result<()>) -> Result<(), Failure> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        drop(w);
        let bytes = fs::read(&path)?;
        self.artifacts.push(Artifact {
            file: name.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
        text.push('\n');
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Runs the command, then writes the manifest whatever the outcome.
    pub fn execute(mut self) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)?;
        let outcome = self.dispatch();
        let (status, message) = match &outcome {
            Ok(()) => ("pass", String::new()),
            Err(Failure::Check(m)) => ("fail", m.clone()),
            Err(Failure::Usage(m)) => ("error", m.clone()),
        };
        let manifest = json!({
            "tool": "sdg",
            "command": self.command,
            "versions": { "sdg-cli": env!("CARGO_PKG_VERSION"), "sdg-core": sdg_core::VERSION },
            "seed": self.seed,
            "config_sha256": self.config_text.as_deref().map(|t| sha256_hex(t.as_bytes())),
            "config": self.config_text,
            "status": status,
            "message": message,
            "exit_code": outcome.as_ref().map_or_else(Failure::code, |_| 0),
            "artifacts": self.artifacts,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Usage(e.to_string()))? + "\n";
        fs::write(self.out.join("manifest.json"), text)?;
        outcome
    }

    fn dispatch(&mut self) -> Result<(), Failure> {
        match self.command {
            Command::Validate => self.validate(),
            Command::Isaacs => self.isaacs(),
            Command::Values => self.values().map(|_| ()),
            Command::Equilibrium => self.equilibrium(),
            Command::Verify => self.verify(),
            Command::Deviate => self.deviate(),
            Command::DemoFixedpoint => self.demo(),
        }
    }

    fn validate(&mut self) -> Result<(), Failure> {
        let cfg = self.config()?;
        let spec = cfg.spec()?;
        let report = validate_spec(&spec, cfg.validate.samples, self.seed)?;
        for c in &report.checks {
            self.say(format!(
                "{:<28} worst {:>12.6e} limit {:>12.6e} {}",
                c.id,
                c.worst,
                c.limit,
                if c.pass { "ok" } else { "FAIL" }
            ));
        }
        self.write_json("validation.json", &report)?;
        if report.all_pass() {
            Ok(())
        } else {
            let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
            Err(Failure::Check(format!("assumption checks failed: {}", failed.join(", "))))
        }
    }

    fn isaacs(&mut self) -> Result<(), Failure> {
        let cfg = self.config()?;
        let spec = cfg.spec()?;
        let audit = audit_isaacs(&spec, &QueryBox::default_for(&spec), cfg.isaacs.queries, cfg.isaacs.seed)?;
        self.say(format!(
            "Isaacs audit: {} queries, max gap {:e} (player 1 {:e}, player 2 {:e}), {} failures",
            audit.queries, audit.max_gap, audit.max_gap_by_player[0], audit.max_gap_by_player[1], audit.failures
        ));
        self.write_json("isaacs.json", &audit)?;
        if audit.pass {
            Ok(())
        } else {
            Err(Failure::Check(format!("Isaacs condition fails (max gap {:e})", audit.max_gap)))
        }
    }

    fn resolved(&self) -> Result<Resolved, Failure> {
        Ok(self.config()?.resolve()?)
    }

    fn values(&mut self) -> Result<(Resolved, ValueField), Failure> {
        let r = self.resolved()?;
        let cfg = self.config()?;
        let audit = audit_isaacs(&r.spec, &QueryBox::default_for(&r.spec), cfg.isaacs.queries, cfg.isaacs.seed)?;
        let values = compute_values_audited(&r.spec, &r.scheme, audit)?;
        let regularity = regularity_check(&values);
        self.say(format!(
            "values: {} knots x {} nodes; W1(start) = {:.6}, W2(start) = {:.6}; lattice gap {:e}, {:e}",
            values.partition.knots().len(),
            values.grid.len(),
            values.value_at(sdg_core::Player::One, 0, &r.start),
            values.value_at(sdg_core::Player::Two, 0, &r.start),
            values.lattice_gap[0],
            values.lattice_gap[1]
        ));
        self.write("values.csv", |w| values.write_csv(&r.spec, w))?;
        let summary = json!({
            "spec": r.spec.name(),
            "steps": values.cells(),
            "grid_nodes": values.grid.len(),
            "boundary": values.grid.boundary(),
            "quadrature_points": values.quadrature_points,
            "start": r.start,
            "start_values": [
                values.value_at(sdg_core::Player::One, 0, &r.start),
                values.value_at(sdg_core::Player::Two, 0, &r.start),
            ],
            "lattice_gap": values.lattice_gap,
            "isaacs": {
                "queries": values.isaacs.queries,
                "seed": values.isaacs.seed,
                "max_gap": values.isaacs.max_gap,
                "pass": values.isaacs.pass,
            },
            "regularity": regularity,
        });
        self.write_json("values.json", &summary)?;
        Ok((r, values))
    }

    fn equilibrium(&mut self) -> Result<(), Failure> {
        let (r, values) = self.values()?;
        let epsilon = self.config()?.run.epsilon;
        let c = construct_equilibrium(&r.spec, &values, &r.scheme, epsilon)?;
        self.say(format!(
            "equilibrium: epsilon {epsilon}, min slack {:e}, {:e}; {} coupled, {} scanned",
            c.min_slack[0], c.min_slack[1], c.coupled_selected, c.scanned_selected
        ));
        self.write("controls.csv", |w| c.feedback.write_csv(&r.spec, w))?;
        self.write("slack.csv", |w| c.write_csv(&r.spec, w))?;
        self.write_json(
            "equilibrium.json",
            &json!({
                "epsilon": epsilon,
                "min_slack": c.min_slack,
                "coupled_selected": c.coupled_selected,
                "scanned_selected": c.scanned_selected,
            }),
        )?;
        Ok(())
    }

    /// The configured feedback table, or a freshly constructed one.
    fn nominal(&self, r: &Resolved, values: &ValueField) -> Result<FeedbackTable, Failure> {
        let cfg = self.config()?;
        match &cfg.run.controls {
            Some(p) => {
                let path = self.config_dir.join(p);
                let file = File::open(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                Ok(FeedbackTable::read_csv(&r.spec, r.scheme.partition().cells(), r.scheme.grid().len(), file)?)
            }
            None => Ok(construct_equilibrium(&r.spec, values, &r.scheme, cfg.run.epsilon)?.feedback),
        }
    }

    fn verify(&mut self) -> Result<(), Failure> {
        let (r, values) = self.values()?;
        let feedback = self.nominal(&r, &values)?;
        let run = self.config()?.run.clone();
        let cert = verify_certificate(&r.spec, &feedback, &values, &r.scheme, run.epsilon, &r.start, run.paths, self.seed)?;
        self.say(format!(
            "certificate: payoffs {:.6}, {:.6}; MC {:.6} ± {:.1e}, {:.6} ± {:.1e}; min p {:.4}, {:.4}; {}",
            cert.payoffs[0],
            cert.payoffs[1],
            cert.mc_payoffs[0],
            cert.mc_std_errors[0],
            cert.mc_payoffs[1],
            cert.mc_std_errors[1],
            cert.min_probability[0],
            cert.min_probability[1],
            if cert.pass { "PASS" } else { "FAIL" }
        ));
        self.write("certificate.csv", |w| cert.write_csv(w))?;
        self.write_json("certificate.json", &cert)?;
        let export = run.export_paths.min(run.paths);
        if export > 0 {
            let rule = FeedbackRule {
                table: &feedback,
                grid: r.scheme.grid(),
            };
            let bundle = simulate(&r.spec, &r.start, r.scheme.partition(), &rule, export, self.seed)?;
            self.write("paths.csv", |w| bundle.write_csv(&r.spec, w))?;
        }
        if cert.pass {
            Ok(())
        } else {
            Err(Failure::Check("equilibrium certificate failed".into()))
        }
    }

    fn deviate(&mut self) -> Result<(), Failure> {
        let (r, values) = self.values()?;
        let nominal = self.nominal(&r, &values)?;
        let cfg = self.config()?;
        let (run, coarse) = (cfg.run.clone(), cfg.deviate.coarse_cells);
        let deviations = standard_deviations(&r.spec, &r.scheme, coarse)?;
        let report = deviation_test(
            &r.spec,
            &r.scheme,
            &values,
            &nominal,
            &deviations,
            run.epsilon,
            &r.start,
            run.paths,
            self.seed,
        )?;
        let failed = report.results.iter().filter(|d| !d.pass).count();
        self.say(format!(
            "deviations: {} tested, max gain {:.3e} (player 1), {:.3e} (player 2), {failed} failed",
            report.results.len(),
            report.max_gain[0],
            report.max_gain[1]
        ));
        if let Some(i) = report.argmax() {
            self.say(format!("largest gain: {}", report.results[i].label));
        }
        self.write("deviations.csv", |w| report.write_csv(w))?;
        self.write_json("deviations.json", &report)?;
        if report.pass {
            Ok(())
        } else {
            Err(Failure::Check(format!("{failed} deviations gain more than epsilon")))
        }
    }

    fn demo(&mut self) -> Result<(), Failure> {
        let demo = fixed_point_demo()?;
        for case in &demo.cases {
            self.say(format!("{}:", case.name));
            for line in &case.trace {
                self.say(format!("  {line}"));
            }
            self.say(format!("  => {}", case.verdict));
        }
        self.say(format!(
            "with one cell of delay: u = {:?}, v = {:?}, replay consistent: {}",
            demo.delayed_coupling.u, demo.delayed_coupling.v, demo.delayed_replay_consistent
        ));
        self.write_json("demo.json", &demo)?;
        if demo.cases[0].fixed_points.is_empty() && demo.delayed_replay_consistent {
            Ok(())
        } else {
            Err(Failure::Check("fixed-point demo did not reproduce the expected outcome".into()))
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("sdg-out")
}

/// `--out`, then `SDG_OUT_DIR`, then the configuration, then the default.
pub fn output_dir(flag: Option<&Path>, env: Option<PathBuf>, config: Option<&RunConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(env)
        .or_else(|| config.and_then(|c| c.run.output_dir.clone()))
        .unwrap_or_else(default_out_dir)
}
