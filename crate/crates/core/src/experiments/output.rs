use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{criterion_name, reverse_check_name, ExperimentConfig, ExperimentOutput, OutputFormat};
use crate::error::Result;
use crate::sampler::StepOutcome;

/// Schema tag written at the top of every output file.
pub const FORMAT_VERSION: &str = "manifold-ghmc v1";

#[derive(Serialize)]
struct ConfigRecord<'a> {
    model: &'a str,
    potential_k: Option<f64>,
    scheme: &'a str,
    dt: f64,
    alpha: Option<f64>,
    gamma: Option<f64>,
    k_steps: usize,
    n_iter: u64,
    seed: u64,
    n_bins: usize,
    reverse_check: &'a str,
    momentum_cap: Option<f64>,
    sweep: &'a [f64],
    thin: Option<u64>,
    newton_criterion: &'a str,
}

impl<'a> ConfigRecord<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            model: &cfg.model,
            potential_k: cfg.potential_k,
            scheme: cfg.scheme.as_str(),
            dt: cfg.dt,
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            k_steps: cfg.k_steps,
            n_iter: cfg.n_iter,
            seed: cfg.seed,
            n_bins: cfg.n_bins,
            reverse_check: reverse_check_name(cfg.reverse_check),
            momentum_cap: cfg.momentum_cap,
            sweep: &cfg.sweep,
            thin: cfg.thin,
            newton_criterion: criterion_name(cfg.newton_criterion),
        }
    }
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    format: &'static str,
    config: ConfigRecord<'a>,
    result: &'a ExperimentOutput,
}

/// Shortest round-trip representation; exponent form far from unity.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn opt_list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

/// Serializes an experiment result.
pub fn render(cfg: &ExperimentConfig, out: &ExperimentOutput, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let doc = JsonDocument {
                format: FORMAT_VERSION,
                config: ConfigRecord::new(cfg),
                result: out,
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => Ok(render_csv(cfg, out)),
    }
}

fn render_csv(cfg: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let mut s = String::new();
    let experiment = cfg.experiment.as_str();
    let _ = writeln!(s, "# {FORMAT_VERSION}, experiment={experiment}, seed={}", cfg.seed);
    let _ = writeln!(
        s,
        "# model={}, k={}, scheme={}, dt={}, alpha={}, gamma={}, k_steps={}, niter={}, nbins={}, reverse_check={}, momentum_cap={}, sweep={}, thin={}, newton_criterion={}",
        cfg.model,
        opt(cfg.potential_k),
        cfg.scheme.as_str(),
        num(cfg.dt),
        opt(cfg.alpha),
        opt(cfg.gamma),
        cfg.k_steps,
        cfg.n_iter,
        cfg.n_bins,
        reverse_check_name(cfg.reverse_check),
        opt(cfg.momentum_cap),
        opt_list(&cfg.sweep),
        cfg.thin.map(|t| t.to_string()).unwrap_or_default(),
        criterion_name(cfg.newton_criterion),
    );
    match out {
        ExperimentOutput::Histogram(h) => {
            let (stat, dof, p) = match &h.chi_square {
                Some(c) => (num(c.statistic), c.dof.to_string(), num(c.p_value)),
                None => Default::default(),
            };
            let _ = writeln!(
                s,
                "# samples={}, thin={}, acceptance={}, chi2={stat}, dof={dof}, p_value={p}",
                h.n_samples,
                h.thin,
                num(h.tally.rate(StepOutcome::Accepted))
            );
            s.push_str("bin,phi_lo,phi_hi,count,density,reference_probability,reference_density\n");
            for b in &h.bins {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    b.index,
                    num(b.phi_lo),
                    num(b.phi_hi),
                    b.count,
                    num(b.density),
                    opt(b.reference_probability),
                    opt(b.reference_density)
                );
            }
        }
        ExperimentOutput::RejectionTable(t) => {
            s.push_str(
                "scheme,dt,alpha,niter,total,newton_forward,newton_reverse,non_reversible,metropolis,accepted,\
                 se_total,se_newton_forward,se_newton_reverse,se_non_reversible,se_metropolis\n",
            );
            for r in &t.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.scheme.as_str(),
                    num(r.dt),
                    opt(r.alpha),
                    r.n_iter,
                    num(r.total),
                    num(r.newton_forward),
                    num(r.newton_reverse),
                    num(r.non_reversible),
                    num(r.metropolis),
                    num(r.accepted),
                    num(r.se_total),
                    num(r.se_newton_forward),
                    num(r.se_newton_reverse),
                    num(r.se_non_reversible),
                    num(r.se_metropolis)
                );
            }
        }
        ExperimentOutput::ResidenceSweep(r) => {
            s.push_str("dt,alpha,gamma,niter,switches,mean_residence,nonrev_rate,rejection_rate\n");
            for p in &r.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    num(p.dt),
                    opt(p.alpha),
                    opt(p.gamma),
                    p.n_iter,
                    p.switches,
                    opt(p.mean_residence),
                    num(p.nonrev_rate),
                    num(p.rejection_rate)
                );
            }
        }
        ExperimentOutput::Trajectory(t) => {
            let _ = writeln!(
                s,
                "# stored={}, thin={}, acceptance={}",
                t.records.len(),
                t.thin,
                num(t.tally.rate(StepOutcome::Accepted))
            );
            let mut header = vec!["step".to_string()];
            header.extend((0..t.dim).map(|i| format!("q{i}")));
            header.extend((0..t.dim).map(|i| format!("p{i}")));
            header.push("outcome".into());
            let _ = writeln!(s, "{}", header.join(","));
            for rec in &t.records {
                let _ = write!(s, "{}", rec.step);
                for v in rec.q.iter().chain(&rec.p) {
                    let _ = write!(s, ",{}", num(*v));
                }
                let _ = writeln!(s, ",{}", rec.outcome);
            }
        }
    }
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_experiment, ExperimentKind};

    #[test]
    fn csv_has_versioned_header() {
        let cfg = ExperimentConfig {
            n_iter: 500,
            n_bins: 4,
            seed: 9,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg, 1).unwrap();
        let csv = render(&cfg, &out, OutputFormat::Csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# manifold-ghmc v1, experiment=histogram, seed=9");
        assert!(lines.next().unwrap().starts_with("# model=torus-zero"));
        assert!(lines.next().unwrap().starts_with("# samples=500"));
        assert_eq!(
            lines.next().unwrap(),
            "bin,phi_lo,phi_hi,count,density,reference_probability,reference_density"
        );
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn json_round_trips() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Trajectory,
            n_iter: 5,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg, 1).unwrap();
        let text = render(&cfg, &out, OutputFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format"], FORMAT_VERSION);
        assert_eq!(v["result"]["experiment"], "trajectory");
        assert_eq!(v["result"]["records"].as_array().unwrap().len(), 5);
        assert_eq!(v["config"]["reverse_check"], "full");
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(2.5e-97), "2.5e-97");
        assert_eq!(num(-3e20), "-3e20");
        assert_eq!(num(12.0), "12");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
