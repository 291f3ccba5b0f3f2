//! Artifact writing. Every file goes through [`Outputs`], which records it
//! in `manifest.json` together with its content hash and the config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use hartree_lab::io::save_field;
use hartree_lab::Field;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::CliError;

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    sha256: String,
    config_hash: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    config: &'a RunConfig,
    artifacts: &'a [Artifact],
}

pub struct Outputs {
    dir: PathBuf,
    command: String,
    config: RunConfig,
    config_hash: String,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&config.out)?;
        Ok(Self {
            dir: config.out.clone(),
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash(),
            artifacts: Vec::new(),
        })
    }

    fn record(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let digest = Sha256::digest(fs::read(&path)?);
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex(&digest),
            config_hash: self.config_hash.clone(),
        });
        Ok(path)
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<PathBuf, CliError> {
        fs::write(self.dir.join(name), data)?;
        self.record(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    pub fn field(&mut self, name: &str, u: &Field, label: &str) -> Result<PathBuf, CliError> {
        save_field(&self.dir.join(name), u, label)?;
        self.record(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.bytes(name, text.as_bytes())
    }

    /// A gnuplot script drawing columns of a CSV written earlier.
    pub fn gnuplot(&mut self, name: &str, plot: &Plot) -> Result<PathBuf, CliError> {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set key top right\n");
        let _ = writeln!(s, "set xlabel '{}'", plot.xlabel);
        let _ = writeln!(s, "set ylabel '{}'", plot.ylabel);
        if plot.logx {
            s.push_str("set logscale x\n");
        }
        if plot.logy {
            s.push_str("set logscale y\n");
        }
        let series: Vec<String> = plot
            .series
            .iter()
            .map(|(col, title)| {
                format!("'{}' skip 1 using {}:{} with linespoints title '{}'", plot.data, plot.x, col, title)
            })
            .collect();
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
        self.bytes(name, s.as_bytes())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: &self.command,
            config_hash: &self.config_hash,
            config: &self.config,
            artifacts: &self.artifacts,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }
}

pub struct Plot<'a> {
    pub data: &'a str,
    pub x: usize,
    pub series: Vec<(usize, &'a str)>,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub logx: bool,
    pub logy: bool,
}

/// Shortest round-trip formatting, so repeated runs give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Radial profile `(r, Q, ln Q)` as CSV plus a plotting script.
pub fn profile(out: &mut Outputs, stem: &str, u: &Field) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = hartree_lab::diagnostics::profile_rows(u)
        .into_iter()
        .map(|(r, q, l)| vec![num(r), num(q), num(l)])
        .collect();
    let data = format!("{stem}_profile.csv");
    out.csv(&data, &["r", "Q", "log_Q"], &rows)?;
    out.gnuplot(
        &format!("{stem}_profile.gp"),
        &Plot {
            data: &data,
            x: 1,
            series: vec![(2, "Q(r)")],
            xlabel: "r",
            ylabel: "Q",
            logx: false,
            logy: true,
        },
    )?;
    Ok(())
}
