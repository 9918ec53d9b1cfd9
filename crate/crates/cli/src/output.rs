//! CSV and manifest emission.
//!
//! Files are first written into a hidden staging directory inside the output
//! directory and moved into place only once the whole run has succeeded, so
//! a failed run leaves no partial files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ammfg_core::mfg::IterationRecord;
use ammfg_core::{GameResult, NashGapReport, ValueSurface};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VALUE_SURFACE: &str = "value_surface.csv";
pub const MFG_FLOW: &str = "mfg_flow.csv";
pub const MFG_SUMMARY: &str = "mfg_summary.csv";
pub const GAME_SUMMARY: &str = "game_summary.csv";
pub const EPSILON: &str = "epsilon.csv";
pub const MANIFEST: &str = "manifest.json";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn value_surface_csv(surface: &ValueSurface) -> String {
    let time = surface.time_grid();
    let space = surface.spatial_grid();
    let mut s = String::from("t,x,V,dVdx,policy\n");
    for j in 0..time.len() {
        let t = num(time.t(j));
        for i in 0..space.n_x {
            let _ = writeln!(
                s,
                "{t},{},{},{},{}",
                num(space.x(i)),
                num(surface.value(j, i)),
                num(surface.dvdx(j, i)),
                num(surface.policy(j, i))
            );
        }
    }
    s
}

pub fn mfg_flow_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from("iter,t,qbar,w_min,w_zero,w_max,residual\n");
    for rec in history {
        let time = rec.law.time_grid();
        let residual = num(rec.residual);
        for (j, (w, q)) in rec.law.weights().iter().zip(rec.law.means()).enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{residual}",
                rec.iter,
                num(time.t(j)),
                num(*q),
                num(w[0]),
                num(w[1]),
                num(w[2])
            );
        }
    }
    s
}

/// One row per iteration; the gap is reported on the last row only.
pub fn mfg_summary_csv(history: &[IterationRecord], gap: f64) -> String {
    let mut s = String::from("iter,residual,best_response_gap\n");
    for (k, rec) in history.iter().enumerate() {
        let last = k + 1 == history.len();
        let _ = writeln!(s, "{},{},{}", rec.iter, num(rec.residual), if last { num(gap) } else { String::new() });
    }
    s
}

pub fn game_summary_csv(result: &GameResult) -> String {
    let mut s = String::from("player,j_hat,se\n");
    for (i, est) in result.players.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", num(est.mean), num(est.se));
    }
    s
}

pub fn epsilon_csv(report: &NashGapReport) -> String {
    let mut s = String::from("n,eps_hat,ci_lo,ci_hi,paths\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n, num(r.eps_hat), num(r.ci_lo), num(r.ci_hi), r.paths);
    }
    s
}

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub mfg: u64,
    pub game: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub wall_time_seconds: f64,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<String>,
}

/// Output files held back until [`Staging::commit`].
#[derive(Debug)]
pub struct Staging {
    out_dir: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
    committed: bool,
    created_out: bool,
}

impl Staging {
    pub fn new(out_dir: &Path) -> Result<Self, CliError> {
        let created_out = !out_dir.exists();
        fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
        let dir = out_dir.join(format!(".ammfg-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Staging { out_dir: out_dir.to_path_buf(), dir, files: Vec::new(), committed: false, created_out })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Moves every staged file into the output directory.
    pub fn commit(mut self) -> Result<(), CliError> {
        for name in &self.files {
            let target = self.out_dir.join(name);
            fs::rename(self.dir.join(name), &target)
                .map_err(|e| CliError::Io(format!("cannot move {} into place: {e}", target.display())))?;
        }
        self.committed = true;
        fs::remove_dir_all(&self.dir)?;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
            if self.created_out {
                // only succeeds while the directory is still empty
                let _ = fs::remove_dir(&self.out_dir);
            }
        }
    }
}
