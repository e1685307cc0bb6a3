//! CSV and JSON artifacts.
//!
//! CSV files always carry a header, use `.` as decimal separator and `\n`
//! line endings. Floats are written in shortest round-trip form, so equal
//! values always produce equal bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::chain::Trajectory;
use crate::ctime::CtimeTrajectory;
use crate::diffusion::DiffusionSolution;
use crate::error::Result;
use crate::fluid::FluidSolution;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

/// `step,Z,M`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "Z", "M"])?;
    for (step, (z, m)) in traj.z_values.iter().zip(&traj.m_values).enumerate() {
        w.write_record([step.to_string(), z.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,z`.
pub fn write_fluid_csv(path: &Path, fluid: &FluidSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "z"])?;
    for (t, z) in fluid.times().zip(fluid.z_values()) {
        w.write_record([t.to_string(), z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,beta,m`.
pub fn write_diffusion_csv(path: &Path, sol: &DiffusionSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "beta", "m"])?;
    for ((t, b), m) in sol.times().zip(sol.beta_values()).zip(sol.m_values()) {
        w.write_record([t.to_string(), b.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `time,Z`.
pub fn write_ctime_csv(path: &Path, traj: &CtimeTrajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "Z"])?;
    for (t, z) in traj.times.iter().zip(&traj.z_values) {
        w.write_record([t.to_string(), z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `run,<column>` for one value per run.
pub fn write_samples_csv(path: &Path, column: &str, samples: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["run", column])?;
    for (run, v) in samples.iter().enumerate() {
        w.write_record([run.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json(value)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Summary of a batch of hitting fractions.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub runs: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub c: Option<f64>,
    pub mean_hitting_fraction: f64,
    pub var_hitting_fraction: f64,
    pub seed: u64,
    /// `chain` or `graph`.
    pub source: String,
}

impl BatchSummary {
    pub fn from_counts(counts: &[usize], n: usize, c: Option<f64>, seed: u64, source: &str) -> Self {
        let runs = counts.len();
        let fractions: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
        let mean = fractions.iter().sum::<f64>() / runs.max(1) as f64;
        let var = if runs > 1 {
            fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (runs - 1) as f64
        } else {
            0.0
        };
        BatchSummary {
            runs,
            n,
            c,
            mean_hitting_fraction: mean,
            var_hitting_fraction: var,
            seed,
            source: source.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::simulate;
    use crate::fluid::er_closed_form;
    use crate::kernel::Kernel;

    #[test]
    fn trajectory_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = simulate(&Kernel::deterministic(3).unwrap(), 1, 0);
        write_trajectory_csv(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "step,Z,M\n0,0,0\n1,1,0\n2,2,0\n3,3,0\n");
    }

    #[test]
    fn fluid_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fluid.csv");
        let fluid = er_closed_form(1.0).unwrap();
        write_fluid_csv(&path, &fluid).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<(f64, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), fluid.z_values().len());
        for ((_, z), expected) in rows.iter().zip(fluid.z_values()) {
            assert_eq!(z, expected);
        }
    }

    #[test]
    fn batch_summary_moments() {
        let s = BatchSummary::from_counts(&[1, 3], 4, Some(1.0), 0, "chain");
        assert_eq!(s.mean_hitting_fraction, 0.5);
        assert_eq!(s.var_hitting_fraction, 0.125);
        assert!(to_json(&s).unwrap().contains("\"N\": 4"));
    }
}
