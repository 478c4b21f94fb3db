//! Experiment output files: aggregate CSVs, per-run track logs, frame
//! exports and the resolved-config echo.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::experiment::ExperimentResult;
use crate::harness::scenario::GroundTruth;
use crate::sensors::{ObservationFrame, SensorModel};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Writes the aggregate and per-run outputs of an experiment; returns the
/// created paths. Timing is wall-clock and is the one output that is not
/// reproducible byte-for-byte.
pub fn write_outputs(
    result: &ExperimentResult,
    cfg: &ScenarioConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    let steps = cfg.duration;
    let successful: Vec<_> = result.successful_runs().collect();

    let mut ospa_csv = String::from("step,mean_ospa_m,stderr_m\n");
    let mut card_csv = String::from("step,mean_est_cardinality,true_cardinality\n");
    let mut timing_csv = String::from("step,mean_frame_ms\n");
    let mut groups_csv = String::from("step,mean_groups\n");
    let mut any_groups = false;

    for k in 0..steps {
        let ospa_values: Vec<f64> = successful.iter().map(|r| r.steps[k].ospa).collect();
        let (mean, stderr) = mean_and_stderr(&ospa_values);
        writeln!(ospa_csv, "{k},{mean:.6},{stderr:.6}").expect("in-memory write");

        let est: Vec<f64> = successful
            .iter()
            .map(|r| r.steps[k].est_cardinality as f64)
            .collect();
        let (est_mean, _) = mean_and_stderr(&est);
        let true_card = successful
            .first()
            .map(|r| r.steps[k].true_cardinality)
            .unwrap_or(0);
        writeln!(card_csv, "{k},{est_mean:.6},{true_card}").expect("in-memory write");

        let ms: Vec<f64> = successful.iter().map(|r| r.steps[k].frame_ms).collect();
        let (ms_mean, _) = mean_and_stderr(&ms);
        writeln!(timing_csv, "{k},{ms_mean:.6}").expect("in-memory write");

        let group_counts: Vec<f64> = successful
            .iter()
            .filter_map(|r| r.steps[k].group_count.map(|g| g as f64))
            .collect();
        if !group_counts.is_empty() {
            any_groups = true;
            let (g_mean, _) = mean_and_stderr(&group_counts);
            writeln!(groups_csv, "{k},{g_mean:.6}").expect("in-memory write");
        }
    }

    for (name, contents) in [
        ("ospa.csv", &ospa_csv),
        ("cardinality.csv", &card_csv),
        ("timing.csv", &timing_csv),
    ] {
        let path = out_dir.join(name);
        write_file(&path, contents)?;
        written.push(path);
    }
    if any_groups {
        let path = out_dir.join("groups.csv");
        write_file(&path, &groups_csv)?;
        written.push(path);
    }

    // Per-(run, step) track states, one JSON object per line.
    let mut tracks_jsonl = String::new();
    for run in &result.runs {
        for (k, step) in run.steps.iter().enumerate() {
            let tracks_json = serde_json::to_string(&step.tracks).map_err(|e| Error::Serde {
                context: "serializing track rows".into(),
                source: Box::new(e),
            })?;
            writeln!(
                tracks_jsonl,
                "{{\"run\":{},\"step\":{},\"tracks\":{}}}",
                run.run, k, tracks_json
            )
            .expect("in-memory write");
        }
    }
    let path = out_dir.join("tracks.jsonl");
    write_file(&path, &tracks_jsonl)?;
    written.push(path);

    let path = out_dir.join("config.json");
    write_file(&path, &result.config_echo)?;
    written.push(path);

    // Diagnostics: failed runs plus the per-step partition dumps.
    let mut diagnostics = String::new();
    for w in &result.warnings {
        writeln!(diagnostics, "{{\"warning\":{}}}", serde_json::to_string(w).unwrap())
            .expect("in-memory write");
    }
    for run in &result.runs {
        for (k, step) in run.steps.iter().enumerate() {
            if step.groups.is_empty() {
                continue;
            }
            let groups: Vec<String> = step
                .groups
                .iter()
                .map(|(labels, obs)| format!("{{\"labels\":\"{labels}\",\"observations\":{obs}}}"))
                .collect();
            writeln!(
                diagnostics,
                "{{\"run\":{},\"step\":{},\"groups\":[{}]}}",
                run.run,
                k,
                groups.join(",")
            )
            .expect("in-memory write");
        }
    }
    if !diagnostics.is_empty() {
        let path = out_dir.join("diagnostics.jsonl");
        write_file(&path, &diagnostics)?;
        written.push(path);
    }

    if let Some(frames) = &result.exported_frames {
        let sensor = cfg.sensor.build()?;
        let frames_dir = out_dir.join("frames");
        written.extend(write_frames(&sensor, frames, &frames_dir)?);
    }

    Ok(written)
}

/// Writes simulated truth and frames (the `simulate` command).
pub fn write_simulation(
    cfg: &ScenarioConfig,
    truth: &GroundTruth,
    frames: &[ObservationFrame],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();

    let mut truth_csv = String::from("step,birth_time,birth_index,x,y,vx,vy\n");
    for (k, objects) in truth.steps.iter().enumerate() {
        for s in objects {
            writeln!(
                truth_csv,
                "{k},{},{},{:.6},{:.6},{:.6},{:.6}",
                s.label.birth_time,
                s.label.birth_index,
                s.kinematic[0],
                s.kinematic[1],
                s.kinematic[2],
                s.kinematic[3]
            )
            .expect("in-memory write");
        }
    }
    let path = out_dir.join("truth.csv");
    write_file(&path, &truth_csv)?;
    written.push(path);

    let sensor = cfg.sensor.build()?;
    let frames_dir = out_dir.join("frames");
    written.extend(write_frames(&sensor, frames, &frames_dir)?);

    let path = out_dir.join("config.json");
    write_file(&path, &cfg.echo_json()?)?;
    written.push(path);
    Ok(written)
}

fn write_frames(
    sensor: &SensorModel,
    frames: &[ObservationFrame],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for (k, frame) in frames.iter().enumerate() {
        match sensor {
            SensorModel::Tbd(m) => {
                let pgm = dir.join(format!("step_{k:03}.pgm"));
                m.write_pgm(frame.values(), &pgm)?;
                let csv = dir.join(format!("step_{k:03}.csv"));
                m.write_csv(frame.values(), &csv)?;
                written.push(pgm);
                written.push(csv);
            }
            SensorModel::Acoustic(m) => {
                let csv = dir.join(format!("step_{k:03}.csv"));
                m.write_csv(frame.values(), &csv)?;
                written.push(csv);
            }
        }
    }
    Ok(written)
}
