//! Output bundle: report JSON, trace and metrics CSVs, and plot-ready CSVs.
//!
//! Timestamps and durations in CSVs are milliseconds on the runtime clock.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{ConfigDocument, OutputFormat};
use crate::error::Result;
use crate::runtime::MetricsRecord;
use crate::workflow::{CampaignOutcome, ScalingRow};

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn ms(s: f64) -> String {
    format!("{:.3}", s * 1e3)
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &str) -> Self {
        Csv {
            text: format!("{header}\n"),
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}

pub fn report_json(outcome: &CampaignOutcome) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&outcome.report)?;
    s.push('\n');
    Ok(s)
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut c = Csv::new("iteration,stage,ttx_ms,eoh_ms,tasks,frames,bytes,bookkeeping_ms");
    for m in records {
        c.row(&[
            m.iteration.to_string(),
            m.stage.to_string(),
            ms(m.ttx),
            ms(m.eoh),
            m.tasks.to_string(),
            m.frames.to_string(),
            m.bytes.to_string(),
            ms(m.bookkeeping),
        ]);
    }
    c.text
}

/// Fixed-width histogram over `[0, max]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, n)| (k as f64 * width, (k + 1) as f64 * width, n))
        .collect()
}

/// Writes every bundle file under `dir`. Trajectory files are written by
/// the MD tasks themselves.
pub fn write_bundle(dir: &Path, cfg: &ConfigDocument, outcome: &CampaignOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let formats = &cfg.output.formats;
    if formats.contains(&OutputFormat::Json) {
        fs::write(dir.join("report.json"), report_json(outcome)?)?;
        fs::write(dir.join("effective_config.json"), cfg.to_json_pretty() + "\n")?;
        let odir = dir.join("outliers");
        fs::create_dir_all(&odir)?;
        for (k, list) in &outcome.outliers {
            fs::write(odir.join(format!("iter_{k}.json")), serde_json::to_string_pretty(list)? + "\n")?;
        }
    }
    if !formats.contains(&OutputFormat::Csv) {
        return Ok(());
    }

    let mut trace = Csv::new("task_id,kind,node,gpus,enqueue_ts,start_ts,end_ts,state,iteration,stage");
    for p in &outcome.trace {
        let gpus: Vec<String> = p.gpus.iter().map(|g| g.to_string()).collect();
        trace.row(&[
            p.task.to_string(),
            p.kind.as_str().into(),
            p.node.to_string(),
            gpus.join(";"),
            ms(p.enqueue_ts),
            ms(p.start_ts),
            ms(p.end_ts),
            p.state.as_str().into(),
            p.iteration.to_string(),
            p.stage.to_string(),
        ]);
    }
    trace.save(&dir.join("trace.csv"))?;

    let mut events = Csv::new("task_id,kind,state,timestamp");
    for e in &outcome.events {
        events.row(&[e.task.to_string(), e.kind.as_str().into(), e.state.as_str().into(), ms(e.timestamp)]);
    }
    events.save(&dir.join("events.csv"))?;

    fs::write(dir.join("metrics.csv"), metrics_csv(&outcome.metrics))?;

    let mut ts = Csv::new("iteration,task_id,step,rmsd,q,x");
    for f in &outcome.frames {
        ts.row(&[
            f.iteration.to_string(),
            f.task.to_string(),
            f.step.to_string(),
            opt(f.rmsd),
            opt(f.q),
            format!("{}", f.x),
        ]);
    }
    ts.save(&dir.join("rmsd_timeseries.csv"))?;

    let rmsd: Vec<f64> = outcome.frames.iter().filter_map(|f| f.rmsd).collect();
    let mut hist = Csv::new("bin_lo,bin_hi,count");
    for (lo, hi, n) in histogram(&rmsd, cfg.output.rmsd_hist_bins) {
        hist.row(&[format!("{lo}"), format!("{hi}"), n.to_string()]);
    }
    hist.save(&dir.join("rmsd_hist.csv"))?;

    let mut by_d = Csv::new("iteration,latent_dim,train_loss,heldout_loss");
    for l in &outcome.losses {
        by_d.row(&[
            l.iteration.to_string(),
            l.latent_dim.to_string(),
            format!("{}", l.train_loss),
            format!("{}", l.heldout_loss),
        ]);
    }
    by_d.save(&dir.join("loss_vs_d.csv"))?;

    let mut by_scale = Csv::new("iteration,corpus_frames,train_samples,best_latent_dim,best_heldout_loss");
    for s in &outcome.report.summaries {
        if let (Some(c), Some(t), Some(d)) = (s.corpus_frames, s.train_samples, s.best_latent_dim) {
            by_scale.row(&[
                s.iteration.to_string(),
                c.to_string(),
                t.to_string(),
                d.to_string(),
                opt(s.heldout_loss.get(&d).copied()),
            ]);
        }
    }
    by_scale.save(&dir.join("loss_vs_scale.csv"))?;

    let mut scatter = Csv::new("iteration,task_id,step,z0,z1,z2,rmsd,q,label");
    for p in &outcome.latent {
        let z = |k: usize| p.z.get(k).map(|v| format!("{v}")).unwrap_or_default();
        scatter.row(&[
            p.iteration.to_string(),
            p.frame.task.to_string(),
            p.frame.step.to_string(),
            z(0),
            z(1),
            z(2),
            opt(p.rmsd),
            opt(p.q),
            p.label.to_string(),
        ]);
    }
    scatter.save(&dir.join("latent_scatter.csv"))?;
    Ok(())
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("tasks,nodes,gpus,ttx_ms,eoh_ms,bookkeeping_ms,frames,bytes\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.tasks,
            r.nodes,
            r.gpus,
            ms(r.ttx),
            ms(r.eoh),
            ms(r.bookkeeping),
            r.frames,
            r.bytes
        );
    }
    out
}
