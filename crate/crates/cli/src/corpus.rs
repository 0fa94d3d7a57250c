use std::path::{Path, PathBuf};
use std::time::Instant;

use freqplan::degrade::{check_bases, corpus_item, procedural_bases, DegradationSpec};
use freqplan::hints::extract_hints_with;
use freqplan::io::{read_png, write_png16};
use freqplan::planner::{plan, TaskToken};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{self, sorted};
use crate::Context;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Serialize)]
struct ManifestLine {
    index: usize,
    file: String,
    task: TaskToken,
    base_index: usize,
    spec: DegradationSpec,
}

pub fn synth(ctx: &Context) -> CliResult<()> {
    let out = ctx
        .out
        .as_deref()
        .ok_or_else(|| CliError::usage("synth needs --out DIR"))?;
    let cfg = &ctx.cfg;
    cfg.thresholds.validate()?;
    cfg.degrade.validate()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let manifest_path = out.join(MANIFEST_NAME);
    // Fail on an unwritable directory before spending time on generation.
    output::write_file(&manifest_path, b"")?;

    let size = cfg.synth.size;
    let bases = procedural_bases(cfg.synth.bases, size, size, cfg.seed)?;
    check_bases(&bases, &cfg.thresholds)?;
    let n = cfg.synth.n_per_class;
    let lines: Vec<String> = (0..TaskToken::ALL.len() * n)
        .into_par_iter()
        .map(|i| -> CliResult<String> {
            let item = corpus_item(&bases, n, cfg.seed, &cfg.degrade, i)?;
            let file = format!("{i:04}_{}.png", item.task);
            write_png16(out.join(&file), &item.image)?;
            let line = ManifestLine {
                index: i,
                file,
                task: item.task,
                base_index: item.base_index,
                spec: item.spec,
            };
            Ok(serde_json::to_string(&sorted(&line)?)?)
        })
        .collect::<CliResult<_>>()?;
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    output::write_file(&manifest_path, text.as_bytes())?;
    output::stdout(&output::pretty(&serde_json::json!({
        "images": lines.len(),
        "manifest": manifest_path.display().to_string(),
    }))?)
}

#[derive(Debug, Deserialize)]
struct EvalEntry {
    file: String,
    task: TaskToken,
}

#[derive(Debug, Serialize)]
struct ClassReport {
    task: TaskToken,
    support: usize,
    predicted: usize,
    correct: usize,
    /// `None` when nothing was predicted as this task.
    precision: Option<f64>,
    /// `None` when the corpus holds no example of this task.
    recall: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Prediction {
    file: String,
    truth: TaskToken,
    predicted: TaskToken,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    entries: usize,
    evaluated: usize,
    missing: usize,
    missing_files: Vec<String>,
    accuracy: Option<f64>,
    labels: Vec<TaskToken>,
    /// Rows are true tasks, columns predicted tasks, both in `labels` order.
    confusion: Vec<Vec<usize>>,
    per_class: Vec<ClassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<Vec<Prediction>>,
}

fn read_manifest(path: &Path) -> CliResult<Vec<(PathBuf, EvalEntry)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let entry: EvalEntry = serde_json::from_str(l)
                .map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
            Ok((dir.join(&entry.file), entry))
        })
        .collect()
}

pub fn eval(ctx: &Context, manifest: &Path) -> CliResult<()> {
    let started = Instant::now();
    ctx.cfg.thresholds.validate()?;
    let entries = read_manifest(manifest)?;
    let outcomes: Vec<Option<TaskToken>> = entries
        .par_iter()
        .map(|(path, _)| -> CliResult<Option<TaskToken>> {
            if !path.is_file() {
                return Ok(None);
            }
            let img = read_png(path)?;
            let hints = extract_hints_with(&img, &ctx.cfg.cues)?;
            Ok(Some(plan(&hints, &ctx.cfg.thresholds).task))
        })
        .collect::<CliResult<_>>()?;

    let k = TaskToken::ALL.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut missing_files = Vec::new();
    let mut predictions = Vec::new();
    for ((_, entry), outcome) in entries.iter().zip(&outcomes) {
        match outcome {
            Some(p) => {
                confusion[entry.task.index()][p.index()] += 1;
                predictions.push(Prediction { file: entry.file.clone(), truth: entry.task, predicted: *p });
            }
            None => missing_files.push(entry.file.clone()),
        }
    }
    let evaluated = predictions.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let per_class = TaskToken::ALL
        .iter()
        .map(|&task| {
            let i = task.index();
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[i]).sum();
            let hit = confusion[i][i];
            ClassReport {
                task,
                support,
                predicted,
                correct: hit,
                precision: ratio(hit, predicted),
                recall: ratio(hit, support),
            }
        })
        .collect();
    let report = EvalReport {
        entries: entries.len(),
        evaluated,
        missing: missing_files.len(),
        missing_files,
        accuracy: ratio(correct, evaluated),
        labels: TaskToken::ALL.to_vec(),
        confusion,
        per_class,
        predictions: ctx.verbose.then_some(predictions),
    };
    if ctx.verbose {
        eprintln!("evaluated {evaluated} images in {:.2} s", started.elapsed().as_secs_f64());
    }
    output::emit_json(&sorted(&report)?, ctx.out.as_deref())
}
