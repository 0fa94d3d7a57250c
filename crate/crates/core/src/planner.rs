//! Deterministic rule engine mapping degradation cues to a restoration plan:
//! a task token, a frequency focus, a one-sentence rationale and a pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::hints::{DegradationHints, HintFlag, HintThresholds};

/// Guard for divisions by cue values that may be zero.
pub const MARGIN_EPS: f64 = 1e-9;

/// The seven restoration tasks, declared in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskToken {
    Deraining,
    Desnowing,
    Dehazing,
    Deblur,
    Denoise,
    LightEnhancement,
    SuperResolution,
}

impl TaskToken {
    pub const ALL: [TaskToken; 7] = [
        TaskToken::Deraining,
        TaskToken::Desnowing,
        TaskToken::Dehazing,
        TaskToken::Deblur,
        TaskToken::Denoise,
        TaskToken::LightEnhancement,
        TaskToken::SuperResolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskToken::Deraining => "deraining",
            TaskToken::Desnowing => "desnowing",
            TaskToken::Dehazing => "dehazing",
            TaskToken::Deblur => "deblur",
            TaskToken::Denoise => "denoise",
            TaskToken::LightEnhancement => "light_enhancement",
            TaskToken::SuperResolution => "super_resolution",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Frequency band the task mainly restores.
    pub fn focus(self) -> Focus {
        match self {
            TaskToken::Dehazing | TaskToken::LightEnhancement => Focus::Low,
            _ => Focus::High,
        }
    }

    /// Fixed step template. Steps never mention task tokens.
    pub fn pipeline(self) -> &'static [&'static str] {
        match self {
            TaskToken::Deraining => &[
                "detect the oriented streak layer",
                "suppress thin high-frequency streaks",
                "restore edge micro-structure",
            ],
            TaskToken::Desnowing => &[
                "locate small bright particles",
                "remove particle occlusions",
                "inpaint fine textures under the particles",
            ],
            TaskToken::Dehazing => &[
                "estimate airlight and transmission",
                "remove the depth-dependent veil",
                "restore global contrast and saturation",
            ],
            TaskToken::Deblur => &[
                "estimate the blur extent and direction",
                "sharpen smeared edges",
                "recover fine textures",
            ],
            TaskToken::Denoise => &[
                "estimate the noise level in flat regions",
                "suppress high-frequency speckle",
                "preserve true edges and details",
            ],
            TaskToken::LightEnhancement => &[
                "lift global exposure",
                "tone-map shadows and highlights",
                "correct residual color cast",
            ],
            TaskToken::SuperResolution => &[
                "upsample to the target resolution",
                "synthesize missing high-frequency detail",
                "suppress aliasing and jagged edges",
            ],
        }
    }
}

impl fmt::Display for TaskToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskToken::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| usage(format!("unknown task token {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    High,
    Low,
}

impl Focus {
    pub fn as_str(self) -> &'static str {
        match self {
            Focus::High => "high",
            Focus::Low => "low",
        }
    }
}

impl fmt::Display for Focus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Focus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Focus::High),
            "low" => Ok(Focus::Low),
            other => Err(usage(format!("unknown focus {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationPlan {
    pub task: TaskToken,
    pub focus: Focus,
    pub rationale: String,
    pub pipeline: Vec<String>,
    pub severities: BTreeMap<TaskToken, f64>,
}

/// `v / threshold - 1`: positive when `v` exceeds the threshold.
#[inline]
fn above(v: f64, threshold: f64) -> f64 {
    v / threshold - 1.0
}

/// `threshold / v - 1`: positive when `v` falls below the threshold.
#[inline]
fn below(v: f64, threshold: f64) -> f64 {
    threshold / v.max(MARGIN_EPS) - 1.0
}

fn all_of(margins: &[f64]) -> f64 {
    margins.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn any_of(margins: &[f64]) -> f64 {
    margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Normalized threshold margin per task; positive means the task's rule fires.
///
/// A rule listing several conditions fires only when every condition holds, so
/// its margin is the smallest per-condition margin. The exposure rule fires on
/// either condition and takes the largest. Rules that look for structure
/// (streaks, particles, smeared edges) report -1 on images with no gradient
/// energy at all.
pub fn severity_scores(h: &DegradationHints, th: &HintThresholds) -> BTreeMap<TaskToken, f64> {
    let flat = h.has_flag(HintFlag::FlatImage);
    let no_structure = -1.0;
    let mut out = BTreeMap::new();
    for task in TaskToken::ALL {
        let m = match task {
            TaskToken::Deraining => all_of(&[
                above(h.line_score, th.line_score_min),
                above(h.anisotropy, th.anisotropy_min),
                above(h.freq_ratio, th.freq_ratio_min),
            ]),
            TaskToken::Desnowing if flat => no_structure,
            TaskToken::Desnowing => all_of(&[
                above(h.small_blobs as f64, th.small_blobs_min),
                below(h.snow_anisotropy, th.snow_anisotropy_max),
            ]),
            TaskToken::Dehazing => all_of(&[
                above(h.haze_score, th.haze_score_min),
                above(h.depth_grad, th.depth_grad_min),
            ]),
            TaskToken::Deblur if flat => no_structure,
            TaskToken::Deblur => all_of(&[
                below(h.grad95, th.grad95_max),
                below(h.lap_var, th.lap_var_max),
                below(h.hf_energy, th.hf_energy_max),
            ]),
            TaskToken::Denoise => above(h.noise_score, th.noise_score_min),
            TaskToken::LightEnhancement => any_of(&[
                below(h.mean_y, th.mean_y_max),
                below(h.p50_y, th.p50_max),
            ]),
            TaskToken::SuperResolution => {
                th.sr_min_side / (h.height.min(h.width) as f64) - 1.0
            }
        };
        out.insert(task, m);
    }
    out
}

fn rationale(task: TaskToken, h: &DegradationHints, th: &HintThresholds) -> String {
    match task {
        TaskToken::Deraining => format!(
            "oriented streak evidence with line_score={:.3} (>{}), anisotropy={:.3} (>{}) and freq_ratio={:.3} (>{})",
            h.line_score, th.line_score_min, h.anisotropy, th.anisotropy_min, h.freq_ratio, th.freq_ratio_min
        ),
        TaskToken::Desnowing => format!(
            "isotropic bright particles with small_blobs={} (>{}) and anisotropy={:.3} (<{})",
            h.small_blobs, th.small_blobs_min, h.snow_anisotropy, th.snow_anisotropy_max
        ),
        TaskToken::Dehazing => format!(
            "depth-dependent veil with haze_score={:.3} (>{}) and depth_grad={:.3} (>{})",
            h.haze_score, th.haze_score_min, h.depth_grad, th.depth_grad_min
        ),
        TaskToken::Deblur => format!(
            "smeared edges with grad95={:.3} (<{}), lap_var={:.4} (<{}) and hf_energy={:.4} (<{})",
            h.grad95, th.grad95_max, h.lap_var, th.lap_var_max, h.hf_energy, th.hf_energy_max
        ),
        TaskToken::Denoise => format!(
            "flat-region speckle with noise_mad={:.4}, chroma_std={:.4} and noise_score={:.3} (>{})",
            h.noise_mad, h.chroma_std, h.noise_score, th.noise_score_min
        ),
        TaskToken::LightEnhancement => format!(
            "global underexposure with mean_y={:.3} (<{}) or p50={:.3} (<{})",
            h.mean_y, th.mean_y_max, h.p50_y, th.p50_max
        ),
        TaskToken::SuperResolution => format!(
            "small native size {}x{} below {} pixels per side",
            h.height, h.width, th.sr_min_side
        ),
    }
}

/// Picks the task with the largest positive margin; earlier tasks in
/// [`TaskToken::ALL`] win exact ties. When no rule fires the plan defaults to
/// the least destructive intervention and says so in the rationale.
pub fn plan(h: &DegradationHints, th: &HintThresholds) -> RestorationPlan {
    let severities = severity_scores(h, th);
    let mut best = TaskToken::ALL[0];
    for task in TaskToken::ALL {
        // NaN margins never win.
        if severities[&task] > severities[&best] || severities[&best].is_nan() {
            best = task;
        }
    }
    let (task, rationale) = if severities[&best] > 0.0 {
        (best, rationale(best, h, th))
    } else {
        (
            TaskToken::Denoise,
            "no rule fired; conservative default".to_string(),
        )
    };
    RestorationPlan {
        task,
        focus: task.focus(),
        rationale,
        pipeline: task.pipeline().iter().map(|s| s.to_string()).collect(),
        severities,
    }
}

const TASK_KEY: &str = "Task: ";
const FOCUS_KEY: &str = ", Focus: ";
const RATIONALE_KEY: &str = ", Rationale: ";
const PIPELINE_KEY: &str = ", Pipeline: ";
const STEP_SEP: &str = " -> ";

/// `Task: <token>, Focus: <high|low>, Rationale: <...>, Pipeline: <s1 -> s2 -> ...>`
pub fn render_plan(p: &RestorationPlan) -> String {
    let clean = |s: &str| s.replace(['\n', '\r'], " ");
    format!(
        "{TASK_KEY}{}{FOCUS_KEY}{}{RATIONALE_KEY}{}{PIPELINE_KEY}{}",
        p.task,
        p.focus,
        clean(&p.rationale),
        p.pipeline
            .iter()
            .map(|s| clean(s))
            .collect::<Vec<_>>()
            .join(STEP_SEP)
    )
}

/// The fields carried by a rendered plan line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanLine {
    pub task: TaskToken,
    pub focus: Focus,
    pub rationale: String,
    pub pipeline: Vec<String>,
}

impl From<&RestorationPlan> for PlanLine {
    fn from(p: &RestorationPlan) -> Self {
        Self {
            task: p.task,
            focus: p.focus,
            rationale: p.rationale.clone(),
            pipeline: p.pipeline.clone(),
        }
    }
}

pub fn parse_plan_line(line: &str) -> Result<PlanLine> {
    let bad = || usage(format!("not a plan line: {line:?}"));
    let rest = line.strip_prefix(TASK_KEY).ok_or_else(bad)?;
    let (task, rest) = rest.split_once(FOCUS_KEY).ok_or_else(bad)?;
    let (focus, rest) = rest.split_once(RATIONALE_KEY).ok_or_else(bad)?;
    let (rationale, pipeline) = rest.rsplit_once(PIPELINE_KEY).ok_or_else(bad)?;
    Ok(PlanLine {
        task: task.parse()?,
        focus: focus.parse()?,
        rationale: rationale.to_string(),
        pipeline: pipeline.split(STEP_SEP).map(str::to_string).collect(),
    })
}
