use std::path::Path;

use freqplan::hints::extract_hints_with;
use freqplan::io::read_png;
use freqplan::planner::{plan, render_plan};
use serde_json::Value;

use crate::error::CliResult;
use crate::output::{self, sorted};
use crate::Context;

/// Prints the plan as one line of key-sorted JSON followed by the rendered
/// plan line. With `--out` the JSON goes to the file instead.
pub fn run(ctx: &Context, image: &Path) -> CliResult<()> {
    ctx.cfg.thresholds.validate()?;
    let img = read_png(image)?;
    let hints = extract_hints_with(&img, &ctx.cfg.cues)?;
    let p = plan(&hints, &ctx.cfg.thresholds);
    let line = render_plan(&p);
    let mut v = sorted(&p)?;
    if let Value::Object(map) = &mut v {
        map.insert("line".into(), Value::String(line.clone()));
        if ctx.verbose {
            map.insert("hints".into(), sorted(&hints)?);
        }
    }
    match &ctx.out {
        Some(path) => {
            output::write_file(path, output::pretty(&v)?.as_bytes())?;
            output::stdout(&format!("{line}\n"))
        }
        None => output::stdout(&format!("{}\n{line}\n", serde_json::to_string(&v)?)),
    }
}
