use std::path::Path;

use freqplan::advloss::{discriminator_loss, generator_loss, total_objective, CriticHead, RandomFeatures};
use freqplan::freqmoe::{demo_tokens, route_tokens, GateWeights, TokenSequence};
use freqplan::io::read_png;
use freqplan::spectra::{omega_grid, tabulate};
use freqplan::tensorio::{self, Tensor};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{self, sorted};
use crate::Context;

fn load_tokens(path: &Path) -> CliResult<TokenSequence> {
    let t = tensorio::load(path)?;
    match t.dims.as_slice() {
        &[b, l, d] => Ok(TokenSequence::new(b, l, d, t.data)?),
        dims => Err(CliError::usage(format!(
            "{}: expected a rank-3 token tensor, found dims {dims:?}",
            path.display()
        ))),
    }
}

fn gate_tensor(w: &GateWeights) -> CliResult<Tensor> {
    Ok(Tensor::new(vec![w.batch(), w.tokens(), w.experts()], w.values().to_vec())?)
}

fn expert_label(experts: usize, e: usize) -> String {
    match (experts, e) {
        (2, 0) => "low".into(),
        (2, 1) => "high".into(),
        _ => format!("expert_{e}"),
    }
}

pub fn route(ctx: &Context, tokens: Option<&Path>, dump: Option<&Path>) -> CliResult<()> {
    let cfg = ctx.cfg.router.build()?;
    let seed = ctx.cfg.seed;
    let x = match tokens {
        Some(p) => load_tokens(p)?,
        None => demo_tokens(&ctx.cfg.demo.spec(seed))?,
    };
    let text_length = ctx.cfg.demo.text_length.min(x.length());
    let demo = route_tokens(&x, text_length, seed, &cfg)?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let [b, l, d] = x.shape();
        tensorio::save(dir.join("tokens.fptn"), &Tensor::new(vec![b, l, d], x.values().to_vec())?)?;
        tensorio::save(dir.join("w_visual.fptn"), &gate_tensor(&demo.w_visual)?)?;
        tensorio::save(dir.join("w_text.fptn"), &gate_tensor(&demo.w_text)?)?;
        tensorio::save(dir.join("fused.fptn"), &gate_tensor(&demo.routing.fused)?)?;
        tensorio::save(dir.join("reduced.fptn"), &gate_tensor(&demo.routing.reduced)?)?;
    }
    let experts = demo.routing.reduced.experts();
    let labels: Vec<String> = demo.routing.selection.iter().map(|&e| expert_label(experts, e)).collect();
    let mut v = sorted(&demo)?;
    if let Value::Object(map) = &mut v {
        map.insert("selection_labels".into(), json!(labels));
        map.insert("shape".into(), json!(x.shape()));
    }
    output::emit_json(&v, ctx.out.as_deref())
}

pub fn spectra(ctx: &Context) -> CliResult<()> {
    let s = &ctx.cfg.spectra;
    let cfg = s.build()?;
    let rows = tabulate(&cfg, &omega_grid(s.omega_max, s.points)?)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Internal(format!("csv: {e}"));
    w.write_record(["omega", "h_hat", "xi", "w_tilde"]).map_err(csv_err)?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(format!("csv: {e}")))?;
    match &ctx.out {
        Some(p) => output::write_file(p, &bytes),
        None => output::stdout(&String::from_utf8_lossy(&bytes)),
    }
}

pub fn loss(ctx: &Context, restored: &Path, reference: &Path, freq_term: f64) -> CliResult<()> {
    let cfg = &ctx.cfg.loss;
    cfg.validate()?;
    if !freq_term.is_finite() {
        return Err(CliError::usage("--freq-term must be finite"));
    }
    let x_hat = read_png(restored)?;
    let x = read_png(reference)?;
    let c = &ctx.cfg.critic;
    let features = RandomFeatures::new(ctx.cfg.seed, c.levels, c.channels)?;
    let f_hat = features.extract(&x_hat)?;
    let f_x = features.extract(&x)?;
    let mut head = CriticHead::random(ctx.cfg.seed.wrapping_add(1), &vec![c.channels; c.levels], c.channels)?;
    let fake = head.score(&f_hat)?;
    let real = head.score(&f_x)?;
    let gen = generator_loss(
        &x_hat,
        &x,
        &features.perceptual(&f_hat),
        &features.perceptual(&f_x),
        fake.aggregate,
        cfg,
    )?;
    let v = json!({
        "config": sorted(cfg)?,
        "critic": { "fake": sorted(&fake)?, "real": sorted(&real)? },
        "discriminator_loss": discriminator_loss(real.aggregate, fake.aggregate),
        "freq_term": freq_term,
        "generator": sorted(&gen)?,
        "total_objective": total_objective(&gen, freq_term, cfg),
    });
    output::emit_json(&v, ctx.out.as_deref())
}
