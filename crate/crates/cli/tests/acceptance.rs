//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use freqplan::advloss::{
    aggregate, discriminator_loss, discriminator_loss_grad, generator_loss, generator_terms_grad, total_objective,
    CriticHead, LossConfig, RandomFeatures, SpectralNorm,
};
use freqplan::freqmoe::{
    fir_lowpass, freq_regularizer, freq_regularizer_grad, fuse, lora_merge, low_band_fraction,
    low_band_fraction_vjp, route, spectral_gate, text_gate, FirKernel, GateWeights, Granularity, LoraExpert,
    RouterConfig, TokenSequence,
};
use freqplan::hints::{haze_score, noise_score, HintThresholds};
use freqplan::imgstats::ImageBuffer;
use freqplan::spectra::{
    omega_grid, tabulate, tube_bound_check, tv_accumulation, xi_lg, DiscreteDist1D, Operator, SpectralConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gauss_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gauss(rng))
}

fn random_tokens(rng: &mut ChaCha8Rng, b: usize, l: usize, d: usize) -> TokenSequence {
    TokenSequence::new(b, l, d, (0..b * l * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_simplex(w: &GateWeights, what: &str) -> Result<(), String> {
    for row in w.rows() {
        let s: f64 = row.iter().sum();
        ensure((s - 1.0).abs() < 1e-12 && row.iter().all(|v| *v >= 0.0), || {
            format!("{what} row {row:?} is off the simplex")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- CLI plumbing

fn freqplan(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freqplan"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn freqplan")
}

fn run_ok(args: &[&str], env: &[(&str, &str)]) -> Result<Vec<u8>, String> {
    let out = freqplan(args, env);
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn timed(args: &[&str], env: &[(&str, &str)]) -> Result<(Vec<u8>, Duration), String> {
    let start = Instant::now();
    let out = run_ok(args, env)?;
    Ok((out, start.elapsed()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn dir_digest(dir: &Path) -> Result<String, String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for p in &names {
        h.update(p.file_name().unwrap().to_str().unwrap().as_bytes());
        h.update(std::fs::read(p).map_err(|e| e.to_string())?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

struct Corpus {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn manifest(&self) -> PathBuf {
        self.root.join("manifest.jsonl")
    }
}

fn synth_default(name: &str) -> Result<Corpus, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join(name);
    run_ok(&["synth", "--n", "10", "--size", "512", "--seed", "7", "--out", s(&root)], &[])?;
    Ok(Corpus { _dir: dir, root })
}

// ---------------------------------------------------------------- criteria

fn planner_accuracy(corpus: &Corpus) -> Check {
    let manifest = corpus.manifest();
    let (out, single) = timed(&["eval", s(&manifest)], &[("RAYON_NUM_THREADS", "1")])?;
    let report: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    ensure(report["evaluated"] == 70, || format!("evaluated {} of 70", report["evaluated"]))?;
    let accuracy = report["accuracy"].as_f64().ok_or("no accuracy")?;
    ensure(accuracy >= 0.90, || format!("accuracy {accuracy:.4} < 0.90"))?;
    let mut min_recall = f64::INFINITY;
    for class in report["per_class"].as_array().ok_or("no per_class")? {
        let r = class["recall"].as_f64().ok_or("undefined recall")?;
        ensure(r >= 0.80, || format!("{} recall {r:.2} < 0.80", class["task"]))?;
        min_recall = min_recall.min(r);
    }
    ensure(single.as_secs_f64() <= 60.0, || format!("1-thread eval took {:.2} s > 60 s", single.as_secs_f64()))?;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let parallel = if cores >= 8 {
        let (_, t8) = timed(&["eval", s(&manifest)], &[("RAYON_NUM_THREADS", "8")])?;
        ensure(t8.as_secs_f64() <= 10.0, || format!("8-thread eval took {:.2} s > 10 s", t8.as_secs_f64()))?;
        format!("8-thread {:.2} s <= 10 s", t8.as_secs_f64())
    } else {
        format!("8-thread clause not measured ({cores} core(s) available)")
    };
    Ok(format!(
        "accuracy {accuracy:.4} >= 0.90, min recall {min_recall:.2} >= 0.80, 1-thread eval {:.2} s <= 60 s, {parallel}",
        single.as_secs_f64()
    ))
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn formula_fidelity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (mad, chroma) = (rng.random_range(0.0..0.1), rng.random_range(0.0..0.1));
        let (dark, sat, depth) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(-0.5..0.5));
        let n = 0.6 * logistic(50.0 * (mad - 0.005)) + 0.4 * logistic(50.0 * (chroma - 0.0095));
        let h = 0.4 * logistic(7.0 * (dark - 0.33)) + 0.3 * logistic(7.0 * (0.30 - sat)) + 0.3 * logistic(8.0 * (depth - 0.03));
        worst = worst.max((noise_score(mad, chroma) - n).abs()).max((haze_score(dark, sat, depth) - h).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e} > 1e-12"))?;
    let t = HintThresholds::default();
    let table = [
        ("line_score", t.line_score_min, 0.16),
        ("anisotropy", t.anisotropy_min, 0.40),
        ("freq_ratio", t.freq_ratio_min, 1.05),
        ("small_blobs", t.small_blobs_min, 25.0),
        ("snow_anisotropy", t.snow_anisotropy_max, 0.42),
        ("noise_score", t.noise_score_min, 0.45),
        ("grad95", t.grad95_max, 0.17),
        ("lap_var", t.lap_var_max, 0.27),
        ("hf_energy", t.hf_energy_max, 0.052),
        ("haze_score", t.haze_score_min, 0.50),
        ("depth_grad", t.depth_grad_min, 0.03),
        ("mean_y", t.mean_y_max, 0.32),
        ("p50", t.p50_max, 0.26),
    ];
    for (name, got, want) in table {
        ensure(got.to_bits() == f64::to_bits(want), || format!("threshold {name} = {got}, want {want}"))?;
    }
    Ok(format!("1000 tuples, max deviation {worst:.1e} <= 1e-12; 13 thresholds bit-exact"))
}

fn router_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for _ in 0..100 {
        let (b, l, d) = (rng.random_range(1..4), rng.random_range(5..48), rng.random_range(1..9));
        let radius: usize = rng.random_range(0..5);
        let g = FirKernel::gaussian(2 * radius + 1, rng.random_range(0.3..4.0)).unwrap();
        let x = random_tokens(&mut rng, b, l, d);
        let y = fir_lowpass(&x, &g).map_err(|e| e.to_string())?;
        let mut oracle = Vec::with_capacity(b * l * d);
        for bi in 0..b {
            for t in 0..l {
                for c in 0..d {
                    let mut acc = 0.0;
                    for (k, tap) in g.taps().iter().enumerate() {
                        let s = (t as i64 + k as i64 - radius as i64).clamp(0, l as i64 - 1) as usize;
                        acc += tap * x.get(bi, s, c);
                    }
                    oracle.push(acc);
                }
            }
        }
        let e = worst.entry("fir_lowpass").or_default();
        *e = e.max(max_abs_diff(y.values(), &oracle));

        let cfg = RouterConfig { kernel: g.clone(), temperature: rng.random_range(0.1..3.0), ..Default::default() };
        let visual = spectral_gate(&x, &cfg).map_err(|e| e.to_string())?;
        check_simplex(&visual, "spectral gate")?;
        let w2 = gauss_matrix(&mut rng, d, 2);
        let text2 = text_gate(&x, l, &w2).map_err(|e| e.to_string())?;
        let fused = fuse(&text2, &visual, rng.random_range(0.0..=1.0)).map_err(|e| e.to_string())?;
        check_simplex(&fused, "fused gate")?;
        for gran in [Granularity::Token, Granularity::Sequence] {
            let r = route(&fused, gran).map_err(|e| e.to_string())?;
            check_simplex(&r.reduced, "reduced gate")?;
            check_simplex(&r.one_hot(), "one-hot routing")?;
        }
    }
    for _ in 0..100 {
        let (b, l, d, n) = (rng.random_range(1..4), rng.random_range(1..30), rng.random_range(1..9), rng.random_range(1..6));
        let target = l + rng.random_range(0..8);
        let x = random_tokens(&mut rng, b, l, d);
        let w = gauss_matrix(&mut rng, d, n);
        let gate = text_gate(&x, target, &w).map_err(|e| e.to_string())?;
        check_simplex(&gate, "text gate")?;
        let mut dev: f64 = 0.0;
        for bi in 0..b {
            for t in 0..target {
                let logits: Vec<f64> = (0..n)
                    .map(|e| if t < l { (0..d).map(|k| x.get(bi, t, k) * w[(k, e)]).sum() } else { 0.0 })
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
                for e in 0..n {
                    dev = dev.max((gate.row(bi, t)[e] - (logits[e] - m).exp() / z).abs());
                }
            }
        }
        let e = worst.entry("text_gate").or_default();
        *e = e.max(dev);
    }
    for _ in 0..100 {
        let (d_out, d_in) = (rng.random_range(1..40), rng.random_range(1..40));
        let count = rng.random_range(0..4);
        let base = gauss_matrix(&mut rng, d_out, d_in);
        let experts: Vec<LoraExpert> = (0..count)
            .map(|_| {
                let r = rng.random_range(1..9);
                LoraExpert::new(gauss_matrix(&mut rng, d_out, r), gauss_matrix(&mut rng, r, d_in)).unwrap()
            })
            .collect();
        let alpha: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
        let merged = lora_merge(&base, &experts, &alpha).map_err(|e| e.to_string())?;
        let mut dev: f64 = 0.0;
        for i in 0..d_out {
            for j in 0..d_in {
                let mut acc = base[(i, j)];
                for (ex, a) in experts.iter().zip(&alpha) {
                    for k in 0..ex.rank() {
                        acc += a * ex.a()[(i, k)] * ex.b()[(k, j)];
                    }
                }
                dev = dev.max((merged[(i, j)] - acc).abs());
            }
        }
        let e = worst.entry("lora_merge").or_default();
        *e = e.max(dev);
    }
    for (name, dev) in &worst {
        ensure(*dev <= 1e-10, || format!("{name} deviates by {dev:e} > 1e-10"))?;
    }
    Ok(format!(
        "100 shapes each, max deviation fir {:.1e} / text {:.1e} / lora {:.1e} <= 1e-10; all gates on the simplex to 1e-12",
        worst["fir_lowpass"], worst["text_gate"], worst["lora_merge"]
    ))
}

fn band_specialization() -> Check {
    let independent: Vec<f64> = (-4i32..=4).map(|k| (-(k * k) as f64 / 8.0).exp()).collect();
    let total: f64 = independent.iter().sum();
    let g = FirKernel::gaussian(9, 2.0).map_err(|e| e.to_string())?;
    let tap_dev = max_abs_diff(g.taps(), &independent.iter().map(|t| t / total).collect::<Vec<_>>());
    ensure(tap_dev <= 1e-15, || format!("kernel taps deviate by {tap_dev:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (b, l, d) = (2, 128, 4);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let slow: Vec<(f64, f64)> = (0..d).map(|_| (rng.random_range(0.005..0.02), rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let fast: Vec<(f64, f64)> = (0..d).map(|_| (rng.random_range(0.47..0.49), rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let wave = |f: &[(f64, f64)]| {
            TokenSequence::from_fn(b, l, d, |bi, t, c| {
                let (freq, phase) = f[c];
                (std::f64::consts::TAU * freq * t as f64 + phase + bi as f64).sin()
            })
            .unwrap()
        };
        let (y_low, y_high) = (wave(&slow), wave(&fast));
        let right = freq_regularizer(&y_low, &y_high, &g).map_err(|e| e.to_string())?;
        let swapped = freq_regularizer(&y_high, &y_low, &g).map_err(|e| e.to_string())?;
        let ratio = right / swapped;
        ensure(ratio <= 0.1, || format!("correct {right:e} vs swapped {swapped:e}, ratio {ratio:.3} > 0.1"))?;
        worst_ratio = worst_ratio.max(ratio);
    }
    for c in [0.3, -1.7, std::f64::consts::PI, 1e6 / 7.0] {
        let y_low = TokenSequence::from_fn(b, l, d, |_, _, _| c).unwrap();
        let zero = TokenSequence::zeros(b, l, d).unwrap();
        let loss = freq_regularizer(&y_low, &zero, &g).map_err(|e| e.to_string())?;
        ensure(loss == 0.0, || format!("constant {c} gives L_freq = {loss:e}, not 0"))?;
    }
    Ok(format!("20 band-pure pairs, max correct/swapped ratio {worst_ratio:.2e} <= 0.1; constant y_low gives exactly 0"))
}

fn fd_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    inf_norm(&diff) / inf_norm(numeric).max(1e-8)
}

fn central_fd(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Check {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, rel: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(rel);
    };
    for _ in 0..100 {
        let (b, l, d) = (rng.random_range(1..3), rng.random_range(8..16), rng.random_range(1..4));
        let g = FirKernel::gaussian(2 * rng.random_range(1..4) + 1, rng.random_range(0.5..2.5)).unwrap();
        let y_low = random_tokens(&mut rng, b, l, d);
        let y_high = random_tokens(&mut rng, b, l, d);
        let grad = freq_regularizer_grad(&y_low, &y_high, &g).map_err(|e| e.to_string())?;
        let fd_low = central_fd(y_low.values(), H, |v| {
            freq_regularizer(&TokenSequence::new(b, l, d, v.to_vec()).unwrap(), &y_high, &g).unwrap()
        });
        let fd_high = central_fd(y_high.values(), H, |v| {
            freq_regularizer(&y_low, &TokenSequence::new(b, l, d, v.to_vec()).unwrap(), &g).unwrap()
        });
        let analytic: Vec<f64> = grad.grad_low.values().iter().chain(grad.grad_high.values()).copied().collect();
        let numeric: Vec<f64> = fd_low.into_iter().chain(fd_high).collect();
        record("L_freq", fd_rel(&analytic, &numeric));

        let x = random_tokens(&mut rng, b, l, d.max(2));
        let upstream: Vec<f64> = (0..b * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vjp = low_band_fraction_vjp(&x, &g, &upstream).map_err(|e| e.to_string())?;
        let [_, _, dx] = x.shape();
        let fd = central_fd(x.values(), H, |v| {
            let p = low_band_fraction(&TokenSequence::new(b, l, dx, v.to_vec()).unwrap(), &g).unwrap();
            p.iter().zip(&upstream).map(|(a, c)| a * c).sum()
        });
        record("p_low", fd_rel(vjp.values(), &fd));

        let (dr, df) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let (_, g_real, g_fake) = discriminator_loss_grad(dr, df);
        let fd = central_fd(&[dr, df], H, |v| discriminator_loss(v[0], v[1]));
        record("discriminator_loss", fd_rel(&[g_real, g_fake], &fd));

        let (hgt, wid, nf) = (rng.random_range(8..12), rng.random_range(8..12), rng.random_range(1..10));
        let n = hgt * wid * 3;
        let x_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let x_ref = ImageBuffer::new(hgt, wid, 3, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let f_hat: Vec<f64> = (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f_x: Vec<f64> = (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d_fake = rng.random_range(-3.0..3.0);
        let cfg = LossConfig::default();
        let img = |v: &[f64]| ImageBuffer::new(hgt, wid, 3, v.to_vec()).unwrap();
        let ga = generator_terms_grad(&x_hat, x_ref.data(), &f_hat, &f_x, &cfg).map_err(|e| e.to_string())?;
        let mut point: Vec<f64> = x_hat.iter().chain(&f_hat).copied().collect();
        point.push(d_fake);
        let fd = central_fd(&point, H, |v| {
            generator_loss(&img(&v[..n]), &x_ref, &v[n..n + nf], &f_x, v[n + nf], &cfg).unwrap().total
        });
        let mut analytic: Vec<f64> = ga.x_hat.iter().chain(&ga.features_hat).copied().collect();
        analytic.push(ga.d_fake);
        record("generator_loss", fd_rel(&analytic, &fd));
    }
    for (name, rel) in &worst {
        ensure(*rel < 1e-4, || format!("{name} relative error {rel:e} >= 1e-4"))?;
    }
    Ok(format!(
        "100 points each, step 1e-5, max rel error L_freq {:.1e} / p_low {:.1e} / D {:.1e} / G {:.1e} < 1e-4",
        worst["L_freq"], worst["p_low"], worst["discriminator_loss"], worst["generator_loss"]
    ))
}

/// Singular values by one-sided Jacobi rotations, largest first.
fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    for _ in 0..80 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn spectral_normalization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(2..=64), rng.random_range(2..=64));
        let k = m.min(n);
        let u = gauss_matrix(&mut rng, m, k).qr().q();
        let v = gauss_matrix(&mut rng, n, k).qr().q();
        let mut sv: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv[0] = rng.random_range(1.1..3.0) * sv[1];
        let scale = rng.random_range(0.5..4.0);
        let w = &u * DMatrix::from_diagonal(&DVector::from_iterator(k, sv.iter().map(|x| x * scale))) * v.transpose();
        let oracle = jacobi_singular_values(&w);
        min_gap = min_gap.min(oracle[0] / oracle[1]);
        let est = SpectralNorm::new().normalize(&w, 50).map_err(|e| e.to_string())?.sigma;
        let err = (est - oracle[0]).abs();
        ensure(err <= 1e-3, || format!("{m}x{n}: estimate {est} vs oracle {}", oracle[0]))?;
        worst = worst.max(err);
    }
    ensure(min_gap >= 1.1 - 1e-9, || format!("generated gap {min_gap} below 1.1"))?;
    Ok(format!("100 matrices up to 64x64, sigma1/sigma2 >= {min_gap:.3}, 50 iterations, max error {worst:.1e} <= 1e-3"))
}

/// Exact W1 as the integral of the CDF gap over the merged support.
fn w1_oracle(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<f64> = p.iter().chain(q).map(|(x, _)| *x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let cdf = |d: &[(f64, f64)], t: f64| d.iter().filter(|(x, _)| *x <= t).map(|(_, m)| m).sum::<f64>();
    xs.windows(2).map(|w| (cdf(p, w[0]) - cdf(q, w[0])).abs() * (w[1] - w[0])).sum()
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    pts.sort_by(f64::total_cmp);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    let head: f64 = masses[..n - 1].iter().sum();
    masses[n - 1] = (1.0 - head).max(0.0);
    pts.into_iter().zip(masses).collect()
}

fn to_dist(d: &[(f64, f64)]) -> DiscreteDist1D {
    DiscreteDist1D::new(d.iter().map(|p| p.0).collect(), d.iter().map(|p| p.1).collect()).unwrap()
}

fn theory_demos() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let operators = [
        Operator::Identity,
        Operator::GaussianBlur { sigma: 1.5 },
        Operator::IdealLowpass { cutoff: 0.2 },
        Operator::MaskBand { lo: 0.1, hi: 0.3 },
    ];
    let grid = omega_grid(0.5, 256).map_err(|e| e.to_string())?;
    let mut null_rows = 0;
    for _ in 0..50 {
        for op in operators {
            let cfg = SpectralConfig {
                kappa: rng.random_range(0.5..3.0),
                sigma_eta: rng.random_range(0.05..1.0),
                sigma_t: rng.random_range(0.5..4.0),
                operator: op,
                ..Default::default()
            };
            let cap = 1.0 / (cfg.sigma_eta * cfg.sigma_eta);
            for r in tabulate(&cfg, &grid).map_err(|e| e.to_string())? {
                ensure((0.0..=cap).contains(&r.xi), || format!("xi {} outside [0, {cap}] at {}", r.xi, r.omega))?;
                if r.h_hat == 0.0 {
                    ensure(r.w_tilde == 0.0, || format!("w_tilde {} on a null band at {}", r.w_tilde, r.omega))?;
                    null_rows += 1;
                }
            }
        }
    }
    ensure(null_rows > 0, || "no null-band rows were exercised".into())?;

    let mut worst_damping: f64 = 0.0;
    for _ in 0..200 {
        let cfg = SpectralConfig {
            kappa: rng.random_range(0.5..3.0),
            sigma_eta: rng.random_range(0.05..1.0),
            sigma_t: rng.random_range(0.5..4.0),
            ..Default::default()
        };
        let start = 2.0 / cfg.sigma_t;
        for i in 0..20 {
            let omega = start * (1.0 + i as f64 * 0.25);
            let w = |o: f64| o * o * (-cfg.sigma_t * cfg.sigma_t * o * o).exp() * xi_lg(o, &cfg).unwrap().value;
            let ratio = w(2.0 * omega) / w(omega);
            ensure(ratio < 0.1, || format!("damping ratio {ratio} at omega {omega}, sigma_t {}", cfg.sigma_t))?;
            worst_damping = worst_damping.max(ratio);
        }
    }

    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let eps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let (prod, sum) = tv_accumulation(&eps).map_err(|e| e.to_string())?;
        let direct = 1.0 - eps.iter().map(|e| 1.0 - e).product::<f64>();
        ensure((prod - direct).abs() <= 1e-15 && prod <= sum + 1e-15, || format!("TV bound fails on {eps:?}"))?;
    }

    let mut tight: f64 = f64::INFINITY;
    for _ in 0..1000 {
        let (np, nq) = (rng.random_range(1..8), rng.random_range(1..8));
        let manifold: Vec<f64> = {
            let m = rng.random_range(1..4);
            (0..m).map(|_| rng.random_range(-5.0..5.0)).collect()
        };
        let p: Vec<(f64, f64)> = random_dist(&mut rng, np)
            .into_iter()
            .map(|(_, m)| (manifold[rng.random_range(0..manifold.len())], m))
            .collect::<Vec<_>>();
        let mut p = p;
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let q = random_dist(&mut rng, nq);
        let alpha = rng.random_range(0.05..2.0);
        let w1 = w1_oracle(&p, &q);
        let outside: f64 =
            q.iter().filter(|(x, _)| manifold.iter().all(|m| (x - m).abs() > alpha)).map(|(_, m)| m).sum();
        let check = tube_bound_check(&to_dist(&p), &to_dist(&q), &manifold, alpha).map_err(|e| e.to_string())?;
        ensure((check.w1 - w1).abs() <= 1e-9, || format!("W1 {} vs oracle {w1}", check.w1))?;
        ensure(w1 >= alpha * outside - 1e-12 && check.holds, || {
            format!("tube bound fails: W1 {w1} < {alpha} * {outside}")
        })?;
        tight = tight.min(w1 - alpha * outside);
    }
    Ok(format!(
        "xi within [0, 1/sigma_eta^2] on 200x256 grid points, {null_rows} null-band rows exactly 0, max damping ratio {worst_damping:.1e} < 0.1, TV bound on 1000 vectors, tube bound on 1000 instances (min slack {tight:.1e})"
    ))
}

fn loss_arithmetic() -> Check {
    let cfg = LossConfig::default();
    ensure(
        cfg.alpha.to_bits() == 50f64.to_bits()
            && cfg.beta.to_bits() == 5f64.to_bits()
            && cfg.lambda.to_bits() == 0.5f64.to_bits()
            && cfg.gamma.to_bits() == 1e-3f64.to_bits(),
        || format!("default loss weights {cfg:?}"),
    )?;
    let ones = ImageBuffer::filled(16, 16, 3, 1.0).unwrap();
    let zeros = ImageBuffer::filled(16, 16, 3, 0.0).unwrap();
    let f = vec![0.25; 12];
    let gen = generator_loss(&ones, &zeros, &f, &f, 0.0, &cfg).map_err(|e| e.to_string())?;
    ensure(gen.pixel_mse == 1.0 && gen.total == 50.0, || format!("unit MSE gives total {}", gen.total))?;
    let total = total_objective(&gen, 1000.0, &cfg);
    ensure(total == 51.0, || format!("total_objective with L_freq = 1000 gives {total}, want 51"))?;

    let img = ImageBuffer::from_fn_rgb(24, 20, |y, x| [(y as f64 / 23.0), (x as f64 / 19.0), 0.5]).unwrap();
    let features = RandomFeatures::new(11, 3, 6).map_err(|e| e.to_string())?;
    let fm = features.extract(&img).map_err(|e| e.to_string())?;
    let mut head = CriticHead::random(12, &[6, 6, 6], 6).map_err(|e| e.to_string())?;
    let score = head.score(&fm).map_err(|e| e.to_string())?;
    let direct = (score.level_means.iter().sum::<f64>() + score.pooled_score) / (score.level_means.len() + 1) as f64;
    let mut dev = (score.aggregate - direct).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let levels: Vec<f64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let pooled = rng.random_range(-5.0..5.0);
        let want = (levels.iter().sum::<f64>() + pooled) / (levels.len() + 1) as f64;
        dev = dev.max((aggregate(levels, pooled).aggregate - want).abs());
    }
    ensure(dev <= 1e-12, || format!("aggregate deviates by {dev:e}"))?;
    Ok(format!("unit MSE total 50.0 exact, total_objective 51.0 exact with gamma 1e-3, aggregate max deviation {dev:.1e} <= 1e-12"))
}

fn determinism(corpus: &Corpus) -> Check {
    let again = synth_default("again")?;
    let (a, b) = (dir_digest(&corpus.root)?, dir_digest(&again.root)?);
    ensure(a == b, || format!("synth digests differ: {a} vs {b}"))?;

    let first = std::fs::read_to_string(corpus.manifest()).map_err(|e| e.to_string())?;
    let entry: Value = serde_json::from_str(first.lines().next().ok_or("empty manifest")?).map_err(|e| e.to_string())?;
    let image = corpus.root.join(entry["file"].as_str().ok_or("no file")?);
    let analyze = |_: ()| run_ok(&["analyze", "--verbose", s(&image)], &[]).map(|o| hex(&o));
    let (a1, a2) = (analyze(())?, analyze(())?);
    ensure(a1 == a2, || "analyze output differs between runs".into())?;

    let eval = |m: PathBuf| run_ok(&["eval", "--verbose", s(&m)], &[]).map(|o| hex(&o));
    let (e1, e2) = (eval(corpus.manifest())?, eval(again.manifest())?);
    ensure(e1 == e2, || "eval output differs between runs".into())?;
    Ok(format!("synth {}.., analyze {}.., eval {}.. identical across reruns", &a[..12], &a1[..12], &e1[..12]))
}

fn main() {
    let corpus = synth_default("corpus");
    let corpus = &corpus;
    let with_corpus = |f: fn(&Corpus) -> Check| move || corpus.as_ref().map_err(|e| e.clone()).and_then(f);
    let criteria: Vec<Criterion> = vec![
        ("planner accuracy", Box::new(with_corpus(planner_accuracy))),
        ("formula fidelity", Box::new(formula_fidelity)),
        ("router oracle equivalence", Box::new(router_oracles)),
        ("band specialization", Box::new(band_specialization)),
        ("gradient checks", Box::new(gradient_checks)),
        ("spectral normalization", Box::new(spectral_normalization)),
        ("theory demos", Box::new(theory_demos)),
        ("loss arithmetic", Box::new(loss_arithmetic)),
        ("determinism", Box::new(with_corpus(determinism))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
