use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use nk_core::activations::{self, from_name, ActivationSpec, JET_ORDER};
use nk_core::dual::{Backend, DualActivation, DualOptions};
use nk_core::finite_width::{pair_panel, validate, McComparison};
use nk_core::gp_paths::{sample_path, sobolev_series_lenient, sobolev_threshold, SphericalBasis};
use nk_core::hermite::{self, expand, GaussHermiteRule};
use nk_core::kernels::{build_kernel, evaluate_kernel, linear_grid, KernelKind, KernelOptions, NetworkConfig};
use nk_core::spectrum::{
    eigenvalues, fit_decay, multiplicity, predict_exponent, DecayFit, ExponentPrediction, FitParity, PredictedDecay,
    Spectrum, DEFAULT_L_MAX, DEFAULT_N_QUAD,
};

use crate::config::Resolver;
use crate::output::{num, slug, write_manifest, RunManifest, Sink};
use crate::{ActArgs, Cli, Command, NetArgs};

struct Ctx {
    res: Resolver,
    sink: Sink,
    seed: Option<u64>,
}

impl Ctx {
    fn activation(&mut self, a: &ActArgs) -> Result<ActivationSpec> {
        let name: String = self.res.require("act", a.act.clone().or_else(|| a.activation.clone()))?;
        let mut params = Vec::new();
        for p in &a.params {
            let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("--param expects KEY=VALUE, got `{p}`"))?;
            let v: f64 = v.trim().parse().with_context(|| format!("--param {k}: not a number"))?;
            self.res.record(&format!("param.{}", k.trim()), &v);
            params.push((k.trim().to_string(), v));
        }
        Ok(from_name(&name, &params)?)
    }

    fn network(&mut self, n: &NetArgs) -> Result<NetworkConfig> {
        let depth = self.res.get("depth", n.depth, 2)?;
        let w = self.res.get("sigma-w2", n.sigma_w2, 1.0)?;
        let b = self.res.get("sigma-b2", n.sigma_b2, 1.0)?;
        let i = self.res.get("sigma-i2", n.sigma_i2, 1.0)?;
        Ok(NetworkConfig::new(depth, w, b, i)?)
    }

    fn kind(&mut self, flag: &Option<String>) -> Result<KernelKind> {
        let s: String = self.res.get("kind", flag.clone(), "nngp".into())?;
        Ok(s.parse()?)
    }

    fn dual_options(&mut self, backend: &Option<String>, n_coeffs: Option<usize>) -> Result<DualOptions> {
        let b: String = self.res.get("backend", backend.clone(), "quadrature".into())?;
        let n = self.res.get("n-coeffs", n_coeffs, hermite::DEFAULT_N_COEFFS)?;
        Ok(DualOptions { backend: b.parse::<Backend>()?, n_coeffs: n, ..DualOptions::default() })
    }

    fn spectrum_file(&mut self, path: &Option<std::path::PathBuf>, d: Option<usize>) -> Result<Spectrum> {
        let path: std::path::PathBuf = self.res.require("spectrum", path.clone().map(|p| p.display().to_string()))?.into();
        let d_flag = match d {
            Some(d) => Some(d),
            None => self.res_opt_usize("d")?,
        };
        let spec = read_spectrum(&path, d_flag)?;
        self.res.record("d", &spec.d);
        Ok(spec)
    }

    fn res_opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        // a config entry may still provide the value
        let v: String = self.res.get(key, None, String::new())?;
        if v.is_empty() {
            return Ok(None);
        }
        Ok(Some(v.parse().with_context(|| format!("config key `{key}`"))?))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let threads = match cli.threads {
        Some(t) => t,
        None => match std::env::var("NK_THREADS") {
            Ok(v) => v.trim().parse().with_context(|| format!("NK_THREADS=`{v}` is not a thread count"))?,
            Err(_) => 0,
        },
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring the thread pool")?;
    }
    let mut ctx = Ctx { res: Resolver::new(cli.config.as_deref())?, sink: Sink::new(cli.out.clone())?, seed: None };
    let name = match &cli.command {
        Command::Classify { .. } => "classify",
        Command::Hermite { .. } => "hermite",
        Command::Dual { .. } => "dual",
        Command::Kernel { .. } => "kernel",
        Command::Spectrum { .. } => "spectrum",
        Command::Fit { .. } => "fit",
        Command::Predict { .. } => "predict",
        Command::Paths { .. } => "paths",
        Command::Sobolev { .. } => "sobolev",
        Command::McValidate { .. } => "mc-validate",
        Command::Figures { .. } => "figures",
    };
    match &cli.command {
        Command::Classify { act } => classify(&mut ctx, act)?,
        Command::Hermite { act, n, half_nodes, cutoff } => hermite_cmd(&mut ctx, act, *n, *half_nodes, *cutoff)?,
        Command::Dual { act, backend, n_coeffs, grid } => dual_cmd(&mut ctx, act, backend, *n_coeffs, grid)?,
        Command::Kernel { act, net, kind, backend, grid } => kernel_cmd(&mut ctx, act, net, kind, backend, grid)?,
        Command::Spectrum { act, net, kind, backend, d, l_max, n_quad } => {
            spectrum_cmd(&mut ctx, act, net, kind, backend, *d, *l_max, *n_quad)?
        }
        Command::Fit { spectrum, d, parity, window } => fit_cmd(&mut ctx, spectrum, *d, parity, window)?,
        Command::Predict { act, net, kind, d, parity } => predict_cmd(&mut ctx, act, net, kind, *d, parity)?,
        Command::Paths { spectrum, d, seed, grid, l_max } => paths_cmd(&mut ctx, spectrum, *d, *seed, *grid, *l_max)?,
        Command::Sobolev { spectrum, d, r_range } => sobolev_cmd(&mut ctx, spectrum, *d, r_range)?,
        Command::McValidate { act, net, width, samples, d, seed, pairs } => {
            mc_cmd(&mut ctx, act, net, *width, *samples, *d, *seed, *pairs)?
        }
        Command::Figures { which, l_max, n_quad } => figures_cmd(&mut ctx, which, *l_max, *n_quad)?,
    }
    if let Some(dir) = ctx.sink.dir() {
        let outputs = ctx.sink.written().iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
        let manifest = RunManifest {
            subcommand: name,
            parameters: ctx.res.resolved(),
            seed: ctx.seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}

fn classify(ctx: &mut Ctx, a: &ActArgs) -> Result<()> {
    let act = ctx.activation(a)?;
    let report = activations::classify(&act, JET_ORDER)?;
    ctx.sink.json(&format!("classify_{}.json", slug(act.name())), &report)
}

fn hermite_cmd(ctx: &mut Ctx, a: &ActArgs, n: Option<usize>, half: Option<usize>, cutoff: Option<f64>) -> Result<()> {
    let act = ctx.activation(a)?;
    let n = ctx.res.get("n", n, hermite::DEFAULT_N_COEFFS)?;
    let half = ctx.res.get("half-nodes", half, hermite::DEFAULT_HALF_NODES)?;
    let cutoff = ctx.res.get("cutoff", cutoff, hermite::DEFAULT_CUTOFF)?;
    let rule = GaussHermiteRule::split(half, cutoff)?;
    let series = expand(&act, n, &rule);
    if series.truncation_warning() {
        eprintln!("nk: warning: |a_N| is large relative to the series norm; increase --n");
    }
    let rows: Vec<Vec<String>> = series.coeffs.iter().enumerate().map(|(i, a)| vec![i.to_string(), num(*a)]).collect();
    ctx.sink.csv(&format!("hermite_{}.csv", slug(act.name())), &["n", "a_n"], &rows)
}

fn dual_cmd(ctx: &mut Ctx, a: &ActArgs, backend: &Option<String>, n_coeffs: Option<usize>, grid: &Option<String>) -> Result<()> {
    let act = ctx.activation(a)?;
    let opts = ctx.dual_options(backend, n_coeffs)?;
    let ts = t_grid(&ctx.res.get("grid", grid.clone(), "201".into())?)?;
    let dual = DualActivation::new(&act, &opts)?;
    let mut rows = Vec::with_capacity(ts.len());
    for t in ts {
        rows.push(vec![num(t), num(dual.eval(t)?)]);
    }
    ctx.sink.csv(&format!("dual_{}.csv", slug(act.name())), &["t", "dual"], &rows)
}

fn kernel_cmd(
    ctx: &mut Ctx,
    a: &ActArgs,
    net: &NetArgs,
    kind: &Option<String>,
    backend: &Option<String>,
    grid: &Option<String>,
) -> Result<()> {
    let act = ctx.activation(a)?;
    let cfg = ctx.network(net)?;
    let kind = ctx.kind(kind)?;
    let opts = KernelOptions { dual: ctx.dual_options(backend, None)?, cache: None };
    let ts = t_grid(&ctx.res.get("grid", grid.clone(), "201".into())?)?;
    let k = build_kernel(&act, &cfg, kind, &opts)?;
    let vals = evaluate_kernel(&k, &ts)?;
    let rows: Vec<Vec<String>> = ts.iter().zip(&vals).map(|(t, v)| vec![num(*t), num(*v)]).collect();
    ctx.sink.csv(&format!("kernel_{}_{kind}_L{}.csv", slug(act.name()), cfg.depth), &["t", "kappa"], &rows)
}

pub const SPECTRUM_HEADER: [&str; 5] = ["l", "mu", "multiplicity", "parity", "is_zero"];

fn spectrum_rows(spec: &Spectrum) -> Vec<Vec<String>> {
    let thr = spec.zero_threshold();
    spec.mu
        .iter()
        .enumerate()
        .map(|(l, mu)| {
            vec![
                l.to_string(),
                num(*mu),
                multiplicity(l, spec.d).to_string(),
                if l % 2 == 0 { "even" } else { "odd" }.to_string(),
                u8::from(*mu <= thr).to_string(),
            ]
        })
        .collect()
}

fn read_spectrum(path: &Path, d: Option<usize>) -> Result<Spectrum> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()));
    let (ci, cm, cn) = (col("l")?, col("mu")?, col("multiplicity")?);
    let mut mu = Vec::new();
    let mut n1 = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let l: usize = rec[ci].trim().parse().with_context(|| format!("{}: row {}", path.display(), row + 1))?;
        if l != mu.len() {
            bail!("{}: degrees must run 0, 1, 2, ... (found {l} at row {})", path.display(), row + 1);
        }
        mu.push(rec[cm].trim().parse::<f64>().with_context(|| format!("{}: row {}", path.display(), row + 1))?);
        if l == 1 {
            n1 = Some(rec[cn].trim().parse::<usize>()?);
        }
    }
    let d = match (d, n1) {
        (Some(d), _) => d,
        (None, Some(n)) if n >= 2 => n - 1,
        _ => bail!("{}: cannot infer the sphere dimension; pass --d", path.display()),
    };
    Ok(Spectrum::from_eigenvalues(d, mu)?)
}

#[allow(clippy::too_many_arguments)]
fn spectrum_cmd(
    ctx: &mut Ctx,
    a: &ActArgs,
    net: &NetArgs,
    kind: &Option<String>,
    backend: &Option<String>,
    d: Option<usize>,
    l_max: Option<usize>,
    n_quad: Option<usize>,
) -> Result<()> {
    let act = ctx.activation(a)?;
    let cfg = ctx.network(net)?;
    let kind = ctx.kind(kind)?;
    let opts = KernelOptions { dual: ctx.dual_options(backend, None)?, cache: None };
    let d = ctx.res.get("d", d, 2)?;
    let l_max = ctx.res.get("l-max", l_max, DEFAULT_L_MAX)?;
    let n_quad = ctx.res.get("n-quad", n_quad, DEFAULT_N_QUAD)?;
    let k = build_kernel(&act, &cfg, kind, &opts)?;
    let spec = eigenvalues(&k, d, l_max, n_quad)?;
    let name = format!("spectrum_{}_{kind}_L{}_d{d}.csv", slug(act.name()), cfg.depth);
    ctx.sink.csv(&name, &SPECTRUM_HEADER, &spectrum_rows(&spec))
}

fn parse_window(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("window must be lo:hi, got `{s}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn fit_cmd(ctx: &mut Ctx, path: &Option<std::path::PathBuf>, d: Option<usize>, parity: &Option<String>, window: &Option<String>) -> Result<()> {
    let spec = ctx.spectrum_file(path, d)?;
    let parity: FitParity = ctx.res.get("parity", parity.clone(), "all".into()).and_then(|s: String| Ok(s.parse()?))?;
    let window = parse_window(&ctx.res.get("window", window.clone(), "16:128".into())?)?;
    let fit = fit_decay(&spec, parity, window)?;
    ctx.sink.json(&format!("fit_{parity}.json"), &fit)
}

fn predict_cmd(ctx: &mut Ctx, a: &ActArgs, net: &NetArgs, kind: &Option<String>, d: Option<usize>, parity: &Option<String>) -> Result<()> {
    let act = ctx.activation(a)?;
    let cfg = ctx.network(net)?;
    let kind = ctx.kind(kind)?;
    let d = ctx.res.get("d", d, 2)?;
    let parity: FitParity = ctx.res.get("parity", parity.clone(), "all".into()).and_then(|s: String| Ok(s.parse()?))?;
    let p = predict_exponent(&act, &cfg, kind, parity, d)?;
    ctx.sink.json(&format!("predict_{}_{kind}_L{}_{parity}.json", slug(act.name()), cfg.depth), &p)
}

fn sphere_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    if d == 1 {
        return (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).map(|a| vec![a.cos(), a.sin()]).collect();
    }
    let mut pts = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        let theta = PI * (i as f64 + 0.5) / n as f64;
        for j in 0..2 * n {
            let phi = PI * j as f64 / n as f64;
            pts.push(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    pts
}

fn paths_cmd(
    ctx: &mut Ctx,
    path: &Option<std::path::PathBuf>,
    d: Option<usize>,
    seed: Option<u64>,
    grid: Option<usize>,
    l_max: Option<usize>,
) -> Result<()> {
    let spec = ctx.spectrum_file(path, d)?;
    let seed = ctx.res.get("seed", seed, 0)?;
    ctx.seed = Some(seed);
    let grid = ctx.res.get("grid", grid, if spec.d == 1 { 512 } else { 64 })?;
    let l_max = ctx.res.get("l-max", l_max, spec.l_max().min(64))?;
    let basis = SphericalBasis::new(spec.d, l_max)?;
    let path = sample_path(&spec, basis, seed)?;
    let pts = sphere_grid(spec.d, grid);
    let vals = path.eval_many(&pts)?;
    let header: Vec<String> = (0..=spec.d).map(|i| format!("x{i}")).chain(["f".to_string()]).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> =
        pts.iter().zip(&vals).map(|(p, f)| p.iter().map(|c| num(*c)).chain([num(*f)]).collect()).collect();
    ctx.sink.csv(&format!("path_d{}_seed{seed}.csv", spec.d), &header, &rows)
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        bail!("range must be a:b:n, got `{s}`");
    };
    let (a, b, n): (f64, f64, usize) = (a.trim().parse()?, b.trim().parse()?, n.trim().parse()?);
    if n == 0 {
        bail!("range needs at least one point");
    }
    Ok(if n == 1 { vec![a] } else { linear_grid(a, b, n) })
}

/// `n` means n points on [-1, 1]; `t0:t1:n` picks the interval too.
fn t_grid(s: &str) -> Result<Vec<f64>> {
    if !s.contains(':') {
        let n: usize = s.trim().parse().with_context(|| format!("grid `{s}`"))?;
        return parse_range(&format!("-1:1:{n}"));
    }
    let ts = parse_range(s)?;
    if ts.iter().any(|t| !(-1.0..=1.0).contains(t)) {
        bail!("grid `{s}` leaves [-1, 1]");
    }
    Ok(ts)
}

fn sobolev_cmd(ctx: &mut Ctx, path: &Option<std::path::PathBuf>, d: Option<usize>, range: &Option<String>) -> Result<()> {
    let spec = ctx.spectrum_file(path, d)?;
    let rs = parse_range(&ctx.res.get("r-range", range.clone(), "0.5:4:36".into())?)?;
    let mut rows = Vec::with_capacity(rs.len());
    for r in rs {
        let s = sobolev_series_lenient(&spec, r)?;
        rows.push(vec![num(r), s.verdict.to_string(), num(s.tail_exponent)]);
    }
    match sobolev_threshold(&spec, 0.0, 4.0, 1e-3) {
        Ok(t) => eprintln!("nk: estimated smoothness threshold r = {t:.3}"),
        Err(e) => eprintln!("nk: threshold bisection failed: {e}"),
    }
    ctx.sink.csv(&format!("sobolev_d{}.csv", spec.d), &["r", "verdict", "tail_exponent"], &rows)
}

#[derive(Serialize)]
struct McReport {
    activation: String,
    config: NetworkConfig,
    d: usize,
    width: usize,
    samples: usize,
    seed: u64,
    pairs: Vec<McComparison>,
}

#[allow(clippy::too_many_arguments)]
fn mc_cmd(
    ctx: &mut Ctx,
    a: &ActArgs,
    net: &NetArgs,
    width: Option<usize>,
    samples: Option<usize>,
    d: Option<usize>,
    seed: Option<u64>,
    pairs: Option<usize>,
) -> Result<()> {
    let act = ctx.activation(a)?;
    let cfg = ctx.network(net)?;
    let width = ctx.res.get("width", width, 1024)?;
    let samples = ctx.res.get("samples", samples, 2000)?;
    let d = ctx.res.get("d", d, 1)?;
    let seed = ctx.res.get("seed", seed, 0)?;
    ctx.seed = Some(seed);
    let n_pairs = ctx.res.get("pairs", pairs, 10)?;
    let panel = pair_panel(d, n_pairs)?;
    let rows = validate(&act, &cfg, d, &panel, width, samples, seed)?;
    let report = McReport { activation: act.name().to_string(), config: cfg, d, width, samples, seed, pairs: rows };
    ctx.sink.json(&format!("mc_{}_L{}.json", slug(act.name()), cfg.depth), &report)
}

#[derive(Serialize)]
struct FigureEntry {
    activation: String,
    kind: KernelKind,
    config: NetworkConfig,
    d: usize,
    predictions: Vec<ExponentPrediction>,
    fits: Vec<Option<DecayFit>>,
}

fn exponent_cell(p: &ExponentPrediction) -> String {
    match p.decay {
        PredictedDecay::PowerLaw { exponent } => num(exponent),
        PredictedDecay::Superpolynomial => "superpolynomial".into(),
        PredictedDecay::FiniteRank { .. } => "finite-rank".into(),
    }
}

fn figures_cmd(ctx: &mut Ctx, which: &str, l_max: Option<usize>, n_quad: Option<usize>) -> Result<()> {
    if ctx.sink.dir().is_none() {
        bail!("figures writes several files; pass --out DIR");
    }
    ctx.res.record("which", &which);
    let l_max = ctx.res.get("l-max", l_max, DEFAULT_L_MAX)?;
    let n_quad = ctx.res.get("n-quad", n_quad, DEFAULT_N_QUAD)?;
    let d = 2;
    let elu_half = from_name("elu", &[("alpha".into(), 0.5)])?.renamed("elu(0.5)");
    let act = |n: &str| from_name(n, &[]);
    let runs: Vec<(ActivationSpec, KernelKind, NetworkConfig, &str)> = match which {
        "fig1" => {
            let acts = vec![act("relu")?, act("leakyrelu")?, act("selu")?, elu_half, act("celu")?];
            let mut runs = Vec::new();
            for a in acts {
                for kind in [KernelKind::Nngp, KernelKind::Ntk] {
                    runs.push((a.clone(), kind, NetworkConfig::unit(3), "bias"));
                }
            }
            runs
        }
        "fig2" => {
            let acts = vec![act("relu")?, act("gelu")?, act("selu")?, act("elu")?, act("celu")?];
            let mut runs = Vec::new();
            for a in acts {
                runs.push((a.clone(), KernelKind::Ntk, NetworkConfig::unit(2), "bias"));
                runs.push((a, KernelKind::Ntk, NetworkConfig::bias_free(2), "nobias"));
            }
            runs
        }
        other => bail!("unknown figure `{other}` (fig1 or fig2)"),
    };
    let index_header = [
        "file", "activation", "kind", "depth", "sigma_w2", "sigma_b2", "sigma_i2", "d", "predicted_even", "predicted_odd",
        "fitted_even", "fitted_odd",
    ];
    let mut index = Vec::new();
    for (a, kind, cfg, tag) in runs {
        let k = build_kernel(&a, &cfg, kind, &KernelOptions::default())?;
        let spec = eigenvalues(&k, d, l_max, n_quad)?;
        let stem = format!("{which}_{}_{kind}_{tag}", slug(a.name()));
        ctx.sink.csv(&format!("{stem}.csv"), &SPECTRUM_HEADER, &spectrum_rows(&spec))?;
        let parities = [FitParity::Even, FitParity::Odd, FitParity::All];
        let predictions = parities.iter().map(|p| predict_exponent(&a, &cfg, kind, *p, d)).collect::<Result<Vec<_>, _>>()?;
        let window = (16, l_max / 2);
        let fits: Vec<Option<DecayFit>> = parities.iter().map(|p| fit_decay(&spec, *p, window).ok()).collect();
        let slope = |f: &Option<DecayFit>| f.as_ref().map(|f| num(f.slope)).unwrap_or_default();
        index.push(vec![
            format!("{stem}.csv"),
            a.name().to_string(),
            kind.to_string(),
            cfg.depth.to_string(),
            num(cfg.sigma_w2),
            num(cfg.sigma_b2),
            num(cfg.sigma_i2),
            d.to_string(),
            exponent_cell(&predictions[0]),
            exponent_cell(&predictions[1]),
            slope(&fits[0]),
            slope(&fits[1]),
        ]);
        let entry = FigureEntry { activation: a.name().to_string(), kind, config: cfg, d, predictions, fits };
        ctx.sink.json(&format!("{stem}.json"), &entry)?;
    }
    ctx.sink.csv(&format!("{which}_index.csv"), &index_header, &index)
}
