//! Command implementations. Each command writes its artifacts to disk and a
//! JSON summary (where it has one) to the supplied writer.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sorsvd::bounds::{
    admissible_p, avg_lowrank_bound, avg_sv_lower_bound, optimal_error, BoundOracle, BoundParams, BoundReport,
    TrialRecord,
};
use sorsvd::dense::{load_matrix, save_matrix, singular_values, MatrixFormat};
use sorsvd::matrixgen::{
    gen_noisy_lowrank_with, gen_rpca_instance, Family, GenSpec, NoiseNormalization, NoiseOptions,
};
use sorsvd::rpca::{estimate_rank_bound, rpca_alm, rpca_default_config, DualInit, RpcaConfig, RpcaResult};
use sorsvd::sketch::{
    approx_error, r_svd, sor_svd, sor_svd_power, tsr_svd, ErrorNorm, LowRankApprox, SketchConfig,
};
use sorsvd::Matrix;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::frames::{load_image_stack, write_frames};
use crate::report::{cell, opt_cell, Table};

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Decompose(a) => cmd_decompose(&a, out),
        Command::Svcompare(a) => cmd_svcompare(&a),
        Command::Errcurve(a) => cmd_errcurve(&a),
        Command::Boundcheck(a) => cmd_boundcheck(&a),
        Command::Rpca(a) => cmd_rpca(&a, out),
        Command::Bgsub(a) => cmd_bgsub(&a, out),
    }
}

fn matrix_format(explicit: Option<FormatArg>, path: &Path) -> MatrixFormat {
    match explicit {
        Some(FormatArg::Sord) => MatrixFormat::Sord,
        Some(FormatArg::Csv) => MatrixFormat::Csv,
        None => MatrixFormat::from_path(path),
    }
}

fn extension(format: MatrixFormat) -> &'static str {
    match format {
        MatrixFormat::Sord => "sord",
        MatrixFormat::Csv => "csv",
    }
}

/// `dir/<stem><suffix>.<ext>` for a prefix path such as `out/run` or `out/x.sord`.
fn sibling(prefix: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = prefix.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    let mut name = stem;
    name.push(format!("{suffix}.{ext}"));
    prefix.with_file_name(name)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_input(path: &Path) -> Result<Matrix> {
    Ok(load_matrix(path, MatrixFormat::from_path(path))?)
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs one method and keeps `k` triplets. TSR-SVD has no power steps and
/// only SOR-SVD has a single-pass variant.
pub fn decompose(a: &Matrix, algorithm: AlgorithmArg, k: usize, cfg: &SketchConfig) -> Result<LowRankApprox> {
    if cfg.single_pass && algorithm != AlgorithmArg::Sor {
        return Err(CliError::Usage("--single-pass applies to the sor algorithm only".into()));
    }
    Ok(match algorithm {
        AlgorithmArg::Sor if cfg.q == 0 => sor_svd(a, k, cfg)?,
        AlgorithmArg::Sor => sor_svd_power(a, k, cfg)?,
        AlgorithmArg::Rsvd => r_svd(a, cfg)?.truncate(k)?,
        AlgorithmArg::Tsr => tsr_svd(a, cfg)?.truncate(k)?,
    })
}

#[derive(Serialize)]
struct GenSidecar {
    generator: GenSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseOptions>,
    format: &'static str,
    files: Vec<String>,
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let family = match a.family {
        FamilyArg::NoisyLowrank => Family::NoisyLowrank,
        FamilyArg::Polydecay => Family::Polydecay,
        FamilyArg::RpcaInstance => Family::RpcaInstance,
        FamilyArg::RandomOrthonormal => Family::RandomOrthonormal,
    };
    let spec = GenSpec {
        family,
        n: a.n,
        k_or_r: a.k,
        s: a.s,
        seed: a.seed,
    };
    spec.validate()?;
    let format = matrix_format(a.format, &a.output);
    let mut files = vec![file_name(&a.output)];
    let mut noise = None;
    match family {
        Family::NoisyLowrank => {
            let opts = NoiseOptions {
                coefficient: a.noise_coefficient,
                normalization: match a.noise_normalization {
                    NormalizationArg::Spectral => NoiseNormalization::Spectral,
                    NormalizationArg::Frobenius => NoiseNormalization::Frobenius,
                },
            };
            save_matrix(&gen_noisy_lowrank_with(a.n, a.k, a.seed, &opts)?, &a.output, format)?;
            noise = Some(opts);
        }
        Family::RpcaInstance => {
            let inst = gen_rpca_instance(a.n, a.k, a.s.unwrap_or(0), a.seed)?;
            let ext = extension(format);
            let l_path = sibling(&a.output, "_l", ext);
            let s_path = sibling(&a.output, "_s", ext);
            save_matrix(&inst.x, &a.output, format)?;
            save_matrix(&inst.l_true, &l_path, format)?;
            save_matrix(&inst.s_true, &s_path, format)?;
            files.push(file_name(&l_path));
            files.push(file_name(&s_path));
        }
        Family::Polydecay | Family::RandomOrthonormal => {
            save_matrix(&spec.generate()?, &a.output, format)?;
        }
    }
    let sidecar = GenSidecar {
        generator: spec,
        noise,
        format: extension(format),
        files,
    };
    let mut json_path = OsString::from(a.output.as_os_str());
    json_path.push(".json");
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(PathBuf::from(json_path), format!("{json}\n"))?;
    print_json(out, &sidecar)
}

#[derive(Serialize)]
struct DecomposeSummary {
    method: &'static str,
    rank: usize,
    ell: usize,
    q: usize,
    seed: u64,
    passes: usize,
    frobenius_error: f64,
    sigma: Vec<f64>,
    files: Vec<String>,
}

fn cmd_decompose(a: &DecomposeArgs, out: &mut dyn Write) -> Result<()> {
    let m = load_input(&a.input)?;
    let cfg = SketchConfig::new(a.ell, a.seed)
        .with_power(a.q)
        .with_single_pass(a.single_pass);
    let x = decompose(&m, a.algorithm, a.k, &cfg)?;
    let format = a.format.map_or(MatrixFormat::Sord, |f| matrix_format(Some(f), &a.output));
    let ext = extension(format);
    let sigma = Matrix::new(x.sigma.len(), 1, x.sigma.clone())?;
    let mut files = Vec::new();
    for (suffix, mat) in [("_u", &x.u), ("_sigma", &sigma), ("_v", &x.v)] {
        let path = sibling(&a.output, suffix, ext);
        save_matrix(mat, &path, format)?;
        files.push(file_name(&path));
    }
    let summary = DecomposeSummary {
        method: x.method.as_str(),
        rank: x.rank(),
        ell: x.ell,
        q: x.q,
        seed: x.seed,
        passes: x.passes,
        frobenius_error: approx_error(&m, &x, ErrorNorm::Frobenius)?,
        sigma: x.sigma.clone(),
        files,
    };
    print_json(out, &summary)
}

fn seeds(seed: u64, trials: usize) -> Result<Vec<u64>> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok((0..trials as u64).map(|t| seed.wrapping_add(t)).collect())
}

fn cmd_svcompare(a: &SvcompareArgs) -> Result<()> {
    let m = load_input(&a.input)?;
    let k = a.k.unwrap_or(a.ell);
    let exact = singular_values(&m);
    let seeds = seeds(a.seed, a.trials)?;
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SketchConfig::new(a.ell, seed).with_power(a.q);
            let rsvd = r_svd(&m, &cfg)?;
            let tsr = tsr_svd(&m, &SketchConfig::new(a.ell, seed))?;
            let sor = decompose(&m, AlgorithmArg::Sor, k, &cfg)?;
            Ok((seed, rsvd.sigma, tsr.sigma, sor.sigma))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["seed", "j", "sigma_svd", "sigma_rsvd", "sigma_tsr", "sigma_sor"]);
    let at = |v: &[f64], j: usize| opt_cell(v.get(j).copied());
    for (seed, rsvd, tsr, sor) in &runs {
        for j in 0..a.ell {
            table.push(vec![
                cell(seed),
                cell(j + 1),
                cell(exact.get(j).copied().unwrap_or(0.0)),
                at(rsvd, j),
                at(tsr, j),
                at(sor, j),
            ]);
        }
    }
    table.save(&a.output)?;
    Ok(())
}

fn frob(a: &Matrix, x: &LowRankApprox) -> Result<f64> {
    Ok(approx_error(a, x, ErrorNorm::Frobenius)?)
}

fn cmd_errcurve(a: &ErrcurveArgs) -> Result<()> {
    let m = load_input(&a.input)?;
    let floor = optimal_error(&singular_values(&m), a.k, ErrorNorm::Frobenius);
    let ells = a.ell_range.values();
    let seeds = seeds(a.seed, a.trials)?;
    let cells: Vec<(usize, u64)> = ells
        .iter()
        .flat_map(|&ell| seeds.iter().map(move |&s| (ell, s)))
        .collect();
    let errors = cells
        .par_iter()
        .map(|&(ell, seed)| {
            let cfg = SketchConfig::new(ell, seed).with_power(a.q);
            let rsvd = frob(&m, &decompose(&m, AlgorithmArg::Rsvd, a.k, &cfg)?)?;
            let tsr = frob(&m, &decompose(&m, AlgorithmArg::Tsr, a.k, &SketchConfig::new(ell, seed))?)?;
            let sor = frob(&m, &decompose(&m, AlgorithmArg::Sor, a.k, &cfg.with_single_pass(a.single_pass))?)?;
            Ok([rsvd, tsr, sor])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["ell", "err_svd_floor", "err_rsvd", "err_tsr", "err_sor"]);
    let n = seeds.len() as f64;
    for (ell, chunk) in ells.iter().zip(errors.chunks(seeds.len())) {
        let mut sums = [0.0f64; 3];
        for e in chunk {
            for (s, v) in sums.iter_mut().zip(e) {
                *s += v;
            }
        }
        table.push(vec![
            cell(ell),
            cell(floor),
            cell(sums[0] / n),
            cell(sums[1] / n),
            cell(sums[2] / n),
        ]);
    }
    table.save(&a.output)?;
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn report_at(oracle: &BoundOracle<'_>, params: BoundParams, records: Vec<TrialRecord>) -> Result<BoundReport> {
    let sigma = oracle.sigma();
    Ok(BoundReport {
        params,
        records,
        avg_sv_lower_bounds: Some(avg_sv_lower_bound(sigma, &params)?),
        avg_bound_f: Some(avg_lowrank_bound(sigma, &params, ErrorNorm::Frobenius)?),
        avg_bound_2: Some(avg_lowrank_bound(sigma, &params, ErrorNorm::Spectral)?),
    })
}

fn mean_bound_f(report: &BoundReport) -> f64 {
    mean(report.records.iter().filter_map(|r| r.bound_f)).unwrap_or(f64::INFINITY)
}

fn cmd_boundcheck(a: &BoundcheckArgs) -> Result<()> {
    let m = load_input(&a.input)?;
    let ells = match (a.ell, a.ell_range) {
        (Some(ell), None) => vec![ell],
        (None, Some(range)) => range.values(),
        _ => return Err(CliError::Usage("boundcheck needs --ell or --ell-range".into())),
    };
    let seeds = seeds(a.seed, a.trials)?;
    let oracle = BoundOracle::new(&m)?;
    let n = oracle.sigma().len();
    let mut table = Table::new(&[
        "ell",
        "p",
        "q",
        "trials",
        "err_f",
        "err_2",
        "det_bound_f",
        "det_bound_2",
        "avg_bound_f",
        "avg_bound_2",
        "sigma_k",
        "avg_sigma_k_lower",
        "full_row_rank",
        "det_satisfied",
    ]);
    for ell in ells {
        let candidates: Vec<usize> = match a.p {
            Some(p) => vec![p],
            None => admissible_p(a.k, ell).collect(),
        };
        if candidates.is_empty() {
            return Err(CliError::Core(sorsvd::Error::Parameter(format!(
                "no admissible p >= 2 for k={}, ell={ell}",
                a.k
            ))));
        }
        for &p in &candidates {
            BoundParams::new(a.k, ell, p, a.q).validate(n)?;
        }
        let outcomes = seeds
            .par_iter()
            .map(|&s| oracle.run(a.k, ell, a.q, false, s))
            .collect::<sorsvd::Result<Vec<_>>>()?;
        // Without --p, report the split with the smallest mean Frobenius bound.
        let mut best: Option<BoundReport> = None;
        for &p in &candidates {
            let params = BoundParams::new(a.k, ell, p, a.q);
            let records = outcomes
                .iter()
                .enumerate()
                .map(|(t, o)| oracle.evaluate(t, o, &params))
                .collect::<sorsvd::Result<Vec<_>>>()?;
            let report = report_at(&oracle, params, records)?;
            if best.as_ref().is_none_or(|b| mean_bound_f(&report) < mean_bound_f(b)) {
                best = Some(report);
            }
        }
        let report = best.expect("at least one candidate p");
        let (err_f, _) = report.error_stats(ErrorNorm::Frobenius);
        let (err_2, _) = report.error_stats(ErrorNorm::Spectral);
        let (sigma_k, _) = report.sigma_stats(a.k);
        let full_rank = report.records.iter().filter(|r| r.full_row_rank).count();
        let satisfied = report.deterministic_satisfaction() == 1.0 && report.records.iter().all(|r| r.interlaced);
        table.push(vec![
            cell(ell),
            cell(report.params.p),
            cell(a.q),
            cell(report.trials()),
            cell(err_f),
            cell(err_2),
            opt_cell(mean(report.records.iter().filter_map(|r| r.bound_f))),
            opt_cell(mean(report.records.iter().filter_map(|r| r.bound_2))),
            opt_cell(report.avg_bound_f),
            opt_cell(report.avg_bound_2),
            cell(sigma_k),
            opt_cell(report.avg_sv_lower_bounds.as_ref().map(|v| v[a.k - 1])),
            cell(full_rank),
            cell(satisfied),
        ]);
    }
    table.save(&a.output)?;
    Ok(())
}

/// Defaults plus command-line overrides. `ell` is used when `--ell` is absent.
fn rpca_config(x: &Matrix, opts: &RpcaOptions, ell: Option<usize>) -> RpcaConfig {
    let mut cfg = rpca_default_config(x);
    if let Some(ell) = opts.ell.or(ell) {
        cfg.ell = ell;
    }
    cfg.q = opts.q;
    cfg.seed = opts.seed;
    if let Some(lambda) = opts.lambda {
        cfg.lambda = lambda;
    }
    if let Some(tol) = opts.tol {
        cfg.tol = tol;
    }
    if let Some(max_iter) = opts.max_iter {
        cfg.max_iter = max_iter;
    }
    cfg.mu_update_literal = opts.mu_update_literal;
    if opts.zero_dual {
        cfg.dual_init = DualInit::Zero;
    }
    cfg
}

#[derive(Serialize)]
struct RpcaSummary {
    iterations: usize,
    converged: bool,
    rel_error: f64,
    rank_l: usize,
    nnz_s: usize,
    ell: usize,
    q: usize,
    lambda: f64,
    files: Vec<String>,
}

impl RpcaSummary {
    fn new(r: &RpcaResult, cfg: &RpcaConfig, files: Vec<String>) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            rel_error: r.rel_error,
            rank_l: r.rank_l,
            nnz_s: r.nnz_s,
            ell: cfg.ell,
            q: cfg.q,
            lambda: cfg.lambda,
            files,
        }
    }
}

fn save_telemetry(r: &RpcaResult, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    r.write_telemetry(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_rpca(a: &RpcaArgs, out: &mut dyn Write) -> Result<()> {
    let x = load_input(&a.input)?;
    let cfg = rpca_config(&x, &a.opts, None);
    let result = rpca_alm(&x, &cfg)?;
    let format = a.format.map_or(MatrixFormat::Sord, |f| matrix_format(Some(f), &a.output));
    let ext = extension(format);
    let l_path = sibling(&a.output, "_l", ext);
    let s_path = sibling(&a.output, "_s", ext);
    let t_path = sibling(&a.output, "_telemetry", "csv");
    save_matrix(&result.l, &l_path, format)?;
    save_matrix(&result.s, &s_path, format)?;
    save_telemetry(&result, &t_path)?;
    let files = [&l_path, &s_path, &t_path].iter().map(|p| file_name(p)).collect();
    print_json(out, &RpcaSummary::new(&result, &cfg, files))
}

fn cmd_bgsub(a: &BgsubArgs, out: &mut dyn Write) -> Result<()> {
    let stack = load_image_stack(&a.input)?;
    let x = &stack.matrix;
    let cap = x.rows().min(x.cols()).saturating_sub(1).max(1);
    let ell = if x.max_abs() == 0.0 {
        1
    } else {
        estimate_rank_bound(x)?.min(cap)
    };
    let cfg = rpca_config(x, &a.opts, Some(ell));
    let result = rpca_alm(x, &cfg)?;
    fs::create_dir_all(&a.output)?;
    let (w, h, maxval) = (stack.width, stack.height, stack.maxval);
    write_frames(&a.output.join("background"), &result.l, w, h, maxval, &stack.names)?;
    let foreground = result.s.map(f64::abs);
    write_frames(&a.output.join("foreground"), &foreground, w, h, maxval, &stack.names)?;
    save_telemetry(&result, &a.output.join("telemetry.csv"))?;
    let files = vec!["background".into(), "foreground".into(), "telemetry.csv".into()];
    print_json(out, &RpcaSummary::new(&result, &cfg, files))
}
