//! Subcommand bodies. Each reads its config, writes its artifacts under an
//! output directory and returns a summary for the caller.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use mccs_core::bounds::{self, PerturbationRegime, RicSetup, EPS_2K_LIMIT};
use mccs_core::keystream::{BitStream, KeyChain, Seed};
use mccs_core::numerics::LinearOperator;
use mccs_core::recovery::{self, RecoveryProblem};
use mccs_core::secrecy::{self, KsOutcome};
use mccs_core::sensing::{encode, gen_matrix, MatrixChain, MeasurementFrame, PerturbationMatrix};
use mccs_core::signals::{sample_signal, sphere_uniform, windows, SignalModel, SignalStats};
use mccs_core::math;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::formats::{self, num, CsvOut, Report};

pub const KEY_FILE: &str = "key.json";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const PLAINTEXTS_FILE: &str = "plaintexts.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const RIC_FILE: &str = "ric.csv";
pub const ATTACK_FILE: &str = "attack.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const CONVERGENCE_SUMMARY: &str = "convergence.json";
pub const GAUSSIANITY_FILE: &str = "gaussianity.json";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub class: Option<usize>,
    pub solver: Option<Solver>,
    pub scaled: bool,
    pub w: Option<usize>,
}

impl Overrides {
    pub fn keygen(&self, c: &mut KeygenConfig) {
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(w) = self.w {
            c.w = w;
        }
    }

    pub fn encode(&self, c: &mut EncodeConfig) {
        if let (Some(s), SignalSource::Synthetic { seed, .. }) = (self.seed, &mut c.source) {
            *seed = s;
        }
        c.scheme.scaled |= self.scaled;
    }

    pub fn decode(&self, c: &mut DecodeConfig) {
        if self.class.is_some() {
            c.class = self.class;
        }
        if let Some(s) = self.solver {
            c.solver = s;
        }
        c.scheme.scaled |= self.scaled;
    }

    pub fn bounds(&self, c: &mut BoundsConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.lb_trials = t;
            c.ric_trials = t;
        }
    }

    pub fn ric(&self, c: &mut RicConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
    }

    pub fn attack(&self, c: &mut AttackConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.pairs = t;
        }
    }

    pub fn convergence(&self, c: &mut ConvergenceConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.plaintexts = t;
        }
    }

    pub fn gaussianity(&self, c: &mut GaussianityConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.trials {
            c.chi = t;
        }
    }
}

pub fn cmd_keygen(cfg: &KeygenConfig, out: &Path) -> CliResult<PathBuf> {
    if cfg.w == 0 {
        return Err(CliError::config("w must be at least 1"));
    }
    let keys = KeyChain::derive(Seed(cfg.master_seed), cfg.w)?;
    let path = out.join(KEY_FILE);
    formats::write_key(&path, &keys)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct EncodeSummary {
    pub measurements: PathBuf,
    pub plaintexts: PathBuf,
    pub frames: usize,
    pub class: usize,
}

fn plaintexts(cfg: &EncodeConfig) -> CliResult<Vec<Vec<f64>>> {
    let n = cfg.scheme.n;
    match &cfg.source {
        SignalSource::Corpus { path } => Ok(windows(&formats::read_signal(path)?, n)?),
        SignalSource::Synthetic {
            frames,
            k,
            basis,
            law,
            energy,
            seed,
        } => {
            let model = SignalModel::new(basis.build(n)?, *k, (*law).into(), *energy)?;
            (0..*frames)
                .into_par_iter()
                .map(|f| {
                    let mut st = BitStream::new(Seed(*seed).child(f as u64));
                    Ok(sample_signal(&model, &mut st)?.x)
                })
                .collect()
        }
    }
}

/// Encode every plaintext window with the top-class matrix of its frame.
pub fn cmd_encode(cfg: &EncodeConfig, out: &Path) -> CliResult<EncodeSummary> {
    let keys = formats::read_key(&cfg.key)?;
    let sensing = cfg.scheme.sensing()?;
    let u = keys.top_class();
    if cfg.scheme.etas.len() < u {
        return Err(CliError::config(format!(
            "key has {} flip levels but only {} densities are configured",
            u,
            cfg.scheme.etas.len()
        )));
    }
    let xs = plaintexts(cfg)?;
    let encoded = xs
        .par_iter()
        .enumerate()
        .map(|(f, x)| {
            let a = gen_matrix(&keys, &sensing, u, f as u64)?;
            let y = encode(&a, x, cfg.scheme.scaled)?.y;
            let golden = if cfg.write_matrices {
                Some(formats::matrix_bytes(&a)?)
            } else {
                None
            };
            Ok((y, golden))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut ys = Vec::with_capacity(encoded.len());
    for (f, (y, golden)) in encoded.into_iter().enumerate() {
        if let Some(bytes) = golden {
            let p = out.join("matrices").join(format!("frame_{f}.bin"));
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
        ys.push((f as u64, y));
    }
    let xs: Vec<(u64, Vec<f64>)> = xs.into_iter().enumerate().map(|(f, x)| (f as u64, x)).collect();

    let measurements = out.join(MEASUREMENTS_FILE);
    let plaintexts = out.join(PLAINTEXTS_FILE);
    formats::write_frames(&measurements, cfg, "y", cfg.scheme.m, &ys)?;
    formats::write_frames(&plaintexts, cfg, "x", cfg.scheme.n, &xs)?;
    Ok(EncodeSummary {
        measurements,
        plaintexts,
        frames: ys.len(),
        class: u,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRow {
    pub frame_index: u64,
    pub class: usize,
    /// Total flip density unknown to this class.
    pub eta: f64,
    pub rsnr_db: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn cmd_decode(cfg: &DecodeConfig, out: &Path) -> CliResult<Vec<DecodeRow>> {
    let full = formats::read_key(&cfg.key)?;
    let u = cfg.class.unwrap_or(full.top_class());
    let keys = full.for_class(u)?;
    let sensing = cfg.scheme.sensing()?;
    let (m, n) = (cfg.scheme.m, cfg.scheme.n);
    let basis = cfg.basis.build(n)?;
    if cfg.solver == Solver::Cosamp && cfg.k.is_none() {
        return Err(CliError::config("the cosamp solver needs k"));
    }
    let truth: Option<HashMap<u64, Vec<f64>>> = match &cfg.ground_truth {
        Some(p) => Some(formats::read_frames(p)?.into_iter().collect()),
        None => None,
    };
    let genie = matches!(cfg.gamma, GammaSpec::Named(GammaName::Genie));
    if genie && truth.is_none() {
        return Err(CliError::config("a genie gamma needs ground_truth"));
    }
    if let GammaSpec::Value(g) = cfg.gamma {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(CliError::config("gamma must be finite and non-negative"));
        }
    }
    let top = full.top_class().min(cfg.scheme.etas.len());
    let eta: f64 = cfg.scheme.etas.get(u..top).map_or(0.0, |s| s.iter().fold(0.0, |a, b| a + b));

    let frames = formats::read_frames(&cfg.measurements)?;
    for (idx, y) in &frames {
        if y.len() != m {
            return Err(CliError::config(format!(
                "frame {idx} has {} measurements, config says m = {m}",
                y.len()
            )));
        }
    }
    let scale = if cfg.scheme.scaled {
        1.0 / math::sqrt(n as f64)
    } else {
        1.0
    };

    let rows = frames
        .par_iter()
        .map(|(idx, y)| {
            let a = gen_matrix(&keys, &sensing, u, *idx)?;
            let x = match &truth {
                Some(t) => Some(t.get(idx).ok_or_else(|| {
                    CliError::config(format!("ground truth lacks frame {idx}"))
                })?),
                None => None,
            };
            if let Some(x) = x {
                if x.len() != n {
                    return Err(CliError::config(format!("ground truth frame {idx} has length {}", x.len())));
                }
            }
            let gamma = match (cfg.gamma, x) {
                (GammaSpec::Value(g), _) => g,
                (GammaSpec::Named(GammaName::Genie), Some(x)) => {
                    let mut ax = vec![0.0; m];
                    a.apply(x, &mut ax);
                    let r: Vec<f64> = y.iter().zip(&ax).map(|(yi, v)| yi - scale * v).collect();
                    math::norm2(&r)
                }
                (GammaSpec::Named(GammaName::Genie), None) => unreachable!(),
            };
            let frame = MeasurementFrame {
                y: y.clone(),
                frame_index: *idx,
                scaled: cfg.scheme.scaled,
            };
            let p = RecoveryProblem::new(&frame, &a, &basis, gamma, cfg.k)?;
            let res = match cfg.solver {
                Solver::Bpdn => recovery::solve_bpdn(&p)?,
                Solver::Cosamp => recovery::solve_cosamp(&p)?,
            };
            let rsnr_db = x.map(|x| recovery::rsnr(x, &res.x_hat)).transpose()?;
            Ok(DecodeRow {
                frame_index: *idx,
                class: u,
                eta,
                rsnr_db,
                iterations: res.iterations,
                residual: res.residual,
                converged: res.converged,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let header = ["frame_index", "class", "eta", "rsnr_db", "iterations", "residual", "converged"];
    let mut w = CsvOut::create(&out.join(RESULTS_FILE), cfg, &header.map(String::from))?;
    for r in &rows {
        w.row([
            r.frame_index.to_string(),
            r.class.to_string(),
            num(r.eta),
            r.rsnr_db.map(num).unwrap_or_default(),
            r.iterations.to_string(),
            num(r.residual),
            r.converged.to_string(),
        ])?;
    }
    w.finish()?;
    Ok(rows)
}

pub fn cmd_bounds(cfg: &BoundsConfig, out: &Path) -> CliResult<Vec<bounds::BoundReport>> {
    if cfg.etas.is_empty() {
        return Err(CliError::config("the eta grid is empty"));
    }
    let stats = SignalStats::sphere(cfg.n, cfg.energy);
    let basis = match cfg.k {
        Some(_) => Some(cfg.basis.build(cfg.n)?),
        None => None,
    };
    let ric = match (cfg.k, &basis) {
        (Some(k), Some(b)) => Some(RicSetup {
            k,
            trials: cfg.ric_trials,
            basis: b,
        }),
        _ => None,
    };
    let reports = cfg
        .etas
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let regime = PerturbationRegime::new(cfg.m, cfg.n, eta, cfg.theta)?;
            Ok(bounds::bound_report(&regime, &stats, cfg.lb_trials, ric, Seed(cfg.seed).child(i as u64))?)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let header = [
        "eta", "lb_arsnr_db", "ub_arsnr_db", "zeta", "theorem1_lb", "ub_applicable", "ub_value",
        "c_bar", "gamma", "eps_k", "eps_2k", "delta_k", "delta_2k",
    ];
    let mut w = CsvOut::create(&out.join(BOUNDS_FILE), cfg, &header.map(String::from))?;
    for r in &reports {
        let p = r.proposition1;
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        w.row([
            num(r.eta),
            num(r.lb_arsnr_db),
            num(r.ub_arsnr_db),
            num(r.zeta),
            num(r.theorem1_lb),
            p.is_some().to_string(),
            opt(p.map(|b| b.ub)),
            opt(p.map(|b| b.c_bar)),
            opt(p.map(|b| b.gamma)),
            num(r.eps_k),
            num(r.eps_2k),
            num(r.delta_k),
            num(r.delta_2k),
        ])?;
    }
    w.finish()?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicRow {
    pub eta: f64,
    pub k: usize,
    pub delta_k: f64,
    pub eps_k: f64,
    pub delta_2k: f64,
    pub eps_2k: f64,
}

impl RicRow {
    /// `eps^(k) < 2^(1/4) - 1`
    pub fn eps_below_limit(&self) -> bool {
        self.eps_k < EPS_2K_LIMIT
    }
}

/// RIP constants of one `(A1, dA)` pair per `eta`, for every `k`.
pub fn cmd_ric(cfg: &RicConfig, out: &Path) -> CliResult<Vec<RicRow>> {
    if cfg.etas.is_empty() || cfg.ks.is_empty() {
        return Err(CliError::config("eta and k grids must be nonempty"));
    }
    let scheme = SchemeConfig {
        m: cfg.m,
        n: cfg.n,
        etas: vec![0.0],
        scaled: false,
    };
    let basis = cfg.basis.build(cfg.n)?;
    let mut rows = Vec::new();
    for (i, &eta) in cfg.etas.iter().enumerate() {
        let sensing = SchemeConfig {
            etas: vec![eta],
            ..scheme.clone()
        }
        .sensing()?;
        let seed = Seed(cfg.seed).child(i as u64);
        let keys = KeyChain::derive(seed.child(0), 2)?;
        let chain = MatrixChain::generate(&keys, &sensing, 1, 0)?;
        let a1 = chain.class_matrix(1)?;
        let da = PerturbationMatrix::difference(&a1, chain.base())?;
        for (j, &k) in cfg.ks.iter().enumerate() {
            let (ek, e2k) = bounds::estimate_ric_constants(&a1, &da, &basis, k, cfg.trials, seed.child(1 + j as u64))?;
            rows.push(RicRow {
                eta,
                k,
                delta_k: ek.delta,
                eps_k: ek.eps,
                delta_2k: e2k.delta,
                eps_2k: e2k.eps,
            });
        }
    }
    let header = ["eta", "k", "delta_k", "eps_k", "delta_2k", "eps_2k", "eps_k_below_limit"];
    let mut w = CsvOut::create(&out.join(RIC_FILE), cfg, &header.map(String::from))?;
    for r in &rows {
        w.row([
            num(r.eta),
            r.k.to_string(),
            num(r.delta_k),
            num(r.eps_k),
            num(r.delta_2k),
            num(r.eps_2k),
            r.eps_below_limit().to_string(),
        ])?;
    }
    w.finish()?;
    Ok(rows)
}

#[derive(Serialize)]
struct AttackBody<'a> {
    e1: f64,
    e2: f64,
    n: usize,
    chi: usize,
    #[serde(rename = "P")]
    pairs: usize,
    p_values: &'a [f64],
    second_level_p: f64,
    verdict: &'static str,
}

pub fn cmd_attack(cfg: &AttackConfig, out: &Path) -> CliResult<secrecy::AttackReport> {
    let report = secrecy::distinguishing_attack(&secrecy::AttackConfig {
        e1: cfg.e1,
        e2: cfg.e2,
        n: cfg.n,
        chi: cfg.chi,
        pairs: cfg.pairs,
        seed: Seed(cfg.seed),
    })?;
    let body = AttackBody {
        e1: cfg.e1,
        e2: cfg.e2,
        n: cfg.n,
        chi: cfg.chi,
        pairs: cfg.pairs,
        p_values: &report.first_level_p_values,
        second_level_p: report.second_level_p,
        verdict: report.verdict.as_str(),
    };
    formats::write_json(&out.join(ATTACK_FILE), &Report::new(cfg, body))?;
    Ok(report)
}

#[derive(Serialize)]
struct RhoEntry {
    rho: f64,
    #[serde(rename = "C_rho")]
    c_rho: f64,
}

#[derive(Serialize)]
struct ConvergenceBody {
    bins: usize,
    slope: Option<f64>,
    median_deviation: Vec<(usize, f64)>,
    estimates: Vec<RhoEntry>,
}

pub fn cmd_convergence(cfg: &ConvergenceConfig, out: &Path) -> CliResult<secrecy::ConvergenceReport> {
    let report = secrecy::estimate_convergence_constant(&secrecy::ConvergenceConfig {
        n_grid: cfg.n_grid.clone(),
        plaintexts: cfg.plaintexts,
        rows: cfg.rows,
        rhos: cfg.rhos.clone(),
        seed: Seed(cfg.seed),
    })?;
    let header = ["n", "plaintext_id", "deviation"].map(String::from);
    let mut w = CsvOut::create(&out.join(CONVERGENCE_FILE), cfg, &header)?;
    for g in &report.grid {
        for (p, d) in g.deviations.iter().enumerate() {
            w.row([g.n.to_string(), p.to_string(), num(*d)])?;
        }
    }
    w.finish()?;
    let body = ConvergenceBody {
        bins: report.bins,
        slope: report.slope,
        median_deviation: report
            .grid
            .iter()
            .map(|g| (g.n, secrecy::median(&g.deviations)))
            .collect(),
        estimates: report
            .c_rho
            .iter()
            .map(|&(rho, c_rho)| RhoEntry { rho, c_rho })
            .collect(),
    };
    formats::write_json(&out.join(CONVERGENCE_SUMMARY), &Report::new(cfg, body))?;
    Ok(report)
}

#[derive(Serialize)]
struct GaussianityBody {
    n: usize,
    chi: usize,
    energy: f64,
    statistic: f64,
    p_value: f64,
}

pub fn cmd_gaussianity(cfg: &GaussianityConfig, out: &Path) -> CliResult<KsOutcome> {
    let x = match (&cfg.signal, cfg.n) {
        (Some(p), _) => formats::read_signal(p)?,
        (None, Some(n)) => {
            if !(cfg.energy > 0.0 && cfg.energy.is_finite()) {
                return Err(CliError::config("energy must be positive"));
            }
            sphere_uniform(&mut BitStream::new(Seed(cfg.seed).child(0)), n, cfg.energy)
        }
        (None, None) => return Err(CliError::config("give either n or signal")),
    };
    let ks = secrecy::gaussianity_check(&x, cfg.chi, Seed(cfg.seed).child(1))?;
    let body = GaussianityBody {
        n: x.len(),
        chi: cfg.chi,
        energy: x.iter().map(|v| v * v).sum(),
        statistic: ks.statistic,
        p_value: ks.p_value,
    };
    formats::write_json(&out.join(GAUSSIANITY_FILE), &Report::new(cfg, body))?;
    Ok(ks)
}
