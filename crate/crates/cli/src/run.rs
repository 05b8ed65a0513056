use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cpclust::episim::bin_daily_raw;
use cpclust::{
    change_points, clust_cp, cp_frequency, detect_cp, point_estimate, sim_epi_data, ClustConfig, ClustInit,
    DataPartition, DetectConfig, DetectInit, EpiCounts, EpiKernel, EpiParams, EpiSimConfig, EpiState, LatentOrder,
    LocalParam, Loss, MultiParams, Prior, Series, Trace, TsKernel, TsPrior, UniParams, UpdateFlags,
};
use serde_json::{json, Value};

use crate::args::{ChainArgs, ClustArgs, Command, DetectArgs, EpiArgs, EstimateArgs, InitArg, Kernel, LossArg, OrderPriorArgs, SimulateArgs, TsArgs};
use crate::io::{self, Column};

pub const FORMAT_VERSION: u64 = 1;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Detect(a) => detect(&a),
        Command::Clust(a) => clust(&a),
        Command::SimulateEpi(a) => simulate(&a),
        Command::Estimate(a) => estimate(&a),
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, why: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing --{flag} (required for {why})"))
}

fn order_prior(p: &OrderPriorArgs, update_sigma: bool, update_delta: bool) -> Result<Prior> {
    // values the sampler never reads only have to pass validation
    let c = if update_delta { need(p.delta_c, "delta-c", "updating delta")? } else { p.delta_c.unwrap_or(1.0) };
    let d = if update_delta { need(p.delta_d, "delta-d", "updating delta")? } else { p.delta_d.unwrap_or(1.0) };
    let sd = if update_sigma {
        need(p.sigma_proposal_sd, "sigma-proposal-sd", "updating sigma")?
    } else {
        p.sigma_proposal_sd.unwrap_or(1.0)
    };
    Prior::new(p.sigma, p.delta, c, d, sd).map_err(|e| anyhow!("order prior (--sigma, --delta, --delta-c, --delta-d, --sigma-proposal-sd): {e}"))
}

fn ts_prior(ts: &TsArgs, dim: usize, update_phi: bool) -> Result<TsPrior> {
    let phi = need(ts.phi, "phi", "the ts kernel")?;
    let phi_proposal_var = if update_phi {
        need(ts.phi_proposal_var, "phi-proposal-var", "updating phi")?
    } else {
        ts.phi_proposal_var.unwrap_or(1.0)
    };
    let params = if dim == 1 {
        let why = "univariate series";
        TsPrior::Uni(UniParams {
            a: need(ts.a, "a", why)?,
            b: need(ts.b, "b", why)?,
            c: need(ts.c, "c", why)?,
            phi,
            phi_proposal_var,
        })
    } else {
        let why = "multivariate series";
        let m0 = ts.m0.clone().ok_or_else(|| anyhow!("missing --m0 (required for {why})"))?;
        let s0 = ts.s0.clone().ok_or_else(|| anyhow!("missing --s0 (required for {why})"))?;
        if m0.len() != dim {
            bail!("--m0 has {} values but the series has {dim} dimensions", m0.len());
        }
        if s0.len() != dim * dim {
            bail!("--s0 has {} values, expected {} for a {dim} × {dim} matrix", s0.len(), dim * dim);
        }
        TsPrior::Multi(MultiParams {
            m0,
            k0: need(ts.k0, "k0", why)?,
            nu0: need(ts.nu0, "nu0", why)?,
            s0,
            phi,
            phi_proposal_var,
        })
    };
    params.validate().map_err(|e| anyhow!("time-series prior: {e}"))?;
    Ok(params)
}

fn epi_params(epi: &EpiArgs, update_i0: bool) -> Result<(EpiParams, EpiState)> {
    let why = "the epi kernel";
    let params = EpiParams {
        mc_draws: need(epi.mc_draws, "mc-draws", why)?,
        xi: need(epi.xi, "xi", why)?,
        a0: need(epi.a0, "a0", why)?,
        b0: need(epi.b0, "b0", why)?,
        i0_proposal_var: if update_i0 {
            need(epi.i0_proposal_var, "i0-proposal-var", "updating I0")?
        } else {
            epi.i0_proposal_var.unwrap_or(1.0)
        },
        ode_step: epi.ode_step,
    };
    params.validate().map_err(|e| anyhow!("epi kernel (--mc-draws, --xi, --a0, --b0, --i0-proposal-var, --ode-step): {e}"))?;
    let state = EpiState::new(need(epi.i0, "i0", why)?).map_err(|e| anyhow!("--i0: {e}"))?;
    Ok((params, state))
}

fn ts_json(p: &TsPrior) -> Value {
    match p {
        TsPrior::Uni(u) => json!({"a": u.a, "b": u.b, "c": u.c, "phi": u.phi, "phi_proposal_var": u.phi_proposal_var}),
        TsPrior::Multi(m) => json!({
            "m0": m.m0, "k0": m.k0, "nu0": m.nu0, "s0": m.s0, "phi": m.phi, "phi_proposal_var": m.phi_proposal_var
        }),
    }
}

fn epi_json(p: &EpiParams, s: &EpiState) -> Value {
    json!({
        "xi": p.xi, "a0": p.a0, "b0": p.b0, "i0": s.i0, "i0_proposal_var": p.i0_proposal_var,
        "mc_draws": p.mc_draws, "ode_step": p.ode_step
    })
}

fn prior_json(p: &Prior) -> Value {
    json!({
        "sigma": p.sigma, "delta": p.delta, "delta_c": p.delta_prior_c, "delta_d": p.delta_prior_d,
        "sigma_proposal_sd": p.sigma_proposal_sd
    })
}

fn chain_json(c: &ChainArgs) -> Value {
    json!({
        "iterations": c.iterations, "burnin": c.burnin, "q": c.q, "loss": c.loss.name(),
        "init": match c.init { InitArg::Single => "single", InitArg::Singletons => "singletons" }
    })
}

fn paths_json(paths: &[PathBuf]) -> Value {
    Value::from(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("--output: cannot create {}", dir.display()))
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

/// Point estimate of a detect run, as written to `summary.json`.
pub fn detect_summary(draws: &[Vec<usize>], loss: LossArg) -> Result<Value> {
    let est = point_estimate(draws, loss.loss())?;
    Ok(json!({
        "loss": loss.name(),
        "point_estimate": one_based(&est),
        "change_points": change_points(&est),
    }))
}

/// Draws of the order of the cluster holding observation `i`.
fn orders_of(i: usize, partitions: &[Vec<usize>], orders: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    partitions.iter().zip(orders).map(|(p, o)| o[p[i]].clone()).collect()
}

fn estimated_clusters(partitions: &[Vec<usize>], loss: Loss) -> Result<DataPartition> {
    Ok(DataPartition::from_labels(&point_estimate(partitions, loss)?))
}

/// Point estimate of a clust run. Each estimated cluster reports the change
/// points of the point estimate of its first member's order draws.
pub fn clust_summary(partitions: &[Vec<usize>], orders: &[Vec<Vec<usize>>], loss: LossArg) -> Result<Value> {
    let est = estimated_clusters(partitions, loss.loss())?;
    let mut clusters = Vec::new();
    for k in 0..est.n_clusters() {
        let members = est.members(k);
        let order = point_estimate(&orders_of(members[0], partitions, orders), loss.loss())?;
        clusters.push(json!({"members": one_based(&members), "change_points": change_points(&order)}));
    }
    Ok(json!({
        "loss": loss.name(),
        "partition": est.one_based_labels(),
        "clusters": clusters,
    }))
}

fn to_orders(labels: &[Vec<usize>]) -> Result<Vec<LatentOrder>> {
    labels.iter().map(|l| LatentOrder::from_labels(l).map_err(Into::into)).collect()
}

fn write_cp_frequency(path: &Path, columns: Vec<(String, Vec<f64>)>, len: usize) -> Result<()> {
    let mut cols = vec![("time_index".to_string(), Column::Index((1..=len).collect()))];
    cols.extend(columns.into_iter().map(|(n, v)| (n, Column::Real(v))));
    io::write_columns(path, &cols)
}

fn iterations(c: &ChainArgs, n: usize) -> Column {
    Column::Index((c.burnin + 1..=c.burnin + n).collect())
}

fn detect(a: &DetectArgs) -> Result<()> {
    let c = &a.chain;
    let updates = UpdateFlags {
        sigma: !a.fix_sigma,
        delta: !a.fix_delta,
        local: !a.fix_local,
    };
    let prior = order_prior(&a.prior, updates.sigma, updates.delta)?;
    let mut cfg = DetectConfig::new(c.iterations, c.burnin, c.q, c.seed);
    cfg.updates = updates;
    cfg.init = match c.init {
        InitArg::Single => DetectInit::SingleBlock,
        InitArg::Singletons => DetectInit::Singletons,
    };
    cfg.validate().map_err(|e| anyhow!("--iterations/--burnin/--q: {e}"))?;

    let (trace, kernel_json, dim, len): (Trace, Value, usize, usize) = match c.kernel {
        Kernel::Ts => {
            let series = io::read_series(&a.input).context("--input")?;
            let (dim, len) = (series.dim(), series.len());
            let params = ts_prior(&a.ts, dim, updates.local)?;
            let kj = ts_json(&params);
            let mut k = TsKernel::new(series, params)?;
            (detect_cp(&mut k, &prior, &cfg)?, kj, dim, len)
        }
        Kernel::Epi => {
            let counts = io::read_counts(&a.input).context("--input")?;
            let len = counts.len();
            let (params, state) = epi_params(&a.epi, updates.local)?;
            let kj = epi_json(&params, &state);
            let mut k = EpiKernel::new(counts, params, state)?;
            (detect_cp(&mut k, &prior, &cfg)?, kj, 1, len)
        }
    };

    create_dir(&c.output)?;
    let labels = trace.labels();
    io::write_labels(&c.output.join("orders.csv"), &labels)?;
    io::write_columns(&c.output.join("chains.csv"), &detect_chain_columns(c, &trace))?;
    write_cp_frequency(
        &c.output.join("cp_frequency.csv"),
        vec![("frequency".into(), cp_frequency(&trace.orders)?)],
        len,
    )?;
    io::write_json(&c.output.join("summary.json"), &detect_summary(&labels, c.loss)?)?;
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "command": "detect",
        "kernel": c.kernel.name(),
        "seed": c.seed,
        "inputs": paths_json(std::slice::from_ref(&a.input)),
        "n_observations": 1,
        "dimension": dim,
        "length": len,
        "chain": chain_json(c),
        "updates": {"sigma": updates.sigma, "delta": updates.delta, "local": updates.local},
        "order_prior": prior_json(&prior),
        "kernel_params": kernel_json,
        "n_draws": trace.n_draws(),
        "files": ["orders.csv", "chains.csv", "cp_frequency.csv", "summary.json"],
        "wall_time_seconds": trace.wall_time_seconds,
    });
    io::write_json(&c.output.join("manifest.json"), &manifest)
}

fn detect_chain_columns(c: &ChainArgs, t: &Trace) -> Vec<(String, Column)> {
    let mut cols = vec![("iteration".to_string(), iterations(c, t.n_draws()))];
    let mut push = |name: &str, v: &[f64], acc: &[bool]| {
        if !v.is_empty() {
            cols.push((name.to_string(), Column::Real(v.to_vec())));
            cols.push((format!("{name}_accepted"), Column::Flag(acc.to_vec())));
        }
    };
    push("sigma", &t.sigma_chain, &t.sigma_accept);
    push("delta", &t.delta_chain, &t.delta_accept);
    push("phi", &t.phi_chain, &t.phi_accept);
    push("i0", &t.i0_chain, &t.i0_accept);
    cols
}

fn clust_config(a: &ClustArgs, len: usize) -> Result<ClustConfig> {
    let c = &a.chain;
    let cfg = ClustConfig {
        n_iterations: c.iterations,
        n_burnin: c.burnin,
        q: c.q,
        l_steps: a.l_steps,
        b_norm: a.b_norm,
        alpha: a.alpha,
        avg_blocks: a.avg_blocks,
        seed: c.seed,
        update_local: a.update_local,
        init: match c.init {
            InitArg::Single => ClustInit::SingleCluster,
            InitArg::Singletons => ClustInit::Singletons,
        },
    };
    cfg.validate(len)
        .map_err(|e| anyhow!("--iterations/--burnin/--q/--l-steps/--b-norm/--alpha/--avg-blocks: {e}"))?;
    Ok(cfg)
}

fn clust(a: &ClustArgs) -> Result<()> {
    let c = &a.chain;
    let prior = order_prior(&a.prior, false, false)?;
    let (trace, kernel_json, dim, len, n) = match c.kernel {
        Kernel::Ts => {
            let series: Vec<Series> = if a.input.len() == 1 {
                io::read_series_rows(&a.input[0]).context("--input")?
            } else {
                io::read_array(&a.input).context("--input")?
            };
            let (dim, len, n) = (series[0].dim(), series[0].len(), series.len());
            let params = ts_prior(&a.ts, dim, a.update_local)?;
            let cfg = clust_config(a, len)?;
            let mut kernels = series
                .into_iter()
                .map(|s| TsKernel::new(s, params.clone()))
                .collect::<cpclust::Result<Vec<_>>>()?;
            (clust_cp(&mut kernels, &prior, &cfg)?, ts_json(&params), dim, len, n)
        }
        Kernel::Epi => {
            if a.input.len() != 1 {
                bail!("--input: the epi kernel takes a single n × T table of counts");
            }
            let counts: Vec<EpiCounts> = io::read_count_rows(&a.input[0]).context("--input")?;
            let (len, n) = (counts[0].len(), counts.len());
            let (params, state) = epi_params(&a.epi, a.update_local)?;
            let cfg = clust_config(a, len)?;
            let mut kernels = counts
                .into_iter()
                .map(|x| EpiKernel::new(x, params, state))
                .collect::<cpclust::Result<Vec<_>>>()?;
            (clust_cp(&mut kernels, &prior, &cfg)?, epi_json(&params, &state), 1, len, n)
        }
    };

    create_dir(&c.output)?;
    let partitions = trace.labels();
    let orders: Vec<Vec<Vec<usize>>> = trace
        .orders
        .iter()
        .map(|os| os.iter().map(|o| o.labels().to_vec()).collect())
        .collect();
    io::write_labels(&c.output.join("partitions.csv"), &partitions)?;
    io::write_labels(&c.output.join("cluster_orders.csv"), &flatten_orders(&orders))?;
    io::write_columns(
        &c.output.join("norm_vec.csv"),
        &[
            ("observation_index".into(), Column::Index((1..=n).collect())),
            ("log_norm".into(), Column::Real(trace.norm_vec.clone())),
        ],
    )?;
    let mut files = vec!["partitions.csv", "cluster_orders.csv", "norm_vec.csv"];
    if let Some(lp) = trace.local_param {
        let name = match lp {
            LocalParam::Phi => "phi",
            LocalParam::I0 => "i0",
        };
        let mut cols = vec![("iteration".to_string(), iterations(c, trace.n_draws()))];
        for i in 0..n {
            cols.push((format!("{name}_obs{}", i + 1), Column::Real(trace.local_chain.iter().map(|d| d[i]).collect())));
            cols.push((
                format!("{name}_obs{}_accepted", i + 1),
                Column::Flag(trace.local_accept.iter().map(|d| d[i]).collect()),
            ));
        }
        io::write_columns(&c.output.join("chains.csv"), &cols)?;
        files.push("chains.csv");
    }
    let est = estimated_clusters(&partitions, c.loss.loss())?;
    let mut freq = Vec::new();
    for k in 0..est.n_clusters() {
        let draws = to_orders(&orders_of(est.members(k)[0], &partitions, &orders))?;
        freq.push((format!("cluster_{}", k + 1), cp_frequency(&draws)?));
    }
    write_cp_frequency(&c.output.join("cp_frequency.csv"), freq, len)?;
    io::write_json(&c.output.join("summary.json"), &clust_summary(&partitions, &orders, c.loss)?)?;
    files.extend(["cp_frequency.csv", "summary.json"]);
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "command": "clust",
        "kernel": c.kernel.name(),
        "seed": c.seed,
        "inputs": paths_json(&a.input),
        "n_observations": n,
        "dimension": dim,
        "length": len,
        "chain": chain_json(c),
        "l_steps": a.l_steps,
        "b_norm": a.b_norm,
        "alpha": a.alpha,
        "avg_blocks": a.avg_blocks,
        "update_local": a.update_local,
        "order_prior": {"sigma": prior.sigma, "delta": prior.delta},
        "kernel_params": kernel_json,
        "n_draws": trace.n_draws(),
        "files": files,
        "wall_time_seconds": trace.wall_time_seconds,
    });
    io::write_json(&c.output.join("manifest.json"), &manifest)
}

/// Rows `[draw, cluster, labels...]`, all zero-based.
fn flatten_orders(orders: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let mut rows = Vec::new();
    for (d, os) in orders.iter().enumerate() {
        for (k, o) in os.iter().enumerate() {
            let mut row = vec![d, k];
            row.extend_from_slice(o);
            rows.push(row);
        }
    }
    rows
}

/// Inverse of [`flatten_orders`].
pub fn read_cluster_orders(path: &Path) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut out: Vec<Vec<Vec<usize>>> = Vec::new();
    for (r, row) in io::read_labels(path)?.into_iter().enumerate() {
        if row.len() < 3 {
            bail!("{}: row {} is too short", path.display(), r + 1);
        }
        let (d, k) = (row[0], row[1]);
        if d > out.len() || (d == out.len()) != (k == 0) || (d < out.len() && out[d].len() != k) {
            bail!("{}: row {} is out of sequence", path.display(), r + 1);
        }
        if d == out.len() {
            out.push(Vec::new());
        }
        out[d].push(row[2..].to_vec());
    }
    Ok(out)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let table = io::read_table(&a.betas).context("--betas")?;
    let betas: Vec<f64> = if table.len() == 1 {
        table.into_iter().next().unwrap()
    } else if table[0].len() == 1 {
        table.into_iter().map(|r| r[0]).collect()
    } else {
        bail!("--betas: expected a single row or column of daily rates");
    };
    let cfg = EpiSimConfig {
        s0: a.s0,
        i0: a.i0,
        max_time: a.max_time,
        beta_per_day: betas,
        xi: a.xi,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| anyhow!("--s0/--i0/--max-time/--xi/--betas: {e}"))?;
    let start = std::time::Instant::now();
    let times = sim_epi_data(&cfg)?;
    let days = a.max_time.ceil() as usize;
    let counts = bin_daily_raw(&times, days);
    let wall = start.elapsed().as_secs_f64();
    create_dir(&a.output)?;
    io::write_columns(&a.output.join("infection_times.csv"), &[("time".into(), Column::Real(times.clone()))])?;
    io::write_columns(
        &a.output.join("daily_counts.csv"),
        &[("count".into(), Column::Index(counts.iter().map(|&c| c as usize).collect()))],
    )?;
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "command": "simulate-epi",
        "seed": a.seed,
        "s0": a.s0,
        "i0": a.i0,
        "max_time": a.max_time,
        "xi": a.xi,
        "betas": a.betas.display().to_string(),
        "n_infections": times.len(),
        "files": ["infection_times.csv", "daily_counts.csv"],
        "wall_time_seconds": wall,
    });
    io::write_json(&a.output.join("manifest.json"), &manifest)
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let dir = &a.trace;
    let manifest = io::read_json(&dir.join("manifest.json")).context("--trace")?;
    let version = manifest["format_version"].as_u64();
    if version != Some(FORMAT_VERSION) {
        bail!("--trace: unsupported format_version {:?}", manifest["format_version"]);
    }
    let summary = match manifest["command"].as_str() {
        Some("detect") => detect_summary(&io::read_labels(&dir.join("orders.csv")).context("--trace")?, a.loss)?,
        Some("clust") => {
            let partitions = io::read_labels(&dir.join("partitions.csv")).context("--trace")?;
            let orders = read_cluster_orders(&dir.join("cluster_orders.csv")).context("--trace")?;
            if orders.len() != partitions.len() {
                bail!("--trace: {} partitions but {} draws of cluster orders", partitions.len(), orders.len());
            }
            clust_summary(&partitions, &orders, a.loss)?
        }
        other => bail!("--trace: manifest command {other:?} has no point estimate"),
    };
    match &a.output {
        Some(path) => io::write_json(path, &summary).context("--output"),
        None => {
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}
