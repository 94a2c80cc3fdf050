//! The `enumerate`, `simulate`, `evaluate`, `toy` and `permute` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use graphmm::io::{data_tables, read_scores_csv, read_truth_csv, write_data_csv, write_truth_csv};
use graphmm::numeric::fmt_sig8;
use graphmm::partition::ALL_PARTITIONS_CAP;
use graphmm::sim::{
    evaluate as score_lists, generate, permute_sample_labels, permute_vertices, replicate_rng, toy_fdr_curve,
    ScenarioConfig, ToyConfig,
};
use graphmm::{enumerate_all_partitions, enumerate_graph_respecting_capped, DataMatrices, Error};
use rayon::prelude::*;

use crate::config::{check_thresholds, load_graph, read_data, read_text, resolve_seed, toml_has_key, write_text};
use crate::exit::{Context, Failure};
use crate::{EnumerateArgs, EvaluateArgs, PermuteArgs, PermuteMode, SimulateArgs, ToyArgs};

pub fn enumerate(args: EnumerateArgs) -> Result<(), Failure> {
    let loaded = load_graph(&args.graph, args.vertices)?;
    let n = loaded.graph.n_vertices();
    let parts = if args.all {
        if n > ALL_PARTITIONS_CAP {
            return Err(Failure::usage(format!("--all is limited to {ALL_PARTITIONS_CAP} vertices, got {n}")));
        }
        enumerate_all_partitions(n)?
    } else {
        enumerate_graph_respecting_capped(&loaded.graph, args.cap)?
    };
    if let Some(path) = &args.list {
        let mut text = String::new();
        for p in &parts {
            text.push_str(&p.to_line());
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    println!("{}", parts.len());
    Ok(())
}

fn write_pair(dir: &Path, data: &DataMatrices) -> Result<(), Failure> {
    let (x, y) = data_tables(data);
    write_text(&dir.join("X.csv"), &write_data_csv(&x))?;
    write_text(&dir.join("Y.csv"), &write_data_csv(&y))
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let text = read_text(&args.config)?;
    let cfg = ScenarioConfig::from_toml(&text).map_err(|e| Failure::usage(e.to_string()).context(args.config.display()))?;
    let seed = resolve_seed(args.seed, toml_has_key(&text, "seed").then_some(cfg.seed))?;
    let lattice = cfg.lattice()?;
    let sets = (0..args.replicates)
        .into_par_iter()
        .map(|r| generate(&cfg, &mut replicate_rng(seed, r)))
        .collect::<Result<Vec<_>, Error>>()?;
    for (r, set) in sets.iter().enumerate() {
        let dir = args.out.join(format!("rep_{r}"));
        write_pair(&dir, &set.data)?;
        let truth = write_truth_csv(&set.truth_null, set.truth_partition.labels(), Some(lattice));
        write_text(&dir.join("truth.csv"), &truth)?;
    }
    eprintln!("wrote {} replicate(s) to {} (seed {seed})", sets.len(), args.out.display());
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    check_thresholds(&args.thresholds)?;
    let truth = read_truth_csv(&read_text(&args.truth)?).context(args.truth.display())?;
    let mut text = String::from("method,threshold,n_listed,empirical_fdr,tpr,controlled_fdr\n");
    for path in &args.scores {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let methods = read_scores_csv(&read_text(path)?, &stem).context(path.display())?;
        for (name, scores) in methods {
            let lfdr = args.lfdr_methods.contains(&name);
            let oc = score_lists(&truth, &scores, &args.thresholds, lfdr).context(path.display())?;
            for row in oc.rows {
                let _ = writeln!(
                    text,
                    "{name},{},{},{},{},{}",
                    row.threshold,
                    row.n_listed,
                    fmt_sig8(row.empirical_fdr),
                    fmt_sig8(row.tpr),
                    row.controlled_fdr.map_or("NA".to_string(), fmt_sig8)
                );
            }
        }
    }
    emit(args.out.as_deref(), &text)
}

pub fn toy(args: ToyArgs) -> Result<(), Failure> {
    let text = read_text(&args.config)?;
    let cfg: ToyConfig = toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", args.config.display())))?;
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if args.replicates == 0 {
        return Err(Failure::usage("--replicates must be at least 1"));
    }
    if let Some(&k) = args.sizes.iter().find(|&&k| k == 0 || k > cfg.n_pairs) {
        return Err(Failure::usage(format!("list size {k} is outside 1..={}", cfg.n_pairs)));
    }
    let seed = resolve_seed(args.seed, toml_has_key(&text, "seed").then_some(cfg.seed))?;
    let curves = (0..args.replicates)
        .into_par_iter()
        .map(|r| toy_fdr_curve(&cfg, &mut replicate_rng(seed, r)))
        .collect::<Result<Vec<_>, Error>>()?;
    let reps = curves.len() as f64;
    let avg = |f: &dyn Fn(&graphmm::sim::ToyCurve) -> f64| curves.iter().map(f).sum::<f64>() / reps;
    let mut out = String::from("list_size,fdr_lfdr1,fdr_lfdr2,mean_lfdr1,mean_lfdr2\n");
    for &k in &args.sizes {
        let i = k - 1;
        let _ = writeln!(
            out,
            "{k},{},{},{},{}",
            fmt_sig8(avg(&|c| c.fdr1[i])),
            fmt_sig8(avg(&|c| c.fdr2[i])),
            fmt_sig8(avg(&|c| c.mean_score1[i])),
            fmt_sig8(avg(&|c| c.mean_score2[i]))
        );
    }
    emit(args.out.as_deref(), &out)
}

pub fn permute(args: PermuteArgs) -> Result<(), Failure> {
    let (_, _, data) = read_data(&args.x, &args.y)?;
    let seed = resolve_seed(args.seed, None)?;
    for i in 0..args.count {
        let mut rng = replicate_rng(seed, i);
        let permuted = match args.mode {
            PermuteMode::Labels => permute_sample_labels(&data, &mut rng),
            PermuteMode::Vertices => permute_vertices(&data, &mut rng),
        };
        write_pair(&args.out.join(format!("perm_{i}")), &permuted)?;
    }
    Ok(())
}
