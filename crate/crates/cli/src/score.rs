//! The `score` subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;

use graphmm::io::{read_hyperparams, write_hyperparams, write_lfdr_csv, write_scores_csv};
use graphmm::numeric::fmt_sig8;
use graphmm::{
    bh_adjust, estimate_hyperparams, estimate_p0, kernel_locfdr, lfdr_all, lfdr_graph, storey_qvalue,
    threshold_list, vertex_t_tests, EngineConfig, EstimationConfig, GlobalHyperparams, HyperOverrides,
    LfdrResult, PatchLayout, PatchShape,
};

use crate::config::{check_thresholds, load_graph, read_data, read_text, write_text, LoadedGraph, RunFile};
use crate::exit::{Context, Failure};
use crate::{GraphSource, ScoreArgs};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

struct Plan {
    x: PathBuf,
    y: PathBuf,
    graph: GraphSource,
    patch: PatchShape,
    radius: usize,
    thresholds: Vec<f64>,
    hyper: Option<PathBuf>,
    estimation: EstimationConfig,
    out: PathBuf,
}

fn plan(args: ScoreArgs) -> Result<Plan, Failure> {
    let file = match &args.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let x = args.x.or(file.x).ok_or_else(|| Failure::usage("--x is required"))?;
    let y = args.y.or(file.y).ok_or_else(|| Failure::usage("--y is required"))?;
    // A graph given on the command line replaces the file's entirely.
    let graph = if args.graph.lattice.is_some() || args.graph.edges.is_some() {
        args.graph
    } else {
        GraphSource { lattice: file.lattice, edges: file.edges }
    };
    let patch = match args.patch.or(file.patch) {
        Some(s) => s.parse().map_err(|e: graphmm::Error| Failure::usage(e.to_string()))?,
        None => PatchShape::default(),
    };
    let mut thresholds = args.thresholds.or(file.thresholds).unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    check_thresholds(&thresholds)?;
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let defaults = EstimationConfig::default();
    let fo = file.overrides;
    let estimation = EstimationConfig {
        lambda: file.lambda.unwrap_or(defaults.lambda),
        df_excess: file.df_excess.unwrap_or(defaults.df_excess),
        shrink: file.shrink.unwrap_or(defaults.shrink),
        separate_scales: args.separate_scales || file.separate_scales.unwrap_or(false),
        shift_variance: file.shift_variance.unwrap_or(defaults.shift_variance),
        overrides: HyperOverrides {
            mu0: args.mu0.or(fo.mu0),
            tau2: args.tau2.or(fo.tau2),
            delta0: args.delta0.or(fo.delta0),
            sigma2: args.sigma2.or(fo.sigma2),
            p0: args.p0.or(fo.p0),
        },
        ..defaults
    };
    Ok(Plan {
        x,
        y,
        graph,
        patch,
        radius: args.radius.or(file.radius).unwrap_or(1),
        thresholds,
        hyper: args.hyper.or(file.hyper),
        estimation,
        out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("graphmm-out")),
    })
}

pub fn run(args: ScoreArgs) -> Result<(), Failure> {
    let plan = plan(args)?;
    let (_, _, data) = read_data(&plan.x, &plan.y)?;
    let n = data.n_vertices();
    let LoadedGraph { graph, lattice } = load_graph(&plan.graph, Some(n))?;
    if graph.n_vertices() != n {
        return Err(Failure::data(format!("the data have {n} vertices but the graph has {}", graph.n_vertices())));
    }
    let layout = match lattice {
        Some(lattice) => PatchLayout::Lattice { lattice, shape: plan.patch },
        None => PatchLayout::Graph,
    };

    let hyper = match &plan.hyper {
        Some(path) => GlobalHyperparams::shared(read_hyperparams(&read_text(path)?).context(path.display())?),
        None => estimate_hyperparams(&data, layout, &plan.estimation)?,
    };
    let cfg = EngineConfig::default();
    let result = match lattice {
        Some(l) => lfdr_all(&data, l, plan.patch, &hyper, &cfg)?,
        None => lfdr_graph(&data, &graph, plan.radius, &hyper, &cfg)?,
    };

    let tests = vertex_t_tests(&data)?;
    let bh = bh_adjust(&tests.p)?.scores;
    let qv = storey_qvalue(&tests.p, plan.estimation.lambda, None)?.scores;
    let mut methods: Vec<(&str, &[f64])> = vec![("graphmm", &result.lfdr), ("bh", &bh), ("qvalue", &qv)];
    let locfdr = if n >= graphmm::baselines::LOCFDR_MIN_POINTS {
        let p0 = estimate_p0(&tests.p, plan.estimation.lambda)?;
        Some(kernel_locfdr(&tests.t, tests.df, Some(p0))?.scores)
    } else {
        None
    };
    if let Some(l) = &locfdr {
        methods.push(("locfdr", l));
    }

    let out = &plan.out;
    write_text(&out.join("lfdr.csv"), &write_lfdr_csv(&result, lattice))?;
    write_text(&out.join("scores.csv"), &write_scores_csv(&methods, lattice))?;
    write_text(&out.join("hyperparams.txt"), &write_hyperparams(&hyper))?;
    let mut report = header(&plan, &graph, lattice.is_some(), &result, &hyper);
    let _ = writeln!(report, "\nthreshold,n_listed,controlled_fdr,n_clusters,largest_cluster");
    for &c in &plan.thresholds {
        let list = threshold_list(&result.lfdr, c)?;
        let clusters = graph.component_sizes(&list.vertices)?;
        let _ = writeln!(
            report,
            "{c},{},{},{},{}",
            list.vertices.len(),
            list.controlled_fdr.map_or("NA".to_string(), fmt_sig8),
            clusters.len(),
            clusters.first().copied().unwrap_or(0)
        );
        write_text(&out.join(format!("discoveries_{c}.csv")), &discoveries(&result, &list.vertices, lattice))?;
    }
    write_text(&out.join("report.txt"), &report)?;
    print!("{report}");

    if result.n_failed() > 0 {
        return Err(Failure::Numeric(format!(
            "{} of {n} vertices could not be scored (written as NA; see {})",
            result.n_failed(),
            out.join("report.txt").display()
        )));
    }
    Ok(())
}

fn header(plan: &Plan, graph: &graphmm::Graph, is_lattice: bool, r: &LfdrResult, h: &GlobalHyperparams) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vertices {}", r.len());
    if is_lattice {
        let _ = writeln!(s, "graph lattice {}, patch {}x{}", display(&plan.graph), plan.patch.rows, plan.patch.cols);
    } else {
        let _ = writeln!(s, "graph {} edges, patch radius {}", graph.n_edges(), plan.radius);
    }
    let _ = writeln!(
        s,
        "hyperparameters mu0={} tau2={} delta0={} sigma2={} p0={}",
        fmt_sig8(h.mu0),
        fmt_sig8(h.tau2),
        fmt_sig8(h.delta0),
        fmt_sig8(h.sigma2),
        fmt_sig8(h.p0)
    );
    let _ = writeln!(s, "failed vertices {}", r.n_failed());
    for (v, d) in r.diagnostics.iter().enumerate() {
        if let Some(e) = &d.error {
            let _ = writeln!(s, "  vertex {v} (patch {}): {e}", d.patch);
        }
    }
    s
}

fn display(g: &GraphSource) -> String {
    g.lattice.clone().unwrap_or_default()
}

fn discoveries(r: &LfdrResult, listed: &[usize], lattice: Option<graphmm::Lattice>) -> String {
    let mut s = String::from("vertex,row,col,lfdr\n");
    for &v in listed {
        let (row, col) = match lattice {
            Some(l) => {
                let (a, b) = l.coords(v);
                (a.to_string(), b.to_string())
            }
            None => ("NA".into(), "NA".into()),
        };
        let _ = writeln!(s, "{v},{row},{col},{}", fmt_sig8(r.lfdr[v]));
    }
    s
}
