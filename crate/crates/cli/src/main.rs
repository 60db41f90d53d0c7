mod cli;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};
use sulfex_core::curveproc::{self, ExpansionSeries};
use sulfex_core::domain::{
    classify_mixture, cluster_groups, fit_pipeline, paper_default_bundle, predict_curve,
    predicted_failure_time, PipelineConfig,
};
use sulfex_core::io::{self, DatasetManifest, SyntheticConfig};
use sulfex_core::{Error, Mixture, ModelBundle};

use cli::{
    BundleArgs, Cli, ClusterArgs, Command, FirstBoundary, FitArgs, Format, GenerateArgs,
    PredictArgs, SmoothArgs,
};

type CmdResult = Result<(), Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    let outcome = match cli.command {
        Command::Classify(args) => classify(&args.mixtures, &args.bundle, format),
        Command::Predict(args) => predict(&args, format),
        Command::Fit(args) => fit(&args, format),
        Command::Smooth(args) => smooth(&args),
        Command::Cluster(args) => cluster(&args, format),
        Command::Generate(args) => generate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

/// Fixed decimals with trailing zeros dropped: 0.338220 prints as 0.33822.
fn num(v: f64, decimals: usize) -> String {
    if v.abs() >= 1e9 {
        return format!("{v:.4e}");
    }
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        &s
    };
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        emit(padded.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
}

fn print_json(value: &Value) {
    emit(&serde_json::to_string_pretty(value).expect("json values always serialize"));
}

// A closed pipe (e.g. `| head`) is not an error worth reporting.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn load_bundle(args: &BundleArgs) -> Result<ModelBundle, Error> {
    let Some(path) = &args.bundle else {
        return Ok(paper_default_bundle());
    };
    let loaded = io::load_bundle(path)?;
    for field in &loaded.unknown_fields {
        eprintln!("warning: ignoring unknown bundle field '{field}'");
    }
    Ok(loaded.bundle)
}

fn load_mixtures(path: &Path) -> Result<Vec<Mixture>, Error> {
    let mixtures = io::load_mixtures(path)?;
    if let Some(m) = mixtures.iter().find(|m| m.range_violation().is_some()) {
        let (var, value) = m.range_violation().expect("just found");
        let (lo, hi, unit) = var.range();
        eprintln!(
            "warning: mixture '{}' has {} = {value} outside the usual {lo}..{hi} {unit}",
            m.id,
            var.column()
        );
    }
    Ok(mixtures)
}

fn classify(path: &Path, args: &BundleArgs, format: Format) -> CmdResult {
    let bundle = load_bundle(args)?;
    let simplified = args.first_boundary == FirstBoundary::Simplified;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for mix in load_mixtures(path)? {
        let group = classify_mixture(&mix, &bundle, simplified)?;
        let values = bundle.boundary_values(&mix)?;
        let first = if simplified {
            values.first_simplified
        } else {
            values.first
        };
        rows.push(vec![
            mix.id.clone(),
            group.to_string(),
            num(first, 4),
            num(values.second, 4),
        ]);
        records.push(json!({
            "id": mix.id,
            "group": group.to_string(),
            "first_boundary": first,
            "second_boundary": values.second,
        }));
    }
    match format {
        Format::Table => print_table(&["id", "group", "first_boundary", "second_boundary"], &rows),
        Format::Json => print_json(&Value::Array(records)),
    }
    Ok(())
}

fn predict(args: &PredictArgs, format: Format) -> CmdResult {
    let bundle = load_bundle(&args.bundle)?;
    let simplified = args.bundle.first_boundary == FirstBoundary::Simplified;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut curves = Vec::new();
    for mix in load_mixtures(&args.mixtures)? {
        let curve = predict_curve(&mix, &bundle, args.horizon, args.step, simplified)?;
        let last = *curve.series.values().last().expect("curves start at t = 0");
        let t_fail = match predicted_failure_time(&mix, curve.group, &bundle) {
            Ok(t) => Some(t),
            Err(Error::AlreadyFailed(_) | Error::NonIncreasing(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(vec![
            mix.id.clone(),
            curve.group.to_string(),
            num(last, 6),
            t_fail.map_or_else(|| "-".to_string(), |t| num(t, 3)),
        ]);
        records.push(json!({
            "id": mix.id,
            "group": curve.group.to_string(),
            "horizon": args.horizon,
            "final_expansion": last,
            "failure_time": t_fail,
        }));
        curves.push((mix.id.clone(), curve.series));
    }
    if let Some(out) = &args.out {
        io::emit_plot_data(&curves, out)?;
    }
    match format {
        Format::Table => print_table(&["id", "group", "final_expansion", "failure_time"], &rows),
        Format::Json => print_json(&Value::Array(records)),
    }
    Ok(())
}

fn pipeline_config(
    smoothing: &cli::SmoothingArgs,
    clustering: &cli::ClusteringArgs,
) -> PipelineConfig {
    PipelineConfig {
        alpha: smoothing.alpha,
        failure_threshold: smoothing.threshold,
        k: clustering.k,
        seed: clustering.seed,
        kmeans_restarts: clustering.restarts,
        ..PipelineConfig::default()
    }
}

fn fit(args: &FitArgs, format: Format) -> CmdResult {
    let dataset = DatasetManifest::load(&args.manifest)?.load_dataset()?;
    let config = PipelineConfig {
        box_constraint: args.box_constraint,
        data_driven_selection: args.data_driven,
        ..pipeline_config(&args.smoothing, &args.clustering)
    };
    let fitted = fit_pipeline(&dataset, &config)?;
    io::save_bundle(&fitted.bundle, &args.out)?;

    let bundle = &fitted.bundle;
    let report = &fitted.report;
    let boundaries = json!({
        "first": bundle.boundary_first.as_ref().map(|b| b.svm.equation()),
        "first_simplified": bundle.boundary_first.as_ref().map(|b| b.simplified.equation()),
        "second": bundle.boundary_second.as_ref().map(|b| b.equation()),
    });
    match format {
        Format::Json => {
            let groups: Vec<Value> = report
                .groups
                .iter()
                .map(|g| {
                    let m = &g.model;
                    json!({
                        "group": g.group.to_string(),
                        "mixtures": g.mixture_ids.len(),
                        "equation": m.equation(),
                        "terms": m.terms.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                        "coefficients": m.coefficients,
                        "t_statistics": m.fit.as_ref().map(|f| f.t_statistics.clone()),
                        "r_squared": m.fit.as_ref().map(|f| f.r_squared),
                        "residual_std": m.fit.as_ref().map(|f| f.residual_std),
                        "pca_note": g.pca_note,
                    })
                })
                .collect();
            print_json(&json!({
                "bundle": args.out,
                "partial": bundle.partial,
                "groups": groups,
                "boundaries": boundaries,
            }));
        }
        Format::Table => {
            let sizes: Vec<String> = report
                .clusters
                .cluster_labels
                .iter()
                .map(|&g| format!("{g} {}", report.clusters.size(g)))
                .collect();
            println!("clusters: {}", sizes.join(", "));
            for g in &report.groups {
                let m = &g.model;
                println!();
                println!("group {} ({} mixtures)", g.group, g.mixture_ids.len());
                println!("  {}", m.equation());
                if let Some(note) = &g.pca_note {
                    println!("  note: {note}");
                }
                let rows: Vec<Vec<String>> = m
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(i, term)| {
                        let t_stat = m
                            .fit
                            .as_ref()
                            .and_then(|f| f.t_statistics.get(i).copied().flatten());
                        vec![
                            term.to_string(),
                            num(m.coefficients[i], 6),
                            t_stat.map_or_else(|| "-".to_string(), |t| num(t, 2)),
                        ]
                    })
                    .collect();
                print_table(&["  Variable", "Coefficient", "T-statistic"], &indent(rows));
                if let Some(f) = &m.fit {
                    println!(
                        "  R^2 {:.3}, residual std {}, n {}",
                        f.r_squared,
                        num(f.residual_std, 6),
                        f.n_observations
                    );
                }
            }
            println!();
            for (name, eq) in [
                ("first boundary", &boundaries["first"]),
                ("first (simplified)", &boundaries["first_simplified"]),
                ("second boundary", &boundaries["second"]),
            ] {
                println!("{name}: {}", eq.as_str().unwrap_or("-"));
            }
            if bundle.partial {
                println!("bundle is partial: some groups or boundaries could not be fitted");
            }
            println!("bundle written to {}", args.out.display());
        }
    }
    Ok(())
}

fn indent(mut rows: Vec<Vec<String>>) -> Vec<Vec<String>> {
    for row in &mut rows {
        row[0] = format!("  {}", row[0]);
    }
    rows
}

fn smooth(args: &SmoothArgs) -> CmdResult {
    let mut out = Vec::new();
    for s in io::load_series(&args.series)? {
        let smoothed = if s.len() >= 3 {
            curveproc::smooth(&s, args.alpha)?
        } else {
            s.clone()
        };
        out.push((format!("{}:original", s.mixture_id), s));
        out.push((format!("{}:smoothed", smoothed.mixture_id), smoothed));
    }
    match &args.out {
        Some(path) => io::emit_plot_data(&out, path),
        None => {
            let mut buf = Vec::new();
            io::write_plot_data(&out, &mut buf)
                .map_err(|e| Error::InvalidConfig(format!("writing plot data: {e}")))?;
            let _ = std::io::stdout().lock().write_all(&buf);
            Ok(())
        }
    }
}

fn cluster(args: &ClusterArgs, format: Format) -> CmdResult {
    let series = io::load_series(&args.series)?;
    let dataset: Vec<(Mixture, ExpansionSeries)> = series
        .into_iter()
        .map(|s| (Mixture::new(s.mixture_id.clone()), s))
        .collect();
    let config = PipelineConfig {
        smooth_before_clustering: !args.no_smooth,
        ..pipeline_config(&args.smoothing, &args.clustering)
    };
    let stage = cluster_groups(&dataset, &config)?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, (mix, _)) in dataset.iter().enumerate() {
        let fp = &stage.failure_points[i];
        let cluster = stage.kmeans.assignments[i];
        let group = stage.labels[i];
        rows.push(vec![
            mix.id.clone(),
            num(fp.t_fail, 3),
            num(fp.slope, 6),
            fp.censored.to_string(),
            cluster.to_string(),
            group.to_string(),
        ]);
        records.push(json!({
            "id": mix.id,
            "t_fail": fp.t_fail,
            "slope": fp.slope,
            "censored": fp.censored,
            "cluster": cluster,
            "group": group.to_string(),
        }));
    }
    match format {
        Format::Table => print_table(
            &["id", "t_fail", "slope", "censored", "cluster", "group"],
            &rows,
        ),
        Format::Json => print_json(&Value::Array(records)),
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> CmdResult {
    let counts: [usize; 3] = args
        .counts
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidConfig("--counts needs three values (HN,ML,LL)".into()))?;
    let data = io::generate_synthetic(&SyntheticConfig {
        counts,
        noise: args.noise,
        seed: args.seed,
        ..SyntheticConfig::default()
    })?;
    let manifest = io::save_dataset(&data.data, &args.out_dir)?;
    let mut labels = String::from("mixture_id,group\n");
    for ((mix, _), group) in data.data.iter().zip(&data.labels) {
        labels.push_str(&format!("{},{group}\n", mix.id));
    }
    let labels_path = args.out_dir.join("labels.csv");
    fs::write(&labels_path, labels).map_err(|e| Error::Io {
        path: labels_path.clone(),
        source: e,
    })?;
    println!(
        "wrote {} mixtures; manifest {}",
        data.data.len(),
        manifest.display()
    );
    Ok(())
}
