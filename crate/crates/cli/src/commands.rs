use std::path::Path;

use fairsel::coefficients::{CoefficientTable, ScoringProblem};
use fairsel::ingest::{compas_from_reader, empirical_joint, load_reader, CompasSummary, Provenance, SchemaSpec};
use fairsel::pid::{pid_decompose, PidInput, SolverConfig};
use fairsel::prob::JointDistribution;
use fairsel::shapley::{rank_and_select, score_exact, score_monte_carlo, Method, SelectionPolicy, ShapleyScores};
use fairsel::synth::{exact_joint, forward_sample, make_fixture, random_cpts, stand_in_model, CausalDag, CausalModel};
use fairsel::validation::{removal_sweep, SweepEntry};
use fairsel::Execution;
use serde::Serialize;

use crate::error::CliError;
use crate::report::{csv_text, emit, fmt_f64, sibling, to_json, RunManifest};
use crate::{CompasArgs, Mode, PidArgs, ScoreArgs, SelectArgs, SolverArgs, SourceArgs, SweepArgs, SynthArgs};

fn solver_config(args: &SolverArgs, manifest: &mut RunManifest) -> Result<SolverConfig, CliError> {
    let cfg = SolverConfig {
        objective_tol: args.objective_tol,
        max_iterations: args.max_iterations,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    manifest
        .param("solver_objective_tol", cfg.objective_tol)
        .param("solver_feasibility_tol", cfg.feasibility_tol)
        .param("solver_max_iterations", cfg.max_iterations)
        .param("solver_clamp_threshold", cfg.clamp_threshold);
    Ok(cfg)
}

fn utf8(bytes: Vec<u8>, path: &Path) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|e| CliError::Usage(format!("{}: not UTF-8: {e}", path.display())))
}

/// Loads the joint named by the source flags; datasets also return their
/// provenance.
fn load_source(
    src: &SourceArgs,
    manifest: &mut RunManifest,
) -> Result<(JointDistribution, Option<Provenance>), CliError> {
    if let Some(p) = &src.joint {
        let text = utf8(manifest.input("joint", p)?, p)?;
        let dist: JointDistribution = serde_json::from_str(&text).map_err(fairsel::Error::from)?;
        return Ok((dist, None));
    }
    if let Some(p) = &src.model {
        let text = utf8(manifest.input("model", p)?, p)?;
        return Ok((exact_joint(&CausalModel::from_json(&text)?)?, None));
    }
    let (data, schema) = match (&src.data, &src.schema) {
        (Some(d), Some(s)) => (d, s),
        _ => return Err(CliError::Usage("--data needs --schema".into())),
    };
    let spec_text = utf8(manifest.input("schema", schema)?, schema)?;
    let spec = SchemaSpec::from_json(&spec_text)?;
    let bytes = manifest.input("data", data)?;
    let dataset = load_reader(bytes.as_slice(), &spec, &data.display().to_string())?;
    manifest.param("smoothing", src.smoothing);
    let dist = empirical_joint(&dataset, src.smoothing)?;
    Ok((dist, Some(dataset.provenance().clone())))
}

#[derive(Serialize)]
struct PidReport {
    manifest: RunManifest,
    target: String,
    source_1: String,
    source_2: String,
    ui_1: f64,
    ui_2: f64,
    si: f64,
    ci: f64,
    total: f64,
    iterations: usize,
    objective_gap: f64,
}

pub fn pid(args: PidArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("pid");
    let text = utf8(manifest.input("joint", &args.input)?, &args.input)?;
    let dist: JointDistribution = serde_json::from_str(&text).map_err(fairsel::Error::from)?;
    let cfg = solver_config(&args.solver, &mut manifest)?;
    let input = match (&args.target, args.source1.is_empty(), args.source2.is_empty()) {
        (None, true, true) => PidInput::new(dist)?,
        (Some(t), false, false) => PidInput::from_joint(&dist, t, &args.source1, &args.source2)?,
        _ => {
            return Err(CliError::Usage(
                "give --target, --source1 and --source2 together, or none of them".into(),
            ))
        }
    };
    let names: Vec<String> = input.dist().schema().variables().iter().map(|v| v.name.clone()).collect();
    manifest
        .param("target", &names[0])
        .param("source_1", &names[1])
        .param("source_2", &names[2]);
    let r = pid_decompose(&input, &cfg)?;
    let report = PidReport {
        manifest,
        target: names[0].clone(),
        source_1: names[1].clone(),
        source_2: names[2].clone(),
        ui_1: r.ui_1,
        ui_2: r.ui_2,
        si: r.si,
        ci: r.ci,
        total: r.total(),
        iterations: r.iterations,
        objective_gap: r.objective_gap,
    };
    emit(args.out.as_deref(), &to_json(&report)?)
}

#[derive(Serialize)]
struct FeatureScore {
    name: String,
    phi_acc: f64,
    phi_d: f64,
    fairness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_acc_std_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_d_std_err: Option<f64>,
}

#[derive(Serialize)]
struct TableRow {
    subset: Vec<String>,
    acc: f64,
    disc: f64,
    shared: f64,
    proxy: f64,
    proxy_given_label: f64,
    ui_1: f64,
    ui_2: f64,
    ci: f64,
}

#[derive(Serialize)]
struct ScoreReport {
    manifest: RunManifest,
    method: Method,
    alpha: f64,
    protected: String,
    label: String,
    features: Vec<FeatureScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficient_table: Option<Vec<TableRow>>,
}

fn table_rows(table: &CoefficientTable, names: &[&str]) -> Vec<TableRow> {
    table
        .iter()
        .map(|(key, e)| TableRow {
            subset: key.iter().map(|i| names[i].to_string()).collect(),
            acc: e.acc,
            disc: e.disc.value,
            shared: e.disc.shared,
            proxy: e.disc.proxy,
            proxy_given_label: e.disc.proxy_given_label,
            ui_1: e.disc.pid.ui_1,
            ui_2: e.disc.pid.ui_2,
            ci: e.disc.pid.ci,
        })
        .collect()
}

pub fn score(args: ScoreArgs, exec: Execution) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("score");
    let (dist, provenance) = load_source(&args.source, &mut manifest)?;
    let cfg = solver_config(&args.solver, &mut manifest)?;
    let prob = ScoringProblem::new(&dist, cfg)?;
    let exact = match args.mode {
        Mode::Exact => true,
        Mode::Mc => false,
        Mode::Auto => prob.n() <= args.exact_limit,
    };
    manifest
        .param("alpha", args.alpha)
        .param("mode", if exact { "exact" } else { "monte_carlo" })
        .param("exact_limit", args.exact_limit);
    if !exact {
        manifest.param("permutations", args.permutations).param("seed", args.seed);
    }
    let (scores, table) = if exact {
        score_exact(&prob, args.alpha, exec)?
    } else {
        score_monte_carlo(&prob, args.alpha, args.permutations, args.seed, exec)?
    };
    manifest.param("dump_table", args.dump_table);

    let names = prob.feature_names();
    let features: Vec<FeatureScore> = (0..prob.n())
        .map(|i| FeatureScore {
            name: scores.features[i].clone(),
            phi_acc: scores.phi_acc[i],
            phi_d: scores.phi_d[i],
            fairness: scores.fairness[i],
            phi_acc_std_err: scores.std_err.as_ref().map(|s| s[i].0),
            phi_d_std_err: scores.std_err.as_ref().map(|s| s[i].1),
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = features
        .iter()
        .map(|f| {
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            vec![
                f.name.clone(),
                fmt_f64(f.phi_acc),
                fmt_f64(f.phi_d),
                fmt_f64(f.fairness),
                opt(f.phi_acc_std_err),
                opt(f.phi_d_std_err),
            ]
        })
        .collect();
    let report = ScoreReport {
        manifest,
        method: scores.method,
        alpha: scores.alpha,
        protected: prob.protected_name().to_string(),
        label: prob.label_name().to_string(),
        features,
        data: provenance,
        coefficient_table: args.dump_table.then(|| table_rows(&table, &names)),
    };
    emit(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(out) = &args.out {
        let header = ["feature", "phi_acc_bits", "phi_d_bits3", "fairness", "phi_acc_std_err", "phi_d_std_err"];
        let path = sibling(out, "csv");
        emit(Some(&path), &csv_text(&header, &csv_rows)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Selected {
    rank: usize,
    name: String,
    fairness: f64,
}

#[derive(Serialize)]
struct SelectReport {
    manifest: RunManifest,
    policy: String,
    selected: Vec<Selected>,
}

/// Rebuilds the scores needed for ranking from a score report.
fn read_scores(text: &str) -> Result<ShapleyScores, CliError> {
    let bad = |what: &str| CliError::Usage(format!("not a score report: {what}"));
    let v: serde_json::Value = serde_json::from_str(text).map_err(fairsel::Error::from)?;
    let features = v["features"].as_array().ok_or_else(|| bad("missing features"))?;
    let mut names = Vec::new();
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for f in features {
        names.push(f["name"].as_str().ok_or_else(|| bad("feature without a name"))?.to_string());
        for (col, key) in cols.iter_mut().zip(["phi_acc", "phi_d", "fairness"]) {
            col.push(f[key].as_f64().ok_or_else(|| bad(key))?);
        }
    }
    let [phi_acc, phi_d, fairness] = cols;
    Ok(ShapleyScores {
        features: names,
        phi_acc,
        phi_d,
        fairness,
        alpha: v["alpha"].as_f64().ok_or_else(|| bad("alpha"))?,
        method: Method::Exact,
        std_err: None,
        seed: None,
        permutations: None,
    })
}

pub fn select(args: SelectArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("select");
    let text = utf8(manifest.input("scores", &args.scores)?, &args.scores)?;
    let scores = read_scores(&text)?;
    let (policy, label) = match (args.top_k, args.threshold) {
        (Some(k), None) => (SelectionPolicy::TopK(k), format!("top_k={k}")),
        (None, Some(t)) => (SelectionPolicy::Threshold(t), format!("threshold={}", fmt_f64(t))),
        _ => return Err(CliError::Usage("give exactly one of --top-k and --threshold".into())),
    };
    manifest.param("policy", &label);
    let picked = rank_and_select(&scores, policy)?;
    let report = SelectReport {
        manifest,
        policy: label,
        selected: picked
            .iter()
            .enumerate()
            .map(|(r, &i)| Selected {
                rank: r + 1,
                name: scores.features[i].clone(),
                fairness: scores.fairness[i],
            })
            .collect(),
    };
    emit(args.out.as_deref(), &to_json(&report)?)
}

#[derive(Serialize)]
struct SynthReport {
    manifest: RunManifest,
    model: String,
    cells: usize,
    samples: Option<String>,
    records: usize,
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("synth");
    manifest
        .param("seed", args.seed)
        .param("concentration", args.concentration)
        .param("samples", args.samples);
    let model = match (&args.graph, &args.fixture) {
        (Some(g), None) => {
            let text = utf8(manifest.input("graph", g)?, g)?;
            let dag: CausalDag = serde_json::from_str(&text).map_err(fairsel::Error::from)?;
            random_cpts(&dag, args.seed, args.concentration)?
        }
        (None, Some(name)) if name == "stand_in" => {
            manifest.param("fixture", name);
            if args.concentration != fairsel::synth::DEFAULT_CONCENTRATION {
                random_cpts(stand_in_model(args.seed).dag(), args.seed, args.concentration)?
            } else {
                stand_in_model(args.seed)
            }
        }
        (None, Some(name)) => {
            manifest.param("fixture", name).param("features", args.features);
            let kind = name.parse()?;
            let fixture = make_fixture(kind, args.features, args.seed)?;
            random_cpts(fixture.dag(), args.seed, args.concentration)?
        }
        _ => return Err(CliError::Usage("give exactly one of --graph and --fixture".into())),
    };
    let cells = model.schema().cell_count().unwrap_or(usize::MAX);
    emit(Some(&args.out), &(model.to_json()? + "\n"))?;
    let mut samples = None;
    if args.samples > 0 {
        let path = args.samples_out.clone().unwrap_or_else(|| sibling(&args.out, "csv"));
        let data = forward_sample(&model, args.samples, args.seed)?;
        data.write_csv(&path)?;
        samples = Some(path.display().to_string());
    }
    let report = SynthReport {
        manifest,
        model: args.out.display().to_string(),
        cells,
        samples,
        records: args.samples,
    };
    emit(None, &to_json(&report)?)
}

#[derive(Serialize)]
struct SweepReportOut {
    manifest: RunManifest,
    features: Vec<String>,
    baseline: SweepEntry,
    removals: Vec<SweepEntry>,
    argmin_bias: String,
    argmax_error: String,
}

pub fn sweep(args: SweepArgs, exec: Execution) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("sweep");
    let (dist, _) = load_source(&args.source, &mut manifest)?;
    let sweep = removal_sweep(&dist, exec)?;
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv)?;
    let report = SweepReportOut {
        manifest,
        argmin_bias: sweep.features[sweep.argmin_bias()].clone(),
        argmax_error: sweep.features[sweep.argmax_error_increase()].clone(),
        features: sweep.features,
        baseline: sweep.baseline,
        removals: sweep.removals,
    };
    emit(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(out) = &args.out {
        let path = sibling(out, "csv");
        std::fs::write(&path, csv).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CompasReport {
    manifest: RunManifest,
    output: String,
    schema: String,
    summary: CompasSummary,
    target_diff: Vec<String>,
}

pub fn compas_prep(args: CompasArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("compas-prep");
    let bytes = manifest.input("raw", &args.raw)?;
    let (data, summary) = compas_from_reader(bytes.as_slice(), &args.raw.display().to_string())?;
    data.write_csv(&args.out)?;
    let schema_path = sibling(&args.out, "schema.json");
    let spec = SchemaSpec::for_codes(data.schema());
    emit(Some(&schema_path), &(serde_json::to_string_pretty(&spec).map_err(fairsel::Error::from)? + "\n"))?;
    let report = CompasReport {
        manifest,
        output: args.out.display().to_string(),
        schema: schema_path.display().to_string(),
        target_diff: summary.diff_against_targets(),
        summary,
    };
    emit(args.summary.as_deref(), &to_json(&report)?)
}
