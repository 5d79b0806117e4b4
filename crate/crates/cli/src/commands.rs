//! Subcommand implementations plus shared plumbing: month-range parsing,
//! detection-file loading, and the deterministic run manifest each command
//! leaves next to its outputs. Progress and timing go to stderr only, so
//! the written files are a pure function of inputs and flags.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use hda_core::csvio::{
    read_detections, read_ground_truth, read_vector, write_accuracy, write_cdr_stream,
    write_correlation, write_detection_counts, write_detections, write_filter_report,
    write_ground_truth, write_hotspots, write_smc_matrix, write_su_summary, write_top_shares,
    write_validation, write_vector,
};
use hda_core::{
    attach_su, csm, detect_home, detection_counts, generate_network, generate_users, gi_star,
    median_su_by_tower, population_vector, population_vector_from_homes, smc, su_csm_correlation,
    su_filter, su_summary, top_share_percentiles, Algorithm, AlgorithmSpec, Classification,
    Confidence, CorrelationPoint, Error, GeneratorConfig, HomeDetection, NightWindow, SmcResult,
    SuThreshold, TowerNetwork, TraceAccumulator, WindowSet,
};

use crate::{
    Cli, Command, CompareArgs, DetectArgs, FilterArgs, GenerateArgs, HotspotArgs, StatsArgs,
    ValidateArgs,
};

pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(Error::Io(e))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CmdResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CmdResult {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| usage(format!("--threads: {e}")))?;
    }
    let started = Instant::now();
    match &cli.command {
        Command::Generate(args) => generate(&cli.out, cli.force, args)?,
        Command::Detect(args) => detect(&cli.out, args)?,
        Command::Compare(args) => compare(&cli.out, args)?,
        Command::Validate(args) => validate(&cli.out, args)?,
        Command::Filter(args) => filter(&cli.out, args)?,
        Command::Hotspot(args) => hotspot(&cli.out, args)?,
        Command::Stats(args) => stats(&cli.out, args)?,
    }
    eprintln!("done in {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn generate(out: &Path, force: bool, args: &GenerateArgs) -> CmdResult {
    let text = fs::read_to_string(&args.config)?;
    let mut config = GeneratorConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if out.exists() && out.read_dir()?.next().is_some() && !force {
        return Err(CliError::Data(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!(
                "output directory `{}` is not empty; pass --force to write anyway",
                out.display()
            ),
        ))));
    }
    fs::create_dir_all(out)?;

    let network = generate_network(&config)?;
    let truth = generate_users(&config, &network)?;
    fs::write(out.join("config.txt"), config.to_key_values())?;
    network.write_csv(File::create(out.join("towers.csv"))?)?;
    write_ground_truth(&truth, &network, File::create(out.join("ground_truth.csv"))?)?;
    let records = write_cdr_stream(
        &config,
        &network,
        &truth,
        File::create(out.join("cdr.csv"))?,
    )?;

    write_run_info(
        out,
        "generate",
        &[
            ("config", args.config.display().to_string()),
            ("seed", config.seed.to_string()),
            ("towers", config.n_towers.to_string()),
            ("users", config.n_users.to_string()),
            ("records", records.to_string()),
        ],
    )?;
    eprintln!(
        "generate: {records} records, {} users, {} towers -> {}",
        config.n_users,
        config.n_towers,
        out.display()
    );
    Ok(())
}

fn detect(out: &Path, args: &DetectArgs) -> CmdResult {
    let algorithms = parse_algorithms(&args.algorithms)?;
    let network = TowerNetwork::read_csv_path(&args.towers)?;
    let windows = match &args.months {
        Some(spec) => parse_months(spec)?,
        None => infer_months(&args.cdr)?,
    };
    fs::create_dir_all(out)?;

    let mut acc = TraceAccumulator::new(&network, &windows, NightWindow::default());
    acc.ingest_csv(BufReader::with_capacity(1 << 20, File::open(&args.cdr)?))?;
    let (traces, report) = acc.finish();
    for err in &report.error_sample {
        eprintln!(
            "warning: {}: line {}: {}",
            args.cdr.display(),
            err.line,
            err.reason
        );
    }
    if report.malformed > 0 {
        eprintln!("warning: {} malformed lines skipped", report.malformed);
    }
    let present: BTreeSet<&str> = traces.iter().map(|t| t.month().label()).collect();
    for window in windows.windows() {
        if !present.contains(window.label()) {
            eprintln!("warning: month {} has no records", window.label());
        }
    }

    let mut info = vec![
        ("cdr".to_string(), args.cdr.display().to_string()),
        ("towers".to_string(), args.towers.display().to_string()),
        ("months".to_string(), window_span(&windows)),
        ("parsed".to_string(), report.parsed.to_string()),
        ("malformed".to_string(), report.malformed.to_string()),
        (
            "dropped_out_of_window".to_string(),
            report.dropped_out_of_window.to_string(),
        ),
    ];
    for &algorithm in &algorithms {
        let spec = AlgorithmSpec::new(algorithm);
        let detected: Result<Vec<_>, Error> = traces
            .par_iter()
            .map(|trace| detect_home(trace, &spec, &network))
            .collect();
        let mut detections: Vec<HomeDetection> = detected?.into_iter().flatten().collect();
        attach_su(&mut detections, &network)?;
        let file = format!("detections_{}.csv", algorithm.name());
        write_detections(&detections, File::create(out.join(&file))?)?;
        if detections.is_empty() {
            eprintln!("warning: no detections for {algorithm}");
        }
        eprintln!("detect: {algorithm} -> {} homes", detections.len());
        info.push((
            format!("detections_{}", algorithm.name()),
            detections.len().to_string(),
        ));
    }
    write_run_info_owned(out, "detect", &info)?;
    Ok(())
}

fn compare(out: &Path, args: &CompareArgs) -> CmdResult {
    let by_algo = group_detections(read_all_detections(&args.detections)?);
    if by_algo.len() < 2 {
        return Err(CliError::Data(Error::EmptyInput(
            "comparison needs detections from at least two algorithms",
        )));
    }
    let algorithms: Vec<Algorithm> = by_algo.keys().copied().collect();
    let months: BTreeSet<&String> = by_algo.values().flat_map(|m| m.keys()).collect();

    let mut rows: Vec<(String, Algorithm, Algorithm, SmcResult)> = Vec::new();
    for &month in &months {
        for (i, &a) in algorithms.iter().enumerate() {
            for &b in &algorithms[i + 1..] {
                let da = by_algo[&a].get(month).map(|v| v.as_slice()).unwrap_or(&[]);
                let db = by_algo[&b].get(month).map(|v| v.as_slice()).unwrap_or(&[]);
                match smc(da, db) {
                    Ok(r) => rows.push((month.clone(), a, b, r)),
                    Err(Error::EmptyCommonSet) => {
                        eprintln!("warning: {a} vs {b} in {month}: no users in common");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    for (i, &a) in algorithms.iter().enumerate() {
        for &b in &algorithms[i + 1..] {
            let da = by_algo[&a].values().flatten();
            let db = by_algo[&b].values().flatten();
            match smc(da, db) {
                Ok(r) => rows.push(("all".to_string(), a, b, r)),
                Err(Error::EmptyCommonSet) => {
                    eprintln!("warning: {a} vs {b}: no users in common in any month");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(Error::EmptyCommonSet));
    }

    fs::create_dir_all(out)?;
    write_smc_matrix(&rows, File::create(out.join("smc_matrix.csv"))?)?;
    write_run_info(
        out,
        "compare",
        &[
            ("inputs", join_paths(&args.detections)),
            ("algorithms", join_names(&algorithms)),
            ("rows", rows.len().to_string()),
        ],
    )?;
    eprintln!("compare: {} SMC rows", rows.len());
    Ok(())
}

fn validate(out: &Path, args: &ValidateArgs) -> CmdResult {
    let network = TowerNetwork::read_csv_path(&args.towers)?;
    let by_algo = group_detections(read_all_detections(&args.detections)?);

    let (reference, truth_map) = match (&args.truth, &args.reference) {
        (Some(path), None) => {
            let truth = read_ground_truth(BufReader::new(File::open(path)?))?;
            let vector =
                population_vector_from_homes(truth.iter().map(|(_, h)| h.as_str()), &network)?;
            let map: HashMap<String, String> = truth.into_iter().collect();
            (vector, Some(map))
        }
        (None, Some(path)) => (
            read_vector(BufReader::new(File::open(path)?), &network)?,
            None,
        ),
        (Some(_), Some(_)) => return Err(usage("pass either --truth or --reference, not both")),
        (None, None) => return Err(usage("one of --truth or --reference is required")),
    };

    let mut csm_rows: Vec<(String, Algorithm, f64, u64)> = Vec::new();
    let mut acc_rows: Vec<(String, Algorithm, f64, u64)> = Vec::new();
    for (&algorithm, months) in &by_algo {
        for (month, dets) in months {
            let vector = population_vector(dets, &network)?;
            csm_rows.push((
                month.clone(),
                algorithm,
                csm(&vector, &reference)?,
                dets.len() as u64,
            ));
            if let Some(truth) = &truth_map {
                acc_rows.push((
                    month.clone(),
                    algorithm,
                    accuracy_of(dets, truth)?,
                    dets.len() as u64,
                ));
            }
        }
        let pooled = months.values().flatten();
        let vector = population_vector(pooled, &network)?;
        let n: u64 = months.values().map(|v| v.len() as u64).sum();
        csm_rows.push(("all".to_string(), algorithm, csm(&vector, &reference)?, n));
        if let Some(truth) = &truth_map {
            acc_rows.push((
                "all".to_string(),
                algorithm,
                accuracy_of(months.values().flatten(), truth)?,
                n,
            ));
        }
    }

    fs::create_dir_all(out)?;
    write_validation(&csm_rows, File::create(out.join("validation.csv"))?)?;
    let mut written = vec!["validation.csv"];
    if truth_map.is_some() {
        write_accuracy(&acc_rows, File::create(out.join("accuracy.csv"))?)?;
        written.push("accuracy.csv");
    }
    write_run_info(
        out,
        "validate",
        &[
            ("inputs", join_paths(&args.detections)),
            ("towers", args.towers.display().to_string()),
            ("rows", csm_rows.len().to_string()),
            ("written", written.join(",")),
        ],
    )?;
    eprintln!("validate: {} rows -> {}", csm_rows.len(), written.join(", "));
    Ok(())
}

fn filter(out: &Path, args: &FilterArgs) -> CmdResult {
    if !args.max_su_km.is_finite() || args.max_su_km <= 0.0 {
        return Err(usage(format!(
            "--max-su-km must be a positive number, got {}",
            args.max_su_km
        )));
    }
    let detections = read_detections(BufReader::new(File::open(&args.detections)?))?;
    let threshold = SuThreshold::from_km(args.max_su_km)?;
    let total = detections.len();
    let (kept, dropped) = su_filter(detections, threshold)?;

    fs::create_dir_all(out)?;
    write_detections(&kept, File::create(out.join("detections_filtered.csv"))?)?;
    write_filter_report(
        threshold.max_su_m(),
        kept.len() as u64,
        dropped,
        File::create(out.join("filter_report.csv"))?,
    )?;
    write_run_info(
        out,
        "filter",
        &[
            ("detections", args.detections.display().to_string()),
            ("threshold_m", format!("{}", threshold.max_su_m())),
            ("kept", kept.len().to_string()),
            ("dropped", dropped.to_string()),
        ],
    )?;
    eprintln!("filter: kept {}/{total}, dropped {dropped}", kept.len());
    Ok(())
}

fn hotspot(out: &Path, args: &HotspotArgs) -> CmdResult {
    let confidence = Confidence::from_level(args.confidence).map_err(|e| usage(e.to_string()))?;
    if !args.band_m.is_finite() || args.band_m < 0.0 {
        return Err(usage(format!(
            "--band-m must be a non-negative number, got {}",
            args.band_m
        )));
    }
    let network = TowerNetwork::read_csv_path(&args.towers)?;
    let vector = read_vector(BufReader::new(File::open(&args.vector)?), &network)?;
    let rows = gi_star(&vector, &network, args.band_m, confidence)?;
    let hot = rows
        .iter()
        .filter(|r| r.classification == Classification::Hot)
        .count();
    let cold = rows
        .iter()
        .filter(|r| r.classification == Classification::Cold)
        .count();

    fs::create_dir_all(out)?;
    write_hotspots(&rows, File::create(out.join("hotspots.csv"))?)?;
    write_run_info(
        out,
        "hotspot",
        &[
            ("vector", args.vector.display().to_string()),
            ("towers", args.towers.display().to_string()),
            ("band_m", format!("{}", args.band_m)),
            ("confidence", format!("{}", confidence.level())),
            ("hot", hot.to_string()),
            ("cold", cold.to_string()),
        ],
    )?;
    eprintln!("hotspot: {hot} hot, {cold} cold of {} towers", rows.len());
    Ok(())
}

fn stats(out: &Path, args: &StatsArgs) -> CmdResult {
    if args.cdr.is_none() && args.detections.is_empty() {
        return Err(usage("nothing to do: pass --cdr and/or --detections"));
    }
    fs::create_dir_all(out)?;
    let mut info: Vec<(String, String)> = Vec::new();
    let mut written: Vec<&str> = Vec::new();

    if let Some(cdr) = &args.cdr {
        let towers = args
            .towers
            .as_ref()
            .ok_or_else(|| usage("--towers is required with --cdr"))?;
        let network = TowerNetwork::read_csv_path(towers)?;
        let windows = match &args.months {
            Some(spec) => parse_months(spec)?,
            None => infer_months(cdr)?,
        };
        let mut acc = TraceAccumulator::new(&network, &windows, NightWindow::default());
        acc.ingest_csv(BufReader::with_capacity(1 << 20, File::open(cdr)?))?;
        let (traces, report) = acc.finish();
        let rows = top_share_percentiles(&traces)?;
        write_top_shares(&rows, File::create(out.join("top_shares.csv"))?)?;
        written.push("top_shares.csv");
        info.push(("cdr".to_string(), cdr.display().to_string()));
        info.push(("parsed".to_string(), report.parsed.to_string()));
        info.push(("traces".to_string(), traces.len().to_string()));
    }

    if !args.detections.is_empty() {
        let detections = read_all_detections(&args.detections)?;
        write_detection_counts(
            &detection_counts(&detections),
            File::create(out.join("counts.csv"))?,
        )?;
        let su_rows = su_summary(&detections)?;
        write_su_summary(&su_rows, File::create(out.join("su_summary.csv"))?)?;
        let by_tower = median_su_by_tower(&detections)?;
        write_vector(&by_tower, true, File::create(out.join("su_by_tower.csv"))?)?;
        written.extend(["counts.csv", "su_summary.csv", "su_by_tower.csv"]);
        info.push(("detections".to_string(), detections.len().to_string()));

        if let Some(truth_path) = &args.truth {
            let towers = args
                .towers
                .as_ref()
                .ok_or_else(|| usage("--towers is required with --truth"))?;
            let network = TowerNetwork::read_csv_path(towers)?;
            let truth = read_ground_truth(BufReader::new(File::open(truth_path)?))?;
            let reference =
                population_vector_from_homes(truth.iter().map(|(_, h)| h.as_str()), &network)?;

            let medians: HashMap<(Algorithm, &str), f64> = su_rows
                .iter()
                .map(|r| ((r.algorithm, r.month.as_str()), r.median_su_m))
                .collect();
            let mut groups: BTreeMap<(Algorithm, &str), Vec<&HomeDetection>> = BTreeMap::new();
            for det in &detections {
                groups
                    .entry((det.algorithm, det.month.as_str()))
                    .or_default()
                    .push(det);
            }
            let mut points = Vec::with_capacity(groups.len());
            for ((algorithm, month), dets) in &groups {
                let vector = population_vector(dets.iter().copied(), &network)?;
                points.push(CorrelationPoint {
                    algorithm: *algorithm,
                    month: (*month).to_string(),
                    median_su_m: medians[&(*algorithm, *month)],
                    csm_deg: csm(&vector, &reference)?,
                });
            }
            let exclude: Vec<String> = args
                .exclude_months
                .as_deref()
                .map(|s| s.split(',').map(|m| m.trim().to_string()).collect())
                .unwrap_or_default();
            let result = su_csm_correlation(&points, &exclude)?;
            write_correlation(&result, File::create(out.join("correlation.csv"))?)?;
            written.push("correlation.csv");
            info.push(("correlation_r".to_string(), format!("{}", result.r)));
            info.push((
                "correlation_points".to_string(),
                result.n_points.to_string(),
            ));
        }
    }

    write_run_info_owned(out, "stats", &info)?;
    eprintln!("stats: wrote {}", written.join(", "));
    Ok(())
}

/// Fraction of detections whose top tower matches the user's true home.
fn accuracy_of<'a>(
    detections: impl IntoIterator<Item = &'a HomeDetection>,
    truth: &HashMap<String, String>,
) -> Result<f64, CliError> {
    let mut n = 0u64;
    let mut correct = 0u64;
    for det in detections {
        let home = truth
            .get(&det.user_id)
            .ok_or_else(|| Error::UnknownUser(det.user_id.clone()))?;
        n += 1;
        if det.l1().tower_id == *home {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

fn read_all_detections(paths: &[PathBuf]) -> Result<Vec<HomeDetection>, CliError> {
    let mut all = Vec::new();
    for path in paths {
        all.extend(read_detections(BufReader::new(File::open(path)?))?);
    }
    if all.is_empty() {
        return Err(CliError::Data(Error::EmptyInput(
            "no detection rows in the input files",
        )));
    }
    Ok(all)
}

fn group_detections(
    all: Vec<HomeDetection>,
) -> BTreeMap<Algorithm, BTreeMap<String, Vec<HomeDetection>>> {
    let mut by_algo: BTreeMap<Algorithm, BTreeMap<String, Vec<HomeDetection>>> = BTreeMap::new();
    for det in all {
        by_algo
            .entry(det.algorithm)
            .or_default()
            .entry(det.month.clone())
            .or_default()
            .push(det);
    }
    by_algo
}

fn parse_algorithms(spec: &str) -> Result<Vec<Algorithm>, CliError> {
    if spec == "all" {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut picked = BTreeSet::new();
    for name in spec.split(',') {
        let name = name.trim();
        let algorithm = Algorithm::from_name(name).ok_or_else(|| {
            usage(format!(
                "unknown algorithm `{name}`; expected `all` or a comma-separated subset of: {}",
                Algorithm::ALL.map(|a| a.name()).join(", ")
            ))
        })?;
        picked.insert(algorithm);
    }
    Ok(picked.into_iter().collect())
}

fn parse_months(spec: &str) -> Result<WindowSet, CliError> {
    WindowSet::from_labels(spec).map_err(|e| usage(format!("--months: {e}")))
}

/// One extra pass over the file to find the span of full months the data
/// covers. Unparseable rows are skipped here; ingest reports them later.
fn infer_months(cdr: &Path) -> Result<WindowSet, CliError> {
    let reader = BufReader::with_capacity(1 << 20, File::open(cdr)?);
    hda_core::csvio::infer_month_windows(reader).map_err(CliError::Data)
}

fn window_span(windows: &WindowSet) -> String {
    let first = windows.get(0).label();
    let last = windows.get(windows.len() - 1).label();
    if first == last {
        first.to_string()
    } else {
        format!("{first}:{last}")
    }
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_names(algorithms: &[Algorithm]) -> String {
    algorithms
        .iter()
        .map(|a| a.name())
        .collect::<Vec<_>>()
        .join(",")
}

fn write_run_info(out: &Path, command: &str, entries: &[(&str, String)]) -> CmdResult {
    let owned: Vec<(String, String)> = entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    write_run_info_owned(out, command, &owned)
}

fn write_run_info_owned(out: &Path, command: &str, entries: &[(String, String)]) -> CmdResult {
    let mut text = format!("command={command}\n");
    for (key, value) in entries {
        let _ = writeln!(text, "{key}={value}");
    }
    fs::write(out.join("run_info.txt"), text)?;
    Ok(())
}
