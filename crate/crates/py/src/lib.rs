//! Python bindings over the detection pipeline. The module mirrors the CLI
//! verbs as functions operating on plain lists and a couple of thin classes,
//! so a notebook can generate a world, detect homes, and score the results
//! without shelling out.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hda_core::csvio::{
    infer_month_windows, read_detections, read_ground_truth, write_cdr_stream, write_detections,
    write_ground_truth,
};
use hda_core::{
    attach_su, csm, detect_home, gi_star, pearson, population_vector_from_homes, smc, su_filter,
    Algorithm, AlgorithmSpec, Confidence, Error, GeneratorConfig, HomeDetection, NightWindow,
    PopulationVector, RankedTower, SuThreshold, TowerNetwork, TraceAccumulator, WindowSet,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(_) => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Tower layout with id lookup and metric queries.
#[pyclass(frozen)]
struct Network {
    inner: TowerNetwork,
}

#[pymethods]
impl Network {
    #[new]
    fn new(towers: Vec<(String, f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: TowerNetwork::new(towers).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: TowerNetwork::read_csv_path(path).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.towers().iter().map(|t| t.id.clone()).collect()
    }

    fn distance(&self, a: &str, b: &str) -> PyResult<f64> {
        self.inner.distance_by_id(a, b).map_err(to_py)
    }

    fn within_radius(&self, center: &str, radius_m: f64) -> PyResult<Vec<String>> {
        let idx = self.inner.require(center).map_err(to_py)?;
        Ok(self
            .inner
            .within_radius(idx, radius_m)
            .into_iter()
            .map(|i| self.inner.id(i).to_string())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Network({} towers)", self.inner.len())
    }
}

/// One detected home: the top-ranked tower with up to two runners-up and
/// the detection's spatial uncertainty in meters.
#[pyclass(frozen, get_all, from_py_object)]
#[derive(Clone)]
struct Detection {
    user_id: String,
    month: String,
    algorithm: String,
    l1: String,
    p1: u32,
    l2: Option<String>,
    p2: Option<u32>,
    l3: Option<String>,
    p3: Option<u32>,
    su_m: Option<f64>,
}

#[pymethods]
impl Detection {
    fn __repr__(&self) -> String {
        format!(
            "Detection({} {} {} -> {})",
            self.user_id, self.month, self.algorithm, self.l1
        )
    }
}

fn from_core(d: &HomeDetection) -> Detection {
    let get = |i: usize| d.ranked.get(i);
    Detection {
        user_id: d.user_id.clone(),
        month: d.month.clone(),
        algorithm: d.algorithm.name().to_string(),
        l1: d.l1().tower_id.clone(),
        p1: d.l1().score,
        l2: get(1).map(|r| r.tower_id.clone()),
        p2: get(1).map(|r| r.score),
        l3: get(2).map(|r| r.tower_id.clone()),
        p3: get(2).map(|r| r.score),
        su_m: d.su_m,
    }
}

fn to_core(d: &Detection) -> PyResult<HomeDetection> {
    let algorithm = Algorithm::from_name(&d.algorithm)
        .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm `{}`", d.algorithm)))?;
    let mut ranked = vec![RankedTower {
        tower_id: d.l1.clone(),
        score: d.p1,
    }];
    for (tower, score) in [(&d.l2, d.p2), (&d.l3, d.p3)] {
        match (tower, score) {
            (Some(t), Some(s)) => ranked.push(RankedTower {
                tower_id: t.clone(),
                score: s,
            }),
            (None, None) => {}
            _ => {
                return Err(PyValueError::new_err(
                    "tower and score must be present together",
                ))
            }
        }
    }
    Ok(HomeDetection {
        user_id: d.user_id.clone(),
        month: d.month.clone(),
        algorithm,
        ranked,
        su_m: d.su_m,
    })
}

fn to_core_all(dets: &[Detection]) -> PyResult<Vec<HomeDetection>> {
    dets.iter().map(to_core).collect()
}

/// Write a synthetic world (towers, ground truth, CDR stream, and the
/// effective config) into `out_dir`; returns the number of records.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir, force = false))]
fn generate_world(config_text: &str, out_dir: PathBuf, force: bool) -> PyResult<u64> {
    let config = GeneratorConfig::parse(config_text).map_err(to_py)?;
    if !force && out_dir.is_dir() && fs::read_dir(&out_dir)?.next().is_some() {
        return Err(PyIOError::new_err(format!(
            "output directory `{}` is not empty; pass force=True to write anyway",
            out_dir.display()
        )));
    }
    fs::create_dir_all(&out_dir)?;
    let network = hda_core::generate_network(&config).map_err(to_py)?;
    let truth = hda_core::generate_users(&config, &network).map_err(to_py)?;
    fs::write(out_dir.join("config.txt"), config.to_key_values())?;
    network
        .write_csv(File::create(out_dir.join("towers.csv"))?)
        .map_err(to_py)?;
    write_ground_truth(&truth, &network, File::create(out_dir.join("ground_truth.csv"))?)
        .map_err(to_py)?;
    write_cdr_stream(&config, &network, &truth, File::create(out_dir.join("cdr.csv"))?)
        .map_err(to_py)
}

fn parse_algorithms(names: Option<Vec<String>>) -> PyResult<Vec<Algorithm>> {
    match names {
        None => Ok(Algorithm::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| {
                Algorithm::from_name(n)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm `{n}`")))
            })
            .collect(),
    }
}

fn open_buffered(path: &Path) -> PyResult<BufReader<File>> {
    Ok(BufReader::with_capacity(1 << 20, File::open(path)?))
}

/// Run home detection over a CDR file. `algorithms` defaults to all five,
/// `months` takes `YYYY-MM` or `YYYY-MM:YYYY-MM` and defaults to the months
/// present in the file. Detections come back with uncertainty attached.
#[pyfunction]
#[pyo3(signature = (cdr_path, network, algorithms = None, months = None))]
fn detect_homes(
    cdr_path: PathBuf,
    network: &Network,
    algorithms: Option<Vec<String>>,
    months: Option<String>,
) -> PyResult<Vec<Detection>> {
    let algorithms = parse_algorithms(algorithms)?;
    let windows = match months {
        Some(spec) => WindowSet::from_labels(&spec).map_err(to_py)?,
        None => infer_month_windows(open_buffered(&cdr_path)?).map_err(to_py)?,
    };
    let mut acc = TraceAccumulator::new(&network.inner, &windows, NightWindow::default());
    acc.ingest_csv(open_buffered(&cdr_path)?).map_err(to_py)?;
    let (traces, _) = acc.finish();

    let mut detections = Vec::new();
    for algorithm in algorithms {
        let spec = AlgorithmSpec::new(algorithm);
        for trace in &traces {
            if let Some(d) = detect_home(trace, &spec, &network.inner).map_err(to_py)? {
                detections.push(d);
            }
        }
    }
    attach_su(&mut detections, &network.inner).map_err(to_py)?;
    Ok(detections.iter().map(from_core).collect())
}

/// Read a detections CSV produced by this library or the CLI.
#[pyfunction]
fn read_detections_csv(path: PathBuf) -> PyResult<Vec<Detection>> {
    let dets = read_detections(open_buffered(&path)?).map_err(to_py)?;
    Ok(dets.iter().map(from_core).collect())
}

/// Write detections in the same CSV format the CLI produces.
#[pyfunction]
fn write_detections_csv(detections: Vec<Detection>, path: PathBuf) -> PyResult<()> {
    let dets = to_core_all(&detections)?;
    write_detections(&dets, File::create(path)?).map_err(to_py)
}

/// Fraction of (user, month) keys detected by both sides that agree on the
/// top tower; also returns how many keys were shared.
#[pyfunction]
fn smc_score(a: Vec<Detection>, b: Vec<Detection>) -> PyResult<(f64, u64)> {
    let result = smc(&to_core_all(&a)?, &to_core_all(&b)?).map_err(to_py)?;
    Ok((result.smc, result.n_common))
}

/// Angle in degrees between two per-tower count vectors.
#[pyfunction]
fn csm_degrees(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    let x = PopulationVector::new(x).map_err(to_py)?;
    let y = PopulationVector::new(y).map_err(to_py)?;
    csm(&x, &y).map_err(to_py)
}

/// Per-tower counts of top-ranked homes, aligned with `network.ids()`.
#[pyfunction]
fn population_counts(detections: Vec<Detection>, network: &Network) -> PyResult<Vec<f64>> {
    let dets = to_core_all(&detections)?;
    let v = hda_core::population_vector(&dets, &network.inner).map_err(to_py)?;
    Ok(v.counts().to_vec())
}

/// Per-tower counts of true homes from a ground-truth CSV, aligned with
/// `network.ids()`.
#[pyfunction]
fn truth_counts(path: PathBuf, network: &Network) -> PyResult<Vec<f64>> {
    let rows = read_ground_truth(open_buffered(&path)?).map_err(to_py)?;
    let v = population_vector_from_homes(rows.iter().map(|(_, home)| home.as_str()), &network.inner)
        .map_err(to_py)?;
    Ok(v.counts().to_vec())
}

/// Keep detections whose uncertainty is strictly under `max_su_km`;
/// returns the kept list and the number dropped.
#[pyfunction]
fn filter_by_su(detections: Vec<Detection>, max_su_km: f64) -> PyResult<(Vec<Detection>, u64)> {
    let threshold = SuThreshold::from_km(max_su_km).map_err(to_py)?;
    let (kept, dropped) = su_filter(to_core_all(&detections)?, threshold).map_err(to_py)?;
    Ok((kept.iter().map(from_core).collect(), dropped))
}

/// Classify every tower as a hot spot, cold spot, or neither at the given
/// confidence level (0.90, 0.95, or 0.99). Returns
/// `(tower_id, value, z, classification)` rows aligned with `network.ids()`.
#[pyfunction]
#[pyo3(signature = (values, network, band_m = 10_000.0, confidence = 0.90))]
fn hotspots(
    values: Vec<f64>,
    network: &Network,
    band_m: f64,
    confidence: f64,
) -> PyResult<Vec<(String, f64, f64, String)>> {
    let confidence = Confidence::from_level(confidence).map_err(to_py)?;
    let field = PopulationVector::new(values).map_err(to_py)?;
    let rows = gi_star(&field, &network.inner, band_m, confidence).map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.tower_id, r.value, r.z, r.classification.name().to_string()))
        .collect())
}

/// Pearson correlation coefficient of two equal-length samples.
#[pyfunction]
fn pearson_r(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    pearson(&xs, &ys).map_err(to_py)
}

/// Names of the five detection algorithms, in canonical order.
#[pyfunction]
fn algorithm_names() -> Vec<&'static str> {
    Algorithm::ALL.map(|a| a.name()).to_vec()
}

#[pymodule]
fn hda_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Detection>()?;
    m.add_function(wrap_pyfunction!(generate_world, m)?)?;
    m.add_function(wrap_pyfunction!(detect_homes, m)?)?;
    m.add_function(wrap_pyfunction!(read_detections_csv, m)?)?;
    m.add_function(wrap_pyfunction!(write_detections_csv, m)?)?;
    m.add_function(wrap_pyfunction!(smc_score, m)?)?;
    m.add_function(wrap_pyfunction!(csm_degrees, m)?)?;
    m.add_function(wrap_pyfunction!(population_counts, m)?)?;
    m.add_function(wrap_pyfunction!(truth_counts, m)?)?;
    m.add_function(wrap_pyfunction!(filter_by_su, m)?)?;
    m.add_function(wrap_pyfunction!(hotspots, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm_names, m)?)?;
    Ok(())
}
