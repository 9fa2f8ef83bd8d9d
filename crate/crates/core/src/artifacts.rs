//! Output files: CSV tables, JSON reports, SVG plots and the binary table
//! cache. Every file carries an audit header with the resolved model and
//! run settings.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aoi::Age;
use crate::error::{Result, VoiError};
use crate::lqr::LqrSchedule;
use crate::model::ModelSpec;
use crate::sim::TrajectoryRecord;
use crate::solver::path::{MismatchGrid, PathDiagnostics};
use crate::solver::{PathValueTable, RestrictedValueTable};

pub mod plot;

/// Settings that reproduce an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub model: ModelSpec,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub policy: Option<String>,
    #[serde(default)]
    pub settings: serde_json::Value,
}

impl AuditHeader {
    pub fn new(command: &str, model: &ModelSpec) -> Self {
        AuditHeader {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            model: model.clone(),
            seed: None,
            runs: None,
            policy: None,
            settings: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("audit header serializes")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// CSV writer whose first line is `# audit: {json}`.
pub fn csv_writer(path: &Path, audit: &AuditHeader) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = create(path)?;
    writeln!(out, "# audit: {}", audit.to_json())?;
    Ok(csv::Writer::from_writer(out))
}

/// Reader that skips the audit line.
pub fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

/// Reads back the audit header of a CSV, JSON, SVG or cache artifact.
pub fn read_audit(path: &Path) -> Result<AuditHeader> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(CACHE_MAGIC) {
        let (header, _) = split_cache(&bytes)?;
        return Ok(header.audit);
    }
    let text = String::from_utf8_lossy(&bytes);
    if let Some(rest) = text.strip_prefix("# audit: ") {
        let line = rest.lines().next().unwrap_or_default();
        return Ok(serde_json::from_str(line)?);
    }
    if let Some(start) = text.find("<![CDATA[") {
        let body = &text[start + 9..];
        let end = body
            .find("]]>")
            .ok_or_else(|| VoiError::Cache("unterminated SVG metadata".into()))?;
        return Ok(serde_json::from_str(&body[..end])?);
    }
    #[derive(Deserialize)]
    struct Wrapped {
        audit: AuditHeader,
    }
    let wrapped: Wrapped = serde_json::from_slice(&bytes)?;
    Ok(wrapped.audit)
}

/// `{"audit": ..., "<key>": ...}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, audit: &AuditHeader, key: &str, value: &T) -> Result<()> {
    let mut map = serde_json::Map::new();
    map.insert("audit".into(), serde_json::to_value(audit)?);
    map.insert(key.into(), serde_json::to_value(value)?);
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &serde_json::Value::Object(map))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn vector_columns(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (0..n).map(|i| format!("{prefix}[{i}]")).collect()
    }
}

fn push_vector(row: &mut Vec<String>, v: &nalgebra::DVector<f64>) {
    row.extend(v.iter().map(|x| x.to_string()));
}

/// Full per-step log. Vector quantities get one column per component; the
/// controller age is written as -1 before the first reception.
pub fn write_trajectory_csv(path: &Path, audit: &AuditHeader, rec: &TrajectoryRecord) -> Result<()> {
    let mut w = csv_writer(path, audit)?;
    let n = rec.final_state.len();
    let m = rec.steps.first().map_or(0, |s| s.u.len());
    let mut header = vec!["k".to_string()];
    header.extend(vector_columns("x", n));
    header.extend(vector_columns("u", m));
    header.extend(vector_columns("w", n));
    header.extend(["tau", "zeta", "eta", "informative", "delta"].map(String::from));
    header.extend(vector_columns("x_check", n));
    header.extend(vector_columns("x_hat", n));
    header.extend(
        [
            "e_norm",
            "e_tilde_norm",
            "voi",
            "clamped",
            "comm_cost",
            "error_cost",
            "regulation_cost",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for s in &rec.steps {
        let mut row = vec![s.k.to_string()];
        push_vector(&mut row, &s.x);
        push_vector(&mut row, &s.u);
        push_vector(&mut row, &s.w);
        row.push(s.tau.to_string());
        row.push(s.zeta.to_string());
        row.push(s.eta.to_signed().to_string());
        row.push(u8::from(s.informative).to_string());
        row.push(u8::from(s.delta).to_string());
        push_vector(&mut row, &s.x_check);
        push_vector(&mut row, &s.x_hat);
        row.push(s.e.norm().to_string());
        row.push(s.e_tilde.norm().to_string());
        row.push(s.voi.to_string());
        row.push(u8::from(s.clamped).to_string());
        row.push(s.comm_cost.to_string());
        row.push(s.error_cost.to_string());
        row.push(s.regulation_cost.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The three per-figure CSVs: error norms, ages, and VoI with events.
pub fn write_figure_csvs(dir: &Path, audit: &AuditHeader, rec: &TrajectoryRecord) -> Result<Vec<PathBuf>> {
    let errors = dir.join("errors.csv");
    let mut w = csv_writer(&errors, audit)?;
    w.write_record(["k", "e_norm", "e_tilde_norm"])?;
    for s in &rec.steps {
        w.serialize((s.k, s.e.norm(), s.e_tilde.norm()))?;
    }
    w.flush()?;

    let ages = dir.join("ages.csv");
    let mut w = csv_writer(&ages, audit)?;
    w.write_record(["k", "zeta", "eta"])?;
    for s in &rec.steps {
        w.serialize((s.k, s.zeta, s.eta.to_signed()))?;
    }
    w.flush()?;

    let voi = dir.join("voi.csv");
    let mut w = csv_writer(&voi, audit)?;
    w.write_record(["k", "voi", "delta"])?;
    for s in &rec.steps {
        w.serialize((s.k, s.voi, u8::from(s.delta)))?;
    }
    w.flush()?;
    Ok(vec![errors, ages, voi])
}

/// `S_k`, `Gamma_k` traces and the gain norm per step.
pub fn write_riccati_csv(path: &Path, audit: &AuditHeader, sched: &LqrSchedule) -> Result<()> {
    let mut w = csv_writer(path, audit)?;
    w.write_record(["k", "trace_s", "trace_gamma", "gain_norm"])?;
    for k in 0..=sched.horizon() + 1 {
        let gain = if k <= sched.horizon() {
            sched.gain(k).norm().to_string()
        } else {
            String::new()
        };
        w.write_record([
            k.to_string(),
            sched.s(k).trace().to_string(),
            sched.gamma(k).trace().to_string(),
            gain,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-`(k, zeta)` switching thresholds on `|e_tilde|`.
pub fn write_path_thresholds_csv(path: &Path, audit: &AuditHeader, table: &PathValueTable) -> Result<()> {
    let mut w = csv_writer(path, audit)?;
    w.write_record(["k", "zeta", "threshold", "crossings", "non_monotone"])?;
    for k in 0..=table.horizon() {
        for zeta in 0..=table.zeta_cap() {
            let th = table.threshold(k, zeta)?;
            let crossings: Vec<String> = th.crossings.iter().map(|c| c.to_string()).collect();
            w.write_record([
                k.to_string(),
                zeta.to_string(),
                th.value.map(|v| v.to_string()).unwrap_or_default(),
                crossings.join(";"),
                u8::from(th.non_monotone).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format `(k, zeta, eta)` grid of `VoI`, `rho`, `V` and the decision.
pub fn write_restricted_heatmap_csv(path: &Path, audit: &AuditHeader, table: &RestrictedValueTable) -> Result<()> {
    let mut w = csv_writer(path, audit)?;
    w.write_record(["k", "zeta", "eta", "voi", "rho", "value", "transmit"])?;
    for k in 0..=table.horizon() {
        for zeta in 0..=table.zeta_cap() {
            let etas = (zeta..=table.horizon() + 1).map(Age::Finite).chain([Age::Infinite]);
            for eta in etas {
                let voi = table.voi(k, zeta, eta)?;
                w.write_record([
                    k.to_string(),
                    zeta.to_string(),
                    eta.to_signed().to_string(),
                    voi.to_string(),
                    table.rho(k, zeta, eta)?.to_string(),
                    table.value(k, zeta, eta)?.to_string(),
                    u8::from(voi >= 0.0).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Smallest finite controller age that triggers, per `(k, zeta)`.
pub fn write_restricted_thresholds_csv(path: &Path, audit: &AuditHeader, table: &RestrictedValueTable) -> Result<()> {
    let mut w = csv_writer(path, audit)?;
    w.write_record(["k", "zeta", "eta_threshold", "transmit_at_inf"])?;
    for k in 0..=table.horizon() {
        for zeta in 0..=table.zeta_cap() {
            w.write_record([
                k.to_string(),
                zeta.to_string(),
                table.eta_threshold(k, zeta).map(|e| e.to_string()).unwrap_or_default(),
                u8::from(table.transmit(k, zeta, Age::Infinite)?).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const CACHE_MAGIC: &[u8; 8] = b"VOITBL01";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheHeader {
    kind: String,
    audit: AuditHeader,
    meta: serde_json::Value,
    arrays: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RestrictedMeta {
    horizon: usize,
    zeta_cap: usize,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct PathMeta {
    horizon: usize,
    zeta_cap: usize,
    theta: f64,
    grid: MismatchGrid,
    quad_weight: Vec<f64>,
    initial_var: f64,
    two_point: bool,
    diagnostics: PathDiagnostics,
}

fn write_cache(path: &Path, header: &CacheHeader, arrays: &[&[f64]]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut out = create(path)?;
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for a in arrays {
        for v in *a {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn split_cache(bytes: &[u8]) -> Result<(CacheHeader, Vec<Vec<f64>>)> {
    let bad = |m: &str| VoiError::Cache(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
        return Err(bad("missing magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: CacheHeader = serde_json::from_slice(body)?;
    let mut data = &bytes[16 + len..];
    let mut arrays = Vec::with_capacity(header.arrays.len());
    for &n in &header.arrays {
        let need = n * 8;
        if data.len() < need {
            return Err(bad("truncated data"));
        }
        arrays.push(
            data[..need]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
        data = &data[need..];
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok((header, arrays))
}

fn read_cache(path: &Path, kind: &str) -> Result<(CacheHeader, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let (header, arrays) = split_cache(&bytes)?;
    if header.kind != kind {
        return Err(VoiError::Cache(format!(
            "expected a {kind} table, found {}",
            header.kind
        )));
    }
    if arrays.len() != 3 {
        return Err(VoiError::Cache("expected value, voi and rho arrays".into()));
    }
    Ok((header, arrays))
}

pub fn write_restricted_cache(path: &Path, audit: &AuditHeader, table: &RestrictedValueTable) -> Result<()> {
    let meta = RestrictedMeta {
        horizon: table.horizon,
        zeta_cap: table.zeta_cap,
        theta: table.theta,
    };
    let header = CacheHeader {
        kind: "restricted".into(),
        audit: audit.clone(),
        meta: serde_json::to_value(meta)?,
        arrays: vec![table.value.len(), table.voi.len(), table.rho.len()],
    };
    write_cache(path, &header, &[&table.value, &table.voi, &table.rho])
}

pub fn read_restricted_cache(path: &Path) -> Result<(AuditHeader, RestrictedValueTable)> {
    let (header, mut arrays) = read_cache(path, "restricted")?;
    let meta: RestrictedMeta = serde_json::from_value(header.meta)?;
    let rows = (meta.zeta_cap + 1) * (meta.horizon + 3);
    if arrays[0].len() != (meta.horizon + 2) * rows || arrays[1].len() != arrays[0].len() {
        return Err(VoiError::Cache(
            "restricted table size does not match its header".into(),
        ));
    }
    let rho = arrays.pop().expect("three arrays");
    let voi = arrays.pop().expect("three arrays");
    let value = arrays.pop().expect("three arrays");
    Ok((
        header.audit,
        RestrictedValueTable {
            horizon: meta.horizon,
            zeta_cap: meta.zeta_cap,
            theta: meta.theta,
            value,
            voi,
            rho,
        },
    ))
}

pub fn write_path_cache(path: &Path, audit: &AuditHeader, table: &PathValueTable) -> Result<()> {
    let meta = PathMeta {
        horizon: table.horizon,
        zeta_cap: table.zeta_cap,
        theta: table.theta,
        grid: table.grid,
        quad_weight: table.quad_weight.clone(),
        initial_var: table.initial_var,
        two_point: table.two_point,
        diagnostics: table.diagnostics.clone(),
    };
    let header = CacheHeader {
        kind: "path".into(),
        audit: audit.clone(),
        meta: serde_json::to_value(meta)?,
        arrays: vec![table.value.len(), table.voi.len(), table.rho.len()],
    };
    write_cache(path, &header, &[&table.value, &table.voi, &table.rho])
}

pub fn read_path_cache(path: &Path) -> Result<(AuditHeader, PathValueTable)> {
    let (header, mut arrays) = read_cache(path, "path")?;
    let meta: PathMeta = serde_json::from_value(header.meta)?;
    let len = (meta.horizon + 2) * (meta.zeta_cap + 1) * (meta.grid.points_per_side + 1);
    if arrays.iter().any(|a| a.len() != len) || meta.quad_weight.len() != meta.horizon + 1 {
        return Err(VoiError::Cache("path table size does not match its header".into()));
    }
    let rho = arrays.pop().expect("three arrays");
    let voi = arrays.pop().expect("three arrays");
    let value = arrays.pop().expect("three arrays");
    Ok((
        header.audit,
        PathValueTable {
            horizon: meta.horizon,
            zeta_cap: meta.zeta_cap,
            theta: meta.theta,
            grid: meta.grid,
            quad_weight: meta.quad_weight,
            value,
            voi,
            rho,
            initial_var: meta.initial_var,
            two_point: meta.two_point,
            diagnostics: meta.diagnostics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::solve_riccati;
    use crate::solver::{solve_path_dp, solve_restricted_dp, PathSolverConfig};

    fn small() -> (ModelSpec, crate::model::SystemModel) {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.N = 12;
        let m = spec.validate().unwrap();
        (spec, m)
    }

    #[test]
    fn caches_round_trip_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, m) = small();
        let sched = solve_riccati(&m).unwrap();
        let audit = AuditHeader::new("solve", &spec);

        let r = solve_restricted_dp(&m, &sched).unwrap();
        let p = dir.path().join("r.bin");
        write_restricted_cache(&p, &audit, &r).unwrap();
        let (a, back) = read_restricted_cache(&p).unwrap();
        assert_eq!(a, audit);
        assert_eq!(back.value.len(), r.value.len());
        for (x, y) in back.voi.iter().zip(&r.voi) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(read_path_cache(&p).is_err());

        let cfg = PathSolverConfig {
            points_per_side: 40,
            ..Default::default()
        };
        let t = solve_path_dp(&m, &sched, &cfg).unwrap();
        let p = dir.path().join("p.bin");
        write_path_cache(&p, &audit, &t).unwrap();
        let (_, back) = read_path_cache(&p).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.value), bits(&t.value));
        assert_eq!(bits(&back.voi), bits(&t.voi));
        assert_eq!(back.grid, t.grid);
        assert_eq!(back.quad_weight, t.quad_weight);

        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_path_cache(&p), Err(VoiError::Cache(_))));
    }

    #[test]
    fn csv_audit_is_recoverable() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, m) = small();
        let sched = solve_riccati(&m).unwrap();
        let mut audit = AuditHeader::new("solve", &spec);
        audit.seed = Some(42);
        let p = dir.path().join("riccati.csv");
        write_riccati_csv(&p, &audit, &sched).unwrap();
        assert_eq!(read_audit(&p).unwrap(), audit);
        let mut rdr = csv_reader(&p).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 14);
        assert_eq!(&rows[13][2], "0");

        let j = dir.path().join("r.json");
        write_json(&j, &audit, "report", &serde_json::json!({"a": 1})).unwrap();
        assert_eq!(read_audit(&j).unwrap(), audit);
    }
}
