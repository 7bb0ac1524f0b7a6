//! CSV and JSON artifacts with atomic writes.
//!
//! Column orders:
//! - trajectory: `t,l2_norm,seminorm,E,I,D,r,int_l2`
//! - grid function: `node,x,value`
//! - depth curve: `delta,d_hat`
//! - matrix: one row per line, no header

use std::path::Path;

use serde::Serialize;

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::mesh_space::{GridFunction, Mesh1D};
use crate::variational::DepthCurve;

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 8] = ["t", "l2_norm", "seminorm", "E", "I", "D", "r", "int_l2"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn trajectory_csv(rec: &TrajectoryRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for s in &rec.samples {
        let row = [s.t, s.l2_norm, s.seminorm, s.energy, s.nehari, s.dissipation, s.residual, s.int_l2];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    finish(w)
}

pub fn grid_csv(mesh: &Mesh1D<f64>, values: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "x", "value"]).map_err(csv_err)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), mesh.x(i + 1).to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Reads `node,x,value` rows; nodes must be `1..=M` in order and match the mesh.
pub fn read_grid_csv(mesh: Mesh1D<f64>, text: &str) -> Result<GridFunction<f64>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node", "x", "value"] {
        return Err(Error::Config(format!("grid CSV header must be node,x,value, got {headers:?}")));
    }
    let mut values = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("bad number in grid CSV row {}", k + 1)))
        };
        let node = parse(0)?;
        if node != (k + 1) as f64 {
            return Err(Error::Config(format!("grid CSV row {} has node {node}", k + 1)));
        }
        if (parse(1)? - mesh.x(k + 1)).abs() > 1e-9 * mesh.length {
            return Err(Error::Config(format!("grid CSV row {} does not match the mesh", k + 1)));
        }
        values.push(parse(2)?);
    }
    GridFunction::new(mesh, values).map_err(|e| Error::Config(e.to_string()))
}

pub fn depth_csv(curve: &DepthCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delta", "d_hat"]).map_err(csv_err)?;
    for (d, v) in curve.deltas.iter().zip(&curve.values) {
        w.write_record([d.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

/// Row-major dense matrix.
pub fn matrix_csv(a: &[f64], n: usize) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in a.chunks(n) {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    finish(w)
}

/// Pretty JSON with `schema_version` and `kind` merged into the top-level object.
pub fn json_document<T: Serialize>(kind: &str, body: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(body).map_err(|e| Error::numeric(e.to_string()))?;
    let obj = match v.as_object_mut() {
        Some(o) => o,
        None => return Err(Error::numeric("JSON body must be an object")),
    };
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    out.insert("kind".into(), kind.into());
    out.append(obj);
    let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(out)).map_err(|e| Error::numeric(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let mesh = Mesh1D::new(2.0, 5).unwrap();
        let vals = vec![0.1, -2.5, 3.0e-7, 4.0, 1.0 / 3.0];
        let bytes = grid_csv(&mesh, &vals).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("node,x,value\n1,"));
        let g = read_grid_csv(mesh, &text).unwrap();
        assert_eq!(g.values, vals);
    }

    #[test]
    fn grid_rejects_wrong_mesh() {
        let mesh = Mesh1D::new(1.0, 4).unwrap();
        let text = String::from_utf8(grid_csv(&mesh, &[1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        assert!(read_grid_csv(Mesh1D::new(2.0, 4).unwrap(), &text).is_err());
        assert!(read_grid_csv(Mesh1D::new(1.0, 5).unwrap(), &text).is_err());
    }

    #[test]
    fn json_has_schema_version() {
        #[derive(Serialize)]
        struct B {
            a: f64,
        }
        let v: serde_json::Value = serde_json::from_slice(&json_document("test", &B { a: 1.5 }).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "test");
        assert_eq!(v["a"], 1.5);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }

    #[test]
    fn matrix_rows() {
        let s = String::from_utf8(matrix_csv(&[1.0, 2.0, 3.0, 4.0], 2).unwrap()).unwrap();
        assert_eq!(s, "1,2\n3,4\n");
    }
}
