//! Embedding files: a JSON sidecar describing shape and ids next to a raw
//! little-endian f32 payload (`<name>.json` + `<name>.bin`), or a CSV with an
//! `id,c0,...,c{D-1}` header for hand-authored fixtures.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::read_to_string;
use super::{DataError, EmbeddingKind, EmbeddingMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSidecar {
    pub count: usize,
    pub dim: usize,
    pub dtype: String,
    pub kind: EmbeddingKind,
    pub ids: Vec<String>,
}

/// Load an embedding matrix from a sidecar (`.json`, payload next to it with a
/// `.bin` extension) or a CSV file. CSV carries no kind, so `kind_hint` is
/// required for it; for sidecars a hint that disagrees is a mismatch.
pub fn load_embeddings(path: &Path, kind_hint: Option<EmbeddingKind>) -> Result<EmbeddingMatrix, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let kind = kind_hint.ok_or_else(|| DataError::SchemaViolation {
                field: "kind".into(),
                reason: "CSV embeddings need an explicit kind".into(),
            })?;
            load_csv(path, kind)
        }
        _ => load_sidecar(path, kind_hint),
    }
}

fn load_sidecar(path: &Path, kind_hint: Option<EmbeddingKind>) -> Result<EmbeddingMatrix, DataError> {
    let sidecar: EmbeddingSidecar = serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| DataError::SchemaViolation { field: "sidecar".into(), reason: e.to_string() })?;
    if sidecar.dtype != "f32le" {
        return Err(DataError::SchemaViolation {
            field: "dtype".into(),
            reason: format!("unsupported dtype `{}`", sidecar.dtype),
        });
    }
    if let Some(k) = kind_hint {
        if k != sidecar.kind {
            return Err(DataError::SidecarMismatch(format!(
                "expected kind {k}, sidecar declares {}",
                sidecar.kind
            )));
        }
    }
    if sidecar.ids.len() != sidecar.count {
        return Err(DataError::SidecarMismatch(format!(
            "count {} but {} ids",
            sidecar.count,
            sidecar.ids.len()
        )));
    }
    let bin = path.with_extension("bin");
    let bytes = fs::read(&bin).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(bin.clone())
        } else {
            DataError::Io { path: bin.clone(), source }
        }
    })?;
    let expected = sidecar.count * sidecar.dim * 4;
    if bytes.len() != expected {
        return Err(DataError::SidecarMismatch(format!(
            "count {} x dim {} needs {expected} bytes, payload has {}",
            sidecar.count,
            sidecar.dim,
            bytes.len()
        )));
    }
    let rows = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingMatrix::new(sidecar.ids, sidecar.dim, rows, sidecar.kind)
}

fn load_csv(path: &Path, kind: EmbeddingKind) -> Result<EmbeddingMatrix, DataError> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let schema = |reason: String| DataError::SchemaViolation { field: "csv".into(), reason };
    let header = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
    if header.get(0) != Some("id") || header.len() < 2 {
        return Err(schema("header must be `id,c0,...`".into()));
    }
    let dim = header.len() - 1;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        if rec.len() != dim + 1 {
            return Err(DataError::SidecarMismatch(format!(
                "row {r} has {} values, header declares {dim}",
                rec.len() - 1
            )));
        }
        ids.push(rec[0].to_string());
        for c in 1..=dim {
            let v: f32 = rec[c].trim().parse().map_err(|_| schema(format!("row {r}: `{}` is not a number", &rec[c])))?;
            rows.push(v);
        }
    }
    EmbeddingMatrix::new(ids, dim, rows, kind)
}

/// Write `m` as `<stem>.json` + `<stem>.bin`; `path` names the sidecar.
pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<(), DataError> {
    let sidecar = EmbeddingSidecar {
        count: m.len(),
        dim: m.dim,
        dtype: "f32le".into(),
        kind: m.kind,
        ids: m.ids.clone(),
    };
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DataError::Io { path: p, source }
    };
    fs::write(path, serde_json::to_string(&sidecar).expect("sidecar serializes") + "\n")
        .map_err(io(path))?;
    let bin = path.with_extension("bin");
    let bytes: Vec<u8> = m.rows.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(io(&bin))
}

pub fn write_embeddings_csv(m: &EmbeddingMatrix, path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| DataError::Io { path: path.into(), source: e.into() })?;
    let mut header = vec!["id".to_string()];
    header.extend((0..m.dim).map(|c| format!("c{c}")));
    let csv_err = |e: csv::Error| DataError::Io { path: path.into(), source: e.into() };
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..m.len() {
        let mut rec = vec![m.ids[i].clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sidecar(dir: &Path, count: usize, dim: usize, payload: &[u8]) -> std::path::PathBuf {
        let p = dir.join("e.json");
        let ids: Vec<String> = (0..count).map(|i| format!("v{i}")).collect();
        let s = EmbeddingSidecar { count, dim, dtype: "f32le".into(), kind: EmbeddingKind::Video, ids };
        fs::write(&p, serde_json::to_string(&s).unwrap()).unwrap();
        fs::write(dir.join("e.bin"), payload).unwrap();
        p
    }

    #[test]
    fn loads_3x4() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = (0..12).flat_map(|i| (i as f32).to_le_bytes()).collect();
        let m = load_embeddings(&sidecar(dir.path(), 3, 4, &payload), None).unwrap();
        assert_eq!((m.len(), m.dim), (3, 4));
        assert_eq!(m.row(2), &[8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn short_payload_is_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = sidecar(dir.path(), 3, 4, &[0u8; 40]);
        assert!(matches!(load_embeddings(&p, None), Err(DataError::SidecarMismatch(_))));
    }

    #[test]
    fn nan_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut vals = [1.0f32; 12];
        vals[5] = f32::NAN;
        let payload: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        let p = sidecar(dir.path(), 3, 4, &payload);
        assert!(matches!(load_embeddings(&p, None), Err(DataError::NonFiniteValue { row: 1, col: 1 })));
    }

    #[test]
    fn kind_hint_must_agree() {
        let dir = tempfile::tempdir().unwrap();
        let p = sidecar(dir.path(), 1, 1, &1.0f32.to_le_bytes());
        assert!(matches!(
            load_embeddings(&p, Some(EmbeddingKind::Text)),
            Err(DataError::SidecarMismatch(_))
        ));
    }

    #[test]
    fn csv_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let m = EmbeddingMatrix::new(
            vec!["a#0".into(), "a#5".into()],
            3,
            vec![0.25, -1.5, 3.0, 1e-3, 2.0, -0.125],
            EmbeddingKind::FrameImage,
        )
        .unwrap();
        let bin = dir.path().join("m.json");
        let csv_path = dir.path().join("m.csv");
        write_embeddings(&m, &bin).unwrap();
        write_embeddings_csv(&m, &csv_path).unwrap();
        assert_eq!(load_embeddings(&bin, None).unwrap(), m);
        assert_eq!(load_embeddings(&csv_path, Some(EmbeddingKind::FrameImage)).unwrap(), m);
        assert!(load_embeddings(&csv_path, None).is_err());
    }
}
