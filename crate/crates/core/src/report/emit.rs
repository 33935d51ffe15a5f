use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, EvaluationReport, ReportError};
use crate::embedding_stats::IsoGasLine;

/// Base names of the files a full report can write, without extension.
pub const FILE_NAMES: [&str; 8] =
    ["table1", "table2", "table3", "alignment", "iso_gas", "tsne_points", "ellipses", "distances"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "md",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "markdown",
        })
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(format!("unknown format `{s}` (json, csv, markdown)")),
        }
    }
}

enum Cell {
    Text(String),
    Int(usize),
    Num(Option<f64>),
    /// `mean (std)` in markdown; two columns elsewhere.
    Pair(f64, f64),
}

struct Table {
    /// `(markdown header, csv header)`; pair cells take two csv headers joined by `|`.
    headers: Vec<(String, String)>,
    rows: Vec<Vec<Cell>>,
}

fn h(md: &str, csv: &str) -> (String, String) {
    (md.to_string(), csv.to_string())
}

fn md_num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn render_csv(t: &Table) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let headers: Vec<&str> = t.headers.iter().flat_map(|(_, c)| c.split('|')).collect();
    w.write_record(&headers).map_err(|e| ReportError::Serialize(e.to_string()))?;
    for row in &t.rows {
        let mut rec = Vec::new();
        for c in row {
            match c {
                Cell::Text(s) => rec.push(s.clone()),
                Cell::Int(i) => rec.push(i.to_string()),
                Cell::Num(v) => rec.push(v.map(|v| v.to_string()).unwrap_or_default()),
                Cell::Pair(a, b) => {
                    rec.push(a.to_string());
                    rec.push(b.to_string());
                }
            }
        }
        w.write_record(&rec).map_err(|e| ReportError::Serialize(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Serialize(e.to_string()))
}

fn render_markdown(t: &Table) -> String {
    let mut out = String::new();
    let headers: Vec<&str> = t.headers.iter().map(|(m, _)| m.as_str()).collect();
    out.push_str(&format!("| {} |\n", headers.join(" | ")));
    out.push_str(&format!("|{}\n", "---|".repeat(headers.len())));
    for row in &t.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Text(s) => s.clone(),
                Cell::Int(i) => i.to_string(),
                Cell::Num(Some(v)) => md_num(*v),
                Cell::Num(None) => "-".into(),
                Cell::Pair(a, b) => format!("{} ({})", md_num(*a), md_num(*b)),
            })
            .collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

fn write_one<T: Serialize + ?Sized>(
    dir: &Path,
    name: &str,
    format: OutputFormat,
    data: &T,
    table: impl FnOnce() -> Table,
) -> Result<String, ReportError> {
    let file = format!("{name}.{}", format.extension());
    let text = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(data).map_err(|e| ReportError::Serialize(format!("{file}: {e}")))? + "\n"
        }
        OutputFormat::Csv => render_csv(&table())?,
        OutputFormat::Markdown => render_markdown(&table()),
    };
    let path = dir.join(&file);
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(file)
}

/// Write every data-bearing section of `report` whose base name is in
/// `only` (all when `None`). Returns the file names written.
pub fn write_section_files(
    report: &EvaluationReport,
    dir: &Path,
    format: OutputFormat,
    only: Option<&[&str]>,
) -> Result<Vec<String>, ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let wanted = |name: &str| only.is_none_or(|o| o.contains(&name));
    let mut files = Vec::new();

    if wanted("table1") {
        let rows = &report.table1.rows;
        files.push(write_one(dir, "table1", format, rows, || Table {
            headers: vec![
                h("Type", "dataset"),
                h("Dataset", "condition"),
                h("Videos", "videos"),
                h("Hand Confidence", "hand_confidence"),
                h("FID", "fid"),
                h("FVD", "fvd"),
                h("CLIP Similarity", "clip_similarity"),
            ],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        dataset_cell(r.dataset, format),
                        condition_cell(r.condition, format),
                        Cell::Int(r.videos),
                        Cell::Num(r.hand_confidence),
                        Cell::Num(r.fid),
                        Cell::Num(r.fvd),
                        Cell::Num(r.clip_similarity),
                    ]
                })
                .collect(),
        })?);
    }

    if let (true, Some(rows)) = (wanted("table2"), &report.table2.data) {
        files.push(write_one(dir, "table2", format, rows, || Table {
            headers: vec![
                h("Type", "dataset"),
                h("Dataset", "condition"),
                h("Videos", "videos"),
                h("Velocity (1st deriv.)", "velocity_mean|velocity_std"),
                h("Acceleration (2nd deriv.)", "acceleration_mean|acceleration_std"),
                h("Jerk (3rd deriv.)", "jerk_mean|jerk_std"),
            ],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        dataset_cell(r.dataset, format),
                        condition_cell(r.condition, format),
                        Cell::Int(r.videos),
                        Cell::Pair(r.velocity.mean, r.velocity.std),
                        Cell::Pair(r.acceleration.mean, r.acceleration.std),
                        Cell::Pair(r.jerk.mean, r.jerk.std),
                    ]
                })
                .collect(),
        })?);
    }

    if let (true, Some(rows)) = (wanted("table3"), &report.table3.data) {
        files.push(write_one(dir, "table3", format, rows, || {
            let mut headers = vec![
                h("Finger", "finger"),
                h("MP Joint", "mp_joint"),
                h("Type", "type"),
                h("KL Divergence", "kl"),
                h("EMD", "emd_deg"),
            ];
            if format == OutputFormat::Csv {
                headers.extend([h("", "emd_bins"), h("", "real_angles"), h("", "synth_angles")]);
            }
            Table {
                headers,
                rows: rows
                    .iter()
                    .map(|p| {
                        let mut r = vec![
                            Cell::Text(p.joint.finger.label().into()),
                            Cell::Int(p.joint.joint_landmark()),
                            Cell::Text(p.joint.joint_name.label().into()),
                            Cell::Num(Some(p.kl)),
                            Cell::Num(Some(p.emd_deg)),
                        ];
                        if format == OutputFormat::Csv {
                            r.extend([Cell::Num(Some(p.emd_bins)), Cell::Int(p.real_angles), Cell::Int(p.synth_angles)]);
                        }
                        r
                    })
                    .collect(),
            }
        })?);
    }

    if let Some(a) = &report.alignment.data {
        if wanted("alignment") {
            let alphas: Vec<f64> = report.provenance.config.alphas.clone();
            files.push(write_one(dir, "alignment", format, &a.rows, || {
                let mut headers = vec![
                    h("Video", "video_id"),
                    h("Condition", "condition"),
                    h("Reference", "reference"),
                    h("VAS", "vas"),
                    h("PAS", "pas"),
                ];
                headers.extend(alphas.iter().map(|a| (format!("GAS (α={a})"), format!("gas_{a}"))));
                Table {
                    headers,
                    rows: a
                        .rows
                        .iter()
                        .map(|r| {
                            let mut cells = vec![
                                Cell::Text(r.video_id.clone()),
                                condition_cell(r.condition, format),
                                Cell::Text(r.reference.clone()),
                                Cell::Num(Some(r.vas)),
                                Cell::Num(Some(r.pas)),
                            ];
                            cells.extend(r.gas.iter().map(|g| Cell::Num(Some(g.gas))));
                            cells
                        })
                        .collect(),
                }
            })?);
        }
        if wanted("iso_gas") {
            files.push(write_one(dir, "iso_gas", format, &a.iso_gas, || Table {
                headers: vec![
                    h("α", "alpha"),
                    h("GAS", "gas"),
                    h("Form", "form"),
                    h("Intercept", "intercept"),
                    h("Slope", "slope"),
                    h("VAS", "vas"),
                ],
                rows: a
                    .iso_gas
                    .iter()
                    .map(|l| match *l {
                        IsoGasLine::Sloped { alpha, gas, intercept, slope } => vec![
                            Cell::Num(Some(alpha)),
                            Cell::Num(Some(gas)),
                            Cell::Text("sloped".into()),
                            Cell::Num(Some(intercept)),
                            Cell::Num(Some(slope)),
                            Cell::Num(None),
                        ],
                        IsoGasLine::Vertical { alpha, gas, vas } => vec![
                            Cell::Num(Some(alpha)),
                            Cell::Num(Some(gas)),
                            Cell::Text("vertical".into()),
                            Cell::Num(None),
                            Cell::Num(None),
                            Cell::Num(Some(vas)),
                        ],
                    })
                    .collect(),
            })?);
        }
    }

    if let Some(d) = &report.diversity.data {
        if wanted("tsne_points") {
            files.push(write_one(dir, "tsne_points", format, &d.projection, || Table {
                headers: vec![h("Video", "video_id"), h("Type", "dataset"), h("Condition", "condition"), h("x", "x"), h("y", "y")],
                rows: d
                    .projection
                    .iter()
                    .map(|r| {
                        vec![
                            Cell::Text(r.video_id.clone()),
                            dataset_cell(r.dataset, format),
                            condition_cell(r.condition, format),
                            Cell::Num(Some(r.x)),
                            Cell::Num(Some(r.y)),
                        ]
                    })
                    .collect(),
            })?);
        }
        if wanted("ellipses") {
            files.push(write_one(dir, "ellipses", format, &d.ellipses, || Table {
                headers: vec![
                    h("Type", "dataset"),
                    h("Condition", "condition"),
                    h("cx", "cx"),
                    h("cy", "cy"),
                    h("Major", "major"),
                    h("Minor", "minor"),
                    h("Angle (rad)", "angle_rad"),
                ],
                rows: d
                    .ellipses
                    .iter()
                    .map(|e| {
                        vec![
                            dataset_cell(e.dataset, format),
                            condition_cell(e.condition, format),
                            Cell::Num(Some(e.cx)),
                            Cell::Num(Some(e.cy)),
                            Cell::Num(Some(e.major)),
                            Cell::Num(Some(e.minor)),
                            Cell::Num(Some(e.angle_rad)),
                        ]
                    })
                    .collect(),
            })?);
        }
        if wanted("distances") {
            files.push(write_one(dir, "distances", format, &d.distances, || Table {
                headers: vec![
                    h("Condition A", "condition_a"),
                    h("Condition B", "condition_b"),
                    h("Mean", "mean"),
                    h("Std", "std"),
                    h("Pairs", "pairs"),
                ],
                rows: d
                    .distances
                    .iter()
                    .map(|p| {
                        vec![
                            condition_cell(p.a, format),
                            condition_cell(p.b, format),
                            Cell::Num(Some(p.mean)),
                            Cell::Num(Some(p.std)),
                            Cell::Int(p.pairs),
                        ]
                    })
                    .collect(),
            })?);
        }
    }
    Ok(files)
}

fn dataset_cell(side: super::DatasetSide, format: OutputFormat) -> Cell {
    let s = serde_json::to_value(side).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    Cell::Text(if format == OutputFormat::Markdown { side.label().into() } else { s })
}

fn condition_cell(c: crate::data_model::Condition, format: OutputFormat) -> Cell {
    Cell::Text(if format == OutputFormat::Markdown { c.label().into() } else { c.as_str().into() })
}

/// Write all section files, then `provenance.json` listing them.
pub fn write_report(report: &mut EvaluationReport, dir: &Path, format: OutputFormat) -> Result<(), ReportError> {
    write_report_files(report, dir, format, None)
}

/// Write the section files named in `only` (all when `None`), then
/// `provenance.json` listing them.
pub fn write_report_files(
    report: &mut EvaluationReport,
    dir: &Path,
    format: OutputFormat,
    only: Option<&[&str]>,
) -> Result<(), ReportError> {
    let mut files = write_section_files(report, dir, format, only)?;
    files.push("provenance.json".into());
    report.provenance.files = files;
    let path = dir.join("provenance.json");
    let text = serde_json::to_string_pretty(&report.provenance).map_err(|e| ReportError::Serialize(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(io_err(&path))
}
