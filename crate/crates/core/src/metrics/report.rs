use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::deletion::DeletionEvaluation;
use super::MetricsError;

/// Metrics for one target detection. Metric fields are `None` when the row
/// was skipped; `status` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub image_id: String,
    pub target_idx: usize,
    pub class_id: usize,
    pub deletion: Option<f64>,
    pub d_deletion: Option<f64>,
    pub min_subset_pct: Option<f64>,
    pub d_min_subset_pct: Option<f64>,
    pub pg: Option<bool>,
    pub ebpg: Option<f64>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deletion_curve: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_deletion_curve: Option<Vec<f64>>,
}

impl MetricRow {
    pub fn ok(
        image_id: impl Into<String>,
        target_idx: usize,
        class_id: usize,
        deletion: &DeletionEvaluation,
        pg: bool,
        ebpg: Option<f64>,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            target_idx,
            class_id,
            deletion: Some(deletion.plain.auc),
            d_deletion: Some(deletion.d.auc),
            min_subset_pct: Some(deletion.min_subset_pct),
            d_min_subset_pct: Some(deletion.d_min_subset_pct),
            pg: Some(pg),
            ebpg,
            status: "ok".into(),
            deletion_curve: Some(deletion.plain.scores.clone()),
            d_deletion_curve: Some(deletion.d.scores.clone()),
        }
    }

    pub fn skipped(image_id: impl Into<String>, target_idx: usize, class_id: usize, reason: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            target_idx,
            class_id,
            deletion: None,
            d_deletion: None,
            min_subset_pct: None,
            d_min_subset_pct: None,
            pg: None,
            ebpg: None,
            status: format!("skipped: {}", reason.into()),
            deletion_curve: None,
            d_deletion_curve: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Means over the rows that carry a value; `pg` is the hit rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub deletion: Option<f64>,
    pub d_deletion: Option<f64>,
    pub min_subset_pct: Option<f64>,
    pub d_min_subset_pct: Option<f64>,
    pub pg: Option<f64>,
    pub ebpg: Option<f64>,
}

impl MetricSummary {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a MetricRow>) -> Self {
        let rows: Vec<&MetricRow> = rows.into_iter().filter(|r| r.is_ok()).collect();
        let mean = |f: &dyn Fn(&MetricRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Self {
            count: rows.len(),
            deletion: mean(&|r| r.deletion),
            d_deletion: mean(&|r| r.d_deletion),
            min_subset_pct: mean(&|r| r.min_subset_pct),
            d_min_subset_pct: mean(&|r| r.d_min_subset_pct),
            pg: mean(&|r| r.pg.map(|h| if h { 1.0 } else { 0.0 })),
            ebpg: mean(&|r| r.ebpg),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub per_class: BTreeMap<usize, MetricSummary>,
    pub overall: MetricSummary,
}

pub const CSV_HEADER: [&str; 10] = [
    "image_id",
    "target_idx",
    "class_id",
    "deletion",
    "d_deletion",
    "min_subset_pct",
    "d_min_subset_pct",
    "pg",
    "ebpg",
    "status",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    image_id: &'a str,
    target_idx: usize,
    class_id: usize,
    deletion: Option<f64>,
    d_deletion: Option<f64>,
    min_subset_pct: Option<f64>,
    d_min_subset_pct: Option<f64>,
    pg: Option<u8>,
    ebpg: Option<f64>,
    status: &'a str,
}

#[derive(Deserialize)]
struct CsvRecord {
    image_id: String,
    target_idx: usize,
    class_id: usize,
    deletion: Option<f64>,
    d_deletion: Option<f64>,
    min_subset_pct: Option<f64>,
    d_min_subset_pct: Option<f64>,
    pg: Option<u8>,
    ebpg: Option<f64>,
    status: String,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<MetricRow>) -> Self {
        let mut classes: BTreeMap<usize, Vec<&MetricRow>> = BTreeMap::new();
        for r in &rows {
            classes.entry(r.class_id).or_default().push(r);
        }
        let per_class = classes
            .into_iter()
            .map(|(c, rs)| (c, MetricSummary::of(rs)))
            .collect();
        let overall = MetricSummary::of(&rows);
        Self { rows, per_class, overall }
    }

    /// Concatenate reports and recompute the summaries.
    pub fn merge(reports: impl IntoIterator<Item = MetricReport>) -> Self {
        Self::from_rows(reports.into_iter().flat_map(|r| r.rows).collect())
    }

    /// One row per target after a header line; `pg` is written as 0/1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MetricsError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.serialize(CsvRow {
                image_id: &r.image_id,
                target_idx: r.target_idx,
                class_id: r.class_id,
                deletion: r.deletion,
                d_deletion: r.d_deletion,
                min_subset_pct: r.min_subset_pct,
                d_min_subset_pct: r.d_min_subset_pct,
                pg: r.pg.map(u8::from),
                ebpg: r.ebpg,
                status: &r.status,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows from a CSV written by [`MetricReport::write_csv`]; curves are
    /// not stored in CSV and come back as `None`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in r.deserialize::<CsvRecord>() {
            let c = rec?;
            rows.push(MetricRow {
                image_id: c.image_id,
                target_idx: c.target_idx,
                class_id: c.class_id,
                deletion: c.deletion,
                d_deletion: c.d_deletion,
                min_subset_pct: c.min_subset_pct,
                d_min_subset_pct: c.d_min_subset_pct,
                pg: c.pg.map(|v| v != 0),
                ebpg: c.ebpg,
                status: c.status,
                deletion_curve: None,
                d_deletion_curve: None,
            });
        }
        Ok(Self::from_rows(rows))
    }

    pub fn to_csv_string(&self) -> Result<String, MetricsError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String, MetricsError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
