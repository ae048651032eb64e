//! Report model and rendering: Δ-vs-baseline table, example-similarity
//! table, and a manifest that pins every input (seed, parameters, template
//! ids, corpus checksums) so a report is reproducible from its own record.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DomainScope, LanguagePair};
use crate::error::{Error, Result};
use crate::harness::{ConfigResult, FailureCounts, GridConfig};
use crate::llm::BackendConfig;
use crate::metrics::ChrfParams;
use crate::prompting::ShotMode;
use crate::util::sha256_hex;

/// Bumped when the serialized report shape changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One (mode × domain) cell of the quality table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub domain: DomainScope,
    pub chrf: f64,
    /// Relative change vs baseline: `100 · (chrf − baseline) / baseline`.
    pub delta_pct: f64,
    /// Absolute change vs baseline in chrF points.
    pub delta_points: f64,
    pub failures: FailureCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub mode: ShotMode,
    pub cells: Vec<DeltaCell>,
}

/// One (mode × domain) cell of the example-similarity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCell {
    pub domain: DomainScope,
    /// Mean over segments of the mean chrF between the test source and its
    /// example sources.
    pub mean_chrf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub mode: ShotMode,
    pub cells: Vec<SimilarityCell>,
}

/// Where an index came from and what was in it when the grid ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRef {
    pub path: String,
    /// SHA-256 of the index manifest, which itself pins the index payload.
    pub manifest_sha256: String,
    pub k1: f64,
    pub b: f64,
    pub n_docs: u64,
}

/// Everything needed to rerun the grid and get byte-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub seed: u64,
    pub lang: LanguagePair,
    pub chrf: ChrfParams,
    pub sentence_average: bool,
    pub backend: BackendConfig,
    pub modes: Vec<ShotMode>,
    pub domains: Vec<DomainScope>,
    pub test_set: String,
    pub test_set_sha256: String,
    pub n_segments: usize,
    /// Domain tag → index provenance.
    pub indexes: BTreeMap<String, IndexRef>,
    /// Prompt role → template id (`baseline` → `A`, `fewshot` → `B`).
    pub template_ids: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub lang: LanguagePair,
    pub baseline_chrf: f64,
    pub delta_table: Vec<DeltaRow>,
    pub similarity_table: Vec<SimilarityRow>,
    pub manifest: ReportManifest,
}

impl EvalReport {
    /// Canonical JSON serialization: pretty-printed, trailing newline,
    /// byte-stable for identical runs.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("report JSON: {e}")))?;
        let version = value.get("schema_version").and_then(serde_json::Value::as_u64);
        if version != Some(u64::from(REPORT_SCHEMA_VERSION)) {
            return Err(Error::Config(format!(
                "report schema version {} (this build reads {})",
                version.map_or_else(|| "missing".to_string(), |v| v.to_string()),
                REPORT_SCHEMA_VERSION
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("report JSON: {e}")))
    }
}

fn check_comparable(results: &[&ConfigResult]) -> Result<()> {
    let Some(first) = results.first() else {
        return Ok(());
    };
    for r in results {
        if r.config.lang != first.config.lang
            || r.config.test_set != first.config.test_set
            || r.config.chrf != first.config.chrf
            || r.config.sentence_average != first.config.sentence_average
        {
            return Err(Error::Config(
                "results are not comparable: language pair, test set, and chrF \
                 parameters must match across the grid"
                    .into(),
            ));
        }
    }
    Ok(())
}

/// Group per-cell results into rows (modes in first-appearance order, cells
/// in per-mode appearance order), mapping each cell through `make`.
fn group_rows<C>(results: &[ConfigResult], make: impl Fn(&ConfigResult) -> C) -> Vec<(ShotMode, Vec<C>)> {
    let mut rows: Vec<(ShotMode, Vec<C>)> = Vec::new();
    for result in results {
        let mode = result.config.mode;
        let cell = make(result);
        match rows.iter_mut().find(|(m, _)| *m == mode) {
            Some((_, cells)) => cells.push(cell),
            None => rows.push((mode, vec![cell])),
        }
    }
    rows
}

/// Build the quality table: a baseline row (identically zero deltas, one
/// cell per domain seen in `results`) followed by one row per non-baseline
/// mode. Errors if the baseline corpus chrF is zero — relative change is
/// undefined there.
pub fn delta_table(results: &[ConfigResult], baseline: &ConfigResult) -> Result<Vec<DeltaRow>> {
    let mut all: Vec<&ConfigResult> = vec![baseline];
    all.extend(results);
    check_comparable(&all)?;
    if baseline.corpus_chrf == 0.0 {
        return Err(Error::ZeroBaseline);
    }

    let rows = group_rows(results, |r| DeltaCell {
        domain: r.config.domain,
        chrf: r.corpus_chrf,
        delta_pct: 100.0 * (r.corpus_chrf - baseline.corpus_chrf) / baseline.corpus_chrf,
        delta_points: r.corpus_chrf - baseline.corpus_chrf,
        failures: r.failures,
    });

    let baseline_domains: Vec<DomainScope> = match rows.first() {
        Some((_, cells)) => cells.iter().map(|c| c.domain).collect(),
        None => vec![baseline.config.domain],
    };
    let baseline_row = DeltaRow {
        mode: ShotMode::Baseline,
        cells: baseline_domains
            .into_iter()
            .map(|domain| DeltaCell {
                domain,
                chrf: baseline.corpus_chrf,
                delta_pct: 0.0,
                delta_points: 0.0,
                failures: baseline.failures,
            })
            .collect(),
    };

    let mut table = vec![baseline_row];
    table.extend(rows.into_iter().map(|(mode, cells)| DeltaRow { mode, cells }));
    Ok(table)
}

/// Build the example-similarity table. The baseline has no examples and is
/// omitted; cells without any example-carrying segment are skipped too.
pub fn similarity_table(results: &[ConfigResult]) -> Vec<SimilarityRow> {
    let with_examples: Vec<ConfigResult> = results
        .iter()
        .filter(|r| r.mean_example_similarity.is_some())
        .cloned()
        .collect();
    group_rows(&with_examples, |r| SimilarityCell {
        domain: r.config.domain,
        mean_chrf: r.mean_example_similarity.expect("filtered to Some"),
    })
    .into_iter()
    .map(|(mode, cells)| SimilarityRow { mode, cells })
    .collect()
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

fn index_ref(dir: &Path) -> Result<IndexRef> {
    let manifest_path = dir.join("manifest.json");
    let bytes = std::fs::read(&manifest_path).map_err(|source| Error::Io {
        path: manifest_path.clone(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::CorruptIndex(format!("{}: {e}", manifest_path.display())))?;
    let field = |ptr: &str| {
        value
            .pointer(ptr)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Error::CorruptIndex(format!("{}: missing {ptr}", manifest_path.display())))
    };
    Ok(IndexRef {
        path: dir.display().to_string(),
        manifest_sha256: sha256_hex(&bytes),
        k1: field("/params/k1")?,
        b: field("/params/b")?,
        n_docs: field("/n_docs")? as u64,
    })
}

pub(crate) fn build_report(
    grid: &GridConfig,
    baseline: &ConfigResult,
    results: &[ConfigResult],
) -> Result<EvalReport> {
    let mut indexes = BTreeMap::new();
    for domain in &grid.domains {
        indexes.insert(domain.to_string(), index_ref(&grid.indexes[domain])?);
    }
    let manifest = ReportManifest {
        seed: grid.seed,
        lang: grid.lang.clone(),
        chrf: grid.chrf,
        sentence_average: grid.sentence_average,
        backend: grid.backend.clone(),
        modes: grid.modes.clone(),
        domains: grid.domains.clone(),
        test_set: grid.test_set.display().to_string(),
        test_set_sha256: file_sha256(&grid.test_set)?,
        n_segments: baseline.per_segment.len(),
        indexes,
        template_ids: [
            ("baseline".to_string(), "A".to_string()),
            ("fewshot".to_string(), "B".to_string()),
        ]
        .into(),
    };
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        lang: grid.lang.clone(),
        baseline_chrf: baseline.corpus_chrf,
        delta_table: delta_table(results, baseline)?,
        similarity_table: similarity_table(results),
        manifest,
    })
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str("|---");
    for _ in 1..header.len() {
        out.push_str("|---:");
    }
    out.push_str("|\n");
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

/// Render the human-readable report. Deterministic: no timestamps, fixed
/// number formats (deltas signed to one decimal, similarities to one
/// decimal, chrF to two).
pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str(&format!("- Language pair: {}\n", report.lang.display_upper()));
    out.push_str(&format!("- Test segments: {}\n", report.manifest.n_segments));
    out.push_str(&format!("- Baseline corpus chrF: {:.2}\n\n", report.baseline_chrf));

    let domains: Vec<String> = report
        .delta_table
        .first()
        .map(|row| row.cells.iter().map(|c| c.domain.to_string()).collect())
        .unwrap_or_default();
    let mut header = vec!["Configuration".to_string()];
    header.extend(domains.iter().cloned());

    out.push_str("## Translation quality: Δ chrF vs baseline (relative %)\n\n");
    let pct_rows: Vec<Vec<String>> = report
        .delta_table
        .iter()
        .map(|row| {
            let mut cells = vec![row.mode.label()];
            cells.extend(row.cells.iter().map(|c| format!("{:+.1}%", c.delta_pct)));
            cells
        })
        .collect();
    out.push_str(&markdown_table(&header, &pct_rows));

    out.push_str("\n## Translation quality: Δ chrF vs baseline (absolute points)\n\n");
    let point_rows: Vec<Vec<String>> = report
        .delta_table
        .iter()
        .map(|row| {
            let mut cells = vec![row.mode.label()];
            cells.extend(row.cells.iter().map(|c| format!("{:+.2}", c.delta_points)));
            cells
        })
        .collect();
    out.push_str(&markdown_table(&header, &point_rows));

    out.push_str("\n## Corpus chrF\n\n");
    let chrf_rows: Vec<Vec<String>> = report
        .delta_table
        .iter()
        .map(|row| {
            let mut cells = vec![row.mode.label()];
            cells.extend(row.cells.iter().map(|c| format!("{:.2}", c.chrf)));
            cells
        })
        .collect();
    out.push_str(&markdown_table(&header, &chrf_rows));

    if !report.similarity_table.is_empty() {
        out.push_str("\n## Example similarity: mean chrF, test source vs example sources\n\n");
        let sim_domains: Vec<String> = report.similarity_table[0]
            .cells
            .iter()
            .map(|c| c.domain.to_string())
            .collect();
        let mut sim_header = vec!["Configuration".to_string()];
        sim_header.extend(sim_domains);
        let sim_rows: Vec<Vec<String>> = report
            .similarity_table
            .iter()
            .map(|row| {
                let mut cells = vec![row.mode.label()];
                cells.extend(row.cells.iter().map(|c| format!("{:.1}", c.mean_chrf)));
                cells
            })
            .collect();
        out.push_str(&markdown_table(&sim_header, &sim_rows));
    }

    out.push_str("\n## Failures\n\n");
    let fail_header: Vec<String> = ["Configuration", "Domain", "parse_failed", "transport_failed", "example_shortfall"]
        .map(String::from)
        .to_vec();
    let fail_rows: Vec<Vec<String>> = report
        .delta_table
        .iter()
        .flat_map(|row| {
            row.cells.iter().map(move |c| {
                vec![
                    row.mode.label(),
                    c.domain.to_string(),
                    c.failures.parse_failed.to_string(),
                    c.failures.transport_failed.to_string(),
                    c.failures.example_shortfall.to_string(),
                ]
            })
        })
        .collect();
    out.push_str(&markdown_table(&fail_header, &fail_rows));

    let m = &report.manifest;
    out.push_str("\n## Manifest\n\n");
    out.push_str(&format!("- seed: {}\n", m.seed));
    out.push_str(&format!(
        "- chrF: max_n={}, beta={}, strip_whitespace={}, aggregation={}\n",
        m.chrf.max_n,
        m.chrf.beta,
        m.chrf.strip_ws,
        if m.sentence_average { "sentence-average" } else { "micro-average" },
    ));
    out.push_str(&format!(
        "- backend: {}\n",
        serde_json::to_string(&m.backend).expect("backend serializes")
    ));
    out.push_str(&format!(
        "- templates: baseline={}, fewshot={}\n",
        m.template_ids["baseline"], m.template_ids["fewshot"]
    ));
    out.push_str(&format!("- test set: {} (sha256 {})\n", m.test_set, m.test_set_sha256));
    for (domain, idx) in &m.indexes {
        out.push_str(&format!(
            "- index {}: {} (k1={}, b={}, docs={}, manifest sha256 {})\n",
            domain, idx.path, idx.k1, idx.b, idx.n_docs, idx.manifest_sha256
        ));
    }
    out
}
