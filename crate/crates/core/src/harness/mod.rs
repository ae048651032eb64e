//! Experiment orchestration: run one (shot mode × domain) configuration or
//! a whole grid, then aggregate corpus chrF, Δ-vs-baseline, and
//! example-similarity tables into a report.
//!
//! Determinism contract: with mock backends, identical configs, seeds, and
//! corpora produce byte-identical report files. Everything that could
//! wobble is pinned — segments are processed and reduced in test-set order
//! regardless of request parallelism, RAND sampling derives a per-segment
//! seed from the run seed, and reports contain no timestamps.

pub mod report;

pub use report::{
    delta_table, render_markdown, similarity_table, DeltaCell, DeltaRow, EvalReport, IndexRef,
    ReportManifest, SimilarityCell, SimilarityRow,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_test_set, DomainScope, IngestFormat, LanguagePair};
use crate::error::{Error, Result};
use crate::llm::{
    make_backend, translate_batch, BackendConfig, TranslationJob, TranslationRecord,
    TranslationStatus,
};
use crate::metrics::{
    chrf_corpus, chrf_corpus_sentence_avg, chrf_sentence, example_similarity, ChrfParams,
};
use crate::prompting::{render_baseline, render_fewshot, select_examples, LanguageNames, ShotMode};
use crate::retrieval::load_index;

/// One cell of the experiment grid: everything needed to translate a test
/// set one way and score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lang: LanguagePair,
    pub mode: ShotMode,
    /// Recorded for every mode; only example selection consults it
    /// (baseline prompts ignore the domain).
    pub domain: DomainScope,
    pub backend: BackendConfig,
    #[serde(default)]
    pub chrf: ChrfParams,
    /// Score the corpus as a mean of sentence scores instead of the default
    /// micro-average (summed n-gram statistics).
    #[serde(default)]
    pub sentence_average: bool,
    pub seed: u64,
    pub test_set: PathBuf,
    pub index_dir: PathBuf,
    /// Extra language display names (code → name) beyond the built-ins.
    #[serde(default)]
    pub language_names: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        self.chrf.validate()?;
        self.backend.validate()
    }

    fn names(&self) -> LanguageNames {
        let mut names = LanguageNames::default();
        for (code, name) in &self.language_names {
            names.insert(code, name);
        }
        names
    }
}

/// Per-configuration failure tallies. Failed segments stay in the run (an
/// empty hypothesis for scoring); these counts surface them in the report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub parse_failed: usize,
    pub transport_failed: usize,
    /// Segments that got fewer examples than the mode asked for.
    pub example_shortfall: usize,
}

/// One test segment's translation plus its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult {
    pub record: TranslationRecord,
    /// Sentence chrF of the translation (empty hypothesis on failure).
    pub sentence_chrf: f64,
    /// Mean chrF between the test source and the example sources; absent
    /// when the prompt carried no examples.
    pub example_similarity: Option<f64>,
}

/// Everything produced by one grid cell: one Table-1 cell and one Table-2
/// cell, plus the per-segment audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResult {
    pub config: RunConfig,
    pub corpus_chrf: f64,
    pub per_segment: Vec<SegmentResult>,
    pub mean_example_similarity: Option<f64>,
    pub failures: FailureCounts,
}

/// Seed for one segment's random sampling, mixed from the run seed and the
/// segment index with a splitmix64 step. Recording the run seed in the
/// manifest therefore pins every draw of the run.
pub fn segment_seed(run_seed: u64, segment_index: usize) -> u64 {
    let mut z = run_seed ^ (segment_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run one configuration over its test set. Setup problems (unreadable
/// index, empty test set, sampling pool smaller than k) abort; per-segment
/// failures are recorded in the result and never abort the run.
pub fn run_config(cfg: &RunConfig) -> Result<ConfigResult> {
    cfg.validate()?;
    let index = load_index(&cfg.index_dir)?;
    if *index.lang() != cfg.lang {
        return Err(Error::Config(format!(
            "index {} holds {}, config wants {}",
            cfg.index_dir.display(),
            index.lang(),
            cfg.lang
        )));
    }
    if index.scope() != cfg.domain {
        return Err(Error::Config(format!(
            "index {} covers domain {}, config wants {}",
            cfg.index_dir.display(),
            index.scope(),
            cfg.domain
        )));
    }
    let test = load_test_set(&cfg.test_set, IngestFormat::from_path(&cfg.test_set), false)?;
    if test.segments.is_empty() {
        return Err(Error::Config(format!("test set {} is empty", cfg.test_set.display())));
    }
    if let ShotMode::Rand(k) = cfg.mode {
        if index.n_docs() < k {
            return Err(Error::PoolTooSmall { needed: k, available: index.n_docs() });
        }
    }
    let names = cfg.names();
    let backend = make_backend(&cfg.backend)?;

    let mut jobs = Vec::with_capacity(test.segments.len());
    let mut shortfall = 0usize;
    for (i, segment) in test.segments.iter().enumerate() {
        let seed = segment_seed(cfg.seed, i);
        let examples = select_examples(cfg.mode, &index, &segment.src_title, seed)?;
        if examples.len() < cfg.mode.k() {
            shortfall += 1;
        }
        // A retrieval shortfall down to zero examples falls back to the
        // baseline template: template B cannot render an empty example list.
        let prompt = if examples.is_empty() {
            render_baseline(&segment.src_title, &cfg.lang, &names)?
        } else {
            let recorded_seed = matches!(cfg.mode, ShotMode::Rand(_)).then_some(seed);
            render_fewshot(&segment.src_title, &cfg.lang, &names, &examples, recorded_seed)?
        };
        jobs.push(TranslationJob {
            segment_index: i,
            prompt,
            title: segment.src_title.clone(),
            examples,
        });
    }

    let records = translate_batch(&jobs, backend.as_ref(), cfg.backend.parallelism());

    let mut failures = FailureCounts {
        example_shortfall: shortfall,
        ..FailureCounts::default()
    };
    let mut per_segment = Vec::with_capacity(records.len());
    let mut similarity_sum = 0.0;
    let mut similarity_count = 0u64;
    for (record, (job, segment)) in records.into_iter().zip(jobs.iter().zip(&test.segments)) {
        match record.status {
            TranslationStatus::Ok => {}
            TranslationStatus::ParseFailed => failures.parse_failed += 1,
            TranslationStatus::TransportFailed => failures.transport_failed += 1,
        }
        let hypothesis = record.translation.as_deref().unwrap_or("");
        let sentence_chrf = chrf_sentence(hypothesis, &segment.ref_translation, &cfg.chrf);
        let seg_similarity = if job.examples.is_empty() {
            None
        } else {
            let sources: Vec<&str> = job.examples.iter().map(|e| e.src_text.as_str()).collect();
            Some(example_similarity(&segment.src_title, &sources, &cfg.chrf)?)
        };
        if let Some(s) = seg_similarity {
            similarity_sum += s;
            similarity_count += 1;
        }
        per_segment.push(SegmentResult {
            record,
            sentence_chrf,
            example_similarity: seg_similarity,
        });
    }

    let scored: Vec<(&str, &str)> = per_segment
        .iter()
        .zip(&test.segments)
        .map(|(seg, t)| {
            (
                seg.record.translation.as_deref().unwrap_or(""),
                t.ref_translation.as_str(),
            )
        })
        .collect();
    let corpus_chrf = if cfg.sentence_average {
        chrf_corpus_sentence_avg(scored, &cfg.chrf)?
    } else {
        chrf_corpus(scored, &cfg.chrf)?
    };

    let mean_example_similarity = (cfg.mode != ShotMode::Baseline && similarity_count > 0)
        .then(|| similarity_sum / similarity_count as f64);

    Ok(ConfigResult {
        config: cfg.clone(),
        corpus_chrf,
        per_segment,
        mean_example_similarity,
        failures,
    })
}

fn default_modes() -> Vec<ShotMode> {
    vec![
        ShotMode::Baseline,
        ShotMode::Rand(1),
        ShotMode::Rand(5),
        ShotMode::Rag(1),
        ShotMode::Rag(5),
    ]
}

fn default_domains() -> Vec<DomainScope> {
    DomainScope::ALL.to_vec()
}

/// Declarative description of a whole experiment grid, usually read from a
/// TOML file. Relative paths are resolved against the config file's
/// directory by [`GridConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub lang: LanguagePair,
    pub seed: u64,
    pub test_set: PathBuf,
    pub backend: BackendConfig,
    #[serde(default)]
    pub chrf: ChrfParams,
    #[serde(default)]
    pub sentence_average: bool,
    #[serde(default = "default_modes")]
    pub modes: Vec<ShotMode>,
    #[serde(default = "default_domains")]
    pub domains: Vec<DomainScope>,
    /// Domain scope → index directory. Every configured domain needs one;
    /// the baseline run borrows the first domain's index.
    pub indexes: BTreeMap<DomainScope, PathBuf>,
    #[serde(default)]
    pub language_names: BTreeMap<String, String>,
}

impl GridConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let grid: GridConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("grid config: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    /// Read a grid config file, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut grid = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            grid.test_set = base.join(&grid.test_set);
            for dir in grid.indexes.values_mut() {
                *dir = base.join(&*dir);
            }
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.chrf.validate()?;
        self.backend.validate()?;
        if self.modes.is_empty() {
            return Err(Error::Config("grid needs at least one mode".into()));
        }
        if !self.modes.contains(&ShotMode::Baseline) {
            return Err(Error::Config(
                "grid needs the baseline mode: deltas are measured against it".into(),
            ));
        }
        if self.domains.is_empty() {
            return Err(Error::Config("grid needs at least one domain".into()));
        }
        for mode in &self.modes {
            mode.validate()?;
        }
        for domain in &self.domains {
            if !self.indexes.contains_key(domain) {
                return Err(Error::Config(format!("no index configured for domain {domain}")));
            }
        }
        Ok(())
    }

    fn cell_config(&self, mode: ShotMode, domain: DomainScope) -> RunConfig {
        RunConfig {
            lang: self.lang.clone(),
            mode,
            domain,
            backend: self.backend.clone(),
            chrf: self.chrf,
            sentence_average: self.sentence_average,
            seed: self.seed,
            test_set: self.test_set.clone(),
            index_dir: self.indexes[&domain].clone(),
            language_names: self.language_names.clone(),
        }
    }
}

/// A completed grid run: the report plus every cell's full result (baseline
/// first, then the other modes in configured order).
#[derive(Debug)]
pub struct GridRunOutput {
    pub report: EvalReport,
    pub results: Vec<ConfigResult>,
}

/// Run every cell of the grid and build the report. Every cell is attempted
/// even after one aborts; the error then lists all aborted cells.
pub fn run_grid(grid: &GridConfig) -> Result<GridRunOutput> {
    grid.validate()?;

    let mut aborted: Vec<String> = Vec::new();
    let baseline_cfg = grid.cell_config(ShotMode::Baseline, grid.domains[0]);
    let baseline = match run_config(&baseline_cfg) {
        Ok(result) => Some(result),
        Err(e) => {
            aborted.push(format!("baseline: {e}"));
            None
        }
    };

    let mut results: Vec<ConfigResult> = Vec::new();
    for &mode in grid.modes.iter().filter(|m| **m != ShotMode::Baseline) {
        for &domain in &grid.domains {
            match run_config(&grid.cell_config(mode, domain)) {
                Ok(result) => results.push(result),
                Err(e) => aborted.push(format!("{} × {domain}: {e}", mode.label())),
            }
        }
    }

    if !aborted.is_empty() {
        return Err(Error::Config(format!(
            "{} grid cell(s) aborted:\n  {}",
            aborted.len(),
            aborted.join("\n  ")
        )));
    }
    let baseline = baseline.expect("baseline ran: no aborts recorded");

    let report = report::build_report(grid, &baseline, &results)?;
    let mut all = Vec::with_capacity(results.len() + 1);
    all.push(baseline);
    all.extend(results);
    Ok(GridRunOutput { report, results: all })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BilingualPair, Domain};
    use crate::retrieval::{save_index, Bm25Params, RetrievalIndex};
    use std::io::Write;

    fn en_de() -> LanguagePair {
        LanguagePair::new("en", "de").unwrap()
    }

    /// A tiny world on disk: an index over `pairs` and a test-set file.
    fn setup(
        dir: &Path,
        pairs: &[(&str, &str)],
        test: &[(&str, &str)],
        scope: DomainScope,
    ) -> (PathBuf, PathBuf) {
        let lang = en_de();
        let owned: Vec<BilingualPair> = pairs
            .iter()
            .enumerate()
            .map(|(i, (src, tgt))| BilingualPair {
                id: i as u32,
                src_text: src.to_string(),
                tgt_text: tgt.to_string(),
                domain: Domain::Ttl,
                lang: lang.clone(),
            })
            .collect();
        let index = RetrievalIndex::build(lang, scope, &owned, Bm25Params::default()).unwrap();
        let index_dir = dir.join("index");
        save_index(&index, &index_dir).unwrap();

        let test_path = dir.join("test.jsonl");
        let mut f = std::fs::File::create(&test_path).unwrap();
        for (src, reference) in test {
            writeln!(
                f,
                "{}",
                serde_json::json!({ "src_title": src, "ref_translation": reference })
            )
            .unwrap();
        }
        (index_dir, test_path)
    }

    fn config(mode: ShotMode, index_dir: PathBuf, test_set: PathBuf) -> RunConfig {
        RunConfig {
            lang: en_de(),
            mode,
            domain: DomainScope::Single(Domain::Ttl),
            backend: BackendConfig::MockEcho,
            chrf: ChrfParams::default(),
            sentence_average: false,
            seed: 42,
            test_set,
            index_dir,
            language_names: BTreeMap::new(),
        }
    }

    #[test]
    fn baseline_echo_on_identity_test_set_scores_100() {
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) = setup(
            dir.path(),
            &[("red mug", "rote tasse")],
            &[("red mug", "red mug"), ("blue cup", "blue cup")],
            DomainScope::Single(Domain::Ttl),
        );
        let result = run_config(&config(ShotMode::Baseline, index_dir, test_path)).unwrap();
        assert!((result.corpus_chrf - 100.0).abs() < 1e-9);
        assert_eq!(result.per_segment.len(), 2);
        assert_eq!(result.failures, FailureCounts::default());
        assert_eq!(result.mean_example_similarity, None);
    }

    #[test]
    fn rag5_copy_best_with_indexed_test_pairs_scores_100() {
        // Every test pair is in the index, so top-1 is the exact pair and
        // copy-best emits the exact reference.
        let pairs = [
            ("kyb shock absorber 343441", "kyb stoßdämpfer 343441"),
            ("red enamel mug 350 ml", "rote emaille tasse 350 ml"),
            ("blue cotton shirt size l", "blaues baumwollhemd größe l"),
            ("oak coffee table 90 cm", "eichen couchtisch 90 cm"),
            ("usb c cable 2 m black", "usb c kabel 2 m schwarz"),
            ("garden hose 25 m", "gartenschlauch 25 m"),
        ];
        let test: Vec<(&str, &str)> = pairs[..4].to_vec();
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) =
            setup(dir.path(), &pairs, &test, DomainScope::Single(Domain::Ttl));
        let mut cfg = config(ShotMode::Rag(5), index_dir, test_path);
        cfg.backend = BackendConfig::MockCopyBest;
        let result = run_config(&cfg).unwrap();
        assert!((result.corpus_chrf - 100.0).abs() < 1e-9, "got {}", result.corpus_chrf);
        let sim = result.mean_example_similarity.unwrap();
        assert!(sim > 0.0 && sim <= 100.0);
    }

    #[test]
    fn rand_runs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let pairs: Vec<(String, String)> = (0..30)
            .map(|i| (format!("item number {i}"), format!("artikel nummer {i}")))
            .collect();
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let test = [("item number 3", "artikel nummer 3"), ("item number 9", "artikel nummer 9")];
        let (index_dir, test_path) =
            setup(dir.path(), &refs, &test, DomainScope::Single(Domain::Ttl));
        let mut cfg = config(ShotMode::Rand(5), index_dir, test_path);
        cfg.backend = BackendConfig::MockCopyBest;
        let a = run_config(&cfg).unwrap();
        let b = run_config(&cfg).unwrap();
        assert_eq!(a, b);
        // Different run seeds draw different examples somewhere.
        cfg.seed = 43;
        let c = run_config(&cfg).unwrap();
        let ids = |r: &ConfigResult| -> Vec<Vec<u32>> {
            r.per_segment.iter().map(|s| s.record.prompt.example_ids.clone()).collect()
        };
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn failed_segments_score_as_empty_but_run_completes() {
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) = setup(
            dir.path(),
            &[("red mug", "rote tasse")],
            &[("red mug", "rote tasse"), ("blue cup", "blaue tasse")],
            DomainScope::Single(Domain::Ttl),
        );
        // A scripted backend with an empty fixture answers every prompt
        // with an empty string: all segments parse_failed.
        let fixture = dir.path().join("script.jsonl");
        std::fs::write(&fixture, "").unwrap();
        let mut cfg = config(ShotMode::Baseline, index_dir, test_path);
        cfg.backend = BackendConfig::MockScripted { fixture };
        let result = run_config(&cfg).unwrap();
        assert_eq!(result.failures.parse_failed, 2);
        assert_eq!(result.corpus_chrf, 0.0);
        for seg in &result.per_segment {
            assert_eq!(seg.record.translation, None);
            assert_eq!(seg.sentence_chrf, 0.0);
        }
    }

    #[test]
    fn rand_pool_smaller_than_k_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) = setup(
            dir.path(),
            &[("red mug", "rote tasse")],
            &[("red mug", "rote tasse")],
            DomainScope::Single(Domain::Ttl),
        );
        let cfg = config(ShotMode::Rand(5), index_dir, test_path);
        assert!(matches!(run_config(&cfg), Err(Error::PoolTooSmall { .. })));
    }

    #[test]
    fn index_domain_must_match_config() {
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) = setup(
            dir.path(),
            &[("red mug", "rote tasse")],
            &[("red mug", "rote tasse")],
            DomainScope::Tbd,
        );
        let cfg = config(ShotMode::Baseline, index_dir, test_path);
        let err = run_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("domain"), "{err}");
    }

    #[test]
    fn segment_seeds_spread_and_reproduce() {
        let a: Vec<u64> = (0..100).map(|i| segment_seed(42, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| segment_seed(42, i)).collect();
        assert_eq!(a, b);
        let mut uniq = a.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), a.len(), "collisions in 100 segment seeds");
        assert_ne!(segment_seed(1, 0), segment_seed(2, 0));
    }

    #[test]
    fn grid_config_parses_and_validates() {
        let toml_text = r#"
            lang = "en-de"
            seed = 7
            test_set = "test.jsonl"
            modes = ["baseline", "rag-1"]
            domains = ["ttl"]

            [backend]
            kind = "mock_echo"

            [indexes]
            ttl = "idx/ttl"
        "#;
        let grid = GridConfig::from_toml_str(toml_text).unwrap();
        assert_eq!(grid.modes, [ShotMode::Baseline, ShotMode::Rag(1)]);
        assert_eq!(grid.domains, [DomainScope::Single(Domain::Ttl)]);
        assert_eq!(grid.chrf, ChrfParams::default());

        let missing_index = toml_text.replace("domains = [\"ttl\"]", "domains = [\"ttl\", \"bp\"]");
        assert!(GridConfig::from_toml_str(&missing_index).is_err());

        let no_baseline = toml_text.replace("\"baseline\", ", "");
        assert!(GridConfig::from_toml_str(&no_baseline).is_err());
    }

    #[test]
    fn minimal_grid_reruns_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let (index_dir, test_path) = setup(
            dir.path(),
            &[
                ("red enamel mug 350 ml", "rote emaille tasse 350 ml"),
                ("blue cotton shirt", "blaues baumwollhemd"),
                ("oak coffee table", "eichen couchtisch"),
                ("garden hose 25 m", "gartenschlauch 25 m"),
                ("usb c cable 2 m", "usb c kabel 2 m"),
            ],
            &[
                ("red enamel mug 400 ml", "rote emaille tasse 400 ml"),
                ("oak side table", "eichen beistelltisch"),
            ],
            DomainScope::Single(Domain::Ttl),
        );
        let grid = GridConfig {
            lang: en_de(),
            seed: 11,
            test_set: test_path,
            backend: BackendConfig::MockCopyBest,
            chrf: ChrfParams::default(),
            sentence_average: false,
            modes: vec![ShotMode::Baseline, ShotMode::Rand(1), ShotMode::Rag(1)],
            domains: vec![DomainScope::Single(Domain::Ttl)],
            indexes: [(DomainScope::Single(Domain::Ttl), index_dir)].into(),
            language_names: BTreeMap::new(),
        };
        let first = run_grid(&grid).unwrap();
        let second = run_grid(&grid).unwrap();
        assert_eq!(
            serde_json::to_string_pretty(&first.report).unwrap(),
            serde_json::to_string_pretty(&second.report).unwrap()
        );
        assert_eq!(render_markdown(&first.report), render_markdown(&second.report));
        assert_eq!(first.results.len(), 3);

        // Baseline row is identically zero.
        let baseline_row = &first.report.delta_table[0];
        assert_eq!(baseline_row.mode, ShotMode::Baseline);
        assert!(baseline_row.cells.iter().all(|c| c.delta_pct == 0.0 && c.delta_points == 0.0));
    }
}
