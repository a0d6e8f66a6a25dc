use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use clap::Args;
use pdd_core::benchmark::{
    attach_paraphrases, bucket_lengths, build_wikimia, extract_snippets, validate_examples, MediaWikiSource,
    ParaphraseRecord, SnapshotSource, WikiMiaConfig, WikiPage, WikiSource, DEFAULT_BUCKETS,
};
use pdd_core::jsonl::parse_jsonl;
use pdd_core::{Error, Label, LabeledExample, Result, SnippetSpec};
use serde::Deserialize;

use crate::config::FileConfig;
use crate::run::Run;

#[derive(Debug, Args)]
pub struct WikiArgs {
    /// Offline snapshot directory (one JSON file per page).
    #[arg(long, value_name = "DIR", conflicts_with = "api_url")]
    pub snapshot: Option<PathBuf>,
    /// MediaWiki Action API endpoint, e.g. https://en.wikipedia.org/w/api.php
    #[arg(long, value_name = "URL")]
    pub api_url: Option<String>,
    /// Category to list (repeatable), e.g. "Category:2023 events".
    #[arg(long = "category")]
    pub categories: Vec<String>,
    /// Identifying user-agent, required by the API's etiquette.
    #[arg(long)]
    pub user_agent: Option<String>,
    /// Cap on pages listed per category.
    #[arg(long)]
    pub max_pages: Option<usize>,
    /// Minimum spacing between API requests, in milliseconds.
    #[arg(long, default_value_t = 500)]
    pub min_interval_ms: u64,
    /// Also freeze the fetched pages into this directory.
    #[arg(long, value_name = "DIR", requires = "api_url")]
    pub save_snapshot: Option<PathBuf>,
    /// Pages created on or after this date are non-members.
    #[arg(long, default_value = "2023-01-01")]
    pub cutoff: NaiveDate,
    /// Pages created before this date are members.
    #[arg(long, default_value = "2017-01-01")]
    pub member_before: NaiveDate,
}

struct Fetched(Vec<WikiPage>);

impl WikiSource for Fetched {
    fn fetch_pages(&self) -> Result<Vec<WikiPage>> {
        Ok(self.0.clone())
    }
}

pub fn run_wikimia(args: &WikiArgs, run: &mut Run) -> Result<()> {
    let config = WikiMiaConfig {
        cutoff: args.cutoff,
        member_before: args.member_before,
        seed: run.seed,
    };
    run.set("cutoff", args.cutoff);
    run.set("member_before", args.member_before);
    let pages = match (&args.snapshot, &args.api_url) {
        (Some(dir), _) => {
            run.set("snapshot", dir);
            run.hash_input_dir(dir)?;
            SnapshotSource::new(dir).fetch_pages()?
        }
        (None, Some(url)) => {
            if args.categories.is_empty() {
                return Err(Error::ConfigInvalid("--category is required with --api-url".into()));
            }
            let ua = args
                .user_agent
                .as_deref()
                .ok_or_else(|| Error::ConfigInvalid("--user-agent is required with --api-url".into()))?;
            run.set("api_url", url);
            run.set("categories", &args.categories);
            run.set("max_pages", args.max_pages);
            let mut source = MediaWikiSource::new(url.clone(), ua, args.categories.clone())?
                .with_min_interval(Duration::from_millis(args.min_interval_ms));
            if let Some(max) = args.max_pages {
                source = source.with_max_pages_per_category(max);
            }
            let pages = source.fetch_pages()?;
            if let Some(dir) = &args.save_snapshot {
                SnapshotSource::write(dir, &pages)?;
                log::info!("saved {} pages to {}", pages.len(), dir.display());
            }
            pages
        }
        (None, None) => {
            return Err(Error::ConfigInvalid("pass --snapshot DIR or --api-url URL".into()));
        }
    };
    let examples = build_wikimia(&config, &Fetched(pages))?;
    validate_examples(&examples)?;
    run.write_jsonl("wikimia.jsonl", &examples)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct BucketArgs {
    /// Labeled examples (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Word lengths, ascending (default 32,64,128,256).
    #[arg(long, value_delimiter = ',')]
    pub buckets: Option<Vec<usize>>,
    /// Paraphrases to pair with the originals (JSON lines {"id", "text"}).
    #[arg(long, value_name = "PATH")]
    pub paraphrases: Option<PathBuf>,
}

pub fn run_bucket(args: &BucketArgs, file: &FileConfig, run: &mut Run) -> Result<()> {
    let buckets = args
        .buckets
        .clone()
        .or_else(|| file.buckets.clone())
        .unwrap_or_else(|| DEFAULT_BUCKETS.to_vec());
    run.set("input", &args.input);
    run.set("buckets", &buckets);
    run.set("paraphrases", &args.paraphrases);
    let text = run.read_string(&args.input)?;
    let mut examples: Vec<LabeledExample> = parse_jsonl(&text, &args.input)?;
    if examples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(p) = &args.paraphrases {
        let text = run.read_string(p)?;
        let records: Vec<ParaphraseRecord> = parse_jsonl(&text, p)?;
        let outcome = attach_paraphrases(&examples, &records)?;
        if !outcome.unmatched.is_empty() {
            log::info!("{} original(s) have no paraphrase", outcome.unmatched.len());
        }
        examples = outcome.examples;
    }
    let outcome = bucket_lengths(&examples, &buckets)?;
    if outcome.dropped > 0 {
        log::warn!(
            "dropped {} example(s) shorter than {} words",
            outcome.dropped,
            buckets[0]
        );
    }
    validate_examples(&outcome.examples)?;
    run.write_jsonl("bucketed.jsonl", &outcome.examples)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SnippetArgs {
    /// Directory of UTF-8 `.txt` documents (id = file stem) or a JSON-lines file of {"id", "text"}.
    #[arg(long, value_name = "PATH")]
    pub docs: PathBuf,
    /// Label given to every snippet.
    #[arg(long)]
    pub label: Label,
    #[arg(long, default_value_t = 512)]
    pub snippet_words: usize,
    #[arg(long, default_value_t = 100)]
    pub per_doc: usize,
}

#[derive(Deserialize)]
struct DocRecord {
    id: String,
    text: String,
}

pub fn run_snippets(args: &SnippetArgs, run: &mut Run) -> Result<()> {
    run.set("docs", &args.docs);
    run.set("label", args.label);
    run.set("snippet_words", args.snippet_words);
    run.set("per_doc", args.per_doc);
    let documents: Vec<(String, String)> = if args.docs.is_dir() {
        let files = run.hash_input_dir(&args.docs)?;
        let mut docs = Vec::new();
        for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "txt")) {
            let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(f).map_err(|e| Error::Io {
                path: f.clone(),
                source: e,
            })?;
            docs.push((id, text));
        }
        docs
    } else {
        let text = run.read_string(&args.docs)?;
        parse_jsonl::<DocRecord>(&text, &args.docs)?
            .into_iter()
            .map(|d| (d.id, d.text))
            .collect()
    };
    if documents.is_empty() {
        return Err(Error::EmptyInput);
    }
    let spec = SnippetSpec {
        snippet_words: args.snippet_words,
        snippets_per_doc: args.per_doc,
        seed: run.seed,
    };
    let outcome = extract_snippets(&documents, &spec, args.label)?;
    if !outcome.too_short.is_empty() {
        log::warn!(
            "{} document(s) shorter than {} words",
            outcome.too_short.len(),
            spec.snippet_words
        );
    }
    if outcome.examples.is_empty() {
        return Err(Error::InvalidExample {
            id: args.docs.display().to_string(),
            reason: format!("no document has {} words", spec.snippet_words),
        });
    }
    run.write_jsonl("snippets.jsonl", &outcome.examples)?;
    Ok(())
}
