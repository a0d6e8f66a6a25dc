//! Wikipedia event pages as a membership benchmark.
//!
//! Pages created on or after a cutoff date cannot be in a model trained before
//! it (non-members); pages created well before the cutoff are very likely in
//! its training data (members). Pages come from a [`WikiSource`]: either a
//! frozen snapshot directory or the live MediaWiki Action API.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::benchmark::LabeledExample;
use crate::error::{Error, Result};
use crate::evaluation::Label;

/// Title prefixes of pages without meaningful prose.
pub const EXCLUDED_TITLE_PREFIXES: [&str; 2] = ["Timeline of", "List of"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiPage {
    pub page_id: u64,
    pub title: String,
    pub created_at: NaiveDate,
    pub text: String,
}

pub fn is_excluded_title(title: &str) -> bool {
    EXCLUDED_TITLE_PREFIXES.iter().any(|p| title.starts_with(p))
}

pub trait WikiSource {
    /// All candidate event pages, in any order.
    fn fetch_pages(&self) -> Result<Vec<WikiPage>>;
}

/// A directory of `<page_id>.json` files, one [`WikiPage`] each.
#[derive(Debug, Clone)]
pub struct SnapshotSource {
    dir: PathBuf,
}

impl SnapshotSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Freezes `pages` into `dir` so later builds can run offline.
    pub fn write(dir: impl AsRef<Path>, pages: &[WikiPage]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for page in pages {
            let path = dir.join(format!("{:012}.json", page.page_id));
            let body = serde_json::to_string_pretty(page).expect("serializable page");
            fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

impl WikiSource for SnapshotSource {
    fn fetch_pages(&self) -> Result<Vec<WikiPage>> {
        let entries =
            fs::read_dir(&self.dir).map_err(|e| Error::SourceUnavailable(format!("{}: {e}", self.dir.display())))?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        paths
            .into_iter()
            .map(|path| {
                let src = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                serde_json::from_str(&src).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: e.line(),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

/// Live MediaWiki Action API client.
///
/// Lists the main-namespace members of each category, then asks for each
/// page's first revision timestamp (its creation date) and plain-text extract.
/// Requests are sequential and spaced at least `min_interval` apart.
#[derive(Debug)]
pub struct MediaWikiSource {
    api_url: String,
    categories: Vec<String>,
    agent: ureq::Agent,
    min_interval: Duration,
    retry_limit: u32,
    max_pages_per_category: Option<usize>,
    last_request: Mutex<Option<Instant>>,
}

impl MediaWikiSource {
    pub fn new(api_url: impl Into<String>, user_agent: &str, categories: Vec<String>) -> Result<Self> {
        if user_agent.trim().is_empty() {
            return Err(Error::ConfigInvalid("a user-agent string is required".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .user_agent(user_agent)
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            api_url: api_url.into(),
            categories,
            agent,
            min_interval: Duration::from_millis(500),
            retry_limit: 3,
            max_pages_per_category: None,
            last_request: Mutex::new(None),
        })
    }

    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.min_interval = interval;
        self
    }

    pub fn with_max_pages_per_category(mut self, max: usize) -> Self {
        self.max_pages_per_category = Some(max);
        self
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().expect("pacing lock poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn query(&self, params: &[(&str, &str)]) -> Result<Value> {
        let mut last_err = String::new();
        for attempt in 0..=self.retry_limit {
            if attempt > 0 {
                thread::sleep(self.min_interval * 2u32.pow(attempt - 1));
            }
            self.pace();
            let mut req = self
                .agent
                .get(&self.api_url)
                .query("format", "json")
                .query("formatversion", "2");
            for (k, v) in params {
                req = req.query(*k, *v);
            }
            match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 429 || status >= 500 {
                        last_err = format!("HTTP {status}");
                        continue;
                    }
                    if status != 200 {
                        return Err(Error::SourceUnavailable(format!("HTTP {status}")));
                    }
                    let body: Value = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| Error::SourceUnavailable(format!("invalid JSON: {e}")))?;
                    if let Some(err) = body.get("error") {
                        return Err(Error::SourceUnavailable(format!("API error: {err}")));
                    }
                    return Ok(body);
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(Error::SourceUnavailable(last_err))
    }

    /// `(page_id, title)` of the main-namespace members of `category`.
    pub fn category_members(&self, category: &str) -> Result<Vec<(u64, String)>> {
        let mut out = Vec::new();
        let mut cont: Option<String> = None;
        loop {
            let mut params = vec![
                ("action", "query"),
                ("list", "categorymembers"),
                ("cmtitle", category),
                ("cmnamespace", "0"),
                ("cmlimit", "max"),
            ];
            if let Some(c) = cont.as_deref() {
                params.push(("cmcontinue", c));
            }
            let body = self.query(&params)?;
            let members = body["query"]["categorymembers"]
                .as_array()
                .ok_or_else(|| Error::SourceUnavailable("missing categorymembers".into()))?;
            for m in members {
                if let (Some(id), Some(title)) = (m["pageid"].as_u64(), m["title"].as_str()) {
                    out.push((id, title.to_string()));
                }
            }
            if self.max_pages_per_category.is_some_and(|max| out.len() >= max) {
                out.truncate(self.max_pages_per_category.unwrap_or(usize::MAX));
                break;
            }
            match body["continue"]["cmcontinue"].as_str() {
                Some(c) => cont = Some(c.to_string()),
                None => break,
            }
        }
        Ok(out)
    }

    /// Creation date (first revision) and plain-text extract of one page.
    pub fn page_details(&self, page_id: u64, title: &str) -> Result<WikiPage> {
        let id = page_id.to_string();
        let body = self.query(&[
            ("action", "query"),
            ("prop", "revisions|extracts"),
            ("pageids", &id),
            ("rvlimit", "1"),
            ("rvdir", "newer"),
            ("rvprop", "timestamp"),
            ("explaintext", "1"),
        ])?;
        let page = &body["query"]["pages"][0];
        let stamp = page["revisions"][0]["timestamp"]
            .as_str()
            .ok_or_else(|| Error::SourceUnavailable(format!("no revisions for page {page_id}")))?;
        let created_at = stamp
            .get(..10)
            .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
            .ok_or_else(|| Error::SourceUnavailable(format!("bad timestamp {stamp:?}")))?;
        Ok(WikiPage {
            page_id,
            title: page["title"].as_str().unwrap_or(title).to_string(),
            created_at,
            text: page["extract"].as_str().unwrap_or_default().to_string(),
        })
    }
}

impl WikiSource for MediaWikiSource {
    fn fetch_pages(&self) -> Result<Vec<WikiPage>> {
        let mut listed = BTreeMap::new();
        for cat in &self.categories {
            for (id, title) in self.category_members(cat)? {
                listed.entry(id).or_insert(title);
            }
        }
        let mut pages = Vec::new();
        for (id, title) in listed {
            // skip fetching pages the builder would discard anyway
            if is_excluded_title(&title) {
                continue;
            }
            pages.push(self.page_details(id, &title)?);
        }
        Ok(pages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiMiaConfig {
    /// Pages created on or after this date are non-members.
    pub cutoff: NaiveDate,
    /// Pages created before this date are members.
    pub member_before: NaiveDate,
    pub seed: u64,
}

impl Default for WikiMiaConfig {
    fn default() -> Self {
        Self {
            cutoff: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
            member_before: NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date"),
            seed: 0,
        }
    }
}

fn downsample(mut pages: Vec<WikiPage>, n: usize, rng: &mut ChaCha8Rng) -> Vec<WikiPage> {
    if pages.len() <= n {
        return pages;
    }
    let mut keep = index::sample(rng, pages.len(), n).into_vec();
    keep.sort_unstable();
    let mut out = Vec::with_capacity(n);
    for (i, page) in pages.drain(..).enumerate() {
        if keep.binary_search(&i).is_ok() {
            out.push(page);
        }
    }
    out
}

fn to_example(page: WikiPage, label: Label) -> LabeledExample {
    LabeledExample {
        created_at: Some(page.created_at),
        ..LabeledExample::new(format!("wiki-{}", page.page_id), page.text, label)
    }
}

/// Labels pages by creation date, drops list/timeline pages and balances the classes.
///
/// Pages created between `member_before` and `cutoff` are ambiguous and
/// discarded. The larger class is downsampled with the configured seed.
/// Output is members then non-members, each ordered by page id.
pub fn build_wikimia(config: &WikiMiaConfig, source: &dyn WikiSource) -> Result<Vec<LabeledExample>> {
    if config.member_before >= config.cutoff {
        return Err(Error::ConfigInvalid(
            "member_before must precede the cutoff date".into(),
        ));
    }
    let mut pages = source.fetch_pages()?;
    pages.sort_by_key(|p| p.page_id);
    pages.dedup_by_key(|p| p.page_id);

    let mut members = Vec::new();
    let mut nonmembers = Vec::new();
    for page in pages {
        if is_excluded_title(&page.title) || page.text.trim().is_empty() {
            continue;
        }
        if page.created_at >= config.cutoff {
            nonmembers.push(page);
        } else if page.created_at < config.member_before {
            members.push(page);
        }
    }
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::InsufficientPages {
            members: members.len(),
            nonmembers: nonmembers.len(),
        });
    }
    let n = members.len().min(nonmembers.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let members = downsample(members, n, &mut rng);
    let nonmembers = downsample(nonmembers, n, &mut rng);
    Ok(members
        .into_iter()
        .map(|p| to_example(p, Label::Member))
        .chain(nonmembers.into_iter().map(|p| to_example(p, Label::Nonmember)))
        .collect())
}
