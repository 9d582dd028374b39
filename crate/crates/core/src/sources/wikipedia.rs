use std::sync::Arc;

use serde_json::Value;
use url::form_urlencoded::byte_serialize;

use super::{get_text, Capability, SearchTerms, SourceError, SourceRecord, Wrapper, WrapperDescriptor, WrapperMode};
use crate::http::HttpTransport;

pub const WIKIPEDIA_API: &str = "https://en.wikipedia.org/w/api.php";
const PAGE_BASE: &str = "https://en.wikipedia.org/wiki/";

fn enc(s: &str) -> String {
    byte_serialize(s.as_bytes()).collect()
}

/// English Wikipedia page introductions via the action API.
pub struct WikipediaWrapper {
    transport: Arc<dyn HttpTransport>,
}

impl WikipediaWrapper {
    pub fn new(transport: Arc<dyn HttpTransport>) -> Self {
        Self { transport }
    }

    pub fn search_url(&self, phrase: &str, limit: usize) -> String {
        format!(
            "{WIKIPEDIA_API}?action=query&list=search&srsearch={}&srlimit={limit}&format=json&formatversion=2",
            enc(phrase)
        )
    }

    pub fn extracts_url(&self, titles: &[String]) -> String {
        format!(
            "{WIKIPEDIA_API}?action=query&prop=extracts&exintro=1&explaintext=1&redirects=1&titles={}&format=json&formatversion=2",
            enc(&titles.join("|"))
        )
    }

    pub fn page_url(title: &str) -> String {
        format!("{PAGE_BASE}{}", title.replace(' ', "_"))
    }

    /// Titles matching any phrase, in phrase order then rank order.
    fn search_titles(&self, terms: &SearchTerms, max_records: usize) -> Result<Vec<String>, SourceError> {
        let mut titles: Vec<String> = Vec::new();
        for phrase in &terms.terms {
            if titles.len() >= max_records {
                break;
            }
            let body = get_text(self.transport.as_ref(), &self.search_url(phrase, max_records))?;
            let json: Value = serde_json::from_str(&body).map_err(|e| SourceError::parse("wikipedia search", e))?;
            let hits = json
                .pointer("/query/search")
                .and_then(Value::as_array)
                .ok_or_else(|| SourceError::parse("wikipedia search", "no query.search list"))?;
            for hit in hits {
                let title = hit
                    .get("title")
                    .and_then(Value::as_str)
                    .ok_or_else(|| SourceError::parse("wikipedia search", "hit without title"))?;
                if titles.len() < max_records && !titles.iter().any(|t| t == title) {
                    titles.push(title.to_string());
                }
            }
        }
        Ok(titles)
    }

    fn extracts(&self, titles: &[String]) -> Result<Vec<SourceRecord>, SourceError> {
        if titles.is_empty() {
            return Ok(Vec::new());
        }
        let body = get_text(self.transport.as_ref(), &self.extracts_url(titles))?;
        let json: Value = serde_json::from_str(&body).map_err(|e| SourceError::parse("wikipedia extracts", e))?;
        let pages = json
            .pointer("/query/pages")
            .and_then(Value::as_array)
            .ok_or_else(|| SourceError::parse("wikipedia extracts", "no query.pages list"))?;
        // Follow redirects so results line up with the searched titles.
        let redirects: Vec<(String, String)> = json
            .pointer("/query/redirects")
            .and_then(Value::as_array)
            .map(|rs| {
                rs.iter()
                    .filter_map(|r| Some((r.get("from")?.as_str()?.to_string(), r.get("to")?.as_str()?.to_string())))
                    .collect()
            })
            .unwrap_or_default();
        let mut out = Vec::new();
        for wanted in titles {
            let resolved = redirects
                .iter()
                .find(|(from, _)| from == wanted)
                .map_or(wanted.as_str(), |(_, to)| to.as_str());
            let Some(page) = pages
                .iter()
                .find(|p| p.get("title").and_then(Value::as_str) == Some(resolved))
            else {
                continue;
            };
            if page.get("missing").is_some_and(|m| m.as_bool() != Some(false)) {
                continue;
            }
            out.push(SourceRecord {
                record_id: Self::page_url(resolved),
                title: resolved.to_string(),
                body: page.get("extract").and_then(Value::as_str).unwrap_or_default().trim().to_string(),
                extra_ids: Default::default(),
                source_name: "wikipedia".into(),
            });
        }
        Ok(out)
    }
}

impl Wrapper for WikipediaWrapper {
    fn descriptor(&self) -> WrapperDescriptor {
        WrapperDescriptor::new(
            "wikipedia",
            WrapperMode::DynamicApi,
            &[Capability::Search, Capability::FetchById],
            "Titles and introductions of English Wikipedia pages",
        )
    }

    fn search(&self, terms: &SearchTerms, max_records: usize) -> Result<Vec<SourceRecord>, SourceError> {
        let titles = self.search_titles(terms, max_records.max(1))?;
        self.extracts(&titles)
    }

    fn fetch_by_id(&self, ids: &[String]) -> Result<Vec<SourceRecord>, SourceError> {
        let titles: Vec<String> = ids
            .iter()
            .map(|id| id.strip_prefix(PAGE_BASE).unwrap_or(id).replace('_', " "))
            .collect();
        self.extracts(&titles)
    }
}
