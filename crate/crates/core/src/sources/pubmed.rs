use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use url::form_urlencoded::byte_serialize;

use super::{get_text, Capability, SearchTerms, SourceError, SourceRecord, Wrapper, WrapperDescriptor, WrapperMode};
use crate::http::HttpTransport;

pub const EUTILS_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/";

/// NCBI asks for at most three requests per second without a key.
const KEYLESS_INTERVAL: Duration = Duration::from_millis(350);

fn enc(s: &str) -> String {
    byte_serialize(s.as_bytes()).collect()
}

/// PubMed titles and abstracts through E-utilities esearch + efetch.
pub struct PubMedWrapper {
    transport: Arc<dyn HttpTransport>,
    api_key: Option<String>,
    last_request: Mutex<Option<Instant>>,
}

impl PubMedWrapper {
    pub fn new(transport: Arc<dyn HttpTransport>, api_key: Option<String>) -> Self {
        Self {
            transport,
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            last_request: Mutex::new(None),
        }
    }

    /// Takes the key from `NCBI_API_KEY` when set.
    pub fn from_env(transport: Arc<dyn HttpTransport>) -> Self {
        Self::new(transport, std::env::var("NCBI_API_KEY").ok())
    }

    fn key_suffix(&self) -> String {
        self.api_key
            .as_deref()
            .map(|k| format!("&api_key={}", enc(k)))
            .unwrap_or_default()
    }

    /// Quoted phrases joined with OR.
    pub fn esearch_url(&self, terms: &SearchTerms, max_records: usize) -> String {
        let query = terms
            .terms
            .iter()
            .map(|t| format!("\"{}\"", t.replace('"', "")))
            .collect::<Vec<_>>()
            .join(" OR ");
        format!(
            "{EUTILS_BASE}esearch.fcgi?db=pubmed&term={}&retmax={max_records}&retmode=json{}",
            enc(&query),
            self.key_suffix()
        )
    }

    pub fn efetch_url(&self, ids: &[String]) -> String {
        format!(
            "{EUTILS_BASE}efetch.fcgi?db=pubmed&id={}&retmode=xml&rettype=abstract{}",
            enc(&ids.join(",")),
            self.key_suffix()
        )
    }

    fn polite_get(&self, url: &str) -> Result<String, SourceError> {
        if self.transport.is_live() && self.api_key.is_none() {
            let mut last = self.last_request.lock();
            if let Some(prev) = *last {
                let elapsed = prev.elapsed();
                if elapsed < KEYLESS_INTERVAL {
                    std::thread::sleep(KEYLESS_INTERVAL - elapsed);
                }
            }
            *last = Some(Instant::now());
        }
        get_text(self.transport.as_ref(), url)
    }

    pub fn esearch(&self, terms: &SearchTerms, max_records: usize) -> Result<Vec<String>, SourceError> {
        let body = self.polite_get(&self.esearch_url(terms, max_records))?;
        parse_esearch(&body)
    }

    pub fn efetch(&self, ids: &[String]) -> Result<Vec<SourceRecord>, SourceError> {
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let body = self.polite_get(&self.efetch_url(ids))?;
        parse_efetch(&body)
    }
}

impl Wrapper for PubMedWrapper {
    fn descriptor(&self) -> WrapperDescriptor {
        WrapperDescriptor::new(
            "pubmed",
            WrapperMode::DynamicApi,
            &[Capability::Search, Capability::FetchById],
            "Titles and abstracts from PubMed",
        )
    }

    fn search(&self, terms: &SearchTerms, max_records: usize) -> Result<Vec<SourceRecord>, SourceError> {
        let ids = self.esearch(terms, max_records.max(1))?;
        self.efetch(&ids)
    }

    fn fetch_by_id(&self, ids: &[String]) -> Result<Vec<SourceRecord>, SourceError> {
        let bare: Vec<String> = ids
            .iter()
            .map(|id| id.strip_prefix("PMID:").unwrap_or(id).to_string())
            .collect();
        self.efetch(&bare)
    }
}

fn parse_esearch(body: &str) -> Result<Vec<String>, SourceError> {
    let json: serde_json::Value = serde_json::from_str(body).map_err(|e| SourceError::parse("esearch reply", e))?;
    let list = json
        .pointer("/esearchresult/idlist")
        .and_then(|v| v.as_array())
        .ok_or_else(|| SourceError::parse("esearch reply", "no esearchresult.idlist"))?;
    list.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| SourceError::parse("esearch reply", "non-string id"))
        })
        .collect()
}

fn text_of(node: roxmltree::Node) -> String {
    let raw: String = node
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn parse_efetch(body: &str) -> Result<Vec<SourceRecord>, SourceError> {
    let doc = roxmltree::Document::parse(body).map_err(|e| SourceError::parse("efetch reply", e))?;
    let mut out = Vec::new();
    for article in doc.descendants().filter(|n| n.has_tag_name("PubmedArticle")) {
        let citation = child(article, "MedlineCitation")
            .ok_or_else(|| SourceError::parse("efetch reply", "article without MedlineCitation"))?;
        let pmid = child(citation, "PMID")
            .map(text_of)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| SourceError::parse("efetch reply", "article without PMID"))?;
        let art = child(citation, "Article");
        let title = art.and_then(|a| child(a, "ArticleTitle")).map(text_of).unwrap_or_default();
        let body = art
            .and_then(|a| child(a, "Abstract"))
            .map(|abs| {
                abs.children()
                    .filter(|n| n.has_tag_name("AbstractText"))
                    .map(|n| match n.attribute("Label") {
                        Some(label) => format!("{label}: {}", text_of(n)),
                        None => text_of(n),
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        let mut extra_ids = BTreeMap::new();
        let pmc = article
            .descendants()
            .filter(|n| n.has_tag_name("ArticleId") && n.attribute("IdType") == Some("pmc"))
            .find(|n| n.ancestors().any(|a| a.has_tag_name("PubmedData")) && !n.ancestors().any(|a| a.has_tag_name("Reference")));
        if let Some(pmc) = pmc.map(text_of).filter(|s| !s.is_empty()) {
            extra_ids.insert("pmcid".to_string(), pmc);
        }
        out.push(SourceRecord {
            record_id: format!("PMID:{pmid}"),
            title,
            body,
            extra_ids,
            source_name: "pubmed".into(),
        });
    }
    Ok(out)
}
