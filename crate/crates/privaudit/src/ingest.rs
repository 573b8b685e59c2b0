//! Policy acquisition and admission: fetching with explicit redirect
//! tracking, HTML-to-text conversion, language guessing, and the corpus
//! admission filters (size, emptiness, language, content type).

use std::io::Read;
use std::time::Duration;

use chrono::{DateTime, Utc};
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Limits applied while fetching one URL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchLimits {
    pub max_redirects: usize,
    pub max_bytes: usize,
    pub timeout_secs: u64,
}

impl Default for FetchLimits {
    fn default() -> Self {
        FetchLimits {
            max_redirects: 10,
            max_bytes: 4 * 1024 * 1024,
            timeout_secs: 30,
        }
    }
}

/// Why a fetch produced no body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FetchFailure {
    InvalidUrl,
    Network { detail: String },
    Timeout,
    RedirectLimit,
    Oversize,
    Http { status: u16 },
}

/// Everything observed while fetching one URL. The body itself is kept out
/// of the JSON sidecar (it is written as a separate raw file); `body_bytes`
/// records its length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchRecord {
    pub requested_url: String,
    /// Every URL visited, starting with the requested one; length > 1 means
    /// the link redirected, which downstream auditing flags.
    pub redirect_chain: Vec<String>,
    pub final_status: Option<u16>,
    pub content_type: String,
    #[serde(skip)]
    pub body: Vec<u8>,
    pub body_bytes: usize,
    pub failure: Option<FetchFailure>,
    pub fetched_at: DateTime<Utc>,
}

impl FetchRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn redirected(&self) -> bool {
        self.redirect_chain.len() > 1
    }
}

/// Fetch one policy URL, following redirects hop by hop so the chain is
/// observable. Never panics and never errors: network trouble, redirect
/// loops, non-2xx answers and oversize bodies all come back as a
/// `FetchRecord` with an empty body and a failure annotation. Bodies are
/// never truncated — too large means failed.
pub fn fetch_policy(url: &str, limits: &FetchLimits) -> FetchRecord {
    let fetched_at = Utc::now();
    let mut record = FetchRecord {
        requested_url: url.to_string(),
        redirect_chain: vec![url.to_string()],
        final_status: None,
        content_type: String::new(),
        body: Vec::new(),
        body_bytes: 0,
        failure: None,
        fetched_at,
    };

    let mut current: reqwest::Url = match url.parse() {
        Ok(parsed) => parsed,
        Err(_) => {
            record.failure = Some(FetchFailure::InvalidUrl);
            return record;
        }
    };
    if current.scheme() != "http" && current.scheme() != "https" {
        record.failure = Some(FetchFailure::InvalidUrl);
        return record;
    }

    let client = match reqwest::blocking::Client::builder()
        .redirect(reqwest::redirect::Policy::none())
        .timeout(Duration::from_secs(limits.timeout_secs))
        .build()
    {
        Ok(client) => client,
        Err(error) => {
            record.failure = Some(FetchFailure::Network {
                detail: error.to_string(),
            });
            return record;
        }
    };

    loop {
        let response = match client.get(current.clone()).send() {
            Ok(response) => response,
            Err(error) => {
                record.failure = Some(if error.is_timeout() {
                    FetchFailure::Timeout
                } else {
                    FetchFailure::Network {
                        detail: error.to_string(),
                    }
                });
                return record;
            }
        };
        let status = response.status();
        record.final_status = Some(status.as_u16());
        record.content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();

        if status.is_redirection() {
            if record.redirect_chain.len() - 1 >= limits.max_redirects {
                record.failure = Some(FetchFailure::RedirectLimit);
                return record;
            }
            let location = response
                .headers()
                .get(reqwest::header::LOCATION)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let Some(location) = location else {
                record.failure = Some(FetchFailure::Network {
                    detail: "redirect response without a location header".to_string(),
                });
                return record;
            };
            current = match current.join(&location) {
                Ok(next) => next,
                Err(_) => {
                    record.failure = Some(FetchFailure::Network {
                        detail: format!("unresolvable redirect target `{location}`"),
                    });
                    return record;
                }
            };
            record.redirect_chain.push(current.to_string());
            continue;
        }

        if status.is_success() {
            let mut body = Vec::new();
            let mut limited = response.take(limits.max_bytes as u64 + 1);
            if let Err(error) = limited.read_to_end(&mut body) {
                record.failure = Some(FetchFailure::Network {
                    detail: error.to_string(),
                });
                return record;
            }
            if body.len() > limits.max_bytes {
                record.failure = Some(FetchFailure::Oversize);
                return record;
            }
            record.body_bytes = body.len();
            record.body = body;
            return record;
        }

        record.failure = Some(FetchFailure::Http {
            status: status.as_u16(),
        });
        return record;
    }
}

// ---------------------------------------------------------------------------
// HTML to text
// ---------------------------------------------------------------------------

const SKIP_TAGS: &[&str] = &[
    "script", "style", "noscript", "template", "head", "nav", "iframe", "svg", "title", "button",
];

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "table", "thead",
    "tbody", "section", "article", "header", "footer", "blockquote", "pre", "br", "hr", "dt",
    "dd", "dl", "form", "aside", "main", "figure", "figcaption", "address", "details", "summary",
];

/// Convert HTML to plain text: script/style/nav content removed, block
/// elements and raw newlines emit line boundaries, inline markup flattens,
/// each line is whitespace-normalized, and runs of blank lines collapse to
/// one. Malformed HTML never errors — the parser repairs what it can.
/// Idempotent on its own output.
pub fn html_to_text(html: &str) -> String {
    let document = Html::parse_document(html);
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    emit_node(document.tree.root(), &mut lines, &mut current);
    flush_line(&mut lines, &mut current);

    let mut out: Vec<&str> = Vec::new();
    let mut previous_blank = false;
    for line in &lines {
        if line.is_empty() {
            if !previous_blank && !out.is_empty() {
                out.push("");
            }
            previous_blank = true;
        } else {
            out.push(line);
            previous_blank = false;
        }
    }
    while out.last() == Some(&"") {
        out.pop();
    }
    out.join("\n")
}

fn flush_line(lines: &mut Vec<String>, current: &mut String) {
    let normalized = current.split_whitespace().collect::<Vec<_>>().join(" ");
    lines.push(normalized);
    current.clear();
}

fn emit_node(
    node: ego_tree::NodeRef<'_, Node>,
    lines: &mut Vec<String>,
    current: &mut String,
) {
    match node.value() {
        Node::Text(text) => {
            // Newlines inside text nodes are honored as line boundaries;
            // this is what makes the conversion idempotent on plain text.
            let content: &str = &text.text;
            let mut parts = content.split('\n');
            if let Some(first) = parts.next() {
                current.push(' ');
                current.push_str(first);
            }
            for part in parts {
                flush_line(lines, current);
                current.push_str(part);
            }
        }
        Node::Element(element) => {
            let tag = element.name();
            if SKIP_TAGS.contains(&tag) {
                return;
            }
            let is_block = BLOCK_TAGS.contains(&tag);
            if is_block {
                flush_line(lines, current);
            }
            for child in node.children() {
                emit_node(child, lines, current);
            }
            if is_block {
                flush_line(lines, current);
            }
        }
        _ => {
            for child in node.children() {
                emit_node(child, lines, current);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Policy documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageGuess {
    pub code: String,
    pub confidence: f64,
}

/// A fetched-and-converted policy. `policy_id` is a content hash over the
/// normalized plain text, so byte-different mirrors of the same policy hash
/// equal and reuse detection works across URLs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub policy_id: String,
    pub source_url: String,
    pub raw_html: String,
    pub plain_text: String,
    /// Byte length of `plain_text`.
    pub text_bytes: usize,
    pub language: LanguageGuess,
}

/// Content hash of the normalized (lowercased, whitespace-collapsed) plain
/// text.
pub fn policy_id_for(plain_text: &str) -> String {
    let normalized = plain_text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let mut hasher = Sha256::new();
    hasher.update(normalized.as_bytes());
    hex::encode(hasher.finalize())
}

pub fn build_document(source_url: &str, raw_html: &str) -> PolicyDocument {
    let plain_text = html_to_text(raw_html);
    let (code, confidence) = guess_language(&plain_text);
    PolicyDocument {
        policy_id: policy_id_for(&plain_text),
        source_url: source_url.to_string(),
        text_bytes: plain_text.len(),
        language: LanguageGuess { code, confidence },
        plain_text,
        raw_html: raw_html.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Language guessing
// ---------------------------------------------------------------------------

const MIN_LANGUAGE_CHARS: usize = 40;

const EN_STOPWORDS: &[&str] = &[
    "the", "and", "of", "to", "in", "that", "we", "you", "your", "is", "are", "for", "with",
    "this", "our", "not", "will", "may", "any", "or", "by", "as", "on", "be", "have", "from",
    "at", "which", "when", "can", "if", "about", "other", "use", "such", "also",
];

const PT_STOPWORDS: &[&str] = &[
    "de", "que", "e", "do", "da", "em", "um", "para", "com", "não", "uma", "os", "no", "se",
    "na", "por", "mais", "as", "dos", "como", "mas", "ao", "das", "seu", "sua", "ou", "ser",
    "quando", "muito", "nos", "já", "está", "também", "pelo", "pela", "até", "isso", "ela",
    "entre", "depois", "sem", "mesmo", "aos", "seus", "suas", "nossa", "nosso", "você", "são",
    "informações", "dados",
];

const ES_STOPWORDS: &[&str] = &[
    "de", "la", "que", "el", "en", "y", "a", "los", "del", "se", "las", "por", "un", "para",
    "con", "no", "una", "su", "al", "lo", "como", "más", "pero", "sus", "le", "ya", "o", "este",
    "porque", "esta", "entre", "cuando", "muy", "sin", "sobre", "también", "hasta", "hay",
    "donde", "desde", "todo", "nos", "durante", "todos", "uno", "les", "ni", "otros", "esto",
    "usted", "nosotros", "información", "datos",
];

const DE_STOPWORDS: &[&str] = &[
    "der", "die", "und", "in", "den", "von", "zu", "das", "mit", "sich", "des", "auf", "für",
    "ist", "im", "dem", "nicht", "ein", "eine", "als", "auch", "es", "an", "werden", "aus",
    "er", "hat", "dass", "sie", "nach", "wird", "bei", "einer", "um", "am", "sind", "noch",
    "wie", "einem", "über", "einen", "so", "zum", "wir", "ihre", "durch", "oder", "daten",
];

const FR_STOPWORDS: &[&str] = &[
    "de", "la", "le", "et", "les", "des", "en", "un", "du", "une", "que", "est", "pour", "qui",
    "dans", "par", "plus", "pas", "au", "sur", "ne", "se", "ce", "il", "sont", "vous", "nous",
    "votre", "nos", "aux", "avec", "son", "ses", "ou", "être", "cette", "ces", "leur", "si",
    "tout", "comme", "mais", "ont", "aussi", "sans", "peut", "dont", "données",
];

const LATIN_PROFILES: &[(&str, &[&str])] = &[
    ("en", EN_STOPWORDS),
    ("pt", PT_STOPWORDS),
    ("es", ES_STOPWORDS),
    ("de", DE_STOPWORDS),
    ("fr", FR_STOPWORDS),
];

/// Stopword-profile heuristic over a fixed small language set (en, ja, ko,
/// pt, es, de, fr, zh). CJK scripts short-circuit on character classes;
/// Latin-script languages are scored by stopword density and confidence is
/// the top-2 margin normalized to [0, 1]. Texts under 40 characters come
/// back as `("und", 0.0)`.
pub fn guess_language(text: &str) -> (String, f64) {
    if text.chars().count() < MIN_LANGUAGE_CHARS {
        return ("und".to_string(), 0.0);
    }

    let mut hangul = 0usize;
    let mut kana = 0usize;
    let mut han = 0usize;
    let mut alphabetic = 0usize;
    for c in text.chars() {
        if c.is_alphabetic() {
            alphabetic += 1;
        }
        let code = c as u32;
        match code {
            0xAC00..=0xD7AF | 0x1100..=0x11FF | 0x3130..=0x318F => hangul += 1,
            0x3040..=0x309F | 0x30A0..=0x30FF => kana += 1,
            0x4E00..=0x9FFF | 0x3400..=0x4DBF => han += 1,
            _ => {}
        }
    }
    let cjk_total = hangul + kana + han;
    if alphabetic > 0 && cjk_total * 3 >= alphabetic {
        let (code, dominant) = if hangul >= kana && hangul >= han {
            ("ko", hangul)
        } else if kana > 0 {
            // Japanese mixes kana with han characters.
            ("ja", kana + han)
        } else {
            ("zh", han)
        };
        let confidence = dominant as f64 / cjk_total as f64;
        return (code.to_string(), confidence.clamp(0.0, 1.0));
    }

    let tokens: Vec<String> = text
        .to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return ("und".to_string(), 0.0);
    }
    let mut scores: Vec<(f64, &str)> = LATIN_PROFILES
        .iter()
        .map(|(code, stopwords)| {
            let hits = tokens
                .iter()
                .filter(|t| stopwords.contains(&t.as_str()))
                .count();
            (hits as f64 / tokens.len() as f64, *code)
        })
        .collect();
    scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let (top_score, top_code) = scores[0];
    if top_score <= 0.0 {
        return ("und".to_string(), 0.0);
    }
    let runner_up = scores[1].0;
    let confidence = ((top_score - runner_up) / top_score).clamp(0.0, 1.0);
    (top_code.to_string(), confidence)
}

// ---------------------------------------------------------------------------
// Admission
// ---------------------------------------------------------------------------

/// Admission reason codes, serialized snake_case and kept sorted inside a
/// decision.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash,
)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionReason {
    Empty,
    FetchFailed,
    NonEnglish,
    NonHtml,
    Oversize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    pub admitted: bool,
    pub reasons: Vec<AdmissionReason>,
}

impl AdmissionDecision {
    fn from_reasons(mut reasons: Vec<AdmissionReason>) -> Self {
        reasons.sort();
        reasons.dedup();
        AdmissionDecision {
            admitted: reasons.is_empty(),
            reasons,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissionLimits {
    /// Upper bound on converted plain-text size; the classic corpus cut-off
    /// is 50 KB of text.
    pub max_text_bytes: usize,
    pub min_language_confidence: f64,
}

impl Default for AdmissionLimits {
    fn default() -> Self {
        AdmissionLimits {
            max_text_bytes: 51200,
            min_language_confidence: 0.3,
        }
    }
}

/// Fetch-level context the document alone does not carry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdmissionContext {
    /// Content type reported by the server; `None` (local file) is treated
    /// as HTML-like.
    pub content_type: Option<String>,
    pub fetch_failed: bool,
}

fn content_type_is_html(content_type: &str) -> bool {
    let lowered = content_type.to_ascii_lowercase();
    lowered.is_empty() || lowered.contains("html") || lowered.contains("xml")
}

/// Apply the admission filters. Pure and deterministic: same input, same
/// sorted reason list.
pub fn admit_policy(
    document: &PolicyDocument,
    context: &AdmissionContext,
    limits: &AdmissionLimits,
) -> AdmissionDecision {
    let mut reasons = Vec::new();
    if context.fetch_failed {
        reasons.push(AdmissionReason::FetchFailed);
    }
    if let Some(content_type) = &context.content_type {
        if !content_type_is_html(content_type) {
            reasons.push(AdmissionReason::NonHtml);
        }
    }
    if document.plain_text.trim().is_empty() {
        reasons.push(AdmissionReason::Empty);
    } else {
        if document.text_bytes > limits.max_text_bytes {
            reasons.push(AdmissionReason::Oversize);
        }
        let english = document.language.code == "en"
            && document.language.confidence >= limits.min_language_confidence;
        if !english {
            reasons.push(AdmissionReason::NonEnglish);
        }
    }
    AdmissionDecision::from_reasons(reasons)
}
