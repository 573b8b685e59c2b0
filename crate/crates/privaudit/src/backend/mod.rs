//! The text-model contract behind segmentation, classification, decoding,
//! keyword mapping and verification, with two implementations: a remote
//! chat-completion client and a deterministic rule backend for offline runs
//! and tests.
//!
//! Every task has a fixed payload schema and a fixed output grammar;
//! `parse_raw` is the single parser both backends go through, so
//! `BackendResponse::parsed` is present exactly when the raw text conforms.

pub mod prompts;
pub mod remote;
pub mod rule;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{
    self, data_item_from_keyword, purpose_from_keyword, DataItemId, PracticeClass, PurposeId,
};

pub use rule::{RuleBackend, RuleLexicon};

/// The tasks a backend can be asked to perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Headings,
    Classify,
    Decode,
    MapItems,
    MapPurposes,
    VerifyItem,
    VerifyPurpose,
}

/// Task-specific structured input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskPayload {
    Headings { text: String },
    Classify { text: String },
    Decode { text: String },
    MapItems { items: Vec<String> },
    MapPurposes { purposes: Vec<String> },
    VerifyItem { item: String },
    VerifyPurpose { purpose: String },
}

impl TaskPayload {
    pub fn task(&self) -> Task {
        match self {
            TaskPayload::Headings { .. } => Task::Headings,
            TaskPayload::Classify { .. } => Task::Classify,
            TaskPayload::Decode { .. } => Task::Decode,
            TaskPayload::MapItems { .. } => Task::MapItems,
            TaskPayload::MapPurposes { .. } => Task::MapPurposes,
            TaskPayload::VerifyItem { .. } => Task::VerifyItem,
            TaskPayload::VerifyPurpose { .. } => Task::VerifyPurpose,
        }
    }
}

/// Output-size and determinism knobs carried with each request. Backends
/// that support it must produce reproducible output when `deterministic`
/// is set (the remote client sends temperature 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendBudget {
    pub max_output_tokens: u32,
    pub deterministic: bool,
}

impl BackendBudget {
    pub fn for_task(task: Task) -> Self {
        let max_output_tokens = match task {
            Task::Headings => 512,
            Task::Classify => 256,
            Task::Decode => 1024,
            Task::MapItems | Task::MapPurposes => 512,
            Task::VerifyItem | Task::VerifyPurpose => 32,
        };
        BackendBudget {
            max_output_tokens,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub payload: TaskPayload,
    pub budget: BackendBudget,
}

impl BackendRequest {
    pub fn new(payload: TaskPayload) -> Self {
        let budget = BackendBudget::for_task(payload.task());
        BackendRequest { payload, budget }
    }
}

/// A practice tuple decoded from one paragraph. `data` is never empty in a
/// parsed tuple; the other elements may be. The wire key for `retention`
/// is `storage`, matching the decode task's output schema.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeTuple {
    #[serde(default)]
    pub data: String,
    #[serde(default)]
    pub purpose: String,
    #[serde(default)]
    pub processing: String,
    #[serde(rename = "storage", alias = "retention", default)]
    pub retention: String,
    #[serde(default)]
    pub recipients: String,
}

/// Structured result of a successfully parsed response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskOutput {
    Headings(Vec<String>),
    Classification { label: String, rationale: String },
    Tuples(Vec<PracticeTuple>),
    Keywords(Vec<String>),
    Keyword(String),
}

#[derive(Debug, Clone)]
pub struct BackendResponse {
    pub task: Task,
    pub raw_text: String,
    pub parsed: Option<TaskOutput>,
    pub parse_error: Option<String>,
    pub latency: Duration,
    pub backend_id: String,
}

impl BackendResponse {
    pub fn from_raw(task: Task, raw_text: String, latency: Duration, backend_id: &str) -> Self {
        let (parsed, parse_error) = match parse_raw(task, &raw_text) {
            Ok(output) => (Some(output), None),
            Err(msg) => (None, Some(msg)),
        };
        BackendResponse {
            task,
            raw_text,
            parsed,
            parse_error,
            latency,
            backend_id: backend_id.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure talking to backend: {0}")]
    Transport(String),
    #[error("backend returned HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("backend request timed out")]
    Timeout,
    #[error("backend retries exhausted: {0}")]
    RetriesExhausted(String),
    #[error("backend response did not match the task grammar: {0}")]
    Parse(String),
    #[error("invalid backend request: {0}")]
    InvalidRequest(String),
    #[error("API key environment variable `{0}` is not set")]
    MissingApiKey(String),
}

/// A text model that can answer the pipeline's task requests. Implementations
/// must be safe for concurrent calls.
pub trait TextBackend: Send + Sync {
    fn id(&self) -> &str;
    fn run(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

/// Which keyword vocabulary a mapping/verification call targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vocabulary {
    DataItems,
    Purposes,
}

impl Vocabulary {
    /// Is `text` an in-vocabulary keyword (after normalization)? For data
    /// items the vocabulary includes the generalized keywords and `N/A`.
    pub fn contains(&self, text: &str) -> bool {
        match self {
            Vocabulary::DataItems => data_item_from_keyword(text).is_some(),
            Vocabulary::Purposes => purpose_from_keyword(text).is_some(),
        }
    }

    /// Canonical wire spelling of an in-vocabulary keyword (`N/A` for the
    /// negative sentinel), or `None` when out of vocabulary.
    pub fn canonicalize(&self, text: &str) -> Option<String> {
        match self {
            Vocabulary::DataItems => data_item_from_keyword(text).map(item_wire_keyword),
            Vocabulary::Purposes => {
                purpose_from_keyword(text).map(|p| p.keyword().to_string())
            }
        }
    }

}

/// The negative sentinel is spelled `N/A` on the wire.
pub fn item_wire_keyword(item: DataItemId) -> String {
    if item == DataItemId::NEGATIVE {
        "N/A".to_string()
    } else {
        item.keyword().to_string()
    }
}

// ---------------------------------------------------------------------------
// Output grammar parsing (shared by all backends)
// ---------------------------------------------------------------------------

/// Parse raw response text against the task's output grammar.
pub fn parse_raw(task: Task, raw: &str) -> Result<TaskOutput, String> {
    match task {
        Task::Headings => Ok(TaskOutput::Headings(parse_headings(raw))),
        Task::Classify => parse_classification(raw),
        Task::Decode => parse_tuples(raw).map(TaskOutput::Tuples),
        Task::MapItems | Task::MapPurposes => parse_keywords(raw).map(TaskOutput::Keywords),
        Task::VerifyItem | Task::VerifyPurpose => parse_single_keyword(raw).map(TaskOutput::Keyword),
    }
}

fn parse_headings(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|line| {
            line.trim()
                .trim_start_matches(['-', '*', '•'])
                .trim()
                .to_string()
        })
        .filter(|line| !line.is_empty())
        .collect()
}

fn parse_classification(raw: &str) -> Result<TaskOutput, String> {
    let label = capture_after(raw, "matching category")
        .ok_or_else(|| "missing `Matching category = '...'` line".to_string())?;
    let rationale = capture_after(raw, "reasoning").unwrap_or_default();
    if label.is_empty() {
        return Err("empty category label".to_string());
    }
    Ok(TaskOutput::Classification { label, rationale })
}

/// Pull the quoted (or rest-of-line) value from a `Key = 'value'` line,
/// tolerating `:` separators and double quotes.
fn capture_after(raw: &str, key: &str) -> Option<String> {
    for line in raw.lines() {
        let lower = line.to_lowercase();
        let Some(pos) = lower.find(key) else { continue };
        let rest = &line[pos + key.len()..];
        let rest = rest.trim_start().trim_start_matches(['=', ':']).trim();
        let value = if let Some(stripped) = rest.strip_prefix('\'') {
            stripped.split('\'').next().unwrap_or("")
        } else if let Some(stripped) = rest.strip_prefix('"') {
            stripped.split('"').next().unwrap_or("")
        } else {
            rest
        };
        return Some(value.trim().to_string());
    }
    None
}

fn parse_tuples(raw: &str) -> Result<Vec<PracticeTuple>, String> {
    let json = extract_bracketed(raw, '[', ']')
        .ok_or_else(|| "no JSON list found in decode output".to_string())?;
    let tuples: Vec<PracticeTuple> =
        serde_json::from_str(json).map_err(|e| format!("decode output is not a tuple list: {e}"))?;
    // Tuples without a data element violate the decode contract and are
    // dropped during parsing.
    Ok(tuples
        .into_iter()
        .filter(|t| !t.data.trim().is_empty())
        .collect())
}

fn parse_keywords(raw: &str) -> Result<Vec<String>, String> {
    if let Some(json) = extract_bracketed(raw, '[', ']') {
        if let Ok(list) = serde_json::from_str::<Vec<String>>(json) {
            return Ok(list);
        }
        // `output_list=['input': 'keyword', ...]` — take the mapped values
        // in order.
        let pairs = pythonish_pairs(json);
        if !pairs.is_empty() {
            return Ok(pairs);
        }
    }
    if let Some(json) = extract_bracketed(raw, '{', '}') {
        let pairs = pythonish_pairs(json);
        if !pairs.is_empty() {
            return Ok(pairs);
        }
    }
    Err("no keyword list found in mapping output".to_string())
}

fn pythonish_pairs(text: &str) -> Vec<String> {
    let re = regex::Regex::new(r"'([^']*)'\s*:\s*'([^']*)'").expect("static regex");
    re.captures_iter(text)
        .map(|cap| cap[2].to_string())
        .collect()
}

fn parse_single_keyword(raw: &str) -> Result<String, String> {
    raw.lines()
        .map(|line| line.trim().trim_matches(['\'', '"', '.']).trim().to_string())
        .find(|line| !line.is_empty())
        .ok_or_else(|| "empty verification output".to_string())
}

/// First balanced `open...close` region of `raw`, brackets included. Quotes
/// are respected so bracket characters inside strings do not confuse the
/// scan.
fn extract_bracketed(raw: &str, open: char, close: char) -> Option<&str> {
    let start = raw.find(open)?;
    let mut depth = 0usize;
    let mut in_string: Option<char> = None;
    let mut prev_escape = false;
    for (offset, c) in raw[start..].char_indices() {
        if let Some(quote) = in_string {
            if prev_escape {
                prev_escape = false;
            } else if c == '\\' {
                prev_escape = true;
            } else if c == quote {
                in_string = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => in_string = Some(c),
            c if c == open => depth += 1,
            c if c == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(&raw[start..start + offset + c.len_utf8()]);
                }
            }
            _ => {}
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Task-level operations
// ---------------------------------------------------------------------------

/// Classify one paragraph into a practice class with a verbatim excerpt as
/// rationale. A response whose rationale is not a substring of the input is
/// retried once; after that the rationale falls back to the first sentence
/// containing a rule-lexicon trigger for the chosen class, or empty.
pub fn classify_paragraph(
    text: &str,
    backend: &dyn TextBackend,
) -> Result<(PracticeClass, String), BackendError> {
    let request = BackendRequest::new(TaskPayload::Classify {
        text: text.to_string(),
    });
    let mut last_error = String::new();
    let mut best_label: Option<PracticeClass> = None;
    for _attempt in 0..2 {
        let response = backend.run(&request)?;
        match response.parsed {
            Some(TaskOutput::Classification { label, rationale }) => {
                match taxonomy::practice_class_from_label(&label) {
                    Some(class) => {
                        if !rationale.is_empty() && text.contains(&rationale) {
                            return Ok((class, rationale));
                        }
                        if rationale.is_empty() {
                            return Ok((class, rationale));
                        }
                        best_label = Some(class);
                        last_error = "rationale was not a verbatim excerpt".to_string();
                    }
                    None => last_error = format!("unknown class label `{label}`"),
                }
            }
            _ => {
                last_error = response
                    .parse_error
                    .unwrap_or_else(|| "unparseable classification".to_string());
            }
        }
    }
    if let Some(class) = best_label {
        let fallback = rule::trigger_sentence(text, class, RuleLexicon::bundled());
        return Ok((class, fallback.unwrap_or_default()));
    }
    Err(BackendError::Parse(last_error))
}

/// Decode the five practice elements from one paragraph. One backend call;
/// the caller decides whether to retry a parse failure.
pub fn decode_elements(
    text: &str,
    backend: &dyn TextBackend,
) -> Result<Vec<PracticeTuple>, BackendError> {
    let request = BackendRequest::new(TaskPayload::Decode {
        text: text.to_string(),
    });
    let response = backend.run(&request)?;
    match response.parsed {
        Some(TaskOutput::Tuples(tuples)) => Ok(tuples),
        _ => Err(BackendError::Parse(
            response
                .parse_error
                .unwrap_or_else(|| "unparseable decode output".to_string()),
        )),
    }
}

/// Maximum batch size for keyword mapping.
pub const MAX_MAP_BATCH: usize = 20;

/// Map a batch of free-text strings onto vocabulary keywords, positionally.
/// Outputs are returned as-is: count mismatches and out-of-vocabulary
/// entries are NOT fixed here — the extraction stage validates and routes
/// failures through the verifier.
pub fn map_keywords_batch(
    inputs: &[String],
    vocabulary: Vocabulary,
    backend: &dyn TextBackend,
) -> Result<Vec<String>, BackendError> {
    if inputs.is_empty() || inputs.len() > MAX_MAP_BATCH {
        return Err(BackendError::InvalidRequest(format!(
            "mapping batch must hold 1..={MAX_MAP_BATCH} entries, got {}",
            inputs.len()
        )));
    }
    let payload = match vocabulary {
        Vocabulary::DataItems => TaskPayload::MapItems {
            items: inputs.to_vec(),
        },
        Vocabulary::Purposes => TaskPayload::MapPurposes {
            purposes: inputs.to_vec(),
        },
    };
    let response = backend.run(&BackendRequest::new(payload))?;
    match response.parsed {
        Some(TaskOutput::Keywords(keywords)) => Ok(keywords),
        _ => Err(BackendError::Parse(
            response
                .parse_error
                .unwrap_or_else(|| "unparseable mapping output".to_string()),
        )),
    }
}

/// Map one string to exactly one in-vocabulary keyword. Total by contract:
/// backend failures and out-of-vocabulary answers fall back to the rule
/// verifier (synonym match, then token overlap, then the generic/other
/// fallback), so the result is always in vocabulary.
pub fn verify_keyword(item: &str, vocabulary: Vocabulary, backend: &dyn TextBackend) -> String {
    let payload = match vocabulary {
        Vocabulary::DataItems => TaskPayload::VerifyItem {
            item: item.to_string(),
        },
        Vocabulary::Purposes => TaskPayload::VerifyPurpose {
            purpose: item.to_string(),
        },
    };
    if let Ok(response) = backend.run(&BackendRequest::new(payload)) {
        if let Some(TaskOutput::Keyword(keyword)) = response.parsed {
            if let Some(canonical) = vocabulary.canonicalize(&keyword) {
                return canonical;
            }
        }
    }
    rule::rule_verify_keyword(item, vocabulary, RuleLexicon::bundled())
}

// ---------------------------------------------------------------------------
// Fallback composition
// ---------------------------------------------------------------------------

/// Runs every request against `primary` and falls back to `fallback` on
/// error, counting how often the fallback answered so the pipeline can
/// annotate reports.
pub struct FallbackBackend {
    primary: Box<dyn TextBackend>,
    fallback: Box<dyn TextBackend>,
    id: String,
    fallback_uses: Arc<AtomicUsize>,
}

impl FallbackBackend {
    pub fn new(primary: Box<dyn TextBackend>, fallback: Box<dyn TextBackend>) -> Self {
        let id = format!("{}+{}", primary.id(), fallback.id());
        FallbackBackend {
            primary,
            fallback,
            id,
            fallback_uses: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn fallback_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.fallback_uses)
    }
}

impl TextBackend for FallbackBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn run(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        match self.primary.run(request) {
            Ok(response) => Ok(response),
            Err(_) => {
                self.fallback_uses.fetch_add(1, Ordering::Relaxed);
                self.fallback.run(request)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_keyword_array() {
        let parsed = parse_keywords(r#"["location", "N/A"]"#).unwrap();
        assert_eq!(parsed, vec!["location", "N/A"]);
    }

    #[test]
    fn parses_pythonish_pair_list() {
        let parsed =
            parse_keywords("output_list=['GPS coordinates': 'location', 'etc.': 'N/A']").unwrap();
        assert_eq!(parsed, vec!["location", "N/A"]);
    }

    #[test]
    fn parses_classification_line_format() {
        let raw = "Matching category = 'First Party Collection / Use'\nReasoning = 'We collect data'";
        match parse_classification(raw).unwrap() {
            TaskOutput::Classification { label, rationale } => {
                assert_eq!(label, "First Party Collection / Use");
                assert_eq!(rationale, "We collect data");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn parses_tuples_and_drops_empty_data() {
        let raw = r#"Here you go: [{"data": "location", "purpose": "ads"},
                      {"data": "", "purpose": "x"}]"#;
        let tuples = parse_tuples(raw).unwrap();
        assert_eq!(tuples.len(), 1);
        assert_eq!(tuples[0].data, "location");
        assert_eq!(tuples[0].purpose, "ads");
    }

    #[test]
    fn tuple_wire_key_is_storage() {
        let tuple = PracticeTuple {
            data: "location".into(),
            retention: "30 days".into(),
            ..Default::default()
        };
        let json = serde_json::to_string(&tuple).unwrap();
        assert!(json.contains("\"storage\":\"30 days\""));
        let back: PracticeTuple = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tuple);
        let via_alias: PracticeTuple =
            serde_json::from_str(r#"{"data":"x","retention":"forever"}"#).unwrap();
        assert_eq!(via_alias.retention, "forever");
    }

    #[test]
    fn bracket_extraction_respects_strings() {
        let raw = r#"noise [ {"data": "a ] b"} ] trailing"#;
        assert_eq!(extract_bracketed(raw, '[', ']'), Some(r#"[ {"data": "a ] b"} ]"#));
    }

    #[test]
    fn batch_arity_is_enforced_on_input() {
        let backend = RuleBackend::bundled();
        let too_many: Vec<String> = (0..21).map(|i| format!("item {i}")).collect();
        assert!(matches!(
            map_keywords_batch(&too_many, Vocabulary::DataItems, &backend),
            Err(BackendError::InvalidRequest(_))
        ));
        assert!(matches!(
            map_keywords_batch(&[], Vocabulary::DataItems, &backend),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn vocabulary_membership_and_canonical_spelling() {
        assert!(Vocabulary::DataItems.contains("Location"));
        assert!(Vocabulary::DataItems.contains("N/A"));
        assert!(!Vocabulary::DataItems.contains("cookies"));
        assert_eq!(
            Vocabulary::DataItems.canonicalize("N/A"),
            Some("N/A".to_string())
        );
        assert_eq!(
            Vocabulary::Purposes.canonicalize("ADVERTISING"),
            Some("advertising".to_string())
        );
        assert_eq!(Vocabulary::Purposes.canonicalize("growth hacking"), None);
    }
}
