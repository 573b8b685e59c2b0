//! Fixed vocabularies shared by every stage of the pipeline: 23 data items,
//! 8 purposes, 12 practice classes, plus the two bridging maps (Play
//! data-safety category labels -> data items, Android permissions -> data
//! items with an API-call -> permission companion).
//!
//! The three vocabularies are closed and order-significant: the index of a
//! keyword in its array *is* its identity, and nothing in this crate ever
//! produces an id outside the enumerations. The bridging maps ship as a
//! versioned JSON data file (bundled by default) because the upstream label
//! strings drift over time; loading validates the file against the fixed
//! vocabularies so a stale or edited file can never silently reassign
//! indices.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

/// Canonical data-item keywords, index-significant. Indices 0..=20 are the
/// concrete items in prompt order; 21 is the generic bucket, 22 the negative
/// sentinel used to discard non-item text during keyword mapping.
pub const DATA_ITEM_KEYWORDS: [&str; 23] = [
    "name",
    "email",
    "user account",
    "address",
    "phone",
    "race/ethnicity",
    "political/religious",
    "gender",
    "financial",
    "location",
    "search and browsing history",
    "sms/messages/call log",
    "photos/videos",
    "audio/music",
    "health/fitness",
    "contacts",
    "calendar",
    "app performance/app activity",
    "device identifier",
    "files/documents",
    "other personal",
    "generic information",
    "negative",
];

/// Canonical purpose keywords, index-significant.
pub const PURPOSE_KEYWORDS: [&str; 8] = [
    "analytics",
    "developer communication",
    "fraud prevention/security",
    "advertising",
    "personalization",
    "account management",
    "app functionality",
    "other",
];

/// Practice-class labels c0..c11, index-significant.
pub const PRACTICE_CLASS_LABELS: [&str; 12] = [
    "First Party Collection / Use",
    "Third Party Sharing / Collection",
    "User Choice / Control",
    "User Access, Edit and Deletion",
    "Introductory / Generic",
    "Policy Change",
    "Data Security",
    "International & Specific Audiences",
    "Practice not covered",
    "Data Retention",
    "Privacy Contact Information",
    "Do Not Track",
];

/// One of the 23 data-item categories, identified by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataItemId(u8);

impl DataItemId {
    pub const COUNT: usize = 23;
    /// d[21], the catch-all for vague "your information" style mentions.
    pub const GENERIC: DataItemId = DataItemId(21);
    /// d[22], the sentinel for text that is not a data item at all.
    pub const NEGATIVE: DataItemId = DataItemId(22);
    pub const LOCATION: DataItemId = DataItemId(9);
    pub const DEVICE_IDENTIFIER: DataItemId = DataItemId(18);

    pub fn new(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(DataItemId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn keyword(self) -> &'static str {
        DATA_ITEM_KEYWORDS[self.index()]
    }

    /// True for the concrete items d[0..=20]; the generic and negative
    /// sentinels have no data-safety counterpart and are kept out of
    /// compliance denominators (they remain visible in matrices).
    pub fn is_compliance_relevant(self) -> bool {
        self.0 <= 20
    }

    pub fn all() -> impl Iterator<Item = DataItemId> {
        (0..Self::COUNT).map(|i| DataItemId(i as u8))
    }
}

impl fmt::Display for DataItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d[{}] {}", self.0, self.keyword())
    }
}

/// One of the 8 purpose categories, identified by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PurposeId(u8);

impl PurposeId {
    pub const COUNT: usize = 8;
    pub const ANALYTICS: PurposeId = PurposeId(0);
    pub const ADVERTISING: PurposeId = PurposeId(3);
    /// p[7], the fallback when a decoded purpose is empty or unmappable.
    pub const OTHER: PurposeId = PurposeId(7);

    pub fn new(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(PurposeId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn keyword(self) -> &'static str {
        PURPOSE_KEYWORDS[self.index()]
    }

    pub fn all() -> impl Iterator<Item = PurposeId> {
        (0..Self::COUNT).map(|i| PurposeId(i as u8))
    }
}

impl fmt::Display for PurposeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p[{}] {}", self.0, self.keyword())
    }
}

/// One of the 12 paragraph-level practice classes c0..c11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PracticeClass(u8);

impl PracticeClass {
    pub const COUNT: usize = 12;
    /// c0 — first-party collection / use.
    pub const FIRST_PARTY_COLLECTION: PracticeClass = PracticeClass(0);
    /// c1 — third-party sharing / collection.
    pub const THIRD_PARTY_SHARING: PracticeClass = PracticeClass(1);
    /// c4 — introductory / generic.
    pub const INTRODUCTORY: PracticeClass = PracticeClass(4);
    /// c10 — privacy contact information.
    pub const CONTACT: PracticeClass = PracticeClass(10);

    pub fn new(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(PracticeClass(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        PRACTICE_CLASS_LABELS[self.index()]
    }

    /// Does a paragraph of this class carry collect/share practices worth
    /// decoding into tuples?
    pub fn is_practice_bearing(self) -> bool {
        self.0 <= 1
    }

    pub fn all() -> impl Iterator<Item = PracticeClass> {
        (0..Self::COUNT).map(|i| PracticeClass(i as u8))
    }
}

impl fmt::Display for PracticeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{} {}", self.0, self.label())
    }
}

/// Keyword normalization used everywhere vocabulary strings are compared:
/// trim, lowercase, collapse internal whitespace runs to one space. No
/// stemming — the keywords are short fixed phrases and stemming risks false
/// merges.
pub fn normalize_keyword(text: &str) -> String {
    text.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

static ITEM_LOOKUP: LazyLock<BTreeMap<String, DataItemId>> = LazyLock::new(|| {
    DataItemId::all()
        .map(|id| (normalize_keyword(id.keyword()), id))
        .collect()
});

static PURPOSE_LOOKUP: LazyLock<BTreeMap<String, PurposeId>> = LazyLock::new(|| {
    PurposeId::all()
        .map(|id| (normalize_keyword(id.keyword()), id))
        .collect()
});

/// Exact (normalized) keyword -> data item. `"N/A"` is the wire spelling of
/// the negative sentinel. Returns `None` for out-of-vocabulary text; unmapped
/// is a value here, never an error.
pub fn data_item_from_keyword(text: &str) -> Option<DataItemId> {
    let normalized = normalize_keyword(text);
    if normalized.is_empty() {
        return None;
    }
    if normalized == "n/a" {
        return Some(DataItemId::NEGATIVE);
    }
    ITEM_LOOKUP.get(&normalized).copied()
}

/// Exact (normalized) keyword -> purpose. Returns `None` when out of
/// vocabulary.
pub fn purpose_from_keyword(text: &str) -> Option<PurposeId> {
    let normalized = normalize_keyword(text);
    if normalized.is_empty() {
        return None;
    }
    PURPOSE_LOOKUP.get(&normalized).copied()
}

/// Map a practice-class answer back to c0..c11. Accepts the canonical label
/// (case-insensitive), a `c<N>` token (zero-based), or a bare `<N>.` prefix
/// as produced by the numbered classification prompt (one-based).
pub fn practice_class_from_label(text: &str) -> Option<PracticeClass> {
    let normalized = normalize_keyword(text);
    if normalized.is_empty() {
        return None;
    }
    for class in PracticeClass::all() {
        if normalized.contains(&normalize_keyword(class.label())) {
            return Some(class);
        }
    }
    let token = normalized
        .trim_start_matches(|c: char| !c.is_ascii_alphanumeric())
        .split(|c: char| !c.is_ascii_alphanumeric())
        .next()
        .unwrap_or("");
    if let Some(digits) = token.strip_prefix('c') {
        if let Ok(n) = digits.parse::<usize>() {
            return PracticeClass::new(n);
        }
    }
    if let Ok(n) = token.parse::<usize>() {
        // The classification prompt numbers its categories 1..12.
        if (1..=PracticeClass::COUNT).contains(&n) {
            return PracticeClass::new(n - 1);
        }
    }
    None
}

/// Errors raised while loading or validating a taxonomy data file.
#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("failed to read taxonomy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("taxonomy file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid taxonomy file: {0}")]
    Invalid(String),
}

/// Case-folded Play data-safety category label -> data item. Lookup of an
/// unmapped label yields `None` explicitly; nothing defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DsCategoryMap {
    entries: BTreeMap<String, DataItemId>,
}

impl DsCategoryMap {
    pub fn lookup(&self, label: &str) -> Option<DataItemId> {
        self.entries.get(&normalize_keyword(label)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, DataItemId)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Android permission -> data item, plus the companion map from framework
/// API method signatures to the permission they imply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionItemMap {
    entries: BTreeMap<String, DataItemId>,
    api_permission_entries: BTreeMap<String, String>,
}

impl PermissionItemMap {
    pub fn item_for_permission(&self, permission: &str) -> Option<DataItemId> {
        self.entries.get(permission).copied()
    }

    pub fn permission_for_api(&self, method_signature: &str) -> Option<&str> {
        self.api_permission_entries
            .get(method_signature)
            .map(String::as_str)
    }

    pub fn permissions(&self) -> impl Iterator<Item = (&str, DataItemId)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn api_entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.api_permission_entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Build a map from raw entries, applying the same validation as file
    /// loading. Used by tests that need small fixture maps.
    pub fn from_entries(
        entries: BTreeMap<String, DataItemId>,
        api_permission_entries: BTreeMap<String, String>,
    ) -> Result<Self, TaxonomyError> {
        let map = PermissionItemMap {
            entries,
            api_permission_entries,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<(), TaxonomyError> {
        for (permission, item) in &self.entries {
            if !permission_shape_ok(permission) {
                return Err(TaxonomyError::Invalid(format!(
                    "permission `{permission}` does not look like a dotted permission name"
                )));
            }
            if item.index() > 20 {
                return Err(TaxonomyError::Invalid(format!(
                    "permission `{permission}` maps to non-concrete item index {}",
                    item.index()
                )));
            }
        }
        for (signature, permission) in &self.api_permission_entries {
            if signature.trim().is_empty() {
                return Err(TaxonomyError::Invalid(
                    "empty API method signature".to_string(),
                ));
            }
            if !permission_shape_ok(permission) {
                return Err(TaxonomyError::Invalid(format!(
                    "API entry `{signature}` maps to malformed permission `{permission}`"
                )));
            }
        }
        Ok(())
    }
}

/// `android.permission.*` or a vendor-prefixed equivalent: at least two
/// dot-separated segments of word characters / dashes.
fn permission_shape_ok(permission: &str) -> bool {
    let segments: Vec<&str> = permission.split('.').collect();
    segments.len() >= 2
        && segments.iter().all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        })
}

/// On-disk shape of the taxonomy data file. Arrays are order-significant
/// (index = position) and must match the fixed vocabularies exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaxonomyFile {
    version: u32,
    data_items: Vec<String>,
    purposes: Vec<String>,
    practice_classes: Vec<String>,
    ds_category_map: BTreeMap<String, u8>,
    permission_item_map: BTreeMap<String, u8>,
    api_permission_map: BTreeMap<String, String>,
}

/// The loaded, validated bridging maps. Immutable after load; share freely
/// across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub version: u32,
    pub ds_category_map: DsCategoryMap,
    pub permission_item_map: PermissionItemMap,
}

static BUNDLED: LazyLock<Taxonomy> = LazyLock::new(|| {
    Taxonomy::from_json(include_str!("../data/taxonomy.json"))
        .expect("bundled taxonomy data file must be valid")
});

impl Taxonomy {
    /// The taxonomy data file compiled into the binary.
    pub fn bundled() -> &'static Taxonomy {
        &BUNDLED
    }

    pub fn from_path(path: &Path) -> Result<Taxonomy, TaxonomyError> {
        Taxonomy::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(json: &str) -> Result<Taxonomy, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(json)?;
        file.validate()?;
        let ds_entries = file
            .ds_category_map
            .iter()
            .map(|(label, idx)| {
                (
                    normalize_keyword(label),
                    DataItemId::new(*idx as usize).expect("validated index"),
                )
            })
            .collect();
        let permission_entries = file
            .permission_item_map
            .iter()
            .map(|(p, idx)| {
                (
                    p.clone(),
                    DataItemId::new(*idx as usize).expect("validated index"),
                )
            })
            .collect();
        let permission_item_map =
            PermissionItemMap::from_entries(permission_entries, file.api_permission_map.clone())?;
        Ok(Taxonomy {
            version: file.version,
            ds_category_map: DsCategoryMap {
                entries: ds_entries,
            },
            permission_item_map,
        })
    }

    /// Serialize back to the file format without loss.
    pub fn to_json(&self) -> String {
        let file = TaxonomyFile {
            version: self.version,
            data_items: DATA_ITEM_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            purposes: PURPOSE_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            practice_classes: PRACTICE_CLASS_LABELS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ds_category_map: self
                .ds_category_map
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.index() as u8))
                .collect(),
            permission_item_map: self
                .permission_item_map
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.index() as u8))
                .collect(),
            api_permission_map: self.permission_item_map.api_permission_entries.clone(),
        };
        serde_json::to_string_pretty(&file).expect("taxonomy serialization cannot fail")
    }
}

impl TaxonomyFile {
    fn validate(&self) -> Result<(), TaxonomyError> {
        check_vocabulary("data_items", &self.data_items, &DATA_ITEM_KEYWORDS)?;
        check_vocabulary("purposes", &self.purposes, &PURPOSE_KEYWORDS)?;
        check_vocabulary(
            "practice_classes",
            &self.practice_classes,
            &PRACTICE_CLASS_LABELS,
        )?;
        for (label, idx) in &self.ds_category_map {
            if *idx as usize > 21 {
                return Err(TaxonomyError::Invalid(format!(
                    "ds_category_map entry `{label}` maps to index {idx}; \
                     the negative sentinel (22) is not a valid target"
                )));
            }
        }
        for (permission, idx) in &self.permission_item_map {
            if *idx as usize > 20 {
                return Err(TaxonomyError::Invalid(format!(
                    "permission_item_map entry `{permission}` maps to index {idx}; \
                     only concrete items 0..=20 are valid targets"
                )));
            }
        }
        Ok(())
    }
}

fn check_vocabulary(
    name: &str,
    found: &[String],
    expected: &[&str],
) -> Result<(), TaxonomyError> {
    if found.len() != expected.len() {
        return Err(TaxonomyError::Invalid(format!(
            "{name} must have exactly {} entries, found {}",
            expected.len(),
            found.len()
        )));
    }
    for (i, (f, e)) in found.iter().zip(expected.iter()).enumerate() {
        if f != e {
            return Err(TaxonomyError::Invalid(format!(
                "{name}[{i}] is `{f}`, expected `{e}` (arrays are order-significant)"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_roundtrip_for_every_id() {
        for id in DataItemId::all() {
            assert_eq!(data_item_from_keyword(id.keyword()), Some(id));
        }
        for id in PurposeId::all() {
            assert_eq!(purpose_from_keyword(id.keyword()), Some(id));
        }
    }

    #[test]
    fn location_maps_to_d9() {
        assert_eq!(data_item_from_keyword("location"), Some(DataItemId::LOCATION));
        assert_eq!(DataItemId::LOCATION.index(), 9);
    }

    #[test]
    fn na_maps_to_negative() {
        assert_eq!(data_item_from_keyword("N/A"), Some(DataItemId::NEGATIVE));
        assert_eq!(data_item_from_keyword("n/a"), Some(DataItemId::NEGATIVE));
    }

    #[test]
    fn normalization_handles_case_and_whitespace() {
        assert_eq!(
            data_item_from_keyword("Location "),
            Some(DataItemId::LOCATION)
        );
        assert_eq!(
            data_item_from_keyword("  app   performance/app activity"),
            DataItemId::new(17)
        );
    }

    #[test]
    fn advertising_is_p3_case_insensitive() {
        assert_eq!(purpose_from_keyword("advertising"), Some(PurposeId::ADVERTISING));
        assert_eq!(purpose_from_keyword("ADVERTISING"), Some(PurposeId::ADVERTISING));
        assert_eq!(PurposeId::ADVERTISING.index(), 3);
    }

    #[test]
    fn out_of_vocabulary_is_unmapped_not_error() {
        assert_eq!(purpose_from_keyword("growth hacking"), None);
        assert_eq!(data_item_from_keyword("cookies"), None);
    }

    #[test]
    fn compliance_relevance_excludes_sentinels() {
        assert!(DataItemId::LOCATION.is_compliance_relevant());
        assert!(!DataItemId::GENERIC.is_compliance_relevant());
        assert!(!DataItemId::NEGATIVE.is_compliance_relevant());
        assert_eq!(
            DataItemId::all().filter(|d| d.is_compliance_relevant()).count(),
            21
        );
    }

    #[test]
    fn endpoint_assignments_match_prompt_order() {
        assert_eq!(DataItemId::new(0).unwrap().keyword(), "name");
        assert_eq!(DataItemId::new(8).unwrap().keyword(), "financial");
        assert_eq!(
            DataItemId::new(17).unwrap().keyword(),
            "app performance/app activity"
        );
        assert_eq!(DataItemId::new(18).unwrap().keyword(), "device identifier");
        assert_eq!(DataItemId::new(20).unwrap().keyword(), "other personal");
        assert_eq!(DataItemId::new(21).unwrap().keyword(), "generic information");
    }

    #[test]
    fn practice_class_labels_parse_back() {
        for class in PracticeClass::all() {
            assert_eq!(practice_class_from_label(class.label()), Some(class));
        }
        assert_eq!(
            practice_class_from_label("c0"),
            Some(PracticeClass::FIRST_PARTY_COLLECTION)
        );
        assert_eq!(
            practice_class_from_label("1. First Party Collection / Use"),
            Some(PracticeClass::FIRST_PARTY_COLLECTION)
        );
        assert_eq!(
            practice_class_from_label("12"),
            PracticeClass::new(11)
        );
        assert_eq!(practice_class_from_label("nonsense"), None);
    }

    #[test]
    fn bundled_taxonomy_loads_and_roundtrips() {
        let bundled = Taxonomy::bundled();
        let reloaded = Taxonomy::from_json(&bundled.to_json()).unwrap();
        assert_eq!(*bundled, reloaded);
    }

    #[test]
    fn ds_category_lookup_is_explicit_about_unmapped() {
        let tax = Taxonomy::bundled();
        assert_eq!(
            tax.ds_category_map.lookup("Device or other IDs"),
            Some(DataItemId::DEVICE_IDENTIFIER)
        );
        assert_eq!(tax.ds_category_map.lookup("made-up category"), None);
    }

    #[test]
    fn ds_category_map_never_targets_negative() {
        for (_, item) in Taxonomy::bundled().ds_category_map.iter() {
            assert!(item.index() <= 21);
        }
    }

    #[test]
    fn permission_map_targets_concrete_items_only() {
        for (_, item) in Taxonomy::bundled().permission_item_map.permissions() {
            assert!(item.index() <= 20);
        }
    }

    #[test]
    fn rejects_reordered_vocabulary() {
        let mut json: serde_json::Value =
            serde_json::from_str(include_str!("../data/taxonomy.json")).unwrap();
        let items = json["data_items"].as_array_mut().unwrap();
        items.swap(0, 1);
        let err = Taxonomy::from_json(&json.to_string()).unwrap_err();
        assert!(matches!(err, TaxonomyError::Invalid(_)));
    }

    #[test]
    fn rejects_negative_target_in_ds_map() {
        let mut json: serde_json::Value =
            serde_json::from_str(include_str!("../data/taxonomy.json")).unwrap();
        json["ds_category_map"]["bogus"] = serde_json::json!(22);
        let err = Taxonomy::from_json(&json.to_string()).unwrap_err();
        assert!(matches!(err, TaxonomyError::Invalid(_)));
    }

    #[test]
    fn rejects_malformed_permission_shape() {
        let mut json: serde_json::Value =
            serde_json::from_str(include_str!("../data/taxonomy.json")).unwrap();
        json["permission_item_map"]["not a permission"] = serde_json::json!(9);
        let err = Taxonomy::from_json(&json.to_string()).unwrap_err();
        assert!(matches!(err, TaxonomyError::Invalid(_)));
    }
}
