//! privaudit — audits the consistency of mobile-app privacy disclosures.
//!
//! The pipeline ingests a privacy policy (URL or saved HTML), segments it
//! into heading-bounded sections and paragraph units, classifies each unit
//! into a practice class, decodes fine-grained practice tuples from the
//! collect/share units, maps the decoded items and purposes onto a fixed
//! taxonomy (with batch validation and a total verifier correcting every
//! failure), and builds per-policy collect/share practice matrices. On the
//! declaration side it normalizes Play data-safety pages into binary
//! matrices in the same taxonomy, and on the code side it turns manifest
//! permissions and API references into an evidence set. Compliance metrics,
//! corpus-level analyses and JSON/HTML reports sit on top.
//!
//! Two backends drive the text-model tasks: a remote chat-completion client
//! and a deterministic rule backend that keeps the whole pipeline
//! offline-testable. See the crate examples for one runnable walkthrough per
//! capability, and `src/main.rs` for the CLI.

pub mod backend;
pub mod ingest;
pub mod segmenter;
pub mod taxonomy;
