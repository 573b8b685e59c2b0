//! Prompt templates for the remote backend, one per task, with `{...}`
//! slots filled at request time. The classification, decoding and keyword
//! mapping templates are fixed wording that must not be edited casually —
//! the output grammars the parsers expect are anchored to them. The heading
//! template is tool-defined wording and may change between versions.

use serde::{Deserialize, Serialize};

use super::TaskPayload;
use crate::taxonomy::{DATA_ITEM_KEYWORDS, PURPOSE_KEYWORDS};

/// One chat message on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".to_string(),
            content: content.into(),
        }
    }
}

pub const CLASSIFY_TEMPLATE: &str = "\
I will give you the annotation scheme consisting of twelve data practice categories with explanations. The annotations are to the website's privacy policy.
1. First Party Collection / Use: how and why a service provider collects user information.
2. Third Party Sharing / Collection: how user information may be shared with or collected by third parties.
3. User Choice / Control: choices and control options available to users.
4. User Access, Edit and Deletion: if and how users may access, edit, or delete their information
5. Introductory / Generic: if mentions about generic information or if its introductory
6. Policy Change: if and how users will be informed about changes to the privacy policy.
7. Data Security: how user information is protected.
8. International and Specific Audiences: practices that pertain only to a specific group of users (e.g., children, Europeans, or California residents).
9. Practice not covered: mentions that a practice is not covered by that privacy policy.
10. Data Retention: how long user information is stored.
11. Privacy contact information: how the users could contact for relevant information
12. Do Not Track: if and how Do Not Track signals for online tracking and advertising are honored
Based on the text provided, select the most matching category and provide a reason. The reason is a text excerpt (annotation) from the provided paragraph itself that explains best for the matching category provided.Please follow the output structure like this;
Matching category = 'category'
Reasoning = 'text annotation'";

pub const DECODE_TEMPLATE: &str = "\
By going through the following privacy policy text, identify each suitable segment of text according to the following structured components:
1.data: what type of data,
2.purpose: why is this data required,
3.processing: in which circumstances this data is utilized,
4.storage: how long this data is stored or retained,
5.recipients: who are the intended users for this data.
Please note that sometimes it might not be possible to fill all five types above, if so, leave them empty. Provide the output as a JSON list.";

pub const DECODE_EXAMPLE: &str = "\
Here is an example:
processed_jsons = [{'data': 'what type', 'purpose':'why', 'processing':'how utilized', 'storage':'how long stored', 'recipients':'who are recipients'}, ...]";

pub const MAP_ITEMS_TEMPLATE: &str = "\
The task is to map different data items in a given evaluation_list with the most suitable keywords.
Predefined keyword_list: ['name', 'email', 'user account', 'address', 'phone', 'race/ethnicity', 'political/religious', 'gender', 'financial', 'location', 'search and browsing history', 'sms/messages/call log', 'photos/videos', 'audio/music', 'health/fitness', 'contacts', 'calendar', 'app performance/app activity', 'device identifier', 'files/documents', 'other personal'].
Match each item in the following evaluation_list to the most relevant keyword from the predefined keyword_list above.
Return the results in this format. output_list=['data item1': 'keyword1', 'data item2': 'keyword2', ...]. Do not include explanations or extra text.
if something in evaluation_list is too generic, output it as 'generic information' but this output is discouraged
Please use the 'N/A' to indicate if an item is not suitable (outlier) as a data practice item type.";

pub const MAP_PURPOSES_TEMPLATE: &str = "\
The task is to map the different purpose phrases in a given purpose_list with the most suitable keywords.
Predefined keyword_list = ['analytics', 'developer communication', 'fraud prevention/security', 'advertising', 'personalization', 'account management','app functionality', 'other']
Match each item in the following purpose_list with the most relevant keyword from the predefined keyword_list above
Return the results in this format. output_list = {'purpose item1':'keyword1', 'purpose item2':'keyword2',......}. Do not include explanations or extra text.";

/// Tool-defined wording (no fixed upstream template exists for this task).
pub const HEADINGS_TEMPLATE: &str = "\
Extract the primary section headings from the following privacy policy text.
Return one heading per line, exactly as the heading line appears in the text.
Do not add numbering of your own, do not rephrase, and do not output anything
except the heading lines.

privacy policy text:
{text}";

fn python_list(entries: &[String]) -> String {
    let quoted: Vec<String> = entries
        .iter()
        .map(|e| format!("'{}'", e.replace('\\', "\\\\").replace('\'', "\\'")))
        .collect();
    format!("[{}]", quoted.join(", "))
}

fn keyword_list(keywords: &[&str]) -> String {
    let quoted: Vec<String> = keywords.iter().map(|k| format!("'{k}'")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Render the chat messages for a task payload.
pub fn messages_for(payload: &TaskPayload) -> Vec<Message> {
    match payload {
        TaskPayload::Headings { text } => {
            vec![Message::user(HEADINGS_TEMPLATE.replace("{text}", text))]
        }
        TaskPayload::Classify { text } => vec![
            Message::user(CLASSIFY_TEMPLATE),
            Message::user(format!("Paragraph: {text}")),
        ],
        TaskPayload::Decode { text } => vec![
            Message::user(DECODE_TEMPLATE),
            Message::user(DECODE_EXAMPLE),
            Message::user(format!("privacy policy text:{text}")),
        ],
        TaskPayload::MapItems { items } => vec![
            Message::user(MAP_ITEMS_TEMPLATE),
            Message::user(format!("evaluation_list = {}", python_list(items))),
        ],
        TaskPayload::MapPurposes { purposes } => vec![
            Message::user(MAP_PURPOSES_TEMPLATE),
            Message::user(format!("purpose_list ={}", python_list(purposes))),
        ],
        TaskPayload::VerifyItem { item } => {
            let mut keywords: Vec<&str> = DATA_ITEM_KEYWORDS[..22].to_vec();
            keywords.push("N/A");
            vec![Message::user(format!(
                "Map the following phrase to exactly one keyword from this list: {}.\n\
                 Answer with only the keyword and nothing else.\nphrase = '{}'",
                keyword_list(&keywords),
                item.replace('\'', " ")
            ))]
        }
        TaskPayload::VerifyPurpose { purpose } => {
            vec![Message::user(format!(
                "Map the following phrase to exactly one keyword from this list: {}.\n\
                 Answer with only the keyword and nothing else.\nphrase = '{}'",
                keyword_list(&PURPOSE_KEYWORDS),
                purpose.replace('\'', " ")
            ))]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_items_message_carries_the_batch() {
        let messages = messages_for(&TaskPayload::MapItems {
            items: vec!["GPS coordinates".into(), "etc.".into()],
        });
        assert_eq!(messages.len(), 2);
        assert!(messages[0].content.contains("evaluation_list"));
        assert_eq!(
            messages[1].content,
            "evaluation_list = ['GPS coordinates', 'etc.']"
        );
    }

    #[test]
    fn classify_messages_embed_paragraph() {
        let messages = messages_for(&TaskPayload::Classify {
            text: "We collect data.".into(),
        });
        assert_eq!(messages.len(), 2);
        assert!(messages[0].content.starts_with("I will give you the annotation scheme"));
        assert!(messages[1].content.contains("We collect data."));
    }

    #[test]
    fn item_keyword_list_in_template_matches_taxonomy_order() {
        for keyword in &DATA_ITEM_KEYWORDS[..21] {
            assert!(
                MAP_ITEMS_TEMPLATE.contains(&format!("'{keyword}'")),
                "template must list `{keyword}`"
            );
        }
    }
}
