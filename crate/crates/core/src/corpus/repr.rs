use serde::{Deserialize, Serialize};

use super::{Document, Passage};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// How titles and fields are separated in encoder inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparatorStyle {
    /// `[SEP]` marker between items.
    #[default]
    Token,
    /// `, ` between items.
    Comma,
}

impl SeparatorStyle {
    pub fn joiner(self) -> &'static str {
        match self {
            SeparatorStyle::Token => " [SEP] ",
            SeparatorStyle::Comma => ", ",
        }
    }
}

/// Pre-order titles of every non-root title node, joined by the separator.
pub fn linearize_toc(doc: &Document, style: SeparatorStyle) -> String {
    let tree = &doc.tree;
    tree.preorder()
        .into_iter()
        .skip(1)
        .map(|id| tree.node(id).title.as_str())
        .collect::<Vec<_>>()
        .join(style.joiner())
}

/// `[CLS] title <sep> abstract <sep> toc [SEP]`
pub fn document_summary(doc: &Document, style: SeparatorStyle) -> String {
    let toc = linearize_toc(doc, style);
    let fields = [doc.title.as_str(), doc.abstract_text.trim(), toc.as_str()];
    format!("{CLS} {} {SEP}", fields.join(style.joiner()))
}

/// `[CLS] T_d <sep> T_1 <sep> ... <sep> T_n <sep> text [SEP]`
pub fn passage_representation(p: &Passage, style: SeparatorStyle) -> String {
    let mut parts: Vec<&str> = p.title_path.iter().map(String::as_str).collect();
    parts.push(p.text.trim());
    format!("{CLS} {} {SEP}", parts.join(style.joiner()))
}
