use super::{Document, Passage};
use crate::text::word_starts;

pub const DEFAULT_MAX_WORDS: usize = 100;

/// Splits `text` into consecutive byte ranges of `max_words` words each plus a
/// shorter remainder. The ranges tile `text` exactly, so concatenating the
/// slices reproduces it.
pub fn split_text(text: &str, max_words: usize) -> Vec<(usize, usize)> {
    assert!(max_words >= 1, "max_words must be positive");
    let starts = word_starts(text);
    if starts.is_empty() {
        return Vec::new();
    }
    let cuts: Vec<usize> = starts.iter().step_by(max_words).skip(1).copied().collect();
    let mut ranges = Vec::with_capacity(cuts.len() + 1);
    let mut begin = 0;
    for cut in cuts {
        ranges.push((begin, cut));
        begin = cut;
    }
    ranges.push((begin, text.len()));
    ranges
}

/// Splits every content leaf of `doc` into passages of at most `max_words`
/// words. Passages never span two leaves. Ids are `<doc_id>#<ordinal>` in
/// document order.
pub fn split_sections(doc: &Document, max_words: usize) -> Vec<Passage> {
    let tree = &doc.tree;
    let mut out = Vec::new();
    for leaf in tree.leaves_in_order() {
        let title_path = tree.title_path(leaf.parent_title);
        for (begin, end) in split_text(&leaf.text, max_words) {
            let text = &leaf.text[begin..end];
            out.push(Passage {
                passage_id: format!("{}#{}", doc.doc_id, out.len()),
                doc_id: doc.doc_id.clone(),
                leaf_id: leaf.id,
                title_path: title_path.clone(),
                text: text.to_string(),
                word_count: crate::text::word_count(text),
            });
        }
    }
    out
}
