use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::word_count;

/// One `{level, title, text}` section of an input record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSection {
    pub level: i64,
    pub title: String,
    #[serde(default)]
    pub text: String,
}

/// A corpus file line before parsing into a title tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: Vec<RawSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleNode {
    pub id: usize,
    pub title: String,
    pub children: Vec<usize>,
    pub content_leaves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentLeaf {
    pub id: usize,
    pub parent_title: usize,
    pub text: String,
    pub word_count: usize,
}

/// Title nodes and content leaves of one document. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleTree {
    pub nodes: Vec<TitleNode>,
    pub leaves: Vec<ContentLeaf>,
}

impl TitleTree {
    pub const ROOT: usize = 0;

    pub fn root(&self) -> &TitleNode {
        &self.nodes[Self::ROOT]
    }

    pub fn node(&self, id: usize) -> &TitleNode {
        &self.nodes[id]
    }

    /// Title node ids in pre-order, root first.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    /// Parent of every title node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.nodes.len()];
        for node in &self.nodes {
            for &c in &node.children {
                parents[c] = Some(node.id);
            }
        }
        parents
    }

    /// Titles from the root down to (and including) `node`.
    pub fn title_path(&self, node: usize) -> Vec<String> {
        let parents = self.parents();
        let mut path = vec![self.nodes[node].title.clone()];
        let mut cur = node;
        while let Some(p) = parents[cur] {
            path.push(self.nodes[p].title.clone());
            cur = p;
        }
        path.reverse();
        path
    }

    /// Content leaves in document order (pre-order over their title nodes).
    pub fn leaves_in_order(&self) -> Vec<&ContentLeaf> {
        self.preorder()
            .into_iter()
            .flat_map(|n| self.nodes[n].content_leaves.iter().map(|&l| &self.leaves[l]))
            .collect()
    }
}

/// A structured article: root title, abstract and the nested section tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub tree: TitleTree,
    pub passages: Vec<String>,
}

impl Document {
    /// All leaf text in document order, joined by newlines.
    pub fn full_text(&self) -> String {
        self.tree
            .leaves_in_order()
            .iter()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn push_leaf(tree: &mut TitleTree, parent: usize, text: &str) {
    let wc = word_count(text);
    if wc == 0 {
        return;
    }
    let id = tree.leaves.len();
    tree.leaves.push(ContentLeaf {
        id,
        parent_title: parent,
        text: text.to_string(),
        word_count: wc,
    });
    tree.nodes[parent].content_leaves.push(id);
}

/// Builds a title tree from a raw record.
///
/// Section bodies become content leaves under their heading; the abstract is
/// the first leaf under the root. A heading deeper than `parent + 1` is
/// clamped to `parent + 1`.
pub fn parse_document(raw: &RawRecord) -> Result<Document> {
    let has_text = !raw.abstract_text.trim().is_empty()
        || raw
            .sections
            .iter()
            .any(|s| !s.text.trim().is_empty() || !s.title.trim().is_empty());
    let title = raw.title.trim();
    if title.is_empty() {
        if has_text {
            return Err(Error::MalformedRecord(format!(
                "document `{}` has no title",
                raw.doc_id
            )));
        }
        return Err(Error::EmptyDocument);
    }
    if raw.doc_id.is_empty() {
        return Err(Error::MalformedRecord("missing doc_id".into()));
    }

    let mut tree = TitleTree {
        nodes: vec![TitleNode {
            id: TitleTree::ROOT,
            title: title.to_string(),
            children: Vec::new(),
            content_leaves: Vec::new(),
        }],
        leaves: Vec::new(),
    };
    push_leaf(&mut tree, TitleTree::ROOT, &raw.abstract_text);
    let abstract_text = if tree.leaves.is_empty() {
        String::new()
    } else {
        raw.abstract_text.clone()
    };

    // (node id, depth) from root to the most recent heading.
    let mut stack: Vec<(usize, i64)> = vec![(TitleTree::ROOT, 0)];
    for section in &raw.sections {
        if section.level < 1 {
            return Err(Error::MalformedRecord(format!(
                "document `{}`: section `{}` has level {}",
                raw.doc_id, section.title, section.level
            )));
        }
        while stack.last().is_some_and(|&(_, d)| d >= section.level) {
            stack.pop();
        }
        let (parent, parent_depth) = *stack.last().expect("root never popped");
        let id = tree.nodes.len();
        tree.nodes.push(TitleNode {
            id,
            title: section.title.trim().to_string(),
            children: Vec::new(),
            content_leaves: Vec::new(),
        });
        tree.nodes[parent].children.push(id);
        stack.push((id, parent_depth + 1));
        push_leaf(&mut tree, id, &section.text);
    }

    Ok(Document {
        doc_id: raw.doc_id.clone(),
        title: title.to_string(),
        abstract_text,
        tree,
        passages: Vec::new(),
    })
}
