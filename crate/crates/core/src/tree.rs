//! Ordered labelled trees, the common currency of the structural metrics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTree {
    pub label: String,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        LabeledTree { label: label.into(), children: Vec::new() }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        LabeledTree { label: label.into(), children }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::depth).max().unwrap_or(0)
    }

    pub fn preorder_labels(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.size());
        fn walk<'a>(t: &'a LabeledTree, out: &mut Vec<&'a str>) {
            out.push(&t.label);
            for c in &t.children {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Compact s-expression form, handy in test failure messages.
    pub fn to_sexpr(&self) -> String {
        if self.children.is_empty() {
            return self.label.clone();
        }
        let inner: Vec<String> = self.children.iter().map(LabeledTree::to_sexpr).collect();
        format!("({} {})", self.label, inner.join(" "))
    }
}
