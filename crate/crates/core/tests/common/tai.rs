//! Brute-force edit distance by enumerating every valid Tai mapping.

use slowsql::LabeledTree;

struct Node {
    label: String,
    /// Preorder index of the last descendant (inclusive).
    last: usize,
}

fn flatten(t: &LabeledTree) -> Vec<Node> {
    fn walk(t: &LabeledTree, out: &mut Vec<Node>) {
        let me = out.len();
        out.push(Node { label: t.label.clone(), last: me });
        for c in &t.children {
            walk(c, out);
        }
        out[me].last = out.len() - 1;
    }
    let mut out = Vec::new();
    walk(t, &mut out);
    out
}

fn is_ancestor(nodes: &[Node], a: usize, b: usize) -> bool {
    a < b && b <= nodes[a].last
}

pub fn tai_distance(a: &LabeledTree, b: &LabeledTree) -> usize {
    let fa = flatten(a);
    let fb = flatten(b);
    let mut best = usize::MAX;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    search(&fa, &fb, 0, 0, &mut pairs, &mut best);
    best
}

fn cost(fa: &[Node], fb: &[Node], pairs: &[(usize, usize)]) -> usize {
    let relabels = pairs.iter().filter(|&&(i, j)| fa[i].label != fb[j].label).count();
    fa.len() + fb.len() - 2 * pairs.len() + relabels
}

fn search(fa: &[Node], fb: &[Node], i: usize, min_j: usize, pairs: &mut Vec<(usize, usize)>, best: &mut usize) {
    if i == fa.len() {
        *best = (*best).min(cost(fa, fb, pairs));
        return;
    }
    search(fa, fb, i + 1, min_j, pairs, best);
    for j in min_j..fb.len() {
        let ok = pairs
            .iter()
            .all(|&(pi, pj)| is_ancestor(fa, pi, i) == is_ancestor(fb, pj, j));
        if ok {
            pairs.push((i, j));
            search(fa, fb, i + 1, j + 1, pairs, best);
            pairs.pop();
        }
    }
}

/// Builds a tree from a parent vector where `parents[k]` is the parent of
/// node `k + 1` and always refers to an earlier node.
pub fn tree_from_parents(labels: &[String], parents: &[usize]) -> LabeledTree {
    fn build(k: usize, labels: &[String], kids: &[Vec<usize>]) -> LabeledTree {
        LabeledTree::node(labels[k].clone(), kids[k].iter().map(|&c| build(c, labels, kids)).collect())
    }
    let mut kids = vec![Vec::new(); labels.len()];
    for (k, &p) in parents.iter().enumerate() {
        kids[p].push(k + 1);
    }
    build(0, labels, &kids)
}
