//! Tree edit distance (Zhang–Shasha) with unit insert, delete and relabel
//! costs.

use crate::sql::SqlTree;
use crate::tree::LabeledTree;

/// Postorder flattening with leftmost-leaf indices.
struct Flat<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Flat<'a> {
    fn new(t: &'a LabeledTree) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        fn walk<'a>(t: &'a LabeledTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &t.children {
                let idx = walk(c, labels, leftmost);
                first.get_or_insert(leftmost[idx]);
            }
            labels.push(&t.label);
            let me = labels.len() - 1;
            leftmost.push(first.unwrap_or(me));
            me
        }
        walk(t, &mut labels, &mut leftmost);
        let n = labels.len();
        // A keyroot is the highest node with a given leftmost leaf.
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.reverse();
        Flat { labels, leftmost, keyroots }
    }
}

pub fn tree_edit_distance(a: &LabeledTree, b: &LabeledTree) -> usize {
    let fa = Flat::new(a);
    let fb = Flat::new(b);
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];
    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let li = fa.leftmost[i];
            let lj = fb.leftmost[j];
            // fd is indexed relative to (li, lj); row/col 0 is the empty forest.
            fd[0][0] = 0;
            for x in li..=i {
                fd[x - li + 1][0] = fd[x - li][0] + 1;
            }
            for y in lj..=j {
                fd[0][y - lj + 1] = fd[0][y - lj] + 1;
            }
            for x in li..=i {
                for y in lj..=j {
                    let (xi, yi) = (x - li + 1, y - lj + 1);
                    let del = fd[xi - 1][yi] + 1;
                    let ins = fd[xi][yi - 1] + 1;
                    if fa.leftmost[x] == li && fb.leftmost[y] == lj {
                        let rel = fd[xi - 1][yi - 1] + usize::from(fa.labels[x] != fb.labels[y]);
                        fd[xi][yi] = del.min(ins).min(rel);
                        td[x][y] = fd[xi][yi];
                    } else {
                        let px = fa.leftmost[x] - li;
                        let py = fb.leftmost[y] - lj;
                        fd[xi][yi] = del.min(ins).min(fd[px][py] + td[x][y]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Edit distance divided by the size of the larger tree, capped at 1.
///
/// The raw ratio can exceed 1 when no ancestry-preserving mapping reuses
/// many nodes: `a(c(c))` and `b(a a)` are three nodes each but four edits
/// apart.
pub fn normalized_distance(a: &LabeledTree, b: &LabeledTree) -> f64 {
    let denom = a.size().max(b.size());
    (tree_edit_distance(a, b) as f64 / denom as f64).min(1.0)
}

/// Normalized distance between two parsed queries.
pub fn structural_distance(a: &SqlTree, b: &SqlTree) -> f64 {
    normalized_distance(a.labels(), b.labels())
}

/// Mean divergence of `node` from its parent and from the seed.
pub fn structural_score(node: &SqlTree, parent: &SqlTree, seed: &SqlTree) -> f64 {
    0.5 * (structural_distance(node, parent) + structural_distance(node, seed))
}

/// All pairwise normalized distances, row-major.
pub fn distance_matrix(trees: &[LabeledTree]) -> Vec<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        trees.par_iter().map(|a| trees.iter().map(|b| normalized_distance(a, b)).collect()).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        distance_matrix_seq(trees)
    }
}

pub fn distance_matrix_seq(trees: &[LabeledTree]) -> Vec<Vec<f64>> {
    trees.iter().map(|a| trees.iter().map(|b| normalized_distance(a, b)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(l: &str, c: Vec<LabeledTree>) -> LabeledTree {
        LabeledTree::node(l, c)
    }
    fn l(l: &str) -> LabeledTree {
        LabeledTree::leaf(l)
    }

    #[test]
    fn identical_is_zero() {
        let t = n("a", vec![l("b"), n("c", vec![l("d")])]);
        assert_eq!(tree_edit_distance(&t, &t), 0);
    }

    #[test]
    fn classic_example() {
        // f(d(a c(b)) e) vs f(c(d(a b)) e): distance 2.
        let t1 = n("f", vec![n("d", vec![l("a"), n("c", vec![l("b")])]), l("e")]);
        let t2 = n("f", vec![n("c", vec![n("d", vec![l("a"), l("b")])]), l("e")]);
        assert_eq!(tree_edit_distance(&t1, &t2), 2);
    }

    #[test]
    fn ratio_is_capped() {
        let a = n("a", vec![n("c", vec![l("c")])]);
        let b = n("b", vec![l("a"), l("a")]);
        assert_eq!(tree_edit_distance(&a, &b), 4);
        assert_eq!(normalized_distance(&a, &b), 1.0);
    }

    #[test]
    fn one_relabel_in_five_nodes() {
        let a = n("a", vec![l("b"), n("c", vec![l("d"), l("e")])]);
        let b = n("a", vec![l("b"), n("c", vec![l("d"), l("x")])]);
        assert_eq!(normalized_distance(&a, &b), 0.2);
    }

    #[test]
    fn score_averages_parent_and_seed() {
        let seed = crate::parse("SELECT a FROM t", crate::Dialect::Postgres).unwrap();
        let node = crate::parse("SELECT a FROM t WHERE b = 1", crate::Dialect::Postgres).unwrap();
        let dp = structural_distance(&node, &seed);
        assert!(dp > 0.0);
        assert_eq!(structural_score(&node, &seed, &seed), dp);
        assert_eq!(structural_score(&seed, &seed, &seed), 0.0);
    }

    #[test]
    fn single_nodes() {
        assert_eq!(tree_edit_distance(&l("a"), &l("a")), 0);
        assert_eq!(tree_edit_distance(&l("a"), &l("b")), 1);
        assert_eq!(tree_edit_distance(&l("a"), &n("a", vec![l("b"), l("c")])), 2);
    }

    #[test]
    fn normalized_bounds() {
        let a = n("a", vec![l("b")]);
        let b = n("x", vec![l("y"), l("z")]);
        let d = normalized_distance(&a, &b);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
