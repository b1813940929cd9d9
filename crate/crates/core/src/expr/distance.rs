//! Ordered tree edit distance (Zhang–Shasha) with unit costs.
//!
//! Node labels are tokens; all constants share one label regardless of value.

use super::{ExprTree, Token};

struct Postorder {
    labels: Vec<Token>,
    /// Leftmost leaf descendant of each node, in postorder indices.
    lmd: Vec<usize>,
    keyroots: Vec<usize>,
}

impl Postorder {
    fn new(tree: &ExprTree) -> Self {
        let n = tree.len();
        let mut labels = Vec::with_capacity(n);
        let mut lmd = Vec::with_capacity(n);
        fn visit(t: &ExprTree, i: usize, labels: &mut Vec<Token>, lmd: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for c in t.children(i) {
                let leaf = visit(t, c, labels, lmd);
                first_leaf.get_or_insert(leaf);
            }
            let me = labels.len();
            labels.push(t.node(i).token);
            let l = first_leaf.unwrap_or(me);
            lmd.push(l);
            l
        }
        visit(tree, 0, &mut labels, &mut lmd);
        // A keyroot is the highest-numbered node for each distinct lmd.
        let mut keyroots = Vec::new();
        for k in 0..n {
            if !(k + 1..n).any(|j| lmd[j] == lmd[k]) {
                keyroots.push(k);
            }
        }
        Postorder {
            labels,
            lmd,
            keyroots,
        }
    }
}

/// Minimum number of node insertions, deletions and relabelings that turn
/// `a` into `b`.
pub fn tree_edit_distance(a: &ExprTree, b: &ExprTree) -> usize {
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];

    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.lmd[i], pb.lmd[j]);
            // fd indices are offset: fd[x - li + 1][y - lj + 1].
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd[0][0] = 0;
            for x in 1..rows {
                fd[x][0] = fd[x - 1][0] + 1;
            }
            for y in 1..cols {
                fd[0][y] = fd[0][y - 1] + 1;
            }
            for x in 1..rows {
                let ni = li + x - 1;
                for y in 1..cols {
                    let nj = lj + y - 1;
                    let del = fd[x - 1][y] + 1;
                    let ins = fd[x][y - 1] + 1;
                    if pa.lmd[ni] == li && pb.lmd[nj] == lj {
                        let rel = fd[x - 1][y - 1] + usize::from(pa.labels[ni] != pb.labels[nj]);
                        let v = del.min(ins).min(rel);
                        fd[x][y] = v;
                        td[ni][nj] = v;
                    } else {
                        let px = pa.lmd[ni] - li;
                        let py = pb.lmd[nj] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[ni][nj]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Edit distance normalized by the size of `truth`, capped at 1.
pub fn normalized_edit_distance(pred: &ExprTree, truth: &ExprTree) -> f64 {
    let d = tree_edit_distance(pred, truth) as f64;
    (d / truth.node_count() as f64).min(1.0)
}
