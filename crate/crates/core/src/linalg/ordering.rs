//! Fill-reducing symmetric orderings.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;

const LEAF_SIZE: usize = 64;

/// Adjacency of the pattern of `A + A^T` without the diagonal.
fn symmetric_graph(a: &CsrMatrix) -> (Vec<usize>, Vec<usize>) {
    let n = a.n_rows();
    let mut deg = vec![0usize; n + 1];
    for i in 0..n {
        for &j in a.row(i).0 {
            if j != i {
                deg[i + 1] += 1;
                deg[j + 1] += 1;
            }
        }
    }
    for i in 0..n {
        deg[i + 1] += deg[i];
    }
    let mut next = deg.clone();
    let mut adj = vec![0usize; deg[n]];
    for i in 0..n {
        for &j in a.row(i).0 {
            if j != i {
                adj[next[i]] = j;
                next[i] += 1;
                adj[next[j]] = i;
                next[j] += 1;
            }
        }
    }
    let mut ptr = vec![0usize; n + 1];
    let mut out = Vec::with_capacity(adj.len());
    for i in 0..n {
        let s = &mut adj[deg[i]..deg[i + 1]];
        s.sort_unstable();
        let mut last = usize::MAX;
        for &j in s.iter() {
            if j != last {
                out.push(j);
                last = j;
            }
        }
        ptr[i + 1] = out.len();
    }
    (ptr, out)
}

struct Bfs<'a> {
    ptr: &'a [usize],
    adj: &'a [usize],
    /// Subset label per vertex; only vertices labelled `active` are visited.
    part: Vec<u32>,
    level: Vec<usize>,
}

impl Bfs<'_> {
    /// Level structure rooted at `root` inside subset `active`.
    fn levels(&mut self, root: usize, active: u32) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut queue = VecDeque::new();
        self.level[root] = 0;
        let mut seen = vec![root];
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let l = self.level[v];
            if out.len() <= l {
                out.push(Vec::new());
            }
            out[l].push(v);
            for &w in &self.adj[self.ptr[v]..self.ptr[v + 1]] {
                if self.part[w] == active && self.level[w] == usize::MAX {
                    self.level[w] = l + 1;
                    seen.push(w);
                    queue.push_back(w);
                }
            }
        }
        for v in seen {
            self.level[v] = usize::MAX;
        }
        out
    }
}

/// Nested dissection by level-set separators. Returns `perm` with
/// `perm[k]` the original index eliminated at step `k`.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let (ptr, adj) = symmetric_graph(a);
    let mut bfs = Bfs {
        ptr: &ptr,
        adj: &adj,
        part: vec![0; n],
        level: vec![usize::MAX; n],
    };
    let mut next_label: u32 = 1;
    // Each task is a vertex set; output is filled back to front so
    // separators land after the parts they split.
    let mut perm = vec![0usize; n];
    let mut tail = n;
    let mut tasks: Vec<Vec<usize>> = vec![(0..n).collect()];
    while let Some(set) = tasks.pop() {
        if set.len() <= LEAF_SIZE {
            for &v in set.iter().rev() {
                tail -= 1;
                perm[tail] = v;
            }
            continue;
        }
        let label = next_label;
        next_label += 1;
        for &v in &set {
            bfs.part[v] = label;
        }
        // Pseudo-peripheral root by repeated BFS from the last level.
        let mut levels = bfs.levels(set[0], label);
        for _ in 0..4 {
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| {
                    adj[ptr[v]..ptr[v + 1]]
                        .iter()
                        .filter(|&&w| bfs.part[w] == label)
                        .count()
                })
                .unwrap();
            let trial = bfs.levels(cand, label);
            if trial.len() > levels.len() {
                levels = trial;
            } else {
                break;
            }
        }
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < set.len() {
            // Disconnected: split off the reached component.
            let comp: Vec<usize> = levels.into_iter().flatten().collect();
            for &v in &comp {
                bfs.part[v] = 0;
            }
            let rest: Vec<usize> = set
                .iter()
                .copied()
                .filter(|&v| bfs.part[v] == label)
                .collect();
            for &v in &rest {
                bfs.part[v] = 0;
            }
            tasks.push(comp);
            tasks.push(rest);
            continue;
        }
        for &v in &set {
            bfs.part[v] = 0;
        }
        if levels.len() < 3 {
            for &v in levels.iter().flatten().rev() {
                tail -= 1;
                perm[tail] = v;
            }
            continue;
        }
        let half = set.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (l, lv) in levels.iter().enumerate() {
            acc += lv.len();
            if acc >= half {
                mid = l.clamp(1, levels.len() - 2);
                break;
            }
        }
        for &v in levels[mid].iter().rev() {
            tail -= 1;
            perm[tail] = v;
        }
        let left: Vec<usize> = levels[..mid].iter().flatten().copied().collect();
        let right: Vec<usize> = levels[mid + 1..].iter().flatten().copied().collect();
        tasks.push(left);
        tasks.push(right);
    }
    debug_assert_eq!(tail, 0);
    perm
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &i in p {
        if i >= p.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}
