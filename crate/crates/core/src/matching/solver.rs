//! Sparse minimum-cost maximum-cardinality bipartite matching.
//!
//! Every row gets a private "skip" column whose cost is one unit of a second,
//! lexicographically dominant cost component. Assigning every row then
//! minimises the number of skipped rows first and the real cost second, which
//! is exactly the min-cost maximum-cardinality matching of the feasible graph
//! with no large-sentinel arithmetic on the real costs.
//!
//! Rows are added one at a time with a Dijkstra search over reduced costs
//! (shortest augmenting path with row/column potentials), stopping at the
//! first free column popped from the heap.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::{Add, AddAssign, Sub, SubAssign};

/// Cost with a dominant integer component (skipped rows) and a real part.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LexCost {
    skips: i64,
    cost: f64,
}

impl LexCost {
    const ZERO: LexCost = LexCost {
        skips: 0,
        cost: 0.0,
    };
    const SKIP: LexCost = LexCost {
        skips: 1,
        cost: 0.0,
    };
    const INF: LexCost = LexCost {
        skips: i64::MAX,
        cost: f64::INFINITY,
    };

    fn real(cost: f64) -> Self {
        Self { skips: 0, cost }
    }
}

impl Eq for LexCost {}

impl Ord for LexCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.skips
            .cmp(&other.skips)
            .then_with(|| self.cost.total_cmp(&other.cost))
    }
}

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, rhs: Self) -> Self {
        LexCost {
            skips: self.skips + rhs.skips,
            cost: self.cost + rhs.cost,
        }
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, rhs: Self) -> Self {
        LexCost {
            skips: self.skips - rhs.skips,
            cost: self.cost - rhs.cost,
        }
    }
}

impl AddAssign for LexCost {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for LexCost {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

/// Weighted edge between a left vertex and a right vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub cost: f64,
}

/// Solution of [`min_cost_max_matching`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Partner of each left vertex.
    pub left_to_right: Vec<Option<usize>>,
    /// Partner of each right vertex.
    pub right_to_left: Vec<Option<usize>>,
}

impl Matching {
    pub fn cardinality(&self) -> usize {
        self.left_to_right.iter().flatten().count()
    }

    /// Matched `(left, right)` pairs in left order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left_to_right
            .iter()
            .enumerate()
            .filter_map(|(l, r)| r.map(|r| (l, r)))
    }
}

/// Compressed adjacency of the row side.
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<(usize, f64)>,
}

impl Csr {
    fn build(rows: usize, edges: impl Iterator<Item = (usize, usize, f64)> + Clone) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        for (r, _, _) in edges.clone() {
            offsets[r + 1] += 1;
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![(0usize, 0.0f64); offsets[rows]];
        for (r, c, w) in edges {
            targets[fill[r]] = (c, w);
            fill[r] += 1;
        }
        // Keep the per-row scan order independent of the caller's edge order.
        for r in 0..rows {
            targets[offsets[r]..offsets[r + 1]]
                .sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        Self { offsets, targets }
    }

    fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.targets[self.offsets[r]..self.offsets[r + 1]]
    }
}

/// Among all maximum-cardinality matchings of the graph, returns one of
/// minimum total cost.
///
/// Connected components of the graph are solved separately, so the pairing
/// chosen inside a component (including ties) depends only on that
/// component's vertices, edges and their relative order.
///
/// # Panics
/// If an edge references a vertex out of range or carries a non-finite cost.
pub fn min_cost_max_matching(n_left: usize, n_right: usize, edges: &[Edge]) -> Matching {
    for e in edges {
        assert!(
            e.left < n_left && e.right < n_right,
            "edge ({}, {}) outside a {n_left}x{n_right} graph",
            e.left,
            e.right
        );
        assert!(e.cost.is_finite(), "non-finite edge cost {}", e.cost);
    }
    let mut matching = Matching {
        left_to_right: vec![None; n_left],
        right_to_left: vec![None; n_right],
    };

    // Right vertex `r` is node `n_left + r`.
    let mut sets = DisjointSets::new(n_left + n_right);
    for e in edges {
        sets.union(e.left, n_left + e.right);
    }
    let mut component_of = vec![usize::MAX; n_left + n_right];
    let mut components: Vec<Component> = Vec::new();
    // Vertices are registered in index order so local indices keep the
    // global relative order.
    let mut local = vec![usize::MAX; n_left + n_right];
    let mut touched = vec![false; n_left + n_right];
    for e in edges {
        touched[e.left] = true;
        touched[n_left + e.right] = true;
    }
    for node in (0..n_left + n_right).filter(|&n| touched[n]) {
        let root = sets.find(node);
        if component_of[root] == usize::MAX {
            component_of[root] = components.len();
            components.push(Component::default());
        }
        let k = component_of[root];
        let comp = &mut components[k];
        if node < n_left {
            local[node] = comp.left.len();
            comp.left.push(node);
        } else {
            local[node] = comp.right.len();
            comp.right.push(node - n_left);
        }
    }
    for e in edges {
        let k = component_of[sets.find(e.left)];
        components[k].edges.push(Edge {
            left: local[e.left],
            right: local[n_left + e.right],
            cost: e.cost,
        });
    }

    for comp in &components {
        for (l, r) in solve_component(comp.left.len(), comp.right.len(), &comp.edges) {
            let (gl, gr) = (comp.left[l], comp.right[r]);
            matching.left_to_right[gl] = Some(gr);
            matching.right_to_left[gr] = Some(gl);
        }
    }
    matching
}

#[derive(Default)]
struct Component {
    left: Vec<usize>,
    right: Vec<usize>,
    edges: Vec<Edge>,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so the representative is order-independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Solves one connected graph and returns its matched `(left, right)` pairs.
///
/// Costs are shifted by the most negative cost first, which leaves the
/// optimum unchanged because every candidate solution has the same number of
/// edges.
fn solve_component(n_left: usize, n_right: usize, edges: &[Edge]) -> Vec<(usize, usize)> {
    let shift = edges.iter().map(|e| e.cost).fold(0.0f64, f64::min);

    // The smaller side is augmented row by row; columns are the other side.
    let transpose = n_right < n_left;
    let (rows, cols) = if transpose {
        (n_right, n_left)
    } else {
        (n_left, n_right)
    };
    let adj = Csr::build(
        rows,
        edges.iter().map(move |e| {
            let (r, c) = if transpose {
                (e.right, e.left)
            } else {
                (e.left, e.right)
            };
            (r, c, e.cost - shift)
        }),
    );

    solve_rows(rows, cols, &adj)
        .into_iter()
        .enumerate()
        .filter_map(|(c, r)| r.map(|r| if transpose { (c, r) } else { (r, c) }))
        .collect()
}

/// Assigns every row to a real column or to its skip column `cols + row`.
/// Returns the owning row of each column (real columns first).
fn solve_rows(rows: usize, cols: usize, adj: &Csr) -> Vec<Option<usize>> {
    let n_cols = cols + rows;
    let skip_col = |r: usize| cols + r;

    let mut u = vec![LexCost::ZERO; rows];
    let mut v = vec![LexCost::ZERO; n_cols];
    let mut row_to_col: Vec<Option<usize>> = vec![None; rows];
    let mut col_to_row: Vec<Option<usize>> = vec![None; n_cols];

    // Search state, reset lazily through `touched`.
    let mut dist = vec![LexCost::INF; n_cols];
    let mut parent = vec![usize::MAX; n_cols];
    let mut done = vec![false; n_cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<(usize, LexCost)> = Vec::new();
    let mut tree_rows: Vec<(usize, LexCost)> = Vec::new();
    let mut heap: BinaryHeap<Reverse<(LexCost, usize)>> = BinaryHeap::new();

    for start in 0..rows {
        for &c in &touched {
            dist[c] = LexCost::INF;
            parent[c] = usize::MAX;
            done[c] = false;
        }
        touched.clear();
        finalized.clear();
        tree_rows.clear();
        heap.clear();

        let relax = |row: usize,
                     row_dist: LexCost,
                     dist: &mut [LexCost],
                     parent: &mut [usize],
                     done: &[bool],
                     touched: &mut Vec<usize>,
                     heap: &mut BinaryHeap<Reverse<(LexCost, usize)>>| {
            let base = row_dist - u[row];
            let mut visit = |c: usize, cost: LexCost| {
                if done[c] {
                    return;
                }
                let nd = base + cost - v[c];
                if nd < dist[c] {
                    if dist[c] == LexCost::INF {
                        touched.push(c);
                    }
                    dist[c] = nd;
                    parent[c] = row;
                    heap.push(Reverse((nd, c)));
                }
            };
            for &(c, w) in adj.row(row) {
                visit(c, LexCost::real(w));
            }
            visit(skip_col(row), LexCost::SKIP);
        };

        tree_rows.push((start, LexCost::ZERO));
        relax(
            start,
            LexCost::ZERO,
            &mut dist,
            &mut parent,
            &done,
            &mut touched,
            &mut heap,
        );

        let (sink, sink_dist) = loop {
            let Reverse((d, c)) = heap
                .pop()
                .expect("the start row's skip column is always reachable");
            if done[c] || d > dist[c] {
                continue;
            }
            done[c] = true;
            finalized.push((c, d));
            match col_to_row[c] {
                None => break (c, d),
                Some(owner) => {
                    tree_rows.push((owner, d));
                    relax(
                        owner,
                        d,
                        &mut dist,
                        &mut parent,
                        &done,
                        &mut touched,
                        &mut heap,
                    );
                }
            }
        };

        // Potential update keeps every reduced cost non-negative and makes the
        // augmenting path tight.
        for &(r, d) in &tree_rows {
            u[r] += sink_dist - d;
        }
        for &(c, d) in &finalized {
            v[c] -= sink_dist - d;
        }

        let mut c = sink;
        loop {
            let r = parent[c];
            let previous = row_to_col[r];
            row_to_col[r] = Some(c);
            col_to_row[c] = Some(r);
            if r == start {
                break;
            }
            c = previous.expect("rows inside the search tree are matched");
        }
    }

    col_to_row.truncate(cols);
    col_to_row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(left: usize, right: usize, cost: f64) -> Edge {
        Edge { left, right, cost }
    }

    fn total(m: &Matching, edges: &[Edge]) -> f64 {
        m.pairs()
            .map(|(l, r)| {
                edges
                    .iter()
                    .filter(|e| e.left == l && e.right == r)
                    .map(|e| e.cost)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn empty_graph() {
        let m = min_cost_max_matching(3, 2, &[]);
        assert_eq!(m.cardinality(), 0);
        assert_eq!(m.left_to_right, vec![None; 3]);
    }

    #[test]
    fn prefers_cardinality_over_cost() {
        // Taking the cheap edge (0,0) alone would leave row 1 unmatched.
        let edges = [edge(0, 0, -10.0), edge(0, 1, 5.0), edge(1, 0, 5.0)];
        let m = min_cost_max_matching(2, 2, &edges);
        assert_eq!(m.cardinality(), 2);
        assert_eq!(total(&m, &edges), 10.0);
    }

    #[test]
    fn row_without_augmenting_path_does_not_block_cheaper_row() {
        // Two rows compete for one column; the cheaper one must win regardless
        // of processing order.
        let edges = [edge(0, 0, 5.0), edge(1, 0, 1.0)];
        let m = min_cost_max_matching(2, 1, &edges);
        assert_eq!(m.left_to_right, vec![None, Some(0)]);

        let swapped = [edge(0, 0, 1.0), edge(1, 0, 5.0)];
        let m = min_cost_max_matching(2, 1, &swapped);
        assert_eq!(m.left_to_right, vec![Some(0), None]);
    }

    #[test]
    fn wide_and_tall_agree() {
        let edges = [
            edge(0, 0, 3.0),
            edge(0, 2, 1.0),
            edge(1, 2, 0.5),
            edge(1, 1, 4.0),
        ];
        let wide = min_cost_max_matching(2, 3, &edges);
        let flipped: Vec<_> = edges
            .iter()
            .map(|e| edge(e.right, e.left, e.cost))
            .collect();
        let tall = min_cost_max_matching(3, 2, &flipped);
        assert_eq!(wide.cardinality(), 2);
        assert_eq!(tall.cardinality(), 2);
        assert!((total(&wide, &edges) - total(&tall, &flipped)).abs() < 1e-12);
        assert!((total(&wide, &edges) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn components_are_solved_independently() {
        // One row tied between two columns; a larger unrelated component
        // flips the side sizes but must not change the tie-break.
        let tie = [edge(0, 0, 1.0), edge(0, 1, 1.0)];
        let alone = min_cost_max_matching(1, 2, &tie);
        let mut with_other = tie.to_vec();
        for l in 1..5 {
            with_other.push(edge(l, 2, -3.0 * l as f64));
        }
        let combined = min_cost_max_matching(5, 3, &with_other);
        assert_eq!(combined.left_to_right[0], alone.left_to_right[0]);
        assert_eq!(combined.right_to_left[..2], alone.right_to_left[..]);
        assert_eq!(combined.right_to_left[2], Some(4));
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn rejects_infinite_cost() {
        min_cost_max_matching(1, 1, &[edge(0, 0, f64::INFINITY)]);
    }
}
