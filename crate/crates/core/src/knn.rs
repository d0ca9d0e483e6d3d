//! Exact k-nearest-neighbour search over a static point set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 4;

#[derive(Debug)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

/// k-d tree over `D`-dimensional points. Query results are ordered by
/// `(distance, index)`, so ties resolve to the lower index.
#[derive(Debug)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    order: Vec<usize>,
    root: KdNode,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl<const D: usize> KdTree<D> {
    pub fn new(points: Vec<[f64; D]>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let len = order.len();
        let root = build(&points, &mut order, 0, len);
        KdTree { points, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` points nearest to `query` as `(index, distance)`, nearest
    /// first. A query point that is itself in the set comes back at distance 0.
    pub fn knn(&self, query: &[f64; D], k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.root, query, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    fn search(&self, node: &KdNode, q: &[f64; D], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            KdNode::Leaf { start, end } => {
                for &idx in &self.order[*start..*end] {
                    let c = Candidate {
                        dist2: dist2(&self.points[idx], q),
                        index: idx,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("k > 0") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // `<=` keeps equidistant points on the far side eligible for the id tie-break
                if heap.len() < k || diff * diff <= heap.peek().expect("non-empty").dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn build<const D: usize>(points: &[[f64; D]], order: &mut [usize], start: usize, end: usize) -> KdNode {
    if end - start <= LEAF_SIZE {
        return KdNode::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let axis = (0..D)
        .max_by(|&a, &b| {
            spread(points, slice, a)
                .total_cmp(&spread(points, slice, b))
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&i, &j| {
        points[i][axis].total_cmp(&points[j][axis]).then(i.cmp(&j))
    });
    let value = points[slice[mid]][axis];
    // Points equal to the split value can land on either side of `mid`, so
    // both subtrees are searched whenever the query is within `diff` of it.
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    KdNode::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn spread<const D: usize>(points: &[[f64; D]], idx: &[usize], axis: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in idx {
        lo = lo.min(points[i][axis]);
        hi = hi.max(points[i][axis]);
    }
    hi - lo
}
