//! Exact k-nearest-neighbour search over a kd-tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{dist2, Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Per-point neighbour lists, stored flat (`n * k`). The query point itself
/// is never part of its own list. Each list is sorted by distance, ties by
/// lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    k: usize,
    indices: Vec<usize>,
}

impl Neighborhoods {
    pub fn from_lists(k: usize, lists: Vec<Vec<usize>>) -> Result<Self> {
        let mut indices = Vec::with_capacity(lists.len() * k);
        for l in &lists {
            if l.len() != k {
                return Err(Error::LengthMismatch { left: l.len(), right: k });
            }
            indices.extend_from_slice(l);
        }
        Ok(Self { k, indices })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.indices.chunks(self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static kd-tree over a point slice.
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build_node(points, &mut order, 0);
        Self { points, order, root }
    }

    fn build_node(points: &[Point3], order: &mut [usize], offset: usize) -> Node {
        let n = order.len();
        if n <= LEAF_SIZE {
            return Node::Leaf { start: offset, end: offset + n };
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in order.iter() {
            for d in 0..3 {
                lo[d] = lo[d].min(points[i][d]);
                hi[d] = hi[d].max(points[i][d]);
            }
        }
        let axis = (0..3).fold(0, |b, d| if hi[d] - lo[d] > hi[b] - lo[b] { d } else { b });
        if hi[axis] - lo[axis] == 0.0 {
            return Node::Leaf { start: offset, end: offset + n };
        }
        let mid = n / 2;
        order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[order[mid]][axis];
        let (l, r) = order.split_at_mut(mid);
        let left = Box::new(Self::build_node(points, l, offset));
        let right = Box::new(Self::build_node(points, r, offset + mid));
        Node::Split { axis, value, left, right }
    }

    /// The `k` nearest points to `query`, skipping index `exclude`, sorted by
    /// `(distance, index)`.
    pub fn nearest(&self, query: Point3, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.root, query, k, exclude, &mut heap);
        }
        let mut out = heap.into_sorted_vec();
        out.truncate(k);
        out.into_iter().map(|c| c.idx).collect()
    }

    fn search(&self, node: &Node, q: Point3, k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start..*end] {
                    if Some(idx) == exclude {
                        continue;
                    }
                    let c = Candidate { d2: dist2(q, self.points[idx]), idx };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, heap);
                // Equal distances must still be visited so lower indices can win ties.
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.d2) {
                    self.search(far, q, k, exclude, heap);
                }
            }
        }
    }
}

/// Exact kNN lists for every point of the cloud (self excluded).
pub fn build_neighborhoods(cloud: &PointCloud, k: usize) -> Result<Neighborhoods> {
    let n = cloud.len();
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let tree = KdTree::build(&cloud.points);
    let mut indices = Vec::with_capacity(n * k);
    for (i, &p) in cloud.points.iter().enumerate() {
        indices.extend(tree.nearest(p, k, Some(i)));
    }
    Ok(Neighborhoods { k, indices })
}
