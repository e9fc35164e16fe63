//! Nearest-neighbor queries over 3D point sets.

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use crate::Vec3;

pub struct PointIndex {
    tree: ImmutableKdTree<f64, 3>,
    points: Vec<[f64; 3]>,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let points: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        PointIndex { tree: ImmutableKdTree::new_from_slice(&points), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    // `nearest_one` on the immutable tree can miss the true neighbor on small sets
    /// Index of and distance to the nearest indexed point.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        let q = [q.x, q.y, q.z];
        let found = self.tree.nearest_n::<SquaredEuclidean>(&q, 1);
        let item = found.first()?.item as usize;
        let p = self.points[item];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
        Some((item, d2.sqrt()))
    }

    /// Up to `k` nearest indexed points as `(index, squared distance)`, closest first.
    pub fn nearest_k(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        self.tree.nearest_n::<SquaredEuclidean>(&[q.x, q.y, q.z], k).into_iter().map(|n| (n.item as usize, n.distance)).collect()
    }
}
