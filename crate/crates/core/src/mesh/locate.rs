use super::{segment_distance, Point};

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Point,
    hi: Point,
}

impl Aabb {
    fn of_segment(a: Point, b: Point) -> Self {
        Aabb { lo: [a[0].min(b[0]), a[1].min(b[1])], hi: [a[0].max(b[0]), a[1].max(b[1])] }
    }

    fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: [self.lo[0].min(o.lo[0]), self.lo[1].min(o.lo[1])],
            hi: [self.hi[0].max(o.hi[0]), self.hi[1].max(o.hi[1])],
        }
    }

    fn distance(&self, p: Point) -> f64 {
        let dx = (self.lo[0] - p[0]).max(0.0).max(p[0] - self.hi[0]);
        let dy = (self.lo[1] - p[1]).max(0.0).max(p[1] - self.hi[1]);
        dx.hypot(dy)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { first: usize, count: usize, bbox: Aabb },
    Inner { left: usize, right: usize, bbox: Aabb },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

/// Exact nearest-segment queries over a polyline, via a bounding-box tree
/// built over consecutive runs of segments.
#[derive(Clone, Debug)]
pub struct EdgeLocator {
    segments: Vec<(Point, Point)>,
    nodes: Vec<Node>,
    root: usize,
}

const LEAF_SIZE: usize = 8;

impl EdgeLocator {
    pub fn new(segments: Vec<(Point, Point)>) -> Self {
        let mut loc = EdgeLocator { segments, nodes: Vec::new(), root: 0 };
        if !loc.segments.is_empty() {
            loc.root = loc.build(0, loc.segments.len());
        }
        loc
    }

    fn build(&mut self, first: usize, count: usize) -> usize {
        if count <= LEAF_SIZE {
            let bbox = self.segments[first..first + count]
                .iter()
                .map(|&(a, b)| Aabb::of_segment(a, b))
                .reduce(|x, y| x.union(&y))
                .expect("non-empty leaf");
            self.nodes.push(Node::Leaf { first, count, bbox });
            return self.nodes.len() - 1;
        }
        let half = count / 2;
        let left = self.build(first, half);
        let right = self.build(first + half, count - half);
        let bbox = self.nodes[left].bbox().union(self.nodes[right].bbox());
        self.nodes.push(Node::Inner { left, right, bbox });
        self.nodes.len() - 1
    }

    /// Distance from `p` to the nearest segment (infinite if there are none).
    pub fn distance(&self, p: Point) -> f64 {
        if self.segments.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![self.root];
        while let Some(k) = stack.pop() {
            let node = &self.nodes[k];
            if node.bbox().distance(p) >= best {
                continue;
            }
            match *node {
                Node::Leaf { first, count, .. } => {
                    for &(a, b) in &self.segments[first..first + count] {
                        best = best.min(segment_distance(p, a, b));
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bbox().distance(p);
                    let dr = self.nodes[right].bbox().distance(p);
                    // visit the nearer child first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}
