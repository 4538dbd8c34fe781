//! Static packed R-tree bulk-loaded with Sort-Tile-Recursive.
//!
//! Levels are stored root first. Item `i` of a non-leaf level covers items
//! `i * NODE_SIZE .. (i + 1) * NODE_SIZE` of the next level, so no child
//! pointers are stored. Leaf payloads are feature ordinals.

use std::cmp::Ordering;

pub const NODE_SIZE: usize = 16;

pub type Rect = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeItem {
    pub rect: Rect,
    /// Feature ordinal for leaves; unused (0) above.
    pub payload: u64,
}

pub fn intersects(a: &Rect, b: &Rect) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

pub fn union(a: &Rect, b: &Rect) -> Rect {
    [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])]
}

pub const EMPTY_RECT: Rect = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];

#[derive(Debug, Clone, PartialEq)]
pub struct PackedRTree {
    /// Root level first, leaves last.
    levels: Vec<Vec<NodeItem>>,
}

fn center(r: &Rect, axis: usize) -> f64 {
    (r[axis] + r[axis + 2]) / 2.0
}

fn by_center(axis: usize) -> impl Fn(&NodeItem, &NodeItem) -> Ordering {
    move |a, b| {
        center(&a.rect, axis)
            .total_cmp(&center(&b.rect, axis))
            .then(a.payload.cmp(&b.payload))
    }
}

impl PackedRTree {
    /// Builds from one rectangle per feature; payloads are the positions in
    /// `rects`.
    pub fn build(rects: &[Rect]) -> Self {
        let mut leaves: Vec<NodeItem> = rects
            .iter()
            .enumerate()
            .map(|(i, r)| NodeItem {
                rect: *r,
                payload: i as u64,
            })
            .collect();
        if leaves.is_empty() {
            return PackedRTree { levels: Vec::new() };
        }
        let pages = leaves.len().div_ceil(NODE_SIZE);
        let slices = (pages as f64).sqrt().ceil() as usize;
        let per_slice = slices * NODE_SIZE;
        leaves.sort_by(by_center(0));
        for slice in leaves.chunks_mut(per_slice) {
            slice.sort_by(by_center(1));
        }
        let mut levels = vec![leaves];
        while levels.last().expect("non-empty").len() > NODE_SIZE {
            let parents = levels
                .last()
                .expect("non-empty")
                .chunks(NODE_SIZE)
                .map(|c| NodeItem {
                    rect: c.iter().fold(EMPTY_RECT, |acc, n| union(&acc, &n.rect)),
                    payload: 0,
                })
                .collect();
            levels.push(parents);
        }
        levels.reverse();
        PackedRTree { levels }
    }

    /// Rebuilds from stored levels, checking the packing arithmetic.
    pub fn from_levels(levels: Vec<Vec<NodeItem>>, leaf_count: usize) -> Result<Self, String> {
        match levels.last() {
            None if leaf_count == 0 => return Ok(PackedRTree { levels }),
            None => return Err("index has no levels".into()),
            Some(leaves) if leaves.len() != leaf_count => {
                return Err(format!("index has {} leaves for {leaf_count} features", leaves.len()))
            }
            Some(leaves) => {
                if leaves.iter().any(|n| n.payload as usize >= leaf_count) {
                    return Err("leaf payload out of range".into());
                }
            }
        }
        if levels[0].len() > NODE_SIZE {
            return Err("root level too wide".into());
        }
        for w in levels.windows(2) {
            if w[0].len() != w[1].len().div_ceil(NODE_SIZE) {
                return Err("index level sizes are inconsistent".into());
            }
        }
        Ok(PackedRTree { levels })
    }

    pub fn levels(&self) -> &[Vec<NodeItem>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaves(&self) -> &[NodeItem] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn bounds(&self) -> Option<Rect> {
        self.levels
            .first()
            .map(|root| root.iter().fold(EMPTY_RECT, |acc, n| union(&acc, &n.rect)))
    }

    /// Visits the payload of every leaf whose rectangle intersects `q`.
    pub fn search(&self, q: &Rect, mut visit: impl FnMut(u64)) {
        let Some(root) = self.levels.first() else {
            return;
        };
        let last = self.levels.len() - 1;
        let mut stack: Vec<(usize, usize)> = (0..root.len()).rev().map(|i| (0, i)).collect();
        while let Some((level, i)) = stack.pop() {
            let item = &self.levels[level][i];
            if !intersects(&item.rect, q) {
                continue;
            }
            if level == last {
                visit(item.payload);
                continue;
            }
            let next = &self.levels[level + 1];
            let end = ((i + 1) * NODE_SIZE).min(next.len());
            for child in (i * NODE_SIZE..end).rev() {
                stack.push((level + 1, child));
            }
        }
    }
}
