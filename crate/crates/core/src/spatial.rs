//! Fixed-radius neighbor lookup for agents placed in the unit square.
//!
//! Agents never move, so neighbor lists are computed once when the world is
//! built. A uniform grid with cell side equal to the radius bounds each query
//! to the 3x3 block of cells around the agent.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Precomputed neighbor lists, each sorted by (distance, id).
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    radius: f64,
    lists: Vec<Vec<usize>>,
}

impl NeighborIndex {
    /// Builds the index. The ball is closed: a pair at exactly `radius`
    /// counts as neighbors.
    pub fn build(points: &[Point], radius: f64) -> Self {
        let cells_per_side = ((1.0 / radius).floor() as usize).clamp(1, 1024);
        let cell_of = |p: &Point| {
            let cx = ((p.x * cells_per_side as f64) as usize).min(cells_per_side - 1);
            let cy = ((p.y * cells_per_side as f64) as usize).min(cells_per_side - 1);
            (cx, cy)
        };

        let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells_per_side * cells_per_side];
        for (id, p) in points.iter().enumerate() {
            let (cx, cy) = cell_of(p);
            grid[cy * cells_per_side + cx].push(id);
        }

        let lists = points
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let (cx, cy) = cell_of(p);
                let mut found: Vec<(f64, usize)> = Vec::new();
                for gy in cy.saturating_sub(1)..=(cy + 1).min(cells_per_side - 1) {
                    for gx in cx.saturating_sub(1)..=(cx + 1).min(cells_per_side - 1) {
                        for &other in &grid[gy * cells_per_side + gx] {
                            if other == id {
                                continue;
                            }
                            let d = p.distance(&points[other]);
                            if d <= radius {
                                found.push((d, other));
                            }
                        }
                    }
                }
                found.sort_by(|a, b| match a.0.partial_cmp(&b.0) {
                    Some(Ordering::Equal) | None => a.1.cmp(&b.1),
                    Some(o) => o,
                });
                found.into_iter().map(|(_, other)| other).collect()
            })
            .collect();

        NeighborIndex { radius, lists }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn get(&self, id: usize) -> Option<&[usize]> {
        self.lists.get(id).map(Vec::as_slice)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.lists.is_empty() {
            return 0.0;
        }
        self.lists.iter().map(Vec::len).sum::<usize>() as f64 / self.lists.len() as f64
    }
}
