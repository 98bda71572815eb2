//! Guo–Hall parallel thinning.
//!
//! Each pass runs two sub-iterations. In both, a pixel is marked when its
//! 8-neighbourhood has exactly one 0→1 crossing pattern (`C == 1`), a
//! neighbour count `N` in `2..=3`, and the sub-iteration's directional test
//! fails; all marks of a sub-iteration are deleted together. Passes repeat
//! until neither sub-iteration deletes anything.
//!
//! Only pixels whose neighbourhood changed since they were last examined are
//! re-examined, which gives the same fixed point as rescanning the whole map.

use crate::raster::BinaryMap;

/// Neighbours p2..p9, clockwise from north.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ring {
    p2: bool,
    p3: bool,
    p4: bool,
    p5: bool,
    p6: bool,
    p7: bool,
    p8: bool,
    p9: bool,
}

impl Ring {
    /// Reads the ring around `(x, y)`, treating out-of-bounds pixels as 0.
    pub(crate) fn around(map: &BinaryMap, x: usize, y: usize) -> Self {
        let (w, h) = map.dims();
        let at = |dx: isize, dy: isize| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            nx >= 0
                && ny >= 0
                && (nx as usize) < w
                && (ny as usize) < h
                && map.get(nx as usize, ny as usize)
        };
        Self {
            p2: at(0, -1),
            p3: at(1, -1),
            p4: at(1, 0),
            p5: at(1, 1),
            p6: at(0, 1),
            p7: at(-1, 1),
            p8: at(-1, 0),
            p9: at(-1, -1),
        }
    }

    /// Guo–Hall deletion test for sub-iteration `step` (0 or 1).
    pub(crate) fn deletable(&self, step: usize) -> bool {
        let Ring {
            p2,
            p3,
            p4,
            p5,
            p6,
            p7,
            p8,
            p9,
        } = *self;
        let b = |v: bool| v as u8;
        let crossings =
            b(!p2 & (p3 | p4)) + b(!p4 & (p5 | p6)) + b(!p6 & (p7 | p8)) + b(!p8 & (p9 | p2));
        let n1 = b(p9 | p2) + b(p3 | p4) + b(p5 | p6) + b(p7 | p8);
        let n2 = b(p2 | p3) + b(p4 | p5) + b(p6 | p7) + b(p8 | p9);
        let n = n1.min(n2);
        let directional = if step == 0 {
            (p6 | p7 | !p9) & p8
        } else {
            (p2 | p3 | !p5) & p4
        };
        crossings == 1 && (2..=3).contains(&n) && !directional
    }
}

/// Padded working copy with per-sub-iteration dirty lists.
struct Thinner {
    width: usize,
    stride: usize,
    cells: Vec<bool>,
    queued: [Vec<bool>; 2],
    queue: [Vec<usize>; 2],
}

const OFFSETS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

impl Thinner {
    fn new(map: &BinaryMap) -> Self {
        let (w, h) = map.dims();
        let stride = w + 2;
        let mut cells = vec![false; stride * (h + 2)];
        for y in 0..h {
            for x in 0..w {
                cells[(y + 1) * stride + x + 1] = map.get(x, y);
            }
        }
        let n = cells.len();
        let mut t = Self {
            width: w,
            stride,
            cells,
            queued: [vec![false; n], vec![false; n]],
            queue: [Vec::new(), Vec::new()],
        };
        // Only pixels touching the background can ever satisfy C == 1.
        for idx in 0..n {
            if t.cells[idx] && t.neighbours(idx).any(|j| !t.cells[j]) {
                t.enqueue(idx);
            }
        }
        t
    }

    fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let stride = self.stride as isize;
        OFFSETS
            .iter()
            .map(move |&(dx, dy)| (idx as isize + dy * stride + dx) as usize)
    }

    fn ring(&self, idx: usize) -> Ring {
        let s = self.stride;
        let c = &self.cells;
        Ring {
            p2: c[idx - s],
            p3: c[idx - s + 1],
            p4: c[idx + 1],
            p5: c[idx + s + 1],
            p6: c[idx + s],
            p7: c[idx + s - 1],
            p8: c[idx - 1],
            p9: c[idx - s - 1],
        }
    }

    fn enqueue(&mut self, idx: usize) {
        for step in 0..2 {
            if !self.queued[step][idx] {
                self.queued[step][idx] = true;
                self.queue[step].push(idx);
            }
        }
    }

    fn sub_iteration(&mut self, step: usize) -> bool {
        let mut pending = std::mem::take(&mut self.queue[step]);
        // Row-major scan order keeps the dirty lists deterministic.
        pending.sort_unstable();
        let mut marked = Vec::new();
        for &idx in &pending {
            self.queued[step][idx] = false;
            if self.cells[idx] && self.ring(idx).deletable(step) {
                marked.push(idx);
            }
        }
        for &idx in &marked {
            self.cells[idx] = false;
        }
        for &idx in &marked {
            let stride = self.stride as isize;
            for &(dx, dy) in &OFFSETS {
                let j = (idx as isize + dy * stride + dx) as usize;
                if self.cells[j] {
                    self.enqueue(j);
                }
            }
        }
        pending.clear();
        if self.queue[step].is_empty() {
            self.queue[step] = pending;
        }
        !marked.is_empty()
    }

    fn run(mut self) -> BinaryMap {
        loop {
            let first = self.sub_iteration(0);
            let second = self.sub_iteration(1);
            if !first && !second {
                break;
            }
        }
        let h = self.cells.len() / self.stride - 2;
        let mut out = BinaryMap::empty(self.width, h);
        for y in 0..h {
            for x in 0..self.width {
                if self.cells[(y + 1) * self.stride + x + 1] {
                    out.set(x, y, true);
                }
            }
        }
        out
    }
}

/// Guo–Hall thinning to a fixed point.
pub fn thin(map: &BinaryMap) -> BinaryMap {
    if map.count_ones() == 0 {
        return map.clone();
    }
    Thinner::new(map).run()
}

/// True when no set pixel of `map` is deletable in either sub-iteration.
pub fn is_thin(map: &BinaryMap) -> bool {
    let (w, h) = map.dims();
    (0..h).all(|y| {
        (0..w).all(|x| {
            !map.get(x, y) || {
                let ring = Ring::around(map, x, y);
                !ring.deletable(0) && !ring.deletable(1)
            }
        })
    })
}
