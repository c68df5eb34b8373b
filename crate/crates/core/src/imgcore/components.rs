//! 8-connected component labeling.

use super::plane::{BinaryMask, Plane};

/// Labeled components of a binary mask.
///
/// Labels start at 1 and are ordered by size, largest first; 0 is background.
/// Equal-size components keep raster-scan discovery order.
#[derive(Clone, Debug)]
pub struct Components {
    pub labels: Plane<u32>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Mask of the `n` largest components.
    pub fn largest(&self, n: usize) -> BinaryMask {
        let n = n.min(self.sizes.len()) as u32;
        self.labels.map(|l| l != 0 && l <= n)
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

pub fn connected_components(mask: &BinaryMask) -> Components {
    let (h, w) = mask.dims();
    let mut raw = Plane::<u32>::new(h, w);
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) || raw.get(y, x) != 0 {
                continue;
            }
            let label = sizes.len() as u32 + 1;
            let mut size = 0;
            raw.set(y, x, label);
            stack.push((y, x));
            while let Some((cy, cx)) = stack.pop() {
                size += 1;
                for (dy, dx) in NEIGHBORS {
                    let ny = cy as isize + dy;
                    let nx = cx as isize + dx;
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let (ny, nx) = (ny as usize, nx as usize);
                    if mask.get(ny, nx) && raw.get(ny, nx) == 0 {
                        raw.set(ny, nx, label);
                        stack.push((ny, nx));
                    }
                }
            }
            sizes.push(size);
        }
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut remap = vec![0u32; sizes.len() + 1];
    for (rank, &old) in order.iter().enumerate() {
        remap[old + 1] = rank as u32 + 1;
    }
    Components {
        labels: raw.map(|l| remap[l as usize]),
        sizes: order.iter().map(|&i| sizes[i]).collect(),
    }
}
