//! Connected components of binary masks and their shape statistics.

use alloc::vec::Vec;

use crate::geometry::BoundingBox;
use crate::mask::BinaryMask;

/// Central second moments `(mu20, mu02, mu11)` summed over member pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CentralMoments {
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

/// Orientation of a region's moment ellipse. Isotropic regions have no
/// major axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    Degrees(f64),
    Isotropic,
}

impl Orientation {
    /// Angle used by the orientation filter; isotropic regions count as 90.
    pub fn degrees(self) -> f64 {
        match self {
            Orientation::Degrees(d) => d,
            Orientation::Isotropic => 90.0,
        }
    }
}

/// Angle in `[0, 90]` degrees between the major axis and the horizontal.
///
/// Image rows grow downward, which only flips the sign of the angle; the
/// absolute value is the geometric angle either way.
pub fn region_orientation(m: CentralMoments) -> Orientation {
    let diff = m.mu20 - m.mu02;
    if diff == 0.0 && m.mu11 == 0.0 {
        return Orientation::Isotropic;
    }
    let theta = 0.5 * libm::atan2(2.0 * m.mu11, diff);
    let deg = theta.abs().to_degrees();
    Orientation::Degrees(deg.clamp(0.0, 90.0))
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegion {
    /// Member pixels `[x, y]` in raster order.
    pub pixels: Vec<[u32; 2]>,
    pub centroid: (f64, f64),
    pub central_moments: CentralMoments,
    pub orientation: Orientation,
    pub bbox: BoundingBox,
}

impl LabeledRegion {
    /// Computes statistics for a non-empty pixel set given in raster order.
    ///
    /// # Panics
    /// Panics when `pixels` is empty.
    pub fn from_pixels(pixels: Vec<[u32; 2]>) -> Self {
        assert!(!pixels.is_empty(), "region must contain a pixel");
        let n = pixels.len() as i128;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for &[x, y] in &pixels {
            let (xi, yi) = (x as i128, y as i128);
            sx += xi;
            sy += yi;
            sxx += xi * xi;
            syy += yi * yi;
            sxy += xi * yi;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        // n * mu exactly in integers; the isotropy test depends on exact zeros.
        let n20 = n * sxx - sx * sx;
        let n02 = n * syy - sy * sy;
        let n11 = n * sxy - sx * sy;
        let nf = n as f64;
        let central_moments = CentralMoments {
            mu20: n20 as f64 / nf,
            mu02: n02 as f64 / nf,
            mu11: n11 as f64 / nf,
        };
        let orientation = region_orientation(CentralMoments {
            mu20: n20 as f64,
            mu02: n02 as f64,
            mu11: n11 as f64,
        });
        Self {
            centroid: (sx as f64 / nf, sy as f64 / nf),
            central_moments,
            orientation,
            bbox: BoundingBox::from_corners(x0, y0, x1, y1),
            pixels,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn orientation_deg(&self) -> f64 {
        self.orientation.degrees()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let up = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = up;
            a = up;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels the 8-connected foreground components of `mask`.
///
/// Output is ordered by the top-left corner `(y, x)` of each component's
/// bounding box, then by its first pixel in raster order.
pub fn connected_components(mask: &BinaryMask) -> Vec<LabeledRegion> {
    let (w, h) = (mask.width(), mask.height());
    const NONE: u32 = u32::MAX;
    let mut labels = alloc::vec![NONE; w * h];
    let mut sets = DisjointSet::new();

    // First pass: provisional labels from the already-visited neighbours
    // (W, NW, N, NE).
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut current = NONE;
            let mut visit = |nx: usize, ny: usize, labels: &[u32], sets: &mut DisjointSet| {
                let l = labels[ny * w + nx];
                if l != NONE {
                    if current == NONE {
                        current = l;
                    } else {
                        sets.union(current, l);
                    }
                }
            };
            if x > 0 {
                visit(x - 1, y, &labels, &mut sets);
            }
            if y > 0 {
                if x > 0 {
                    visit(x - 1, y - 1, &labels, &mut sets);
                }
                visit(x, y - 1, &labels, &mut sets);
                if x + 1 < w {
                    visit(x + 1, y - 1, &labels, &mut sets);
                }
            }
            labels[y * w + x] = if current == NONE { sets.make() } else { current };
        }
    }

    // Second pass: gather pixels per root in raster order.
    let mut slot_of_root = alloc::vec![NONE; sets.parent.len()];
    let mut groups: Vec<Vec<[u32; 2]>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == NONE {
                continue;
            }
            let root = sets.find(l) as usize;
            if slot_of_root[root] == NONE {
                slot_of_root[root] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[slot_of_root[root] as usize].push([x as u32, y as u32]);
        }
    }

    let mut regions: Vec<LabeledRegion> = groups.into_iter().map(LabeledRegion::from_pixels).collect();
    regions.sort_by_key(|r| (r.bbox.y, r.bbox.x, r.pixels[0][1], r.pixels[0][0]));
    regions
}
