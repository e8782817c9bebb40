use crate::pairgen::Direction;
use crate::scorer::DissimilarityTensor;
use crate::{Error, Result};

/// `N × N × 4` compatibilities, all `≤ 1`; `−∞` where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityTensor {
    n: usize,
    values: Vec<f64>,
}

impl CompatibilityTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: Direction) -> f64 {
        self.values[(x * self.n + y) * 4 + d.index()]
    }
}

/// Contrast of one match against the runner-up: `1 − D / second-min`.
/// The second minimum is taken by value, so a duplicated best value is its
/// own runner-up.
pub fn compatibility_value(d: f64, second_min: f64) -> f64 {
    if second_min == f64::INFINITY || d.is_nan() {
        f64::NEG_INFINITY
    } else if second_min == 0.0 {
        if d == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - d / second_min
    }
}

pub fn compatibility(dis: &DissimilarityTensor) -> Result<CompatibilityTensor> {
    let n = dis.n();
    if n < 2 {
        return Err(Error::invalid(format!("compatibility needs at least 2 pieces, got {n}")));
    }
    let mut values = vec![f64::NEG_INFINITY; n * n * 4];
    for x in 0..n {
        for d in Direction::ALL {
            let (mut lo, mut second) = (f64::INFINITY, f64::INFINITY);
            for z in (0..n).filter(|&z| z != x) {
                let v = dis.get(x, z, d);
                if v < lo {
                    second = lo;
                    lo = v;
                } else if v < second {
                    second = v;
                }
            }
            for y in (0..n).filter(|&y| y != x) {
                values[(x * n + y) * 4 + d.index()] = compatibility_value(dis.get(x, y, d), second);
            }
        }
    }
    Ok(CompatibilityTensor { n, values })
}

/// Most compatible partner of `x` in direction `d`; ties go to the smaller
/// id.
pub fn best_partner(c: &CompatibilityTensor, x: usize, d: Direction) -> usize {
    let mut best = None;
    for z in (0..c.n).filter(|&z| z != x) {
        let v = c.get(x, z, d);
        match best {
            Some((_, bv)) if v.partial_cmp(&bv) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some((z, v)),
        }
    }
    best.expect("n >= 2").0
}

/// All `(x, y, d)` where `y` is `x`'s best partner in `d` and `x` is `y`'s
/// best partner in the opposite direction, sorted.
pub fn best_buddies(c: &CompatibilityTensor) -> Vec<(usize, usize, Direction)> {
    let best: Vec<[usize; 4]> = (0..c.n)
        .map(|x| Direction::ALL.map(|d| best_partner(c, x, d)))
        .collect();
    let mut out = Vec::new();
    for x in 0..c.n {
        for d in Direction::ALL {
            let y = best[x][d.index()];
            if best[y][d.opposite().index()] == x {
                out.push((x, y, d));
            }
        }
    }
    out
}
