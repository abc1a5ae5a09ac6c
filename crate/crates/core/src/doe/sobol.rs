//! Unscrambled Sobol points with Joe–Kuo (new-joe-kuo-6) direction numbers.
//!
//! Points are addressed by index (Gray-code order), so any slice of the
//! sequence can be produced independently of the others.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const BITS: usize = 32;
const DIRECTION_DATA: &str = include_str!("../../data/new-joe-kuo-6.1000.txt");

/// Number of dimensions covered by the embedded direction numbers.
pub fn max_dimension() -> usize {
    directions().len()
}

fn directions() -> &'static [[u32; BITS]] {
    static DIRS: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut dirs = Vec::with_capacity(1000);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - i);
        }
        dirs.push(first);
        for line in DIRECTION_DATA.lines().skip(1) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().expect("malformed direction-number table"))
                .collect();
            if fields.len() < 3 {
                continue;
            }
            let s = fields[1] as usize;
            let a = fields[2];
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for i in 0..s.min(BITS) {
                v[i] = m[i] << (BITS - 1 - i);
            }
            for i in s..BITS {
                let mut value = v[i - s] ^ (v[i - s] >> s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        value ^= v[i - k];
                    }
                }
                v[i] = value;
            }
            dirs.push(v);
        }
        dirs
    })
}

/// Coordinate `dim` of the Sobol point with sequence index `index`.
pub fn sobol_coordinate(index: u64, dim: usize) -> Result<f64> {
    let dirs = directions();
    let v = dirs.get(dim).ok_or_else(|| {
        Error::input(format!(
            "Sobol dimension {} exceeds the {} supported dimensions",
            dim + 1,
            dirs.len()
        ))
    })?;
    if index >= 1u64 << BITS {
        return Err(Error::input("Sobol index exceeds 2^32"));
    }
    let gray = index ^ (index >> 1);
    let mut x = 0u32;
    for (bit, dv) in v.iter().enumerate() {
        if (gray >> bit) & 1 == 1 {
            x ^= dv;
        }
    }
    Ok(x as f64 / (1u64 << BITS) as f64)
}

/// The first `n` points of the `m`-dimensional sequence after skipping `skip` points.
pub fn sobol_points(n: usize, m: usize, skip: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::input("sobol_points requires N >= 1"));
    }
    if m == 0 || m > max_dimension() {
        return Err(Error::input(format!(
            "Sobol dimension {m} outside 1..={}",
            max_dimension()
        )));
    }
    let mut out = DMatrix::zeros(n, m);
    for k in 0..m {
        for row in 0..n {
            out[(row, k)] = sobol_coordinate((skip + row) as u64, k)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let p = sobol_points(1, 2, 1).unwrap();
        assert_eq!((p[(0, 0)], p[(0, 1)]), (0.5, 0.5));
        let p = sobol_points(3, 2, 0).unwrap();
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        // second and third points of the standard 2-d sequence
        assert_eq!((p[(2, 0)], p[(2, 1)]), (0.75, 0.25));
    }

    #[test]
    fn supports_many_dimensions() {
        assert!(max_dimension() >= 64);
        assert!(sobol_points(2, max_dimension() + 1, 1).is_err());
        assert!(sobol_points(0, 2, 1).is_err());
    }

    #[test]
    fn one_dimensional_stratification() {
        // every dyadic block of 2^k consecutive points hits each interval once
        let p = sobol_points(64, 10, 0).unwrap();
        for k in 0..10 {
            let mut seen = [false; 64];
            for r in 0..64 {
                let cell = (p[(r, k)] * 64.0) as usize;
                assert!(!seen[cell], "dimension {k} repeats cell {cell}");
                seen[cell] = true;
            }
        }
    }
}
