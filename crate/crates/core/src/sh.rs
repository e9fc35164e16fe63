//! Real spherical harmonics up to degree 3.
//!
//! Basis ordering and signs follow the usual splatting convention (Condon-Shortley
//! phase included), so `Y_00 = 0.28209479` and the degree-1 terms are
//! `(-C1 y, C1 z, -C1 x)`.

use crate::{Error, Result, Vec3};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [1.092_548_430_592_079_2, -1.092_548_430_592_079_2, 0.315_391_565_252_520_05, -1.092_548_430_592_079_2, 0.546_274_215_296_039_6];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

/// Number of coefficients of a degree-`degree` expansion.
pub const fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree implied by a coefficient count, if it is a perfect square within range.
pub fn degree_for_count(count: usize) -> Option<usize> {
    (0..=MAX_DEGREE).find(|&d| coeff_count(d) == count)
}

/// Writes the basis values `Y_i(dir)` for the first `out.len()` coefficients.
///
/// `out.len()` must be one of 1, 4, 9, 16.
pub fn basis_into(dir: &Vec3, out: &mut [f64]) {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let n = out.len();
    out[0] = SH_C0;
    if n <= 1 {
        return;
    }
    out[1] = -SH_C1 * y;
    out[2] = SH_C1 * z;
    out[3] = -SH_C1 * x;
    if n <= 4 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    out[4] = SH_C2[0] * xy;
    out[5] = SH_C2[1] * yz;
    out[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    out[7] = SH_C2[3] * xz;
    out[8] = SH_C2[4] * (xx - yy);
    if n <= 9 {
        return;
    }
    out[9] = SH_C3[0] * y * (3.0 * xx - yy);
    out[10] = SH_C3[1] * xy * z;
    out[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = SH_C3[5] * z * (xx - yy);
    out[15] = SH_C3[6] * x * (xx - 3.0 * yy);
}

/// Degree-2 basis, the size used by splat primitives.
pub fn basis9(dir: &Vec3) -> [f64; 9] {
    let mut out = [0.0; 9];
    basis_into(dir, &mut out);
    out
}

/// Evaluates `sum_i c_i Y_i(dir)`.
///
/// `dir` must be unit length (1e-6) and `coeffs.len()` a valid `(L+1)^2` with `L <= 3`.
pub fn eval_sh(coeffs: &[f64], dir: &Vec3) -> Result<f64> {
    if degree_for_count(coeffs.len()).is_none() {
        return Err(Error::contract(format!("SH coefficient count {} is not (L+1)^2 for L <= {MAX_DEGREE}", coeffs.len())));
    }
    if (dir.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::contract("SH direction must be unit length"));
    }
    let mut basis = [0.0; 16];
    let basis = &mut basis[..coeffs.len()];
    basis_into(dir, basis);
    Ok(coeffs.iter().zip(basis.iter()).map(|(c, y)| c * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Associated Legendre P_l^m(x) with the Condon-Shortley phase, by recurrence.
    fn legendre(l: usize, m: usize, x: f64) -> f64 {
        let mut pmm = 1.0;
        if m > 0 {
            let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
            let mut fact = 1.0;
            for _ in 0..m {
                pmm *= -fact * somx2;
                fact += 2.0;
            }
        }
        if l == m {
            return pmm;
        }
        let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
        if l == m + 1 {
            return pmmp1;
        }
        let mut pll = 0.0;
        for ll in (m + 2)..=l {
            pll = ((2 * ll - 1) as f64 * x * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
            pmm = pmmp1;
            pmmp1 = pll;
        }
        pll
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Textbook real SH from spherical angles, indexed l*l + l + m.
    fn reference_basis(l: usize, m: i64, dir: &Vec3) -> f64 {
        let cos_t = dir.z;
        let phi = dir.y.atan2(dir.x);
        let am = m.unsigned_abs() as usize;
        let k = (((2 * l + 1) as f64) / (4.0 * std::f64::consts::PI) * factorial(l - am) / factorial(l + am)).sqrt();
        let p = legendre(l, am, cos_t);
        match m.cmp(&0) {
            std::cmp::Ordering::Equal => k * p,
            std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * k * (am as f64 * phi).cos() * p,
            std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * k * (am as f64 * phi).sin() * p,
        }
    }

    fn random_dir(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn dc_term_is_y00() {
        let v = eval_sh(&[1.0], &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((v - 0.28209479).abs() < 1e-8);
        let v = eval_sh(&[1.0], &Vec3::new(0.6, -0.8, 0.0)).unwrap();
        assert!((v - SH_C0).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_zero() {
        assert_eq!(eval_sh(&[0.0; 9], &Vec3::new(0.0, 1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn wrong_count_is_rejected() {
        assert!(matches!(eval_sh(&[0.0; 5], &Vec3::z()), Err(Error::Contract(_))));
        assert!(matches!(eval_sh(&[0.0; 25], &Vec3::z()), Err(Error::Contract(_))));
        assert!(eval_sh(&[0.0; 4], &Vec3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn degree_one_part_is_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let dir = random_dir(&mut rng);
            let c: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let dc = c[0] * SH_C0;
            let a = eval_sh(&c, &dir).unwrap() - dc;
            let b = eval_sh(&c, &(-dir)).unwrap() - dc;
            assert!((a + b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_legendre_table_on_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let dir = random_dir(&mut rng);
            let mut fast = [0.0; 16];
            basis_into(&dir, &mut fast);
            for l in 0..=3usize {
                for m in -(l as i64)..=(l as i64) {
                    let idx = (l * l) as i64 + l as i64 + m;
                    let want = reference_basis(l, m, &dir);
                    let got = fast[idx as usize];
                    assert!((want - got).abs() < 1e-10, "l={l} m={m}: {want} vs {got}");
                }
            }
        }
    }
}
