use crate::error::{Error, Result};

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Inverse of `a` modulo `m` for coprime `a, m` (extended Euclid).
fn inverse_mod(a: u128, m: u128) -> Option<u128> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m as i128) as u128)
}

/// Reconstructs the integer `z` with `|z| <= bound` from its residues
/// `(value, modulus)`.
///
/// The representative is taken in `(-P/2, P/2]` where `P` is the product of
/// the moduli, so `P >= 2 * bound` guarantees it is the true value.
pub fn crt_reconstruct(residues: &[(u64, u64)], bound: u128) -> Result<i128> {
    if residues.is_empty() {
        return Err(Error::InsufficientModuli {
            product: 1,
            bound,
        });
    }
    for (i, &(_, qi)) in residues.iter().enumerate() {
        if qi < 2 {
            return Err(Error::ModuliNotCoprime);
        }
        for &(_, qj) in &residues[..i] {
            if gcd(qi as u128, qj as u128) != 1 {
                return Err(Error::ModuliNotCoprime);
            }
        }
    }
    let product = residues
        .iter()
        .try_fold(1u128, |acc, &(_, q)| acc.checked_mul(q as u128))
        .ok_or_else(|| Error::InvalidParameter("modulus product overflows 128 bits".into()))?;
    let twice_bound = bound.saturating_mul(2);
    if product < twice_bound {
        return Err(Error::InsufficientModuli { product, bound });
    }

    // Incremental combination: x ≡ acc (mod modulus_so_far).
    let mut acc: u128 = 0;
    let mut modulus: u128 = 1;
    for &(value, q) in residues {
        let q = q as u128;
        let target = value as u128 % q;
        let inv = inverse_mod(modulus % q, q).ok_or(Error::ModuliNotCoprime)?;
        let diff = (target + q - acc % q) % q;
        let t = diff * inv % q;
        acc += modulus * t;
        modulus *= q;
    }
    let half = product / 2;
    Ok(if acc > half {
        acc as i128 - product as i128
    } else {
        acc as i128
    })
}
