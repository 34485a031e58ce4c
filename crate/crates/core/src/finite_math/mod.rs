//! Exact arithmetic over `Z_p`, Chinese remaindering, GF(2) matrix hashing
//! and fixed-width bit encodings.

mod bits;
mod crt;
mod gf2;
mod modp;

pub use bits::{decode_uint, encode_uint, random_uint, BitReader, BitString};
pub use crt::crt_reconstruct;
pub use gf2::{gf2_hash, Gf2Matrix};
pub use modp::{ceil_log2, is_prime, primes_up_to, IntMatrix, MatrixModP, PrimeModulus, MAX_MODULUS};
