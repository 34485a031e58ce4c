use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::signature::{RsaPublicKey, SignatureScheme, ToyRsa};
use super::space::{f_t_rule, SamplePublic};
use crate::error::{Error, Result};
use crate::finite_math::{ceil_log2, BitString, Gf2Matrix};

/// Largest hash width `m` accepted; hash sets are `2^m`-bit bitmaps.
pub const MAX_HASH_BITS: usize = 20;
/// Largest `n'` for which `S[m(H)]` is enumerated.
pub const MAX_ENUMERATION_BITS: usize = 20;

/// The optional `(i, h, j)` branch: `h` joins `H_i` when bit `j` of the
/// signature on `h ∥ 0 ∥ m ∥ i` is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub i: usize,
    pub h: u64,
    pub j: usize,
}

/// Restriction of `f` (`v = 1`) or `f^T` (`v = 0`) to `S[m(H_1, ..., H_{n'})]`,
/// optionally branched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensoredSpec {
    pub t: BTreeSet<u64>,
    pub m: usize,
    /// `h_sets[i-1]` is `H_i` as a `2^m`-bit membership bitmap.
    pub h_sets: Vec<BitString>,
    pub branch: Option<Branch>,
    pub v: bool,
}

impl CensoredSpec {
    /// `H_i = {0,1}^m` for every `i`, no branch.
    pub fn full(t: BTreeSet<u64>, m: usize, n_prime: usize, v: bool) -> Self {
        let all: BitString = std::iter::repeat_n(true, 1 << m).collect();
        CensoredSpec {
            t,
            m,
            h_sets: vec![all; n_prime],
            branch: None,
            v,
        }
    }

    /// `H_i = {B^{(m,i)} x : x ∈ T}`.
    pub fn from_sample_hashes(public: &SamplePublic, t: BTreeSet<u64>, m: usize, v: bool) -> Self {
        let h_sets = (1..=public.n_prime)
            .map(|i| {
                let mut set = BitString::zeros(1 << m);
                for &x in &t {
                    set.set(public.hash(m, i, x) as usize, true);
                }
                set
            })
            .collect();
        CensoredSpec {
            t,
            m,
            h_sets,
            branch: None,
            v,
        }
    }

    pub fn validate(&self, n_prime: usize, signature_bits: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.m > n_prime || self.m > MAX_HASH_BITS {
            return bad(format!("hash width {} outside 1..={}", self.m, n_prime.min(MAX_HASH_BITS)));
        }
        if self.h_sets.len() != n_prime || self.h_sets.iter().any(|h| h.len() != 1 << self.m) {
            return bad(format!("need {n_prime} hash sets of {} bits", 1u64 << self.m));
        }
        if let Some(&x) = self.t.iter().find(|&&x| x >> n_prime != 0) {
            return bad(format!("seed {x} wider than {n_prime} bits"));
        }
        if let Some(b) = self.branch {
            if !(1..=n_prime).contains(&b.i) || b.h >> self.m != 0 || !(1..=signature_bits).contains(&b.j) {
                return bad(format!("branch {b:?} out of range"));
            }
        }
        Ok(())
    }

    fn admits(&self, public: &SamplePublic, x: u64, signatures: &[BitString], steps: &mut u64) -> bool {
        let mut inside = true;
        for i in 1..=public.n_prime {
            *steps += 1;
            let h = public.hash(self.m, i, x);
            let mut hit = self.h_sets[i - 1].get(h as usize);
            if let Some(b) = self.branch {
                if b.i == i && b.h == h {
                    // The point carries the signature on h ∥ 0 ∥ m ∥ i itself.
                    hit |= signatures[(self.m - 1) * public.n_prime + (i - 1)].get(b.j - 1);
                }
            }
            inside &= hit;
        }
        inside
    }
}

/// Value of the censored function at `point`: `Some(bit)` inside
/// `S[m(H)]` (or its branched variant), `None` elsewhere, including on
/// anything outside `S`. Uses only public data and the point itself.
pub fn censored_membership(public: &SamplePublic, point: &BitString, spec: &CensoredSpec) -> Option<bool> {
    let mut steps = 0;
    censored_counted(public, point, spec, &mut steps)
}

fn censored_counted(public: &SamplePublic, point: &BitString, spec: &CensoredSpec, steps: &mut u64) -> Option<bool> {
    let parsed = public.parse_counted(point, steps)?;
    if !spec.admits(public, parsed.x, &parsed.signatures, steps) {
        return None;
    }
    *steps += 1 << spec.m;
    Some(spec.v || f_t_rule(parsed.x, &spec.t, public.n_prime))
}

/// Seeds of `S[m(H)]` (no branch), by enumeration of `{0,1}^{n'}`.
pub fn enumerate_censored(hashes: &[Gf2Matrix], h_sets: &[BitString], n_prime: usize) -> Result<BTreeSet<u64>> {
    if n_prime > MAX_ENUMERATION_BITS {
        return Err(Error::BudgetExceeded(format!(
            "enumerating 2^{n_prime} seeds exceeds 2^{MAX_ENUMERATION_BITS}"
        )));
    }
    Ok((0..1u64 << n_prime)
        .filter(|&x| hashes.iter().zip(h_sets).all(|(b, h)| h.get(b.apply_uint(x) as usize)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub n_prime: usize,
    pub t_size: usize,
    pub m: usize,
    pub trials: usize,
    pub exact: usize,
    pub rate: f64,
}

/// Per trial: fresh `B^{(m,i)}`, a random `T` of `t_size` seeds, `H` from
/// the hashes of `T`; counts how often `S[m(H)] = T` exactly. `m` defaults
/// to `⌈log2 |T|⌉ + 2`.
pub fn collision_lemma_experiment(
    n_prime: usize,
    t_size: usize,
    m: Option<usize>,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<CollisionReport> {
    if n_prime == 0 || n_prime > MAX_ENUMERATION_BITS {
        return Err(Error::BudgetExceeded(format!(
            "collision check needs 1 <= n' <= {MAX_ENUMERATION_BITS}, got {n_prime}"
        )));
    }
    if t_size == 0 || t_size > 1 << n_prime {
        return Err(Error::InvalidParameter(format!("|T| = {t_size} outside 1..=2^{n_prime}")));
    }
    let m = m.unwrap_or(ceil_log2(t_size as u64) as usize + 2).min(n_prime);
    if m > MAX_HASH_BITS {
        return Err(Error::InvalidParameter(format!("hash width {m} above {MAX_HASH_BITS}")));
    }
    let mut exact = 0;
    for _ in 0..trials {
        let hashes: Vec<Gf2Matrix> = (0..n_prime).map(|_| Gf2Matrix::random(m, n_prime, rng)).collect();
        let t: BTreeSet<u64> = index::sample(rng, 1 << n_prime, t_size)
            .into_iter()
            .map(|x| x as u64)
            .collect();
        let h_sets: Vec<BitString> = hashes
            .iter()
            .map(|b| {
                let mut set = BitString::zeros(1 << m);
                for &x in &t {
                    set.set(b.apply_uint(x) as usize, true);
                }
                set
            })
            .collect();
        if enumerate_censored(&hashes, &h_sets, n_prime)? == t {
            exact += 1;
        }
    }
    Ok(CollisionReport {
        n_prime,
        t_size,
        m,
        trials,
        exact,
        rate: exact as f64 / trials.max(1) as f64,
    })
}

const CFO_MAGIC: &[u8; 4] = b"SPCF";
const CFO_VERSION: u8 = 1;

/// Program emitted by [`cfo_stub`]. Its length and its evaluation step
/// count depend only on `(n, m)`. It hides nothing: the censored spec is stored in
/// the clear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfoArtifact {
    pub bytes: Vec<u8>,
}

/// Steps every evaluation reports for the given shape.
pub fn cfo_step_budget(n_prime: usize, m: usize) -> u64 {
    (n_prime * n_prime + n_prime + (1 << m)) as u64
}

struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn uint(&mut self, v: u64, bytes: usize) {
        self.0.extend_from_slice(&v.to_be_bytes()[8 - bytes..]);
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ByteReader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos + len)
            .ok_or_else(|| Error::MalformedArtifact("truncated program".into()))?;
        self.pos += len;
        Ok(out)
    }

    fn uint(&mut self, bytes: usize) -> Result<u64> {
        Ok(self.take(bytes)?.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
    }
}

/// Compiles a censored spec into a fixed-size program. `T` is padded to
/// `2^m` slots, so `0 < |T| <= 2^m` is required.
pub fn cfo_stub(public: &SamplePublic, spec: &CensoredSpec) -> Result<CfoArtifact> {
    spec.validate(public.n_prime, public.scheme.signature_bits())?;
    if spec.t.is_empty() || spec.t.len() > 1 << spec.m {
        return Err(Error::InvalidParameter(format!(
            "|T| = {} outside 1..=2^{}",
            spec.t.len(),
            spec.m
        )));
    }
    let mut w = ByteWriter(CFO_MAGIC.to_vec());
    w.uint(CFO_VERSION as u64, 1);
    w.uint(public.n as u64, 4);
    w.uint(public.n_prime as u64, 1);
    w.uint(public.scheme.prime_bits as u64, 1);
    w.uint(public.pk.modulus, 8);
    w.uint(public.pk.exponent, 8);
    let mut b_bits = BitString::new();
    for row in &public.b {
        for m in row {
            b_bits.append(&m.to_bits());
        }
    }
    w.0.extend_from_slice(&b_bits.to_packed());
    w.uint(spec.m as u64, 1);
    w.uint(spec.v as u64, 1);
    let branch = spec.branch.unwrap_or(Branch { i: 0, h: 0, j: 0 });
    w.uint(spec.branch.is_some() as u64, 1);
    w.uint(branch.i as u64, 2);
    w.uint(branch.h, 4);
    w.uint(branch.j as u64, 2);
    w.uint(spec.t.len() as u64, 4);
    for slot in 0..1usize << spec.m {
        w.uint(spec.t.iter().nth(slot).copied().unwrap_or(0), 8);
    }
    let mut h_bits = BitString::new();
    for h in &spec.h_sets {
        h_bits.append(h);
    }
    w.0.extend_from_slice(&h_bits.to_packed());
    Ok(CfoArtifact { bytes: w.0 })
}

impl CfoArtifact {
    fn decode(&self) -> Result<(SamplePublic, CensoredSpec)> {
        let mut r = ByteReader {
            bytes: &self.bytes,
            pos: 0,
        };
        if r.take(4)? != CFO_MAGIC || r.uint(1)? != CFO_VERSION as u64 {
            return Err(Error::MalformedArtifact("missing SPCF v1 header".into()));
        }
        let n = r.uint(4)? as usize;
        let n_prime = r.uint(1)? as usize;
        let scheme = ToyRsa::new(r.uint(1)? as u32)?;
        let pk = RsaPublicKey {
            modulus: r.uint(8)?,
            exponent: r.uint(8)?,
        };
        let b_len = n_prime * n_prime * n_prime * (n_prime + 1) / 2;
        let b_bits = BitString::from_packed(r.take(b_len.div_ceil(8))?, b_len)?;
        let mut pos = 0;
        let mut b = Vec::with_capacity(n_prime);
        for i in 1..=n_prime {
            let mut row = Vec::with_capacity(n_prime);
            for _ in 0..n_prime {
                let rows = (0..i)
                    .map(|k| b_bits.slice(pos + k * n_prime..pos + (k + 1) * n_prime))
                    .collect();
                pos += i * n_prime;
                row.push(Gf2Matrix::from_rows(rows)?);
            }
            b.push(row);
        }
        let m = r.uint(1)? as usize;
        let v = r.uint(1)? == 1;
        let has_branch = r.uint(1)? == 1;
        let branch = Branch {
            i: r.uint(2)? as usize,
            h: r.uint(4)?,
            j: r.uint(2)? as usize,
        };
        let t_len = r.uint(4)? as usize;
        if m == 0 || m > MAX_HASH_BITS || t_len > 1 << m {
            return Err(Error::MalformedArtifact("hash width or |T| out of range".into()));
        }
        let slots = (0..1usize << m).map(|_| r.uint(8)).collect::<Result<Vec<_>>>()?;
        let h_len = n_prime << m;
        let h_bits = BitString::from_packed(r.take(h_len.div_ceil(8))?, h_len)?;
        if r.pos != self.bytes.len() {
            return Err(Error::MalformedArtifact("trailing bytes".into()));
        }
        let spec = CensoredSpec {
            t: slots[..t_len].iter().copied().collect(),
            m,
            h_sets: (0..n_prime).map(|i| h_bits.slice(i << m..(i + 1) << m)).collect(),
            branch: has_branch.then_some(branch),
            v,
        };
        let public = SamplePublic {
            n,
            n_prime,
            scheme,
            pk,
            b,
        };
        spec.validate(n_prime, scheme.signature_bits())?;
        Ok((public, spec))
    }

    /// Runs the program on `point`. The step count is always
    /// [`cfo_step_budget`]: shorter runs idle until the budget is reached.
    pub fn evaluate(&self, point: &BitString) -> Result<(Option<bool>, u64)> {
        let (public, spec) = self.decode()?;
        let budget = cfo_step_budget(public.n_prime, spec.m);
        let mut steps = 0;
        let value = censored_counted(&public, point, &spec, &mut steps);
        if steps > budget {
            return Err(Error::BudgetExceeded(format!("{steps} steps over budget {budget}")));
        }
        Ok((value, budget))
    }
}

/// Output of the strong-spoofing learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrongModel {
    /// Too many samples for the hash width: the constant 1.
    ConstantOne,
    Program { artifact: CfoArtifact, v: bool },
}

impl StrongModel {
    pub fn evaluate(&self, point: &BitString) -> Result<Option<bool>> {
        match self {
            StrongModel::ConstantOne => Ok(Some(true)),
            StrongModel::Program { artifact, .. } => Ok(artifact.evaluate(point)?.0),
        }
    }
}

/// `m = ⌈log2 t⌉ + 2`; returns the constant 1 if `m > n'`, otherwise the
/// program for `f` (`v = 1`) or `f^T` (`v = 0`) on all of `S`, with `T` the
/// sampled seeds and a fair coin `v`.
pub fn strong_learn(public: &SamplePublic, samples: &[(BitString, bool)], rng: &mut dyn RngCore) -> Result<StrongModel> {
    let m = ceil_log2(samples.len().max(1) as u64) as usize + 2;
    if m > public.n_prime {
        return Ok(StrongModel::ConstantOne);
    }
    let t = samples
        .iter()
        .map(|(point, _)| {
            public
                .parse(point)
                .map(|p| p.x)
                .ok_or_else(|| Error::MalformedSamples("sample outside the sample space".into()))
        })
        .collect::<Result<BTreeSet<u64>>>()?;
    let v: bool = rng.gen();
    let spec = CensoredSpec::full(t, m, public.n_prime, v);
    Ok(StrongModel::Program {
        artifact: cfo_stub(public, &spec)?,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::strong::{SampleSpace, ToyRsa};

    fn space(n_prime: usize) -> SampleSpace {
        SampleSpace::with_seed_len(n_prime, ToyRsa::default(), &mut seeded(n_prime as u64)).unwrap()
    }

    #[test]
    fn full_hash_sets_accept_every_member() {
        let sp = space(5);
        let spec = CensoredSpec::full([1, 2].into(), 3, 5, true);
        let mut rng = seeded(1);
        for _ in 0..30 {
            let (point, _) = sp.sample(&mut rng);
            assert_eq!(censored_membership(&sp.public, &point, &spec), Some(true));
        }
        let junk = BitString::zeros(sp.public.n);
        assert_eq!(censored_membership(&sp.public, &junk, &spec), None);
    }

    #[test]
    fn collision_spec_censors_fresh_points() {
        let sp = space(8);
        let mut rng = seeded(2);
        let t: BTreeSet<u64> = (0..4).map(|_| rng.gen_range(0..256)).collect();
        let spec = CensoredSpec::from_sample_hashes(&sp.public, t.clone(), 4, false);
        for &x in &t {
            assert!(censored_membership(&sp.public, &sp.point(x), &spec).is_some());
        }
        let nulls = (0..100)
            .filter(|_| {
                let (point, x) = sp.sample(&mut rng);
                t.contains(&x) || censored_membership(&sp.public, &point, &spec).is_none()
            })
            .count();
        assert!(nulls >= 90);
    }

    #[test]
    fn branch_reads_the_embedded_signature() {
        let sp = space(5);
        let x = 7;
        let m = 3;
        let i = 2;
        let h = sp.public.hash(m, i, x);
        let sig = sp.public.parse(&sp.point(x)).unwrap().signatures[(m - 1) * 5 + (i - 1)].clone();
        let mut spec = CensoredSpec::from_sample_hashes(&sp.public, [x].into(), m, true);
        spec.h_sets[i - 1].set(h as usize, false);
        for j in 1..=sig.len() {
            spec.branch = Some(Branch { i, h, j });
            let got = censored_membership(&sp.public, &sp.point(x), &spec);
            assert_eq!(got.is_some(), sig.get(j - 1));
        }
    }

    #[test]
    fn monotone_in_hash_sets() {
        let mut rng = seeded(3);
        let hashes: Vec<Gf2Matrix> = (0..8).map(|_| Gf2Matrix::random(3, 8, &mut rng)).collect();
        let small: Vec<BitString> = (0..8).map(|_| BitString::random(8, &mut rng)).collect();
        let big: Vec<BitString> = small
            .iter()
            .map(|s| s.iter().map(|b| b || rng.gen_bool(0.5)).collect())
            .collect();
        let a = enumerate_censored(&hashes, &small, 8).unwrap();
        let b = enumerate_censored(&hashes, &big, 8).unwrap();
        assert!(a.is_subset(&b));
    }

    #[test]
    fn collision_experiment_edges() {
        let mut rng = seeded(4);
        let all = collision_lemma_experiment(4, 16, None, 5, &mut rng).unwrap();
        assert_eq!(all.rate, 1.0);
        let wide = collision_lemma_experiment(8, 4, Some(8), 20, &mut rng).unwrap();
        assert_eq!(wide.rate, 1.0);
        assert!(collision_lemma_experiment(21, 4, None, 1, &mut rng).is_err());
    }

    #[test]
    fn cfo_shape_is_fixed_and_matches_direct_evaluation() {
        let sp = space(5);
        let mut rng = seeded(5);
        let specs = [
            CensoredSpec::full([3].into(), 3, 5, true),
            CensoredSpec::from_sample_hashes(&sp.public, [1, 2, 9, 30].into(), 3, false),
            CensoredSpec {
                branch: Some(Branch { i: 4, h: 5, j: 17 }),
                ..CensoredSpec::from_sample_hashes(&sp.public, [4, 8].into(), 3, true)
            },
        ];
        let arts: Vec<CfoArtifact> = specs.iter().map(|s| cfo_stub(&sp.public, s).unwrap()).collect();
        assert!(arts.iter().all(|a| a.bytes.len() == arts[0].bytes.len()));
        for _ in 0..40 {
            let (point, _) = sp.sample(&mut rng);
            for (spec, art) in specs.iter().zip(&arts) {
                let (value, steps) = art.evaluate(&point).unwrap();
                assert_eq!(value, censored_membership(&sp.public, &point, spec));
                assert_eq!(steps, cfo_step_budget(5, 3));
            }
        }
        assert!(cfo_stub(&sp.public, &CensoredSpec::full(BTreeSet::new(), 3, 5, true)).is_err());
    }

    #[test]
    fn learner_fits_samples_either_way() {
        let sp = space(6);
        let mut rng = seeded(6);
        for _ in 0..6 {
            let samples: Vec<(BitString, bool)> = (0..4).map(|_| (sp.sample(&mut rng).0, true)).collect();
            let model = strong_learn(&sp.public, &samples, &mut rng).unwrap();
            for (point, y) in &samples {
                assert_eq!(model.evaluate(point).unwrap(), Some(*y));
            }
        }
        let many: Vec<(BitString, bool)> = (0..20).map(|_| (sp.sample(&mut rng).0, true)).collect();
        assert_eq!(strong_learn(&sp.public, &many, &mut rng).unwrap(), StrongModel::ConstantOne);
    }
}
