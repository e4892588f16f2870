//! Threshold Paillier cryptosystem with (2,2) split decryption.
//!
//! Keys are generated from safe primes `p = 2p'+1`, `q = 2q'+1`. The private
//! exponent `λ = lcm(p-1, q-1)` is split into shares `λ₁ + λ₂ ≡ 0 (mod λ)`
//! and `λ₁ + λ₂ ≡ 1 (mod N)` so that decryption needs both servers: each
//! raises the ciphertext to its own share and the two partial results
//! multiply back to the plaintext. Ciphertexts carry a cleartext fixed-point
//! scale tag; scales are public protocol parameters, not data.
//!
//! Wire encodings are versioned and bit-exact: every integer is written as a
//! 4-byte big-endian length followed by its minimal big-endian magnitude.

use rand::RngCore;
use rug::ops::RemRounding;
use rug::{integer::Order, Integer};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedCode;
use crate::rng::{uniform_below, uniform_in};

/// Version byte prefixed to every serialized key and ciphertext.
pub const WIRE_VERSION: u8 = 1;

const MILLER_RABIN_ROUNDS: u32 = 64;

/// Public key `(g, N)` with `g = N + 1` held implicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub n: Integer,
    n_squared: Integer,
}

impl PublicKey {
    pub fn new(n: Integer) -> Self {
        let n_squared = n.clone().square();
        Self { n, n_squared }
    }

    pub fn n_squared(&self) -> &Integer {
        &self.n_squared
    }

    /// Half of the plaintext ring; values above it decode as negative.
    pub fn half_n(&self) -> Integer {
        Integer::from(&self.n / 2u32)
    }
}

/// Full private key `(λ, μ)` with `μ = λ⁻¹ mod N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub lambda: Integer,
    pub mu: Integer,
    pub n: Integer,
}

/// One share of the split private key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialKey {
    /// 1 for the first server, 2 for the second.
    pub index: u8,
    pub share: Integer,
    pub n: Integer,
}

/// A Paillier ciphertext in `Z_{N²}` with its fixed-point scale tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub value: Integer,
    pub scale: u32,
}

/// Result of applying one key share to a ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialDecryption {
    pub value: Integer,
    pub scale: u32,
}

/// Generates a fresh key set: `p, q` are distinct safe primes of `kappa`
/// bits. Retries internally until the primes are found, consuming the rng
/// deterministically.
pub fn keygen(
    kappa: u32,
    rng: &mut impl RngCore,
) -> (PublicKey, SecretKey, PartialKey, PartialKey) {
    assert!(kappa >= 8, "kappa below the smallest test profile");
    let p = gen_safe_prime(kappa, rng);
    let q = loop {
        let q = gen_safe_prime(kappa, rng);
        if q != p {
            break q;
        }
    };
    keygen_from_primes(&p, &q, rng)
}

/// Builds the key set from known safe primes. Used by [`keygen`] and by
/// fixtures that pin large keys.
pub fn keygen_from_primes(
    p: &Integer,
    q: &Integer,
    rng: &mut impl RngCore,
) -> (PublicKey, SecretKey, PartialKey, PartialKey) {
    let n = Integer::from(p * q);
    let p1 = Integer::from(p - 1u32);
    let q1 = Integer::from(q - 1u32);
    let lambda = p1.clone().lcm(&q1);
    let mu = lambda
        .clone()
        .invert(&n)
        .expect("lambda is coprime to N for distinct safe primes");

    // λ₁ uniform in (0, λN), λ₂ the complement of λμ modulo λN
    let lambda_n = Integer::from(&lambda * &n);
    let share1 = uniform_in(rng, &Integer::from(1), &Integer::from(&lambda_n - 1u32));
    let share2 = (Integer::from(&lambda * &mu) - &share1).rem_euc(lambda_n);

    let pk = PublicKey::new(n.clone());
    let sk = SecretKey { lambda, mu, n: n.clone() };
    let pk1 = PartialKey { index: 1, share: share1, n: n.clone() };
    let pk2 = PartialKey { index: 2, share: share2, n };
    (pk, sk, pk1, pk2)
}

/// Encrypts a fixed-point code: `(1 + mN) * r^N mod N²` with `r` uniform in
/// `Z_N^*`. The scale tag is carried over unencrypted.
pub fn enc(pk: &PublicKey, m: &FixedCode, rng: &mut impl RngCore) -> Ciphertext {
    debug_assert!(m.raw < pk.n);
    let r = loop {
        let candidate = uniform_in(rng, &Integer::from(1), &Integer::from(&pk.n - 1u32));
        if Integer::from(candidate.gcd_ref(&pk.n)) == 1 {
            break candidate;
        }
    };
    let gm = (Integer::from(1) + Integer::from(&m.raw * &pk.n)).rem_euc(pk.n_squared.clone());
    let rn = r.pow_mod(&pk.n, &pk.n_squared).expect("positive exponent");
    let value = (gm * rn).rem_euc(pk.n_squared.clone());
    Ciphertext { value, scale: m.scale }
}

/// Encrypts a signed integer at the given scale.
pub fn enc_integer(
    pk: &PublicKey,
    value: &Integer,
    scale: u32,
    rng: &mut impl RngCore,
) -> Ciphertext {
    let raw = value.clone().rem_euc(pk.n.clone());
    enc(pk, &FixedCode::new(raw, scale), rng)
}

fn l_function(x: &Integer, n: &Integer) -> Result<Integer> {
    let num = Integer::from(x - 1u32);
    let (quot, rem) = num.div_rem_euc(n.clone());
    if rem != 0 {
        return Err(Error::MalformedCiphertext("L(x) is not integral".into()));
    }
    Ok(quot)
}

/// Full decryption: `L(c^λ mod N²) * μ mod N`.
pub fn dec(sk: &SecretKey, ct: &Ciphertext) -> Result<FixedCode> {
    let n_squared = sk.n.clone().square();
    if ct.value >= n_squared || Integer::from(ct.value.gcd_ref(&sk.n)) != 1 {
        return Err(Error::MalformedCiphertext("value outside Z_{N²}^*".into()));
    }
    let powered = ct
        .value
        .clone()
        .pow_mod(&sk.lambda, &n_squared)
        .expect("positive exponent");
    let m = (l_function(&powered, &sk.n)? * &sk.mu).rem_euc(sk.n.clone());
    Ok(FixedCode::new(m, ct.scale))
}

/// Partial decryption with one key share: `c^{λᵢ} mod N²`.
pub fn pdec(partial: &PartialKey, ct: &Ciphertext) -> PartialDecryption {
    let n_squared = partial.n.clone().square();
    let value = ct
        .value
        .clone()
        .pow_mod(&partial.share, &n_squared)
        .expect("positive exponent");
    PartialDecryption { value, scale: ct.scale }
}

/// Combines both partial decryptions: `L(M₁ · M₂ mod N²)`.
pub fn tdec(pk: &PublicKey, m1: &PartialDecryption, m2: &PartialDecryption) -> Result<FixedCode> {
    if m1.scale != m2.scale {
        return Err(Error::ScaleMismatch { left: m1.scale, right: m2.scale });
    }
    let prod = (Integer::from(&m1.value * &m2.value)).rem_euc(pk.n_squared.clone());
    let m = l_function(&prod, &pk.n)?.rem_euc(pk.n.clone());
    Ok(FixedCode::new(m, m1.scale))
}

/// Additive homomorphism: the product of ciphertexts decrypts to the sum of
/// plaintexts. Scale tags must agree.
pub fn add(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch { left: a.scale, right: b.scale });
    }
    let value = (Integer::from(&a.value * &b.value)).rem_euc(pk.n_squared.clone());
    Ok(Ciphertext { value, scale: a.scale })
}

/// Scalar-multiplication homomorphism: `c^k` decrypts to `k·m mod N`. The
/// caller declares the scale carried by the scalar, which adds to the
/// ciphertext's own.
pub fn scalar_mul(pk: &PublicKey, a: &Ciphertext, k: &Integer, added_scale: u32) -> Ciphertext {
    let k_mod = k.clone().rem_euc(pk.n.clone());
    let value = a
        .value
        .clone()
        .pow_mod(&k_mod, &pk.n_squared)
        .expect("non-negative exponent");
    Ciphertext { value, scale: a.scale + added_scale }
}

/// Negation via the modular inverse: decrypts to `N - m`.
pub fn negate(pk: &PublicKey, a: &Ciphertext) -> Result<Ciphertext> {
    let value = a
        .value
        .clone()
        .invert(&pk.n_squared)
        .map_err(|_| Error::MalformedCiphertext("no inverse in Z_{N²}".into()))?;
    Ok(Ciphertext { value, scale: a.scale })
}

/// Homomorphic subtraction `a - b`.
pub fn sub(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    add(pk, a, &negate(pk, b)?)
}

// ---------------------------------------------------------------------------
// prime generation
// ---------------------------------------------------------------------------

const SMALL_PRIME_LIMIT: u32 = 2000;

fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = SMALL_PRIME_LIMIT as usize;
        let mut sieve = vec![true; limit];
        let mut out = Vec::new();
        for i in 2..limit {
            if sieve[i] {
                out.push(i as u32);
                let mut j = i * i;
                while j < limit {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        out
    })
}

fn divisible_by_small_prime(n: &Integer) -> bool {
    for &p in small_primes() {
        let p = Integer::from(p);
        if *n == p {
            return false;
        }
        if Integer::from(n % &p) == 0 {
            return true;
        }
    }
    false
}

/// Miller-Rabin with bases drawn from the caller's rng, so key generation is
/// a pure function of its seed.
fn miller_rabin(n: &Integer, rounds: u32, rng: &mut impl RngCore) -> bool {
    if *n < 4 {
        return *n == 2 || *n == 3;
    }
    if n.is_even() {
        return false;
    }
    let n_minus_1 = Integer::from(n - 1u32);
    let trailing = n_minus_1.find_one(0).unwrap_or(0);
    let odd_part = Integer::from(&n_minus_1 >> trailing);
    let two = Integer::from(2);
    let hi = Integer::from(n - 2u32);
    'outer: for _ in 0..rounds {
        let base = uniform_in(rng, &two, &hi);
        let mut x = base.pow_mod(&odd_part, n).expect("positive exponent");
        if x == 1 || x == n_minus_1 {
            continue;
        }
        for _ in 0..trailing.saturating_sub(1) {
            x = x.square().rem_euc(n.clone());
            if x == n_minus_1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Finds a safe prime `p = 2p' + 1` of exactly `bits` bits.
///
/// For `bits >= 16` the top two bits of `p'` are forced so the product of two
/// such primes always reaches the full `2·bits` length.
fn gen_safe_prime(bits: u32, rng: &mut impl RngCore) -> Integer {
    assert!(bits >= 8);
    let sub_bits = bits - 1;
    loop {
        let mut candidate = uniform_below(rng, &(Integer::from(1) << sub_bits));
        candidate.set_bit(sub_bits - 1, true);
        if bits >= 16 {
            candidate.set_bit(sub_bits - 2, true);
        }
        candidate.set_bit(0, true);
        let safe = Integer::from(&candidate << 1) + 1u32;
        if divisible_by_small_prime(&candidate) || divisible_by_small_prime(&safe) {
            continue;
        }
        if miller_rabin(&candidate, MILLER_RABIN_ROUNDS, rng)
            && miller_rabin(&safe, MILLER_RABIN_ROUNDS, rng)
        {
            return safe;
        }
    }
}

// ---------------------------------------------------------------------------
// wire encoding
// ---------------------------------------------------------------------------

/// Appends a non-negative integer as `u32 BE length || minimal BE magnitude`.
pub fn write_integer(buf: &mut Vec<u8>, value: &Integer) {
    debug_assert!(*value >= 0);
    let digits = value.to_digits::<u8>(Order::MsfBe);
    buf.extend_from_slice(&(digits.len() as u32).to_be_bytes());
    buf.extend_from_slice(&digits);
}

/// Reads an integer written by [`write_integer`], advancing the cursor.
pub fn read_integer(buf: &[u8], cursor: &mut usize) -> Result<Integer> {
    let start = *cursor;
    if buf.len() < start + 4 {
        return Err(Error::BadFrame("truncated integer length".into()));
    }
    let len = u32::from_be_bytes(buf[start..start + 4].try_into().unwrap()) as usize;
    let end = start + 4 + len;
    if buf.len() < end {
        return Err(Error::BadFrame("truncated integer body".into()));
    }
    let value = Integer::from_digits(&buf[start + 4..end], Order::MsfBe);
    *cursor = end;
    Ok(value)
}

fn check_version(buf: &[u8], cursor: &mut usize, what: &str) -> Result<()> {
    if buf.len() <= *cursor {
        return Err(Error::BadFrame(format!("empty {what}")));
    }
    if buf[*cursor] != WIRE_VERSION {
        return Err(Error::InvalidFile(format!(
            "{what} version {} unsupported",
            buf[*cursor]
        )));
    }
    *cursor += 1;
    Ok(())
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![WIRE_VERSION];
        buf.extend_from_slice(&self.scale.to_be_bytes());
        write_integer(&mut buf, &self.value);
        buf
    }

    pub fn read(buf: &[u8], cursor: &mut usize) -> Result<Self> {
        check_version(buf, cursor, "ciphertext")?;
        if buf.len() < *cursor + 4 {
            return Err(Error::BadFrame("truncated scale tag".into()));
        }
        let scale = u32::from_be_bytes(buf[*cursor..*cursor + 4].try_into().unwrap());
        *cursor += 4;
        let value = read_integer(buf, cursor)?;
        Ok(Self { value, scale })
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cursor = 0;
        let ct = Self::read(buf, &mut cursor)?;
        if cursor != buf.len() {
            return Err(Error::BadFrame("trailing bytes after ciphertext".into()));
        }
        Ok(ct)
    }
}

/// Appends a signed integer as `sign byte || u32 BE length || magnitude`.
pub fn write_signed_integer(buf: &mut Vec<u8>, value: &Integer) {
    buf.push(if *value < 0 { 1 } else { 0 });
    write_integer(buf, &value.clone().abs());
}

/// Reads an integer written by [`write_signed_integer`].
pub fn read_signed_integer(buf: &[u8], cursor: &mut usize) -> Result<Integer> {
    if buf.len() <= *cursor {
        return Err(Error::BadFrame("missing sign byte".into()));
    }
    let negative = buf[*cursor] == 1;
    *cursor += 1;
    let magnitude = read_integer(buf, cursor)?;
    Ok(if negative { -magnitude } else { magnitude })
}

impl PartialDecryption {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![WIRE_VERSION];
        buf.extend_from_slice(&self.scale.to_be_bytes());
        write_integer(&mut buf, &self.value);
        buf
    }

    pub fn read(buf: &[u8], cursor: &mut usize) -> Result<Self> {
        check_version(buf, cursor, "partial decryption")?;
        if buf.len() < *cursor + 4 {
            return Err(Error::BadFrame("truncated scale tag".into()));
        }
        let scale = u32::from_be_bytes(buf[*cursor..*cursor + 4].try_into().unwrap());
        *cursor += 4;
        let value = read_integer(buf, cursor)?;
        Ok(Self { value, scale })
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![WIRE_VERSION];
        write_integer(&mut buf, &self.n);
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cursor = 0;
        check_version(buf, &mut cursor, "public key")?;
        Ok(Self::new(read_integer(buf, &mut cursor)?))
    }

    /// FNV-1a 64 over the wire encoding; identifies a key in file headers.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![WIRE_VERSION];
        write_integer(&mut buf, &self.lambda);
        write_integer(&mut buf, &self.mu);
        write_integer(&mut buf, &self.n);
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cursor = 0;
        check_version(buf, &mut cursor, "secret key")?;
        let lambda = read_integer(buf, &mut cursor)?;
        let mu = read_integer(buf, &mut cursor)?;
        let n = read_integer(buf, &mut cursor)?;
        Ok(Self { lambda, mu, n })
    }
}

impl PartialKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![WIRE_VERSION, self.index];
        write_integer(&mut buf, &self.share);
        write_integer(&mut buf, &self.n);
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cursor = 0;
        check_version(buf, &mut cursor, "partial key")?;
        if buf.len() <= cursor {
            return Err(Error::BadFrame("missing share index".into()));
        }
        let index = buf[cursor];
        cursor += 1;
        if index != 1 && index != 2 {
            return Err(Error::InvalidFile(format!("bad share index {index}")));
        }
        let share = read_integer(buf, &mut cursor)?;
        let n = read_integer(buf, &mut cursor)?;
        Ok(Self { index, share, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::{decode, encode};
    use crate::rng::stream;
    use rug::Rational;

    #[test]
    fn keygen_produces_safe_primes_and_split_identities() {
        let mut rng = stream(1);
        let (pk, sk, pk1, pk2) = keygen(32, &mut rng);
        assert_eq!(pk.n.significant_bits(), 64);
        assert!(pk.n.is_odd());
        // λ₁ + λ₂ ≡ 0 (mod λ) and ≡ 1 (mod N)
        let sum = Integer::from(&pk1.share + &pk2.share);
        assert_eq!(Integer::from(&sum % &sk.lambda), 0);
        assert_eq!(sum.rem_euc(pk.n.clone()), 1);
    }

    #[test]
    fn safe_primes_pass_independent_primality_check() {
        let mut rng = stream(5);
        for kappa in [32u32, 64] {
            let (pk, sk, _, _) = keygen(kappa, &mut rng);
            // recover p, q from N and λ = lcm(p-1, q-1) = 2p'q'
            // (p-1)(q-1) = N - (p+q) + 1 and λ = (p-1)(q-1)/2
            let phi = Integer::from(&sk.lambda * 2u32);
            let p_plus_q = Integer::from(&pk.n + 1u32) - &phi;
            let disc = Integer::from(&p_plus_q * &p_plus_q) - Integer::from(&pk.n * 4u32);
            let sqrt = disc.sqrt();
            let p = (Integer::from(&p_plus_q + &sqrt)) / 2u32;
            let q = (p_plus_q - &p).clone();
            assert_eq!(Integer::from(&p * &q), pk.n);
            for prime in [&p, &q] {
                assert_ne!(prime.is_probably_prime(40), rug::integer::IsPrime::No);
                let half = Integer::from(prime - 1u32) / 2u32;
                assert_ne!(half.is_probably_prime(40), rug::integer::IsPrime::No);
            }
        }
    }

    #[test]
    fn roundtrip_simple() {
        let mut rng = stream(2);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let m = FixedCode::new(Integer::from(42), 0);
        let ct = enc(&pk, &m, &mut rng);
        assert_eq!(dec(&sk, &ct).unwrap().raw, 42);
    }

    #[test]
    fn threshold_matches_full_decryption() {
        let mut rng = stream(3);
        let (pk, sk, pk1, pk2) = keygen(64, &mut rng);
        for _ in 0..100 {
            let m = uniform_below(&mut rng, &pk.n);
            let ct = enc(&pk, &FixedCode::new(m.clone(), 7), &mut rng);
            let full = dec(&sk, &ct).unwrap();
            let joined = tdec(&pk, &pdec(&pk1, &ct), &pdec(&pk2, &ct)).unwrap();
            assert_eq!(full.raw, m);
            assert_eq!(joined.raw, m);
            assert_eq!(joined.scale, 7);
        }
    }

    #[test]
    fn encryption_is_probabilistic() {
        let mut rng = stream(4);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let m = FixedCode::new(Integer::from(7), 0);
        let a = enc(&pk, &m, &mut rng);
        let b = enc(&pk, &m, &mut rng);
        assert_ne!(a.value, b.value);
        assert_eq!(dec(&sk, &a).unwrap(), dec(&sk, &b).unwrap());
    }

    #[test]
    fn negative_values_roundtrip_through_signed_decode() {
        let mut rng = stream(6);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let m = FixedCode::new(Integer::from(&pk.n - 5u32), 0);
        let ct = enc(&pk, &m, &mut rng);
        let out = dec(&sk, &ct).unwrap();
        assert_eq!(out.raw, Integer::from(&pk.n - 5u32));
        assert_eq!(decode(&out, &pk.n), Rational::from(-5));
    }

    #[test]
    fn additive_homomorphism() {
        let mut rng = stream(7);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let three = enc(&pk, &FixedCode::new(Integer::from(3), 0), &mut rng);
        let four = enc(&pk, &FixedCode::new(Integer::from(4), 0), &mut rng);
        let zero = enc(&pk, &FixedCode::new(Integer::from(0), 0), &mut rng);
        assert_eq!(dec(&sk, &add(&pk, &three, &four).unwrap()).unwrap().raw, 7);
        assert_eq!(dec(&sk, &add(&pk, &three, &zero).unwrap()).unwrap().raw, 3);
    }

    #[test]
    fn subtraction_via_complement() {
        let mut rng = stream(8);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let a = enc(&pk, &FixedCode::new(Integer::from(10), 0), &mut rng);
        let b = enc(&pk, &FixedCode::new(Integer::from(4), 0), &mut rng);
        let diff = sub(&pk, &a, &b).unwrap();
        assert_eq!(dec(&sk, &diff).unwrap().raw, 6);
        // and the negative direction wraps into the upper half
        let diff = sub(&pk, &b, &a).unwrap();
        assert_eq!(decode(&dec(&sk, &diff).unwrap(), &pk.n), Rational::from(-6));
    }

    #[test]
    fn scalar_homomorphism_exhaustive_over_small_ring() {
        let mut rng = stream(9);
        let (pk, sk, _, _) = keygen(8, &mut rng);
        let n = pk.n.to_u32().unwrap();
        for m in (0..n).step_by(7) {
            let ct = enc(&pk, &FixedCode::new(Integer::from(m), 0), &mut rng);
            for c in [0u32, 1, 2, 3, 251] {
                let scaled = scalar_mul(&pk, &ct, &Integer::from(c), 0);
                let expect = (m as u64 * c as u64) % n as u64;
                assert_eq!(dec(&sk, &scaled).unwrap().raw, expect);
            }
        }
    }

    #[test]
    fn single_share_does_not_decrypt() {
        let mut rng = stream(10);
        let (pk, _, pk1, pk2) = keygen(64, &mut rng);
        for share in [&pk1, &pk2] {
            let mut hits = 0;
            for _ in 0..50 {
                let m = uniform_below(&mut rng, &pk.n);
                let ct = enc(&pk, &FixedCode::new(m.clone(), 0), &mut rng);
                let part = pdec(share, &ct);
                // applying L to a single partial must not recover m
                if let Ok(l) = super::l_function(
                    &part.value.clone().rem_euc(pk.n_squared().clone()),
                    &pk.n,
                ) {
                    if l.rem_euc(pk.n.clone()) == m {
                        hits += 1;
                    }
                }
            }
            assert_eq!(hits, 0);
        }
    }

    #[test]
    fn scale_mismatch_rejected() {
        let mut rng = stream(11);
        let (pk, _, _, _) = keygen(32, &mut rng);
        let a = enc(&pk, &FixedCode::new(Integer::from(1), 3), &mut rng);
        let b = enc(&pk, &FixedCode::new(Integer::from(1), 4), &mut rng);
        assert!(matches!(add(&pk, &a, &b), Err(Error::ScaleMismatch { .. })));
    }

    #[test]
    fn malformed_ciphertext_rejected() {
        let mut rng = stream(12);
        let (pk, sk, _, _) = keygen(32, &mut rng);
        let bogus = Ciphertext { value: pk.n.clone(), scale: 0 };
        assert!(dec(&sk, &bogus).is_err());
    }

    #[test]
    fn scalar_scale_bookkeeping_matches_rational_oracle() {
        let mut rng = stream(13);
        let (pk, sk, _, _) = keygen(64, &mut rng);
        let value = encode(&Rational::from((3, 2)), 10, &pk.n).unwrap();
        let ct = enc(&pk, &value, &mut rng);
        // multiply by 5 carried at scale 4, i.e. the scalar 5·2⁴
        let scaled = scalar_mul(&pk, &ct, &Integer::from(5u32 << 4), 4);
        let out = dec(&sk, &scaled).unwrap();
        assert_eq!(out.scale, 14);
        assert_eq!(decode(&out, &pk.n), Rational::from((15, 2)));
    }

    #[test]
    fn wire_roundtrips() {
        let mut rng = stream(14);
        let (pk, sk, pk1, _) = keygen(32, &mut rng);
        let ct = enc(&pk, &FixedCode::new(Integer::from(99), 5), &mut rng);
        assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        assert_eq!(PublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(SecretKey::from_bytes(&sk.to_bytes()).unwrap(), sk);
        assert_eq!(PartialKey::from_bytes(&pk1.to_bytes()).unwrap(), pk1);
        assert!(Ciphertext::from_bytes(&[9, 0, 0]).is_err());
    }

    #[test]
    fn keygen_is_deterministic_per_seed() {
        let (pk_a, _, s1_a, _) = keygen(32, &mut stream(77));
        let (pk_b, _, s1_b, _) = keygen(32, &mut stream(77));
        assert_eq!(pk_a, pk_b);
        assert_eq!(s1_a, s1_b);
    }

    #[test]
    fn wire_format_is_bit_exact() {
        // golden bytes: version tag, scale, then length-prefixed minimal
        // big-endian magnitude
        let ct = Ciphertext { value: Integer::from(0x0102u32), scale: 3 };
        assert_eq!(ct.to_bytes(), vec![1, 0, 0, 0, 3, 0, 0, 0, 2, 1, 2]);
        let pk = PublicKey::new(Integer::from(35u32));
        assert_eq!(pk.to_bytes(), vec![1, 0, 0, 0, 1, 35]);
        let zero = Ciphertext { value: Integer::new(), scale: 0 };
        assert_eq!(zero.to_bytes(), vec![1, 0, 0, 0, 0, 0, 0, 0, 0]);
        let mut buf = Vec::new();
        write_signed_integer(&mut buf, &Integer::from(-5));
        assert_eq!(buf, vec![1, 0, 0, 0, 1, 5]);
    }
}
