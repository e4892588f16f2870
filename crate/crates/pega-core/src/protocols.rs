//! Secure two-party building blocks between the twin servers.
//!
//! S1 drives every protocol and holds the ciphertexts; S2 answers with its
//! key share. The four primitives and their frame exchanges:
//!
//! * `sec_cmp` — `CMP_BLIND(⟦Δ⟧, [Δ]₁) → CMP_RESULT(u)`. S1 blinds the
//!   difference of the operands multiplicatively and additively, S2 threshold
//!   decrypts the blind and answers the half-test bit. S1 learns one bit:
//!   whether the first operand is below the second.
//! * `sec_div` — `DIV_REQ(⟦y⟧, [y]₁) → DIV_SCALAR(𝚢)`. S2 decrypts the
//!   divisor and returns its fixed-point reciprocal; S1 finishes with one
//!   scalar multiplication. The protocol reveals the divisor to S2.
//! * `sec_pro` — `PRO_SUM(⟦Σv⟧, [Σv]₁) → PRO_SCALAR(𝙳)`. Selection
//!   probabilities from route costs: costs are flipped into fitness values
//!   `v_i = sum - cost_i` so lower cost means more probability mass, then
//!   normalized by the decrypted fitness sum, which S2 learns in the clear.
//! * `sec_fps` — `FPS_THRESHOLDS(count) → FPS_THRESHOLDS(⟦r·2^{2ℓ}⟧…)` plus
//!   comparison exchanges. Roulette-wheel selection over encrypted prefix
//!   sums by binary search against S2-supplied thresholds.
//!
//! `sec_argmin` and `sec_tournament` are local compositions of `sec_cmp`.
//!
//! Comparison blinding uses corrected sampling bounds: with a public bound
//! `Dmax ≥ |x-y|`, S1 draws `r1 ∈ [1, min(2^σ, (N/2-1)/(Dmax+1))]` and
//! `r2 ∈ (N/2 - r1, N/2]`, which keeps the decrypted blind inside `(0, N)`
//! with `Δ > N/2` exactly when the compared difference is non-negative, for
//! both values of the coin. The effective blinding width is recorded on the
//! driver whenever the modulus cannot absorb the full σ.

use std::sync::{Arc, Mutex};

use rand::Rng;
use rug::{Integer, Rational};

use crate::channel::{Channel, Frame, FrameType};
use crate::error::{Error, Result};
use crate::fixedpoint::{reciprocal_code, signed_raw};
use crate::rng::{sample_distinct, uniform_in, uniform_unit_scaled, Stream};
use crate::thpc::{
    add, enc_integer, pdec, read_signed_integer, scalar_mul, sub, tdec, write_signed_integer,
    Ciphertext, PartialDecryption, PartialKey, PublicKey,
};

/// Default blinding width in bits, capped per call by the modulus headroom.
pub const DEFAULT_SIGMA: u32 = 128;

/// Shared protocol parameters. `scale` is the fixed-point exponent ℓ used by
/// reciprocals and selection thresholds.
#[derive(Debug, Clone, Copy)]
pub struct SessionParams {
    pub scale: u32,
    pub sigma: u32,
}

impl SessionParams {
    pub fn new(scale: u32) -> Self {
        Self { scale, sigma: DEFAULT_SIGMA }
    }
}

/// Blinding material of one comparison, kept for instrumentation.
#[derive(Debug, Clone)]
pub struct CmpSession {
    pub coin: bool,
    pub r1: Integer,
    pub r2: Integer,
    pub effective_sigma: u32,
}

/// S1 side of a protocol session: drives the channel, holds share one.
pub struct Driver {
    pub pk: PublicKey,
    partial: PartialKey,
    pub channel: Channel,
    pub params: SessionParams,
    blind_rng: Stream,
    /// Test hook: pins the comparison coin instead of tossing it.
    pub force_coin: Option<bool>,
    /// Number of `sec_cmp` exchanges performed so far.
    pub cmp_calls: u64,
    /// Blinding material of the most recent comparison.
    pub last_cmp: Option<CmpSession>,
    /// Smallest blinding width used in this session, if any comparison had
    /// to shrink below `params.sigma`.
    pub min_effective_sigma: Option<u32>,
}

impl Driver {
    pub fn new(
        pk: PublicKey,
        partial: PartialKey,
        channel: Channel,
        params: SessionParams,
        blind_rng: Stream,
    ) -> Self {
        assert_eq!(partial.index, 1, "driver holds the first key share");
        Self {
            pk,
            partial,
            channel,
            params,
            blind_rng,
            force_coin: None,
            cmp_calls: 0,
            last_cmp: None,
            min_effective_sigma: None,
        }
    }

    /// Compares two encrypted values: returns `true` iff `x < y` (the bit 1);
    /// `x >= y` yields `false` (the bit 0). `dmax` is a public bound on
    /// `|x - y|` in raw units.
    pub fn sec_cmp(&mut self, x: &Ciphertext, y: &Ciphertext, dmax: &Integer) -> Result<bool> {
        if x.scale != y.scale {
            return Err(Error::ScaleMismatch { left: x.scale, right: y.scale });
        }
        let coin = self.force_coin.unwrap_or_else(|| self.blind_rng.gen::<bool>());
        let half = self.pk.half_n();
        let r1_cap = Integer::from(&half - 1u32) / Integer::from(dmax + 1u32);
        if r1_cap < 1 {
            return Err(Error::ModulusTooSmall { needed_bits: dmax.significant_bits() + 2 });
        }
        let sigma_cap = Integer::from(1) << self.params.sigma;
        let r1_max = r1_cap.min(sigma_cap);
        let effective_sigma = r1_max.significant_bits();
        if effective_sigma < self.params.sigma {
            self.min_effective_sigma = Some(
                self.min_effective_sigma
                    .map_or(effective_sigma, |cur| cur.min(effective_sigma)),
            );
        }
        let one = Integer::from(1);
        let r1 = uniform_in(&mut self.blind_rng, &one, &r1_max);
        let r2_lo = Integer::from(&half - &r1) + 1u32;
        let r2 = uniform_in(&mut self.blind_rng, &r2_lo, &half);

        // π=0: Δ = r1(x-y+1)+r2; π=1: Δ = r1(y-x)+r2
        let diff = if coin { sub(&self.pk, y, x)? } else { sub(&self.pk, x, y)? };
        let blinded = scalar_mul(&self.pk, &diff, &r1, 0);
        let addend = if coin { r2.clone() } else { Integer::from(&r1 + &r2) };
        let enc_addend = enc_integer(&self.pk, &addend, x.scale, &mut self.blind_rng);
        let delta = add(&self.pk, &blinded, &enc_addend)?;
        let part = pdec(&self.partial, &delta);

        let mut payload = delta.to_bytes();
        payload.extend_from_slice(&part.to_bytes());
        self.channel.send(&Frame::new(FrameType::CmpBlind, payload))?;
        let reply = self.expect(FrameType::CmpResult)?;
        if reply.len() != 1 || reply[0] > 1 {
            return Err(Error::BadFrame("comparison result must be one bit".into()));
        }
        let u = reply[0] == 1;

        self.cmp_calls += 1;
        self.last_cmp = Some(CmpSession { coin, r1, r2, effective_sigma });
        Ok(coin ^ u)
    }

    /// Encrypted division: S1 ends with `⟦x · round(2^ℓ / y)⟧`, i.e. `x/y` at
    /// `scale(x) + ℓ`. S2 learns `y` in the clear.
    pub fn sec_div(&mut self, x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext> {
        if x.scale != y.scale {
            return Err(Error::ScaleMismatch { left: x.scale, right: y.scale });
        }
        let part = pdec(&self.partial, y);
        let mut payload = y.to_bytes();
        payload.extend_from_slice(&part.to_bytes());
        self.channel.send(&Frame::new(FrameType::DivReq, payload))?;
        let reply = self.expect(FrameType::DivScalar)?;
        let reciprocal = decode_scalar_reply(&reply)?;
        Ok(scalar_mul(&self.pk, x, &reciprocal, self.params.scale))
    }

    /// Selection probabilities from encrypted route costs. Returns
    /// `(probabilities at scale 2ℓ, fitness values at the cost scale)`:
    /// fitness is `sum - cost_i` and probability `i` decrypts to
    /// `v_i · round(2^{2ℓ} / Σv)`, i.e. roughly `(v_i / Σv) · 2^{2ℓ}`.
    pub fn sec_pro(&mut self, costs: &[Ciphertext]) -> Result<(Vec<Ciphertext>, Vec<Ciphertext>)> {
        assert!(!costs.is_empty(), "sec_pro over an empty population");
        let mut sum = costs[0].clone();
        for cost in &costs[1..] {
            sum = add(&self.pk, &sum, cost)?;
        }
        let fitness: Vec<Ciphertext> = costs
            .iter()
            .map(|cost| sub(&self.pk, &sum, cost))
            .collect::<Result<_>>()?;
        let mut fitness_sum = fitness[0].clone();
        for v in &fitness[1..] {
            fitness_sum = add(&self.pk, &fitness_sum, v)?;
        }
        let part = pdec(&self.partial, &fitness_sum);
        let mut payload = fitness_sum.to_bytes();
        payload.extend_from_slice(&part.to_bytes());
        self.channel.send(&Frame::new(FrameType::ProSum, payload))?;
        let reply = self.expect(FrameType::ProScalar)?;
        let norm = decode_scalar_reply(&reply)?;
        let probabilities = fitness
            .iter()
            .map(|v| scalar_mul(&self.pk, v, &norm, self.params.scale))
            .collect();
        Ok((probabilities, fitness))
    }

    /// Fitness-proportionate selection: draws `draws` indices (1-based) from
    /// the encrypted probabilities. For each S2-supplied threshold `r` the
    /// selected index is the smallest `i` with `r ≤ P_i` over the encrypted
    /// prefix sums, clamped to `n` when the quantized mass falls short of the
    /// threshold. Each draw costs at most ⌈log₂ n⌉ comparisons.
    pub fn sec_fps(
        &mut self,
        probabilities: &[Ciphertext],
        draws: usize,
        dmax: &Integer,
    ) -> Result<Vec<usize>> {
        let n = probabilities.len();
        assert!(n >= 1, "sec_fps over an empty population");
        let mut prefix = Vec::with_capacity(n);
        prefix.push(probabilities[0].clone());
        for p in &probabilities[1..] {
            let next = add(&self.pk, prefix.last().unwrap(), p)?;
            prefix.push(next);
        }
        self.channel.send(&Frame::new(
            FrameType::FpsThresholds,
            (draws as u32).to_be_bytes().to_vec(),
        ))?;
        let reply = self.expect(FrameType::FpsThresholds)?;
        let thresholds = decode_threshold_reply(&reply, draws, 2 * self.params.scale)?;

        let mut selected = Vec::with_capacity(draws);
        for threshold in &thresholds {
            let mut lo = 1usize;
            let mut hi = n;
            while lo < hi {
                let mid = (lo + hi) / 2;
                if self.sec_cmp(&prefix[mid - 1], threshold, dmax)? {
                    lo = mid + 1; // P_mid < r: the mass up to mid is spoken for
                } else {
                    hi = mid;
                }
            }
            selected.push(lo);
        }
        Ok(selected)
    }

    /// Index (1-based) of the minimum by a running scan of `n-1` comparisons;
    /// ties keep the earlier index.
    pub fn sec_argmin(&mut self, values: &[Ciphertext], dmax: &Integer) -> Result<usize> {
        assert!(!values.is_empty(), "sec_argmin over an empty list");
        let mut best = 0usize;
        for i in 1..values.len() {
            if self.sec_cmp(&values[i], &values[best], dmax)? {
                best = i;
            }
        }
        Ok(best + 1)
    }

    /// k-tournament selection: for each slot, `k` distinct indices from the
    /// caller's selection stream, winner decided by comparisons; ties go to
    /// the lower index.
    pub fn sec_tournament(
        &mut self,
        values: &[Ciphertext],
        k: usize,
        slots: usize,
        selection_rng: &mut Stream,
        dmax: &Integer,
    ) -> Result<Vec<usize>> {
        assert!(k >= 2, "tournament size below two");
        let n = values.len();
        let mut out = Vec::with_capacity(slots);
        for _ in 0..slots {
            let mut entrants = sample_distinct(selection_rng, n, k.min(n));
            // scan order = index order, so first-wins ties pick the lower index
            entrants.sort_unstable();
            let mut best = entrants[0];
            for &idx in &entrants[1..] {
                if self.sec_cmp(&values[idx - 1], &values[best - 1], dmax)? {
                    best = idx;
                }
            }
            out.push(best);
        }
        Ok(out)
    }

    fn expect(&mut self, ty: FrameType) -> Result<Vec<u8>> {
        let frame = self.channel.recv()?;
        if frame.ty != ty {
            return Err(Error::BadFrame(format!("expected {ty:?}, got {:?}", frame.ty)));
        }
        Ok(frame.payload)
    }
}

const STATUS_OK: u8 = 0;
const STATUS_DIVISION_BY_ZERO: u8 = 1;
const STATUS_DEGENERATE: u8 = 2;

fn decode_scalar_reply(payload: &[u8]) -> Result<Integer> {
    if payload.is_empty() {
        return Err(Error::BadFrame("empty scalar reply".into()));
    }
    match payload[0] {
        STATUS_OK => {
            let mut cursor = 1;
            read_signed_integer(payload, &mut cursor)
        }
        STATUS_DIVISION_BY_ZERO => Err(Error::DivisionByZero),
        STATUS_DEGENERATE => Err(Error::DegeneratePopulation),
        other => Err(Error::BadFrame(format!("unknown status {other}"))),
    }
}

fn decode_threshold_reply(payload: &[u8], expected: usize, scale: u32) -> Result<Vec<Ciphertext>> {
    if payload.len() < 4 {
        return Err(Error::BadFrame("truncated threshold count".into()));
    }
    let count = u32::from_be_bytes(payload[..4].try_into().unwrap()) as usize;
    let mut cursor = 4;
    if count != expected {
        return Err(Error::BadFrame(format!(
            "asked for {expected} thresholds, got {count}"
        )));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let ct = Ciphertext::read(payload, &mut cursor)?;
        if ct.scale != scale {
            return Err(Error::BadFrame(format!(
                "threshold at scale {}, expected {scale}",
                ct.scale
            )));
        }
        out.push(ct);
    }
    Ok(out)
}

/// S2 side: holds share two and answers until the peer hangs up.
pub struct Responder {
    pub pk: PublicKey,
    partial: PartialKey,
    pub params: SessionParams,
    /// Stream for selection thresholds; seeded with the run's selection seed
    /// so the plaintext engine can mirror the draws.
    threshold_rng: Stream,
    /// Stream for S2's own encryption randomness, independent of thresholds.
    crypto_rng: Stream,
    /// Test hook: records every decrypted comparison blind.
    pub delta_probe: Option<Arc<Mutex<Vec<Integer>>>>,
}

impl Responder {
    pub fn new(
        pk: PublicKey,
        partial: PartialKey,
        params: SessionParams,
        threshold_rng: Stream,
        crypto_rng: Stream,
    ) -> Self {
        assert_eq!(partial.index, 2, "responder holds the second key share");
        Self { pk, partial, params, threshold_rng, crypto_rng, delta_probe: None }
    }

    /// Serves one session to completion. A closed channel is the normal end.
    pub fn serve(&mut self, channel: &mut Channel) -> Result<()> {
        loop {
            let frame = match channel.recv() {
                Ok(frame) => frame,
                Err(Error::ChannelClosed(_)) => return Ok(()),
                Err(e) => return Err(e),
            };
            match frame.ty {
                FrameType::CmpBlind => self.handle_cmp(channel, &frame.payload)?,
                FrameType::DivReq => self.handle_div(channel, &frame.payload)?,
                FrameType::ProSum => self.handle_pro(channel, &frame.payload)?,
                FrameType::FpsThresholds => self.handle_thresholds(channel, &frame.payload)?,
                other => {
                    return Err(Error::BadFrame(format!(
                        "unexpected frame {other:?} at responder"
                    )))
                }
            }
        }
    }

    fn join_decrypt(&self, payload: &[u8]) -> Result<(Integer, u32)> {
        let mut cursor = 0;
        let ct = Ciphertext::read(payload, &mut cursor)?;
        let part1 = PartialDecryption::read(payload, &mut cursor)?;
        if cursor != payload.len() {
            return Err(Error::BadFrame("trailing bytes in request".into()));
        }
        let part2 = pdec(&self.partial, &ct);
        let code = tdec(&self.pk, &part1, &part2)?;
        Ok((code.raw, code.scale))
    }

    fn handle_cmp(&mut self, channel: &mut Channel, payload: &[u8]) -> Result<()> {
        let (delta, _) = self.join_decrypt(payload)?;
        if let Some(probe) = &self.delta_probe {
            probe.lock().unwrap().push(delta.clone());
        }
        let u = if delta > self.pk.half_n() { 0u8 } else { 1u8 };
        channel.send(&Frame::new(FrameType::CmpResult, vec![u]))
    }

    fn handle_div(&mut self, channel: &mut Channel, payload: &[u8]) -> Result<()> {
        let (raw, scale) = self.join_decrypt(payload)?;
        let signed = signed_raw(&raw, &self.pk.n);
        let divisor = Rational::from((signed, Integer::from(1) << scale));
        let mut reply = Vec::new();
        match reciprocal_code(&divisor, self.params.scale) {
            Ok(reciprocal) => {
                reply.push(STATUS_OK);
                write_signed_integer(&mut reply, &reciprocal);
            }
            Err(Error::DivisionByZero) => reply.push(STATUS_DIVISION_BY_ZERO),
            Err(e) => return Err(e),
        }
        channel.send(&Frame::new(FrameType::DivScalar, reply))
    }

    fn handle_pro(&mut self, channel: &mut Channel, payload: &[u8]) -> Result<()> {
        let (raw, scale) = self.join_decrypt(payload)?;
        let mut reply = Vec::new();
        if raw == 0 {
            reply.push(STATUS_DEGENERATE);
        } else {
            // den = Σv / 2^ℓ; the normalizer is round((1/den) · 2^ℓ)
            let den = Rational::from((raw, Integer::from(1) << scale));
            let norm = reciprocal_code(&den, self.params.scale)?;
            reply.push(STATUS_OK);
            write_signed_integer(&mut reply, &norm);
        }
        channel.send(&Frame::new(FrameType::ProScalar, reply))
    }

    fn handle_thresholds(&mut self, channel: &mut Channel, payload: &[u8]) -> Result<()> {
        if payload.len() != 4 {
            return Err(Error::BadFrame("threshold request must be a count".into()));
        }
        let count = u32::from_be_bytes(payload.try_into().unwrap());
        let scale = 2 * self.params.scale;
        let mut reply = count.to_be_bytes().to_vec();
        for _ in 0..count {
            let threshold = uniform_unit_scaled(&mut self.threshold_rng, scale);
            let ct = enc_integer(&self.pk, &threshold, scale, &mut self.crypto_rng);
            reply.extend_from_slice(&ct.to_bytes());
        }
        channel.send(&Frame::new(FrameType::FpsThresholds, reply))
    }
}

/// Wires a driver and a responder over an in-process channel, runs the
/// responder on its own thread and hands the driver to the closure. Returns
/// the closure result together with the responder once the session ends.
pub fn with_session<T>(
    pk: &PublicKey,
    share1: &PartialKey,
    share2: &PartialKey,
    params: SessionParams,
    blind_seed: u64,
    threshold_seed: u64,
    f: impl FnOnce(&mut Driver) -> Result<T>,
) -> Result<(T, Responder)> {
    let (s1_chan, mut s2_chan) = crate::channel::in_process_pair();
    let mut responder = Responder::new(
        pk.clone(),
        share2.clone(),
        params,
        crate::rng::stream(threshold_seed),
        crate::rng::stream(threshold_seed ^ 0x9e37_79b9_7f4a_7c15),
    );
    let handle = std::thread::spawn(move || {
        let served = responder.serve(&mut s2_chan);
        (responder, served)
    });
    let mut driver = Driver::new(
        pk.clone(),
        share1.clone(),
        s1_chan,
        params,
        crate::rng::stream(blind_seed),
    );
    let out = f(&mut driver);
    drop(driver);
    let (responder, served) = handle.join().expect("responder thread panicked");
    served?;
    Ok((out?, responder))
}
