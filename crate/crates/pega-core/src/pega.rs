//! The encrypted evolutionary engine.
//!
//! Three roles. The **user** pseudonymizes and encrypts the instance, splits
//! the key, and comes back at the end to decrypt the result. **Server one**
//! stores the encrypted matrix, runs the whole loop over pseudonymous index
//! permutations, and drives the secure protocols for everything it cannot
//! compute homomorphically. **Server two** is the `protocols::Responder`.
//! S1 never holds the second key share or a plaintext cost; S2 never sees a
//! tour; the city map never leaves the user.
//!
//! With the same named seed streams, this engine is an exact mirror of
//! [`crate::ga::run_ga`]: identical populations, selected indices and
//! best-cost series, generation by generation. The selection stream feeds
//! S2's threshold generator on the fitness-proportionate path and S1's
//! entrant sampler on the tournament path, which is where that randomness
//! lives in each protocol.

use rug::Integer;

use crate::channel::{Channel, Transcript};
use crate::error::{Error, Result};
use crate::ga::{
    crossover_population, init_population, mutate_population, Chromosome, GaParams, RunStats,
    Selection,
};
use crate::protocols::{Driver, Responder, SessionParams};
use crate::rng::{stream, Stream};
use crate::thpc::{add, dec, keygen, Ciphertext, PartialKey, PublicKey, SecretKey};
use crate::tsp::{encrypt_tsp, pseudonymize, route_cost_enc, CityMap, CostMatrix, EncryptedTsp};

/// Key material, scales, and the named seeds that are not part of
/// [`GaParams`] (those four come with the params).
#[derive(Debug, Clone, Copy)]
pub struct SessionSetup {
    /// Modulus length ‖N‖ in bits; each safe prime gets half.
    pub key_bits: u32,
    /// Fixed-point exponent ℓ for cost encryption and the protocols.
    pub scale: u32,
    /// Blinding width cap for comparisons.
    pub sigma: u32,
    pub key_seed: u64,
    /// Drives pseudonymization and the per-entry encryption streams.
    pub perm_seed: u64,
    /// Drives S1's blinding and S2's own encryption randomness.
    pub protocol_seed: u64,
}

impl SessionSetup {
    pub fn new(key_bits: u32, scale: u32) -> Self {
        Self {
            key_bits,
            scale,
            sigma: crate::protocols::DEFAULT_SIGMA,
            key_seed: 1,
            perm_seed: 2,
            protocol_seed: 3,
        }
    }
}

const ENC_ROOT_TWEAK: u64 = 0x9e37_79b9_7f4a_7c15;
const S2_CRYPTO_TWEAK: u64 = 0x517c_c1b7_2722_0a95;

/// What the user keeps after submission.
pub struct UserRole {
    sk: SecretKey,
    city_map: CityMap,
    matrix: CostMatrix,
    scale: u32,
}

/// What the user ships out at submission: the public key, one share per
/// server, the encrypted instance, and the public shape of the objective
/// (city count and scale live on the container, the magnitude bound here).
pub struct SubmitBundle {
    pub pk: PublicKey,
    pub share1: PartialKey,
    pub share2: PartialKey,
    pub enc_tsp: EncryptedTsp,
    pub max_edge_cost: u64,
}

/// The user-side encryption pipeline: pseudonymize with the perm-seed
/// stream, then encrypt the relabeled matrix entrywise (per-entry streams
/// derived from the same seed).
pub fn encrypt_for_submission(
    pk: &PublicKey,
    matrix: &CostMatrix,
    scale: u32,
    perm_seed: u64,
) -> Result<(CityMap, EncryptedTsp)> {
    let mut perm_rng = stream(perm_seed);
    let (city_map, relabeled) = pseudonymize(matrix, &mut perm_rng);
    let enc_tsp = encrypt_tsp(pk, &relabeled, scale, perm_seed ^ ENC_ROOT_TWEAK)?;
    Ok((city_map, enc_tsp))
}

/// Pseudonymizes, encrypts and splits keys. The city map and secret key stay
/// in the returned [`UserRole`].
pub fn submit(matrix: &CostMatrix, setup: &SessionSetup) -> Result<(UserRole, SubmitBundle)> {
    if setup.key_bits < 32 || setup.key_bits % 2 != 0 {
        return Err(Error::InvalidParams(format!(
            "key bits {} must be an even number of at least 32",
            setup.key_bits
        )));
    }
    let (pk, sk, share1, share2) = keygen(setup.key_bits / 2, &mut stream(setup.key_seed));
    let (city_map, enc_tsp) = encrypt_for_submission(&pk, matrix, setup.scale, setup.perm_seed)?;
    // relabeling permutes entries, so the bound is label-independent
    let max_edge_cost = matrix.max_cost();
    Ok((
        UserRole { sk, city_map, matrix: matrix.clone(), scale: setup.scale },
        SubmitBundle { pk, share1, share2, enc_tsp, max_edge_cost },
    ))
}

/// Builds S2 for a session, applying the seed conventions: thresholds come
/// from the run's selection seed, encryption randomness from the protocol
/// seed.
pub fn make_responder(
    pk: PublicKey,
    share2: PartialKey,
    scale: u32,
    sigma: u32,
    selection_seed: u64,
    protocol_seed: u64,
) -> Responder {
    Responder::new(
        pk,
        share2,
        SessionParams { scale, sigma },
        stream(selection_seed),
        stream(protocol_seed ^ S2_CRYPTO_TWEAK),
    )
}

/// Everything S1 produces: ciphertext series for reporting, the pseudonymous
/// winner, and protocol accounting.
#[derive(Debug)]
pub struct EncryptedOutcome {
    /// Best-so-far route cost after each evaluation, encrypted.
    pub best_cost_series: Vec<Ciphertext>,
    /// Homomorphic sum of all route costs per evaluation, encrypted.
    pub cost_sum_series: Vec<Ciphertext>,
    /// Best tour over pseudonymous indices.
    pub best_tour: Vec<u32>,
    pub population_size: usize,
    /// Comparison exchanges per selection step, one entry per generation.
    pub selection_cmp_calls: Vec<u64>,
    pub total_cmp_calls: u64,
    pub transcript: Transcript,
    pub min_effective_sigma: Option<u32>,
}

/// Server one: encrypted matrix, first key share, the protocol driver, and
/// the GA streams it is allowed to hold.
pub struct ServerOne {
    driver: Driver,
    enc_tsp: EncryptedTsp,
    params: GaParams,
    /// Public bound on any |cost_i - cost_j| in raw units.
    cost_dmax: Integer,
    /// Public bound for prefix-sum versus threshold comparisons.
    fps_dmax: Integer,
    pop_rng: Stream,
    sel_rng: Stream,
    cross_rng: Stream,
    mut_rng: Stream,
}

impl ServerOne {
    pub fn new(
        bundle_pk: PublicKey,
        share1: PartialKey,
        enc_tsp: EncryptedTsp,
        max_edge_cost: u64,
        params: GaParams,
        channel: Channel,
        sigma: u32,
        protocol_seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let scale = enc_tsp.scale;
        if let Selection::Fps { scale: fps_scale } = params.selection {
            if fps_scale != scale {
                return Err(Error::InvalidParams(format!(
                    "FPS scale {fps_scale} must match the instance scale {scale}"
                )));
            }
        }
        let m = enc_tsp.m as u64;
        let n = params.n as u64;
        let half = bundle_pk.half_n();

        // route costs live in [0, m·C]; their differences too
        let cost_dmax = Integer::from(m * max_edge_cost) << scale;
        if cost_dmax.clone() >= half {
            return Err(Error::ModulusTooSmall {
                needed_bits: cost_dmax.significant_bits() + 1,
            });
        }
        // prefix sums stay below 2^{2ℓ} + Σv/2 with Σv ≤ n²·m·C·2^ℓ
        let fitness_sum_bound = Integer::from(n * n * m * max_edge_cost) << scale;
        let fps_dmax = (Integer::from(1) << (2 * scale)) + &fitness_sum_bound;
        if matches!(params.selection, Selection::Fps { .. }) && fps_dmax.clone() >= half {
            return Err(Error::ModulusTooSmall {
                needed_bits: fps_dmax.significant_bits() + 1,
            });
        }

        let driver = Driver::new(
            bundle_pk,
            share1,
            channel,
            SessionParams { scale, sigma },
            stream(protocol_seed),
        );
        let seeds = params.seeds;
        Ok(Self {
            driver,
            enc_tsp,
            params,
            cost_dmax,
            fps_dmax,
            pop_rng: stream(seeds.population),
            sel_rng: stream(seeds.selection),
            cross_rng: stream(seeds.crossover),
            mut_rng: stream(seeds.mutation),
        })
    }

    fn evaluate(&self, population: &[Chromosome]) -> Result<Vec<Ciphertext>> {
        population
            .iter()
            .map(|chrom| route_cost_enc(&self.driver.pk, &self.enc_tsp, chrom.tour()))
            .collect()
    }

    fn select(&mut self, costs: &[Ciphertext]) -> Result<Vec<usize>> {
        let n = self.params.n;
        match self.params.selection {
            Selection::Fps { .. } => {
                if costs.len() == 1 {
                    // mirror of the plaintext shortcut: nothing to draw
                    return Ok(vec![1; n]);
                }
                let (probabilities, _) = self.driver.sec_pro(costs)?;
                let dmax = self.fps_dmax.clone();
                self.driver.sec_fps(&probabilities, n, &dmax)
            }
            Selection::Tournament { k } => {
                let dmax = self.cost_dmax.clone();
                self.driver.sec_tournament(costs, k, n, &mut self.sel_rng, &dmax)
            }
        }
    }

    /// Runs the evolutionary loop to the generation budget.
    pub fn run(&mut self) -> Result<EncryptedOutcome> {
        let mut population = init_population(self.enc_tsp.m, self.params.n, &mut self.pop_rng);
        let mut costs = self.evaluate(&population)?;

        let cost_dmax = self.cost_dmax.clone();
        let best_idx = self.driver.sec_argmin(&costs, &cost_dmax)?;
        let mut best_ct = costs[best_idx - 1].clone();
        let mut best_tour = population[best_idx - 1].clone();

        let mut best_cost_series = vec![best_ct.clone()];
        let mut cost_sum_series = vec![sum_ciphertexts(&self.driver.pk, &costs)?];
        let mut selection_cmp_calls = Vec::with_capacity(self.params.max_generations as usize);

        for _ in 0..self.params.max_generations {
            let before = self.driver.cmp_calls;
            let picks = self.select(&costs)?;
            selection_cmp_calls.push(self.driver.cmp_calls - before);

            let mut next: Vec<Chromosome> =
                picks.iter().map(|&i| population[i - 1].clone()).collect();
            crossover_population(&mut next, self.params.crossover_rate, &mut self.cross_rng);
            mutate_population(&mut next, self.params.mutation_rate, &mut self.mut_rng);
            population = next;
            costs = self.evaluate(&population)?;

            let gen_best = self.driver.sec_argmin(&costs, &cost_dmax)?;
            if self.driver.sec_cmp(&costs[gen_best - 1], &best_ct, &cost_dmax)? {
                best_ct = costs[gen_best - 1].clone();
                best_tour = population[gen_best - 1].clone();
            }
            best_cost_series.push(best_ct.clone());
            cost_sum_series.push(sum_ciphertexts(&self.driver.pk, &costs)?);
        }

        Ok(EncryptedOutcome {
            best_cost_series,
            cost_sum_series,
            best_tour: best_tour.tour().to_vec(),
            population_size: self.params.n,
            selection_cmp_calls,
            total_cmp_calls: self.driver.cmp_calls,
            transcript: self.driver.channel.transcript.clone(),
            min_effective_sigma: self.driver.min_effective_sigma,
        })
    }

    /// Consumes the server, closing its channel end.
    pub fn into_transcript(self) -> Transcript {
        self.driver.channel.transcript
    }
}

fn sum_ciphertexts(pk: &PublicKey, cts: &[Ciphertext]) -> Result<Ciphertext> {
    let mut acc = cts[0].clone();
    for ct in &cts[1..] {
        acc = add(pk, &acc, ct)?;
    }
    Ok(acc)
}

/// A finished encrypted run, decrypted and de-pseudonymized by the user.
#[derive(Debug, Clone)]
pub struct PegaRun {
    pub stats: RunStats,
    /// Best tour over the original city labels.
    pub tour: Vec<u32>,
    pub transcript: Transcript,
    pub selection_cmp_calls: Vec<u64>,
    pub total_cmp_calls: u64,
    pub min_effective_sigma: Option<u32>,
}

impl UserRole {
    /// Decrypts the reporting series, maps the tour back through φ⁻¹, and
    /// checks the decrypted optimum against a plaintext re-evaluation.
    pub fn finalize(&self, outcome: &EncryptedOutcome, seeds: crate::rng::SeedBundle) -> Result<PegaRun> {
        let decrypt_cost = |ct: &Ciphertext| -> Result<u64> {
            let code = dec(&self.sk, ct)?;
            let raw = code.raw;
            let shifted = Integer::from(&raw >> self.scale);
            if (shifted.clone() << self.scale) != raw {
                return Err(Error::MalformedCiphertext(
                    "decrypted cost is not an integer at the session scale".into(),
                ));
            }
            shifted.to_u64().ok_or_else(|| {
                Error::MalformedCiphertext("decrypted cost exceeds u64".into())
            })
        };

        let best_costs: Vec<u64> =
            outcome.best_cost_series.iter().map(&decrypt_cost).collect::<Result<_>>()?;
        let mean_costs: Vec<f64> = outcome
            .cost_sum_series
            .iter()
            .map(|ct| Ok(decrypt_cost(ct)? as f64 / outcome.population_size as f64))
            .collect::<Result<_>>()?;

        let tour = self.city_map.apply_inverse(&outcome.best_tour);
        let replayed = self.matrix.route_cost(&tour)?;
        let reported = *best_costs.last().expect("series is never empty");
        if replayed != reported {
            return Err(Error::InvalidParams(format!(
                "decrypted best cost {reported} does not match the returned tour ({replayed})"
            )));
        }

        Ok(PegaRun {
            stats: RunStats {
                best_costs,
                mean_costs,
                best_tour: Chromosome::new(tour.clone()),
                seeds,
            },
            tour,
            transcript: outcome.transcript.clone(),
            selection_cmp_calls: outcome.selection_cmp_calls.clone(),
            total_cmp_calls: outcome.total_cmp_calls,
            min_effective_sigma: outcome.min_effective_sigma,
        })
    }
}

/// The matrix a seed-matched plaintext mirror must solve: the same
/// pseudonymized relabeling the encrypted session works on. Costs are
/// label-invariant, so a plain run over this matrix solves the same problem;
/// running it with the same seed bundle reproduces the encrypted engine's
/// series exactly.
pub fn mirror_matrix(matrix: &CostMatrix, setup: &SessionSetup) -> CostMatrix {
    let mut perm_rng = stream(setup.perm_seed);
    let (_, relabeled) = pseudonymize(matrix, &mut perm_rng);
    relabeled
}

/// How the two servers talk during a simulated session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    /// Loopback TCP; same frames, same transcripts.
    Tcp,
}

/// Full session over the chosen transport: submit, run both servers (S2 on
/// its own thread), finalize. Seed-matched with [`crate::ga::run_ga`] over
/// [`mirror_matrix`].
pub fn run_encrypted_with(
    matrix: &CostMatrix,
    params: &GaParams,
    setup: &SessionSetup,
    transport: TransportKind,
) -> Result<PegaRun> {
    let (user, bundle) = submit(matrix, setup)?;
    let mut responder = make_responder(
        bundle.pk.clone(),
        bundle.share2.clone(),
        setup.scale,
        setup.sigma,
        params.seeds.selection,
        setup.protocol_seed,
    );

    let (s1_chan, responder_thread) = match transport {
        TransportKind::InProcess => {
            let (s1_chan, mut s2_chan) = crate::channel::in_process_pair();
            let handle = std::thread::spawn(move || responder.serve(&mut s2_chan));
            (s1_chan, handle)
        }
        TransportKind::Tcp => {
            let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let handle = std::thread::spawn(move || {
                let mut s2_chan = crate::channel::Tcp::accept(&listener)?;
                responder.serve(&mut s2_chan)
            });
            (crate::channel::Tcp::connect(addr)?, handle)
        }
    };

    let mut server_one = ServerOne::new(
        bundle.pk,
        bundle.share1,
        bundle.enc_tsp,
        bundle.max_edge_cost,
        params.clone(),
        s1_chan,
        setup.sigma,
        setup.protocol_seed,
    )?;
    let outcome = server_one.run();
    drop(server_one);
    responder_thread.join().expect("responder thread panicked")?;
    user.finalize(&outcome?, params.seeds)
}

/// [`run_encrypted_with`] over the in-process transport.
pub fn run_encrypted(
    matrix: &CostMatrix,
    params: &GaParams,
    setup: &SessionSetup,
) -> Result<PegaRun> {
    run_encrypted_with(matrix, params, setup, TransportKind::InProcess)
}
