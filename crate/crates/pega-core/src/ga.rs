//! Plaintext reference genetic algorithm.
//!
//! This is the equivalence oracle for the encrypted engine: both engines use
//! the operators in this module with the same named random streams, so a
//! seed-matched pair of runs produces identical populations generation by
//! generation.
//!
//! Two deliberate quirks keep that mirror exact:
//!
//! * Fitness-proportionate selection consumes the same quantized
//!   probabilities as the secure path (`v_i = sum - cost_i`, normalizer
//!   `round(2^{2ℓ}/Σv)`), not exact rationals. "Fixing" this to exact
//!   arithmetic would break seed-matched equivalence.
//! * Every random choice draws from one of four named streams (population,
//!   selection, crossover, mutation) in a fixed order.

use rand::Rng;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::fixedpoint::reciprocal_code;
use crate::rng::{sample_distinct, stream, uniform_unit_scaled, SeedBundle, Stream};
use crate::tsp::CostMatrix;

/// A candidate tour: a permutation of the city indices `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome(Vec<u32>);

impl Chromosome {
    /// Wraps a tour, checking the permutation invariant.
    pub fn new(tour: Vec<u32>) -> Self {
        let m = tour.len();
        let mut seen = vec![false; m + 1];
        for &city in &tour {
            assert!(
                city >= 1 && city as usize <= m && !seen[city as usize],
                "tour is not a permutation of 1..={m}"
            );
            seen[city as usize] = true;
        }
        Self(tour)
    }

    pub fn tour(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Chromosome {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

/// Selection operator choice. The FPS scale is the fixed-point exponent the
/// quantized probability pipeline runs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Fps { scale: u32 },
    Tournament { k: usize },
}

/// Everything a run needs besides the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaParams {
    pub n: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub selection: Selection,
    pub max_generations: u32,
    pub seeds: SeedBundle,
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("population size must be positive".into()));
        }
        for (name, rate) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)]
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidParams(format!("{name} rate {rate} outside [0, 1]")));
            }
        }
        if let Selection::Tournament { k } = self.selection {
            if k < 2 {
                return Err(Error::InvalidParams(format!("tournament size {k} below 2")));
            }
        }
        Ok(())
    }
}

/// Per-run record: best-so-far cost after every evaluation (entry 0 is the
/// initial population), population mean costs, and the best tour found.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub best_costs: Vec<u64>,
    pub mean_costs: Vec<f64>,
    pub best_tour: Chromosome,
    pub seeds: SeedBundle,
}

impl RunStats {
    pub fn final_best(&self) -> u64 {
        *self.best_costs.last().expect("runs record at least the initial evaluation")
    }
}

/// `n` uniformly random permutations, one shuffle per chromosome.
pub fn init_population(m: u32, n: usize, rng: &mut Stream) -> Vec<Chromosome> {
    (0..n)
        .map(|_| {
            let mut tour: Vec<u32> = (1..=m).collect();
            for i in (1..tour.len()).rev() {
                let j = rng.gen_range(0..=i);
                tour.swap(i, j);
            }
            Chromosome::new(tour)
        })
        .collect()
}

/// The quantized selection masses the secure path produces: fitness
/// `v_i = sum - cost_i` at the given scale, times `round(2^{2ℓ}/Σv)`.
pub fn quantized_probabilities(costs: &[u64], scale: u32) -> Result<Vec<Integer>> {
    let sum: u64 = costs.iter().sum();
    let fitness: Vec<Integer> =
        costs.iter().map(|&c| Integer::from(sum - c) << scale).collect();
    let fitness_sum = fitness.iter().fold(Integer::new(), |acc, v| acc + v);
    if fitness_sum == 0 {
        return Err(Error::DegeneratePopulation);
    }
    let den = Rational::from((fitness_sum, Integer::from(1) << scale));
    let norm = reciprocal_code(&den, scale)?;
    Ok(fitness.into_iter().map(|v| v * &norm).collect())
}

/// Roulette-wheel selection by prefix sums and binary search, one uniform
/// threshold per slot. Returns 1-based indices into `costs`.
pub fn fps_select(
    costs: &[u64],
    n_out: usize,
    scale: u32,
    rng: &mut Stream,
) -> Result<Vec<usize>> {
    let n = costs.len();
    assert!(n >= 1, "selection over an empty population");
    if n == 1 {
        return Ok(vec![1; n_out]);
    }
    let masses = quantized_probabilities(costs, scale)?;
    let mut prefix = Vec::with_capacity(n);
    let mut acc = Integer::new();
    for mass in &masses {
        acc += mass;
        prefix.push(acc.clone());
    }
    let picks = (0..n_out)
        .map(|_| {
            let threshold = uniform_unit_scaled(rng, 2 * scale);
            lower_bound(&prefix, &threshold)
        })
        .collect();
    Ok(picks)
}

/// Smallest 1-based `i` with `threshold <= prefix[i-1]`, clamped to the last
/// index when the total mass falls short.
fn lower_bound(prefix: &[Integer], threshold: &Integer) -> usize {
    let mut lo = 1usize;
    let mut hi = prefix.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if prefix[mid - 1] < *threshold {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// k-tournament: per slot, `k` distinct uniform indices; lowest cost wins,
/// ties to the lower index. Returns 1-based indices.
pub fn tournament_select(
    costs: &[u64],
    k: usize,
    n_out: usize,
    rng: &mut Stream,
) -> Vec<usize> {
    assert!(k >= 2, "tournament size below two");
    let n = costs.len();
    (0..n_out)
        .map(|_| {
            let entrants = sample_distinct(rng, n, k.min(n));
            *entrants.iter().min_by_key(|&&i| (costs[i - 1], i)).unwrap()
        })
        .collect()
}

/// Edge recombination crossover. The child starts at the first city of
/// `parent_a` and repeatedly moves to the unvisited neighbour (union of both
/// parents' tour edges) with the fewest remaining neighbours; ties break
/// uniformly by `rng` over the tied cities in ascending order, dead ends by
/// a uniform unvisited city.
pub fn erx_crossover(parent_a: &Chromosome, parent_b: &Chromosome, rng: &mut Stream) -> Chromosome {
    let m = parent_a.len();
    assert_eq!(m, parent_b.len(), "parents must have equal length");

    // undirected adjacency, deduplicated: at most four neighbours per city
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::with_capacity(4); m + 1];
    for parent in [parent_a, parent_b] {
        for pos in 0..m {
            let city = parent[pos] as usize;
            let prev = parent[(pos + m - 1) % m];
            let next = parent[(pos + 1) % m];
            for neighbour in [prev, next] {
                if !adjacency[city].contains(&neighbour) {
                    adjacency[city].push(neighbour);
                }
            }
        }
    }

    let mut visited = vec![false; m + 1];
    let mut child = Vec::with_capacity(m);
    let mut current = parent_a[0];
    loop {
        child.push(current);
        visited[current as usize] = true;
        // drop the visited city from every neighbour list
        for k in 0..adjacency[current as usize].len() {
            let neighbour = adjacency[current as usize][k] as usize;
            adjacency[neighbour].retain(|&c| c != current);
        }
        if child.len() == m {
            break;
        }
        let neighbours = &adjacency[current as usize];
        let next = if neighbours.is_empty() {
            // dead end: uniform over unvisited cities
            let unvisited: Vec<u32> =
                (1..=m as u32).filter(|&c| !visited[c as usize]).collect();
            pick_uniform(&unvisited, rng)
        } else {
            let fewest = neighbours
                .iter()
                .map(|&c| adjacency[c as usize].len())
                .min()
                .unwrap();
            let mut tied: Vec<u32> = neighbours
                .iter()
                .copied()
                .filter(|&c| adjacency[c as usize].len() == fewest)
                .collect();
            tied.sort_unstable();
            pick_uniform(&tied, rng)
        };
        current = next;
    }
    Chromosome::new(child)
}

fn pick_uniform(candidates: &[u32], rng: &mut Stream) -> u32 {
    debug_assert!(!candidates.is_empty());
    if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.gen_range(0..candidates.len())]
    }
}

/// With probability `rate`, swaps two distinct uniformly chosen positions;
/// otherwise returns the chromosome unchanged.
pub fn swap_mutation(chrom: &Chromosome, rate: f64, rng: &mut Stream) -> Chromosome {
    let mut tour = chrom.tour().to_vec();
    if rng.gen::<f64>() < rate {
        let m = tour.len();
        let a = rng.gen_range(0..m);
        let b = loop {
            let candidate = rng.gen_range(0..m);
            if candidate != a {
                break candidate;
            }
        };
        tour.swap(a, b);
    }
    Chromosome(tour)
}

/// Mates consecutive pairs of the selected population: one coin per pair,
/// and a mating replaces both parents with the two ERX children (one per
/// parent ordering). A trailing unpaired individual passes through.
pub fn crossover_population(population: &mut [Chromosome], rate: f64, rng: &mut Stream) {
    for pair in (0..population.len() / 2).map(|p| 2 * p) {
        if rng.gen::<f64>() < rate {
            let child_a = erx_crossover(&population[pair], &population[pair + 1], rng);
            let child_b = erx_crossover(&population[pair + 1], &population[pair], rng);
            population[pair] = child_a;
            population[pair + 1] = child_b;
        }
    }
}

/// One mutation coin per individual, in slot order.
pub fn mutate_population(population: &mut [Chromosome], rate: f64, rng: &mut Stream) {
    for chrom in population.iter_mut() {
        *chrom = swap_mutation(chrom, rate, rng);
    }
}

/// Index (1-based) of the cheapest individual, first-wins on ties — the
/// plaintext counterpart of the encrypted argmin scan.
pub fn argmin_cost(costs: &[u64]) -> usize {
    let mut best = 0usize;
    for i in 1..costs.len() {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    best + 1
}

/// Runs the full loop: init, evaluate, then select/crossover/mutate/evaluate
/// for `max_generations` rounds, tracking the best tour ever seen.
pub fn run_ga(matrix: &CostMatrix, params: &GaParams) -> Result<RunStats> {
    params.validate()?;
    let mut pop_rng = stream(params.seeds.population);
    let mut sel_rng = stream(params.seeds.selection);
    let mut cross_rng = stream(params.seeds.crossover);
    let mut mut_rng = stream(params.seeds.mutation);

    let evaluate = |pop: &[Chromosome]| -> Result<Vec<u64>> {
        pop.iter().map(|c| matrix.route_cost(c.tour())).collect()
    };

    let mut population = init_population(matrix.m(), params.n, &mut pop_rng);
    let mut costs = evaluate(&population)?;

    let mut best_idx = argmin_cost(&costs);
    let mut best_cost = costs[best_idx - 1];
    let mut best_tour = population[best_idx - 1].clone();
    let mut best_costs = vec![best_cost];
    let mut mean_costs = vec![mean_cost(&costs)];

    for _ in 0..params.max_generations {
        let picks = match params.selection {
            Selection::Fps { scale } => fps_select(&costs, params.n, scale, &mut sel_rng)?,
            Selection::Tournament { k } => {
                tournament_select(&costs, k, params.n, &mut sel_rng)
            }
        };
        let mut next: Vec<Chromosome> =
            picks.iter().map(|&i| population[i - 1].clone()).collect();
        crossover_population(&mut next, params.crossover_rate, &mut cross_rng);
        mutate_population(&mut next, params.mutation_rate, &mut mut_rng);
        population = next;
        costs = evaluate(&population)?;

        best_idx = argmin_cost(&costs);
        if costs[best_idx - 1] < best_cost {
            best_cost = costs[best_idx - 1];
            best_tour = population[best_idx - 1].clone();
        }
        best_costs.push(best_cost);
        mean_costs.push(mean_cost(&costs));
    }

    Ok(RunStats { best_costs, mean_costs, best_tour, seeds: params.seeds })
}

/// Population mean via the exact integer sum, so the encrypted engine (which
/// decrypts the homomorphic sum) reproduces it bit for bit.
pub fn mean_cost(costs: &[u64]) -> f64 {
    costs.iter().sum::<u64>() as f64 / costs.len() as f64
}
