use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pega_core::channel::FRAME_HEADER_BYTES;
use pega_core::ga::{run_ga, GaParams, RunStats, Selection};
use pega_core::pega::{
    encrypt_for_submission, mirror_matrix, run_encrypted_with, SessionSetup, TransportKind,
};
use pega_core::rng::{stream, SeedBundle};
use pega_core::stats::{mean, sample_std, wilcoxon_rank_sum};
use pega_core::thpc::{keygen as thpc_keygen, PublicKey};
use pega_core::tsp::{build_matrix, parse_tsplib, CostMatrix};

use crate::config::Settings;
use crate::{BenchArgs, CliError, EncryptArgs, KeygenArgs, SolveArgs, StatsArgs};

fn read_instance(path: &Path) -> Result<(String, CostMatrix), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let instance = parse_tsplib(&text)?;
    let name = if instance.name.is_empty() {
        path.file_stem().map_or("unnamed".into(), |s| s.to_string_lossy().into_owned())
    } else {
        instance.name.clone()
    };
    Ok((name, build_matrix(&instance)))
}

pub fn keygen(args: &KeygenArgs, settings: &Settings) -> Result<(), CliError> {
    let bits: u32 = settings.resolve(args.bits, "bits", 256)?;
    let seed: u64 = settings.resolve(args.seed, "seed", 1)?;
    let out: PathBuf = settings.resolve_required(args.out.clone(), "out")?;
    if bits < 32 || bits % 2 != 0 {
        return Err(CliError::Usage(format!("--bits {bits} must be even and at least 32")));
    }
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    let (pk, sk, share1, share2) = thpc_keygen(bits / 2, &mut stream(seed));
    for (name, bytes) in [
        ("pk.bin", pk.to_bytes()),
        ("sk.bin", sk.to_bytes()),
        ("share1.bin", share1.to_bytes()),
        ("share2.bin", share2.to_bytes()),
    ] {
        std::fs::write(out.join(name), bytes)
            .map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))?;
    }
    println!(
        "wrote key set to {} (|N| = {} bits, fingerprint {:016x})",
        out.display(),
        pk.n.significant_bits(),
        pk.fingerprint()
    );
    Ok(())
}

pub fn encrypt(args: &EncryptArgs, settings: &Settings) -> Result<(), CliError> {
    let tsp: PathBuf = settings.resolve_required(args.tsp.clone(), "tsp")?;
    let pk_path: PathBuf = settings.resolve_required(args.pk.clone(), "pk")?;
    let scale: u32 = settings.resolve(args.scale, "scale", 106)?;
    let perm_seed: u64 = settings.resolve(args.perm_seed, "perm-seed", 7)?;
    let out: PathBuf = settings.resolve_required(args.out.clone(), "out")?;
    let map_out: PathBuf = match settings.resolve_optional(args.map_out.clone(), "map-out")? {
        Some(path) => path,
        None => {
            let mut path = out.clone().into_os_string();
            path.push(".map");
            PathBuf::from(path)
        }
    };

    let (_, matrix) = read_instance(&tsp)?;
    let pk_bytes = std::fs::read(&pk_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", pk_path.display())))?;
    let pk = PublicKey::from_bytes(&pk_bytes)?;
    let started = Instant::now();
    let (city_map, enc_tsp) = encrypt_for_submission(&pk, &matrix, scale, perm_seed)?;
    let elapsed = started.elapsed();

    let container = enc_tsp.to_bytes();
    std::fs::write(&out, &container)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    std::fs::write(&map_out, city_map.to_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", map_out.display())))?;
    println!(
        "encrypted {} pairs at scale {scale} in {:.2}s: {} ({} bytes), map {}",
        pega_core::tsp::pair_count(matrix.m()),
        elapsed.as_secs_f64(),
        out.display(),
        container.len(),
        map_out.display()
    );
    Ok(())
}

struct SolveConfig {
    matrix: CostMatrix,
    mode: String,
    params: GaParams,
    setup: SessionSetup,
    transport: TransportKind,
    csv: Option<PathBuf>,
    append_final: Option<PathBuf>,
}

fn solve_config(args: &SolveArgs, settings: &Settings) -> Result<SolveConfig, CliError> {
    let tsp: PathBuf = settings.resolve_required(args.tsp.clone(), "tsp")?;
    let (_, matrix) = read_instance(&tsp)?;

    let mode: String = settings.resolve(args.mode.clone(), "mode", "plain".into())?;
    if mode != "plain" && mode != "pega" {
        return Err(CliError::Usage(format!("--mode {mode} must be plain or pega")));
    }
    let selection_name: String =
        settings.resolve(args.selection.clone(), "selection", "tournament".into())?;
    let scale: u32 = settings.resolve(args.scale, "scale", 106)?;
    let selection = match selection_name.as_str() {
        "fps" => Selection::Fps { scale },
        "tournament" => Selection::Tournament { k: settings.resolve(args.k, "k", 2)? },
        other => {
            return Err(CliError::Usage(format!(
                "--selection {other} must be fps or tournament"
            )))
        }
    };

    let master: u64 = settings.resolve(args.master_seed, "master-seed", 1)?;
    let defaults = SeedBundle::from_master(master);
    let seeds = SeedBundle {
        population: settings.resolve(args.seed_pop, "seed-pop", defaults.population)?,
        selection: settings.resolve(args.seed_sel, "seed-sel", defaults.selection)?,
        crossover: settings.resolve(args.seed_cross, "seed-cross", defaults.crossover)?,
        mutation: settings.resolve(args.seed_mut, "seed-mut", defaults.mutation)?,
    };

    let params = GaParams {
        n: settings.resolve(args.pop, "pop", 30)?,
        crossover_rate: settings.resolve(args.crossover_rate, "crossover-rate", 0.1)?,
        mutation_rate: settings.resolve(args.mutation_rate, "mutation-rate", 0.15)?,
        selection,
        max_generations: settings.resolve(args.gens, "gens", 100)?,
        seeds,
    };

    let setup = SessionSetup {
        key_bits: settings.resolve(args.bits, "bits", 256)?,
        scale,
        sigma: settings.resolve(args.sigma, "sigma", 128)?,
        key_seed: settings.resolve(args.key_seed, "key-seed", 77)?,
        perm_seed: settings.resolve(args.perm_seed, "perm-seed", 7)?,
        protocol_seed: settings.resolve(args.protocol_seed, "protocol-seed", 11)?,
    };

    let transport_name: String =
        settings.resolve(args.transport.clone(), "transport", "inproc".into())?;
    let transport = match transport_name.as_str() {
        "inproc" => TransportKind::InProcess,
        "tcp" => TransportKind::Tcp,
        other => {
            return Err(CliError::Usage(format!("--transport {other} must be inproc or tcp")))
        }
    };

    Ok(SolveConfig {
        matrix,
        mode,
        params,
        setup,
        transport,
        csv: settings.resolve_optional(args.csv.clone(), "csv")?,
        append_final: settings.resolve_optional(args.append_final.clone(), "append-final")?,
    })
}

fn render_csv(stats: &RunStats, tour: &[u32]) -> String {
    let mut out = String::from("generation,best_cost,mean_cost\n");
    for (generation, (best, mean)) in
        stats.best_costs.iter().zip(&stats.mean_costs).enumerate()
    {
        out.push_str(&format!("{generation},{best},{mean}\n"));
    }
    let tour_text: Vec<String> = tour.iter().map(|c| c.to_string()).collect();
    out.push_str(&format!("# tour={} cost={}\n", tour_text.join("-"), stats.final_best()));
    out
}

pub fn solve(args: &SolveArgs, settings: &Settings) -> Result<(), CliError> {
    let cfg = solve_config(args, settings)?;
    let started = Instant::now();

    let (stats, tour, note) = if cfg.mode == "plain" {
        // the plain reference solves the same pseudonymized relabeling the
        // encrypted engine sees, so seed-matched columns coincide
        let mirror = mirror_matrix(&cfg.matrix, &cfg.setup);
        let stats = run_ga(&mirror, &cfg.params)?;
        let mut perm_rng = stream(cfg.setup.perm_seed);
        let (city_map, _) = pega_core::tsp::pseudonymize(&cfg.matrix, &mut perm_rng);
        let tour = city_map.apply_inverse(stats.best_tour.tour());
        (stats, tour, String::new())
    } else {
        let run = run_encrypted_with(&cfg.matrix, &cfg.params, &cfg.setup, cfg.transport)?;
        let note = format!(
            ", transcript {} B over {} messages ({} rounds), {} comparisons{}",
            run.transcript.total_bytes(),
            run.transcript.messages,
            run.transcript.rounds,
            run.total_cmp_calls,
            match run.min_effective_sigma {
                Some(sigma) => format!(", effective sigma {sigma}"),
                None => String::new(),
            }
        );
        (run.stats.clone(), run.tour, note)
    };

    let csv = render_csv(&stats, &tour);
    match &cfg.csv {
        Some(path) => std::fs::write(path, &csv)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &cfg.append_final {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        writeln!(file, "{}", stats.final_best())
            .map_err(|e| CliError::Data(format!("cannot append: {e}")))?;
    }
    eprintln!(
        "{} {} finished: best {} after {} generations in {:.2}s{note}",
        cfg.mode,
        match cfg.params.selection {
            Selection::Fps { .. } => "fps",
            Selection::Tournament { .. } => "tournament",
        },
        stats.final_best(),
        cfg.params.max_generations,
        started.elapsed().as_secs_f64(),
    );
    Ok(())
}

pub fn bench(args: &BenchArgs, settings: &Settings) -> Result<(), CliError> {
    let bits: u32 = settings.resolve(args.bits, "bits", 256)?;
    let scale: u32 = settings.resolve(args.scale, "scale", 106)?;
    let repeat: u32 = settings.resolve(args.repeat, "repeat", 1)?;
    let pop: usize = settings.resolve(args.pop, "pop", 30)?;
    let gens: u32 = settings.resolve(args.gens, "gens", 5)?;
    if repeat == 0 {
        return Err(CliError::Usage("--repeat must be positive".into()));
    }

    println!(
        "{:<10} {:>5} {:>8} {:>12} {:>10} {:>12} {:>12} {:>10}",
        "instance", "m", "pairs", "payload B", "enc ms", "bytes/gen", "ms/gen", "cmp/gen"
    );
    for path in &args.instances {
        let (name, matrix) = read_instance(path)?;
        let setup = SessionSetup {
            key_bits: bits,
            scale,
            sigma: 128,
            key_seed: 77,
            perm_seed: 7,
            protocol_seed: 11,
        };
        let params = GaParams {
            n: pop,
            crossover_rate: 0.1,
            mutation_rate: 0.15,
            selection: Selection::Tournament { k: 2 },
            max_generations: gens,
            seeds: SeedBundle::from_master(1),
        };

        // payload size and encryption time, averaged over the repeats
        let mut enc_seconds = 0.0;
        let mut payload_bytes = 0u64;
        for _ in 0..repeat {
            let (pk, _, _, _) = thpc_keygen(bits / 2, &mut stream(setup.key_seed));
            let started = Instant::now();
            let (_, enc_tsp) = encrypt_for_submission(&pk, &matrix, scale, setup.perm_seed)?;
            enc_seconds += started.elapsed().as_secs_f64();
            payload_bytes = enc_tsp.to_bytes().len() as u64;
        }
        enc_seconds /= repeat as f64;

        let started = Instant::now();
        let run = run_encrypted_with(&matrix, &params, &setup, TransportKind::InProcess)?;
        let solve_seconds = started.elapsed().as_secs_f64();
        let per_gen_bytes = run.transcript.total_bytes() / gens.max(1) as u64;
        let per_gen_ms = solve_seconds * 1e3 / gens.max(1) as f64;
        let per_gen_cmp = run.total_cmp_calls / gens.max(1) as u64;

        println!(
            "{:<10} {:>5} {:>8} {:>12} {:>10.1} {:>12} {:>12.1} {:>10}",
            name,
            matrix.m(),
            pega_core::tsp::pair_count(matrix.m()),
            payload_bytes,
            enc_seconds * 1e3,
            per_gen_bytes,
            per_gen_ms,
            per_gen_cmp,
        );
    }
    println!("(frame overhead {} B per message)", FRAME_HEADER_BYTES);
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let samples: Vec<f64> = text.lines().filter_map(|line| line.trim().parse().ok()).collect();
    if samples.is_empty() {
        return Err(CliError::Data(format!("{} holds no numeric lines", path.display())));
    }
    Ok(samples)
}

pub fn stats(args: &StatsArgs, settings: &Settings) -> Result<(), CliError> {
    let path_a: PathBuf = settings.resolve_required(args.csv_a.clone(), "csv-a")?;
    let path_b: PathBuf = settings.resolve_required(args.csv_b.clone(), "csv-b")?;
    let a = read_samples(&path_a)?;
    let b = read_samples(&path_b)?;
    let p_value = wilcoxon_rank_sum(&a, &b);
    println!("mean_a {}", mean(&a));
    println!("std_a {}", if a.len() >= 2 { sample_std(&a) } else { 0.0 });
    println!("mean_b {}", mean(&b));
    println!("std_b {}", if b.len() >= 2 { sample_std(&b) } else { 0.0 });
    println!("p_value {p_value}");
    Ok(())
}

