//! Batch experiment driver: keystream generation, case detection, key
//! recovery, Monte Carlo campaigns and the claim-check catalog.
//!
//! Exit codes: 0 success, 1 attack or verification failure, 2 usage error.

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trivium_hf::attack;
use trivium_hf::bits::{Iv, Key};
use trivium_hf::campaign::{self, CampaignConfig};
use trivium_hf::detector::{detect_case, DetectedLabel, FaultedMachine};
use trivium_hf::fault::{classify_case_or_clean, CaseLabel, FaultMask, InjectionModel};
use trivium_hf::trivium;
use trivium_hf::verify;

#[derive(Parser)]
#[command(name = "trivium-hf", version, about = "Trivium stuck-at-0 hard-fault workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print keystream bits generated under a fault mask.
    Keystream {
        /// 80-bit key as 20 hex digits
        #[arg(long)]
        key: String,
        /// 80-bit IV as 20 hex digits (default all-zero)
        #[arg(long)]
        iv: Option<String>,
        /// Stuck-at-0 positions, e.g. "100" or "178,200" (default none)
        #[arg(long)]
        mask: Option<String>,
        /// Number of keystream bits
        #[arg(long, default_value_t = 128)]
        bits: usize,
    },
    /// Run keystream-only case detection against a locally built machine.
    Detect {
        #[arg(long)]
        key: String,
        #[arg(long)]
        mask: String,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<String>,
    },
    /// Detect the case, run the matching key recovery, score against the
    /// locally known true key.
    Attack {
        #[arg(long)]
        key: String,
        #[arg(long)]
        mask: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Monte Carlo campaign: sample masks, detect, optionally attack.
    Campaign {
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Injection model: single | k:<n> | bernoulli:<p>
        #[arg(long, default_value = "single")]
        model: String,
        /// Master seed; per-trial seed is seed + trial index
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the matching attack on every detected case
        #[arg(long)]
        attack: bool,
        /// Collapse the ambiguous boundary verdict before attacking
        #[arg(long)]
        resolve: bool,
        /// Write per-trial records here (NDJSON or CSV); stdout otherwise
        #[arg(long)]
        out: Option<String>,
        /// Output format for records and summary
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run one named claim check, or the whole catalog.
    Verify {
        /// Check id (e.g. lemma1, prop2-rank); omit to run everything
        check: Option<String>,
        /// Per-check workload; 0 picks each check's default
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON reports here as well
        #[arg(long)]
        out: Option<String>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Seed resolution: flag, then TRIVIUM_HF_SEED, then a fixed default.
fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("TRIVIUM_HF_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| format!("TRIVIUM_HF_SEED is not a u64: `{v}`")),
        Err(_) => Ok(1),
    }
}

fn parse_mask(spec: Option<&str>) -> Result<FaultMask, String> {
    match spec {
        None | Some("") => Ok(FaultMask::empty()),
        Some(s) => FaultMask::from_spec(s).map_err(|e| e.to_string()),
    }
}

fn emit(out: Option<&str>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("writing {path}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Keystream { key, iv, mask, bits } => {
            let key = Key::from_hex(&key).map_err(|e| e.to_string())?;
            let iv = match iv {
                Some(h) => Iv::from_hex(&h).map_err(|e| e.to_string())?,
                None => Iv::zero(),
            };
            let mask = parse_mask(mask.as_deref())?;
            let ks = trivium::keystream(&key, &iv, &mask, bits).map_err(|e| e.to_string())?;
            if !ks.is_empty() {
                println!("{}", ks.to_hex());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect { key, mask, out } => {
            let key = Key::from_hex(&key).map_err(|e| e.to_string())?;
            let mask = parse_mask(Some(&mask))?;
            let machine = FaultedMachine::new(key, mask);
            let result = detect_case(&machine).map_err(|e| e.to_string())?;
            let json = serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &format!("{json}\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack { key, mask, out } => {
            let key = Key::from_hex(&key).map_err(|e| e.to_string())?;
            let mask = parse_mask(Some(&mask))?;
            let report = run_attack(&key, &mask)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &format!("{json}\n"))?;
            Ok(if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Campaign { trials, model, seed, attack, resolve, out, format } => {
            if trials == 0 {
                return Err("campaign needs at least one trial".into());
            }
            let config = CampaignConfig {
                trials,
                model: InjectionModel::from_spec(&model).map_err(|e| e.to_string())?,
                seed: resolve_seed(seed)?,
                run_attacks: attack,
                resolve_ambiguous: resolve,
            };
            let (records, summary) = campaign::run_campaign(&config).map_err(|e| e.to_string())?;
            let rendered = match format {
                Format::Json => campaign::records_to_ndjson(&records).map_err(|e| e.to_string())?,
                Format::Csv => records_to_csv(&records),
            };
            emit(out.as_deref(), &rendered)?;
            match format {
                Format::Json => {
                    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?)
                }
                Format::Csv => print!("{}", summary_to_csv(&summary)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { check, trials, seed, out } => {
            let seed = resolve_seed(seed)?;
            let reports = match check {
                Some(id) => vec![verify::run_check(&id, trials, seed).map_err(|e| e.to_string())?],
                None => verify::run_all(trials, seed).map_err(|e| e.to_string())?,
            };
            for r in &reports {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} (trials={}) {}", r.id, r.trials, r.details);
                if let Some(cex) = &r.counterexample {
                    println!("     counterexample: {cex}");
                }
            }
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&reports).map_err(|e| e.to_string())?;
                fs::write(&path, json).map_err(|e| format!("writing {path}: {e}"))?;
            }
            Ok(if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

/// Full attack report: what the detector saw, what the attack produced, and
/// how it scores against the true key.
#[derive(Serialize)]
struct AttackReport {
    mask: String,
    true_case: String,
    detected_label: String,
    attacked_as: String,
    success: bool,
    /// k1..k80 as '0'/'1'/'?' for individually certified bits.
    recovered_bits: String,
    bits_known: usize,
    residual_relations: Vec<String>,
    alternative_relation_sets: Vec<Vec<String>>,
    /// Explicit candidates for the key prefix of length `candidates_len`.
    candidates: usize,
    candidates_len: usize,
    rank_observed: Option<usize>,
    solution_dim: Option<usize>,
    candidates_before_filter: Option<usize>,
    survivors: Option<usize>,
    notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    structure: Option<attack::StructuralReport>,
}

fn run_attack(key: &Key, mask: &FaultMask) -> Result<AttackReport, String> {
    let machine = FaultedMachine::new(*key, mask.clone());
    let detection = detect_case(&machine).map_err(|e| e.to_string())?;
    let attacked_as = detection.label.resolve_ambiguous();
    let mut report = AttackReport {
        mask: mask.to_spec(),
        true_case: classify_case_or_clean(mask).name().into(),
        detected_label: detection.label.name().into(),
        attacked_as: attacked_as.name().into(),
        success: false,
        recovered_bits: "?".repeat(80),
        bits_known: 0,
        residual_relations: Vec::new(),
        alternative_relation_sets: Vec::new(),
        candidates: 0,
        candidates_len: 0,
        rank_observed: None,
        solution_dim: None,
        candidates_before_filter: None,
        survivors: None,
        notes: Vec::new(),
        structure: None,
    };
    let record = |report: &mut AttackReport, kk: attack::KeyKnowledge| {
        report.success = kk.consistent_with(key);
        report.recovered_bits = kk.known_string();
        report.bits_known = kk.known_count();
        report.residual_relations = kk.relations.iter().map(|e| e.render()).collect();
        report.alternative_relation_sets = kk
            .alternatives
            .iter()
            .map(|set| set.iter().map(|e| e.render()).collect())
            .collect();
        report.candidates = kk.candidates.len();
        report.candidates_len = kk.candidates_len;
        report.rank_observed = kk.diagnostics.rank_observed;
        report.solution_dim = kk.diagnostics.solution_dim;
        report.candidates_before_filter = kk.diagnostics.candidates_before_filter;
        report.survivors = kk.diagnostics.survivors;
        report.notes = kk.diagnostics.notes.clone();
    };
    match attacked_as {
        DetectedLabel::Case1 => {
            let ks = machine.observe(&Iv::zero(), 276).map_err(|e| e.to_string())?;
            match attack::attack_case1(&ks) {
                Ok(kk) => record(&mut report, kk),
                Err(e) => report.notes.push(e.to_string()),
            }
        }
        DetectedLabel::Case2 => {
            let ks = machine
                .observe(&Iv::zero(), attack::CASE2_KEYSTREAM_BITS)
                .map_err(|e| e.to_string())?;
            match attack::solve_case2(&ks) {
                Ok(kk) => record(&mut report, kk),
                Err(e) => report.notes.push(e.to_string()),
            }
        }
        DetectedLabel::Case3 => {
            let ks = machine
                .observe(&Iv::zero(), attack::CASE3_KEYSTREAM_BITS)
                .map_err(|e| e.to_string())?;
            match attack::solve_case3(&ks) {
                Ok((_, kk)) => record(&mut report, kk),
                Err(e) => report.notes.push(e.to_string()),
            }
        }
        DetectedLabel::Case4 | DetectedLabel::Case5 => {
            let case = if attacked_as == DetectedLabel::Case4 {
                CaseLabel::Case4
            } else {
                CaseLabel::Case5
            };
            report.structure = Some(attack::structural_report(case).map_err(|e| e.to_string())?);
            report.success = true;
            report.notes.push(
                "no keystream-only key recovery for this case; structural handle reported".into(),
            );
        }
        DetectedLabel::Case5or6 => unreachable!("ambiguity was resolved above"),
        DetectedLabel::Case7 => {
            report
                .notes
                .push("no recovery attack is defined for this case".into());
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// CSV rendering

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.into()
    }
}

fn feature_cell(f: Option<bool>) -> &'static str {
    match f {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

fn records_to_csv(records: &[campaign::TrialRecord]) -> String {
    let mut out = String::from(
        "trial,seed,mask,true_case,detected_label,f1,f2,f3,f4,f5,f6,keystream_bits_consumed,detection_consistent,attack_target,attack_success,key_bits_known\n",
    );
    for r in records {
        let (target, success, bits) = match &r.attack {
            Some(a) => (a.target.as_str(), if a.success { "1" } else { "0" }, a.key_bits_known.to_string()),
            None => ("", "", String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.seed,
            csv_quote(&r.mask),
            r.true_case,
            r.detected_label,
            feature_cell(r.features[0]),
            feature_cell(r.features[1]),
            feature_cell(r.features[2]),
            feature_cell(r.features[3]),
            feature_cell(r.features[4]),
            feature_cell(r.features[5]),
            r.keystream_bits_consumed,
            r.detection_consistent as u8,
            target,
            success,
            bits,
        ));
    }
    out
}

fn summary_to_csv(s: &campaign::CampaignSummary) -> String {
    let mut out = String::from("section,case,count,frequency,std_error,extra\n");
    for f in &s.case_frequencies {
        out.push_str(&format!(
            "frequency,{},{},{:.6},{:.6},\n",
            f.case, f.count, f.frequency, f.std_error
        ));
    }
    for d in &s.detection {
        out.push_str(&format!(
            "detection,{},{},,,consistent={}\n",
            d.case, d.trials, d.consistent
        ));
    }
    out.push_str(&format!(
        "resolution,,{},,,correct={} wrong={}\n",
        s.resolution.ambiguous_verdicts, s.resolution.resolve_correct, s.resolution.resolve_wrong
    ));
    for a in &s.attacks {
        out.push_str(&format!(
            "attack,{},{},,,succeeded={}\n",
            a.target, a.attempted, a.succeeded
        ));
    }
    out
}
