//! Command execution and artifact assembly.
//!
//! Every run resolves to a [`RunOutput`]: an optional CSV table plus a JSON
//! document. Sweeps run the same command once per substituted value —
//! optionally across threads — and always assemble rows in input order, so
//! parallel and serial executions emit identical bytes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sivsim_core::error::SimError;
use sivsim_core::phonon;
use sivsim_core::protocols::{self, cpt_power_for_isolated_broadening};
use sivsim_core::spectrum::{
    build_excited_hamiltonian, build_ground_hamiltonian, eigensystem, transition_table,
    zeeman_map, MagneticField,
};

use crate::config::{CommandSpec, Format, ProtocolSpec, RunConfig};
use crate::emit::{self, fnum};

/// The in-memory result of one command execution.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// CSV header (empty when the command has no tabular form).
    pub header: String,
    /// CSV data rows.
    pub rows: Vec<String>,
    /// JSON document body.
    pub json: Value,
}

impl RunOutput {
    fn tabular(&self) -> bool {
        !self.header.is_empty()
    }
}

/// A named file ready to be written.
#[derive(Debug, Clone)]
pub struct Artifact {
    /// File name (no directory).
    pub name: String,
    /// Entire file body.
    pub content: String,
}

/// Execute one resolved command.
pub fn run_spec(spec: &CommandSpec) -> Result<RunOutput, SimError> {
    match spec {
        CommandSpec::Spectrum {
            params,
            axis,
            tesla,
            nuclear,
        } => {
            let field = MagneticField::along(*axis, *tesla)?;
            let ground = build_ground_hamiltonian(params, &field, *nuclear)?;
            let excited = build_excited_hamiltonian(params, &field, *nuclear)?;
            let gs = eigensystem(&ground)?;
            let es = eigensystem(&excited)?;
            let table = transition_table(&gs, &es, params)?;
            Ok(RunOutput {
                header: emit::TRANSITION_HEADER.into(),
                rows: emit::transition_rows(&table, None),
                json: serde_json::to_value(&table).expect("serializable"),
            })
        }
        CommandSpec::ZeemanMap {
            params,
            axis,
            b_max,
            steps,
        } => {
            let map = zeeman_map(params, *axis, *b_max, *steps)?;
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for (b, table) in &map {
                let b_text = fnum(*b);
                rows.extend(emit::transition_rows(table, Some(&b_text)));
                json_rows.push(json!({
                    "b_tesla": b,
                    "table": serde_json::to_value(table).expect("serializable"),
                }));
            }
            Ok(RunOutput {
                header: format!("b_tesla,{}", emit::TRANSITION_HEADER),
                rows,
                json: Value::Array(json_rows),
            })
        }
        CommandSpec::Rates {
            model,
            deltas,
            temps,
        } => {
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for delta in deltas {
                for temp in temps {
                    let pair = phonon::rate_pair(model, *delta, *temp)?;
                    let (gp, gm) = (pair.gamma_plus, pair.gamma_minus);
                    let t1 = phonon::orbital_t1(model, *delta, *temp)?;
                    let delta_hz = *delta / sivsim_core::constants::TWO_PI;
                    rows.push(emit::row(&[
                        fnum(delta_hz),
                        fnum(*temp),
                        fnum(gp),
                        fnum(gm),
                        fnum(t1),
                    ]));
                    json_rows.push(json!({
                        "delta_hz": delta_hz,
                        "temp_k": temp,
                        "gamma_plus": gp,
                        "gamma_minus": gm,
                        "t1_s": t1,
                    }));
                }
            }
            Ok(RunOutput {
                header: "delta_Hz,temp_K,gamma_plus,gamma_minus,t1_s".into(),
                rows,
                json: Value::Array(json_rows),
            })
        }
        CommandSpec::Protocol(p) => run_protocol(p),
        CommandSpec::Photophysics {
            p_pi,
            train,
            focus,
            nu,
            tau_fl,
        } => {
            let result = sivsim_core::photophysics::analyze(*p_pi, train, focus, *nu, *tau_fl)?;
            Ok(RunOutput {
                header: String::new(),
                rows: Vec::new(),
                json: emit::dipole_json(&result),
            })
        }
    }
}

fn protocol_json(variant: &str, result: Value) -> Value {
    json!({ "variant": variant, "result": result })
}

fn run_protocol(spec: &ProtocolSpec) -> Result<RunOutput, SimError> {
    let variant = spec.name();
    match spec {
        ProtocolSpec::OpticalPumping(cfg) => {
            let r = protocols::run_optical_pumping_t1(cfg)?;
            Ok(RunOutput {
                header: "delay_s,signal".into(),
                rows: emit::xy_rows(&r.delays, &r.signal),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::SpinT1(cfg) => {
            let r = protocols::run_spin_t1(cfg)?;
            Ok(RunOutput {
                header: "time_s,spin_projection".into(),
                rows: emit::xy_rows(&r.times, &r.spin_projection),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::Cpt {
            cfg,
            power_target_hz,
        } => {
            let mut cfg = cfg.clone();
            let calibrated = match power_target_hz {
                Some(target) => {
                    let rabi = cpt_power_for_isolated_broadening(&cfg, *target)?;
                    cfg.rabi = rabi;
                    Some(rabi)
                }
                None => None,
            };
            let r = protocols::run_cpt_scan(&cfg)?;
            let mut json = protocol_json(variant, serde_json::to_value(&r).expect("serializable"));
            if let Some(rabi) = calibrated {
                json.as_object_mut()
                    .expect("object")
                    .insert("calibrated_rabi_rad_per_s".into(), json!(rabi));
            }
            Ok(RunOutput {
                header: "detuning_Hz,fluorescence".into(),
                rows: emit::xy_rows(&r.detunings_hz, &r.fluorescence),
                json,
            })
        }
        ProtocolSpec::Odmr(cfg) => {
            let r = protocols::run_odmr_scan(cfg)?;
            Ok(RunOutput {
                header: "frequency_Hz,contrast".into(),
                rows: emit::xy_rows(&r.frequencies, &r.contrast),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::MwRabi { cfg, durations } => {
            let r = protocols::run_mw_rabi(cfg, durations)?;
            Ok(RunOutput {
                header: "duration_s,population".into(),
                rows: emit::xy_rows(&r.durations, &r.population),
                json: protocol_json(variant, emit::rabi_json(&r)),
            })
        }
        ProtocolSpec::MwRamsey(cfg) => {
            let r = protocols::run_mw_ramsey(cfg)?;
            Ok(RunOutput {
                header: "delay_s,signal".into(),
                rows: emit::xy_rows(&r.delays, &r.signal),
                json: protocol_json(variant, emit::ramsey_json(&r)),
            })
        }
        ProtocolSpec::OpticalRabi(cfg) => {
            let r = protocols::run_optical_rabi(cfg)?;
            Ok(RunOutput {
                header: "area_rad,excited_population".into(),
                rows: emit::xy_rows(&r.areas, &r.excited_population),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::OpticalRamsey(cfg) => {
            let r = protocols::run_optical_ramsey(cfg)?;
            Ok(RunOutput {
                header: "delay_s,signal".into(),
                rows: emit::xy_rows(&r.delays, &r.signal),
                json: protocol_json(variant, emit::ramsey_json(&r)),
            })
        }
        ProtocolSpec::RamanRabi(cfg) => {
            let r = protocols::run_raman_rabi(cfg)?;
            Ok(RunOutput {
                header: "time_s,transfer".into(),
                rows: emit::xy_rows(&r.times, &r.transfer),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::RamanRamsey(cfg) => {
            let r = protocols::run_raman_ramsey(cfg)?;
            Ok(RunOutput {
                header: "delay_s,transfer".into(),
                rows: emit::xy_rows(&r.delays, &r.transfer),
                json: protocol_json(variant, serde_json::to_value(&r).expect("serializable")),
            })
        }
        ProtocolSpec::Mollow(cfg) => {
            let r = protocols::run_mollow(cfg)?;
            Ok(RunOutput {
                header: emit::MOLLOW_HEADER.into(),
                rows: emit::mollow_rows(&r),
                json: protocol_json(variant, emit::mollow_json(&r)),
            })
        }
    }
}

/// SI scalar used for the `sweep_value` CSV column and the JSON value list.
fn sweep_value_si(raw: &crate::config::Raw) -> f64 {
    match raw {
        crate::config::Raw::Num(v) => *v,
        crate::config::Raw::Quantity(v, u) => v * u.factor,
        crate::config::Raw::Bool(b) => {
            if *b {
                1.0
            } else {
                0.0
            }
        }
        crate::config::Raw::Word(_) | crate::config::Raw::List(_) => f64::NAN,
    }
}

/// Run every sweep point across `jobs` worker threads; outputs are gathered
/// in input order regardless of completion order.
pub fn run_sweep(specs: &[CommandSpec], jobs: usize) -> Result<Vec<RunOutput>, SimError> {
    let n = specs.len();
    let slots: Mutex<Vec<Option<Result<RunOutput, SimError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = run_spec(&specs[i]);
                slots.lock().expect("sweep worker poisoned")[i] = Some(out);
            });
        }
    });
    let gathered = slots.into_inner().expect("sweep workers joined");
    let mut outputs = Vec::with_capacity(n);
    let mut first_err: Option<(usize, SimError)> = None;
    for (i, slot) in gathered.into_iter().enumerate() {
        match slot.expect("every index was claimed") {
            Ok(out) => outputs.push(out),
            Err(e) => {
                if first_err.as_ref().map(|(j, _)| i < *j).unwrap_or(true) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    match first_err {
        Some((_, e)) => Err(e),
        None => Ok(outputs),
    }
}

/// First eight hex characters of the SHA-256 of the result-determining
/// canonical text.
pub fn short_hash(hash_text: &str) -> String {
    let digest = Sha256::digest(hash_text.as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

/// Assemble the artifact list for one validated run.
pub fn artifacts(run: &RunConfig, jobs: usize) -> Result<Vec<Artifact>, SimError> {
    let hash = short_hash(&crate::config::hash_input(&run.raw));
    let base = format!("{}_{hash}", run.stem);

    let (header, rows, json) = match &run.sweep {
        None => {
            let out = run_spec(&run.spec)?;
            (out.header, out.rows, out.json)
        }
        Some((def, specs)) => {
            let outputs = run_sweep(specs, jobs)?;
            let mut header = String::new();
            let mut rows = Vec::new();
            let mut runs = Vec::new();
            for (raw, out) in def.values.iter().zip(outputs) {
                if out.tabular() {
                    if header.is_empty() {
                        header = format!("sweep_value,{}", out.header);
                    }
                    let v = fnum(sweep_value_si(raw));
                    rows.extend(out.rows.into_iter().map(|r| format!("{v},{r}")));
                }
                runs.push(out.json);
            }
            let json = json!({
                "key": def.key,
                "values": def.values.iter().map(|v| v.format()).collect::<Vec<_>>(),
                "runs": runs,
            });
            (header, rows, json)
        }
    };

    let mut artifacts = Vec::new();
    let tabular = !header.is_empty();
    let protocol = matches!(run.spec, CommandSpec::Protocol(_));
    let want_csv = tabular && run.format == Format::Csv;
    // Protocols always leave a JSON summary (fits, extracted scales) beside
    // any CSV table; non-tabular commands are JSON-only by construction.
    let want_json = !want_csv || protocol;
    if want_csv {
        artifacts.push(Artifact {
            name: format!("{base}.csv"),
            content: emit::csv_document(&header, &rows),
        });
    }
    if want_json {
        artifacts.push(Artifact {
            name: format!("{base}.json"),
            content: emit::json_document(&json),
        });
    }
    Ok(artifacts)
}
