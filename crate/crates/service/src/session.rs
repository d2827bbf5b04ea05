//! One optimization session and its append-only event log.
//!
//! The log (`<data_dir>/<id>/events.jsonl`) holds one JSON object per line:
//! `created` with the run config, then alternating `ask` (token and point)
//! and `tell` (token and the values as received). Replaying it through the
//! driver rebuilds the session without refitting any surrogate.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::http::StatusCode;
use mixbo::design_space::MixedPoint;
use mixbo::driver::{write_history, EvalStatus, Phase, Run, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::wire::{self, AskResponse, Links, ResultsResponse, StatusResponse, TellRequest, TellResponse, VERSION};

pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        version: u32,
        at_ms: u64,
        id: String,
        config: RunConfig,
    },
    Ask {
        at_ms: u64,
        token: String,
        point: MixedPoint,
    },
    Tell {
        at_ms: u64,
        token: String,
        f: Vec<Option<f64>>,
        g: Vec<Option<f64>>,
        status: EvalStatus,
    },
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn values(v: &[Option<f64>]) -> Vec<f64> {
    v.iter().map(|x| x.unwrap_or(f64::NAN)).collect()
}

pub struct Session {
    id: String,
    run: Run,
    token: Option<String>,
    created_ms: u64,
    updated_ms: u64,
    log_path: PathBuf,
    results: Option<(usize, ResultsResponse)>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("evaluations", &self.run.history().len())
            .field("pending", &self.token.is_some())
            .finish()
    }
}

impl Session {
    /// Creates the session directory and its log.
    pub fn create(data_dir: &Path, id: String, config: RunConfig) -> Result<Self, ApiError> {
        let run = Run::new(config)?;
        let dir = data_dir.join(&id);
        fs::create_dir_all(&dir).map_err(|e| ApiError::internal(format!("creating {}: {e}", dir.display())))?;
        let now = now_ms();
        let session = Self {
            id: id.clone(),
            log_path: dir.join(EVENTS_FILE),
            created_ms: now,
            updated_ms: now,
            token: None,
            results: None,
            run,
        };
        session.append(&Event::Created {
            version: VERSION,
            at_ms: now,
            id,
            config: session.run.config().clone(),
        })?;
        Ok(session)
    }

    /// Replays `dir/events.jsonl`. A torn final line (crash mid-write) is
    /// dropped; any other unreadable line is an error.
    pub fn load(dir: &Path) -> Result<Self, String> {
        let log_path = dir.join(EVENTS_FILE);
        let file = File::open(&log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: {e}", log_path.display()))?;
        let mut session: Option<Session> = None;
        let n = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(e) if i + 1 == n => {
                    log::warn!("{}: dropping torn last line: {e}", log_path.display());
                    break;
                }
                Err(e) => return Err(format!("{} line {}: {e}", log_path.display(), i + 1)),
            };
            let bad = |what: String| format!("{} line {}: {what}", log_path.display(), i + 1);
            match (event, session.as_mut()) {
                (Event::Created { id, config, at_ms, .. }, None) => {
                    let run = Run::new(config).map_err(|e| bad(e.to_string()))?;
                    session = Some(Session {
                        id,
                        run,
                        token: None,
                        created_ms: at_ms,
                        updated_ms: at_ms,
                        log_path: log_path.clone(),
                        results: None,
                    });
                }
                (Event::Ask { at_ms, token, point }, Some(s)) => {
                    s.run.restore_pending(point).map_err(|e| bad(e.to_string()))?;
                    s.token = Some(token);
                    s.updated_ms = at_ms;
                }
                (Event::Tell { at_ms, token, f, g, status }, Some(s)) => {
                    if s.token.as_deref() != Some(token.as_str()) {
                        return Err(bad("tell without matching ask".into()));
                    }
                    let point = s.run.pending().cloned().ok_or_else(|| bad("tell without ask".into()))?;
                    s.run.tell(&point, values(&f), values(&g), status).map_err(|e| bad(e.to_string()))?;
                    s.token = None;
                    s.updated_ms = at_ms;
                }
                (_, _) => return Err(bad("event out of order".into())),
            }
        }
        session.ok_or_else(|| format!("{}: no created event", log_path.display()))
    }

    fn append(&self, event: &Event) -> Result<(), ApiError> {
        let io = |e: std::io::Error| ApiError::internal(format!("writing {}: {e}", self.log_path.display()));
        let mut line = serde_json::to_string(event).map_err(|e| ApiError::internal(e.to_string()))?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.log_path).map_err(io)?;
        f.write_all(line.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn run(&self) -> &Run {
        &self.run
    }

    pub fn links(&self) -> Links {
        Links::for_session(&self.id)
    }

    pub fn ask(&mut self) -> Result<AskResponse, ApiError> {
        if self.run.phase() == Phase::Done {
            return Err(ApiError::from(mixbo::driver::DriverError::BudgetExhausted).with_links(self.links()));
        }
        let point = self.run.ask()?;
        let token = uuid::Uuid::new_v4().simple().to_string();
        let at_ms = now_ms();
        self.append(&Event::Ask {
            at_ms,
            token: token.clone(),
            point: point.clone(),
        })?;
        self.token = Some(token.clone());
        self.updated_ms = at_ms;
        let space = &self.run.config().space;
        Ok(AskResponse {
            version: VERSION,
            token,
            evaluation: self.run.history().len(),
            origin: if self.run.phase() == Phase::Doe {
                mixbo::driver::Origin::Doe
            } else {
                mixbo::driver::Origin::Infill
            },
            point: wire::named_values(space, &point),
            active: wire::activity(space, &point),
        })
    }

    pub fn tell(&mut self, req: TellRequest) -> Result<TellResponse, ApiError> {
        let Some(token) = &self.token else {
            return Err(mixbo::driver::DriverError::NoPendingAsk.into());
        };
        if *token != req.token {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "token_mismatch",
                "token does not match the pending ask",
            ));
        }
        let point = self.run.pending().cloned().expect("token implies a pending ask");
        let status = self.run.tell(&point, values(&req.f), values(&req.g), req.status)?;
        let at_ms = now_ms();
        let appended = self.append(&Event::Tell {
            at_ms,
            token: req.token,
            f: req.f,
            g: req.g,
            status: req.status,
        });
        self.token = None;
        self.updated_ms = at_ms;
        appended?;
        Ok(TellResponse {
            version: VERSION,
            evaluation: self.run.history().len() - 1,
            status,
            phase: self.run.phase(),
            evaluations: self.run.history().len(),
            budget: self.run.config().budget,
        })
    }

    pub fn status(&self) -> StatusResponse {
        let h = self.run.history();
        let cfg = self.run.config();
        StatusResponse {
            version: VERSION,
            id: self.id.clone(),
            phase: self.run.phase(),
            evaluations: h.len(),
            failed: h.iter().filter(|r| r.status == EvalStatus::Failed).count(),
            feasible: h.iter().filter(|r| r.feasible).count(),
            doe_size: cfg.doe_size,
            budget: cfg.budget,
            pending_token: self.token.clone(),
            relaxed_dimension: cfg.space.relaxed_dimension(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
            links: self.links(),
        }
    }

    /// Finalized fronts; unfinished sessions need `force`. Cached per
    /// history length, so repeated calls return identical bodies.
    pub fn results(&mut self, force: bool) -> Result<ResultsResponse, ApiError> {
        let phase = self.run.phase();
        if phase != Phase::Done && !force {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_finished",
                "session has not reached its budget; use ?force=true",
            )
            .with_links(self.links()));
        }
        let n = self.run.history().len();
        let cached = self.results.as_ref().filter(|(k, _)| *k == n).map(|(_, r)| r.clone());
        let mut body = match cached {
            Some(r) => r,
            None => {
                let out = self.run.finalize(&self.run.config().nsga2);
                let r = wire::results(self.run.config(), phase, n, false, &out);
                self.results = Some((n, r.clone()));
                r
            }
        };
        body.forced = phase != Phase::Done;
        Ok(body)
    }

    pub fn history_csv(&self) -> Result<String, ApiError> {
        let mut buf = Vec::new();
        write_history(&self.run, &mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| ApiError::internal(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixbo::bench::schaffer;

    fn config() -> RunConfig {
        RunConfig::new(schaffer().space, 2, 0, 3, 5)
    }

    #[test]
    fn load_replays_asks_and_tells() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Session::create(dir.path(), "abc".into(), config()).unwrap();
        for _ in 0..2 {
            let a = s.ask().unwrap();
            let x = a.point["x"].as_f64().unwrap();
            s.tell(TellRequest {
                version: VERSION,
                token: a.token,
                f: vec![Some(x * x), Some((x - 2.0).powi(2))],
                g: vec![],
                status: EvalStatus::Ok,
            })
            .unwrap();
        }
        let pending = s.ask().unwrap();
        let back = Session::load(&dir.path().join("abc")).unwrap();
        assert_eq!(back.run().history(), s.run().history());
        assert_eq!(back.run().pending(), s.run().pending());
        assert_eq!(back.status().pending_token, Some(pending.token));
    }

    #[test]
    fn load_rejects_out_of_order_logs() {
        let dir = tempfile::tempdir().unwrap();
        let sdir = dir.path().join("s");
        fs::create_dir_all(&sdir).unwrap();
        let tell = r#"{"event":"tell","at_ms":1,"token":"t","f":[1.0,2.0],"g":[],"status":"ok"}"#;
        fs::write(sdir.join(EVENTS_FILE), format!("{tell}\n{tell}\n")).unwrap();
        assert!(Session::load(&sdir).unwrap_err().contains("out of order"));
        fs::write(sdir.join(EVENTS_FILE), "").unwrap();
        assert!(Session::load(&sdir).unwrap_err().contains("no created event"));
    }
}
