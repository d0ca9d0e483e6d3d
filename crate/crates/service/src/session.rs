//! One interactive model run: a worker thread stepping the model, staged
//! parameter changes, and tick notifications for streams.

use std::sync::{Arc, Condvar, Mutex, MutexGuard, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use abm::gallery::{self, GalleryModel};
use abm::probe::PlotSpec;
use abm::{Error, Model, PropTable, Result};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use crate::wire::{frame_message, FrameMessage, SessionInfo};

/// Latest state announced to streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Progress {
    pub epoch: u64,
    pub tick: u64,
    pub closed: bool,
}

/// The model together with the epoch it belongs to.
pub struct Live {
    pub model: Model,
    pub epoch: u64,
    pub plots: Vec<PlotSpec>,
}

/// Lifecycle state of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Initialised, not run since the last reset.
    Idle,
    Running,
    Paused,
    /// The last frame budget is used up, or a step failed.
    Finished,
}

struct Control {
    staged: PropTable,
    status: Status,
    frames_left: u64,
    epoch: u64,
    shutdown: bool,
    last_error: Option<String>,
}

pub struct Session {
    pub id: u64,
    pub entry: &'static dyn GalleryModel,
    seed: u64,
    live: RwLock<Live>,
    ctl: Mutex<Control>,
    wake: Condvar,
    progress: watch::Sender<Progress>,
    step_delay: Duration,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Session {
    /// Builds and initialises the model and starts the (idle) worker.
    pub fn start(
        id: u64,
        entry: &'static dyn GalleryModel,
        seed: u64,
        overrides: &serde_json::Map<String, serde_json::Value>,
        step_delay: Duration,
    ) -> Result<(Arc<Session>, JoinHandle<()>)> {
        let overrides = gallery::params_from_json(entry, overrides)?;
        let params = gallery::resolve_params(entry, &overrides, seed)?;
        let model = gallery::launch(entry, &params)?;
        let (progress, _) = watch::channel(Progress {
            epoch: 0,
            tick: 0,
            closed: false,
        });
        let session = Arc::new(Session {
            id,
            entry,
            seed: params.int("seed")? as u64,
            live: RwLock::new(Live {
                plots: entry.plots(&params),
                model,
                epoch: 0,
            }),
            ctl: Mutex::new(Control {
                staged: params,
                status: Status::Idle,
                frames_left: 0,
                epoch: 0,
                shutdown: false,
                last_error: None,
            }),
            wake: Condvar::new(),
            progress,
            step_delay,
        });
        let worker = {
            let s = Arc::clone(&session);
            std::thread::Builder::new()
                .name(format!("session-{id}"))
                .spawn(move || s.work())
                .map_err(Error::Io)?
        };
        Ok((session, worker))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subscribe(&self) -> watch::Receiver<Progress> {
        self.progress.subscribe()
    }

    pub fn live(&self) -> std::sync::RwLockReadGuard<'_, Live> {
        self.live.read().unwrap_or_else(|p| p.into_inner())
    }

    fn live_mut(&self) -> std::sync::RwLockWriteGuard<'_, Live> {
        self.live.write().unwrap_or_else(|p| p.into_inner())
    }

    fn structural(&self, key: &str) -> bool {
        self.entry.params().iter().any(|d| d.key == key && d.structural)
    }

    fn work(&self) {
        loop {
            let mut ctl = lock(&self.ctl);
            while !ctl.shutdown && !(ctl.status == Status::Running && ctl.frames_left > 0) {
                ctl = self.wake.wait(ctl).unwrap_or_else(|p| p.into_inner());
            }
            if ctl.shutdown {
                return;
            }
            let tick = {
                let mut live = self.live_mut();
                for (k, v) in ctl.staged.iter() {
                    if !self.structural(k) {
                        let _ = live.model.parameters_mut().set(k, v.clone());
                    }
                }
                let entry = self.entry;
                match live.model.step(|m| entry.step(m)) {
                    Ok(()) => Some(live.model.tick()),
                    Err(e) => {
                        ctl.last_error = Some(e.to_string());
                        None
                    }
                }
            };
            match tick {
                Some(tick) => {
                    ctl.frames_left -= 1;
                    if ctl.frames_left == 0 {
                        ctl.status = Status::Finished;
                    }
                    self.progress.send_replace(Progress {
                        epoch: ctl.epoch,
                        tick,
                        closed: false,
                    });
                }
                None => {
                    ctl.status = Status::Finished;
                    ctl.frames_left = 0;
                }
            }
            drop(ctl);
            if !self.step_delay.is_zero() {
                std::thread::sleep(self.step_delay);
            }
        }
    }

    /// Steps up to `frames` times from the current tick (the model's frame
    /// budget when `None`). Rejected while already running.
    pub fn run(&self, frames: Option<u64>) -> Result<()> {
        let mut ctl = lock(&self.ctl);
        if ctl.status == Status::Running {
            return Err(Error::InvalidArgument("session is already running".into()));
        }
        let frames = frames.unwrap_or_else(|| self.entry.default_frames());
        if frames == 0 {
            return Err(Error::InvalidArgument("frames must be at least 1".into()));
        }
        ctl.frames_left = frames;
        ctl.status = Status::Running;
        ctl.last_error = None;
        self.wake.notify_all();
        Ok(())
    }

    /// Halts between steps; the remaining budget is kept for inspection.
    pub fn pause(&self) {
        let mut ctl = lock(&self.ctl);
        if ctl.status == Status::Running {
            ctl.status = Status::Paused;
        }
    }

    /// Rebuilds from the staged parameters with the session seed, clearing
    /// tapes; tick returns to 0 under a new epoch.
    pub fn reset(&self) -> Result<()> {
        let mut ctl = lock(&self.ctl);
        let model = gallery::launch(self.entry, &ctl.staged)?;
        ctl.status = Status::Idle;
        ctl.frames_left = 0;
        ctl.epoch += 1;
        ctl.last_error = None;
        {
            let mut live = self.live_mut();
            live.plots = self.entry.plots(&ctl.staged);
            live.model = model;
            live.epoch = ctl.epoch;
        }
        self.progress.send_replace(Progress {
            epoch: ctl.epoch,
            tick: 0,
            closed: false,
        });
        Ok(())
    }

    /// Validates and stages parameter changes, all or nothing. Slider-backed
    /// values must lie in the slider range and are snapped to its grid.
    pub fn set_params(&self, values: &serde_json::Map<String, serde_json::Value>) -> Result<PropTable> {
        let mut ctl = lock(&self.ctl);
        let mut staged = ctl.staged.clone();
        let mut applied = PropTable::new();
        let controls = self.entry.controls();
        for (k, v) in values {
            if k == "seed" {
                return Err(Error::InvalidArgument("the seed is fixed for the lifetime of a session".into()));
            }
            let mut v = gallery::param_from_json(self.entry, k, v)?;
            if let Some(c) = controls.iter().find(|c| &c.key == k) {
                let x = v.as_real().expect("slider parameters are numeric");
                v = c.snap(x)?;
            }
            staged.set(k, v.clone())?;
            applied.set(k, v)?;
        }
        self.entry.validate(&staged)?;
        ctl.staged = staged;
        Ok(applied)
    }

    pub fn info(&self) -> SessionInfo {
        let ctl = lock(&self.ctl);
        let live = self.live();
        let params = live.model.parameters().clone();
        let pending_reset = ctl
            .staged
            .iter()
            .filter(|(k, v)| self.structural(k) && params.get(k) != Some(v))
            .map(|(k, _)| k.to_string())
            .collect();
        SessionInfo {
            id: self.id,
            model: self.entry.name().to_string(),
            seed: self.seed,
            epoch: live.epoch,
            tick: live.model.tick(),
            status: ctl.status,
            frames_left: ctl.frames_left,
            params,
            staged: ctl.staged.clone(),
            pending_reset,
            controls: self.entry.controls(),
            plots: live.plots.iter().map(|p| p.label.clone()).collect(),
            last_error: ctl.last_error.clone(),
        }
    }

    /// Message for `tick` of the current epoch, or `None` when the epoch
    /// moved on or the tick is not recorded yet.
    pub fn message(&self, epoch: u64, tick: u64) -> Result<Option<FrameMessage>> {
        let live = self.live();
        if live.epoch != epoch || tick > live.model.tick() {
            return Ok(None);
        }
        frame_message(&live.model, &live.plots, epoch, tick).map(Some)
    }

    /// Stops the worker and ends all streams.
    pub fn close(&self) {
        let mut ctl = lock(&self.ctl);
        ctl.shutdown = true;
        self.wake.notify_all();
        let p = *self.progress.borrow();
        self.progress.send_replace(Progress { closed: true, ..p });
    }
}
