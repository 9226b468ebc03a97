//! One live session as a pure state machine. The server feeds it decoded
//! client messages and idle timeouts; replaying the same inputs through a
//! fresh session reproduces the server's output byte for byte.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::live::protocol::{encode, ClientMsg, Command, ServerMsg, StateFrame, PROTOCOL_VERSION};
use crate::sim::log::TickRecord;
use crate::sim::world::{ExternalInput, World};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveParams {
    /// Pull per metre of cursor offset from the end-effector while pressed
    /// within the contact radius.
    pub pull_gain: f64,
    /// A state frame goes out every this many ticks.
    pub state_every: u64,
    /// Client silence that pauses the session clock, s.
    pub idle_timeout: f64,
    /// Larger gaps between obs timestamps re-anchor the clock instead of
    /// being simulated.
    pub max_catch_up: u64,
}

impl Default for LiveParams {
    fn default() -> Self {
        Self {
            pull_gain: 80.0,
            state_every: 6,
            idle_timeout: 1.0,
            max_catch_up: 30,
        }
    }
}

impl LiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pull_gain >= 0.0 && self.pull_gain.is_finite()) {
            return Err(Error::config("live.pull_gain", "must be finite and >= 0"));
        }
        if self.state_every == 0 {
            return Err(Error::config("live.state_every", "must be >= 1"));
        }
        if !(self.idle_timeout > 0.0) {
            return Err(Error::config("live.idle_timeout", "must be > 0"));
        }
        if self.max_catch_up == 0 {
            return Err(Error::config("live.max_catch_up", "must be >= 1"));
        }
        Ok(())
    }
}

/// What the transport hands to a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum Input {
    Message(ClientMsg),
    /// No input for `idle_timeout` seconds.
    Idle,
}

#[derive(Debug)]
pub struct Session {
    cfg: ScenarioConfig,
    params: LiveParams,
    world: World,
    greeted: bool,
    closed: bool,
    /// Client time minus simulation time; `None` until the next obs anchors it.
    origin: Option<f64>,
    last_obs_t: Option<f64>,
    paused: bool,
    stale: bool,
}

impl Session {
    pub fn new(cfg: ScenarioConfig, params: LiveParams) -> Result<Self> {
        params.validate()?;
        let world = Self::fresh_world(&cfg)?;
        Ok(Self {
            cfg,
            params,
            world,
            greeted: false,
            closed: false,
            origin: None,
            last_obs_t: None,
            paused: false,
            stale: false,
        })
    }

    fn fresh_world(cfg: &ScenarioConfig) -> Result<World> {
        let mut w = World::new(cfg.clone())?;
        w.set_keep_records(false);
        Ok(w)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn handle(&mut self, input: Input) -> Vec<ServerMsg> {
        if self.closed {
            return Vec::new();
        }
        let mut out = Vec::new();
        let res = match input {
            Input::Idle => {
                self.on_idle(&mut out);
                Ok(())
            }
            Input::Message(msg) => self.on_message(msg, &mut out),
        };
        if let Err(e) = res {
            out.push(self.fatal(e.to_string()));
        }
        out
    }

    fn fatal(&mut self, message: String) -> ServerMsg {
        self.closed = true;
        ServerMsg::Error { message, fatal: true }
    }

    /// Fatal error for input that could not even be decoded.
    pub fn reject(&mut self, message: String) -> ServerMsg {
        self.fatal(message)
    }

    fn event(&self, tag: &str) -> ServerMsg {
        ServerMsg::Event {
            tag: tag.into(),
            t: self.world.t(),
        }
    }

    fn on_idle(&mut self, out: &mut Vec<ServerMsg>) {
        if self.greeted && self.origin.is_some() && !self.stale && !self.paused && !self.world.is_done() {
            self.stale = true;
            self.origin = None;
            out.push(self.event("client_stale"));
        }
    }

    fn on_message(&mut self, msg: ClientMsg, out: &mut Vec<ServerMsg>) -> Result<()> {
        if !self.greeted {
            return match msg {
                ClientMsg::Hello { schema_version } if schema_version == PROTOCOL_VERSION => {
                    self.greeted = true;
                    out.push(ServerMsg::Hello {
                        schema_version: PROTOCOL_VERSION,
                        config: serde_json::to_value(&self.cfg)?,
                    });
                    Ok(())
                }
                ClientMsg::Hello { schema_version } => Err(Error::Protocol(format!(
                    "schema version {schema_version} not supported, server speaks {PROTOCOL_VERSION}"
                ))),
                _ => Err(Error::Protocol("expected hello".into())),
            };
        }
        match msg {
            ClientMsg::Hello { .. } => Err(Error::Protocol("duplicate hello".into())),
            ClientMsg::Obs { t, x, y, pressed } => self.on_obs(t, Vec2::new(x, y), pressed, out),
            ClientMsg::Cmd(Command::Reset) => {
                self.world = Self::fresh_world(&self.cfg)?;
                self.origin = None;
                self.last_obs_t = None;
                self.stale = false;
                out.push(self.event("reset"));
                Ok(())
            }
            ClientMsg::Cmd(Command::Pause { paused }) => {
                if paused != self.paused {
                    self.paused = paused;
                    self.origin = None;
                    out.push(self.event(if paused { "paused" } else { "resumed" }));
                }
                Ok(())
            }
            ClientMsg::Cmd(Command::SetParam { name, value }) => {
                if self.world.tick() > 0 && !self.world.is_done() {
                    out.push(ServerMsg::Error {
                        message: "set_param is only accepted between trials".into(),
                        fatal: false,
                    });
                    return Ok(());
                }
                match with_param(&self.cfg, &name, value).and_then(|cfg| Ok((Self::fresh_world(&cfg)?, cfg))) {
                    Ok((world, cfg)) => {
                        self.cfg = cfg;
                        self.world = world;
                        self.origin = None;
                        self.last_obs_t = None;
                        out.push(self.event(&format!("set_param:{name}")));
                    }
                    Err(e) => out.push(ServerMsg::Error {
                        message: e.to_string(),
                        fatal: false,
                    }),
                }
                Ok(())
            }
        }
    }

    fn on_obs(&mut self, t: f64, cursor: Vec2, pressed: bool, out: &mut Vec<ServerMsg>) -> Result<()> {
        if self.last_obs_t.is_some_and(|last| t < last) {
            return Err(Error::Protocol(format!("obs time {t} went backwards")));
        }
        self.last_obs_t = Some(t);
        if self.paused || self.world.is_done() {
            return Ok(());
        }
        if self.stale {
            self.stale = false;
            out.push(self.event("client_resumed"));
        }
        let origin = *self.origin.get_or_insert(t - self.world.t());
        let dt = self.cfg.dt;
        let target = t - origin;
        let mut n = 0;
        while (self.world.tick() + 1) as f64 * dt <= target + 1e-9 && !self.world.is_done() {
            if n == self.params.max_catch_up {
                self.origin = Some(t - self.world.t());
                break;
            }
            let ee = self.world.robot.ee;
            let offset = cursor - ee;
            let pull = if pressed && offset.norm() < self.cfg.robot.admittance.contact_radius {
                offset * self.params.pull_gain
            } else {
                Vec2::zeros()
            };
            let rec = self.world.step_external(ExternalInput { wrist: cursor, pull })?;
            emit_tick(rec, self.params.state_every, out);
            n += 1;
        }
        Ok(())
    }
}

fn emit_tick(rec: &TickRecord, state_every: u64, out: &mut Vec<ServerMsg>) {
    for tag in &rec.events {
        out.push(ServerMsg::Event {
            tag: tag.clone(),
            t: rec.t,
        });
    }
    if rec.tick.is_multiple_of(state_every) {
        out.push(ServerMsg::State(StateFrame {
            t: rec.t,
            mode: rec.mode,
            post1: rec.low.clone(),
            post2: rec.high.clone(),
            ee: [rec.ee.x, rec.ee.y],
            wrist: [rec.wrist.x, rec.wrist.y],
            contact: rec.contact,
            queues: rec.queues.clone(),
            assemblies: rec.assemblies,
        }));
    }
}

/// Returns a copy of `cfg` with the dotted-path field replaced. The field
/// must already exist and keep its JSON kind.
pub fn with_param(cfg: &ScenarioConfig, name: &str, value: serde_json::Value) -> Result<ScenarioConfig> {
    let mut root = serde_json::to_value(cfg)?;
    let mut slot = &mut root;
    for key in name.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| Error::config(name, "no such parameter"))?;
    }
    let same_kind = matches!(
        (&*slot, &value),
        (serde_json::Value::Number(_), serde_json::Value::Number(_))
            | (serde_json::Value::Bool(_), serde_json::Value::Bool(_))
            | (serde_json::Value::String(_), serde_json::Value::String(_))
    );
    if !same_kind {
        return Err(Error::config(name, "only scalar fields can be set, with a value of the same kind"));
    }
    *slot = value;
    let cfg: ScenarioConfig = serde_json::from_value(root).map_err(|e| Error::config(name, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `inputs` through a fresh session and returns the encoded frames the
/// server would have written, stopping where the server would close.
pub fn replay(cfg: &ScenarioConfig, params: LiveParams, inputs: &[Input]) -> Result<Vec<u8>> {
    let mut s = Session::new(cfg.clone(), params)?;
    let mut bytes = Vec::new();
    for input in inputs {
        for msg in s.handle(input.clone()) {
            bytes.extend(encode(&msg)?);
        }
        if s.is_closed() {
            break;
        }
    }
    Ok(bytes)
}
