//! TCP transport: one thread and one isolated [`Session`] per connection.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::harness::live::protocol::{decode_client, encode, FrameBuffer};
use crate::harness::live::session::{Input, LiveParams, Session};

pub struct Server {
    listener: TcpListener,
    cfg: ScenarioConfig,
    params: LiveParams,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, cfg: ScenarioConfig, params: LiveParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            cfg,
            params,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let cfg = self.cfg.clone();
            let params = self.params;
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_connection(stream, cfg, params) {
                    log::info!("session {peer:?} ended: {e}");
                }
            });
        }
        Ok(())
    }
}

/// Drives one session over `stream` until the client leaves or the session
/// closes.
pub fn handle_connection(mut stream: TcpStream, cfg: ScenarioConfig, params: LiveParams) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs_f64(params.idle_timeout)))?;
    stream.set_nodelay(true)?;
    let mut session = Session::new(cfg, params)?;
    let mut frames = FrameBuffer::default();
    let mut buf = [0u8; 8192];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(n) => n,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                send(&mut stream, &mut session, Input::Idle)?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        frames.extend(&buf[..n]);
        loop {
            let body = match frames.next_frame() {
                Ok(Some(b)) => b,
                Ok(None) => break,
                Err(e) => {
                    let msg = session.reject(e.to_string());
                    stream.write_all(&encode(&msg)?)?;
                    return Ok(());
                }
            };
            let input = match decode_client(&body) {
                Ok(m) => Input::Message(m),
                Err(e) => {
                    let msg = session.reject(e.to_string());
                    stream.write_all(&encode(&msg)?)?;
                    return Ok(());
                }
            };
            send(&mut stream, &mut session, input)?;
            if session.is_closed() {
                return Ok(());
            }
        }
    }
}

fn send(stream: &mut TcpStream, session: &mut Session, input: Input) -> Result<()> {
    let mut bytes = Vec::new();
    for msg in session.handle(input) {
        bytes.extend(encode(&msg)?);
    }
    if !bytes.is_empty() {
        stream.write_all(&bytes)?;
    }
    Ok(())
}
