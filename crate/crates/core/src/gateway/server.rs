//! Realtime session server over WebSocket.
//!
//! The engine runs on one task and owns all session state. Connection tasks
//! only push parsed input into a single ordered channel and forward outbound
//! messages from a broadcast buffer; a console that falls behind loses its
//! oldest messages and never slows the engine.

use std::future::Future;
use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::Message;

use super::wire::{encode, messages_for, Inbound, InboundState, ToConsole};
use crate::runtime::{Engine, Input, Snapshot};
use crate::telemetry::summarize;
use crate::time::Millis;

pub const BIND_ENV: &str = "REHABOT_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8765";

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Messages buffered per connection before the oldest are dropped.
    pub outbound_capacity: usize,
    pub cue_interval: Duration,
    /// Virtual milliseconds per wall millisecond; 1 is realtime.
    pub time_scale: u32,
    /// How long to keep serving after the session ends.
    pub linger: Duration,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            outbound_capacity: 256,
            cue_interval: Duration::from_millis(125),
            time_scale: 1,
            linger: Duration::from_millis(500),
        }
    }
}

pub struct Server {
    listener: TcpListener,
    options: ServerOptions,
}

/// Fields that make a state update worth sending.
fn view_key(s: &Snapshot) -> impl PartialEq {
    (
        s.state.clone(),
        s.cue,
        s.awaiting,
        s.last_rep,
        s.ended,
        s.robot.posture,
        s.robot.fallen,
    )
}

impl Server {
    pub async fn bind(addr: &str, options: ServerOptions) -> std::io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr).await?,
            options,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Runs `engine` against the wall clock until the session ends or
    /// `shutdown` resolves, serving consoles meanwhile.
    pub async fn run(self, mut engine: Engine, shutdown: impl Future<Output = ()>) -> Engine {
        let Server { listener, options } = self;
        let (input_tx, mut input_rx) = mpsc::unbounded_channel::<Input>();
        let (out_tx, _) = broadcast::channel::<ToConsole>(options.outbound_capacity.max(1));
        let (snap_tx, snap_rx) = watch::channel(engine.snapshot());

        let accept = tokio::spawn({
            let out_tx = out_tx.clone();
            async move {
                loop {
                    match listener.accept().await {
                        Ok((stream, peer)) => {
                            log::info!("console connected from {peer}");
                            tokio::spawn(connection(stream, input_tx.clone(), out_tx.clone(), snap_rx.clone()));
                        }
                        Err(e) => log::warn!("accept failed: {e}"),
                    }
                }
            }
        });

        let scale = u64::from(options.time_scale.max(1));
        let start = Instant::now();
        let vnow = move || Millis(start.elapsed().as_millis() as u64 * scale);
        let wall = move |t: Millis| start + Duration::from_millis(t.0 / scale);
        let mut cue_tick = tokio::time::interval(options.cue_interval);
        let mut last_key = None;
        tokio::pin!(shutdown);
        let mut shutting_down = false;

        loop {
            engine.run_until(vnow());
            for m in messages_for(&engine.drain_outbox()) {
                let _ = out_tx.send(m);
            }
            let snap = engine.snapshot();
            let key = view_key(&snap);
            if last_key.as_ref() != Some(&key) {
                last_key = Some(key);
                let _ = snap_tx.send(snap.clone());
                let _ = out_tx.send(ToConsole::StateUpdate { snapshot: snap });
            }
            if engine.is_finished() {
                break;
            }
            let wake = engine
                .next_event_time()
                .map(wall)
                .unwrap_or_else(|| Instant::now() + Duration::from_secs(3600));
            tokio::select! {
                Some(input) = input_rx.recv() => engine.submit(vnow(), input),
                _ = tokio::time::sleep_until(wake) => {}
                _ = cue_tick.tick() => {
                    let _ = out_tx.send(ToConsole::CueFrame { frame: engine.cue_frame(vnow()) });
                }
                _ = &mut shutdown, if !shutting_down => {
                    shutting_down = true;
                    engine.submit(vnow(), Input::Shutdown);
                }
            }
        }

        match summarize(engine.events()) {
            Ok(summary) => {
                let _ = out_tx.send(ToConsole::SessionSummary { summary });
            }
            Err(e) => log::warn!("could not summarise session: {e}"),
        }
        tokio::time::sleep(options.linger).await;
        accept.abort();
        engine
    }
}

async fn connection(
    stream: TcpStream,
    input_tx: mpsc::UnboundedSender<Input>,
    out_tx: broadcast::Sender<ToConsole>,
    snapshot: watch::Receiver<Snapshot>,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let mut inbound = InboundState::default();
    let mut out_rx = out_tx.subscribe();
    let mut seq = 0u64;
    let mut send = |m: &ToConsole| {
        let text = encode(seq, m);
        seq += 1;
        Message::text(text)
    };

    loop {
        tokio::select! {
            frame = source.next() => {
                let text = match frame {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = match inbound.accept(&text) {
                    Inbound::Joined => {
                        // Start increments after the snapshot so none predate it.
                        out_rx = out_tx.subscribe();
                        let snap = snapshot.borrow().clone();
                        send(&ToConsole::StateUpdate { snapshot: snap })
                    }
                    Inbound::Input(input) => {
                        if input_tx.send(input).is_err() {
                            return;
                        }
                        continue;
                    }
                    Inbound::Reply(reason) => send(&ToConsole::Error { reason }),
                    Inbound::Refuse(reason) => {
                        let _ = sink.send(send(&ToConsole::Refused { reason })).await;
                        let _ = sink.close().await;
                        return;
                    }
                };
                if sink.send(reply).await.is_err() {
                    return;
                }
            }
            msg = out_rx.recv(), if inbound.greeted() => {
                let m = match msg {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        log::debug!("console lagging, dropped {n} messages");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => {
                        let _ = sink.close().await;
                        return;
                    }
                };
                if sink.send(send(&m)).await.is_err() {
                    return;
                }
            }
        }
    }
}
