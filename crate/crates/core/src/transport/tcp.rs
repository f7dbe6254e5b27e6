//! The same frames over loopback TCP: one listener per node, one stream per
//! directed channel, a reader thread per accepted stream.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::frame::Frame;
use super::message::ProtocolMessage;
use super::transcript::Transcript;
use super::{Delivery, Network, Receipt};
use crate::error::{Error, Result};

type Inbound = (String, String, Result<Frame>);

struct Endpoint {
    addr: SocketAddr,
    closed: Arc<AtomicBool>,
}

pub struct TcpNetwork {
    endpoints: BTreeMap<String, Endpoint>,
    streams: BTreeMap<(String, String), TcpStream>,
    tx: Sender<Inbound>,
    rx: Receiver<Inbound>,
    in_flight: usize,
    timeout: Duration,
    transcript: Transcript,
}

impl std::fmt::Debug for TcpNetwork {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TcpNetwork")
            .field("nodes", &self.endpoints.keys().collect::<Vec<_>>())
            .field("in_flight", &self.in_flight)
            .finish()
    }
}

fn read_hello(s: &mut TcpStream) -> std::io::Result<String> {
    let mut len = [0u8; 2];
    s.read_exact(&mut len)?;
    let mut name = vec![0u8; u16::from_be_bytes(len) as usize];
    s.read_exact(&mut name)?;
    String::from_utf8(name).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn serve(listener: TcpListener, node: String, closed: Arc<AtomicBool>, tx: Sender<Inbound>) {
    for conn in listener.incoming() {
        if closed.load(Ordering::SeqCst) {
            break;
        }
        let Ok(mut stream) = conn else { continue };
        let node = node.clone();
        let tx = tx.clone();
        thread::spawn(move || {
            let Ok(from) = read_hello(&mut stream) else { return };
            let mut reader = std::io::BufReader::new(stream);
            loop {
                match Frame::read_from(&mut reader) {
                    Ok(Some(f)) => {
                        if tx.send((from.clone(), node.clone(), Ok(f))).is_err() {
                            return;
                        }
                    }
                    Ok(None) => return,
                    Err(e) => {
                        let _ = tx.send((from.clone(), node.clone(), Err(e)));
                        return;
                    }
                }
            }
        });
    }
}

impl TcpNetwork {
    /// `timeout` bounds the wait for any in-flight frame; exceeding it aborts.
    pub fn new(timeout: Duration) -> Self {
        let (tx, rx) = mpsc::channel();
        TcpNetwork {
            endpoints: BTreeMap::new(),
            streams: BTreeMap::new(),
            tx,
            rx,
            in_flight: 0,
            timeout,
            transcript: Transcript::default(),
        }
    }

    pub fn addr(&self, node: &str) -> Option<SocketAddr> {
        self.endpoints.get(node).map(|e| e.addr)
    }

    fn stream(&mut self, from: &str, to: &str) -> Result<&mut TcpStream> {
        let key = (from.to_string(), to.to_string());
        if !self.streams.contains_key(&key) {
            let addr = self.endpoints[to].addr;
            let mut s = TcpStream::connect(addr)?;
            s.set_nodelay(true)?;
            s.write_all(&(from.len() as u16).to_be_bytes())?;
            s.write_all(from.as_bytes())?;
            self.streams.insert(key.clone(), s);
        }
        Ok(self.streams.get_mut(&key).expect("inserted"))
    }
}

impl Network for TcpNetwork {
    fn register(&mut self, node: &str) -> Result<()> {
        if self.endpoints.contains_key(node) {
            return Err(Error::Transport(format!("{node} registered twice")));
        }
        if node.len() > u16::MAX as usize {
            return Err(Error::Transport("node name too long".into()));
        }
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let addr = listener.local_addr()?;
        let closed = Arc::new(AtomicBool::new(false));
        let (name, flag, tx) = (node.to_string(), closed.clone(), self.tx.clone());
        thread::spawn(move || serve(listener, name, flag, tx));
        self.endpoints.insert(node.to_string(), Endpoint { addr, closed });
        Ok(())
    }

    fn unregister(&mut self, node: &str) {
        if let Some(ep) = self.endpoints.remove(node) {
            ep.closed.store(true, Ordering::SeqCst);
            // Wake the accept loop so it notices.
            let _ = TcpStream::connect(ep.addr);
        }
        self.streams.retain(|(from, to), _| from != node && to != node);
    }

    fn is_registered(&self, node: &str) -> bool {
        self.endpoints.contains_key(node)
    }

    fn send(&mut self, from: &str, to: &str, msg: &ProtocolMessage) -> Result<Receipt> {
        if !self.endpoints.contains_key(from) {
            return Err(Error::Transport(format!("unknown sender {from}")));
        }
        if !self.endpoints.contains_key(to) {
            return Err(Error::Transport(format!("unknown receiver {to}")));
        }
        let frame = msg.to_frame()?;
        let bytes = frame.encoded_len();
        self.stream(from, to)?
            .write_all(&frame.encode())
            .map_err(|e| Error::Transport(format!("{from} -> {to}: {e}")))?;
        self.in_flight += 1;
        let seq = self.transcript.push(from, to, frame);
        Ok(Receipt { seq, bytes })
    }

    fn next_delivery(&mut self) -> Result<Option<Delivery>> {
        while self.in_flight > 0 {
            let (from, to, frame) = match self.rx.recv_timeout(self.timeout) {
                Ok(x) => x,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Transport(format!(
                        "timed out with {} frames in flight",
                        self.in_flight
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport("receiver threads gone".into()))
                }
            };
            self.in_flight -= 1;
            let frame = frame?;
            if !self.endpoints.contains_key(&to) {
                continue;
            }
            return Ok(Some(Delivery {
                from,
                to,
                message: ProtocolMessage::from_frame(&frame)?,
            }));
        }
        Ok(None)
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

impl Drop for TcpNetwork {
    fn drop(&mut self) {
        self.streams.clear();
        for ep in self.endpoints.values() {
            ep.closed.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(ep.addr);
        }
    }
}
