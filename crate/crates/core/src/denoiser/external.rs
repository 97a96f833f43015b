use std::fmt;
use std::io::BufReader;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::protocol::{self, EpsRequest, EpsResponse, PROTOCOL_VERSION};
use super::NoisePredictor;
use crate::error::{Error, Result};
use crate::schedule::check_abar;
use crate::video::VideoTensor;

const MAX_RESPONSE_ELEMENTS: usize = 1 << 28;

enum Message {
    Handshake(u32),
    Response(EpsResponse),
}

struct Bridge {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<Result<Message>>,
    broken: bool,
}

impl Bridge {
    fn recv(&mut self, timeout: Duration) -> Result<Message> {
        match self.rx.recv_timeout(timeout) {
            Ok(Ok(m)) => Ok(m),
            Ok(Err(e)) => {
                self.broken = true;
                Err(e)
            }
            Err(RecvTimeoutError::Timeout) => {
                self.broken = true;
                let _ = self.child.kill();
                Err(Error::Timeout(timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                Err(Error::PeerClosed)
            }
        }
    }
}

/// A denoiser running in a child process, driven over its stdin/stdout.
///
/// One request is in flight at a time. Any transport failure or timeout
/// marks the bridge broken; later calls fail with [`Error::PeerClosed`].
/// The child is killed when the client is dropped.
pub struct ExternalDenoiser {
    bridge: Mutex<Bridge>,
    timeout: Duration,
    command: String,
}

impl fmt::Debug for ExternalDenoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalDenoiser")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalDenoiser {
    /// Runs `command_line` through `sh -c` and performs the handshake. The
    /// shell `exec`s the command so that killing the child reaches the bridge
    /// itself rather than an intermediate shell.
    pub fn spawn_shell(command_line: &str, timeout: Duration) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(format!("exec {command_line}"));
        Self::spawn(cmd, command_line.to_string(), timeout)
    }

    pub fn spawn(mut cmd: Command, label: String, timeout: Duration) -> Result<Self> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let hello = protocol::read_handshake(&mut reader).map(Message::Handshake);
            let ok = hello.is_ok();
            if tx.send(hello).is_err() || !ok {
                return;
            }
            loop {
                let msg = protocol::read_response(&mut reader, MAX_RESPONSE_ELEMENTS).map(Message::Response);
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    return;
                }
            }
        });

        let client = ExternalDenoiser {
            bridge: Mutex::new(Bridge {
                child,
                stdin,
                rx,
                broken: false,
            }),
            timeout,
            command: label,
        };
        client.handshake()?;
        Ok(client)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn handshake(&self) -> Result<()> {
        let mut b = self.bridge.lock().expect("bridge lock");
        if let Err(e) = protocol::write_handshake(&mut b.stdin, PROTOCOL_VERSION) {
            b.broken = true;
            return Err(e);
        }
        match b.recv(self.timeout)? {
            Message::Handshake(v) if v == PROTOCOL_VERSION => Ok(()),
            Message::Handshake(v) => {
                b.broken = true;
                Err(Error::ProtocolVersionMismatch {
                    expected: PROTOCOL_VERSION,
                    actual: v,
                })
            }
            Message::Response(_) => {
                b.broken = true;
                Err(Error::ExternalProtocol("response before handshake".into()))
            }
        }
    }
}

impl NoisePredictor for ExternalDenoiser {
    fn predict(&self, x_t: &VideoTensor, t: usize, abar_t: f64) -> Result<VideoTensor> {
        check_abar(abar_t)?;
        let t_index = u32::try_from(t).map_err(|_| Error::InvalidParameter(format!("timestep {t}")))?;
        let mut b = self.bridge.lock().expect("bridge lock");
        if b.broken {
            return Err(Error::PeerClosed);
        }
        let req = EpsRequest {
            t_index,
            abar: abar_t,
            x_t: x_t.clone(),
        };
        if let Err(e) = protocol::write_request(&mut b.stdin, &req) {
            b.broken = true;
            return Err(e);
        }
        match b.recv(self.timeout)? {
            Message::Response(EpsResponse::Ok(eps)) => {
                if eps.shape() != x_t.shape() {
                    b.broken = true;
                    return Err(Error::ExternalShapeMismatch {
                        expected: x_t.shape().to_string(),
                        actual: eps.shape().to_string(),
                    });
                }
                Ok(eps)
            }
            Message::Response(EpsResponse::Failed { status, message }) => Err(Error::ExternalProtocol(format!(
                "bridge status {status}: {message}"
            ))),
            Message::Handshake(_) => {
                b.broken = true;
                Err(Error::ExternalProtocol("unexpected handshake".into()))
            }
        }
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Ok(b) = self.bridge.get_mut() {
            let _ = b.child.kill();
            let _ = b.child.wait();
        }
    }
}
