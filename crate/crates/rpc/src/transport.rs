//! Line-framed connections over TCP sockets or child-process pipes.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use crate::error::{Result, RpcError};
use crate::wire::Message;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Where the harness finds a remote policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Connect to a policy server at `host:port`.
    Connect(String),
    /// Bind `host:port` and accept one connection per sequence.
    Listen(String),
    /// Spawn `sh -c <command>` per sequence and speak over its stdin/stdout.
    Stdio(String),
}

impl FromStr for Endpoint {
    type Err = RpcError;

    fn from_str(s: &str) -> Result<Self> {
        let (scheme, rest) = match s.split_once(':') {
            Some((scheme @ ("tcp" | "listen" | "stdio"), rest)) => (scheme, rest.trim_start_matches("//")),
            _ => ("tcp", s),
        };
        if rest.is_empty() {
            return Err(RpcError::Endpoint(s.into()));
        }
        Ok(match scheme {
            "listen" => Endpoint::Listen(rest.into()),
            "stdio" => Endpoint::Stdio(rest.into()),
            _ => {
                if !rest.contains(':') {
                    return Err(RpcError::Endpoint(s.into()));
                }
                Endpoint::Connect(rest.into())
            }
        })
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Connect(a) => write!(f, "tcp://{a}"),
            Endpoint::Listen(a) => write!(f, "listen://{a}"),
            Endpoint::Stdio(c) => write!(f, "stdio:{c}"),
        }
    }
}

/// One framed, bidirectional message stream. Reads happen on a helper
/// thread so every receive can time out, whatever the underlying pipe.
pub struct Connection {
    lines: Receiver<std::io::Result<String>>,
    writer: Box<dyn Write + Send>,
    timeout: Option<Duration>,
    socket: Option<TcpStream>,
    child: Option<Child>,
    broken: bool,
}

impl Connection {
    pub fn new(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Option<Duration>,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Connection {
            lines: rx,
            writer: Box::new(writer),
            timeout,
            socket: None,
            child: None,
            broken: false,
        }
    }

    pub fn tcp(stream: TcpStream, timeout: Option<Duration>) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let keep = stream.try_clone()?;
        let mut conn = Connection::new(reader, stream, timeout);
        conn.socket = Some(keep);
        Ok(conn)
    }

    pub fn connect(addr: &str, timeout: Option<Duration>) -> Result<Self> {
        Connection::tcp(TcpStream::connect(addr)?, timeout)
    }

    /// Runs `sh -c command` with piped stdin/stdout; stderr is inherited.
    pub fn spawn(command: &str, timeout: Option<Duration>) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let mut conn = Connection::new(stdout, stdin, timeout);
        conn.child = Some(child);
        Ok(conn)
    }

    /// This process's own stdin/stdout.
    pub fn stdio(timeout: Option<Duration>) -> Self {
        Connection::new(std::io::stdin(), std::io::stdout(), timeout)
    }

    pub fn is_broken(&self) -> bool {
        self.broken
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        if self.broken {
            return Err(RpcError::Closed);
        }
        let r = self
            .writer
            .write_all(msg.to_line().as_bytes())
            .and_then(|_| self.writer.flush());
        if r.is_err() {
            self.broken = true;
        }
        Ok(r?)
    }

    pub fn recv(&mut self) -> Result<Message> {
        if self.broken {
            return Err(RpcError::Closed);
        }
        let line = match self.timeout {
            Some(t) => match self.lines.recv_timeout(t) {
                Ok(l) => l,
                Err(RecvTimeoutError::Timeout) => {
                    // a late answer would pair with the wrong request
                    self.broken = true;
                    return Err(RpcError::Timeout(t));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.broken = true;
                    return Err(RpcError::Closed);
                }
            },
            None => self.lines.recv().map_err(|_| {
                self.broken = true;
                RpcError::Closed
            })?,
        };
        let line = line.map_err(|e| {
            self.broken = true;
            RpcError::Io(e)
        })?;
        Message::from_line(&line)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(s) = &self.socket {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(mut c) = self.child.take() {
            drop(std::mem::replace(&mut self.writer, Box::new(std::io::sink())));
            // give a well-behaved child a moment to exit on EOF
            for _ in 0..50 {
                if matches!(c.try_wait(), Ok(Some(_))) {
                    return;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_parse() {
        assert_eq!(
            "127.0.0.1:9000".parse::<Endpoint>().unwrap(),
            Endpoint::Connect("127.0.0.1:9000".into())
        );
        assert_eq!(
            "tcp://h:1".parse::<Endpoint>().unwrap(),
            Endpoint::Connect("h:1".into())
        );
        assert_eq!(
            "listen://0.0.0.0:7".parse::<Endpoint>().unwrap(),
            Endpoint::Listen("0.0.0.0:7".into())
        );
        assert_eq!(
            "stdio:python -m client".parse::<Endpoint>().unwrap(),
            Endpoint::Stdio("python -m client".into())
        );
        assert!("nohost".parse::<Endpoint>().is_err());
        assert!("stdio:".parse::<Endpoint>().is_err());
    }

    #[test]
    fn timeout_marks_broken() {
        let (_keep, r) = std::os::unix::net::UnixStream::pair().unwrap();
        let w = r.try_clone().unwrap();
        let mut c = Connection::new(r, w, Some(Duration::from_millis(20)));
        assert!(matches!(c.recv(), Err(RpcError::Timeout(_))));
        assert!(c.is_broken());
        assert!(matches!(c.recv(), Err(RpcError::Closed)));
    }

    #[test]
    fn child_process_echo() {
        let mut c = Connection::spawn("cat", Some(Duration::from_secs(5))).unwrap();
        c.send(&Message::Bye {}).unwrap();
        assert_eq!(c.recv().unwrap(), Message::Bye {});
    }
}
