//! Line protocol for oracles living in another process.
//!
//! Request: `EVAL m p e_11 e_12 … e_mm` (row-major, one line).
//! Response: one line holding a single integer. Anything else, or silence
//! past the timeout, is scored as the answer `0`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::RngCore;

use super::PermanentOracle;
use crate::error::{Error, Result};
use crate::finite_math::{MatrixModP, PrimeModulus};
use crate::permanent::permanent_ryser;

struct Channel {
    stdin: ChildStdin,
    responses: Receiver<String>,
}

pub struct PipeOracle {
    dim: usize,
    p: PrimeModulus,
    timeout: Duration,
    child: Mutex<Child>,
    channel: Mutex<Channel>,
    timeouts: AtomicU64,
    protocol_errors: AtomicU64,
}

impl PipeOracle {
    pub fn spawn(command: &[String], dim: usize, p: PrimeModulus, timeout_ms: u64) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Protocol("empty oracle command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(l) = line else { break };
                if tx.send(l).is_err() {
                    break;
                }
            }
        });
        Ok(PipeOracle {
            dim,
            p,
            timeout: Duration::from_millis(timeout_ms),
            child: Mutex::new(child),
            channel: Mutex::new(Channel {
                stdin,
                responses: rx,
            }),
            timeouts: AtomicU64::new(0),
            protocol_errors: AtomicU64::new(0),
        })
    }

    pub fn timeouts(&self) -> u64 {
        self.timeouts.load(Ordering::Relaxed)
    }

    pub fn protocol_errors(&self) -> u64 {
        self.protocol_errors.load(Ordering::Relaxed)
    }

    fn request(&self, m: &MatrixModP) -> Option<u64> {
        let mut ch = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        // Late answers to timed-out requests would otherwise be read as
        // answers to this one.
        while ch.responses.try_recv().is_ok() {}
        let line = format_request(m);
        if writeln!(ch.stdin, "{line}").and_then(|_| ch.stdin.flush()).is_err() {
            self.protocol_errors.fetch_add(1, Ordering::Relaxed);
            return None;
        }
        match ch.responses.recv_timeout(self.timeout) {
            Ok(resp) => match resp.trim().parse::<i128>() {
                Ok(v) => Some(self.p.reduce_signed(v)),
                Err(_) => {
                    self.protocol_errors.fetch_add(1, Ordering::Relaxed);
                    None
                }
            },
            Err(RecvTimeoutError::Timeout) => {
                self.timeouts.fetch_add(1, Ordering::Relaxed);
                None
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.protocol_errors.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }
}

impl PermanentOracle for PipeOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn modulus(&self) -> PrimeModulus {
        self.p
    }
    fn evaluate(&self, m: &MatrixModP, _rng: &mut dyn RngCore) -> u64 {
        self.request(m).unwrap_or(0)
    }
}

impl Drop for PipeOracle {
    fn drop(&mut self) {
        let child = self.child.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = child.kill();
        let _ = child.wait();
    }
}

pub fn format_request(m: &MatrixModP) -> String {
    let mut line = format!("EVAL {} {}", m.dim(), m.modulus());
    for e in m.entries() {
        line.push(' ');
        line.push_str(&e.to_string());
    }
    line
}

pub fn parse_request(line: &str) -> Result<MatrixModP> {
    let mut words = line.split_whitespace();
    if words.next() != Some("EVAL") {
        return Err(Error::Protocol(format!("expected EVAL request, got `{line}`")));
    }
    let mut number = |what: &str| -> Result<u64> {
        words
            .next()
            .ok_or_else(|| Error::Protocol(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::Protocol(format!("{what} is not an integer")))
    };
    let dim = number("dimension")? as usize;
    let p = PrimeModulus::new(number("modulus")?)?;
    let entries = (0..dim * dim)
        .map(|_| number("entry"))
        .collect::<Result<Vec<_>>>()?;
    if words.next().is_some() {
        return Err(Error::Protocol("trailing tokens after matrix".into()));
    }
    MatrixModP::new(dim, entries.into_iter().map(|e| p.reduce(e)).collect(), p)
}

/// Serves exact permanents over the pipe protocol until `input` closes.
/// Malformed requests get an `ERR` line.
pub fn serve_exact<R: BufRead, W: Write>(input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_request(&line).and_then(|m| permanent_ryser(&m)) {
            Ok(v) => writeln!(output, "{v}")?,
            Err(e) => writeln!(output, "ERR {e}")?,
        }
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_round_trip() {
        let p = PrimeModulus::new(101).unwrap();
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], p).unwrap();
        let line = format_request(&m);
        assert_eq!(line, "EVAL 2 101 1 2 3 4");
        assert_eq!(parse_request(&line).unwrap(), m);
        assert!(parse_request("EVAL 2 101 1 2 3").is_err());
        assert!(parse_request("EVAL 2 100 1 2 3 4").is_err());
        assert!(parse_request("PING").is_err());
    }

    #[test]
    fn server_answers_each_line() {
        let input = b"EVAL 2 101 1 2 3 4\nnonsense\nEVAL 1 7 5\n";
        let mut out = Vec::new();
        serve_exact(&input[..], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "10");
        assert!(lines[1].starts_with("ERR"));
        assert_eq!(lines[2], "5");
    }

    #[cfg(unix)]
    #[test]
    fn child_process_round_trip_and_timeout() {
        let p = PrimeModulus::new(101).unwrap();
        let m = MatrixModP::from_rows(&[vec![1, 2], vec![3, 4]], p).unwrap();
        let echo = PipeOracle::spawn(
            &["sh".into(), "-c".into(), "while read l; do echo 10; done".into()],
            2,
            p,
            2000,
        )
        .unwrap();
        assert_eq!(echo.evaluate(&m, &mut crate::rng::seeded(0)), 10);
        let silent = PipeOracle::spawn(&["sh".into(), "-c".into(), "cat > /dev/null".into()], 2, p, 50).unwrap();
        assert_eq!(silent.evaluate(&m, &mut crate::rng::seeded(0)), 0);
        assert_eq!(silent.timeouts(), 1);
        assert!(PipeOracle::spawn(&["/nonexistent/oracle".into()], 2, p, 50).is_err());
    }
}
