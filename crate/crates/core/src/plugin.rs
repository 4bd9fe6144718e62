//! Line-delimited JSON request/response over a child process's stdio.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A long-lived child process answering one JSON line per request line.
/// Requests are serialized through a mutex.
pub struct LineClient {
    label: String,
    pipes: Mutex<Pipes>,
}

impl LineClient {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, String> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start {program}: {e}"))?;
        let stdin = child.stdin.take().ok_or("child has no stdin")?;
        let stdout = BufReader::new(child.stdout.take().ok_or("child has no stdout")?);
        Ok(LineClient { label: program.to_string(), pipes: Mutex::new(Pipes { child, stdin, stdout }) })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sends `request`, reads one response line. A response object with an
    /// `error` field is turned into `Err`.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, request: &Req) -> Result<Resp, String> {
        let mut line = serde_json::to_string(request).map_err(|e| e.to_string())?;
        line.push('\n');
        let mut pipes = self.pipes.lock().map_err(|_| "plug-in lock poisoned".to_string())?;
        pipes.stdin.write_all(line.as_bytes()).map_err(|e| format!("{}: write failed: {e}", self.label))?;
        pipes.stdin.flush().map_err(|e| format!("{}: write failed: {e}", self.label))?;
        let mut response = String::new();
        let n = pipes.stdout.read_line(&mut response).map_err(|e| format!("{}: read failed: {e}", self.label))?;
        if n == 0 {
            return Err(format!("{}: plug-in closed its output", self.label));
        }
        let value: serde_json::Value =
            serde_json::from_str(&response).map_err(|e| format!("{}: malformed response: {e}", self.label))?;
        if let Some(err) = value.get("error") {
            return Err(format!("{}: {}", self.label, err.as_str().unwrap_or(&err.to_string())));
        }
        serde_json::from_value(value).map_err(|e| format!("{}: unexpected response: {e}", self.label))
    }
}

impl Drop for LineClient {
    fn drop(&mut self) {
        if let Ok(pipes) = self.pipes.get_mut() {
            let _ = pipes.child.kill();
            let _ = pipes.child.wait();
        }
    }
}
