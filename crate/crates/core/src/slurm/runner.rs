use std::collections::HashMap;
use std::io::Read;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::slurm::{AdapterError, SchedulerCommand};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    pub fn ok(stdout: impl Into<String>) -> Self {
        CommandOutput {
            status: 0,
            stdout: stdout.into(),
            stderr: String::new(),
        }
    }
}

/// Executes scheduler commands. Callers issue one command at a time.
pub trait CommandRunner {
    fn execute(&mut self, command: &SchedulerCommand) -> Result<CommandOutput, AdapterError>;

    /// Runs the command and fails unless it exits with `expected_exit`.
    fn run_checked(&mut self, command: &SchedulerCommand) -> Result<CommandOutput, AdapterError> {
        let out = self.execute(command)?;
        if out.status != command.expected_exit {
            return Err(AdapterError::UnexpectedExit {
                command: command.to_string(),
                status: out.status,
                expected: command.expected_exit,
                stderr: out.stderr.trim().to_string(),
            });
        }
        Ok(out)
    }
}

/// Runs commands as child processes, killing them after `timeout`.
#[derive(Debug, Clone)]
pub struct ShellRunner {
    pub timeout: Duration,
}

impl Default for ShellRunner {
    fn default() -> Self {
        ShellRunner {
            timeout: Duration::from_secs(10),
        }
    }
}

fn drain<R: Read + Send + 'static>(source: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut s) = source {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    })
}

impl CommandRunner for ShellRunner {
    fn execute(&mut self, command: &SchedulerCommand) -> Result<CommandOutput, AdapterError> {
        let spawn_err = |e: std::io::Error| AdapterError::Spawn {
            command: command.to_string(),
            message: e.to_string(),
        };
        let mut child = Command::new(&command.argv[0])
            .args(&command.argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(spawn_err)?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            if let Some(status) = child.try_wait().map_err(spawn_err)? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(AdapterError::Timeout(command.to_string()));
            }
            thread::sleep(Duration::from_millis(10));
        };
        Ok(CommandOutput {
            status: status.code().unwrap_or(-1),
            stdout: stdout.join().unwrap_or_default(),
            stderr: stderr.join().unwrap_or_default(),
        })
    }
}

/// Replays canned outputs keyed by the command line and records every call.
#[derive(Debug, Clone, Default)]
pub struct FixtureRunner {
    responses: HashMap<String, CommandOutput>,
    /// Output for commands without a specific response.
    pub fallback: Option<CommandOutput>,
    pub calls: Vec<SchedulerCommand>,
}

impl FixtureRunner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(mut self, command: &SchedulerCommand, output: CommandOutput) -> Self {
        self.responses.insert(command.to_string(), output);
        self
    }

    pub fn with_fallback(mut self, output: CommandOutput) -> Self {
        self.fallback = Some(output);
        self
    }

    pub fn set_response(&mut self, command: &SchedulerCommand, output: CommandOutput) {
        self.responses.insert(command.to_string(), output);
    }
}

impl CommandRunner for FixtureRunner {
    fn execute(&mut self, command: &SchedulerCommand) -> Result<CommandOutput, AdapterError> {
        self.calls.push(command.clone());
        self.responses
            .get(&command.to_string())
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| AdapterError::NoFixture(command.to_string()))
    }
}
