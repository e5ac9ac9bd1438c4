//! Upload sniffing and demuxing into a 16 kHz mono waveform plus a video
//! stream, via an external media tool.

use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::process::Command;

use crate::error::{ApiError, ErrorCode};

/// Files produced by a demuxer inside the request's scratch directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DemuxOutput {
    pub audio: PathBuf,
    pub video: PathBuf,
    pub duration_s: Option<f64>,
}

#[async_trait]
pub trait Demuxer: Send + Sync {
    async fn demux(&self, input: &Path, workdir: &Path) -> Result<DemuxOutput, ApiError>;
}

/// Rejects payloads that cannot be an MP4 container before any tool runs.
pub fn sniff_mp4(bytes: &[u8]) -> Result<(), ApiError> {
    if bytes.is_empty() {
        return Err(ApiError::new(ErrorCode::UndecodableMedia, "undecodable media").with_detail("empty upload"));
    }
    if bytes.len() < 12 || &bytes[4..8] != b"ftyp" {
        return Err(ApiError::new(ErrorCode::UndecodableMedia, "undecodable media")
            .with_detail("no ftyp box at offset 4; not an MP4 container"));
    }
    Ok(())
}

/// Argument templates for the two demux commands. `{input}`, `{audio}` and
/// `{video}` are replaced by paths after splitting, so paths with spaces are
/// safe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemuxCommands {
    pub audio: Vec<String>,
    pub video: Vec<String>,
}

impl Default for DemuxCommands {
    fn default() -> Self {
        let argv = |s: &str| s.split_whitespace().map(str::to_owned).collect();
        Self {
            audio: argv(
                "ffmpeg -nostdin -hide_banner -y -i {input} -map 0:a:0 -vn -ac 1 -ar 16000 -c:a pcm_s16le {audio}",
            ),
            video: argv("ffmpeg -nostdin -hide_banner -y -i {input} -map 0:v:0 -an -c:v copy {video}"),
        }
    }
}

pub(crate) fn fill(template: &[String], vars: &[(&str, &str)]) -> Vec<String> {
    template
        .iter()
        .map(|arg| {
            vars.iter()
                .fold(arg.clone(), |acc, (key, value)| acc.replace(&format!("{{{key}}}"), value))
        })
        .collect()
}

/// Output of one finished subprocess.
pub(crate) struct RunOutput {
    pub success: bool,
    pub stdout: String,
    pub stderr: String,
}

pub(crate) enum RunError {
    Spawn(String),
    Timeout,
}

/// Runs `argv` with a deadline; the child is killed if the deadline passes.
pub(crate) async fn run(argv: &[String], timeout: Duration) -> Result<RunOutput, RunError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| RunError::Spawn("empty command".into()))?;
    let child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .map_err(|e| RunError::Spawn(format!("{program}: {e}")))?;
    match tokio::time::timeout(timeout, child.wait_with_output()).await {
        Err(_) => Err(RunError::Timeout),
        Ok(Err(e)) => Err(RunError::Spawn(format!("{program}: {e}"))),
        Ok(Ok(out)) => Ok(RunOutput {
            success: out.status.success(),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }),
    }
}

/// Last few lines of tool output, enough to diagnose without flooding.
pub(crate) fn tail(text: &str) -> String {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    lines[lines.len().saturating_sub(5)..].join("\n")
}

/// Parses `Duration: HH:MM:SS.ss` from media tool diagnostics.
pub fn parse_duration(stderr: &str) -> Option<f64> {
    let rest = &stderr[stderr.find("Duration: ")? + "Duration: ".len()..];
    let stamp = rest.split(|c: char| c == ',' || c.is_whitespace()).next()?;
    let mut parts = stamp.split(':');
    let h: f64 = parts.next()?.parse().ok()?;
    let m: f64 = parts.next()?.parse().ok()?;
    let s: f64 = parts.next()?.parse().ok()?;
    Some(h * 3600.0 + m * 60.0 + s)
}

/// Demuxes with external commands (ffmpeg by default).
#[derive(Debug, Clone)]
pub struct CommandDemuxer {
    pub commands: DemuxCommands,
    pub timeout: Duration,
}

impl CommandDemuxer {
    pub fn new(commands: DemuxCommands, timeout: Duration) -> Self {
        Self { commands, timeout }
    }

    async fn step(&self, template: &[String], vars: &[(&str, &str)], stream: &str) -> Result<String, ApiError> {
        let argv = fill(template, vars);
        match run(&argv, self.timeout).await {
            Err(RunError::Spawn(e)) => {
                Err(ApiError::new(ErrorCode::Internal, "media tool could not be started").with_detail(e))
            }
            Err(RunError::Timeout) => Err(ApiError::new(ErrorCode::UndecodableMedia, "undecodable media")
                .with_detail(format!("{stream} demux exceeded {:?}", self.timeout))),
            Ok(out) if out.success => Ok(out.stderr),
            Ok(out) => {
                let no_stream = out.stderr.contains("matches no streams")
                    || out.stderr.contains("does not contain any stream");
                if no_stream && stream == "audio" {
                    Err(ApiError::new(ErrorCode::MissingAudioTrack, "the video has no audio track")
                        .with_detail(tail(&out.stderr)))
                } else {
                    Err(ApiError::new(ErrorCode::UndecodableMedia, "undecodable media")
                        .with_detail(format!("{stream} demux failed: {}", tail(&out.stderr))))
                }
            }
        }
    }
}

impl Default for CommandDemuxer {
    fn default() -> Self {
        Self::new(DemuxCommands::default(), Duration::from_secs(60))
    }
}

#[async_trait]
impl Demuxer for CommandDemuxer {
    async fn demux(&self, input: &Path, workdir: &Path) -> Result<DemuxOutput, ApiError> {
        let audio = workdir.join("audio.wav");
        let video = workdir.join("video.mp4");
        let (i, a, v) = (input.to_string_lossy(), audio.to_string_lossy(), video.to_string_lossy());
        let vars = [("input", i.as_ref()), ("audio", a.as_ref()), ("video", v.as_ref())];
        let audio_log = self.step(&self.commands.audio, &vars, "audio").await?;
        self.step(&self.commands.video, &vars, "video").await?;
        Ok(DemuxOutput {
            duration_s: parse_duration(&audio_log),
            audio,
            video,
        })
    }
}
