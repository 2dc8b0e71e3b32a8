//! Plain-text protocol files.
//!
//! ```text
//! shaken-lattice-protocol 1
//! task splitter
//! seed 7
//! fidelity 0.9512
//! hyper gamma=0.999 tau=0.999 learning_rate=0.001 ...
//! segments 2
//! constant 1.5707963267948966 0.25
//! half-cycle 0.8 0.2617993877991494 0
//! ```
//!
//! Each segment line is `kind value duration`, with phases and amplitudes in
//! radians and durations in `ω_r⁻¹`. Half-cycles carry a fourth field, the
//! drive clock at the segment start. Numbers are written in shortest
//! round-trip form, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::dqn::Hyperparameters;
use crate::error::{Error, Result};
use crate::lattice::{PhaseSchedule, PhaseSegment, SegmentKind};

pub const PROTOCOL_VERSION: u32 = 1;
const MAGIC: &str = "shaken-lattice-protocol";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Splitter,
    Mirror,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Splitter => "splitter",
            TaskKind::Mirror => "mirror",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "splitter" => Some(TaskKind::Splitter),
            "mirror" => Some(TaskKind::Mirror),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolFile {
    pub task: TaskKind,
    pub seed: Option<u64>,
    pub fidelity: Option<f64>,
    pub hyper: Option<Hyperparameters>,
    pub schedule: PhaseSchedule,
}

impl ProtocolFile {
    pub fn new(task: TaskKind, schedule: PhaseSchedule) -> Self {
        ProtocolFile {
            task,
            seed: None,
            fidelity: None,
            hyper: None,
            schedule,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {PROTOCOL_VERSION}");
        let _ = writeln!(s, "task {}", self.task.name());
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed {seed}");
        }
        if let Some(f) = self.fidelity {
            let _ = writeln!(s, "fidelity {f}");
        }
        if let Some(h) = &self.hyper {
            let _ = writeln!(s, "hyper {}", hyper_echo(h));
        }
        let _ = writeln!(s, "segments {}", self.schedule.len());
        for seg in self.schedule.segments() {
            match seg.kind() {
                SegmentKind::Constant { phase } => {
                    let _ = writeln!(s, "constant {phase} {}", seg.duration());
                }
                SegmentKind::HalfCycle { amplitude, start } => {
                    let _ = writeln!(s, "half-cycle {amplitude} {} {start}", seg.duration());
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (ln, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty protocol file".into(),
        })?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| parse_err(ln, format!("expected '{MAGIC} <version>'")))?;
        if version != PROTOCOL_VERSION {
            return Err(Error::Version {
                found: version,
                expected: PROTOCOL_VERSION,
            });
        }

        let mut task = None;
        let mut seed = None;
        let mut fidelity = None;
        let mut hyper = None;
        let mut count = None;
        let mut last_line = ln;
        for (ln, line) in lines.by_ref() {
            last_line = ln;
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "task" => task = Some(TaskKind::parse(rest).ok_or_else(|| parse_err(ln, format!("unknown task '{rest}'")))?),
                "seed" => seed = Some(rest.parse().map_err(|_| parse_err(ln, "seed must be an integer"))?),
                "fidelity" => fidelity = Some(number(ln, rest)?),
                "hyper" => hyper = Some(parse_hyper(ln, rest)?),
                "segments" => {
                    count = Some(rest.parse::<usize>().map_err(|_| parse_err(ln, "segment count must be an integer"))?);
                    break;
                }
                other => return Err(parse_err(ln, format!("unknown header field '{other}'"))),
            }
        }
        let task = task.ok_or_else(|| parse_err(last_line, "missing 'task' line"))?;
        let count = count.ok_or_else(|| parse_err(last_line, "missing 'segments' line"))?;

        let mut segments = Vec::with_capacity(count);
        for (ln, line) in lines {
            last_line = ln;
            if segments.len() == count {
                return Err(parse_err(ln, format!("more than {count} segments")));
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let seg = match (f.first().copied(), f.len()) {
                (Some("constant"), 3) => PhaseSegment::constant(number(ln, f[1])?, number(ln, f[2])?),
                (Some("half-cycle"), 4) => {
                    let seg = PhaseSegment::half_cycle(number(ln, f[1])?, number(ln, f[3])?)?;
                    let d = number(ln, f[2])?;
                    if d != seg.duration() {
                        return Err(parse_err(ln, format!("half-cycle duration {d} != {}", seg.duration())));
                    }
                    Ok(seg)
                }
                _ => return Err(parse_err(ln, format!("malformed segment '{line}'"))),
            }
            .map_err(|e| parse_err(ln, e.to_string()))?;
            segments.push(seg);
        }
        if segments.len() != count {
            return Err(parse_err(
                last_line,
                format!("truncated: {} of {count} segments", segments.len()),
            ));
        }
        Ok(ProtocolFile {
            task,
            seed,
            fidelity,
            hyper,
            schedule: PhaseSchedule::from_segments(segments),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_err(line, format!("'{s}' is not a finite number")))
}

fn hyper_echo(h: &Hyperparameters) -> String {
    let table = toml::Table::try_from(h).expect("hyperparameters serialize");
    table
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_hyper(line: usize, s: &str) -> Result<Hyperparameters> {
    let doc: String = s.split_whitespace().map(|kv| kv.replacen('=', " = ", 1) + "\n").collect();
    toml::from_str(&doc).map_err(|e| parse_err(line, format!("hyper: {}", e.message())))
}
