//! Flag, config-file and default merging.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::output::fmt_float;

pub const KEYS: [&str; 11] = [
    "p1", "p2", "p3", "p", "slots", "seed", "engines", "out", "caps", "epsilon", "quick",
];

pub const FULL_SLOTS: u64 = 10_000_000;
pub const QUICK_SLOTS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Single,
    SweepP,
    SweepP2p3Diff,
    SweepP1Gaw,
    Compare,
    MdpSolve,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Single => "single",
            CommandKind::SweepP => "sweep-p",
            CommandKind::SweepP2p3Diff => "sweep-p2p3-diff",
            CommandKind::SweepP1Gaw => "sweep-p1-gaw",
            CommandKind::Compare => "compare",
            CommandKind::MdpSolve => "mdp-solve",
        }
    }

    fn default_of(self, key: &str) -> Option<&'static str> {
        use CommandKind::*;
        let v = match (key, self) {
            ("p1", SweepP1Gaw) => "0.01:0.01:0.29",
            ("p1", _) => "0.2",
            ("p2" | "p3", SweepP2p3Diff) => "0.25:0.05:0.95",
            ("p2" | "p3", SweepP1Gaw) => "0.3,0.8",
            ("p2" | "p3", _) => "0.8",
            ("p", SweepP) => "0.05:0.05:1",
            ("p", SweepP1Gaw) => "1",
            ("p", _) => "0.8",
            ("seed", _) => "1",
            ("engines", Single | SweepP) => "analytic,simulate",
            ("engines", MdpSolve) => "mdp",
            ("engines", _) => "analytic",
            ("caps", _) => "auto",
            ("epsilon", _) => "1e-6",
            ("quick", _) => "false",
            _ => return None,
        };
        Some(v)
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            return Err(CliError::invalid(format!(
                "config line {}: expected key = value",
                n + 1
            )));
        };
        let key = k.trim().trim_start_matches("--").to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::invalid(format!(
                "config line {}: unknown key `{key}`",
                n + 1
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// A list of values given as `a`, `a,b,c` or `start:step:stop`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Grid {
    pub fn parse(key: &str, text: &str) -> CliResult<Self> {
        let bad = |why: &str| CliError::invalid(format!("--{key} `{text}`: {why}"));
        let num = |s: &str| -> CliResult<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad("not a number"))
        };
        let values = if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            let [start, step, stop] = parts[..] else {
                return Err(bad("ranges are start:step:stop"));
            };
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 || stop < start {
                return Err(bad("empty range"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(bad("too many points"));
            }
            (0..count)
                .map(|k| round12(start + k as f64 * step))
                .collect()
        } else {
            text.split(',').map(num).collect::<CliResult<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(bad("empty grid"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("grid must be strictly ascending"));
        }
        Ok(Grid(values))
    }

    pub fn single(&self, key: &str) -> CliResult<f64> {
        match self.0[..] {
            [x] => Ok(x),
            _ => Err(CliError::invalid(format!(
                "--{key} takes a single value here"
            ))),
        }
    }
}

fn round12(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Caps {
    Auto,
    Fixed(u32, u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub kind: CommandKind,
    pub p1: Grid,
    pub p2: Grid,
    pub p3: Grid,
    pub p: Grid,
    pub slots: u64,
    pub seed: u64,
    pub engines: Vec<String>,
    pub out: Option<PathBuf>,
    pub caps: Caps,
    pub epsilon: f64,
    pub quick: bool,
    /// Effective configuration as one `#` comment line.
    pub echo: String,
}

impl Settings {
    /// Flags override file values, which override the command defaults.
    pub fn resolve(
        kind: CommandKind,
        flags: &BTreeMap<String, String>,
        file: &BTreeMap<String, String>,
    ) -> CliResult<Self> {
        let lookup = |key: &str| -> Option<String> {
            flags
                .get(key)
                .or_else(|| file.get(key))
                .cloned()
                .or_else(|| kind.default_of(key).map(str::to_string))
        };
        let quick = match lookup("quick").as_deref() {
            Some("true" | "1" | "yes") => true,
            Some("false" | "0" | "no") | None => false,
            Some(other) => return Err(CliError::invalid(format!("--quick `{other}`"))),
        };
        let slots_text = lookup("slots")
            .unwrap_or_else(|| (if quick { QUICK_SLOTS } else { FULL_SLOTS }).to_string());
        let slots = slots_text
            .parse::<u64>()
            .ok()
            .filter(|s| *s > 0)
            .ok_or_else(|| CliError::invalid(format!("--slots `{slots_text}`")))?;
        let seed_text = lookup("seed").unwrap_or_default();
        let seed = seed_text
            .parse::<u64>()
            .map_err(|_| CliError::invalid(format!("--seed `{seed_text}`")))?;
        let epsilon_text = lookup("epsilon").unwrap_or_default();
        let epsilon = epsilon_text
            .parse::<f64>()
            .ok()
            .filter(|e| *e > 0.0 && e.is_finite())
            .ok_or_else(|| CliError::invalid(format!("--epsilon `{epsilon_text}`")))?;
        let caps_text = lookup("caps").unwrap_or_default();
        let caps = parse_caps(&caps_text)?;
        let engines_text = lookup("engines").unwrap_or_default();
        let mut engines: Vec<String> = Vec::new();
        for e in engines_text
            .split(',')
            .map(|e| e.trim().to_ascii_lowercase())
        {
            if !e.is_empty() && !engines.contains(&e) {
                engines.push(e);
            }
        }
        if engines.is_empty() {
            return Err(CliError::invalid("--engines is empty"));
        }
        let out = lookup("out").filter(|o| !o.is_empty()).map(PathBuf::from);

        let grid = |key: &str| Grid::parse(key, &lookup(key).unwrap_or_default());
        let (p1, p2, p3, p) = (grid("p1")?, grid("p2")?, grid("p3")?, grid("p")?);

        let mut echo = format!("# aor {}", kind.name());
        for key in KEYS {
            let value = match key {
                "slots" => slots.to_string(),
                "quick" => quick.to_string(),
                "out" => match &out {
                    Some(o) => o.display().to_string(),
                    None => "-".into(),
                },
                _ => lookup(key).unwrap_or_default(),
            };
            let _ = write!(echo, " {key}={value}");
        }

        Ok(Settings {
            kind,
            p1,
            p2,
            p3,
            p,
            slots,
            seed,
            engines,
            out,
            caps,
            epsilon,
            quick,
            echo,
        })
    }
}

fn parse_caps(text: &str) -> CliResult<Caps> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Caps::Auto);
    }
    let nums: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::invalid(format!("--caps `{text}`: expected s,r,d or auto")))?;
    match nums[..] {
        [s, r, d] => Ok(Caps::Fixed(s, r, d)),
        _ => Err(CliError::invalid(format!(
            "--caps `{text}`: expected three values"
        ))),
    }
}
