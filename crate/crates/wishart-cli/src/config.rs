//! Argument parsing with an optional flat key=value config file, and the
//! run manifest that records every resolved parameter.
//!
//! Config keys are flag names without the leading dashes (`gamma-sq=0.25`,
//! `plot=true`). File values are spliced in front of the command-line flags
//! and repeated flags override earlier ones, so the command line wins. The
//! manifest has the same format, plus a `command=` line, so
//! `wishart --config run-manifest` replays a run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use clap::{CommandFactory, FromArgMatches};

use crate::{Cli, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Flag,
    File,
    Default,
}

/// Resolved parameters of one run.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    entries: Vec<(String, String, Source)>,
    /// (key, file value, flag value) for flags that replaced a file value.
    overrides: Vec<(String, String, String)>,
    config: Option<String>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# wishart run manifest; replay with `wishart --config <this file>`\n");
        let _ = writeln!(s, "# wishart-cli {}", env!("CARGO_PKG_VERSION"));
        if let Some(c) = &self.config {
            let _ = writeln!(s, "# config file: {c}");
        }
        let _ = writeln!(s, "command={}", self.command);
        for (k, v, _) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        for (label, src) in [("flag", Source::Flag), ("config file", Source::File), ("default", Source::Default)] {
            let keys: Vec<&str> = self
                .entries
                .iter()
                .filter(|e| e.2 == src)
                .map(|e| e.0.as_str())
                .collect();
            if !keys.is_empty() {
                let _ = writeln!(s, "# from {label}: {}", keys.join(", "));
            }
        }
        for (k, file, flag) in &self.overrides {
            let _ = writeln!(s, "# overridden by flag: {k} (config file {file}, flag {flag})");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let path = dir.join("run-manifest");
        std::fs::write(&path, self.to_text())
            .map_err(|e| Failure::Io(format!("writing {}: {e}", path.display())))
    }
}

/// Reads a flat key=value file. Blank lines and `#` comments are skipped;
/// keys accept `_` for `-`. Later duplicates win.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("reading config {}: {e}", path.display())))?;
    parse_config_text(&text, path)
}

fn parse_config_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                i + 1
            )));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Failure::Usage(format!("{}:{}: empty key", path.display(), i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Pulls `--config FILE` / `--config=FILE` out of the argument list.
fn take_config(args: &mut Vec<String>) -> Result<Option<String>, Failure> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err(Failure::Usage("--config needs a file".into()));
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(v) = args[i].strip_prefix("--config=") {
            found = Some(v.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Long names given on the command line.
fn flag_keys(args: &[String]) -> BTreeSet<String> {
    args.iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

fn clap_command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Parses `argv` (program name first), merging the config file if one is
/// given. Clap's own usage errors print and exit with status 2 here.
pub fn parse(argv: Vec<String>) -> Result<(Cli, Manifest), Failure> {
    let mut args: Vec<String> = argv.into_iter().collect();
    let prog = if args.is_empty() { "wishart".to_string() } else { args.remove(0) };
    let config_path = take_config(&mut args)?;
    let file = match &config_path {
        Some(p) => read_config(Path::new(p))?,
        None => BTreeMap::new(),
    };

    let cmd = clap_command();
    // With --config removed, the subcommand (if any) is the first token.
    let given = args.first().filter(|a| !a.starts_with('-')).cloned();
    let sub_name = match (given, file.get("command")) {
        (Some(g), Some(c)) if &g != c => {
            return Err(Failure::Usage(format!("config file is for `{c}` but the command is `{g}`")))
        }
        (Some(g), _) => g,
        (None, Some(c)) => {
            args.insert(0, c.clone());
            c.clone()
        }
        (None, None) => String::new(),
    };

    let mut file_args = Vec::new();
    if let (Some(sub), Some(_)) = (cmd.find_subcommand(&sub_name), &config_path) {
        for (key, value) in &file {
            if key == "command" {
                continue;
            }
            let arg = sub
                .get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
                .ok_or_else(|| Failure::Usage(format!("unknown key `{key}` in config file for `{sub_name}`")))?;
            if arg.get_action().takes_values() {
                file_args.push(format!("--{key}"));
                file_args.push(value.clone());
            } else {
                match value.as_str() {
                    "true" => file_args.push(format!("--{key}")),
                    "false" => {}
                    other => {
                        return Err(Failure::Usage(format!("config key `{key}` expects true or false, got `{other}`")))
                    }
                }
            }
        }
    }

    let user_keys = flag_keys(&args);
    let mut full = vec![prog];
    if sub_name.is_empty() {
        full.extend(args);
    } else {
        full.push(args.remove(0));
        full.extend(file_args);
        full.extend(args);
    }

    let matches = match cmd.clone().try_get_matches_from(&full) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());

    let (name, sub_m) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut entries = Vec::new();
    let mut overrides = Vec::new();
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(key) = arg.get_long() else { continue };
        if matches!(key, "help" | "version" | "config") {
            continue;
        }
        let Ok(Some(raw)) = sub_m.try_get_raw(id) else { continue };
        let value: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let value = value.join(",");
        let source = if user_keys.contains(key) {
            Source::Flag
        } else if file.contains_key(key) {
            Source::File
        } else {
            Source::Default
        };
        if source == Source::Flag {
            if let Some(fv) = file.get(key) {
                if *fv != value {
                    overrides.push((key.to_string(), fv.clone(), value.clone()));
                }
            }
        }
        entries.push((key.to_string(), value, source));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let manifest = Manifest {
        command: name.to_string(),
        entries,
        overrides,
        config: config_path,
    };
    Ok((cli, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Command;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn grid_flag_is_kept_verbatim() {
        let (cli, m) = parse(argv("wishart density --spectrum s.txt --gamma-sq 0.25 --grid 0:3:600")).unwrap();
        match cli.command {
            Command::Density(d) => assert_eq!(d.grid.as_deref(), Some("0:3:600")),
            other => panic!("wrong command {other:?}"),
        }
        let text = m.to_text();
        assert!(text.contains("command=density\n"));
        assert!(text.contains("grid=0:3:600\n"));
        assert!(text.contains("gamma-sq=0.25\n"));
        // Defaults are resolved into the manifest too.
        assert!(text.contains("out=wishart-out\n"));
        assert!(text.contains("plot=false\n"));
    }

    #[test]
    fn config_text_parsing() {
        let p = Path::new("cfg");
        let m = parse_config_text("# c\n\ngamma_sq = 0.5\nplot=true\n", p).unwrap();
        assert_eq!(m["gamma-sq"], "0.5");
        assert_eq!(m["plot"], "true");
        assert!(matches!(parse_config_text("novalue\n", p), Err(Failure::Usage(_))));
    }

    #[test]
    fn flag_overrides_file_and_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "spectrum=s.txt\ngamma-sq=0.5\n").unwrap();
        let a = format!("wishart density --config {} --gamma-sq 0.25", cfg.display());
        let (cli, m) = parse(argv(&a)).unwrap();
        match cli.command {
            Command::Density(d) => assert_eq!(d.base.aspect.gamma_sq, Some(0.25)),
            other => panic!("wrong command {other:?}"),
        }
        let text = m.to_text();
        assert!(text.contains("gamma-sq=0.25\n"));
        assert!(text.contains("# overridden by flag: gamma-sq (config file 0.5, flag 0.25)"));
        assert!(text.contains("# from config file: spectrum"));
    }

    #[test]
    fn manifest_round_trips() {
        let (_, m) = parse(argv("wishart support --spectrum s.txt --n 30 --plot")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.write(dir.path()).unwrap();
        let path = dir.path().join("run-manifest");
        let a = format!("wishart --config {}", path.display());
        let (cli, m2) = parse(argv(&a)).unwrap();
        assert!(matches!(cli.command, Command::Support(_)));
        let strip = |t: String| t.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(m.to_text()), strip(m2.to_text()));
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "spectrum=s.txt\nbogus=1\n").unwrap();
        let a = format!("wishart support --n 3 --config {}", cfg.display());
        assert!(matches!(parse(argv(&a)), Err(Failure::Usage(_))));
    }

    #[test]
    fn command_mismatch_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "command=support\n").unwrap();
        let a = format!("wishart density --config {}", cfg.display());
        assert!(matches!(parse(argv(&a)), Err(Failure::Usage(_))));
    }
}
