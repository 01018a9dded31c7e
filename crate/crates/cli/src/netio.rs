//! Plain-text network files.
//!
//! ```text
//! layers 2
//! 4 3 relu
//! w00 w01 w02
//! ...
//! b0 b1 b2 b3
//! 1 4 identity
//! ...
//! ```
//!
//! Every real is written with 17 significant digits so files round-trip
//! exactly. Readers only care about whitespace-separated tokens.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use psmaddpg_core::envs::EnvSpec;
use psmaddpg_core::net::{Activation, Layer, LayeredNet};
use psmaddpg_core::trainers::{AgentEnsemble, TrainConfig, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::CliError;

fn real(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn write_net(net: &LayeredNet) -> String {
    let mut out = format!("layers {}\n", net.layers().len());
    for layer in net.layers() {
        writeln!(out, "{} {} {}", layer.out_dim(), layer.in_dim(), layer.activation()).unwrap();
        for row in layer.weights().chunks_exact(layer.in_dim()) {
            for (k, &w) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                real(&mut out, w);
            }
            out.push('\n');
        }
        for (k, &b) in layer.biases().iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            real(&mut out, b);
        }
        out.push('\n');
    }
    out
}

/// Whitespace tokens with the line each one came from.
struct Tokens<'a> {
    path: &'a Path,
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(path: &'a Path, text: &'a str, first_line: usize) -> Self {
        Tokens {
            path,
            inner: Box::new(
                text.lines()
                    .enumerate()
                    .flat_map(move |(i, l)| l.split_whitespace().map(move |t| (i + first_line, t))),
            ),
            last_line: first_line,
        }
    }

    fn error(&self, message: impl Into<String>) -> CliError {
        CliError::Format {
            path: self.path.to_path_buf(),
            line: self.last_line,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, CliError> {
        match self.inner.next() {
            Some((line, tok)) => {
                self.last_line = line;
                Ok(tok)
            }
            None => Err(self.error(format!("unexpected end of file, expected {what}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, CliError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| self.error(format!("expected {what}, found `{tok}`")))
    }
}

fn read_net_tokens(tokens: &mut Tokens<'_>) -> Result<LayeredNet, CliError> {
    let head = tokens.next("`layers`")?;
    if head != "layers" {
        return Err(tokens.error(format!("expected `layers`, found `{head}`")));
    }
    let count: usize = tokens.parse("layer count")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let out: usize = tokens.parse("output width")?;
        let inp: usize = tokens.parse("input width")?;
        let activation: Activation = tokens.parse("activation")?;
        let weights = (0..out * inp)
            .map(|_| tokens.parse::<f64>("weight"))
            .collect::<Result<Vec<_>, _>>()?;
        let biases = (0..out)
            .map(|_| tokens.parse::<f64>("bias"))
            .collect::<Result<Vec<_>, _>>()?;
        layers.push(
            Layer::new(inp, out, activation, weights, biases).map_err(|e| tokens.error(e.to_string()))?,
        );
    }
    LayeredNet::from_layers(layers).map_err(|e| tokens.error(e.to_string()))
}

/// Parses one net. `path` is only used in error messages.
pub fn read_net(text: &str, path: &Path) -> Result<LayeredNet, CliError> {
    let mut tokens = Tokens::new(path, text, 1);
    let net = read_net_tokens(&mut tokens)?;
    if let Ok(extra) = tokens.next("") {
        return Err(tokens.error(format!("trailing token `{extra}`")));
    }
    Ok(net)
}

/// The first line of every ensemble file: `variant N gamma tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub variant: Variant,
    pub n_agents: usize,
    pub gamma: f64,
    pub tau: f64,
}

impl Manifest {
    pub fn line(&self) -> String {
        format!("{} {} {} {}", self.variant, self.n_agents, self.gamma, self.tau)
    }
}

/// Writes one `<name>.net` file per network into `dir`.
pub fn save_ensemble(ensemble: &AgentEnsemble, cfg: &TrainConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = Manifest {
        variant: ensemble.variant(),
        n_agents: ensemble.n_agents(),
        gamma: cfg.gamma,
        tau: cfg.tau,
    };
    let mut written = Vec::new();
    for (name, net) in ensemble.named_nets() {
        let path = dir.join(format!("{name}.net"));
        let body = format!("{}\n{}", manifest.line(), write_net(net));
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Rebuilds an ensemble saved by [`save_ensemble`]. Optimizer state starts fresh.
pub fn load_ensemble(dir: &Path, spec: &EnvSpec, cfg: &TrainConfig) -> Result<AgentEnsemble, CliError> {
    let mut ensemble = AgentEnsemble::new(spec, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let names: Vec<String> = ensemble.named_nets().into_iter().map(|(n, _)| n).collect();
    for name in names {
        let path = dir.join(format!("{name}.net"));
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let mut tokens = Tokens::new(&path, &text, 1);
        let variant: Variant = tokens.parse("variant")?;
        let n_agents: usize = tokens.parse("agent count")?;
        let gamma: f64 = tokens.parse("gamma")?;
        let tau: f64 = tokens.parse("tau")?;
        let manifest = Manifest {
            variant,
            n_agents,
            gamma,
            tau,
        };
        if variant != cfg.variant || n_agents != spec.n_agents {
            return Err(tokens.error(format!(
                "manifest `{}` does not match {} with {} agents",
                manifest.line(),
                cfg.variant,
                spec.n_agents
            )));
        }
        let net = read_net_tokens(&mut tokens)?;
        ensemble
            .replace_net(&name, net)
            .map_err(|e| tokens.error(e.to_string()))?;
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_layout() {
        let net = LayeredNet::from_layers(vec![Layer::new(
            2,
            1,
            Activation::Tanh,
            vec![0.5, -1.0],
            vec![0.1],
        )
        .unwrap()])
        .unwrap();
        let text = write_net(&net);
        assert_eq!(
            text,
            "layers 1\n1 2 tanh\n5.0000000000000000e-1 -1.0000000000000000e0\n1.0000000000000001e-1\n"
        );
        assert_eq!(read_net(&text, Path::new("x")).unwrap(), net);
    }

    #[test]
    fn bad_inputs_report_lines() {
        let p = Path::new("bad.net");
        let err = read_net("layers 1\n1 1 swish\n1.0\n0.0\n", p).unwrap_err();
        assert!(matches!(err, CliError::Format { line: 2, .. }), "{err}");
        let err = read_net("layers 1\n1 2 relu\n1.0\n", p).unwrap_err();
        assert!(err.to_string().contains("end of file"));
        let err = read_net("layers 1\n1 1 relu\n1.0 0.0 7\n", p).unwrap_err();
        assert!(err.to_string().contains("trailing"));
        let err = read_net("layers 2\n2 1 relu\n1 1\n0 0\n1 3 relu\n1 1 1\n0\n", p).unwrap_err();
        assert!(matches!(err, CliError::Format { .. }));
        assert!(read_net("layers 1\n1 1 relu\nNaN\n0\n", p).is_err());
    }
}
