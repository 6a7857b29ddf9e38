//! Plain-text model checkpoints.
//!
//! ```text
//! abstain-model 1
//! {"method":{"method":"apc","phi":"logistic",...},"cost":0.2}
//! net classifier <d> <h> <out>
//! W1 <h*d values, row-major>
//! b1 <h values>
//! W2 <out*h values, row-major>
//! b2 <out values>
//! net rejector <d> <h> 1
//! W1 ...
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so a
//! save/load cycle reproduces every parameter bit for bit. The rejector block
//! is present only for classifier-rejector methods.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Method, Mlp, TrainedModel};
use crate::error::{Error, Result};
use crate::losses::RejectionCost;

const MAGIC: &str = "abstain-model 1";

#[derive(Serialize, Deserialize)]
struct Header {
    method: Method,
    cost: Option<RejectionCost>,
}

pub fn to_text(model: &TrainedModel, cost: Option<RejectionCost>) -> String {
    let mut s = String::new();
    let header = Header {
        method: model.method,
        cost,
    };
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "{}", serde_json::to_string(&header).expect("header serializes")).unwrap();
    write_net(&mut s, "classifier", &model.classifier);
    if let Some(r) = &model.rejector {
        write_net(&mut s, "rejector", r);
    }
    s
}

fn write_net(s: &mut String, role: &str, net: &Mlp) {
    let (d, h, o) = (net.input_dim(), net.hidden_dim(), net.output_dim());
    writeln!(s, "net {role} {d} {h} {o}").unwrap();
    let p = net.params();
    let cuts = [("W1", h * d), ("b1", h), ("W2", o * h), ("b2", o)];
    let mut at = 0;
    for (name, len) in cuts {
        s.push_str(name);
        for v in &p[at..at + len] {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
        at += len;
    }
}

pub fn from_text(text: &str) -> Result<(TrainedModel, Option<RejectionCost>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let parse_err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(parse_err(1, "missing checkpoint header")),
    }
    let (ln, json) = lines.next().ok_or_else(|| parse_err(2, "missing method line"))?;
    let header: Header = serde_json::from_str(json).map_err(|e| parse_err(ln, &e.to_string()))?;

    let mut nets = Vec::new();
    while let Some((ln, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "net" {
            return Err(parse_err(ln, "expected `net <role> <d> <h> <out>`"));
        }
        let dims: Vec<usize> = fields[2..]
            .iter()
            .map(|f| f.parse().map_err(|_| parse_err(ln, "bad dimension")))
            .collect::<Result<_>>()?;
        let (d, h, o) = (dims[0], dims[1], dims[2]);
        let mut params = Vec::with_capacity(Mlp::param_count(d, h, o));
        for (name, len) in [("W1", h * d), ("b1", h), ("W2", o * h), ("b2", o)] {
            let (ln, row) = lines.next().ok_or_else(|| parse_err(ln + 1, "truncated network"))?;
            let mut it = row.split_whitespace();
            if it.next() != Some(name) {
                return Err(parse_err(ln, &format!("expected `{name}`")));
            }
            let vals: Vec<f64> = it
                .map(|v| v.parse().map_err(|_| parse_err(ln, "bad number")))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(parse_err(ln, &format!("`{name}` needs {len} values, found {}", vals.len())));
            }
            params.extend(vals);
        }
        nets.push((fields[1].to_string(), Mlp::from_params(d, h, o, params)?));
    }
    let mut classifier = None;
    let mut rejector = None;
    for (role, net) in nets {
        match role.as_str() {
            "classifier" => classifier = Some(net),
            "rejector" => rejector = Some(net),
            other => return Err(Error::Config(format!("unknown network role `{other}`"))),
        }
    }
    let classifier = classifier.ok_or_else(|| Error::Config("checkpoint has no classifier".into()))?;
    Ok((TrainedModel::new(header.method, classifier, rejector)?, header.cost))
}

pub fn save(path: &Path, model: &TrainedModel, cost: Option<RejectionCost>) -> Result<()> {
    std::fs::write(path, to_text(model, cost)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(TrainedModel, Option<RejectionCost>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MarginLoss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = TrainedModel::new(
            Method::Apc {
                phi: MarginLoss::Logistic,
                psi: MarginLoss::Exponential,
                alpha: 1.0,
                beta: 4.5,
            },
            Mlp::init(3, 4, 5, &mut rng),
            Some(Mlp::init(3, 4, 1, &mut rng)),
        )
        .unwrap();
        let cost = Some(RejectionCost::new(0.3).unwrap());
        let (back, c) = from_text(&to_text(&model, cost)).unwrap();
        assert_eq!(back, model);
        assert_eq!(c, cost);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(from_text("nonsense").is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = TrainedModel::new(Method::Ce, Mlp::init(2, 2, 3, &mut rng), None).unwrap();
        let text = to_text(&model, None);
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(from_text(&cut).is_err());
    }
}
