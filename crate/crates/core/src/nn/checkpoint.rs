//! Plain-text network checkpoints.
//!
//! ```text
//! aoi-marl-densenet 1
//! output tanh
//! sizes 9 64 64 4
//! w <fan_in * fan_out values, row-major>
//! b <fan_out values>
//! ...one w/b pair per layer
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a load after a
//! save reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use super::dense::{DenseNet, OutputActivation};
use crate::error::{Error, Result};

const MAGIC: &str = "aoi-marl-densenet 1";

fn push_values<'a>(out: &mut String, tag: &str, values: impl Iterator<Item = &'a f64>) {
    out.push_str(tag);
    for v in values {
        write!(out, " {v:e}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

pub fn to_checkpoint_string(net: &DenseNet) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    writeln!(out, "output {}", net.output_activation().name()).unwrap();
    out.push_str("sizes");
    for s in net.sizes() {
        write!(out, " {s}").unwrap();
    }
    out.push('\n');
    for l in 0..net.num_layers() {
        push_values(&mut out, "w", net.weights(l).iter());
        push_values(&mut out, "b", net.bias(l).iter());
    }
    out
}

pub fn write_checkpoint<W: Write>(net: &DenseNet, mut writer: W) -> std::io::Result<()> {
    writer.write_all(to_checkpoint_string(net).as_bytes())
}

pub fn save_checkpoint(net: &DenseNet, path: &Path) -> Result<()> {
    std::fs::write(path, to_checkpoint_string(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<DenseNet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<DenseNet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: "<checkpoint>".into(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((n, Err(e))) => Err(parse_err(n, e.to_string())),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (n, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(parse_err(n, format!("expected header `{MAGIC}`")));
    }
    let (n, output) = next("output line")?;
    let output = output
        .strip_prefix("output ")
        .and_then(|s| OutputActivation::from_name(s.trim()))
        .ok_or_else(|| parse_err(n, "expected `output identity|tanh`".into()))?;
    let (n, sizes) = next("sizes line")?;
    let sizes: Vec<usize> = sizes
        .strip_prefix("sizes")
        .ok_or_else(|| parse_err(n, "expected `sizes ...`".into()))?
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(n, format!("bad layer size: {e}")))?;
    let mut net = DenseNet::zeros(&sizes, output).map_err(|e| parse_err(n, e.to_string()))?;

    let mut read_values = |tag: &str, expected: usize| -> Result<Vec<f64>> {
        let (n, line) = next(tag)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(parse_err(n, format!("expected `{tag}` row")));
        }
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(n, format!("bad number: {e}")))?;
        if values.len() != expected {
            return Err(parse_err(
                n,
                format!("expected {expected} values, found {}", values.len()),
            ));
        }
        Ok(values)
    };
    for l in 0..net.num_layers() {
        let w = read_values("w", net.weights(l).len())?;
        net.weights_mut(l).iter_mut().zip(w).for_each(|(p, v)| *p = v);
        let b = read_values("b", net.bias(l).len())?;
        net.bias_mut(l).iter_mut().zip(b).for_each(|(p, v)| *p = v);
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..12, scale in -300i32..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = DenseNet::new(&[3, hidden, 2], OutputActivation::Tanh, &mut rng).unwrap();
            let factor = 10f64.powi(scale);
            net.params_mut().for_each(|p| *p *= factor);
            let text = to_checkpoint_string(&net);
            let back = read_checkpoint(text.as_bytes()).unwrap();
            prop_assert_eq!(
                back.params().map(f64::to_bits).collect::<Vec<_>>(),
                net.params().map(f64::to_bits).collect::<Vec<_>>()
            );
            prop_assert_eq!(back.sizes(), net.sizes());
        }
    }

    #[test]
    fn rejects_truncated_and_malformed_input() {
        let net = DenseNet::zeros(&[2, 2], OutputActivation::Identity).unwrap();
        let text = to_checkpoint_string(&net);
        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(read_checkpoint(truncated.as_bytes()).is_err());
        assert!(read_checkpoint("not a checkpoint\n".as_bytes()).is_err());
        let bad = text.replace("w 0e0", "w zero");
        assert!(read_checkpoint(bad.as_bytes()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = DenseNet::new(&[4, 8, 3], OutputActivation::Identity, &mut rng).unwrap();
        save_checkpoint(&net, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), net);
    }
}
