//! Flag value grammars that clap does not cover directly.

use dsf_core::bench::{Generator, Method};

/// A comma-separated flag value, kept whole so clap does not split it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

/// `1..20` (inclusive) or a comma list `1,5,9`.
pub fn seeds(s: &str) -> Result<List<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u64 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range start {a:?}"))?;
        let hi: u64 = b
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range end {b:?}"))?;
        if lo > hi {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok(List((lo..=hi).collect()));
    }
    list(s, |v| {
        v.parse::<u64>().map_err(|_| format!("bad seed {v:?}"))
    })
    .map(List)
}

/// Comma list of `n` (square) or `nxm`.
pub fn sizes(s: &str) -> Result<List<(usize, usize)>, String> {
    list(s, |v| {
        let dim = |d: &str| {
            d.parse::<usize>()
                .ok()
                .filter(|&x| x > 0)
                .ok_or_else(|| format!("bad size {v:?}"))
        };
        match v.split_once('x') {
            Some((n, m)) => Ok((dim(n)?, dim(m)?)),
            None => {
                let n = dim(v)?;
                Ok((n, n))
            }
        }
    })
    .map(List)
}

pub fn methods(s: &str) -> Result<List<Method>, String> {
    list(s, |v| v.parse::<Method>().map_err(|e| e.to_string())).map(List)
}

/// `gaussian`, `planted` (factors sized for the bench density),
/// `planted:a,b,σ`, `lowrank:k,spike_density,σ` or `file:<path>`.
pub fn generator(s: &str, density: f64) -> Result<Generator, String> {
    let (kind, rest) = match s.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (s, None),
    };
    let floats = |r: &str, n: usize| -> Result<Vec<f64>, String> {
        let v = list(r, |x| {
            x.parse::<f64>().map_err(|_| format!("bad number {x:?}"))
        })?;
        if v.len() != n {
            return Err(format!("{kind} takes {n} parameters, got {}", v.len()));
        }
        Ok(v)
    };
    match (kind, rest) {
        ("gaussian", None) => Ok(Generator::Gaussian),
        ("planted", None) => Ok(Generator::planted_for(density)),
        ("planted", Some(r)) => {
            let v = floats(r, 3)?;
            Ok(Generator::PlantedDsf {
                a_density: v[0],
                b_density: v[1],
                noise: v[2],
            })
        }
        ("lowrank", Some(r)) => {
            let v = floats(r, 3)?;
            if v[0] < 0.0 || v[0].fract() != 0.0 {
                return Err(format!("rank must be a non-negative integer, got {}", v[0]));
            }
            Ok(Generator::LowrankPlusSparse {
                rank: v[0] as usize,
                spike_density: v[1],
                noise: v[2],
            })
        }
        ("file", Some(p)) if !p.is_empty() => Ok(Generator::File { path: p.into() }),
        _ => Err(format!(
            "unknown generator {s:?}; expected gaussian, planted[:a,b,sigma], lowrank:k,spikes,sigma or file:<path>"
        )),
    }
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(f)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}
