//! Parsers for the flag mini-languages: model specs, ranges, lists, grids.

use pathloss::analysis::{linear_grid, log_grid};
use pathloss::{AbgModel, CiModel, PathLossModel};

pub const GRAMMAR: &str = "\
MODEL SPECS
  spec   := ci | ab | abg
  ci     := \"ci:\"  num                     close-in, PLE n
  ab     := \"ab:\"  num \",\" num             alpha, beta [dB]; gamma fixed at 2
  abg    := \"abg:\" num \",\" num \",\" num     alpha, beta [dB], gamma
  specs  := spec (\",\" spec)*               a new spec starts at each prefix
  num    := decimal or scientific floating-point literal

  e.g. ci:3.1   ab:3.4,19.2   abg:3.5,24.4,1.9   ci:3.1,abg:3.5,24.4,1.9

RANGES AND GRIDS
  range  := num \":\" num                    inclusive, e.g. 19:272
  bands  := range (\",\" range)*             e.g. 2:18,28:73.5
  grid   := range \":\" (log | lin) \":\" count e.g. 1:1000:log:50

EXIT STATUS
  0 success, 1 I/O or usage error, 2 domain error (invalid data, failed fit)";

fn num(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn nums(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(num).collect()
}

// Newtypes so clap treats each flag value as one argument rather than a
// repeated one.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Bands(pub Vec<(f64, f64)>);

#[derive(Debug, Clone, PartialEq)]
pub struct Models(pub Vec<(String, PathLossModel)>);

pub fn list(s: &str) -> Result<Floats, String> {
    nums(s).map(Floats)
}

pub fn range(s: &str) -> Result<(f64, f64), String> {
    match s.split_once(':') {
        Some((lo, hi)) => Ok((num(lo)?, num(hi)?)),
        None => Err(format!("`{s}` is not a lo:hi range")),
    }
}

pub fn bands(s: &str) -> Result<Bands, String> {
    s.split(',').map(range).collect::<Result<_, _>>().map(Bands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub spacing: Spacing,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => log_grid(self.lo, self.hi, self.count),
            Spacing::Linear => linear_grid(self.lo, self.hi, self.count),
        }
    }
}

pub fn grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, spacing, count] = parts[..] else {
        return Err(format!("`{s}` is not lo:hi:log|lin:count"));
    };
    let spacing = match spacing {
        "log" => Spacing::Log,
        "lin" | "linear" => Spacing::Linear,
        other => return Err(format!("unknown spacing `{other}` (log or lin)")),
    };
    let count = count
        .trim()
        .parse()
        .map_err(|_| format!("`{count}` is not a point count"))?;
    Ok(Grid {
        lo: num(lo)?,
        hi: num(hi)?,
        spacing,
        count,
    })
}

fn build(kind: &str, args: &[f64], text: &str) -> Result<PathLossModel, String> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{text}`: {kind} takes {n} value(s), got {}", args.len()))
        }
    };
    let model: PathLossModel = match kind {
        "ci" => {
            arity(1)?;
            CiModel::new(args[0]).map_err(|e| e.to_string())?.into()
        }
        "ab" => {
            arity(2)?;
            AbgModel::with_fixed_gamma(args[0], args[1], 2.0)
                .map_err(|e| e.to_string())?
                .into()
        }
        "abg" => {
            arity(3)?;
            AbgModel::new(args[0], args[1], args[2])
                .map_err(|e| e.to_string())?
                .into()
        }
        other => return Err(format!("`{text}`: unknown model kind `{other}` (ci, ab, abg)")),
    };
    Ok(model)
}

pub fn model(s: &str) -> Result<PathLossModel, String> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("`{s}` is not a model spec (e.g. ci:3.1)"))?;
    build(kind.trim(), &nums(rest)?, s)
}

/// Splits `ci:3.1,abg:3.5,24.4,1.9` at each `kind:` prefix. Labels are the
/// spec text with `/` separating values so they stay single CSV fields.
pub fn models(s: &str) -> Result<Models, String> {
    let mut specs: Vec<String> = Vec::new();
    for token in s.split(',') {
        match specs.last_mut() {
            Some(last) if !token.contains(':') => {
                last.push(',');
                last.push_str(token);
            }
            _ => specs.push(token.to_string()),
        }
    }
    specs
        .iter()
        .map(|spec| Ok((spec.trim().replace(',', "/"), model(spec)?)))
        .collect::<Result<_, String>>()
        .map(Models)
}
