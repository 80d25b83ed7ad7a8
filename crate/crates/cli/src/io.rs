//! File formats and argument parsing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use layerpot_core::kernels::{ConstKernel, FrozenKernel, KernelSpec};
use layerpot_core::matrixfield::{mat_from_row_major, MatrixField};
use layerpot_core::measures::DiscreteMeasure;
use layerpot_core::operators::{auto_delta_grid, DEFAULT_DELTA_COUNT};
use layerpot_core::Point;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Write { path: path.into(), source })
}

pub fn read_measure(path: &Path) -> CliResult<DiscreteMeasure> {
    let m: DiscreteMeasure = read_json(path)?;
    m.validate()?;
    Ok(m)
}

pub fn read_field(path: &Path) -> CliResult<MatrixField> {
    let f: MatrixField = read_json(path)?;
    f.validate()?;
    Ok(f)
}

/// Constant matrix file: a bare row-major array, `{"a": [...]}`, or a constant field.
pub fn read_matrix(path: &Path) -> CliResult<[f64; 9]> {
    let value: serde_json::Value = read_json(path)?;
    let arr = match &value {
        serde_json::Value::Array(_) => value.clone(),
        serde_json::Value::Object(map) => map.get("a").or_else(|| map.get("a0")).cloned().ok_or_else(|| {
            CliError::Config(format!("{}: expected a 9-entry array or an object with \"a\"", path.display()))
        })?,
        _ => return Err(CliError::Config(format!("{}: expected a row-major 9-entry array", path.display()))),
    };
    serde_json::from_value(arr).map_err(|source| CliError::Json { path: path.into(), source })
}

/// `x,y,z`.
pub fn parse_point(s: &str) -> CliResult<Point> {
    let v = parse_list(s)?;
    if v.len() != 3 {
        return Err(CliError::Usage(format!("expected three comma-separated coordinates, got {s:?}")));
    }
    Ok(Point::new(v[0], v[1], v[2]))
}

pub fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: {t:?}"))))
        .collect()
}

/// `--kernel {riesz, const:A0.json, frozen:field.json}`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelArg {
    Riesz,
    Const(PathBuf),
    Frozen(PathBuf),
}

impl FromStr for KernelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "riesz" => Ok(Self::Riesz),
            Some(("const", p)) if !p.is_empty() => Ok(Self::Const(p.into())),
            Some(("frozen", p)) if !p.is_empty() => Ok(Self::Frozen(p.into())),
            _ => Err(format!("expected riesz, const:FILE or frozen:FILE, got {s:?}")),
        }
    }
}

impl KernelArg {
    pub fn build(&self, budget: usize, seed: u64) -> CliResult<KernelSpec> {
        Ok(match self {
            Self::Riesz => KernelSpec::Riesz,
            Self::Const(p) => KernelSpec::Const(ConstKernel::new(mat_from_row_major(&read_matrix(p)?))?),
            Self::Frozen(p) => KernelSpec::Frozen(FrozenKernel::new(read_field(p)?, budget, seed)?),
        })
    }
}

/// `--delta-grid auto` or an explicit comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaGridArg {
    Auto(usize),
    List(Vec<f64>),
}

impl FromStr for DeltaGridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Self::Auto(DEFAULT_DELTA_COUNT));
        }
        if let Some(n) = s.strip_prefix("auto:") {
            return n.parse().map(Self::Auto).map_err(|_| format!("bad grid size in {s:?}"));
        }
        parse_list(s).map(Self::List).map_err(|e| e.to_string())
    }
}

impl DeltaGridArg {
    pub fn resolve(&self, measure: &DiscreteMeasure) -> CliResult<Vec<f64>> {
        match self {
            Self::Auto(n) => Ok(auto_delta_grid(measure, *n)?),
            Self::List(v) if v.iter().all(|d| *d > 0.0) && !v.is_empty() => Ok(v.clone()),
            Self::List(_) => Err(CliError::Usage("delta grid must be a nonempty list of positive radii".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_and_grid_arguments() {
        assert_eq!("riesz".parse::<KernelArg>().unwrap(), KernelArg::Riesz);
        assert_eq!("frozen:f.json".parse::<KernelArg>().unwrap(), KernelArg::Frozen("f.json".into()));
        assert_eq!("const:a.json".parse::<KernelArg>().unwrap(), KernelArg::Const("a.json".into()));
        assert!("frozen:".parse::<KernelArg>().is_err());
        assert!("laplace".parse::<KernelArg>().is_err());
        assert_eq!("auto".parse::<DeltaGridArg>().unwrap(), DeltaGridArg::Auto(DEFAULT_DELTA_COUNT));
        assert_eq!("auto:5".parse::<DeltaGridArg>().unwrap(), DeltaGridArg::Auto(5));
        assert_eq!("0.1, 0.2".parse::<DeltaGridArg>().unwrap(), DeltaGridArg::List(vec![0.1, 0.2]));
        assert!(parse_point("1,2").is_err());
        assert_eq!(parse_point("1,2,3").unwrap(), Point::new(1.0, 2.0, 3.0));
    }
}
