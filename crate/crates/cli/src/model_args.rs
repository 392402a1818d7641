use std::f64::consts::SQRT_2;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use ddestab::model::{builtin, builtin_names, BuiltinParams, SystemConfig};
use ddestab::ScalarFn;

use crate::experiment::{BuiltinModel, ModelSpec};
use crate::Verdict;

/// Where a model comes from: a builtin with overrides, or a JSON config.
#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// Builtin model name (see `ddestab model`).
    #[arg(long, conflicts_with = "config")]
    pub model: Option<String>,
    /// Builtin parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param, requires = "model")]
    pub params: Vec<(String, f64)>,
    /// JSON model config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let value = parse_number(v.trim())?;
    Ok((k.trim().to_string(), value))
}

/// A number, a constant expression such as `sqrt(2)`, or the alias
/// `sqrt2`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    if s == "sqrt2" {
        return Ok(SQRT_2);
    }
    let f = ScalarFn::parse(s).map_err(|e| format!("`{s}`: {e}"))?;
    if !f.ast().is_constant() {
        return Err(format!("`{s}` must not depend on t"));
    }
    let v = f.eval(0.0).map_err(|e| format!("`{s}`: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

impl ModelArgs {
    pub fn is_given(&self) -> bool {
        self.model.is_some() || self.config.is_some()
    }

    pub fn spec(&self) -> Result<Option<ModelSpec>> {
        if let Some(name) = &self.model {
            let params: BuiltinParams = self.params.iter().cloned().collect();
            return Ok(Some(ModelSpec::Builtin(BuiltinModel {
                name: name.clone(),
                params,
            })));
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg = SystemConfig::from_json(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            return Ok(Some(ModelSpec::System(cfg)));
        }
        Ok(None)
    }
}

#[derive(Args, Debug)]
pub struct ModelDumpArgs {
    /// Builtin to print; lists the builtins when omitted.
    pub name: Option<String>,
    /// Parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param, requires = "name")]
    pub params: Vec<(String, f64)>,
}

pub fn dump(args: ModelDumpArgs) -> Result<Verdict> {
    let Some(name) = args.name else {
        for n in builtin_names() {
            println!("{n}");
        }
        return Ok(Verdict::Positive);
    };
    let params: BuiltinParams = args.params.into_iter().collect();
    let (sys, hist) = builtin(&name, &params)?;
    let cfg = SystemConfig::from_system(&sys, &hist);
    println!("{}", serde_json::to_string_pretty(&cfg)?);
    Ok(Verdict::Positive)
}

pub fn need(value: Option<f64>, flag: &str) -> Result<f64> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing {flag}"),
    }
}
