//! Metric and tensor names as used in configs and on the command line.
//!
//! - `flat`
//! - `constant:[g11,g12,g22]`
//! - `conformal:{amp, ku, kv}` (also `{amp=0.1,ku=1,kv=0}` or JSON keys)
//! - `grid:<path to CSV>`

use std::path::Path;
use std::sync::Arc;

use super::grid::GridMetric;
use super::tensor::{Sym2, TensorField, TrigPoly};
use super::MetricField;
use crate::error::{Error, Result};

fn parse_numbers(body: &str, open: char, close: char, what: &str) -> Result<Vec<(Option<String>, f64)>> {
    let body = body.trim();
    let inner = body
        .strip_prefix(open)
        .and_then(|b| b.strip_suffix(close))
        .ok_or_else(|| Error::parse(what, format!("expected '{open}...{close}', found '{body}'")))?;
    inner
        .split(',')
        .map(|item| {
            let item = item.trim();
            let (key, val) = match item.find(['=', ':']) {
                Some(k) => (
                    Some(item[..k].trim().trim_matches('"').to_string()),
                    item[k + 1..].trim(),
                ),
                None => (None, item),
            };
            val.parse::<f64>()
                .map(|x| (key, x))
                .map_err(|e| Error::parse(what, format!("'{item}': {e}")))
        })
        .collect()
}

fn parse_sym(body: &str, what: &str) -> Result<Sym2> {
    let nums = parse_numbers(body, '[', ']', what)?;
    if nums.len() != 3 {
        return Err(Error::parse(what, format!("expected 3 coefficients, found {}", nums.len())));
    }
    Ok(Sym2::new(nums[0].1, nums[1].1, nums[2].1))
}

fn frequency(x: f64, what: &str) -> Result<i32> {
    if x.fract() != 0.0 || x.abs() > 1e6 {
        return Err(Error::parse(what, format!("frequency {x} must be an integer for periodicity")));
    }
    Ok(x as i32)
}

fn parse_conformal(body: &str) -> Result<MetricField> {
    let what = "conformal metric";
    let nums = parse_numbers(body, '{', '}', what)?;
    let (mut amp, mut ku, mut kv) = (None, None, None);
    for (pos, (key, val)) in nums.iter().enumerate() {
        let slot = match key.as_deref() {
            Some("amp") => &mut amp,
            Some("ku") => &mut ku,
            Some("kv") => &mut kv,
            Some(other) => return Err(Error::parse(what, format!("unknown key '{other}'"))),
            None => match pos {
                0 => &mut amp,
                1 => &mut ku,
                2 => &mut kv,
                _ => return Err(Error::parse(what, "too many values")),
            },
        };
        *slot = Some(*val);
    }
    let amp = amp.ok_or_else(|| Error::parse(what, "missing amp"))?;
    let ku = frequency(ku.unwrap_or(1.0), what)?;
    let kv = frequency(kv.unwrap_or(0.0), what)?;
    Ok(MetricField::conformal(amp, ku, kv))
}

/// Parses a catalog metric name. `grid_n` is the declared node count for `grid:` entries.
pub fn parse_metric(name: &str, grid_n: Option<usize>) -> Result<MetricField> {
    let name = name.trim();
    let field = if name == "flat" {
        MetricField::flat()
    } else if let Some(rest) = name.strip_prefix("constant:") {
        MetricField::Constant(parse_sym(rest, "constant metric")?)
    } else if let Some(rest) = name.strip_prefix("conformal:") {
        parse_conformal(rest)?
    } else if let Some(rest) = name.strip_prefix("grid:") {
        MetricField::Grid(Arc::new(GridMetric::from_csv_path(Path::new(rest.trim()), grid_n)?))
    } else {
        return Err(Error::parse(
            "metric",
            format!("unknown metric '{name}' (expected flat, constant:[..], conformal:{{..}} or grid:<path>)"),
        ));
    };
    field.validate_on_grid(64)?;
    Ok(field)
}

/// Parses a perturbation direction: `zero`, `identity`, `constant:[a11,a12,a22]` or `cos_u:[a]`.
/// Other trigonometric directions go through the JSON form of [`TensorField`].
pub fn parse_tensor(name: &str) -> Result<TensorField> {
    let name = name.trim();
    if name == "zero" {
        Ok(TensorField::zero())
    } else if name == "identity" {
        Ok(TensorField::Constant(Sym2::IDENTITY))
    } else if let Some(rest) = name.strip_prefix("constant:") {
        Ok(TensorField::Constant(parse_sym(rest, "tensor")?))
    } else if let Some(rest) = name.strip_prefix("cos_u:") {
        // a·cos(u) on the g11 entry, a convenience for non-constant additive families
        let nums = parse_numbers(rest, '[', ']', "tensor")?;
        let a = nums.first().map(|x| x.1).unwrap_or(1.0);
        Ok(TensorField::Trig {
            a11: TrigPoly::cosine(a, 1, 0),
            a12: TrigPoly::zero(),
            a22: TrigPoly::zero(),
        })
    } else {
        Err(Error::parse("tensor", format!("unknown tensor '{name}'")))
    }
}
