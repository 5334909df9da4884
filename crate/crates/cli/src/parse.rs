//! Parsers for vector and ladder flag values.

use fanlab_core::selfsim::geometric_ladder;
use nalgebra::DVector;

/// Comma-separated reals, e.g. `1,0.5,-2`.
pub fn vector(text: &str) -> Result<DVector<f64>, String> {
    let values = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number in vector `{text}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(format!("vector `{text}` has non-finite entries"));
    }
    Ok(DVector::from_vec(values))
}

/// Strictly decreasing viscosity ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder(pub Vec<f64>);

/// `start:floor:xratio` or a comma-separated list; must be strictly decreasing.
pub fn ladder(text: &str) -> Result<Ladder, String> {
    let eps = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, floor, ratio] = parts.as_slice() else {
            return Err(format!("ladder `{text}` must look like start:floor:xratio"));
        };
        let ratio = ratio
            .strip_prefix('x')
            .ok_or_else(|| format!("ladder ratio `{ratio}` must start with `x`"))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number in ladder `{text}`"));
        geometric_ladder(num(start)?, num(floor)?, num(ratio)?).map_err(|e| e.to_string())?
    } else {
        vector(text)?.iter().copied().collect()
    };
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(format!("ladder `{text}` must contain positive values"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(format!("ladder `{text}` must be strictly decreasing"));
    }
    Ok(Ladder(eps))
}

/// `key=value` with a JSON value, falling back to a string.
pub fn param(text: &str) -> Result<(String, serde_json::Value), String> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| format!("parameter `{text}` must look like key=value"))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    Ok((key.trim().to_string(), value))
}
