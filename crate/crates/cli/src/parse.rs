//! Flag value parsers.

/// Rate with an optional unit suffix, returned in Mbps. A bare number is
/// taken as Mbps.
pub fn rate_mbps(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (num, scale) = [("gbps", 1e3), ("mbps", 1.0), ("kbps", 1e-3), ("bps", 1e-6)]
        .iter()
        .find_map(|(suffix, scale)| lower.strip_suffix(suffix).map(|n| (n.trim().to_string(), *scale)))
        .unwrap_or((lower.clone(), 1.0));
    let x: f64 = num.parse().map_err(|_| format!("not a rate: `{s}`"))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(format!("rate must be finite and non-negative: `{s}`"));
    }
    Ok(x * scale)
}

/// One `--grid` occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `a:b:step` (inclusive, ascending) or a comma list. Each flag occurrence
/// yields one group; see [`flatten`].
pub fn grid(s: &str) -> Result<Grid, String> {
    let num = |x: &str| {
        let x = x.trim();
        rate_mbps(x).map_err(|_| format!("bad grid value `{x}` in `{s}`"))
    };
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(format!("range must be start:stop:step, got `{s}`"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step <= 0.0 || b < a {
            return Err(format!("range needs start <= stop and step > 0, got `{s}`"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + step * i as f64).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("grid must be strictly ascending: `{s}`"));
    }
    Ok(Grid(values))
}

pub fn flatten(groups: Vec<Grid>) -> Vec<f64> {
    let mut all: Vec<f64> = groups.into_iter().flat_map(|g| g.0).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}
