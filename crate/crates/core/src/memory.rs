//! Optimizer-state memory accounting for layer manifests.
//!
//! Only parameters and optimizer states are counted. Activations, batches
//! and allocator overhead are out of scope. All byte totals are exact
//! integers; megabytes are decimal (`1 MB = 10⁶ bytes`).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};

/// Optimizer a layer's state is accounted under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Routing {
    Foam { level: u32 },
    Adam,
    AdamMini,
    Galore { rank: u64 },
    Apollo { rank: u64 },
    Muon,
    FoamMini,
}

impl Routing {
    /// Closed-form state size from the comparison table, in elements.
    pub fn formula(&self) -> &'static str {
        match self {
            Routing::Adam => "2mn",
            Routing::Muon | Routing::AdamMini => "mn",
            Routing::Galore { .. } | Routing::Apollo { .. } => "mr + 2nr",
            Routing::Foam { .. } => "mn/2^(l-1)",
            Routing::FoamMini => "2m",
        }
    }

    pub fn label(&self) -> String {
        match self {
            Routing::Foam { level } => format!("foam(l={level})"),
            Routing::Adam => "adam".into(),
            Routing::AdamMini => "adam_mini".into(),
            Routing::Galore { rank } => format!("galore(r={rank})"),
            Routing::Apollo { rank } => format!("apollo(r={rank})"),
            Routing::Muon => "muon".into(),
            Routing::FoamMini => "foam_mini".into(),
        }
    }
}

fn check_dims(m: u64, n: u64) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(FoamError::Domain(format!("layer dims must be positive, got {m}×{n}")));
    }
    Ok(())
}

fn check_rank(rank: u64, m: u64, n: u64) -> Result<()> {
    if rank == 0 || rank > m.min(n) {
        return Err(FoamError::Domain(format!("rank {rank} must lie in 1..={} for a {m}×{n} layer", m.min(n))));
    }
    Ok(())
}

/// `ceil(n / 2^level)` without overflow for large levels.
fn folded_width(n: u64, level: u32) -> u64 {
    if level >= 64 {
        return 1;
    }
    let block = 1u64 << level;
    n.div_ceil(block)
}

/// Optimizer-state elements for an `m × n` layer.
///
/// Low-rank methods keep the projection on the shorter side, so `m` and `n`
/// are swapped when `m > n`. FOAM rounds a partial last block up.
///
/// ```
/// use foam::memory::{state_elements, Routing};
///
/// assert_eq!(state_elements(Routing::Adam, 4, 8).unwrap(), 64);
/// assert_eq!(state_elements(Routing::Foam { level: 2 }, 4, 8).unwrap(), 16);
/// assert_eq!(state_elements(Routing::FoamMini, 4, 8).unwrap(), 8);
/// ```
pub fn state_elements(routed: Routing, m: u64, n: u64) -> Result<u64> {
    check_dims(m, n)?;
    Ok(match routed {
        Routing::Adam => 2 * m * n,
        Routing::Muon | Routing::AdamMini => m * n,
        Routing::Galore { rank } | Routing::Apollo { rank } => {
            check_rank(rank, m, n)?;
            let (short, long) = if m <= n { (m, n) } else { (n, m) };
            short * rank + 2 * long * rank
        }
        Routing::Foam { level } => 2 * m * folded_width(n, level),
        Routing::FoamMini => 2 * m,
    })
}

/// The table's symbolic form taken literally: no orientation swap, and FOAM
/// requires `2^l` to divide `n`.
pub fn symbolic_state_elements(routed: Routing, m: u64, n: u64) -> Result<u64> {
    check_dims(m, n)?;
    match routed {
        Routing::Galore { rank } | Routing::Apollo { rank } => {
            check_rank(rank, m, n)?;
            Ok(m * rank + 2 * n * rank)
        }
        Routing::Foam { level } => {
            if level >= 64 || !n.is_multiple_of(1u64 << level) {
                return Err(FoamError::Domain(format!("2^{level} does not divide n = {n}")));
            }
            // mn / 2^(l-1), written to stay integral at l = 0.
            Ok((2 * m * n) >> level)
        }
        other => state_elements(other, m, n),
    }
}

/// One entry of a manifest. `shape` is `[m, n]` or `[len]`; a vector of
/// length `len` is accounted as `1 × len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerManifest {
    pub name: String,
    pub shape: Vec<u64>,
    pub dtype_bytes: u64,
    pub routed: Routing,
}

impl LayerManifest {
    pub fn new(name: impl Into<String>, shape: Vec<u64>, dtype_bytes: u64, routed: Routing) -> Self {
        LayerManifest {
            name: name.into(),
            shape,
            dtype_bytes,
            routed,
        }
    }

    pub fn dims(&self) -> Result<(u64, u64)> {
        let (m, n) = match self.shape[..] {
            [m, n] => (m, n),
            [len] => (1, len),
            _ => {
                return Err(FoamError::config(
                    format!("{}.shape", self.name),
                    format!("expected [m, n] or [len], got {} dims", self.shape.len()),
                ))
            }
        };
        if m == 0 || n == 0 {
            return Err(FoamError::config(format!("{}.shape", self.name), "dims must be positive"));
        }
        Ok((m, n))
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()?;
        if ![1, 2, 4, 8].contains(&self.dtype_bytes) {
            return Err(FoamError::config(
                format!("{}.dtype_bytes", self.name),
                format!("must be 1, 2, 4 or 8, got {}", self.dtype_bytes),
            ));
        }
        Ok(())
    }

    pub fn param_elements(&self) -> Result<u64> {
        let (m, n) = self.dims()?;
        Ok(m * n)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<LayerManifest>> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text)
}

pub fn parse_manifest(json: &str) -> Result<Vec<LayerManifest>> {
    let layers: Vec<LayerManifest> = serde_json::from_str(json)?;
    if layers.is_empty() {
        return Err(FoamError::config("manifest", "no layers"));
    }
    for l in &layers {
        l.validate()?;
    }
    Ok(layers)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMemory {
    pub name: String,
    pub routed: Routing,
    pub param_bytes: u64,
    pub state_bytes: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryTotals {
    pub param_bytes: u64,
    pub state_bytes: u64,
    pub grand_total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub method: String,
    pub formula: String,
    pub layers: Vec<LayerMemory>,
    pub totals: MemoryTotals,
}

pub fn megabytes(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

/// Parameter and state bytes per layer under each layer's own routing.
///
/// ```
/// use foam::memory::{estimate, LayerManifest, Routing};
///
/// let layers = [LayerManifest::new("w", vec![1, 1], 2, Routing::Adam)];
/// let report = estimate(&layers).unwrap();
/// assert_eq!(report.totals.param_bytes, 2);
/// assert_eq!(report.totals.state_bytes, 4);
/// ```
pub fn estimate(manifest: &[LayerManifest]) -> Result<MemoryReport> {
    estimate_labelled(manifest, "manifest".into(), "per layer".into())
}

fn estimate_labelled(manifest: &[LayerManifest], method: String, formula: String) -> Result<MemoryReport> {
    if manifest.is_empty() {
        return Err(FoamError::config("manifest", "no layers"));
    }
    let mut layers = Vec::with_capacity(manifest.len());
    let mut totals = MemoryTotals::default();
    for l in manifest {
        l.validate()?;
        let (m, n) = l.dims()?;
        let param_bytes = m * n * l.dtype_bytes;
        let state_bytes = state_elements(l.routed, m, n)? * l.dtype_bytes;
        totals.param_bytes += param_bytes;
        totals.state_bytes += state_bytes;
        layers.push(LayerMemory {
            name: l.name.clone(),
            routed: l.routed,
            param_bytes,
            state_bytes,
        });
    }
    totals.grand_total = totals.param_bytes + totals.state_bytes;
    Ok(MemoryReport {
        method,
        formula,
        layers,
        totals,
    })
}

/// Rank choice for low-rank methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankSpec {
    Fixed(u64),
    /// `max(1, min(m, n) / d)` per layer.
    Fraction(u64),
}

impl RankSpec {
    fn rank_for(&self, m: u64, n: u64) -> u64 {
        match *self {
            RankSpec::Fixed(r) => r,
            RankSpec::Fraction(d) => (m.min(n) / d).max(1),
        }
    }

    fn label(&self) -> String {
        match self {
            RankSpec::Fixed(r) => format!("r={r}"),
            RankSpec::Fraction(d) => format!("r=min(m,n)/{d}"),
        }
    }
}

/// Whole-model accounting method applied to a manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Every layer under its manifest routing.
    Manifest,
    /// Every layer under Adam.
    Adam,
    AdamMini,
    Muon,
    Galore(RankSpec),
    Apollo(RankSpec),
    Foam(u32),
    FoamMini,
}

impl Method {
    /// All methods compared by default, with low-rank methods at a quarter of
    /// the short side.
    pub fn all() -> Vec<Method> {
        vec![
            Method::Adam,
            Method::AdamMini,
            Method::Muon,
            Method::Galore(RankSpec::Fraction(4)),
            Method::Apollo(RankSpec::Fraction(4)),
            Method::Foam(1),
            Method::Foam(2),
            Method::Foam(3),
            Method::FoamMini,
        ]
    }

    /// Parses `adam`, `adam_mini`, `muon`, `foam:<l>`, `foam_mini`,
    /// `galore:<r>`, `galore:1/<d>` (same for `apollo`) and `manifest`.
    pub fn parse(s: &str) -> Result<Method> {
        let bad = |msg: String| FoamError::config("methods", msg);
        let (name, arg) = match s.trim().split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.trim(), None),
        };
        let rank = |arg: Option<&str>| -> Result<RankSpec> {
            match arg {
                None => Ok(RankSpec::Fraction(4)),
                Some(a) => {
                    if let Some(d) = a.strip_prefix("1/") {
                        match d.parse::<u64>() {
                            Ok(d) if d > 0 => Ok(RankSpec::Fraction(d)),
                            _ => Err(bad(format!("bad rank fraction in {s:?}"))),
                        }
                    } else {
                        match a.parse::<u64>() {
                            Ok(r) if r > 0 => Ok(RankSpec::Fixed(r)),
                            _ => Err(bad(format!("bad rank in {s:?}"))),
                        }
                    }
                }
            }
        };
        let no_arg = |m: Method| match arg {
            None => Ok(m),
            Some(_) => Err(bad(format!("{name} takes no argument"))),
        };
        match name {
            "manifest" => no_arg(Method::Manifest),
            "adam" => no_arg(Method::Adam),
            "adam_mini" => no_arg(Method::AdamMini),
            "muon" => no_arg(Method::Muon),
            "foam_mini" => no_arg(Method::FoamMini),
            "galore" => Ok(Method::Galore(rank(arg)?)),
            "apollo" => Ok(Method::Apollo(rank(arg)?)),
            "foam" => match arg.map(str::parse::<u32>) {
                Some(Ok(l)) => Ok(Method::Foam(l)),
                None => Err(bad("foam needs a level, e.g. foam:2".into())),
                Some(Err(_)) => Err(bad(format!("bad foam level in {s:?}"))),
            },
            _ => Err(bad(format!("unknown method {name:?}"))),
        }
    }

    /// Comma-separated list; empty means [`Method::all`].
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        if s.trim().is_empty() {
            return Ok(Method::all());
        }
        s.split(',').map(Method::parse).collect()
    }

    pub fn label(&self) -> String {
        match self {
            Method::Manifest => "manifest".into(),
            Method::Adam => "adam".into(),
            Method::AdamMini => "adam_mini".into(),
            Method::Muon => "muon".into(),
            Method::Galore(r) => format!("galore({})", r.label()),
            Method::Apollo(r) => format!("apollo({})", r.label()),
            Method::Foam(l) => format!("foam(l={l})"),
            Method::FoamMini => "foam_mini".into(),
        }
    }

    pub fn formula(&self) -> String {
        match self {
            Method::Manifest => "per layer".into(),
            Method::Adam => Routing::Adam.formula().into(),
            Method::AdamMini => Routing::AdamMini.formula().into(),
            Method::Muon => Routing::Muon.formula().into(),
            Method::Galore(_) | Method::Apollo(_) => "mr + 2nr".into(),
            Method::Foam(_) => "mn/2^(l-1)".into(),
            Method::FoamMini => Routing::FoamMini.formula().into(),
        }
    }

    /// Routing of one layer under this method. Layers the manifest routes to
    /// Adam (embeddings, norms, heads) stay on Adam except under
    /// [`Method::Adam`], which moves everything.
    fn route(&self, layer: &LayerManifest) -> Result<Routing> {
        if *self == Method::Manifest {
            return Ok(layer.routed);
        }
        if *self == Method::Adam {
            return Ok(Routing::Adam);
        }
        if layer.routed == Routing::Adam {
            return Ok(Routing::Adam);
        }
        let (m, n) = layer.dims()?;
        Ok(match *self {
            Method::AdamMini => Routing::AdamMini,
            Method::Muon => Routing::Muon,
            Method::Galore(r) => Routing::Galore { rank: r.rank_for(m, n) },
            Method::Apollo(r) => Routing::Apollo { rank: r.rank_for(m, n) },
            Method::Foam(level) => Routing::Foam { level },
            Method::FoamMini => Routing::FoamMini,
            Method::Manifest | Method::Adam => unreachable!(),
        })
    }
}

/// Re-routes the manifest under `method` and accounts it.
pub fn estimate_method(manifest: &[LayerManifest], method: Method) -> Result<MemoryReport> {
    let routed = manifest
        .iter()
        .map(|l| {
            Ok(LayerManifest {
                routed: method.route(l)?,
                ..l.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    estimate_labelled(&routed, method.label(), method.formula())
}

/// Aligned plain-text summary, one row per report, sizes in MB.
pub fn render_table(reports: &[MemoryReport]) -> String {
    let method_w = reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
    let formula_w = reports.iter().map(|r| r.formula.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<method_w$}  {:<formula_w$}  {:>12}  {:>12}  {:>12}",
        "method", "formula", "params MB", "states MB", "total MB"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<method_w$}  {:<formula_w$}  {:>12.2}  {:>12.2}  {:>12.2}",
            r.method,
            r.formula,
            megabytes(r.totals.param_bytes),
            megabytes(r.totals.state_bytes),
            megabytes(r.totals.grand_total),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(state_elements(Routing::Muon, 4, 8).unwrap(), 32);
        assert_eq!(state_elements(Routing::AdamMini, 4, 8).unwrap(), 32);
        assert_eq!(state_elements(Routing::Galore { rank: 2 }, 4, 8).unwrap(), 8 + 32);
        assert_eq!(state_elements(Routing::Foam { level: 0 }, 4, 8).unwrap(), 64);
        assert_eq!(state_elements(Routing::Foam { level: 1 }, 4, 8).unwrap(), 32);
    }

    #[test]
    fn low_rank_orientation_swaps() {
        let wide = state_elements(Routing::Galore { rank: 2 }, 4, 8).unwrap();
        let tall = state_elements(Routing::Apollo { rank: 2 }, 8, 4).unwrap();
        assert_eq!(wide, tall);
        assert_eq!(symbolic_state_elements(Routing::Galore { rank: 2 }, 8, 4).unwrap(), 16 + 16);
        assert!(state_elements(Routing::Galore { rank: 5 }, 4, 8).is_err());
        assert!(state_elements(Routing::Galore { rank: 0 }, 4, 8).is_err());
    }

    #[test]
    fn partial_blocks_round_up() {
        assert_eq!(state_elements(Routing::Foam { level: 2 }, 3, 10).unwrap(), 2 * 3 * 3);
        assert!(symbolic_state_elements(Routing::Foam { level: 2 }, 3, 10).is_err());
        assert_eq!(state_elements(Routing::Foam { level: 200 }, 3, 10).unwrap(), 6);
    }

    #[test]
    fn vectors_are_single_rows() {
        let l = LayerManifest::new("norm", vec![512], 2, Routing::Adam);
        let r = estimate(&[l]).unwrap();
        assert_eq!(r.totals.param_bytes, 1024);
        assert_eq!(r.totals.state_bytes, 2048);
    }

    #[test]
    fn foam_level_zero_matches_adam() {
        let layers = vec![
            LayerManifest::new("a", vec![6, 10], 4, Routing::Foam { level: 2 }),
            LayerManifest::new("b", vec![10], 4, Routing::Adam),
        ];
        let a = estimate_method(&layers, Method::Adam).unwrap();
        let f = estimate_method(&layers, Method::Foam(0)).unwrap();
        assert_eq!(a.totals, f.totals);
    }

    #[test]
    fn invalid_manifests() {
        assert!(parse_manifest("[]").is_err());
        assert!(parse_manifest(r#"[{"name":"x","shape":[2,2],"dtype_bytes":3,"routed":{"kind":"adam"}}]"#).is_err());
        assert!(parse_manifest(r#"[{"name":"x","shape":[2,2,2],"dtype_bytes":2,"routed":{"kind":"adam"}}]"#).is_err());
        assert!(parse_manifest(r#"[{"name":"x","shape":[2,2],"dtype_bytes":2,"routed":{"kind":"sgd"}}]"#).is_err());
        let ok = parse_manifest(r#"[{"name":"x","shape":[2,4],"dtype_bytes":2,"routed":{"kind":"foam","level":1}}]"#);
        assert_eq!(ok.unwrap()[0].routed, Routing::Foam { level: 1 });
    }

    #[test]
    fn method_parsing() {
        assert_eq!(Method::parse("foam:2").unwrap(), Method::Foam(2));
        assert_eq!(Method::parse("galore:1/4").unwrap(), Method::Galore(RankSpec::Fraction(4)));
        assert_eq!(Method::parse("apollo:128").unwrap(), Method::Apollo(RankSpec::Fixed(128)));
        assert_eq!(Method::parse_list("").unwrap(), Method::all());
        assert_eq!(Method::parse_list("adam, foam:1").unwrap(), vec![Method::Adam, Method::Foam(1)]);
        for bad in ["foam", "foam:x", "adam:1", "sgd", "galore:0", "galore:1/0"] {
            assert!(Method::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn table_renders_every_method() {
        let layers = vec![LayerManifest::new("a", vec![4, 8], 2, Routing::Foam { level: 2 })];
        let reports: Vec<_> = Method::all().into_iter().map(|m| estimate_method(&layers, m).unwrap()).collect();
        let table = render_table(&reports);
        assert_eq!(table.lines().count(), 1 + reports.len());
        assert!(table.contains("mn/2^(l-1)"));
    }
}
