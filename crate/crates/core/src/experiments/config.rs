//! Flat key-value experiment configuration: one `key = value` assignment per
//! line, `#` comments, diagnostics with line and field names dialed in.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Which batch driver a configuration feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Scaling,
    WeakConv,
    Pipeline,
    CellSweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::WeakConv => "weakconv",
            ExperimentKind::Pipeline => "pipeline",
            ExperimentKind::CellSweep => "cellsweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "scaling" => Some(ExperimentKind::Scaling),
            "weakconv" => Some(ExperimentKind::WeakConv),
            "pipeline" => Some(ExperimentKind::Pipeline),
            "cellsweep" => Some(ExperimentKind::CellSweep),
            _ => None,
        }
    }
}

/// Deformation family driven by the example-based experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleKind {
    Bending,
    VolumeBending,
    Wrinkling,
    Rotation,
    Laminate,
    Recovery,
}

impl ExampleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExampleKind::Bending => "bending",
            ExampleKind::VolumeBending => "volume_bending",
            ExampleKind::Wrinkling => "wrinkling",
            ExampleKind::Rotation => "rotation",
            ExampleKind::Laminate => "laminate",
            ExampleKind::Recovery => "recovery",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "bending" => Some(ExampleKind::Bending),
            "volume_bending" => Some(ExampleKind::VolumeBending),
            "wrinkling" => Some(ExampleKind::Wrinkling),
            "rotation" => Some(ExampleKind::Rotation),
            "laminate" => Some(ExampleKind::Laminate),
            "recovery" => Some(ExampleKind::Recovery),
            _ => None,
        }
    }
}

/// Base curve of the bending/wrinkling profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Circular,
    Straight,
    Wrinkle,
}

impl CurveKind {
    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Circular => "circular",
            CurveKind::Straight => "straight",
            CurveKind::Wrinkle => "wrinkle",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "circular" => Some(CurveKind::Circular),
            "straight" => Some(CurveKind::Straight),
            "wrinkle" => Some(CurveKind::Wrinkle),
            _ => None,
        }
    }
}

/// Soft-phase density of the cell sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    Frobenius,
    Svk,
    FrobeniusDet,
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Frobenius => "frobenius",
            DensityKind::Svk => "svk",
            DensityKind::FrobeniusDet => "frobenius_det",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "frobenius" => Some(DensityKind::Frobenius),
            "svk" => Some(DensityKind::Svk),
            "frobenius_det" => Some(DensityKind::FrobeniusDet),
            _ => None,
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    pub eps_list: Vec<f64>,
    pub example: ExampleKind,
    pub curve: CurveKind,
    pub wrinkle_amplitude: f64,
    /// None means the volume-compensating choice `1 / (gbar . e_1)`.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub f_entries: Vec<f64>,
    pub rot_rate: f64,
    pub sigma_rate: f64,
    pub sigma_wobble: f64,
    pub d_entries: Vec<f64>,
    pub d_sine_amp: f64,
    pub quad_layer_subcells: usize,
    pub quad_cross_cells: usize,
    pub quad_gauss: usize,
    pub xi_list: Vec<f64>,
    pub density: DensityKind,
    pub svk_lam: f64,
    pub svk_mu: f64,
    pub shear_list: Vec<f64>,
    pub include_non_admissible: bool,
    pub cell_m: usize,
    pub cell_m_n: usize,
    pub cell_gauss: usize,
    pub cell_restarts: usize,
    pub cell_max_iters: usize,
    pub seed: u64,
    pub domain: Vec<f64>,
    pub out: Option<String>,
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no + 1,
                    field: line.to_string(),
                    msg: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), (line_no + 1, value)).is_some() {
                return Err(Error::Config {
                    line: line_no + 1,
                    field: key,
                    msg: "duplicate assignment".into(),
                });
            }
        }
        Ok(RawConfig {
            entries,
            consumed: Default::default(),
        })
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).map(|(_, v)| v).unwrap_or(default)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::Config {
                line,
                field: key.to_string(),
                msg: format!("`{v}` is not a number"),
            }),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::Config {
                line,
                field: key.to_string(),
                msg: format!("`{v}` is not a non-negative integer"),
            }),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some((_, "true")) => Ok(true),
            Some((_, "false")) => Ok(false),
            Some((line, v)) => Err(Error::Config {
                line,
                field: key.to_string(),
                msg: format!("`{v}` is not `true` or `false`"),
            }),
        }
    }

    fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => v
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| Error::Config {
                        line,
                        field: key.to_string(),
                        msg: format!("`{tok}` is not a number"),
                    })
                })
                .collect(),
        }
    }

    fn reject_unknown(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for (key, (line, _)) in &self.entries {
            if !consumed.contains(key) {
                return Err(Error::Config {
                    line: *line,
                    field: key.clone(),
                    msg: "unknown configuration key".into(),
                });
            }
        }
        Ok(())
    }
}

const DEFAULT_EPS: [f64; 6] = [0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];
const DEFAULT_XI: [f64; 5] = [0.015625, 0.03125, 0.0625, 0.125, 0.25];

impl ExperimentConfig {
    /// Parses a flat key-value config for the given driver.
    pub fn parse(text: &str, kind: ExperimentKind) -> Result<Self> {
        let raw = RawConfig::parse(text)?;

        if let Some((line, v)) = raw.get("experiment") {
            let declared = ExperimentKind::parse(v).ok_or_else(|| Error::Config {
                line,
                field: "experiment".into(),
                msg: format!("unknown experiment `{v}`"),
            })?;
            if declared != kind {
                return Err(Error::Config {
                    line,
                    field: "experiment".into(),
                    msg: format!(
                        "config declares `{}` but the `{}` driver was invoked",
                        declared.name(),
                        kind.name()
                    ),
                });
            }
        }

        let n = raw.usize_or("n", 2)?;
        if !(2..=3).contains(&n) {
            return Err(Self::field_err(&raw, "n", "dimension must be 2 or 3"));
        }
        let p = raw.f64_or("p", 2.0)?;
        if !(p >= 1.0) {
            return Err(Self::field_err(&raw, "p", "exponent must satisfy p >= 1"));
        }
        let lambda = raw.f64_or("lambda", 0.5)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Self::field_err(&raw, "lambda", "must lie in (0, 1)"));
        }
        let eps_list = raw.f64_list_or("eps_list", &DEFAULT_EPS)?;
        if eps_list.is_empty()
            || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0))
            || eps_list.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Self::field_err(
                &raw,
                "eps_list",
                "must be strictly decreasing with all entries in (0, 1)",
            ));
        }

        let example_default = match kind {
            ExperimentKind::CellSweep => "laminate",
            _ => "bending",
        };
        let example_str = raw.str_or("example", example_default).to_string();
        let example = ExampleKind::parse(&example_str).ok_or_else(|| {
            Self::field_err(&raw, "example", &format!("unknown example `{example_str}`"))
        })?;

        let curve_default = match example {
            ExampleKind::Wrinkling => "wrinkle",
            _ => "circular",
        };
        let curve_str = raw.str_or("curve", curve_default).to_string();
        let curve = CurveKind::parse(&curve_str).ok_or_else(|| {
            Self::field_err(&raw, "curve", &format!("unknown curve `{curve_str}`"))
        })?;
        if example == ExampleKind::Wrinkling && curve != CurveKind::Wrinkle {
            return Err(Self::field_err(
                &raw,
                "curve",
                "the wrinkling example needs the periodic `wrinkle` curve",
            ));
        }

        let wrinkle_amplitude = raw.f64_or("wrinkle_amplitude", std::f64::consts::FRAC_PI_2)?;
        let beta = match raw.get("beta") {
            None => None,
            Some((_, "auto")) => None,
            Some((line, v)) => Some(v.parse().map_err(|_| Error::Config {
                line,
                field: "beta".into(),
                msg: format!("`{v}` is not a number or `auto`"),
            })?),
        };
        let gamma = raw.f64_or("gamma", 0.5)?;
        if example == ExampleKind::Wrinkling && !(gamma > 0.0 && gamma < 1.0) {
            return Err(Self::field_err(&raw, "gamma", "must lie in (0, 1)"));
        }

        let default_f: Vec<f64> = match n {
            2 => vec![1.0, 1.0, 0.0, 1.0],
            _ => vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        };
        let f_entries = raw.f64_list_or("f_entries", &default_f)?;
        if f_entries.len() != n * n {
            return Err(Self::field_err(
                &raw,
                "f_entries",
                &format!("need {} row-major entries", n * n),
            ));
        }

        let rot_rate = raw.f64_or("rot_rate", 1.0)?;
        let sigma_rate = raw.f64_or("sigma_rate", 0.5)?;
        let sigma_wobble = raw.f64_or("sigma_wobble", 0.2)?;
        let default_d: Vec<f64> = match n {
            2 => vec![0.4, 0.0],
            _ => vec![0.4, 0.0, 0.1],
        };
        let d_entries = raw.f64_list_or("d_entries", &default_d)?;
        if d_entries.len() != n {
            return Err(Self::field_err(
                &raw,
                "d_entries",
                &format!("need {n} entries"),
            ));
        }
        let d_sine_amp = raw.f64_or("d_sine_amp", 0.5)?;

        let quad_layer_subcells = raw.usize_or("quad_layer_subcells", 2)?;
        let quad_cross_cells = raw.usize_or("quad_cross_cells", 8)?;
        let quad_gauss = raw.usize_or("quad_gauss", 3)?;

        let mut xi_list = raw.f64_list_or("xi_list", &DEFAULT_XI)?;
        xi_list.sort_by(|a, b| a.partial_cmp(b).expect("finite shifts"));

        let density_str = raw.str_or("density", "frobenius").to_string();
        let density = DensityKind::parse(&density_str).ok_or_else(|| {
            Self::field_err(&raw, "density", &format!("unknown density `{density_str}`"))
        })?;
        let svk_lam = raw.f64_or("svk_lam", 1.0)?;
        let svk_mu = raw.f64_or("svk_mu", 1.0)?;
        let shear_list = raw.f64_list_or(
            "shear_list",
            &[0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
        )?;
        let include_non_admissible = raw.bool_or("include_non_a", false)?;
        let cell_m = raw.usize_or("cell_m", 17)?;
        let cell_m_n = raw.usize_or("cell_m_n", 9)?;
        let cell_gauss = raw.usize_or("cell_gauss", 3)?;
        let cell_restarts = raw.usize_or("cell_restarts", 4)?;
        let cell_max_iters = raw.usize_or("cell_max_iters", 1000)?;

        let seed = raw.usize_or("seed", 0)? as u64;
        let default_domain: Vec<f64> = match n {
            2 => vec![0.0, 0.0, 1.0, 1.0],
            _ => vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        };
        let domain = raw.f64_list_or("domain", &default_domain)?;
        if domain.len() != 2 * n {
            return Err(Self::field_err(
                &raw,
                "domain",
                &format!("need {} entries: lower then upper corner", 2 * n),
            ));
        }
        let out = raw.get("out").map(|(_, v)| v.to_string());

        raw.reject_unknown()?;

        Ok(ExperimentConfig {
            kind,
            n,
            p,
            lambda,
            eps_list,
            example,
            curve,
            wrinkle_amplitude,
            beta,
            gamma,
            f_entries,
            rot_rate,
            sigma_rate,
            sigma_wobble,
            d_entries,
            d_sine_amp,
            quad_layer_subcells,
            quad_cross_cells,
            quad_gauss,
            xi_list,
            density,
            svk_lam,
            svk_mu,
            shear_list,
            include_non_admissible,
            cell_m,
            cell_m_n,
            cell_gauss,
            cell_restarts,
            cell_max_iters,
            seed,
            domain,
            out,
        })
    }

    fn field_err(raw: &RawConfig, field: &str, msg: &str) -> Error {
        let line = raw.entries.get(field).map(|(l, _)| *l).unwrap_or(0);
        Error::Config {
            line,
            field: field.to_string(),
            msg: msg.to_string(),
        }
    }

    /// Canonical serialization of every effective field; the hash echoed in
    /// CSV rows is the first 16 hex digits of its SHA-256.
    pub fn canonical_string(&self) -> String {
        let fl = |v: f64| format!("{v:.17e}");
        let list = |v: &[f64]| v.iter().map(|x| fl(*x)).collect::<Vec<_>>().join(",");
        let mut rows = vec![
            format!("kind={}", self.kind.name()),
            format!("n={}", self.n),
            format!("p={}", fl(self.p)),
            format!("lambda={}", fl(self.lambda)),
            format!("eps_list={}", list(&self.eps_list)),
            format!("example={}", self.example.name()),
            format!("curve={}", self.curve.name()),
            format!("wrinkle_amplitude={}", fl(self.wrinkle_amplitude)),
            format!(
                "beta={}",
                self.beta.map(fl).unwrap_or_else(|| "auto".into())
            ),
            format!("gamma={}", fl(self.gamma)),
            format!("f_entries={}", list(&self.f_entries)),
            format!("rot_rate={}", fl(self.rot_rate)),
            format!("sigma_rate={}", fl(self.sigma_rate)),
            format!("sigma_wobble={}", fl(self.sigma_wobble)),
            format!("d_entries={}", list(&self.d_entries)),
            format!("d_sine_amp={}", fl(self.d_sine_amp)),
            format!("quad_layer_subcells={}", self.quad_layer_subcells),
            format!("quad_cross_cells={}", self.quad_cross_cells),
            format!("quad_gauss={}", self.quad_gauss),
            format!("xi_list={}", list(&self.xi_list)),
            format!("density={}", self.density.name()),
            format!("svk_lam={}", fl(self.svk_lam)),
            format!("svk_mu={}", fl(self.svk_mu)),
            format!("shear_list={}", list(&self.shear_list)),
            format!("include_non_a={}", self.include_non_admissible),
            format!("cell_m={}", self.cell_m),
            format!("cell_m_n={}", self.cell_m_n),
            format!("cell_gauss={}", self.cell_gauss),
            format!("cell_restarts={}", self.cell_restarts),
            format!("cell_max_iters={}", self.cell_max_iters),
            format!("seed={}", self.seed),
            format!("domain={}", list(&self.domain)),
        ];
        rows.sort();
        rows.join("\n")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_defaults_and_hash_is_stable() {
        let cfg = ExperimentConfig::parse("", ExperimentKind::Scaling).unwrap();
        assert_eq!(cfg.n, 2);
        assert_eq!(cfg.eps_list.len(), 6);
        let again = ExperimentConfig::parse("", ExperimentKind::Scaling).unwrap();
        assert_eq!(cfg.hash(), again.hash());
        let other = ExperimentConfig::parse("seed = 1", ExperimentKind::Scaling).unwrap();
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let err =
            ExperimentConfig::parse("n = 2\nbogus_key = 1\n", ExperimentKind::Scaling).unwrap_err();
        match err {
            Error::Config { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "bogus_key");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_decreasing_eps() {
        let err =
            ExperimentConfig::parse("eps_list = 0.1, 0.2", ExperimentKind::Scaling).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn rejects_kind_mismatch() {
        let err =
            ExperimentConfig::parse("experiment = scaling", ExperimentKind::Pipeline).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# heading\n\nn = 2  # inline\nlambda = 0.25\n";
        let cfg = ExperimentConfig::parse(text, ExperimentKind::Scaling).unwrap();
        assert_eq!(cfg.lambda, 0.25);
    }
}
