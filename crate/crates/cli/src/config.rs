//! TOML configuration files. Keys mirror the command-line flags; flags given
//! explicitly override the file.
//!
//! ```toml
//! [global]            # --seed, --threads, --kernel, --out
//! seed = 7
//!
//! [study]             # protocol, null family, M, B, delta, p, plot
//! name = "size_sn"
//! protocol = "warp-speed"
//! family = "sn"
//!
//! [lambda0]           # fixed shape of a simple null
//! alpha_star = 3.0
//!
//! [[cell]]            # one study cell: sizes and the data-generating law
//! n = 100
//! truth = "sn"
//! alpha_star = 3.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use skewgof::distributions::{AsParams, SnParams};
use skewgof::gof::Shape;
use skewgof::{Family, FamilySpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub gof: GofSection,
    pub study: Option<StudySection>,
    pub lambda0: Option<ShapeKeys>,
    #[serde(default)]
    pub cell: Vec<CellSection>,
    /// Directory of the file, for resolving relative paths.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub kernel: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GofSection {
    pub family: Option<String>,
    pub mode: Option<String>,
    pub m: Option<usize>,
    pub bootstrap: Option<usize>,
    pub replications: Option<usize>,
    pub delta: Option<f64>,
    pub columns: Option<Vec<String>>,
    pub filter: Option<String>,
    pub drop_missing: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub name: String,
    /// `warp-speed`, `simple` or `nested`.
    #[serde(default = "default_protocol")]
    pub protocol: String,
    /// Family of the null hypothesis.
    pub family: String,
    #[serde(default = "default_p")]
    pub p: usize,
    pub replications: Option<usize>,
    pub bootstrap: Option<usize>,
    pub delta: Option<f64>,
    /// Write `<name>.svg` with the rejection rate against the cell abscissa.
    #[serde(default)]
    pub plot: bool,
    pub x_label: Option<String>,
    pub title: Option<String>,
}

fn default_protocol() -> String {
    "warp-speed".into()
}

fn default_p() -> usize {
    2
}

/// Either one value used for every coordinate or one per coordinate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerCoord {
    One(f64),
    Each(Vec<f64>),
}

impl PerCoord {
    fn expand(&self, p: usize, name: &str) -> CliResult<Vec<f64>> {
        match self {
            PerCoord::One(v) => Ok(vec![*v; p]),
            PerCoord::Each(v) if v.len() == p => Ok(v.clone()),
            PerCoord::Each(v) => Err(CliError::Data(format!("{name} has {} entries, expected {p}", v.len()))),
        }
    }
}

/// Shape values of a family: α* (SN, ST, SL), ν (ST), g and h (GH), and the
/// number of equally spaced atoms q and stability index (AS).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeKeys {
    pub alpha_star: Option<f64>,
    pub nu: Option<f64>,
    pub g: Option<PerCoord>,
    pub h: Option<PerCoord>,
    pub q: Option<usize>,
    pub stable_index: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, key: &str, family: Family) -> CliResult<T> {
    v.ok_or_else(|| CliError::Data(format!("{family} shape needs '{key}'")))
}

impl ShapeKeys {
    pub fn to_shape(&self, family: Family, p: usize) -> CliResult<Shape> {
        Ok(match family {
            Family::Sn => Shape::Sn {
                alpha_star: need(self.alpha_star, "alpha_star", family)?,
            },
            Family::St => Shape::St {
                alpha_star: need(self.alpha_star, "alpha_star", family)?,
                nu: need(self.nu, "nu", family)?,
            },
            Family::Sl => Shape::Sl {
                alpha_star: need(self.alpha_star, "alpha_star", family)?,
            },
            Family::Gh => Shape::Gh {
                g: self.g.as_ref().ok_or_else(|| CliError::Data("gh shape needs 'g'".into()))?.expand(p, "g")?,
                h: self.h.as_ref().ok_or_else(|| CliError::Data("gh shape needs 'h'".into()))?.expand(p, "h")?,
            },
            Family::As => {
                if p != 2 {
                    return Err(CliError::Data("the stable shape with q atoms is defined for p = 2".into()));
                }
                let q = need(self.q, "q", family)?;
                let index = need(self.stable_index, "stable_index", family)?;
                let law = AsParams::uniform_circle(q, index, vec![0.0; 2]).map_err(CliError::from_input)?;
                Shape::As {
                    atoms: law.atoms,
                    alpha: law.alpha,
                }
            }
            Family::Sas => return Err(CliError::Data("no test procedure for the sas family".into())),
        })
    }

    /// The law at the standard nuisance value with this shape. An ST shape
    /// with ν = ∞ gives its SN limit.
    pub fn to_truth(&self, family: Family, p: usize) -> CliResult<FamilySpec> {
        if family == Family::St && self.nu.is_some_and(f64::is_infinite) {
            let a = need(self.alpha_star, "alpha_star", family)?;
            return Ok(FamilySpec::Sn(SnParams::canonical(p, a)));
        }
        self.to_shape(family, p)?.null_spec(p).map_err(CliError::from_input)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub label: Option<String>,
    /// Abscissa in the plot; defaults to n.
    pub x: Option<f64>,
    pub n: usize,
    /// Null sample size; defaults to n.
    pub m: Option<usize>,
    /// Family of the data-generating law; defaults to the null family.
    pub truth: Option<String>,
    /// JSON file with a full parameter set for the data-generating law,
    /// overriding `truth` and the shape keys.
    pub spec: Option<PathBuf>,
    pub alpha_star: Option<f64>,
    pub nu: Option<f64>,
    pub g: Option<PerCoord>,
    pub h: Option<PerCoord>,
    pub q: Option<usize>,
    pub stable_index: Option<f64>,
}

impl CellSection {
    pub fn shape_keys(&self) -> ShapeKeys {
        ShapeKeys {
            alpha_star: self.alpha_star,
            nu: self.nu,
            g: self.g.clone(),
            h: self.h.clone(),
            q: self.q,
            stable_index: self.stable_index,
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.label.clone().unwrap_or_else(|| format!("cell {}", index + 1))
    }
}

pub fn parse_family(s: &str) -> CliResult<Family> {
    s.parse::<Family>().map_err(|e| CliError::Usage(e.to_string()))
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

/// Reads a JSON document given inline or as a path to a file.
pub fn json_arg<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> CliResult<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Data(format!("{what} file {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("invalid {what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_study_file() {
        let cfg: ConfigFile = toml::from_str(
            r#"
            [global]
            seed = 3
            [study]
            name = "s"
            family = "sl"
            protocol = "simple"
            [lambda0]
            alpha_star = 3.0
            [[cell]]
            n = 50
            alpha_star = 0.0
            [[cell]]
            n = 50
            truth = "st"
            alpha_star = 3.0
            nu = inf
            "#,
        )
        .unwrap();
        assert_eq!(cfg.global.seed, Some(3));
        let study = cfg.study.as_ref().unwrap();
        assert_eq!(study.p, 2);
        assert_eq!(cfg.lambda0.unwrap().to_shape(Family::Sl, 2).unwrap(), Shape::Sl { alpha_star: 3.0 });
        assert_eq!(cfg.cell.len(), 2);
        let limit = cfg.cell[1].shape_keys().to_truth(Family::St, 2).unwrap();
        assert_eq!(limit, FamilySpec::Sn(SnParams::canonical(2, 3.0)));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_shape() {
        assert!(toml::from_str::<ConfigFile>("[study]\nname='a'\nfamily='sn'\nbogus=1\n").is_err());
        let keys = ShapeKeys::default();
        assert!(keys.to_shape(Family::Sn, 2).is_err());
        let gh = ShapeKeys {
            g: Some(PerCoord::One(1.0)),
            h: Some(PerCoord::Each(vec![0.5, 0.2])),
            ..Default::default()
        };
        assert_eq!(
            gh.to_shape(Family::Gh, 2).unwrap(),
            Shape::Gh {
                g: vec![1.0, 1.0],
                h: vec![0.5, 0.2]
            }
        );
        assert!(gh.to_shape(Family::Gh, 3).is_err());
    }

    #[test]
    fn bundled_configs_resolve() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_none_or(|e| e != "toml") {
                continue;
            }
            let cfg = ConfigFile::load(&path).unwrap();
            let study = cfg.study.as_ref().unwrap();
            let family = parse_family(&study.family).unwrap();
            if let Some(keys) = &cfg.lambda0 {
                keys.to_shape(family, study.p).unwrap();
            }
            assert!(!cfg.cell.is_empty(), "{}", path.display());
            for cell in &cfg.cell {
                let truth = match &cell.spec {
                    Some(s) => json_arg::<FamilySpec>(cfg.resolve(s).to_str().unwrap(), "spec").unwrap(),
                    None => {
                        let t = cell.truth.as_deref().map_or(Ok(family), parse_family).unwrap();
                        cell.shape_keys().to_truth(t, study.p).unwrap()
                    }
                };
                truth.validate().unwrap();
                assert_eq!(truth.dim(), study.p, "{}", path.display());
            }
            seen += 1;
        }
        assert!(seen >= 6);
    }

    #[test]
    fn stable_shape_from_atom_count() {
        let keys = ShapeKeys {
            q: Some(5),
            stable_index: Some(1.5),
            ..Default::default()
        };
        match keys.to_shape(Family::As, 2).unwrap() {
            Shape::As { atoms, alpha } => {
                assert_eq!(atoms.len(), 5);
                assert_eq!(alpha, 1.5);
            }
            s => panic!("{s:?}"),
        }
    }
}
