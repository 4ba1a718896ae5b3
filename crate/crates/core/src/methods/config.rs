use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Erm,
    DiffDp,
    DiffEopp,
    DiffEodd,
    PRemover,
    Hsic,
    AdvDebias,
    Laftr,
}

impl MethodKind {
    pub const ALL: [MethodKind; 8] = [
        MethodKind::Erm,
        MethodKind::DiffDp,
        MethodKind::DiffEopp,
        MethodKind::DiffEodd,
        MethodKind::PRemover,
        MethodKind::Hsic,
        MethodKind::AdvDebias,
        MethodKind::Laftr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Erm => "erm",
            MethodKind::DiffDp => "diffdp",
            MethodKind::DiffEopp => "diffeopp",
            MethodKind::DiffEodd => "diffeodd",
            MethodKind::PRemover => "premover",
            MethodKind::Hsic => "hsic",
            MethodKind::AdvDebias => "advdebias",
            MethodKind::Laftr => "laftr",
        }
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, MethodKind::AdvDebias | MethodKind::Laftr)
    }

    /// Control-hyperparameter grid used by sweeps.
    pub fn default_grid(self) -> Vec<f64> {
        let gap = vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.5, 3.0, 3.5, 4.0];
        match self {
            MethodKind::Erm => vec![0.0],
            MethodKind::DiffDp | MethodKind::DiffEopp | MethodKind::DiffEodd | MethodKind::AdvDebias => gap,
            MethodKind::PRemover => vec![
                0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.40, 0.45, 0.50, 0.6, 0.7, 0.8, 0.9, 1.0,
            ],
            MethodKind::Hsic => vec![
                50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0, 600.0, 700.0, 800.0, 900.0,
                1000.0,
            ],
            MethodKind::Laftr => vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub lambda: f64,
    /// Hidden width of the AdvDebias adversary.
    #[serde(default = "default_adv_hidden")]
    pub adv_hidden: usize,
    /// LAFTR representation width.
    #[serde(default = "default_latent")]
    pub latent: usize,
    /// LAFTR reconstruction weight.
    #[serde(default = "default_recon_weight")]
    pub recon_weight: f64,
}

fn default_adv_hidden() -> usize {
    32
}

fn default_latent() -> usize {
    64
}

fn default_recon_weight() -> f64 {
    1.0
}

impl MethodConfig {
    /// `erm` ignores `lambda` and stores 0.
    pub fn new(kind: MethodKind, lambda: f64) -> Result<Self> {
        let cfg = Self {
            kind,
            lambda: if kind == MethodKind::Erm { 0.0 } else { lambda },
            adv_hidden: default_adv_hidden(),
            latent: default_latent(),
            recon_weight: default_recon_weight(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn erm() -> Self {
        Self::new(MethodKind::Erm, 0.0).expect("erm config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.kind == MethodKind::Erm && self.lambda != 0.0 {
            return Err(Error::Config("erm takes no lambda".into()));
        }
        if self.adv_hidden == 0 || self.latent == 0 {
            return Err(Error::Config("adversary and latent widths must be positive".into()));
        }
        if !(self.recon_weight >= 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::Config("reconstruction weight must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in MethodKind::ALL {
            assert_eq!(k.name().parse::<MethodKind>().unwrap(), k);
        }
        assert!("dp".parse::<MethodKind>().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(MethodKind::DiffDp.default_grid().len(), 14);
        let hsic = MethodKind::Hsic.default_grid();
        assert_eq!((hsic[0], *hsic.last().unwrap(), hsic.len()), (50.0, 1000.0, 15));
        assert_eq!(MethodKind::PRemover.default_grid().len(), 15);
        assert_eq!(MethodKind::Laftr.default_grid().len(), 10);
    }

    #[test]
    fn erm_forces_zero_lambda() {
        assert_eq!(MethodConfig::new(MethodKind::Erm, 3.0).unwrap().lambda, 0.0);
        assert!(MethodConfig::new(MethodKind::DiffDp, -1.0).is_err());
    }

    #[test]
    fn serde_uses_lowercase_names() {
        let cfg = MethodConfig::new(MethodKind::AdvDebias, 1.0).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"advdebias\""), "{json}");
        let back: MethodConfig = serde_json::from_str(r#"{"kind": "hsic", "lambda": 500}"#).unwrap();
        assert_eq!(back.kind, MethodKind::Hsic);
        assert_eq!(back.latent, 64);
    }
}
