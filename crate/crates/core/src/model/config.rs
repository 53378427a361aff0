use serde::{Deserialize, Serialize};

use crate::data::InputMode;
use crate::error::{Error, Result};
use crate::numerics::{Activation, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Interaction vectors as fixed inputs.
    Ncf,
    /// Interaction vector non-zeros are trainable.
    InpNcf,
    /// One-hot id inputs selecting embedding rows.
    NcfId,
    /// Biased matrix factorization.
    Mf,
    Cfnet,
    InpCfnet,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Ncf,
        Variant::InpNcf,
        Variant::NcfId,
        Variant::Mf,
        Variant::Cfnet,
        Variant::InpCfnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ncf => "ncf",
            Variant::InpNcf => "inp-ncf",
            Variant::NcfId => "ncf-id",
            Variant::Mf => "mf",
            Variant::Cfnet => "cfnet",
            Variant::InpCfnet => "inp-cfnet",
        }
    }

    /// Whether the input values `U`, `V` receive updates.
    pub fn learnable_inputs(self) -> bool {
        matches!(self, Variant::InpNcf | Variant::InpCfnet)
    }

    /// Whether the branches read the interaction pattern at all.
    pub fn uses_interaction_inputs(self) -> bool {
        matches!(
            self,
            Variant::Ncf | Variant::InpNcf | Variant::Cfnet | Variant::InpCfnet
        )
    }

    pub fn is_cfnet(self) -> bool {
        matches!(self, Variant::Cfnet | Variant::InpCfnet)
    }

    /// The same architecture with the input values frozen or trainable.
    pub fn with_learnable_inputs(self, learnable: bool) -> Self {
        match (self, learnable) {
            (Variant::Ncf | Variant::InpNcf, false) => Variant::Ncf,
            (Variant::Ncf | Variant::InpNcf, true) => Variant::InpNcf,
            (Variant::Cfnet | Variant::InpCfnet, false) => Variant::Cfnet,
            (Variant::Cfnet | Variant::InpCfnet, true) => Variant::InpCfnet,
            (other, _) => other,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The second CFNet pathway: linear maps `A^u`, `A^i` of the interaction
/// inputs followed by the joint MLP `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfnetConfig {
    pub linear_width: usize,
    #[serde(default = "identity")]
    pub linear_activation: Activation,
    /// Layer widths of `h`; its input is `2 * linear_width`.
    pub joint_layers: Vec<usize>,
}

fn identity() -> Activation {
    Activation::Identity
}

fn selu() -> Activation {
    Activation::Selu
}

fn yes() -> bool {
    true
}

fn ratings() -> InputMode {
    InputMode::Ratings
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Widths of `g^u`; the first entry is the sparse first layer.
    #[serde(default)]
    pub user_layers: Vec<usize>,
    #[serde(default)]
    pub item_layers: Vec<usize>,
    /// Widths of the fusion head `f`, ending in 1.
    #[serde(default)]
    pub head_layers: Vec<usize>,
    #[serde(default = "selu")]
    pub activation: Activation,
    /// Overrides `activation` on the sparse first layer only.
    #[serde(default)]
    pub first_layer_activation: Option<Activation>,
    #[serde(default = "identity")]
    pub output_activation: Activation,
    #[serde(default = "yes")]
    pub bias: bool,
    #[serde(default = "ratings")]
    pub input_init: InputMode,
    #[serde(default)]
    pub cfnet: Option<CfnetConfig>,
    /// Factor dimension for `mf`.
    #[serde(default)]
    pub factors: Option<usize>,
}

impl ModelConfig {
    /// Concatenation-fusion network with the given branch and head widths.
    pub fn towers(variant: Variant, user_layers: Vec<usize>, item_layers: Vec<usize>, head_layers: Vec<usize>) -> Self {
        Self {
            variant,
            user_layers,
            item_layers,
            head_layers,
            activation: Activation::Selu,
            first_layer_activation: None,
            output_activation: Activation::Identity,
            bias: true,
            input_init: InputMode::Ratings,
            cfnet: None,
            factors: None,
        }
    }

    pub fn mf(factors: usize) -> Self {
        Self {
            factors: Some(factors),
            ..Self::towers(Variant::Mf, vec![], vec![], vec![])
        }
    }

    pub fn first_activation(&self) -> Activation {
        self.first_layer_activation.unwrap_or(self.activation)
    }

    pub fn user_width(&self) -> usize {
        self.user_layers.last().copied().unwrap_or(0)
    }

    pub fn item_width(&self) -> usize {
        self.item_layers.last().copied().unwrap_or(0)
    }

    /// Width of the vector the fusion head consumes.
    pub fn head_input_width(&self) -> usize {
        match &self.cfnet {
            Some(c) if self.variant.is_cfnet() => {
                self.user_width() + c.joint_layers.last().copied().unwrap_or(0)
            }
            _ => self.user_width() + self.item_width(),
        }
    }

    /// Dense layers after the sparse first layer of a branch, if any.
    pub(crate) fn tail_spec(&self, layers: &[usize]) -> Option<MlpSpec> {
        (layers.len() > 1).then(|| self.hidden_spec(layers.to_vec()))
    }

    pub(crate) fn head_spec(&self) -> MlpSpec {
        let mut widths = vec![self.head_input_width()];
        widths.extend(&self.head_layers);
        let mut spec = MlpSpec::new(widths, self.activation, self.output_activation);
        spec.bias = self.bias;
        spec
    }

    pub(crate) fn joint_spec(&self) -> Option<MlpSpec> {
        let c = self.cfnet.as_ref()?;
        let mut widths = vec![2 * c.linear_width];
        widths.extend(&c.joint_layers);
        Some(self.hidden_spec(widths))
    }

    fn hidden_spec(&self, widths: Vec<usize>) -> MlpSpec {
        let mut spec = MlpSpec::new(widths, self.activation, self.activation);
        spec.bias = self.bias;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("model ({}): {m}", self.variant)));
        if self.variant == Variant::Mf {
            return match self.factors {
                Some(d) if d > 0 => Ok(()),
                _ => bad("mf needs factors > 0".into()),
            };
        }
        for (name, layers) in [("user_layers", &self.user_layers), ("item_layers", &self.item_layers)] {
            if layers.is_empty() || layers.contains(&0) {
                return bad(format!("{name} must be non-empty with positive widths"));
            }
        }
        if self.head_layers.last() != Some(&1) || self.head_layers.contains(&0) {
            return bad("head_layers must have positive widths and end in 1".into());
        }
        match (&self.cfnet, self.variant.is_cfnet()) {
            (Some(c), true) => {
                if self.user_width() != self.item_width() {
                    return bad(format!(
                        "element-wise product needs equal branch widths, got {} and {}",
                        self.user_width(),
                        self.item_width()
                    ));
                }
                if c.linear_width == 0 || c.joint_layers.is_empty() || c.joint_layers.contains(&0) {
                    return bad("cfnet linear_width and joint_layers must be positive".into());
                }
            }
            (None, true) => return bad("cfnet variants need a cfnet block".into()),
            (Some(_), false) => return bad("cfnet block given for a non-cfnet variant".into()),
            (None, false) => {}
        }
        Ok(())
    }
}

/// `π = (n + m + p) d + (L_f - 1) d²` for the summation-fusion configuration
/// where every branch and head layer has width `d`.
pub fn theoretical_param_count(users: usize, items: usize, p: usize, d: usize, head_layers: usize) -> usize {
    (items + users + p) * d + head_layers.saturating_sub(1) * d * d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_theoretical_count() {
        // m=3, n=4, p=2, d=8, L_f=2
        assert_eq!(theoretical_param_count(3, 4, 2, 8, 2), 9 * 8 + 64);
        assert_eq!(theoretical_param_count(3, 4, 2, 8, 2), 136);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
            assert_eq!(serde_json::from_str::<Variant>(&json).unwrap(), v);
        }
    }

    #[test]
    fn validation() {
        let good = ModelConfig::towers(Variant::Ncf, vec![8], vec![8], vec![4, 1]);
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.head_layers = vec![4];
        assert!(bad.validate().is_err());
        let mut cf = good.clone();
        cf.variant = Variant::Cfnet;
        assert!(cf.validate().is_err());
        cf.cfnet = Some(CfnetConfig {
            linear_width: 4,
            linear_activation: Activation::Identity,
            joint_layers: vec![4],
        });
        assert!(cf.validate().is_ok());
        cf.item_layers = vec![6];
        assert!(cf.validate().is_err());
        assert!(ModelConfig::mf(0).validate().is_err());
        assert!(ModelConfig::mf(4).validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let json = r#"{"variant":"ncf","user_layers":[4],"item_layers":[4],"head_layers":[1],"widht":3}"#;
        assert!(serde_json::from_str::<ModelConfig>(json).is_err());
    }
}
