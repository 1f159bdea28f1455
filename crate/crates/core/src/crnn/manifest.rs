//! The fixed recognition network: layer list and the named tensors it owns.

pub const INPUT_HEIGHT: usize = 40;
pub const INPUT_WIDTH: usize = 100;
/// Output time steps (feature-map columns after pooling).
pub const FRAMES: usize = 25;
/// 12 glyphs plus the CTC blank.
pub const CLASSES: usize = 13;
pub const FORMAT_VERSION: u32 = 1;

/// Gate order used in tensor names: input, forget, cell candidate, output.
pub const LSTM_GATES: [&str; 4] = ["i", "f", "g", "o"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    /// 3×3 same-padded convolution, batch norm, ReLU.
    Conv { name: &'static str, cin: usize, cout: usize },
    /// Two 3×3 conv+BN units with a shortcut (1×1 conv+BN projection when
    /// `cin != cout`), ReLU after the add.
    Residual { name: &'static str, cin: usize, cout: usize },
    MaxPool { window: (usize, usize), stride: (usize, usize) },
    /// Flattens each column of the `H×W×C` map into one `H·C` step.
    Fold,
    BiLstm { name: &'static str, input: usize, hidden: usize },
    Dense { name: &'static str, input: usize, output: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self { name: name.into(), shape }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureManifest {
    pub layers: Vec<Layer>,
}

impl Default for ArchitectureManifest {
    fn default() -> Self {
        Self::standard()
    }
}

impl ArchitectureManifest {
    pub fn standard() -> Self {
        use Layer::*;
        Self {
            layers: vec![
                Conv { name: "conv0", cin: 1, cout: 32 },
                Residual { name: "res1", cin: 32, cout: 32 },
                MaxPool { window: (2, 2), stride: (2, 2) },
                Residual { name: "res2", cin: 32, cout: 64 },
                MaxPool { window: (2, 2), stride: (2, 2) },
                Residual { name: "res3", cin: 64, cout: 128 },
                MaxPool { window: (2, 1), stride: (2, 1) },
                Residual { name: "res4", cin: 128, cout: 128 },
                Conv { name: "conv9", cin: 128, cout: 128 },
                Fold,
                BiLstm { name: "bilstm1", input: 5 * 128, hidden: 128 },
                BiLstm { name: "bilstm2", input: 256, hidden: 128 },
                Dense { name: "dense", input: 256, output: CLASSES },
            ],
        }
    }

    /// 3×3 convolutions on the main path (shortcut projections excluded).
    pub fn main_conv_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv { .. } => 1,
                Layer::Residual { .. } => 2,
                _ => 0,
            })
            .sum()
    }

    pub fn bilstm_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::BiLstm { .. })).count()
    }

    pub fn output_classes(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Dense { output, .. } => Some(*output),
            _ => None,
        })
    }

    /// Every named tensor in canonical (file) order.
    pub fn tensors(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        let conv_unit = |out: &mut Vec<TensorSpec>, name: String, k: usize, cin: usize, cout: usize| {
            out.push(TensorSpec::new(format!("{name}.kernel"), vec![k, k, cin, cout]));
            out.push(TensorSpec::new(format!("{name}.bias"), vec![cout]));
            for p in ["gamma", "beta", "mean", "var"] {
                out.push(TensorSpec::new(format!("{name}.bn.{p}"), vec![cout]));
            }
        };
        for layer in &self.layers {
            match *layer {
                Layer::Conv { name, cin, cout } => conv_unit(&mut out, name.to_string(), 3, cin, cout),
                Layer::Residual { name, cin, cout } => {
                    conv_unit(&mut out, format!("{name}.conv1"), 3, cin, cout);
                    conv_unit(&mut out, format!("{name}.conv2"), 3, cout, cout);
                    if cin != cout {
                        conv_unit(&mut out, format!("{name}.proj"), 1, cin, cout);
                    }
                }
                Layer::BiLstm { name, input, hidden } => {
                    for dir in ["fwd", "bwd"] {
                        for g in LSTM_GATES {
                            out.push(TensorSpec::new(format!("{name}.{dir}.w_{g}"), vec![hidden, input]));
                            out.push(TensorSpec::new(format!("{name}.{dir}.u_{g}"), vec![hidden, hidden]));
                            out.push(TensorSpec::new(format!("{name}.{dir}.b_{g}"), vec![hidden]));
                        }
                    }
                }
                Layer::Dense { name, input, output } => {
                    out.push(TensorSpec::new(format!("{name}.weight"), vec![output, input]));
                    out.push(TensorSpec::new(format!("{name}.bias"), vec![output]));
                }
                Layer::MaxPool { .. } | Layer::Fold => {}
            }
        }
        out
    }
}
