use super::manifest::{ArchitectureManifest, Layer, CLASSES, FRAMES, INPUT_HEIGHT, INPUT_WIDTH};
use super::weights::ModelWeights;
use super::CrnnError;
use crate::ctc::LogitsSequence;
use crate::exec::ExecMode;
use crate::tensorops::{activation_in_place, batchnorm_infer, bilstm_layer, conv2d, dense, log_softmax, maxpool2d, Activation, Tensor};

pub const BN_EPS: f32 = 1e-5;

/// Convolution followed by batch norm (no activation).
fn conv_bn(w: &ModelWeights, name: &str, x: &Tensor) -> Result<Tensor, CrnnError> {
    let y = conv2d(x, w.tensor(&format!("{name}.kernel")), w.tensor(&format!("{name}.bias")), (1, 1), true)?;
    Ok(batchnorm_infer(
        &y,
        w.tensor(&format!("{name}.bn.gamma")),
        w.tensor(&format!("{name}.bn.beta")),
        w.tensor(&format!("{name}.bn.mean")),
        w.tensor(&format!("{name}.bn.var")),
        BN_EPS,
    )?)
}

fn conv_bn_relu(w: &ModelWeights, name: &str, x: &Tensor) -> Result<Tensor, CrnnError> {
    let mut y = conv_bn(w, name, x)?;
    activation_in_place(y.data_mut(), Activation::Relu);
    Ok(y)
}

/// `relu(bn(conv2(relu(bn(conv1(x))))) + shortcut(x))`.
pub fn residual_block(w: &ModelWeights, name: &str, x: &Tensor, projected: bool) -> Result<Tensor, CrnnError> {
    let branch = conv_bn_relu(w, &format!("{name}.conv1"), x)?;
    let mut branch = conv_bn(w, &format!("{name}.conv2"), &branch)?;
    let shortcut = if projected {
        conv_bn(w, &format!("{name}.proj"), x)?
    } else {
        x.clone()
    };
    for (b, s) in branch.data_mut().iter_mut().zip(shortcut.data()) {
        *b = (*b + s).max(0.0);
    }
    Ok(branch)
}

/// Column-wise fold of an `H×W×C` map into `W` vectors of `H·C` (channel fastest).
pub fn fold_columns(x: &Tensor) -> Vec<Vec<f32>> {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    (0..w)
        .map(|col| {
            let mut v = Vec::with_capacity(h * c);
            for row in 0..h {
                v.extend_from_slice(&x.data()[(row * w + col) * c..][..c]);
            }
            v
        })
        .collect()
}

/// Full network: `40×100×1` input to `25×13` per-frame log-probabilities.
pub fn forward(w: &ModelWeights, x: &Tensor) -> Result<LogitsSequence, CrnnError> {
    if x.shape() != [INPUT_HEIGHT, INPUT_WIDTH, 1] {
        return Err(CrnnError::Tensor(crate::tensorops::TensorError::ShapeMismatch(format!(
            "network input must be [40, 100, 1], got {:?}",
            x.shape()
        ))));
    }
    let mut map = x.clone();
    let mut seq: Vec<Vec<f32>> = Vec::new();
    for layer in ArchitectureManifest::standard().layers {
        match layer {
            Layer::Conv { name, .. } => map = conv_bn_relu(w, name, &map)?,
            Layer::Residual { name, cin, cout } => map = residual_block(w, name, &map, cin != cout)?,
            Layer::MaxPool { window, stride } => map = maxpool2d(&map, window, stride)?,
            Layer::Fold => seq = fold_columns(&map),
            Layer::BiLstm { name, .. } => {
                seq = bilstm_layer(&seq, w.lstm(&format!("{name}.fwd")), w.lstm(&format!("{name}.bwd")))?;
            }
            Layer::Dense { name, .. } => {
                let weight = w.tensor(&format!("{name}.weight"));
                let bias = w.tensor(&format!("{name}.bias"));
                seq = seq.iter().map(|v| dense(v, weight, bias)).collect::<Result<_, _>>()?;
            }
        }
    }
    debug_assert_eq!(seq.len(), FRAMES);
    let data: Vec<f64> = seq
        .iter()
        .flat_map(|row| log_softmax(&row.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    Ok(LogitsSequence::from_log_probs(FRAMES, CLASSES, data)?)
}

/// Runs [`forward`] over a batch; each input is processed independently.
pub fn forward_batch(w: &ModelWeights, inputs: &[Tensor], mode: ExecMode) -> Vec<Result<LogitsSequence, CrnnError>> {
    mode.map(inputs, |x| forward(w, x))
}
