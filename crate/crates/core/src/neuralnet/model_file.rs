//! Text model file: header lines for mode, layer sizes, output activation
//! and normalization params, then the weight and bias sections in fixed
//! order, one value per line at 17 significant digits.

use std::fs;
use std::path::Path;

use super::{Mlp, NetError, OutputActivation};
use crate::encoder::{NormalizationParams, TargetMode};

/// A trained network together with everything inference needs: the target
/// mode it was trained for and the input normalization it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mlp: Mlp,
    pub mode: TargetMode,
    pub norm: Option<NormalizationParams>,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl Model {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode {}\n", self.mode.as_str()));
        out.push_str(&format!(
            "layers {},{},{}\n",
            self.mlp.n_in, self.mlp.n_hidden, self.mlp.n_out
        ));
        out.push_str(&format!(
            "activation {}\n",
            self.mlp.output_activation.as_str()
        ));
        match &self.norm {
            None => out.push_str("normalization none\n"),
            Some(params) => {
                out.push_str("normalization minmax\n");
                for (i, (min, max)) in params.columns.iter().enumerate() {
                    out.push_str(&format!("norm {i},{},{}\n", fmt_value(*min), fmt_value(*max)));
                }
            }
        }
        for (name, values) in [
            ("hidden_weights", &self.mlp.w1),
            ("hidden_biases", &self.mlp.b1),
            ("output_weights", &self.mlp.w2),
            ("output_biases", &self.mlp.b2),
        ] {
            out.push_str(name);
            out.push('\n');
            for v in values {
                out.push_str(&fmt_value(*v));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Model, NetError> {
        let err = |line: usize, reason: &str| NetError::ModelParse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let mut header_field = |key: &str| -> Result<(usize, String), NetError> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of file"))?;
            let line_no = idx + 1;
            let value = line
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .ok_or_else(|| err(line_no, &format!("expected `{key} ...`")))?;
            Ok((line_no, value.trim().to_string()))
        };

        let (line_no, mode_text) = header_field("mode")?;
        let mode = TargetMode::parse(&mode_text)
            .ok_or_else(|| err(line_no, "mode must be `scalar` or `onehot`"))?;

        let (line_no, layers_text) = header_field("layers")?;
        let sizes: Vec<usize> = layers_text
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(line_no, "layers must be three integers"))?;
        if sizes.len() != 3 || sizes.iter().any(|&s| s < 1) {
            return Err(err(line_no, "layers must be three positive integers"));
        }
        let [n_in, n_hidden, n_out] = [sizes[0], sizes[1], sizes[2]];
        if n_out != mode.width() {
            return Err(err(line_no, "output layer width does not match mode"));
        }

        let (line_no, act_text) = header_field("activation")?;
        let output_activation = OutputActivation::parse(&act_text)
            .ok_or_else(|| err(line_no, "activation must be `linear` or `tanh`"))?;

        let (line_no, norm_text) = header_field("normalization")?;
        let norm = match norm_text.as_str() {
            "none" => None,
            "minmax" => {
                let mut columns = [(0.0, 0.0); 4];
                for expect in 0..4usize {
                    let (line_no, value) = header_field("norm")?;
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(err(line_no, "expected `norm col,min,max`"));
                    }
                    let col: usize = parts[0]
                        .parse()
                        .map_err(|_| err(line_no, "bad column index"))?;
                    if col != expect {
                        return Err(err(line_no, "norm lines must cover columns 0..=3 in order"));
                    }
                    let min: f64 = parts[1].parse().map_err(|_| err(line_no, "bad min"))?;
                    let max: f64 = parts[2].parse().map_err(|_| err(line_no, "bad max"))?;
                    columns[col] = (min, max);
                }
                Some(NormalizationParams { columns })
            }
            _ => return Err(err(line_no, "normalization must be `none` or `minmax`")),
        };

        let mut read_section = |name: &str, count: usize| -> Result<Vec<f64>, NetError> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of file"))?;
            if line.trim() != name {
                return Err(err(idx + 1, &format!("expected section `{name}`")));
            }
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let (idx, line) = lines
                    .next()
                    .ok_or_else(|| err(0, &format!("section `{name}` is truncated")))?;
                let v: f64 = line
                    .trim()
                    .parse()
                    .map_err(|_| err(idx + 1, "bad numeric value"))?;
                if !v.is_finite() {
                    return Err(err(idx + 1, "weights must be finite"));
                }
                values.push(v);
            }
            Ok(values)
        };

        let w1 = read_section("hidden_weights", n_hidden * n_in)?;
        let b1 = read_section("hidden_biases", n_hidden)?;
        let w2 = read_section("output_weights", n_out * n_hidden)?;
        let b2 = read_section("output_biases", n_out)?;
        if let Some((idx, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(idx + 1, &format!("trailing content {line:?}")));
        }

        Ok(Model {
            mlp: Mlp {
                n_in,
                n_hidden,
                n_out,
                w1,
                b1,
                w2,
                b2,
                output_activation,
            },
            mode,
            norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model, NetError> {
        Model::from_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::init_mlp;

    fn sample_model(norm: bool) -> Model {
        Model {
            mlp: init_mlp([4, 7, 1], OutputActivation::Linear, 99).unwrap(),
            mode: TargetMode::Scalar,
            norm: norm.then_some(NormalizationParams {
                columns: [(1.0, 51.0), (10.0, 66.0), (10.0, 66.0), (1.0, 3.0)],
            }),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for norm in [false, true] {
            let model = sample_model(norm);
            let reloaded = Model::from_text(&model.to_text()).unwrap();
            assert_eq!(model, reloaded);
        }
    }

    #[test]
    fn reloaded_model_forwards_identically() {
        let model = sample_model(true);
        let reloaded = Model::from_text(&model.to_text()).unwrap();
        let x = [0.3, -0.7, 0.1, 0.9];
        assert_eq!(
            model.mlp.forward(&x).unwrap(),
            reloaded.mlp.forward(&x).unwrap()
        );
    }

    #[test]
    fn rejects_malformed_files() {
        let model = sample_model(false);
        let good = model.to_text();

        let missing_mode = good.replace("mode scalar", "kind scalar");
        assert!(Model::from_text(&missing_mode).is_err());

        let bad_width = good.replace("layers 4,7,1", "layers 4,7,2");
        assert!(Model::from_text(&bad_width).is_err());

        let truncated: String = good.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(Model::from_text(&truncated).is_err());

        let trailing = format!("{good}stray\n");
        assert!(Model::from_text(&trailing).is_err());
    }
}
