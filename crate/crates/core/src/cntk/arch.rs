//! Layer lists describing an infinite-width convolutional network.

use sha2::{Digest, Sha256};

use crate::dual::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layer {
    /// Circularly padded `q x q` convolution.
    Conv { q: usize },
    Act(Activation),
    /// Stride-2 subsampling.
    Down,
    UpNearest,
    UpBilinear,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layer::Conv { q } => write!(f, "conv q={q}"),
            Layer::Act(a) => write!(f, "act {a}"),
            Layer::Down => write!(f, "down"),
            Layer::UpNearest => write!(f, "up nearest"),
            Layer::UpBilinear => write!(f, "up bilinear"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Input,
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    input: (usize, usize),
    layers: Vec<Layer>,
}

impl ArchSpec {
    /// Validates layer order and runs a shape pass.
    ///
    /// The first layer must be a convolution, activations follow a
    /// convolution (sampling layers may sit in between), and two
    /// convolutions may not be adjacent.
    pub fn new(input: (usize, usize), layers: Vec<Layer>) -> Result<Self> {
        let (mut m, mut n) = input;
        if m == 0 || n == 0 {
            return Err(Error::Arch {
                layer: 0,
                message: format!("input dims must be positive, got {m}x{n}"),
            });
        }
        if layers.is_empty() {
            return Err(Error::Arch {
                layer: 0,
                message: "architecture has no layers".into(),
            });
        }
        let mut phase = Phase::Input;
        for (idx, layer) in layers.iter().enumerate() {
            let fail = |message: String| Err(Error::Arch { layer: idx, message });
            match *layer {
                Layer::Conv { q } => {
                    if q == 0 || q % 2 == 0 {
                        return fail(format!("filter size must be odd and positive, got {q}"));
                    }
                    if phase == Phase::Pre {
                        return fail("convolution directly after a convolution".into());
                    }
                    phase = Phase::Pre;
                }
                Layer::Act(_) => {
                    if phase != Phase::Pre {
                        return fail("activation must follow a convolution".into());
                    }
                    phase = Phase::Post;
                }
                Layer::Down => {
                    if phase == Phase::Input {
                        return fail("the first layer must be a convolution".into());
                    }
                    if m % 2 != 0 || n % 2 != 0 {
                        return fail(format!("cannot downsample odd dims {m}x{n}"));
                    }
                    m /= 2;
                    n /= 2;
                }
                Layer::UpNearest | Layer::UpBilinear => {
                    if phase == Phase::Input {
                        return fail("the first layer must be a convolution".into());
                    }
                    m *= 2;
                    n *= 2;
                }
            }
        }
        Ok(Self { input, layers })
    }

    /// `conv, act` followed by `s` blocks of `down, conv, act` and `s` blocks
    /// of `up, conv, act`.
    pub fn encoder_decoder(input: (usize, usize), s: usize, q: usize, act: Activation, bilinear: bool) -> Result<Self> {
        let mut layers = vec![Layer::Conv { q }, Layer::Act(act)];
        for _ in 0..s {
            layers.extend([Layer::Down, Layer::Conv { q }, Layer::Act(act)]);
        }
        let up = if bilinear { Layer::UpBilinear } else { Layer::UpNearest };
        for _ in 0..s {
            layers.extend([up, Layer::Conv { q }, Layer::Act(act)]);
        }
        Self::new(input, layers)
    }

    /// `depth` repetitions of `conv, act` with no sampling.
    pub fn plain(input: (usize, usize), depth: usize, q: usize, act: Activation) -> Result<Self> {
        let mut layers = Vec::with_capacity(2 * depth);
        for _ in 0..depth {
            layers.extend([Layer::Conv { q }, Layer::Act(act)]);
        }
        if layers.is_empty() {
            layers.push(Layer::Conv { q });
        }
        Self::new(input, layers)
    }

    pub fn input(&self) -> (usize, usize) {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Same layers applied to another input size.
    pub fn with_input(&self, m: usize, n: usize) -> Result<Self> {
        Self::new((m, n), self.layers.clone())
    }

    /// Number of activation layers.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Act(_))).count()
    }

    pub fn downsamples(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Down)).count()
    }

    pub fn upsamples(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::UpNearest | Layer::UpBilinear))
            .count()
    }

    pub fn has_bilinear(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::UpBilinear))
    }

    pub fn has_sampling(&self) -> bool {
        self.downsamples() + self.upsamples() > 0
    }

    pub fn output_dims(&self) -> (usize, usize) {
        let (mut m, mut n) = self.input;
        for l in &self.layers {
            match l {
                Layer::Down => {
                    m /= 2;
                    n /= 2;
                }
                Layer::UpNearest | Layer::UpBilinear => {
                    m *= 2;
                    n *= 2;
                }
                _ => {}
            }
        }
        (m, n)
    }

    /// Layers as evaluated: a network ending in an activation gets a linear
    /// readout convolution with the filter size of the last convolution.
    pub fn effective_layers(&self) -> Vec<Layer> {
        let mut layers = self.layers.clone();
        let mut phase_post = false;
        let mut last_q = 1;
        for l in &self.layers {
            match l {
                Layer::Conv { q } => {
                    phase_post = false;
                    last_q = *q;
                }
                Layer::Act(_) => phase_post = true,
                _ => {}
            }
        }
        if phase_post {
            layers.push(Layer::Conv { q: last_q });
        }
        layers
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut input = None;
        let mut layers = Vec::new();
        let mut lines_of_layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or("");
            let rest: Vec<&str> = words.collect();
            match head {
                "input" => {
                    let dims = rest.first().ok_or_else(|| perr("expected `input MxN`".into()))?;
                    let (a, b) = dims.split_once(['x', 'X']).ok_or_else(|| perr(format!("bad dims `{dims}`")))?;
                    let m = a.parse().map_err(|_| perr(format!("bad dims `{dims}`")))?;
                    let n = b.parse().map_err(|_| perr(format!("bad dims `{dims}`")))?;
                    if input.replace((m, n)).is_some() {
                        return Err(perr("duplicate input line".into()));
                    }
                }
                "conv" => {
                    let q = match rest.first() {
                        None => 3,
                        Some(w) => {
                            let v = w.strip_prefix("q=").unwrap_or(w);
                            v.parse().map_err(|_| perr(format!("bad filter size `{w}`")))?
                        }
                    };
                    layers.push(Layer::Conv { q });
                    lines_of_layers.push(line_no);
                }
                "act" => {
                    let act: Activation = rest.join(" ").parse().map_err(|e: Error| perr(e.to_string()))?;
                    layers.push(Layer::Act(act));
                    lines_of_layers.push(line_no);
                }
                "down" => {
                    layers.push(Layer::Down);
                    lines_of_layers.push(line_no);
                }
                "up" => {
                    let layer = match rest.first().copied() {
                        Some("nearest") | None => Layer::UpNearest,
                        Some("bilinear") => Layer::UpBilinear,
                        Some(other) => return Err(perr(format!("unknown upsampling `{other}`"))),
                    };
                    layers.push(layer);
                    lines_of_layers.push(line_no);
                }
                other => return Err(perr(format!("unknown layer `{other}`"))),
            }
        }
        let input = input.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing `input MxN` line".into(),
        })?;
        Self::new(input, layers).map_err(|e| match e {
            Error::Arch { layer, message } => Error::Parse {
                line: lines_of_layers.get(layer).copied().unwrap_or(1),
                message,
            },
            other => other,
        })
    }

    /// Canonical text form; parsing it gives back the same architecture.
    pub fn to_text(&self) -> String {
        let mut s = format!("input {}x{}\n", self.input.0, self.input.1);
        for l in &self.layers {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the canonical layer list, independent of input size.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for l in &self.layers {
            h.update(l.to_string().as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }
}

impl std::str::FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# small unet\ninput 8x8\nconv q=3\nact relu\ndown\nconv q=3\nact leaky_relu slope=0.05\nup nearest  # back up\nconv q=3\nact relu\n";

    #[test]
    fn parses_and_round_trips() {
        let a = ArchSpec::parse(TEXT).unwrap();
        assert_eq!(a.input(), (8, 8));
        assert_eq!(a.layers().len(), 8);
        assert_eq!(a.depth(), 3);
        assert_eq!(ArchSpec::parse(&a.to_text()).unwrap(), a);
        assert_eq!(a.output_dims(), (8, 8));
        assert_eq!(a.effective_layers().last(), Some(&Layer::Conv { q: 3 }));
    }

    #[test]
    fn hash_ignores_input_size() {
        let a = ArchSpec::parse(TEXT).unwrap();
        assert_eq!(a.hash(), a.with_input(16, 16).unwrap().hash());
        let b = ArchSpec::plain((8, 8), 2, 3, Activation::Relu).unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(matches!(
            ArchSpec::new((4, 4), vec![Layer::Conv { q: 2 }]),
            Err(Error::Arch { layer: 0, .. })
        ));
        assert!(ArchSpec::new((4, 4), vec![Layer::Act(Activation::Relu)]).is_err());
        assert!(ArchSpec::new((4, 4), vec![Layer::Conv { q: 3 }, Layer::Conv { q: 3 }]).is_err());
        let err = ArchSpec::new(
            (6, 6),
            vec![Layer::Conv { q: 3 }, Layer::Down, Layer::Down],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Arch { layer: 2, .. }));
        let err = ArchSpec::parse("input 6x6\nconv q=3\ndown\ndown\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        assert!(ArchSpec::parse("conv q=3\n").is_err());
        assert!(ArchSpec::parse("input 4x4\npool\n").is_err());
    }

    #[test]
    fn builders() {
        let a = ArchSpec::encoder_decoder((16, 16), 2, 3, Activation::Relu, false).unwrap();
        assert_eq!(a.downsamples(), 2);
        assert_eq!(a.upsamples(), 2);
        assert_eq!(a.depth(), 5);
        assert!(!a.has_bilinear());
        assert!(ArchSpec::encoder_decoder((6, 6), 2, 3, Activation::Relu, false).is_err());
    }
}
