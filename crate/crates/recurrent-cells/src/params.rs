use rand::Rng;
use tensor_core::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Lstm,
    Gru,
    SruLstm,
    SruGru,
    SruOurs,
}

impl CellKind {
    pub const ALL: [CellKind; 5] =
        [CellKind::Lstm, CellKind::Gru, CellKind::SruLstm, CellKind::SruGru, CellKind::SruOurs];

    pub fn is_lstm_family(self) -> bool {
        !matches!(self, CellKind::Gru | CellKind::SruGru)
    }

    pub fn is_spatial(self) -> bool {
        matches!(self, CellKind::SruLstm | CellKind::SruGru | CellKind::SruOurs)
    }

    /// Gate names in parameter order.
    pub fn gate_names(self) -> &'static [&'static str] {
        if self.is_lstm_family() {
            &["i", "f", "o", "g"]
        } else {
            &["z", "r", "h"]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::SruLstm => "sru-lstm",
            CellKind::SruGru => "sru-gru",
            CellKind::SruOurs => "sru-ours",
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown cell kind '{s}' (expected one of lstm, gru, sru-lstm, sru-gru, sru-ours)"))
    }
}

/// One gate's weights: x-side [in, hidden], h-side [hidden, hidden], bias
/// [hidden].
#[derive(Debug, Clone)]
pub struct GateParams {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

/// The spatial term of SRU variants: `s_t = W_xs·x_t + b_s`.
#[derive(Debug, Clone)]
pub struct SpatialParams {
    pub w_xs: Tensor,
    pub b_s: Tensor,
}

/// Weights and biases for one cell. SRU variants — and only SRU variants —
/// carry the spatial parameters.
#[derive(Debug, Clone)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gates: Vec<GateParams>,
    pub spatial: Option<SpatialParams>,
}

impl CellParams {
    /// U[−1/√hidden, 1/√hidden] init; `b_s` starts at 1 so SRU variants begin
    /// at their LSTM/GRU reduction point.
    pub fn init(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut u = |shape: Vec<usize>| Tensor::uniform(shape, -bound, bound, rng).with_grad();
        let gates = kind
            .gate_names()
            .iter()
            .map(|_| GateParams {
                w_x: u(vec![input_dim, hidden_dim]),
                w_h: u(vec![hidden_dim, hidden_dim]),
                b: u(vec![hidden_dim]),
            })
            .collect();
        let spatial = kind.is_spatial().then(|| SpatialParams {
            w_xs: u(vec![input_dim, hidden_dim]),
            b_s: Tensor::ones(vec![hidden_dim]).with_grad(),
        });
        Self { kind, input_dim, hidden_dim, gates, spatial }
    }

    /// All-zero parameters (analytic fixed-point tests).
    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        let gates = kind
            .gate_names()
            .iter()
            .map(|_| GateParams {
                w_x: Tensor::zeros(vec![input_dim, hidden_dim]).with_grad(),
                w_h: Tensor::zeros(vec![hidden_dim, hidden_dim]).with_grad(),
                b: Tensor::zeros(vec![hidden_dim]).with_grad(),
            })
            .collect();
        let spatial = kind.is_spatial().then(|| SpatialParams {
            w_xs: Tensor::zeros(vec![input_dim, hidden_dim]).with_grad(),
            b_s: Tensor::ones(vec![hidden_dim]).with_grad(),
        });
        Self { kind, input_dim, hidden_dim, gates, spatial }
    }

    /// Parameter names in canonical (lease) order: per gate `w_x{n}, w_h{n},
    /// b_{n}`, then `w_xs, b_s` for SRU variants.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (gp, name) in self.gates.iter().zip(self.kind.gate_names()) {
            out.push((format!("w_x{name}"), &gp.w_x));
            out.push((format!("w_h{name}"), &gp.w_h));
            out.push((format!("b_{name}"), &gp.b));
        }
        if let Some(sp) = &self.spatial {
            out.push(("w_xs".to_string(), &sp.w_xs));
            out.push(("b_s".to_string(), &sp.b_s));
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (gp, name) in self.gates.iter_mut().zip(self.kind.gate_names()) {
            out.push((format!("w_x{name}"), &mut gp.w_x));
            out.push((format!("w_h{name}"), &mut gp.w_h));
            out.push((format!("b_{name}"), &mut gp.b));
        }
        if let Some(sp) = &mut self.spatial {
            out.push(("w_xs".to_string(), &mut sp.w_xs));
            out.push(("b_s".to_string(), &mut sp.b_s));
        }
        out
    }

    /// Consistency of every stored matrix with the declared dims.
    pub fn validate(&self) -> Result<(), String> {
        let expect_gates = self.kind.gate_names().len();
        if self.gates.len() != expect_gates {
            return Err(format!("{} expects {expect_gates} gates, found {}", self.kind, self.gates.len()));
        }
        if self.kind.is_spatial() != self.spatial.is_some() {
            return Err(format!("spatial params present={} but kind is {}", self.spatial.is_some(), self.kind));
        }
        for (gp, name) in self.gates.iter().zip(self.kind.gate_names()) {
            if gp.w_x.shape != [self.input_dim, self.hidden_dim]
                || gp.w_h.shape != [self.hidden_dim, self.hidden_dim]
                || gp.b.shape != [self.hidden_dim]
            {
                return Err(format!("gate '{name}' has inconsistent shapes"));
            }
        }
        if let Some(sp) = &self.spatial {
            if sp.w_xs.shape != [self.input_dim, self.hidden_dim] || sp.b_s.shape != [self.hidden_dim] {
                return Err("spatial params have inconsistent shapes".to_string());
            }
        }
        Ok(())
    }
}

/// Off-tape hidden state: `h` always, `c` for the LSTM family only.
/// Zero-initialized at sequence start.
#[derive(Debug, Clone)]
pub struct CellState {
    pub h: Tensor,
    pub c: Option<Tensor>,
}

impl CellState {
    pub fn zeros(kind: CellKind, batch: usize, hidden_dim: usize) -> Self {
        Self {
            h: Tensor::zeros(vec![batch, hidden_dim]),
            c: kind.is_lstm_family().then(|| Tensor::zeros(vec![batch, hidden_dim])),
        }
    }
}
