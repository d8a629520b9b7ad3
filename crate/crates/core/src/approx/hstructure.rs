//! Additive history components `H(τ)`.
//!
//! Singleton: `Σ_j b(τ_j)`. Pairwise-K: `Σ_{k=0..=K} Σ_j c^k(τ_j ∘ τ_{j+k})` with `j + k` inside
//! the history, where `c^0` sees a single step. The empty history has value 0.

use ndarray::Array2;
use rand::Rng;

use super::features::FeatureLayout;
use super::mlp::{Mlp, MlpArch, Tape};
use crate::error::{Error, Result};
use crate::experiment::SegmentStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HKind {
    Singleton,
    PairwiseK(usize),
}

impl HKind {
    pub fn num_nets(self) -> usize {
        match self {
            Self::Singleton => 1,
            Self::PairwiseK(k) => k + 1,
        }
    }

    pub fn name(self) -> String {
        match self {
            Self::Singleton => "singleton".into(),
            Self::PairwiseK(k) => format!("pairwise-{k}"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text == "singleton" {
            return Ok(Self::Singleton);
        }
        text.strip_prefix("pairwise-")
            .and_then(|k| k.parse().ok())
            .map(Self::PairwiseK)
            .ok_or_else(|| Error::UnknownName { kind: "H structure", name: text.into() })
    }

    /// Offset between the two steps fed to net `k`.
    fn lag(self, net: usize) -> usize {
        match self {
            Self::Singleton => 0,
            Self::PairwiseK(_) => net,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HStructure {
    kind: HKind,
    layout: FeatureLayout,
    nets: Vec<Mlp>,
}

/// Batched forward pass retained for the backward pass.
#[derive(Debug, Clone)]
pub struct HEval {
    pub values: Vec<f64>,
    owners: Vec<Vec<usize>>,
    tapes: Vec<Option<Tape>>,
}

impl HStructure {
    pub fn new<R: Rng + ?Sized>(kind: HKind, layout: FeatureLayout, hidden: &[usize], rng: &mut R) -> Self {
        let nets = (0..kind.num_nets())
            .map(|k| Mlp::new(Self::net_arch(kind, layout, k, hidden), rng))
            .collect();
        Self { kind, layout, nets }
    }

    pub fn from_nets(kind: HKind, layout: FeatureLayout, nets: Vec<Mlp>) -> Result<Self> {
        if nets.len() != kind.num_nets() {
            return Err(Error::InvalidInput(format!("{} needs {} nets", kind.name(), kind.num_nets())));
        }
        for (k, net) in nets.iter().enumerate() {
            let want = Self::net_input(kind, layout, k);
            if net.arch().input != want || net.arch().output != 1 {
                return Err(Error::InvalidInput(format!("net {k} must map {want} inputs to a scalar")));
            }
        }
        Ok(Self { kind, layout, nets })
    }

    fn net_input(kind: HKind, layout: FeatureLayout, k: usize) -> usize {
        if kind.lag(k) == 0 {
            layout.step_dim()
        } else {
            2 * layout.step_dim()
        }
    }

    fn net_arch(kind: HKind, layout: FeatureLayout, k: usize, hidden: &[usize]) -> MlpArch {
        MlpArch::scalar(Self::net_input(kind, layout, k), hidden)
    }

    pub fn kind(&self) -> HKind {
        self.kind
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [Mlp] {
        &mut self.nets
    }

    pub fn num_params(&self) -> usize {
        self.nets.iter().map(Mlp::num_params).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.params().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for net in &mut self.nets {
            let n = net.num_params();
            net.params_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Direct evaluation on one history.
    pub fn value(&self, history: &[SegmentStep]) -> f64 {
        let feats: Vec<Vec<f64>> = history.iter().map(|s| self.layout.step_features(s)).collect();
        let mut total = 0.0;
        for (k, net) in self.nets.iter().enumerate() {
            let lag = self.kind.lag(k);
            for j in 0..feats.len().saturating_sub(lag) {
                total += if lag == 0 {
                    net.value(&feats[j])
                } else {
                    net.value(&[feats[j].as_slice(), feats[j + lag].as_slice()].concat())
                };
            }
        }
        total
    }

    pub fn forward_batch(&self, histories: &[&[SegmentStep]]) -> HEval {
        let d = self.layout.step_dim();
        let feats: Vec<Vec<Vec<f64>>> =
            histories.iter().map(|h| h.iter().map(|s| self.layout.step_features(s)).collect()).collect();
        let mut values = vec![0.0; histories.len()];
        let mut owners = Vec::with_capacity(self.nets.len());
        let mut tapes = Vec::with_capacity(self.nets.len());
        for (k, net) in self.nets.iter().enumerate() {
            let lag = self.kind.lag(k);
            let width = net.arch().input;
            let mut rows = Vec::new();
            let mut own = Vec::new();
            for (i, f) in feats.iter().enumerate() {
                for j in 0..f.len().saturating_sub(lag) {
                    rows.extend_from_slice(&f[j]);
                    if lag > 0 {
                        rows.extend_from_slice(&f[j + lag]);
                    }
                    own.push(i);
                }
            }
            debug_assert_eq!(rows.len(), own.len() * width);
            debug_assert!(lag > 0 || width == d);
            if own.is_empty() {
                owners.push(own);
                tapes.push(None);
                continue;
            }
            let x = Array2::from_shape_vec((own.len(), width), rows).expect("rows");
            let tape = net.forward_tape(x.view());
            for (r, &i) in own.iter().enumerate() {
                values[i] += tape.output()[[r, 0]];
            }
            owners.push(own);
            tapes.push(Some(tape));
        }
        HEval { values, owners, tapes }
    }

    /// Adds `Σ_i coef_i ∂H_i/∂params` to the flat gradient.
    pub fn backward_batch(&self, eval: &HEval, coef: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.num_params());
        let mut off = 0;
        for (k, net) in self.nets.iter().enumerate() {
            let n = net.num_params();
            if let Some(tape) = &eval.tapes[k] {
                let dy = Array2::from_shape_fn((eval.owners[k].len(), 1), |(r, _)| coef[eval.owners[k][r]]);
                net.backward(tape, dy.view(), &mut grad[off..off + n]);
            }
            off += n;
        }
    }

    pub fn soft_update_into(&self, target: &mut HStructure, tau: f64) {
        for (live, tgt) in self.nets.iter().zip(&mut target.nets) {
            live.soft_update_into(tgt, tau);
        }
    }
}
