//! Shape and color losses with analytic gradients.

mod color;
pub mod gradcheck;
pub mod norm;
mod shape;

use std::fmt::Write as _;
use std::str::FromStr;

pub use color::{blend_loss, clr_regress_loss, total_color_loss, ColorLossInputs};
pub use gradcheck::{grad_check, GradReport, LossInstance};
pub use shape::{
    cross_entropy_loss, false_cross_entropies, l2_shape_loss, msfcel, msfcel_decomposition,
    EPS_CE,
};

use crate::volumes::{ColorVolume, FlowVolume, Grid, WeightVolume};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Fpce,
    Fnce,
    Flow,
    ClrRegress,
    Blend,
}

impl LossTerm {
    pub fn key(self) -> &'static str {
        match self {
            Self::Fpce => "fpce",
            Self::Fnce => "fnce",
            Self::Flow => "l_flow",
            Self::ClrRegress => "l_clr_regress",
            Self::Blend => "l_blend",
        }
    }
}

/// Gradient of a loss with respect to one of its volume arguments.
#[derive(Clone, Debug, PartialEq)]
pub enum Gradient {
    Occupancy(Grid<f64>),
    Flow(FlowVolume),
    Regressed(ColorVolume),
    Weights(WeightVolume),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub terms: Vec<(LossTerm, f64)>,
    pub grads: Vec<Gradient>,
}

impl LossReport {
    pub fn term(&self, term: LossTerm) -> Option<f64> {
        self.terms.iter().find(|(t, _)| *t == term).map(|(_, v)| *v)
    }

    pub fn occupancy_grad(&self) -> Option<&Grid<f64>> {
        self.grads.iter().find_map(|g| match g {
            Gradient::Occupancy(g) => Some(g),
            _ => None,
        })
    }

    pub fn flow_grad(&self) -> Option<&FlowVolume> {
        self.grads.iter().find_map(|g| match g {
            Gradient::Flow(g) => Some(g),
            _ => None,
        })
    }

    pub fn regressed_grad(&self) -> Option<&ColorVolume> {
        self.grads.iter().find_map(|g| match g {
            Gradient::Regressed(g) => Some(g),
            _ => None,
        })
    }

    pub fn weights_grad(&self) -> Option<&WeightVolume> {
        self.grads.iter().find_map(|g| match g {
            Gradient::Weights(g) => Some(g),
            _ => None,
        })
    }

    /// `key=value` lines: `loss`, then each sub-term, then `grad` when a
    /// gradient file was written.
    pub fn to_kv(&self, grad_path: Option<&str>) -> String {
        let mut s = String::new();
        writeln!(s, "loss={}", self.loss).unwrap();
        for (term, v) in &self.terms {
            writeln!(s, "{}={}", term.key(), v).unwrap();
        }
        if let Some(p) = grad_path {
            writeln!(s, "grad={p}").unwrap();
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Msfcel,
    CrossEntropy,
    L2,
    Flow,
    ClrRegress,
    Blend,
    Total,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        Self::Msfcel,
        Self::CrossEntropy,
        Self::L2,
        Self::Flow,
        Self::ClrRegress,
        Self::Blend,
        Self::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Msfcel => "msfcel",
            Self::CrossEntropy => "ce",
            Self::L2 => "l2",
            Self::Flow => "flow",
            Self::ClrRegress => "clr",
            Self::Blend => "blend",
            Self::Total => "total",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown loss kind {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_block() {
        let r = LossReport {
            loss: 0.5,
            terms: vec![(LossTerm::Fpce, 0.25), (LossTerm::Fnce, 0.5)],
            grads: Vec::new(),
        };
        assert_eq!(r.to_kv(Some("g.cvol")), "loss=0.5\nfpce=0.25\nfnce=0.5\ngrad=g.cvol\n");
    }

    #[test]
    fn kind_names_round_trip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert!("mse".parse::<LossKind>().is_err());
    }
}
