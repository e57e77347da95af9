//! The four study cases: lossless without and with ramps, then the full
//! network without and with storage.

use serde::{Deserialize, Serialize};

use crate::model::{AssemblyOptions, CouplingMode, NetworkMode};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Copper plate, no inter-temporal limits, no storage.
    I,
    /// Copper plate with generator ramps.
    II,
    /// Full network with limits and ramps, no storage.
    III,
    /// Case III plus storage.
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];

    pub fn name(self) -> &'static str {
        match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
        }
    }

    pub fn parse(s: &str) -> Option<Case> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Some(Case::I),
            "II" | "2" => Some(Case::II),
            "III" | "3" => Some(Case::III),
            "IV" | "4" => Some(Case::IV),
            _ => None,
        }
    }

    /// Network and assembly options for this case. `ramp` rescales every
    /// generator's ramp to that fraction of its capacity; `None` keeps the
    /// network's own ramps.
    pub fn apply(
        self,
        net: &Network,
        ramp: Option<f64>,
        coupling: CouplingMode,
    ) -> (Network, AssemblyOptions) {
        let mut net = match ramp {
            Some(f) => net.with_ramp_fraction(Some(f)),
            None => net.clone(),
        };
        if self != Case::IV {
            net = net.without_batteries();
        }
        let copper = matches!(self, Case::I | Case::II);
        let options = AssemblyOptions {
            coupling,
            network: if copper { NetworkMode::CopperPlate } else { NetworkMode::DistFlow },
            limits: !copper,
            ramps: self != Case::I,
            terminal_soc: false,
        };
        (net, options)
    }
}
