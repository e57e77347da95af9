//! Full network operating point behind one polygon vertex.

use serde::{Deserialize, Serialize};

use crate::model::{Layout, VarKind};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dispatch {
    pub h: usize,
    pub t: usize,
    /// Squared bus voltages, in bus order. Empty in copper-plate mode.
    pub v: Vec<f64>,
    /// Squared line currents, in line order.
    pub l: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub p_charge: Vec<f64>,
    pub p_discharge: Vec<f64>,
    pub energy: Vec<f64>,
    pub u_charge: Vec<f64>,
    pub u_discharge: Vec<f64>,
    pub p_pcc: f64,
    pub q_pcc: f64,
}

impl Dispatch {
    fn slot(&mut self, kind: VarKind) -> Option<&mut Vec<f64>> {
        Some(match kind {
            VarKind::V => &mut self.v,
            VarKind::L => &mut self.l,
            VarKind::PFlow => &mut self.p_flow,
            VarKind::QFlow => &mut self.q_flow,
            VarKind::PGen => &mut self.p_gen,
            VarKind::QGen => &mut self.q_gen,
            VarKind::PCharge => &mut self.p_charge,
            VarKind::PDischarge => &mut self.p_discharge,
            VarKind::Energy => &mut self.energy,
            VarKind::UCharge => &mut self.u_charge,
            VarKind::UDischarge => &mut self.u_discharge,
            VarKind::PPcc | VarKind::QPcc | VarKind::Deviation => return None,
        })
    }

    /// Read replica (h, t) out of a model assignment.
    pub fn from_assignment(layout: &Layout, x: &[f64], h: usize, t: usize) -> Dispatch {
        let mut d = Dispatch { h, t, ..Dispatch::default() };
        for kind in VECTOR_KINDS {
            let vals = (0..layout.count(kind)).map(|e| x[layout.var(kind, e, h, t)]).collect();
            *d.slot(kind).expect("vector kind") = vals;
        }
        d.p_pcc = x[layout.var(VarKind::PPcc, 0, h, t)];
        d.q_pcc = x[layout.var(VarKind::QPcc, 0, h, t)];
        d
    }

    /// Write this dispatch into replica (h', t) of an assignment.
    pub fn write_into(&self, layout: &Layout, x: &mut [f64], h: usize, t: usize) {
        let mut me = self.clone();
        for kind in VECTOR_KINDS {
            let vals = me.slot(kind).expect("vector kind");
            for (e, &v) in vals.iter().enumerate().take(layout.count(kind)) {
                x[layout.var(kind, e, h, t)] = v;
            }
        }
        x[layout.var(VarKind::PPcc, 0, h, t)] = self.p_pcc;
        x[layout.var(VarKind::QPcc, 0, h, t)] = self.q_pcc;
    }

    pub fn pcc(&self) -> (f64, f64) {
        (self.p_pcc, self.q_pcc)
    }
}

const VECTOR_KINDS: [VarKind; 11] = [
    VarKind::V,
    VarKind::L,
    VarKind::PFlow,
    VarKind::QFlow,
    VarKind::PGen,
    VarKind::QGen,
    VarKind::PCharge,
    VarKind::PDischarge,
    VarKind::Energy,
    VarKind::UCharge,
    VarKind::UDischarge,
];
