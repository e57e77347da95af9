use std::fmt::Write;

use super::{Cone, OptimizationModel};

fn bound(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// One line per bound, row and cone; rows read `family[tag]: terms op rhs`.
pub(super) fn render(model: &OptimizationModel) -> String {
    let mut out = String::new();
    for v in &model.variables {
        let _ = writeln!(
            out,
            "bound {}: {} <= {} <= {}",
            v.family.name(),
            bound(v.lower),
            v.name,
            bound(v.upper)
        );
    }
    for r in &model.rows {
        let mut lhs = String::new();
        for (k, &(j, c)) in r.terms.iter().enumerate() {
            let sign = if c < 0.0 { " - " } else if k == 0 { "" } else { " + " };
            let mag = if k == 0 && c < 0.0 { -c } else { c.abs() };
            let _ = write!(lhs, "{sign}{mag} {}", model.variables[j].name);
        }
        let h2 = r.tag.h2.map(|h| format!(",{h}")).unwrap_or_default();
        let name = format!(
            "{}[{},{},{}{}]",
            r.family.name(),
            r.tag.element,
            r.tag.h,
            r.tag.t,
            h2
        );
        if r.lower == r.upper {
            let _ = writeln!(out, "{name}: {lhs} = {}", bound(r.upper));
        } else {
            if r.lower.is_finite() {
                let _ = writeln!(out, "{name}: {lhs} >= {}", bound(r.lower));
            }
            if r.upper.is_finite() {
                let _ = writeln!(out, "{name}: {lhs} <= {}", bound(r.upper));
            }
        }
    }
    for c in &model.cones {
        let tail = |t: &[usize]| {
            t.iter()
                .map(|&j| format!("{}^2", model.variables[j].name))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        match c {
            Cone::Rotated { x, y, tail: t } => {
                let _ = writeln!(
                    out,
                    "cone: {} <= {} * {}",
                    tail(t),
                    model.variables[*x].name,
                    model.variables[*y].name
                );
            }
            Cone::Norm { radius, tail: t } => {
                let _ = writeln!(out, "cone: {} <= {}", tail(t), radius * radius);
            }
        }
    }
    out
}
