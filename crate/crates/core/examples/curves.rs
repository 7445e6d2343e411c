//! Curve classification and strictly feasible LMI points.

use pencil_gauge::pencil::{rank_condition, standard_pencil, strictly_feasible_point, AtomSet, Family};
use pencil_gauge::region::{classify, make_curve, CurveKind};

fn main() {
    let kinds = [
        CurveKind::UnitCircle,
        CurveKind::UnitCircleArc { a: 0.5, b: 1.0 },
        CurveKind::ImagInterval { a: -1.0, b: 2.0 },
        CurveKind::RealHalflineGeq { a: 0.0 },
        CurveKind::RealComplement { a: -1.0, b: 1.0 },
    ];
    for kind in kinds {
        let curve = make_curve(kind).unwrap();
        let aset = AtomSet::new(standard_pencil(&Family::HankelPowers { n: 5 }).unwrap(), curve).unwrap();
        let x = strictly_feasible_point(&aset, 0).map(|x| x.trace().re);
        println!("{kind:?}: {:?}, rank condition {:?}, feasible point trace {x:.3?}", classify(&curve), rank_condition(&aset, 64, 0));
    }
}
