//! Basic COCOMO, organic mode, 3.5 KLOC at 4800 per person-month.

use uuis_core::cocomo::{estimate, CocomoInput};

use crate::Outcome;

fn within(name: &str, got: f64, want: f64, tol: f64, failures: &mut Vec<String>) {
    if (got - want).abs() > tol {
        failures.push(format!("{name} = {got:.4}, expected {want} ± {tol}"));
    }
}

pub fn criterion() -> Outcome {
    let mut failures = Vec::new();

    let r = estimate(&CocomoInput::organic(3.5, 1.3241, 4800.0)).map_err(|e| e.to_string())?;
    within("E", r.effort_pm, 15.79, 0.01, &mut failures);
    within("D", r.schedule_months, 7.13, 0.01, &mut failures);
    within("P", r.people, 2.21, 0.01, &mut failures);
    // 75788.09 / 4800 = 15.78919, while 3.2 * 3.5^1.05 * 1.3241 = 15.78855.
    // No rounding of E, D or P reproduces this figure; the check stays strict.
    within("C", r.cost, 75788.09, 1.0, &mut failures);

    // A report that prints EAF to two places shows 1.32 beside E = 15.79.
    // Recomputing from the rounded 1.32 gives 15.74, about 0.3% lower.
    let rounded = estimate(&CocomoInput::organic(3.5, 1.32, 4800.0)).map_err(|e| e.to_string())?;
    within("E(1.32)", rounded.effort_pm, 15.74, 0.01, &mut failures);
    let divergence = (15.79 - rounded.effort_pm) / 15.79;
    if !(0.002..0.004).contains(&divergence) {
        failures.push(format!("E(1.32) diverges from 15.79 by {:.3}%, expected about 0.3%", divergence * 100.0));
    }
    if rounded.cost != rounded.effort_pm * 4800.0 {
        failures.push(format!("C(1.32) = {} but E * 4800 = {}", rounded.cost, rounded.effort_pm * 4800.0));
    }

    let summary = format!(
        "E={:.2} D={:.2} P={:.2} C={:.2}; E(1.32)={:.2} C(1.32)=E*4800",
        r.effort_pm, r.schedule_months, r.people, r.cost, rounded.effort_pm
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}
