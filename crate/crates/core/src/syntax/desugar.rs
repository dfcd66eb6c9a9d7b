use super::ast::Formula;

/// Rewrites a formula into the core connectives {Pred, Update, Not, And, Next, Until}.
///
/// `F a` becomes `T U a` where `T` is the tautology `¬(¬x ∧ ¬¬x)` over the first
/// atom `x` of `a`, so no `true` literal is needed. `G a` is `¬F¬a`, `a W b` is
/// `(a U b) ∨ G a`, `a ∨ b` is `¬(¬a ∧ ¬b)` and `a → b` is `¬a ∨ b`.
/// Core formulas are returned unchanged, which makes the rewrite idempotent.
pub fn desugar(f: &Formula) -> Formula {
    match f {
        Formula::Pred { .. } | Formula::Update { .. } => f.clone(),
        Formula::Not { arg } => Formula::not(desugar(arg)),
        Formula::Next { arg } => Formula::next(desugar(arg)),
        Formula::And { lhs, rhs } => Formula::and(desugar(lhs), desugar(rhs)),
        Formula::Until { lhs, rhs } => Formula::until(desugar(lhs), desugar(rhs)),
        Formula::Or { lhs, rhs } => or(desugar(lhs), desugar(rhs)),
        Formula::Implies { lhs, rhs } => or(Formula::not(desugar(lhs)), desugar(rhs)),
        Formula::Finally { arg } => finally(desugar(arg)),
        Formula::Globally { arg } => globally(desugar(arg)),
        Formula::WeakUntil { lhs, rhs } => {
            let (a, b) = (desugar(lhs), desugar(rhs));
            or(Formula::until(a.clone(), b), globally(a))
        }
    }
}

fn or(a: Formula, b: Formula) -> Formula {
    Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
}

fn tautology_over(f: &Formula) -> Formula {
    let atom = f.first_atom();
    or(atom.clone(), Formula::not(atom))
}

fn finally(a: Formula) -> Formula {
    Formula::until(tautology_over(&a), a)
}

fn globally(a: Formula) -> Formula {
    Formula::not(finally(Formula::not(a)))
}
