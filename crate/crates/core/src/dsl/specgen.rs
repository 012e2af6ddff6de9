//! Random generation of grammar-conforming expressions.
//!
//! Used to fuzz the parser round-trip and the no-look-ahead property over
//! many shapes. Generated trees use only constructs the surface grammar
//! can produce: production columns, plain literals, lags >= 1 and windows
//! >= 1.

use rand::Rng;

use crate::panel::Column;
use crate::scalar::Scalar;

use super::ast::{Expr, FactorSpec, RollOp};

const COLUMNS: &[Column] = &[
    Column::Open,
    Column::High,
    Column::Low,
    Column::Close,
    Column::Volume,
    Column::Amount,
    Column::Basis,
    Column::Spot,
    Column::Premium,
    Column::Ret,
];

const LITERALS: &[f64] = &[0.5, 1.0, 2.0, 2.5, 10.0];

/// Samples a random expression with nesting depth at most `max_depth`.
pub fn random_spec<R: Scalar>(
    name: impl Into<String>,
    rng: &mut impl Rng,
    max_depth: usize,
) -> FactorSpec<R> {
    FactorSpec {
        name: name.into(),
        expr: gen_expr(rng, max_depth),
    }
}

fn gen_expr<R: Scalar>(rng: &mut impl Rng, depth: usize) -> Expr<R> {
    if depth == 0 {
        return gen_leaf(rng);
    }
    let next = depth - 1;
    match rng.random_range(0..14u32) {
        0 => gen_leaf(rng),
        1 => Expr::Neg(Box::new(gen_expr(rng, next))),
        2 => Expr::Abs(Box::new(gen_expr(rng, next))),
        3 => Expr::Sign(Box::new(gen_expr(rng, next))),
        4 => Expr::Log(Box::new(gen_expr(rng, next))),
        5 => Expr::Add(Box::new(gen_expr(rng, next)), Box::new(gen_expr(rng, next))),
        6 => Expr::Sub(Box::new(gen_expr(rng, next)), Box::new(gen_expr(rng, next))),
        7 => Expr::Mul(Box::new(gen_expr(rng, next)), Box::new(gen_expr(rng, next))),
        8 => Expr::Div(Box::new(gen_expr(rng, next)), Box::new(gen_expr(rng, next))),
        9 => Expr::Lag(Box::new(gen_expr(rng, next)), rng.random_range(1..=5)),
        10 => Expr::Diff(Box::new(gen_expr(rng, next))),
        11 => {
            let op = match rng.random_range(0..5u32) {
                0 => RollOp::Mean,
                1 => RollOp::Std,
                2 => RollOp::Sum,
                3 => RollOp::Min,
                _ => RollOp::Max,
            };
            Expr::Roll(op, Box::new(gen_expr(rng, next)), rng.random_range(1..=8))
        }
        12 => Expr::Corr(
            Box::new(gen_expr(rng, next)),
            Box::new(gen_expr(rng, next)),
            rng.random_range(2..=8),
        ),
        _ => {
            if rng.random_bool(0.5) {
                Expr::Czs(Box::new(gen_expr(rng, next)))
            } else {
                Expr::Crank(Box::new(gen_expr(rng, next)))
            }
        }
    }
}

fn gen_leaf<R: Scalar>(rng: &mut impl Rng) -> Expr<R> {
    if rng.random_bool(0.75) {
        Expr::Col(COLUMNS[rng.random_range(0..COLUMNS.len())])
    } else {
        Expr::Lit(R::from_f64_lossy(
            LITERALS[rng.random_range(0..LITERALS.len())],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{check_lookahead, parse_expression};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_specs_parse_back_to_the_same_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..500 {
            let spec: FactorSpec<f64> = random_spec(format!("g{i}"), &mut rng, 4);
            let text = spec.expr.to_text();
            let reparsed = parse_expression::<f64>(&text)
                .unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(spec.expr, reparsed, "round trip failed for {text}");
        }
    }

    #[test]
    fn generated_specs_pass_the_static_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for i in 0..500 {
            let spec: FactorSpec<f64> = random_spec(format!("g{i}"), &mut rng, 5);
            assert!(check_lookahead(&spec).pass);
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a: FactorSpec<f64> = random_spec("a", &mut ChaCha8Rng::seed_from_u64(5), 6);
        let b: FactorSpec<f64> = random_spec("a", &mut ChaCha8Rng::seed_from_u64(5), 6);
        assert_eq!(a, b);
    }
}
