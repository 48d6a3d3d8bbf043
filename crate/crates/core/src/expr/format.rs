use std::fmt::Write;

use super::ast::{prec, BinaryOp, Expr, UnaryOp};

/// Renders `e` with the fewest parentheses that still re-parse to the same tree.
pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

/// Shortest decimal text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    // Display for f64 is shortest-round-trip and never uses exponent notation
    format!("{v}")
}

fn write_child(out: &mut String, e: &Expr, min_prec: u8) {
    if e.precedence() < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(v) => out.push_str(&format_number(*v)),
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Const(c) => out.push_str(c.name()),
        Expr::Var { name, .. } => out.push_str(name),
        Expr::Unary { op, operand } => {
            out.push_str(match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "not ",
            });
            write_child(out, operand, prec::UNARY);
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let (lmin, rmin) = match op {
                // base binds tighter than the operator; exponent is a unary operand
                BinaryOp::Pow => (prec::ATOM, prec::UNARY),
                _ if op.is_comparison() => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            write_child(out, lhs, lmin);
            if op.is_logical() {
                let _ = write!(out, " {} ", op.symbol());
            } else {
                out.push_str(op.symbol());
            }
            write_child(out, rhs, rmin);
        }
        Expr::Call { func, args } => {
            out.push_str(func.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ast::Constant;
    use crate::expr::parse_expr;

    #[test]
    fn minimal_parentheses() {
        let two_pi = Expr::binary(BinaryOp::Mul, Expr::Num(2.0), Expr::Const(Constant::Pi));
        assert_eq!(format_expr(&two_pi), "2*pi");
        let neg_sum = Expr::unary(
            UnaryOp::Neg,
            Expr::binary(BinaryOp::Add, Expr::var("a"), Expr::var("b")),
        );
        assert_eq!(format_expr(&neg_sum), "-(a+b)");
        let tower = Expr::binary(
            BinaryOp::Pow,
            Expr::var("a"),
            Expr::binary(BinaryOp::Pow, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(format_expr(&tower), "a^b^c");
    }

    #[test]
    fn associativity_forces_parens_on_the_right() {
        for src in ["a-(b-c)", "a/(b*c)", "(a^b)^c", "(-a)^b", "a^-b", "(a<b)==(c<d)", "not (a and b)"] {
            let e = parse_expr(src).unwrap();
            assert_eq!(format_expr(&e), src);
        }
        let e = parse_expr("((a - b)) - c").unwrap();
        assert_eq!(format_expr(&e), "a-b-c");
    }

    #[test]
    fn numbers_shortest() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_number(1e21), "1000000000000000000000");
        let tiny = 5e-324;
        assert_eq!(format_number(tiny).parse::<f64>().unwrap(), tiny);
    }
}
