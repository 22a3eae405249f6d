use super::{Expr, Formulation, FormulationItem, ItemKind};
use crate::scalar::Scalar;

/// Formats a real with at most six significant digits, trailing zeros
/// trimmed. Plain decimal notation is used for exponents in `-6..=15`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let sign = if negative { "-" } else { "" };

    if !(-6..=15).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }

    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

fn write_expr<T: Scalar>(e: &Expr<T>, out: &mut String) {
    match e {
        Expr::Agg { op, metric, band } => {
            out.push_str(op.keyword());
            out.push('(');
            out.push_str(metric.as_str());
            out.push_str(" in ");
            out.push_str(&band.to_string());
            out.push(')');
        }
        Expr::Const(c) => out.push_str(&format_real(c.to_f64_lossy())),
        Expr::Neg(inner) => {
            out.push_str("neg(");
            write_expr(inner, out);
            out.push(')');
        }
        Expr::Sub(a, b) => {
            out.push_str("sub(");
            write_expr(a, out);
            out.push_str(", ");
            write_expr(b, out);
            out.push(')');
        }
    }
}

fn expr_text<T: Scalar>(e: &Expr<T>) -> String {
    let mut s = String::new();
    write_expr(e, &mut s);
    s
}

/// Canonical text of one item, without the `name:` prefix.
pub(crate) fn item_body<T: Scalar>(item: &FormulationItem<T>) -> String {
    match item.kind {
        ItemKind::Objective => match &item.expr {
            Expr::Neg(inner) => format!("objective maximize {}", expr_text(inner)),
            other => format!("objective minimize {}", expr_text(other)),
        },
        ItemKind::Constraint => match &item.expr {
            Expr::Sub(a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::Const(limit), rhs) => {
                    format!("constraint {} >= {}", expr_text(rhs), format_real(limit.to_f64_lossy()))
                }
                (lhs, Expr::Const(limit)) => {
                    format!("constraint {} <= {}", expr_text(lhs), format_real(limit.to_f64_lossy()))
                }
                _ => format!("constraint {} < 0", expr_text(&item.expr)),
            },
            other => format!("constraint {} < 0", expr_text(other)),
        },
    }
}

pub fn print_item<T: Scalar>(item: &FormulationItem<T>) -> String {
    format!("{}: {}", item.name, item_body(item))
}

/// Canonical text form: one item per line, in order, no trailing newline.
pub fn print_formulation<T: Scalar>(f: &Formulation<T>) -> String {
    f.items().iter().map(print_item).collect::<Vec<_>>().join("\n")
}
