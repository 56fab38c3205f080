//! Deterministic LP-format text export.

use super::{MilpModel, ObjectiveSense, VarKind};

/// Coefficient formatting: nine significant digits, plain decimal in the
/// common magnitude range, trailing zeros trimmed.
pub(crate) fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..=12).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, v);
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".to_string()
        } else {
            s.to_string()
        }
    } else {
        format!("{:.8e}", v)
    }
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], model: &MilpModel) {
    let mut on_line = 0;
    for (pos, &(var, coeff)) in terms.iter().enumerate() {
        if on_line == 8 {
            out.push_str("\n   ");
            on_line = 0;
        }
        let name = &model.variable(var).name;
        if pos == 0 {
            if coeff < 0.0 {
                out.push_str(&format!("- {} {}", sig9(-coeff), name));
            } else {
                out.push_str(&format!("{} {}", sig9(coeff), name));
            }
        } else if coeff < 0.0 {
            out.push_str(&format!(" - {} {}", sig9(-coeff), name));
        } else {
            out.push_str(&format!(" + {} {}", sig9(coeff), name));
        }
        on_line += 1;
    }
    if terms.is_empty() {
        out.push('0');
    }
}

/// Renders the model as LP text: objective, constraints, non-default bounds
/// and the binary declarations. Byte-identical across runs for equal models.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("\\ {}\n", model.name));
    out.push_str(match model.objective_sense {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    push_terms(&mut out, &model.objective, model);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &model.constraints {
        out.push_str(&format!(" {}: ", c.name));
        push_terms(&mut out, &c.terms, model);
        out.push_str(&format!(" {} {}\n", c.sense, sig9(c.rhs)));
    }

    out.push_str("Bounds\n");
    for v in model.variables() {
        match v.kind {
            VarKind::Binary => {
                // only non-default binary bounds (fixings) need a row
                if v.lower == v.upper {
                    out.push_str(&format!(" {} = {}\n", v.name, sig9(v.lower)));
                }
            }
            VarKind::Continuous => {
                if v.lower == v.upper {
                    out.push_str(&format!(" {} = {}\n", v.name, sig9(v.lower)));
                } else if v.lower != 0.0 || v.upper.is_finite() {
                    out.push_str(&format!(
                        " {} <= {} <= {}\n",
                        sig9(v.lower),
                        v.name,
                        sig9(v.upper)
                    ));
                }
            }
        }
    }

    out.push_str("Binaries\n");
    let mut on_line = 0;
    for v in model.variables() {
        if v.kind == VarKind::Binary {
            if on_line == 8 {
                out.push('\n');
                on_line = 0;
            }
            out.push(' ');
            out.push_str(&v.name);
            on_line += 1;
        }
    }
    if on_line > 0 {
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ObjectiveSense;

    #[test]
    fn sig9_formatting() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.6), "0.6");
        assert_eq!(sig9(-0.125), "-0.125");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(684.0), "684");
        assert_eq!(sig9(123456789.123), "123456789");
        assert_eq!(sig9(1e-13), "1.00000000e-13");
    }

    #[test]
    fn empty_model_renders_headers() {
        let model = MilpModel::new("empty", ObjectiveSense::Minimize);
        let text = export_lp(&model);
        assert_eq!(text, "\\ empty\nMinimize\n obj: 0\nSubject To\nBounds\nBinaries\nEnd\n");
    }
}
