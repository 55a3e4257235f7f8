//! PRISM `dtmc` listing of the weather abstraction.
//!
//! The listing keeps the kernel symbolic in the state variables `r` and
//! `h`, with one guarded update per target cell, so it can be cross-checked
//! in an external model checker.

use std::fmt::Write;

use super::weather::TWO_RAINY_DAYS;
use crate::error::{Error, Result};

/// The weather abstraction with `n` humidity cells as a PRISM model.
///
/// Target indices in the update expressions are zero-padded to the width of
/// `n − 1`. The case-study property and start state follow as comments.
pub fn weather_prism(n: usize) -> Result<String> {
    if n == 0 {
        return Err(Error::domain("need at least one humidity cell"));
    }
    let width = (n - 1).to_string().len();
    let mut out = String::new();
    let w = &mut out;
    // writing to a String cannot fail
    let _ = writeln!(w, "// PRISM specification for the Abstract Model.");
    let _ = writeln!(w);
    let _ = writeln!(w, "dtmc");
    let _ = writeln!(w, "formula N = {n};");
    let _ = writeln!(w, "formula pToRain = r = 1 ? 1/4 + 3/4 * h/N : 3/4 * h/N;");
    let _ = writeln!(w, "module weatherAbstractModel");
    let _ = writeln!(w);
    let _ = writeln!(w, "// State space");
    let _ = writeln!(w, "r : [0..1];");
    let _ = writeln!(w, "h : [0.. (N-1)];");
    let _ = writeln!(w);
    let _ = writeln!(w, "[] true ->");
    let mut first = true;
    for h1 in 0..n {
        let lead = if first { "   " } else { " + " };
        first = false;
        let _ = writeln!(
            w,
            "{lead}(pToRain * 2/(N + h) * max(min((N+h)/2 - {h1:0width$}, 1), 0))"
        );
        let _ = writeln!(w, "        : (r'=1) & (h'={h1})");
    }
    for h1 in 0..n {
        let _ = writeln!(
            w,
            " + ((1-pToRain) * 2/(2*N-h) * max(min({h1:0width$} + 1 - h/2, 1), 0))"
        );
        let end = if h1 + 1 == n { ";" } else { "" };
        let _ = writeln!(w, "        : (r'=0) & (h'={h1}){end}");
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "endmodule");
    let _ = writeln!(w);
    let _ = writeln!(w, "// Property: {TWO_RAINY_DAYS}");
    let _ = writeln!(w, "// filter(state, P=? [");
    let _ = writeln!(w, "//   ( (X (r=1)) & (X X (r=1)) )");
    let _ = writeln!(w, "//   | ( (X X (r=1)) & (X X X (r=1)) )");
    let _ = writeln!(w, "// ], r=0&h={})", n / 2);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_for_thousand_cells() {
        let text = weather_prism(1000).unwrap();
        assert!(text.starts_with("// PRISM specification for the Abstract Model.\n\ndtmc\nformula N = 1000;\n"));
        assert!(text.contains("   (pToRain * 2/(N + h) * max(min((N+h)/2 - 000, 1), 0))\n        : (r'=1) & (h'=0)\n"));
        assert!(text.contains(" + (pToRain * 2/(N + h) * max(min((N+h)/2 - 999, 1), 0))\n        : (r'=1) & (h'=999)\n"));
        assert!(text.contains(" + ((1-pToRain) * 2/(2*N-h) * max(min(000 + 1 - h/2, 1), 0))\n        : (r'=0) & (h'=0)\n"));
        assert!(text.contains("        : (r'=0) & (h'=999);\n\nendmodule\n"));
        assert!(text.contains("r=0&h=500"));
        assert_eq!(text.matches("        : (r'=").count(), 2000);
    }

    #[test]
    fn single_cell() {
        let text = weather_prism(1).unwrap();
        assert!(text.contains("(N+h)/2 - 0, 1)"));
        assert!(weather_prism(0).is_err());
    }
}
