//! Plain-text problem dump for cross-checking against external solvers.
//!
//! Format (one line per record, whitespace separated):
//!
//! ```text
//! mdiew-sdp v1
//! problem <name>
//! blocks <count>
//! block <idx> <name> <dim> <hermitian|real>
//! objective <entry-count>
//! obj <block> <row> <col> <re> <im>          # upper triangle, col ≥ row
//! constraints <count>
//! constraint <idx> <rhs> <entry-count>
//! term <block> <row> <col> <re> <im>         # upper triangle, col ≥ row
//! end
//! ```
//!
//! Only nonzero upper-triangle entries are listed; the lower triangle is the
//! conjugate. Values are printed with 17 significant digits so the problem
//! round-trips exactly.

use super::{BlockKind, SdpProblem};
use crate::qlin::HermitianMatrix;
use std::io::{self, Write};

fn write_entries(
    w: &mut impl Write,
    tag: &str,
    block: usize,
    m: &HermitianMatrix,
) -> io::Result<usize> {
    let mut count = 0;
    for i in 0..m.dim() {
        for j in i..m.dim() {
            let z = m.get(i, j);
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(w, "{tag} {block} {i} {j} {:.17e} {:.17e}", z.re, z.im)?;
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn write_dump(problem: &SdpProblem, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "mdiew-sdp v1")?;
    writeln!(w, "problem {}", problem.name.replace(' ', "_"))?;
    writeln!(w, "blocks {}", problem.blocks.len())?;
    for (i, b) in problem.blocks.iter().enumerate() {
        let kind = match b.kind {
            BlockKind::Hermitian => "hermitian",
            BlockKind::RealSymmetric => "real",
        };
        writeln!(w, "block {} {} {} {}", i, b.name.replace(' ', "_"), b.dim, kind)?;
    }
    let mut obj_buf = Vec::new();
    let mut obj_count = 0;
    for (i, c) in problem.objective.iter().enumerate() {
        obj_count += write_entries(&mut obj_buf, "obj", i, c)?;
    }
    writeln!(w, "objective {obj_count}")?;
    w.write_all(&obj_buf)?;
    writeln!(w, "constraints {}", problem.constraints.len())?;
    for (k, con) in problem.constraints.iter().enumerate() {
        let mut buf = Vec::new();
        let mut count = 0;
        for (bi, a) in &con.terms {
            count += write_entries(&mut buf, "term", *bi, a)?;
        }
        writeln!(w, "constraint {k} {:.17e} {count}", con.rhs)?;
        w.write_all(&buf)?;
    }
    writeln!(w, "end")
}
