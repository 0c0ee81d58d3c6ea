//! Write the witness problems for ideal Werner tables to a directory in the
//! debug dump format, for cross-checking against an external solver.
//!
//! Usage: cargo run --release --example dump_reference -- <outdir>
//!
//! One file per λ on the reference grid; `tools/pin_reference.py` solves the
//! dumps independently and freezes the optima into
//! `crates/mdiew/tests/data/pinned_reference.json`.

use mdiew::qlin::werner_state;
use mdiew::scenario::{ideal_correlations, InputStateSet, MeasurementModel};
use mdiew::sdp::write_dump;
use mdiew::witness::assemble_witness_problem;

pub const REFERENCE_GRID: [f64; 15] = [
    1.0, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
    1.0 / 3.0,
];

fn main() {
    let outdir = std::env::args()
        .nth(1)
        .expect("usage: dump_reference <outdir>");
    std::fs::create_dir_all(&outdir).expect("create output directory");
    let inputs = InputStateSet::standard();
    let meas = MeasurementModel::ideal();
    for (i, &lambda) in REFERENCE_GRID.iter().enumerate() {
        let rho = werner_state(lambda).expect("valid weight");
        let table = ideal_correlations(&rho, &inputs, &meas).expect("ideal table");
        let mut problem = assemble_witness_problem(&table, &inputs).expect("assembles");
        problem.name = format!("ref_{i:02}_lambda_{lambda:.6}");
        let path = std::path::Path::new(&outdir).join(format!("{}.sdp", problem.name));
        let mut f = std::fs::File::create(&path).expect("create dump file");
        write_dump(&problem, &mut f).expect("write dump");
        println!("{} {}", lambda, path.display());
    }
}
