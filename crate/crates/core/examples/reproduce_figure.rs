//! Runs a figure sweep through the library API, writes its CSV and SVG
//! charts and prints the acceptance checks.
//!
//! ```text
//! cargo run --release --example reproduce_figure -- fig3 out/        # smoke budget
//! FULL=1 cargo run --release --example reproduce_figure -- fig3 out/ # full budget
//! ```

use std::path::PathBuf;

use recon::harness::figures::Figure;
use recon::harness::run_experiment;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let figure: Figure = args.next().as_deref().unwrap_or("fig3").parse().expect("fig3 or fig4");
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(figure.name()));
    let smoke = std::env::var_os("FULL").is_none();
    let reps = if smoke { 2 } else { figure.default_reps() };

    let results = run_experiment(&figure.spec(reps, 0, smoke));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("results.csv"), results.to_csv())?;
    for (stem, svg) in figure.charts(&results) {
        std::fs::write(out.join(format!("{stem}.svg")), svg)?;
    }
    for (i, cell) in results.spec.cells.iter().enumerate() {
        let s = results.cell_summary(i);
        println!("{:<24} {} mean {:.3} std {:.3}", cell.label(), results.metric(), s.mean, s.std);
    }
    for check in figure.check(&results) {
        println!("{}", check.line());
    }
    println!("wrote {}", out.display());
    Ok(())
}
