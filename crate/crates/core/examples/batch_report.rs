//! Drive the batch front end in-process: write a synthetic panel, then a
//! coefficient-by-quantile report with an OLS block, as CSV and JSON.

use quantkit::cli;

fn main() {
    let dir = std::env::temp_dir().join("quantkit-batch-report");
    std::fs::create_dir_all(&dir).unwrap();
    let panel = dir.join("panel.csv");
    let report = dir.join("report.json");
    let (panel, report) = (panel.to_str().unwrap(), report.to_str().unwrap());

    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let steps: [&[&str]; 3] = [
        &["quantkit", "simulate", "--generate", "height-panel", "--seed", "7", "--output", panel],
        &[
            "quantkit", "fit", "--input", panel, "--response", "height", "--terms", "growth6,growth12",
            "--fixed-effects", "province,decade", "--taus", "0.1:0.9:0.2", "--se", "iid", "--ols",
        ],
        &[
            "quantkit", "fit", "--input", panel, "--response", "height", "--terms", "growth6",
            "--taus", "0.5", "--se", "bootstrap", "--bootstrap-reps", "100", "--seed", "1",
            "--format", "json", "--output", report,
        ],
    ];
    for args in steps {
        let code = cli::run(args.iter().copied(), &mut stdout, &mut stderr);
        assert_eq!(code, 0);
    }
    println!("\nJSON report:\n{}", std::fs::read_to_string(report).unwrap());
}
