//! Heights on regional growth at ages 0, 6, 12 and 18 with province and
//! decade fixed effects, estimated over the ventile grid and by OLS.
//!
//! The synthetic panel gives growth at age 6 a coefficient of 40(1 − τ).

use quantkit::data::{build_design, DesignSpec};
use quantkit::qreg::{fit_grid, fit_ols, ventile_grid, SolverOptions};
use quantkit::simulate::{gen_height_panel, HeightPanelDgp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dgp = HeightPanelDgp::standard(7);
    let series = dgp.gdp_series()?;
    let growth = quantkit::decadal_growth(&series[0])?;
    println!("{} GDP growth by decade: {:.3?}", series[0].unit(), growth);

    let data = gen_height_panel(&dgp)?;
    let spec = DesignSpec::new()
        .continuous(["growth0", "growth6", "growth12", "growth18"])
        .fixed_effects(["province", "decade"]);
    let design = build_design(&data, "height", &spec)?;
    let names = design.matrix.column_names();
    println!("{} births, {} regressors: {}", design.response.len(), names.len(), names.join(" "));

    let x = design.matrix.values();
    let fits = fit_grid(x, &design.response, &ventile_grid(), &SolverOptions::default())?;
    let ols = fit_ols(x, &design.response)?;
    let cols: Vec<usize> = (1..=4).collect();

    println!("\n  tau  growth0  growth6 growth12 growth18");
    for fit in &fits {
        print!("{:5.2}", fit.tau);
        for &j in &cols {
            print!(" {:8.2}", fit.beta[j]);
        }
        println!();
    }
    print!(" mean");
    for &j in &cols {
        print!(" {:8.2}", ols.beta[j]);
    }
    println!();
    Ok(())
}
