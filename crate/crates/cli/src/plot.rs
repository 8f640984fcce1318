//! Gnuplot scripts for the files written by `simulate`.

use std::fmt::Write as _;

use crate::config::RunConfig;

const HEADER: &str = "set datafile separator ','\nset key autotitle columnhead\nset grid\n";

pub fn script(command: &str, cfg: &RunConfig) -> String {
    let mut s = String::from(HEADER);
    match command {
        "ringdown" => {
            s.push_str("set xlabel 'time (s)'\nset ylabel 'kappa (1/s)'\nset logscale x\n");
            let files: Vec<String> = (0..cfg.ringdown.photon_numbers.len())
                .map(|i| format!("'ringdown_{i:02}.csv' using 1:3 with lines title 'n0 = {:e}'", cfg.ringdown.photon_numbers[i]))
                .collect();
            let _ = writeln!(s, "plot {}", files.join(", \\\n     "));
        }
        "ringup" => {
            s.push_str("set multiplot layout 1,2\n");
            s.push_str("set xlabel 'time (s)'\nset ylabel 'reflected power (W)'\n");
            s.push_str("plot 'ringup.csv' using 1:2 with points pt 7 ps 0.3, '' using 1:3 with lines\n");
            s.push_str("set xlabel 'Re S11'\nset ylabel 'Im S11'\nset size ratio -1\n");
            s.push_str("plot 's11_sweep.csv' using 2:3 with points pt 7 ps 0.5\n");
            s.push_str("unset multiplot\n");
        }
        _ => {
            s.push_str("set multiplot layout 1,2\nset xlabel 'temperature (K)'\n");
            s.push_str("set ylabel 'fractional shift'\nplot 'temperature_sweep.csv' using 1:5 with linespoints\n");
            s.push_str("set ylabel 'Q'\nset logscale y\nplot 'temperature_sweep.csv' using 1:8 with linespoints, '' using 1:6 with lines, '' using 1:7 with lines\n");
            s.push_str("unset multiplot\n");
        }
    }
    s
}
