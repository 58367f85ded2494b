//! Gnuplot scripts that render the run's figures from its CSV files. Each
//! script is run from the run directory: `gnuplot plots/profiles.gp`.

const PREAMBLE: &str = "set datafile separator ','\nset terminal svg size 800,600 dynamic\n";

/// (file name, script) pairs. `curves` and `members` are the number of
/// curves in `profiles.csv` and `rescaled.csv`.
pub fn scripts(curves: usize, members: usize, radius: f64) -> Vec<(String, String)> {
    let mut out = vec![
        (
            "profiles.gp".to_string(),
            format!(
                "{PREAMBLE}set output 'plots/profiles.svg'\nset size ratio -1\nset xlabel 'Re γ'\nset ylabel 'Im γ'\n\
                 set title 'Profile curves'\nunset key\n\
                 plot for [k=0:{last}] 'profiles.csv' skip 1 using ($1 == k ? $3 : NaN):4 with lines\n",
                last = curves.saturating_sub(1)
            ),
        ),
        (
            "density.gp".to_string(),
            format!(
                "{PREAMBLE}set output 'plots/density.svg'\nset xlabel 't'\nset key top right\n\
                 set title 'Gaussian density and angle moment'\n\
                 plot 'density.csv' skip 1 using 1:2 with linespoints title 'density', \\\n     \
                 'density.csv' skip 1 using 1:5 with linespoints title '(θ − π)² moment'\n"
            ),
        ),
        (
            "density_ratio.gp".to_string(),
            format!(
                "{PREAMBLE}set output 'plots/density_ratio.svg'\nset logscale x\nset xlabel 'δ'\nset ylabel 'length ratio'\n\
                 set title 'Density ratio at the singular point'\nunset key\n\
                 plot 'density_ratio.csv' skip 1 using 1:2:3 with points palette pt 7 ps 0.5\n"
            ),
        ),
    ];
    if members > 0 {
        out.push((
            "rescaled.gp".to_string(),
            format!(
                "{PREAMBLE}set output 'plots/rescaled.svg'\nset size ratio -1\nset xrange [-{radius}:{radius}]\nset yrange [-{radius}:{radius}]\n\
                 set title 'Rescaled curves'\nset key top left\n\
                 plot for [k=0:{last}] 'rescaled.csv' skip 1 using ($1 == k ? $3 : NaN):4 with lines title sprintf('member %d', k)\n",
                last = members - 1
            ),
        ));
    }
    out
}
