use crate::manifest::{OutputKind, RunManifest};

/// One gnuplot script per curve CSV in the manifest, as (file name, text).
/// Scripts reference the CSVs by relative path and are byte-stable.
pub fn emit_plots(manifest: &RunManifest) -> Vec<(String, String)> {
    manifest
        .outputs
        .iter()
        .filter(|o| o.kind == OutputKind::Curve)
        .filter_map(|o| o.plot.as_ref().map(|p| (o, p)))
        .map(|(o, p)| {
            let stem = o.path.trim_end_matches(".csv");
            let mut s = String::new();
            s.push_str(&format!("# gnuplot script for {}\n", o.path));
            s.push_str("set datafile separator ','\n");
            s.push_str("set datafile commentschars '#'\n");
            s.push_str("set key autotitle columnhead\n");
            s.push_str(&format!("set title '{}'\n", p.title));
            s.push_str(&format!("set xlabel '{}'\n", p.xlabel));
            s.push_str(&format!("set ylabel '{}'\n", p.ylabel));
            if p.logx {
                s.push_str("set logscale x\n");
            }
            if p.logy {
                s.push_str("set logscale y\n");
            }
            s.push_str("set terminal pngcairo size 900,600\n");
            s.push_str(&format!("set output '{stem}.png'\n"));
            let parts: Vec<String> =
                p.ys.iter()
                    .enumerate()
                    .map(|(k, y)| {
                        let file = if k == 0 { format!("'{}'", o.path) } else { "''".to_string() };
                        format!("{file} using (column('{}')):(column('{y}')) with linespoints title '{y}'", p.x)
                    })
                    .collect();
            s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
            (format!("{stem}.gp"), s)
        })
        .collect()
}
