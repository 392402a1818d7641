use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn plot_script_path(csv: &Path) -> PathBuf {
    csv.with_extension("gp")
}

pub fn png_name(script: &Path) -> String {
    script
        .with_extension("png")
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot.png".into())
}

pub struct PlotCurve {
    pub csv: PathBuf,
    pub title: String,
}

pub struct Panel {
    pub title: String,
    pub curves: Vec<PlotCurve>,
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Single-panel script. CSVs are referenced by file name, so the script
/// must sit next to them.
pub fn gnuplot_script(curves: Vec<PlotCurve>, xstar: Option<f64>, png: &str) -> String {
    let panel = Panel {
        title: String::new(),
        curves,
    };
    panels_script(&[panel], xstar, png)
}

/// Side-by-side panels of `x` against `t`, rendered to `png`.
pub fn panels_script(panels: &[Panel], xstar: Option<f64>, png: &str) -> String {
    let mut s = String::new();
    let width = 640 * panels.len().max(1);
    let _ = writeln!(s, "set terminal pngcairo size {width},480");
    let _ = writeln!(s, "set output '{png}'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 't'");
    let _ = writeln!(s, "set ylabel 'x'");
    let _ = writeln!(s, "set key top right");
    if panels.len() > 1 {
        let _ = writeln!(s, "set multiplot layout 1,{}", panels.len());
    }
    for panel in panels {
        let _ = writeln!(s, "set title '{}'", panel.title);
        let mut parts: Vec<String> = panel
            .curves
            .iter()
            .map(|c| format!("'{}' using 1:2 skip 1 with lines title '{}'", file_name(&c.csv), c.title))
            .collect();
        if let Some(x) = xstar {
            parts.push(format!("{} with lines dashtype 2 lc rgb 'gray' title 'x*'", ddestab::integrator::format_g17(x)));
        }
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    }
    if panels.len() > 1 {
        let _ = writeln!(s, "unset multiplot");
    }
    s
}
