//! The `report` command: every stage, then a Markdown summary.

use std::fmt::Write;

use crate::pipeline::{self, Context, Failure, Instrument, PairFamily, PipelineError};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn mark(ok: bool) -> &'static str {
    if ok { "pass" } else { "FAIL" }
}

/// Runs all stages over `instruments` and writes `report.md`. Returns every
/// per-instrument failure, including the ones passed in from loading.
pub fn run(
    ctx: &Context,
    instruments: Vec<Instrument>,
    mut failures: Vec<Failure>,
) -> Result<Vec<Failure>, PipelineError> {
    let table1 = pipeline::table1(ctx, &instruments)?;
    let dist = pipeline::distributions(ctx, &instruments)?;
    let qq = pipeline::qq(ctx, &instruments)?;
    let ensemble = pipeline::ensemble(ctx)?;
    let spectra = pipeline::spectra(ctx, &instruments, ensemble)?;
    let ensemble = spectra.ensemble.as_ref().expect("spectra keep the ensemble summary");
    failures.extend(table1.failures.iter().cloned());
    failures.extend(dist.failures.iter().cloned());
    failures.extend(qq.failures.iter().cloned());
    failures.extend(spectra.failures.iter().cloned());

    let cfg = &ctx.config;
    let meta = ctx.artifacts.meta();
    let mut md = String::new();
    let _ = writeln!(md, "# trajspec report\n");
    let _ = writeln!(
        md,
        "- artifact version: `{}`\n- config hash: `{}`\n- seed: {}\n- returns standardized before spectra: {}\n",
        meta.artifact_version, meta.config_hash, meta.seed, cfg.standardize
    );

    let _ = writeln!(md, "## Lag-1 autocorrelation\n");
    let _ = writeln!(md, "| instrument | returns | absolute returns |\n|---|---:|---:|");
    for row in &table1.rows {
        let _ = writeln!(md, "| {} | {:.4} | {:.4} |", row.instrument_id, row.raw, row.absolute);
    }

    let _ = writeln!(md, "\n## Return distributions\n");
    let _ = writeln!(
        md,
        "| instrument | n | mean | sd | skewness | excess kurtosis | KDE bandwidth | KDE mass |\n|---|---:|---:|---:|---:|---:|---:|---:|"
    );
    for s in &dist.stats {
        let _ = writeln!(
            md,
            "| {} | {} | {:.3e} | {:.3e} | {:.3} | {:.3} | {:.3e} | {:.4} |",
            s.instrument, s.n, s.mean, s.std_dev, s.skewness, s.excess_kurtosis, s.kde_bandwidth, s.kde_integral
        );
    }

    let _ = writeln!(md, "\n## Distributional universality of returns\n");
    let _ = writeln!(
        md,
        "Linearity score: largest residual from the least-squares line over the interquartile range of the second sample. Lower is more linear.\n"
    );
    let _ = writeln!(md, "| left | right | family | raw | standardized | slope |\n|---|---|---|---:|---:|---:|");
    for p in &qq.pairs {
        let family = match p.family {
            PairFamily::VsGaussian => "vs Gaussian",
            PairFamily::Pairwise => "pairwise",
        };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {:.4} |",
            p.left,
            p.right,
            family,
            opt(p.raw_linearity),
            opt(p.standardized_linearity),
            p.standardized_slope
        );
    }

    let _ = writeln!(md, "\n## Spectra of trajectory matrices\n");
    let _ = writeln!(
        md,
        "| instrument | m | method | trace residual | spacing mode | repulsion | bulk dip | vs random Hankel | vs GOE |\n|---|---:|---|---:|---:|---|---|---:|---:|"
    );
    for s in &spectra.instruments {
        let dip = s
            .bulk_bimodality
            .map_or_else(|| "none".to_string(), |b| format!("{:.3} ({})", b.dip, mark(b.passed)));
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.2e} | {:.3} | {} | {} | {} | {} |",
            s.instrument,
            s.m,
            s.method.as_str(),
            s.trace_residual,
            s.level_repulsion.mode,
            mark(s.level_repulsion.passed),
            dip,
            opt(s.linearity_vs_random_hankel),
            opt(s.linearity_vs_goe)
        );
    }
    if !spectra.cross.is_empty() {
        let _ = writeln!(md, "\n| left | right | bulk Q-Q | spacing Q-Q |\n|---|---|---:|---:|");
        for c in &spectra.cross {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                c.left,
                c.right,
                opt(c.bulk_linearity),
                opt(c.spacing_linearity)
            );
        }
    }

    let _ = writeln!(md, "\n## Random Hankel ensemble\n");
    let _ = writeln!(
        md,
        "m = {}, {} draws, seed {}, method {}, bulk fraction {}.\n",
        ensemble.spec.m,
        ensemble.spec.draws,
        ensemble.spec.seed,
        ensemble.method.as_str(),
        ensemble.bulk_fraction
    );
    let _ = writeln!(md, "| check | value | result |\n|---|---|---|");
    match ensemble.bimodality {
        Some(b) => {
            let _ = writeln!(
                md,
                "| bulk density dip near 0 | dip at {:.4}, peaks at {:.3} / {:.3} | {} |",
                b.dip,
                b.left_peak,
                b.right_peak,
                mark(b.passed)
            );
        }
        None => {
            let _ = writeln!(md, "| bulk density dip near 0 | no dip found | FAIL |");
        }
    }
    let r = ensemble.level_repulsion;
    let _ = writeln!(
        md,
        "| level repulsion | mode {:.3}, density at {} is {:.4} of peak | {} |",
        r.mode,
        cfg.repulsion.probe,
        r.probe_density / r.modal_density,
        mark(r.passed)
    );
    let t = &ensemble.fat_tail;
    let _ = writeln!(
        md,
        "| heavier right tail than GOE | q{:.3}: GOE {:.4}, Hankel {:.4} | {} |",
        t.level,
        t.goe_quantile,
        t.hankel_quantile,
        mark(t.above_diagonal)
    );

    let written = ctx.artifacts.written();
    let has = |suffix: &str| written.iter().any(|w| w.path.ends_with(suffix));
    let has_prefix = |prefix: &str, suffix: &str| {
        written
            .iter()
            .any(|w| w.path.starts_with(prefix) && w.path.ends_with(suffix))
    };
    let checklist = [
        ("return histograms with KDE", has_prefix("dist/", "plot.svg")),
        (
            "Q-Q against the Gaussian",
            has_prefix("qq/", &format!("__{}.svg", crate::config::GAUSSIAN)),
        ),
        (
            "pairwise Q-Q",
            qq.pairs.iter().any(|p| p.family == PairFamily::Pairwise),
        ),
        ("instrument bulk densities", has_prefix("spectrum/", "bulk.svg")),
        ("instrument spacing densities with surmises", has_prefix("spectrum/", "spacings.svg")),
        ("Q-Q against random Hankel spacings", has("qq_vs_random_hankel.svg")),
        ("ensemble bulk density", has("ensemble/bulk.svg")),
        ("ensemble spacing density", has("ensemble/spacings.svg")),
        ("ensemble Q-Q against GOE", has("ensemble/qq_vs_goe.svg")),
    ];
    let _ = writeln!(md, "\n## Figures\n");
    for (name, present) in checklist {
        let _ = writeln!(md, "- [{}] {name}", if present { "x" } else { " " });
    }

    let _ = writeln!(md, "\n## Failures\n");
    if failures.is_empty() {
        let _ = writeln!(md, "None.");
    } else {
        for f in &failures {
            let _ = writeln!(md, "- `{}` at {}: {}", f.instrument, f.stage, f.error);
        }
    }
    ctx.artifacts
        .text("report.md", &md)
        .map_err(|source| PipelineError::Io {
            path: "report.md".into(),
            source,
        })?;
    Ok(failures)
}
