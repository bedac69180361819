use std::fmt::Write as _;

use super::commands::{ResultRow, CSV_HEADER};
use crate::net::{NetworkConfig, Variant};

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Markdown results table, values ×10⁻³.
pub fn render_markdown_table(rows: &[ResultRow], with_params: bool) -> String {
    let mut s = String::from("| Dataset | Scale | Method | Variant | CD | HD |");
    if with_params {
        s.push_str(" Params | Size (MB) |");
    }
    s.push('\n');
    s.push_str(if with_params {
        "|---|---|---|---|---|---|---|---|\n"
    } else {
        "|---|---|---|---|---|---|\n"
    });
    for r in rows {
        let _ = write!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.dataset,
            r.scale.to_string().replace("->", "→"),
            r.method.label(),
            r.variant,
            r.report.cd_e3(),
            r.report.hd_e3()
        );
        if with_params {
            let _ = write!(s, " {} | {:.3} |", r.params, r.model_bytes as f64 / 1e6);
        }
        s.push('\n');
    }
    s
}

/// Note contrasting closed-form parameter counts with the published model sizes.
pub fn ablation_footnote(base: &NetworkConfig) -> String {
    let p = |v: Variant| base.with_variant(v).param_count();
    let (a, b, c, d) = (
        p(Variant::Original),
        p(Variant::NoDenseGcn),
        p(Variant::WithRefiner),
        p(Variant::NoDenseGcnWithRefiner),
    );
    format!(
        "Note: parameter counts are closed-form totals for this configuration: \
B = {b} < A = {a} < C = {c}, and D = {d} = B + {} refiner parameters. \
Removing the DenseGCN block can only shrink the network and the refiner can only grow it. \
The published ablation lists model sizes of 66.246 MB (A), 99.152 MB (B), 87.773 MB (C) \
and 130.945 MB (D), which puts B above A. Those sizes cannot be parameter totals of the \
described variants; they are reproduced here for reference only.",
        base.with_variant(Variant::NoDenseGcnWithRefiner).refiner_params()
    )
}
