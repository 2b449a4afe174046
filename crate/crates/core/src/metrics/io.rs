//! Delimiter-separated writers for the plot-data files.
//!
//! | file | header |
//! |------|--------|
//! | `tea.csv` | `month,novel,reoccurring` |
//! | `tet.csv` | `rank,source,destination,first_month,last_month,class` |
//! | `indices.csv` | `index,value` |
//! | `report.csv` | `model,channel,edge_set,count,mean,std` |
//! | `by_month.csv` | `model,month,channel,count,mean,std` |
//! | `by_gender.csv` | `model,source_gender,destination_gender,channel,count,mean,std` |
//! | `by_age.csv` | `model,source_age_group,destination_age_group,channel,count,mean,std` |
//!
//! Absent strata cells have `count` 0 and empty `mean`/`std`.

use std::io::Write;

use super::{EvalReport, StrataScheme, StrataTable, TeaSeries, TetLayout};

pub const CHANNELS: [&str; 2] = ["call", "sms"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_tea<W: Write>(mut out: W, tea: &TeaSeries) -> std::io::Result<()> {
    writeln!(out, "month,novel,reoccurring")?;
    for m in &tea.months {
        writeln!(out, "{},{},{}", m.month, m.novel, m.reoccurring)?;
    }
    Ok(())
}

pub fn write_tet<W: Write>(mut out: W, tet: &TetLayout) -> std::io::Result<()> {
    writeln!(out, "rank,source,destination,first_month,last_month,class")?;
    for (i, r) in tet.rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i,
            r.src,
            r.dst,
            r.first,
            r.last,
            r.class.as_str()
        )?;
    }
    Ok(())
}

pub fn write_indices<W: Write>(mut out: W, indices: &[(&str, f64)]) -> std::io::Result<()> {
    writeln!(out, "index,value")?;
    for (name, v) in indices {
        writeln!(out, "{},{}", name, fmt_f64(*v))?;
    }
    Ok(())
}

pub fn report_header() -> &'static str {
    "model,channel,edge_set,count,mean,std"
}

/// Rows of `report.csv` for one model (header not included). Average rows
/// carry `edge_set=average` and an empty std.
pub fn write_report_rows<W: Write>(mut out: W, report: &EvalReport) -> std::io::Result<()> {
    for (c, channel) in CHANNELS.iter().enumerate() {
        for s in &report.sets {
            match s.stats {
                Some(st) => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    report.model,
                    channel,
                    s.set.as_str(),
                    st[c].count,
                    fmt_f64(st[c].mean),
                    fmt_f64(st[c].std)
                )?,
                None => writeln!(out, "{},{},{},0,,", report.model, channel, s.set.as_str())?,
            }
        }
        writeln!(
            out,
            "{},{},average,,{},",
            report.model,
            channel,
            fmt_f64(report.average[c])
        )?;
    }
    Ok(())
}

pub fn strata_header(scheme: StrataScheme) -> &'static str {
    match scheme {
        StrataScheme::PerMonth => "model,month,channel,count,mean,std",
        StrataScheme::GenderPairs => {
            "model,source_gender,destination_gender,channel,count,mean,std"
        }
        StrataScheme::AgeGrid => {
            "model,source_age_group,destination_age_group,channel,count,mean,std"
        }
    }
}

pub fn strata_file_name(scheme: StrataScheme) -> &'static str {
    match scheme {
        StrataScheme::PerMonth => "by_month.csv",
        StrataScheme::GenderPairs => "by_gender.csv",
        StrataScheme::AgeGrid => "by_age.csv",
    }
}

pub fn write_strata_rows<W: Write>(
    mut out: W,
    model: &str,
    table: &StrataTable,
) -> std::io::Result<()> {
    for cell in &table.cells {
        let key = match table.scheme {
            StrataScheme::PerMonth => cell.key.0.clone(),
            _ => format!("{},{}", cell.key.0, cell.key.1),
        };
        for (c, channel) in CHANNELS.iter().enumerate() {
            match cell.stats {
                Some(st) => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    model,
                    key,
                    channel,
                    st[c].count,
                    fmt_f64(st[c].mean),
                    fmt_f64(st[c].std)
                )?,
                None => writeln!(out, "{model},{key},{channel},0,,")?,
            }
        }
    }
    Ok(())
}
