//! Reading and writing MATPOWER version 2 case files.
//!
//! Only the subset of the format that maps onto the model in [`crate::network`]
//! is accepted: polynomial costs of at most three coefficients, unity tap
//! ratios, no phase shifters and no bus shunts. Anything else is rejected
//! instead of being silently dropped.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{validate, Branch, Bus, BusKind, CostPolynomial, Generator, Network, NetworkError};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("missing table or field `mpc.{0}`")]
    MissingTable(&'static str),
    #[error("unsupported case version `{0}` (only version 2 is read)")]
    Version(String),
    #[error("malformed row {row} of `mpc.{table}`: {reason}")]
    MalformedRow {
        table: &'static str,
        row: usize,
        reason: String,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no slack bus (type 3)")]
    NoSlack,
    #[error(transparent)]
    Structure(#[from] NetworkError),
    #[error("invalid network: {0}")]
    Invalid(String),
}

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

struct RawCase {
    version: Option<String>,
    base_mva: Option<f64>,
    tables: HashMap<String, Vec<Vec<f64>>>,
}

/// Parses MATPOWER case text into a per-unit [`Network`].
pub fn parse_matpower_case(text: &str) -> Result<Network, ParseError> {
    let raw = scan(text)?;
    if let Some(v) = &raw.version {
        if v != "2" {
            return Err(ParseError::Version(v.clone()));
        }
    }
    let base = raw.base_mva.ok_or(ParseError::MissingTable("baseMVA"))?;
    if !(base > 0.0) {
        return Err(ParseError::Invalid(format!("baseMVA must be positive, got {base}")));
    }
    let table = |name: &'static str, min_cols: usize| -> Result<&Vec<Vec<f64>>, ParseError> {
        let rows = raw.tables.get(name).ok_or(ParseError::MissingTable(name))?;
        for (row, r) in rows.iter().enumerate() {
            if r.len() < min_cols {
                return Err(ParseError::MalformedRow {
                    table: name,
                    row: row + 1,
                    reason: format!("expected at least {min_cols} columns, found {}", r.len()),
                });
            }
        }
        Ok(rows)
    };
    let bus_rows = table("bus", BUS_COLS)?;
    let gen_rows = table("gen", GEN_COLS)?;
    let branch_rows = table("branch", BRANCH_COLS)?;
    let cost_rows = table("gencost", 4)?;

    let mut index = HashMap::new();
    for (k, r) in bus_rows.iter().enumerate() {
        let label = as_label(r[0]).ok_or_else(|| ParseError::MalformedRow {
            table: "bus",
            row: k + 1,
            reason: format!("bus number {} is not a positive integer", r[0]),
        })?;
        if index.insert(label, k).is_some() {
            return Err(ParseError::MalformedRow {
                table: "bus",
                row: k + 1,
                reason: format!("duplicate bus number {label}"),
            });
        }
        if r[4] != 0.0 || r[5] != 0.0 {
            return Err(ParseError::Unsupported(format!(
                "bus {label} has a shunt (Gs={}, Bs={})",
                r[4], r[5]
            )));
        }
    }
    let lookup = |table: &'static str, row: usize, x: f64| -> Result<usize, ParseError> {
        as_label(x)
            .and_then(|l| index.get(&l).copied())
            .ok_or_else(|| ParseError::MalformedRow {
                table,
                row,
                reason: format!("unknown bus number {x}"),
            })
    };

    // Generators, merged per bus in order of first appearance.
    if cost_rows.len() < gen_rows.len() {
        return Err(ParseError::MalformedRow {
            table: "gencost",
            row: cost_rows.len() + 1,
            reason: format!("{} gen rows but {} gencost rows", gen_rows.len(), cost_rows.len()),
        });
    }
    let mut generators: Vec<Generator> = Vec::new();
    let mut gen_slot: HashMap<usize, usize> = HashMap::new();
    for (k, (g, c)) in gen_rows.iter().zip(cost_rows).enumerate() {
        if g[7] <= 0.0 {
            continue;
        }
        let bus = lookup("gen", k + 1, g[0])?;
        let cost = parse_cost(c, base, k + 1)?;
        let unit = Generator {
            bus,
            p_min: g[9] / base,
            p_max: g[8] / base,
            q_min: g[4] / base,
            q_max: g[3] / base,
            cost,
        };
        match gen_slot.get(&bus) {
            Some(&slot) => {
                let m = &mut generators[slot];
                m.p_min += unit.p_min;
                m.p_max += unit.p_max;
                m.q_min += unit.q_min;
                m.q_max += unit.q_max;
                m.cost = m.cost.add(&unit.cost);
            }
            None => {
                gen_slot.insert(bus, generators.len());
                generators.push(unit);
            }
        }
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut has_slack = false;
    for (k, r) in bus_rows.iter().enumerate() {
        let kind = match r[1] as i64 {
            3 => {
                has_slack = true;
                BusKind::Slack
            }
            1..=2 if gen_slot.contains_key(&k) => BusKind::Generator,
            1..=2 => BusKind::Load,
            4 => {
                return Err(ParseError::Unsupported(format!(
                    "bus {} is marked isolated (type 4)",
                    r[0]
                )))
            }
            t => {
                return Err(ParseError::MalformedRow {
                    table: "bus",
                    row: k + 1,
                    reason: format!("unknown bus type {t}"),
                })
            }
        };
        buses.push(Bus {
            id: k,
            label: r[0] as u64,
            kind,
            v_min: r[12],
            v_max: r[11],
            p_load: r[2] / base,
            q_load: r[3] / base,
        });
    }
    if !has_slack {
        return Err(ParseError::NoSlack);
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (k, r) in branch_rows.iter().enumerate() {
        let row = k + 1;
        let from = lookup("branch", row, r[0])?;
        let to = lookup("branch", row, r[1])?;
        let (res, x) = (r[2], r[3]);
        let z2 = res * res + x * x;
        if !(z2 > 0.0) {
            return Err(ParseError::MalformedRow {
                table: "branch",
                row,
                reason: "zero series impedance".into(),
            });
        }
        let tap = r[8];
        if tap != 0.0 && tap != 1.0 {
            return Err(ParseError::Unsupported(format!(
                "branch {row} has off-nominal tap ratio {tap}"
            )));
        }
        if r[9] != 0.0 {
            return Err(ParseError::Unsupported(format!(
                "branch {row} has phase shift {}",
                r[9]
            )));
        }
        branches.push(Branch {
            from,
            to,
            g: res / z2,
            b: x / z2,
            b_charge: r[4],
            s_max: if r[5] > 0.0 { Some(r[5] / base) } else { None },
            in_service: r[10] > 0.0,
        });
    }

    let net = Network::new(base, buses, branches, generators)?;
    let violations = validate(&net);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(ParseError::Invalid(msg.join("; ")));
    }
    Ok(net)
}

fn as_label(x: f64) -> Option<u64> {
    (x >= 1.0 && x.fract() == 0.0).then_some(x as u64)
}

fn parse_cost(row: &[f64], base: f64, k: usize) -> Result<CostPolynomial, ParseError> {
    if row[0] != 2.0 {
        return Err(ParseError::Unsupported(format!(
            "gencost row {k} uses model {} (only polynomial model 2 is supported)",
            row[0]
        )));
    }
    let ncost = row[3];
    if !(ncost >= 0.0 && ncost.fract() == 0.0 && ncost <= 3.0) {
        return Err(ParseError::Unsupported(format!(
            "gencost row {k} has {ncost} coefficients (at most 3 supported)"
        )));
    }
    let ncost = ncost as usize;
    if row.len() < 4 + ncost {
        return Err(ParseError::MalformedRow {
            table: "gencost",
            row: k,
            reason: format!("declares {ncost} coefficients but has {}", row.len() - 4),
        });
    }
    // Coefficients are listed highest order first, in $/MW^k.
    let mut c = [0.0; 3];
    for (power, coef) in row[4..4 + ncost].iter().rev().enumerate() {
        c[power] = *coef * base.powi(power as i32);
    }
    Ok(CostPolynomial::new(c[0], c[1], c[2]))
}

/// Strips comments, then pulls out `mpc.version`, `mpc.baseMVA` and every
/// numeric `mpc.<name> = [ ... ];` table.
fn scan(text: &str) -> Result<RawCase, ParseError> {
    let mut clean = String::with_capacity(text.len());
    for line in text.lines() {
        clean.push_str(strip_comment(line));
        clean.push('\n');
    }
    let mut raw = RawCase {
        version: None,
        base_mva: None,
        tables: HashMap::new(),
    };
    let mut rest = clean.as_str();
    while let Some(pos) = rest.find("mpc.") {
        rest = &rest[pos + 4..];
        let name_end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        let name = &rest[..name_end];
        let after = rest[name_end..].trim_start();
        let Some(after) = after.strip_prefix('=') else {
            continue;
        };
        let after = after.trim_start();
        if let Some(body) = after.strip_prefix('[') {
            let end = body.find(']').ok_or_else(|| ParseError::MalformedRow {
                table: leak_name(name),
                row: 0,
                reason: "unterminated table".into(),
            })?;
            let rows = parse_rows(leak_name(name), &body[..end])?;
            raw.tables.insert(name.to_string(), rows);
            rest = &body[end + 1..];
        } else {
            let end = after.find([';', '\n']).unwrap_or(after.len());
            let value = after[..end].trim();
            match name {
                "version" => raw.version = Some(value.trim_matches('\'').to_string()),
                "baseMVA" => {
                    raw.base_mva = Some(
                        parse_number(value)
                            .ok_or_else(|| ParseError::Invalid(format!("baseMVA `{value}` is not a number")))?,
                    )
                }
                _ => {}
            }
            rest = &after[end..];
        }
    }
    Ok(raw)
}

fn leak_name(name: &str) -> &'static str {
    match name {
        "bus" => "bus",
        "gen" => "gen",
        "branch" => "branch",
        "gencost" => "gencost",
        _ => "table",
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_rows(table: &'static str, body: &str) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rows = Vec::new();
    for chunk in body.split([';', '\n']) {
        let fields: Vec<&str> = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        let row = rows.len() + 1;
        let values = fields
            .iter()
            .map(|f| {
                parse_number(f).ok_or_else(|| ParseError::MalformedRow {
                    table,
                    row,
                    reason: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(rows)
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Serializes a network back to MATPOWER text that [`parse_matpower_case`]
/// reads into an equal network.
pub fn write_matpower_case(net: &Network, name: &str) -> String {
    let base = net.base_mva();
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {name}");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {base};");
    let _ = writeln!(out, "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin");
    let _ = writeln!(out, "mpc.bus = [");
    for bus in net.buses() {
        let kind = match bus.kind {
            BusKind::Slack => 3,
            BusKind::Generator => 2,
            BusKind::Load => 1,
        };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t0\t0\t1\t1\t0\t0\t1\t{}\t{};",
            bus.label,
            kind,
            bus.p_load * base,
            bus.q_load * base,
            bus.v_max,
            bus.v_min
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin");
    let _ = writeln!(out, "mpc.gen = [");
    for gen in net.generators() {
        let _ = writeln!(
            out,
            "\t{}\t0\t0\t{}\t{}\t1\t{}\t1\t{}\t{};",
            net.buses()[gen.bus].label,
            gen.q_max * base,
            gen.q_min * base,
            base,
            gen.p_max * base,
            gen.p_min * base
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "%% fbus tbus r x b rateA rateB rateC ratio angle status");
    let _ = writeln!(out, "mpc.branch = [");
    for br in net.branches() {
        let z2 = br.g * br.g + br.b * br.b;
        let rate = br.s_max.map_or(0.0, |s| s * base);
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{};",
            net.buses()[br.from].label,
            net.buses()[br.to].label,
            br.g / z2,
            br.b / z2,
            br.b_charge,
            rate,
            rate,
            rate,
            u8::from(br.in_service)
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "%% model startup shutdown n c2 c1 c0");
    let _ = writeln!(out, "mpc.gencost = [");
    for gen in net.generators() {
        let c = gen.cost;
        let _ = writeln!(
            out,
            "\t2\t0\t0\t3\t{}\t{}\t{};",
            c.c2 / (base * base),
            c.c1 / base,
            c.c0
        );
    }
    let _ = writeln!(out, "];");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "
function mpc = twobus
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0  0 0 1 1 0 230 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 230 1 1.1 0.9;  % load bus
];
mpc.gen = [
  1 0 0 300 -300 1 100 1 250 0;
];
mpc.branch = [
  1 2 0 0.2 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.01 20 5;
];
";

    #[test]
    fn reactance_only_line_gives_pure_susceptance() {
        let net = parse_matpower_case(TWO_BUS).unwrap();
        let br = &net.branches()[0];
        assert_eq!(br.g, 0.0);
        assert!((br.b - 5.0).abs() < 1e-12);
        assert_eq!(br.s_max, None);
        assert_eq!(net.buses()[1].p_load, 0.5);
        assert_eq!(net.slack(), 0);
        let c = net.generators()[0].cost;
        assert!((c.c2 - 100.0).abs() < 1e-12);
        assert!((c.c1 - 2000.0).abs() < 1e-12);
        assert_eq!(c.c0, 5.0);
    }

    #[test]
    fn generators_at_one_bus_are_merged() {
        let text = TWO_BUS
            .replace(
                "  1 0 0 300 -300 1 100 1 250 0;",
                "  1 0 0 300 -300 1 100 1 100 0;\n  1 0 0 50 -50 1 100 1 50 0;",
            )
            .replace("  2 0 0 3 0.01 20 5;", "  2 0 0 3 0.01 20 5;\n  2 0 0 2 10 1;");
        let net = parse_matpower_case(&text).unwrap();
        assert_eq!(net.generators().len(), 1);
        let g = &net.generators()[0];
        assert!((g.p_max - 1.5).abs() < 1e-15);
        assert!((g.q_max - 3.5).abs() < 1e-15);
        assert!((g.cost.c1 - (2000.0 + 1000.0)).abs() < 1e-9);
        assert_eq!(g.cost.c0, 6.0);
    }

    #[test]
    fn missing_table_rejected() {
        let text = TWO_BUS.replace("mpc.gencost", "mpc.other");
        assert_eq!(
            parse_matpower_case(&text).unwrap_err(),
            ParseError::MissingTable("gencost")
        );
    }

    #[test]
    fn malformed_row_rejected() {
        let text = TWO_BUS.replace(
            "2 1 50 10 0 0 1 1 0 230 1 1.1 0.9;",
            "2 1 50 x 0 0 1 1 0 230 1 1.1 0.9;",
        );
        assert!(matches!(
            parse_matpower_case(&text).unwrap_err(),
            ParseError::MalformedRow {
                table: "bus",
                row: 2,
                ..
            }
        ));
        let short = TWO_BUS.replace("2 1 50 10 0 0 1 1 0 230 1 1.1 0.9;", "2 1 50 10;");
        assert!(matches!(
            parse_matpower_case(&short).unwrap_err(),
            ParseError::MalformedRow {
                table: "bus",
                row: 2,
                ..
            }
        ));
    }

    #[test]
    fn no_slack_rejected() {
        let text = TWO_BUS.replace("1 3 0  0", "1 2 0  0");
        assert_eq!(parse_matpower_case(&text).unwrap_err(), ParseError::NoSlack);
    }

    #[test]
    fn disconnected_rejected() {
        let text = TWO_BUS.replace("0 0 0 0 0 1 -360 360;", "0 0 0 0 0 0 -360 360;");
        let err = parse_matpower_case(&text).unwrap_err();
        assert!(
            matches!(&err, ParseError::Invalid(m) if m.contains("DISCONNECTED")),
            "{err}"
        );
    }

    #[test]
    fn unsupported_cost_model_rejected() {
        let pwl = TWO_BUS.replace("2 0 0 3 0.01 20 5;", "1 0 0 2 0 0 100 2000;");
        assert!(matches!(
            parse_matpower_case(&pwl).unwrap_err(),
            ParseError::Unsupported(_)
        ));
        let cubic = TWO_BUS.replace("2 0 0 3 0.01 20 5;", "2 0 0 4 1 0.01 20 5;");
        assert!(matches!(
            parse_matpower_case(&cubic).unwrap_err(),
            ParseError::Unsupported(_)
        ));
    }

    #[test]
    fn off_nominal_tap_rejected() {
        let text = TWO_BUS.replace("0 0 0 0 0 1 -360 360;", "0 0 0 0.95 0 1 -360 360;");
        assert!(matches!(
            parse_matpower_case(&text).unwrap_err(),
            ParseError::Unsupported(_)
        ));
    }

    #[test]
    fn version_one_rejected() {
        let text = TWO_BUS.replace("mpc.version = '2';", "mpc.version = '1';");
        assert_eq!(parse_matpower_case(&text).unwrap_err(), ParseError::Version("1".into()));
    }

    #[test]
    fn comment_inside_quotes_is_kept() {
        assert_eq!(strip_comment("a = 'x%y'; % tail"), "a = 'x%y'; ");
    }
}
