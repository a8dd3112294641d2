//! Parser for the MATPOWER M-file case subset used by this toolkit.
//!
//! Only the columns the toolkit consumes are read; extra columns are
//! ignored. Rows are semicolon-terminated, `%` starts a comment, matrix
//! blocks are delimited by `mpc.<name> = [ ... ];`.

use super::{Branch, Bus, BusType, Generator, GridCase, GridError, LoadPoint};

struct Row {
    line: usize,
    values: Vec<f64>,
}

struct Block {
    rows: Vec<Row>,
}

/// Parse MATPOWER case text into a validated [`GridCase`].
///
/// Loads are created for every bus with positive Pd, indexed in ascending
/// bus-id order. Generator costs come from the linear coefficient of a
/// polynomial `mpc.gencost` block when present, else default to 1.0.
pub fn parse_matpower(text: &str) -> Result<GridCase, GridError> {
    let base_mva = parse_scalar(text, "baseMVA")?
        .ok_or_else(|| GridError::MissingBlock("baseMVA".into()))?;
    let bus = parse_block(text, "bus")?.ok_or_else(|| GridError::MissingBlock("bus".into()))?;
    let gen = parse_block(text, "gen")?.ok_or_else(|| GridError::MissingBlock("gen".into()))?;
    let branch =
        parse_block(text, "branch")?.ok_or_else(|| GridError::MissingBlock("branch".into()))?;
    let gencost = parse_block(text, "gencost")?;

    let mut buses = Vec::new();
    let mut slack_bus = None;
    let mut load_rows: Vec<(usize, f64)> = Vec::new();
    for row in &bus.rows {
        let id = col(row, 0, "bus", "bus id")? as usize;
        let bus_type = match col(row, 1, "bus", "bus type")? as i64 {
            3 => BusType::Slack,
            2 => BusType::Pv,
            _ => BusType::Pq,
        };
        if bus_type == BusType::Slack {
            slack_bus = Some(id);
        }
        let pd = col(row, 2, "bus", "Pd")?;
        if pd > 0.0 {
            load_rows.push((id, pd));
        }
        buses.push(Bus { id, bus_type });
    }

    let mut branches = Vec::new();
    for row in &branch.rows {
        branches.push(Branch {
            from_bus: col(row, 0, "branch", "from bus")? as usize,
            to_bus: col(row, 1, "branch", "to bus")? as usize,
            reactance: col(row, 3, "branch", "reactance")?,
            rate_a: col(row, 5, "branch", "rateA")?,
            in_service: col(row, 10, "branch", "status").unwrap_or(1.0) != 0.0,
        });
    }

    let mut generators = Vec::new();
    for (g, row) in gen.rows.iter().enumerate() {
        let cost_linear = match &gencost {
            Some(block) => linear_cost(block.rows.get(g).ok_or_else(|| GridError::Syntax {
                line: row.line,
                msg: format!("gencost has no row for generator {g}"),
            })?)?,
            None => 1.0,
        };
        generators.push(Generator {
            bus: col(row, 0, "gen", "bus")? as usize,
            p_max: col(row, 8, "gen", "Pmax")?,
            p_min: col(row, 9, "gen", "Pmin")?,
            cost_linear,
        });
    }

    load_rows.sort_by_key(|&(bus, _)| bus);
    let loads = load_rows
        .into_iter()
        .enumerate()
        .map(|(index, (bus, base_mw))| LoadPoint { index, bus, base_mw })
        .collect();

    GridCase {
        base_mva,
        buses,
        branches,
        generators,
        loads,
        slack_bus: slack_bus
            .ok_or_else(|| GridError::Validation("no slack (type 3) bus in case".into()))?,
    }
    .validated()
}

/// Linear ($/MWh) coefficient of a polynomial gencost row:
/// `[model startup shutdown n c_{n-1} ... c_0]`.
fn linear_cost(row: &Row) -> Result<f64, GridError> {
    let model = col(row, 0, "gencost", "model")? as i64;
    if model != 2 {
        return Err(GridError::Syntax {
            line: row.line,
            msg: format!("unsupported gencost model {model}; only polynomial (2) is read"),
        });
    }
    let n = col(row, 3, "gencost", "n")? as usize;
    if row.values.len() < 4 + n {
        return Err(GridError::Syntax {
            line: row.line,
            msg: format!("gencost row promises {n} coefficients but is too short"),
        });
    }
    if n >= 2 {
        // coefficients are ordered c_{n-1} .. c_0; the linear one is c_1.
        Ok(row.values[4 + n - 2])
    } else {
        Ok(0.0)
    }
}

fn col(row: &Row, idx: usize, block: &str, what: &str) -> Result<f64, GridError> {
    row.values.get(idx).copied().ok_or_else(|| GridError::Syntax {
        line: row.line,
        msg: format!("mpc.{block} row is missing column {} ({what})", idx + 1),
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(p) => &line[..p],
        None => line,
    }
}

fn parse_scalar(text: &str, name: &str) -> Result<Option<f64>, GridError> {
    let needle = format!("mpc.{name}");
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix(&needle) {
            let rest = rest.trim_start();
            if let Some(expr) = rest.strip_prefix('=') {
                let value = expr.trim().trim_end_matches(';').trim();
                return value
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| GridError::Syntax {
                        line: lineno + 1,
                        msg: format!("cannot parse mpc.{name} value {value:?}"),
                    });
            }
        }
    }
    Ok(None)
}

fn parse_block(text: &str, name: &str) -> Result<Option<Block>, GridError> {
    let needle = format!("mpc.{name}");
    let mut rows = Vec::new();
    let mut in_block = false;
    let mut pending: Vec<f64> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let mut line = strip_comment(raw).trim();
        if !in_block {
            let Some(rest) = line.strip_prefix(&needle) else {
                continue;
            };
            let rest = rest.trim_start();
            let Some(expr) = rest.strip_prefix('=') else {
                continue;
            };
            let Some(body) = expr.trim_start().strip_prefix('[') else {
                // Not a matrix assignment (e.g. mpc.version = '2').
                continue;
            };
            in_block = true;
            line = body.trim();
        }
        let mut closed = false;
        let mut content = line;
        if let Some(p) = content.find(']') {
            closed = true;
            content = &content[..p];
        }
        // Each `;` ends a row; so does the end of a line, as in MATLAB.
        let segments: Vec<&str> = content.split(';').collect();
        for (si, seg) in segments.iter().enumerate() {
            for tok in seg.split([' ', '\t', ',']).filter(|t| !t.is_empty()) {
                let v = tok.parse::<f64>().map_err(|_| GridError::Syntax {
                    line: lineno + 1,
                    msg: format!("cannot parse number {tok:?} in mpc.{name}"),
                })?;
                pending.push(v);
            }
            let terminated = si + 1 < segments.len();
            if terminated && !pending.is_empty() {
                rows.push(Row { line: lineno + 1, values: std::mem::take(&mut pending) });
            }
        }
        if !pending.is_empty() {
            rows.push(Row { line: lineno + 1, values: std::mem::take(&mut pending) });
        }
        if closed {
            return Ok(Some(Block { rows }));
        }
    }
    if in_block {
        return Err(GridError::Syntax {
            line: text.lines().count(),
            msg: format!("mpc.{name} block is not closed with ];"),
        });
    }
    Ok(None)
}
