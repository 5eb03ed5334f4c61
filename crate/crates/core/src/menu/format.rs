//! Plain-text menu files.
//!
//! ```text
//! # kind: HL
//! # domain: PRICE
//! # endowment: 15
//! # sell_price: 1
//! # authentic: true
//! row_index    prob_a_hi    a_hi_price    a_lo_price    prob_b_hi    b_hi_price    b_lo_price
//! 1    0.1    1.25    1.56    0.1    0.65    25
//! ```
//!
//! Payoff menus use the columns `a_hi a_lo b_hi b_lo`. Bins rows leave the
//! three option-B columns as `-`. Columns are tab or whitespace separated;
//! lines starting with `#` that are not header fields are comments.

use thiserror::Error;

use super::{BinaryOption, DesignKind, MenuDomain, MenuRow, TaskMenu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MenuFormatError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing header field `{0}`")]
    MissingHeader(&'static str),
    #[error("missing column header line")]
    MissingColumns,
    #[error("invalid menu: {0}")]
    Invalid(String),
}

const PAYOFF_COLUMNS: [&str; 7] = ["row_index", "prob_a_hi", "a_hi", "a_lo", "prob_b_hi", "b_hi", "b_lo"];
const PRICE_COLUMNS: [&str; 7] =
    ["row_index", "prob_a_hi", "a_hi_price", "a_lo_price", "prob_b_hi", "b_hi_price", "b_lo_price"];

fn columns(domain: MenuDomain) -> [&'static str; 7] {
    match domain {
        MenuDomain::Payoff => PAYOFF_COLUMNS,
        MenuDomain::Price => PRICE_COLUMNS,
    }
}

pub fn render_menu(menu: &TaskMenu) -> String {
    let mut out = String::new();
    out.push_str(&format!("# kind: {}\n# domain: {}\n", menu.kind, menu.domain));
    if let Some(m) = menu.endowment {
        out.push_str(&format!("# endowment: {m}\n"));
    }
    if let Some(s) = menu.sell_price {
        out.push_str(&format!("# sell_price: {s}\n"));
    }
    out.push_str(&format!("# authentic: {}\n", menu.authentic));
    out.push_str(&columns(menu.domain).join("\t"));
    out.push('\n');
    for row in &menu.rows {
        let a = row.option_a;
        let b = match row.option_b {
            Some(b) => format!("{}\t{}\t{}", b.p_hi, b.hi, b.lo),
            None => "-\t-\t-".to_string(),
        };
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", row.row_index, a.p_hi, a.hi, a.lo, b));
    }
    out
}

pub fn parse_menu(doc: &str) -> Result<TaskMenu, MenuFormatError> {
    let mut kind = None;
    let mut domain = None;
    let mut endowment = None;
    let mut sell_price = None;
    let mut authentic = true;
    let mut header_seen = false;
    let mut rows = Vec::new();

    for (i, raw) in doc.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| MenuFormatError::Line { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let Some((key, value)) = rest.split_once(':') else { continue };
            let value = value.trim();
            match key.trim() {
                "kind" => kind = Some(value.parse::<DesignKind>().map_err(err)?),
                "domain" => domain = Some(value.parse::<MenuDomain>().map_err(err)?),
                "endowment" => endowment = Some(num(value).map_err(err)?),
                "sell_price" => sell_price = Some(num(value).map_err(err)?),
                "authentic" => {
                    authentic = value.parse::<bool>().map_err(|e| err(e.to_string()))?;
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !header_seen {
            let d = domain.ok_or(MenuFormatError::MissingHeader("domain"))?;
            let want = columns(d);
            if fields != want {
                return Err(err(format!("expected columns {}", want.join(" "))));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 7 {
            return Err(err(format!("expected 7 columns, found {}", fields.len())));
        }
        let row_index = fields[0].parse::<usize>().map_err(|e| err(format!("row_index: {e}")))?;
        let option_a = BinaryOption {
            p_hi: num(fields[1]).map_err(err)?,
            hi: num(fields[2]).map_err(err)?,
            lo: num(fields[3]).map_err(err)?,
        };
        let option_b = if fields[4..].iter().all(|f| *f == "-") {
            None
        } else {
            Some(BinaryOption {
                p_hi: num(fields[4]).map_err(err)?,
                hi: num(fields[5]).map_err(err)?,
                lo: num(fields[6]).map_err(err)?,
            })
        };
        rows.push(MenuRow { row_index, option_a, option_b });
    }

    if !header_seen {
        return Err(MenuFormatError::MissingColumns);
    }
    let menu = TaskMenu {
        kind: kind.ok_or(MenuFormatError::MissingHeader("kind"))?,
        domain: domain.ok_or(MenuFormatError::MissingHeader("domain"))?,
        rows,
        endowment,
        sell_price,
        authentic,
    };
    menu.validate().map_err(|e| MenuFormatError::Invalid(e.to_string()))?;
    Ok(menu)
}

fn num(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}
