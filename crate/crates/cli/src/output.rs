//! CSV rendering and parsing of trade-off points.

use std::io::{Read, Write};

use aoimse::montecarlo::{Estimate, SimResult};
use aoimse::pareto::{BoundaryCurves, TradeoffPoint};

pub const POINT_HEADER: [&str; 9] = ["d", "epsilon", "n", "r", "aoi", "mse", "mse_delay", "mse_channel", "feasible"];

pub const CURVE_HEADER: [&str; 4] = ["aoi", "mse_delay", "mse_channel", "mse"];

pub const SIM_HEADER: [&str; 13] = [
    "d",
    "epsilon",
    "n",
    "r",
    "aoi",
    "aoi_se",
    "mse",
    "mse_se",
    "mse_delay",
    "mse_delay_se",
    "mse_channel",
    "mse_channel_se",
    "cycles",
];

/// Formats like C's `%.12g`; non-finite values become an empty field.
pub fn fmt_g12(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        trim_zeros(format!("{:.*}", (P - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn point_record(p: &TradeoffPoint) -> [String; 9] {
    [
        fmt_g12(p.d),
        fmt_g12(p.eps),
        fmt_g12(p.n),
        fmt_g12(p.r),
        fmt_g12(p.aoi),
        fmt_g12(p.mse),
        fmt_g12(p.mse_delay_avg),
        fmt_g12(p.mse_channel_avg),
        p.feasible.to_string(),
    ]
}

pub fn write_points<W: Write>(w: W, points: &[TradeoffPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(POINT_HEADER)?;
    for p in points {
        out.write_record(point_record(p))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curves<W: Write>(w: W, c: &BoundaryCurves) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CURVE_HEADER)?;
    for i in 0..c.len() {
        out.write_record([c.aoi[i], c.mse_delay[i], c.mse_channel[i], c.mse[i]].map(fmt_g12))?;
    }
    out.flush()?;
    Ok(())
}

fn estimate_fields(e: &Estimate) -> [String; 2] {
    [fmt_g12(e.mean), e.se.map(fmt_g12).unwrap_or_default()]
}

pub fn write_simulation<W: Write>(w: W, p: &TradeoffPoint, sim: &SimResult) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SIM_HEADER)?;
    let mut row = vec![fmt_g12(p.d), fmt_g12(p.eps), fmt_g12(p.n), fmt_g12(p.r)];
    for e in [&sim.aoi, &sim.mse, &sim.mse_delay, &sim.mse_channel] {
        row.extend(estimate_fields(e));
    }
    row.push(sim.cycles_observed.to_string());
    out.write_record(row)?;
    out.flush()?;
    Ok(())
}

/// Reads points written by [`write_points`]; empty numeric fields read as NaN.
pub fn read_points<R: Read>(r: R) -> Result<Vec<TradeoffPoint>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| format!("input CSV: {e}"))?;
    if header.iter().ne(POINT_HEADER) {
        return Err(format!("input CSV: header must be `{}`", POINT_HEADER.join(",")));
    }
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("input CSV line {line}: {e}"))?;
        let num = |j: usize| -> Result<f64, String> {
            let f = rec[j].trim();
            if f.is_empty() {
                Ok(f64::NAN)
            } else {
                f.parse()
                    .map_err(|_| format!("input CSV line {line}: field `{}` is not a number", POINT_HEADER[j]))
            }
        };
        let feasible = match rec[8].trim() {
            "true" => true,
            "false" => false,
            _ => return Err(format!("input CSV line {line}: field `feasible` must be true or false")),
        };
        let p = TradeoffPoint {
            d: num(0)?,
            eps: num(1)?,
            n: num(2)?,
            r: num(3)?,
            aoi: num(4)?,
            mse: num(5)?,
            mse_delay_avg: num(6)?,
            mse_channel_avg: num(7)?,
            feasible,
        };
        if feasible && [p.n, p.r, p.aoi, p.mse, p.mse_delay_avg, p.mse_channel_avg].iter().any(|x| !x.is_finite()) {
            return Err(format!("input CSV line {line}: feasible row has missing values"));
        }
        points.push(p);
    }
    Ok(points)
}
