//! Browser bindings for the interactive demo page: exact corner polylines
//! for the interval maps, the Cantor gap strip, and truncated disjoint
//! return sets, all serialized as JSON strings for a plain canvas UI.
//!
//! The heavy lifting stays in the core crate; every function here parses
//! the same literals as the command line, so anything plotted in the
//! browser can be reproduced exactly from a shell.

use num_traits::ToPrimitive;

use free_dyn::maps::{parse_map, MapForm, MapTuple};
use free_dyn::metric_spaces::PointedSpace;
use free_dyn::return_sets::{disjoint_return_set, OpenSet};
use free_dyn::{cantor_free, fmt_rat, rat, Rat};

use wasm_bindgen::prelude::*;

fn f64_of(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact corner polyline of the `iterate`-th power of an interval map.
/// Piecewise-linear maps are rendered from their true breakpoints, never
/// sampled, so the plot misses no fold.
fn map_graph_json(lit: &str, iterate: u64, max_pieces: u64) -> Result<String, String> {
    let map = parse_map(lit, None).map_err(|e| e.to_string())?;
    if map.space() != &PointedSpace::Interval {
        return Err("graphs are drawn for interval maps only".to_string());
    }
    let power = map.pow(iterate).map_err(|e| e.to_string())?;
    let corners: Vec<(Rat, Rat)> = match power.form() {
        MapForm::Identity => vec![(rat(-1, 1), rat(-1, 1)), (rat(1, 1), rat(1, 1))],
        MapForm::HalvePow(l) => {
            if *l > 60 {
                return Err("halving power too large to plot".to_string());
            }
            let y = rat(1, 1i64 << *l);
            vec![(rat(-1, 1), -y.clone()), (rat(1, 1), y)]
        }
        MapForm::Zigzag(p) => {
            if *p > max_pieces {
                return Err(format!("{p} folds exceed the plot cap {max_pieces}"));
            }
            (0..=*p)
                .map(|j| (rat(j as i64, *p as i64), rat((j % 2) as i64, 1)))
                .collect()
        }
        MapForm::TentPow(j) => {
            if *j > 12 {
                return Err(format!("2^{j} folds exceed the plot cap {max_pieces}"));
            }
            let q = 1i64 << j;
            (-q..=q)
                .map(|i| (rat(i, q), rat(i.signum() * (i.abs() % 2), 1)))
                .collect()
        }
        _ => return Err("this map has no interval graph".to_string()),
    };
    let points: Vec<serde_json::Value> = corners
        .iter()
        .map(|(x, y)| serde_json::json!([f64_of(x), f64_of(y)]))
        .collect();
    let out = serde_json::json!({
        "map": power.to_string(),
        "domain": if matches!(power.form(), MapForm::Zigzag(_)) { [0.0, 1.0] } else { [-1.0, 1.0] },
        "points": points,
    });
    Ok(out.to_string())
}

/// The deleted middle-third gaps down to the given level, for a strip plot.
fn cantor_gaps_json(levels: u32) -> Result<String, String> {
    if levels == 0 || levels > 14 {
        return Err("levels must be between 1 and 14".to_string());
    }
    let mut gaps = Vec::new();
    for n in 1..(1u64 << levels) {
        let g = cantor_free::gap(n).map_err(|e| e.to_string())?;
        gaps.push(serde_json::json!({
            "n": n,
            "level": g.level(),
            "left": f64_of(&g.a_value()),
            "right": f64_of(&g.b_value()),
            "left_exact": fmt_rat(&g.a_value()),
            "right_exact": fmt_rat(&g.b_value()),
        }));
    }
    Ok(serde_json::json!({ "levels": levels, "gaps": gaps }).to_string())
}

/// Exact truncated disjoint return set for the same literals the CLI takes:
/// maps comma separated, target sets ';' separated.
fn return_set_json(maps: &str, u0: &str, u: &str, horizon: u64) -> Result<String, String> {
    if horizon > 2000 {
        return Err("horizon capped at 2000 in the browser".to_string());
    }
    let lits: Vec<&str> = maps.split(',').map(str::trim).collect();
    let mut space = None;
    for lit in &lits {
        if let Ok(m) = parse_map(lit, None) {
            space = Some(m.space().clone());
            break;
        }
    }
    let parsed = lits
        .iter()
        .map(|lit| parse_map(lit, space.as_ref()).or_else(|_| parse_map(lit, None)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let tuple = MapTuple::new(parsed).map_err(|e| e.to_string())?;
    let u0: OpenSet = u0.parse().map_err(|e: free_dyn::error::Error| e.to_string())?;
    let u = u
        .split(';')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<OpenSet>, _>>()
        .map_err(|e| e.to_string())?;
    let sample = disjoint_return_set(&tuple, &u0, &u, horizon).map_err(|e| e.to_string())?;
    let members: Vec<u64> = sample.members().iter().copied().collect();
    let out = serde_json::json!({
        "tuple": tuple.to_string(),
        "horizon": horizon,
        "members": members,
        "density": fmt_rat(&rat(members.len() as i64, horizon as i64 + 1)),
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn map_graph(lit: &str, iterate: u64) -> Result<String, JsValue> {
    map_graph_json(lit, iterate, 4096).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cantor_gaps(levels: u32) -> Result<String, JsValue> {
    cantor_gaps_json(levels).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn return_set_strip(maps: &str, u0: &str, u: &str, horizon: u64) -> Result<String, JsValue> {
    return_set_json(maps, u0, u, horizon).map_err(|e| JsValue::from_str(&e))
}
