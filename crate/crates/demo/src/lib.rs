//! Browser bindings for three library operations. Every export takes and returns JSON text, so
//! the same functions run natively in tests.

use bicorr::channels::{check_concurrent, sharp, BipartiteChannel, SingleChannel};
use bicorr::magic::birkhoff_scalar;
use bicorr::numerics::random::{haar_unitary, seeded};
use bicorr::qgraph::{search_classical_local_iso, Graph};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Birkhoff decomposition of a doubly stochastic matrix given as `[[row], ...]`.
///
/// Returns `{"terms": [{"weight", "perm"}], "reconstruction_error"}`.
#[wasm_bindgen]
pub fn birkhoff(rows_json: &str) -> String {
    let rows: Vec<Vec<f64>> = match serde_json::from_str(rows_json) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    let dec = match birkhoff_scalar(&rows) {
        Ok(d) => d,
        Err(e) => return error(e),
    };
    let n = rows.len();
    let mut rebuilt = vec![vec![0.0; n]; n];
    let terms: Vec<Value> = dec
        .terms()
        .iter()
        .map(|(perm, gamma)| {
            let w = gamma[(0, 0)].re;
            for (x, &a) in perm.iter().enumerate() {
                rebuilt[x][a] += w;
            }
            json!({ "weight": w, "perm": perm })
        })
        .collect();
    let err = rows.iter().flatten().zip(rebuilt.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    json!({ "terms": terms, "reconstruction_error": err }).to_string()
}

/// Concurrency residuals of `Φ ⊗ Φ` and `Φ ⊗ Φ♯` for `samples` Haar-random unitary channels on `M_n`.
///
/// Returns `{"samples": [{"product", "sharp"}], "tol"}`, each value the worst residual.
#[wasm_bindgen]
pub fn concurrency_scan(n: usize, samples: usize, seed: u64) -> String {
    if !(1..=4).contains(&n) || samples > 50 {
        return error("need 1 <= n <= 4 and at most 50 samples");
    }
    let tol = 1e-9;
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let phi = SingleChannel::unitary_conjugation(&haar_unitary(n, &mut rng)).expect("Haar samples are unitary");
        let residual = |c: &BipartiteChannel| check_concurrent(c, tol).map(|r| r.max_residual());
        match (residual(&BipartiteChannel::product(&phi, &phi)), residual(&BipartiteChannel::product(&phi, &sharp(&phi)))) {
            (Ok(p), Ok(s)) => out.push(json!({ "product": p, "sharp": s })),
            (Err(e), _) | (_, Err(e)) => return error(e),
        }
    }
    json!({ "samples": out, "tol": tol }).to_string()
}

/// Vertex bijection between two graphs given as `{"n", "edges"}`, or `null` when none exists.
#[wasm_bindgen]
pub fn graph_iso(g_json: &str, h_json: &str) -> String {
    let parse = |text: &str| -> Result<Graph, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let n = v["n"].as_u64().ok_or("missing n")? as usize;
        let edges = v["edges"]
            .as_array()
            .ok_or("missing edges")?
            .iter()
            .map(|e| match (e[0].as_u64(), e[1].as_u64()) {
                (Some(i), Some(j)) => Ok((i as usize, j as usize)),
                _ => Err("edges must be [i, j] pairs".to_string()),
            })
            .collect::<Result<Vec<_>, String>>()?;
        Graph::from_edges(n, &edges).map_err(|e| e.to_string())
    };
    match (parse(g_json), parse(h_json)) {
        (Ok(g), Ok(h)) => match search_classical_local_iso(&g, &h) {
            Ok(found) => json!({ "permutation": found }).to_string(),
            Err(e) => error(e),
        },
        (Err(e), _) | (_, Err(e)) => error(e),
    }
}
