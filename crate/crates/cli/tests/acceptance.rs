//! Acceptance check for the bundled figure datasets: the emitted curves must
//! have the shapes and anchor points the closed forms dictate.
//!
//! Prints one `[PASS]`/`[FAIL]` line (visible with `--nocapture`).

use std::collections::BTreeMap;
use std::process::Command;

/// One parsed curve: (t, value) points in emission order, keyed by (n, eta).
type Curves = BTreeMap<(u32, String), Vec<(f64, f64)>>;

fn preset_curves(figure: &str) -> Result<Curves, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wnla"))
        .args(["preset", figure])
        .output()
        .map_err(|e| format!("cannot run the binary: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "preset {figure} exited with {:?}",
            out.status.code()
        ));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "t,value,quantity,n,eta" {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut curves: Curves = BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("malformed row {line:?}"));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| format!("bad t in {line:?}"))?;
        let value: f64 = fields[1]
            .parse()
            .map_err(|_| format!("bad value in {line:?}"))?;
        let n: u32 = fields[3]
            .parse()
            .map_err(|_| format!("bad n in {line:?}"))?;
        curves
            .entry((n, fields[4].to_string()))
            .or_default()
            .push((t, value));
    }
    Ok(curves)
}

/// Checks that a curve rises strictly while t stays at or below `peak` and
/// falls strictly afterwards; `peak >= 1` demands a strictly rising curve.
fn check_shape(label: &str, points: &[(f64, f64)], peak: f64) -> Result<(), String> {
    if points.len() != 99 {
        return Err(format!("{label}: expected 99 points, got {}", points.len()));
    }
    for (k, pair) in points.windows(2).enumerate() {
        let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
        if (t0 - f64::from(k as u32 + 1) / 100.0).abs() > 1e-12 {
            return Err(format!("{label}: unexpected grid point t = {t0}"));
        }
        let rising = t1 <= peak;
        if rising && v1 <= v0 {
            return Err(format!(
                "{label}: not rising at t = {t0} -> {t1} ({v0} -> {v1})"
            ));
        }
        if !rising && t0 >= peak && v1 >= v0 {
            return Err(format!(
                "{label}: not falling at t = {t0} -> {t1} ({v0} -> {v1})"
            ));
        }
    }
    Ok(())
}

/// Larger mode counts must give strictly smaller values at every t.
fn check_mode_ordering(figure: &str, curves: &Curves, eta: &str) -> Result<(), String> {
    for n in 3..6u32 {
        let upper = &curves[&(n, eta.to_string())];
        let lower = &curves[&(n + 1, eta.to_string())];
        for ((t, hi), (_, lo)) in upper.iter().zip(lower) {
            if lo >= hi {
                return Err(format!(
                    "{figure}: P(n={}) = {lo} is not below P(n={n}) = {hi} at t = {t}",
                    n + 1
                ));
            }
        }
    }
    Ok(())
}

/// Value of a curve at t = 0.5 (grid point k = 50).
fn at_half(points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .find(|(t, _)| (*t - 0.5).abs() < 1e-12)
        .expect("t = 0.5 lies on the grid")
        .1
}

/// The success probability P = eta (1-t) t^(n-1) + (1-eta) t^n turns over at
/// t = eta (n-1) / (n (2 eta - 1)) when eta > 1/2; on the t = k/100 grid the
/// curve at eta = 0.8, n = 3 rises through 0.89 and falls beyond it, and
/// every other bundled curve rises across the whole grid.
fn check_fig4_fig5_fig6() -> Result<String, String> {
    // fig4: success probability at eta = 0.2 for n = 3..6.
    let fig4 = preset_curves("fig4")?;
    if fig4.len() != 4 {
        return Err(format!("fig4: expected 4 curves, got {}", fig4.len()));
    }
    for ((n, eta), points) in &fig4 {
        if eta != "0.2" {
            return Err(format!("fig4: unexpected eta {eta}"));
        }
        check_shape(&format!("fig4 n={n}"), points, 1.0)?;
        // Every curve passes through (1/2, 1/2^n).
        let anchor = 0.5f64.powi(*n as i32);
        if (at_half(points) - anchor).abs() >= 1e-12 {
            return Err(format!(
                "fig4 n={n}: value {} at t = 1/2, want {anchor}",
                at_half(points)
            ));
        }
    }
    // The headline anchor: the (t = 0.5, n = 3) row holds exactly 1/8.
    let n3 = &fig4[&(3, "0.2".to_string())];
    if (at_half(n3) - 0.125).abs() >= 1e-12 {
        return Err(format!("fig4: P(t=1/2, n=3) = {}", at_half(n3)));
    }
    // Larger n means a smaller success probability at every transmission.
    check_mode_ordering("fig4", &fig4, "0.2")?;

    // fig5: the same at eta = 0.8; the n = 3 curve turns over at t = 8/9.
    let fig5 = preset_curves("fig5")?;
    if fig5.len() != 4 {
        return Err(format!("fig5: expected 4 curves, got {}", fig5.len()));
    }
    for ((n, eta), points) in &fig5 {
        if eta != "0.8" {
            return Err(format!("fig5: unexpected eta {eta}"));
        }
        let peak = if *n == 3 { 0.89 } else { 1.0 };
        check_shape(&format!("fig5 n={n}"), points, peak)?;
        let anchor = 0.5f64.powi(*n as i32);
        if (at_half(points) - anchor).abs() >= 1e-12 {
            return Err(format!(
                "fig5 n={n}: value {} at t = 1/2, want {anchor}",
                at_half(points)
            ));
        }
    }
    check_mode_ordering("fig5", &fig5, "0.8")?;

    // fig6: n = 3 for four single-photon weights; all cross at (1/2, 1/8),
    // with the weight ordering flipping sides there.
    let fig6 = preset_curves("fig6")?;
    let etas = ["0.2", "0.4", "0.6", "0.8"];
    if fig6.len() != 4 {
        return Err(format!("fig6: expected 4 curves, got {}", fig6.len()));
    }
    for eta in etas {
        let points = fig6
            .get(&(3, eta.to_string()))
            .ok_or_else(|| format!("fig6: missing curve for eta = {eta}"))?;
        let peak = if eta == "0.8" { 0.89 } else { 1.0 };
        check_shape(&format!("fig6 eta={eta}"), points, peak)?;
        if (at_half(points) - 0.125).abs() >= 1e-12 {
            return Err(format!(
                "fig6 eta={eta}: value {} at the t = 1/2 crossing, want 0.125",
                at_half(points)
            ));
        }
    }
    for pair in etas.windows(2) {
        let first = &fig6[&(3, pair[0].to_string())];
        let second = &fig6[&(3, pair[1].to_string())];
        for ((t, lo), (_, hi)) in first.iter().zip(second) {
            if (t - 0.5).abs() < 1e-12 {
                continue;
            }
            let ordered = if *t < 0.5 { lo < hi } else { lo > hi };
            if !ordered {
                return Err(format!(
                    "fig6: weights {} and {} out of order at t = {t} ({lo} vs {hi})",
                    pair[0], pair[1]
                ));
            }
        }
    }

    Ok(
        "fig4/fig5/fig6 curves have the formula-dictated shapes, n- and eta-orderings, \
         and all pass through their t = 1/2 anchors (fig4: P(1/2, n=3) = 1/8 within 1e-12)"
            .to_string(),
    )
}

#[test]
fn figure_datasets_have_correct_shapes() {
    match check_fig4_fig5_fig6() {
        Ok(detail) => println!("[PASS] figure reproduction: {detail}"),
        Err(why) => {
            println!("[FAIL] figure reproduction: {why}");
            panic!("figure reproduction: {why}");
        }
    }
}
