use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Decimal places shown by the shortest representation of `x`, capped at 6.
fn displayed_decimals(x: f64) -> u32 {
    let s = format!("{x}");
    s.split_once('.').map_or(0, |(_, frac)| frac.len().min(6) as u32)
}

fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

/// Three distinct wrong answers near `gold`: within 30% of it, or within
/// 1.0 when `|gold| < 1`, rounded to the precision `gold` is written with.
/// When that grid holds too few values the precision is refined one decimal
/// at a time. Deterministic in `seed`.
pub fn generate_distractors(gold: f64, seed: u64) -> [f64; 3] {
    assert!(gold.is_finite(), "gold answer must be finite");
    let radius = if gold.abs() < 1.0 { 1.0 } else { 0.3 * gold.abs() };
    let (lo, hi) = (gold - radius, gold + radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decimals = displayed_decimals(gold);
    loop {
        let step = 10f64.powi(-(decimals as i32));
        // Grid points strictly inside the band other than gold itself.
        let slots = ((radius / step).floor() as i64) * 2;
        if slots >= 3 || decimals >= 12 {
            break;
        }
        decimals += 1;
    }
    let mut out: Vec<f64> = Vec::with_capacity(3);
    while out.len() < 3 {
        let v = round_to(rng.gen_range(lo..=hi), decimals);
        if v < lo || v > hi || v == gold || out.contains(&v) {
            continue;
        }
        out.push(v);
    }
    [out[0], out[1], out[2]]
}

/// Gold plus its distractors in a seed-determined order.
pub fn options_with_gold(gold: f64, seed: u64) -> Vec<f64> {
    let mut options = generate_distractors(gold, seed).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    options.insert(rng.gen_range(0..=3), gold);
    options
}
