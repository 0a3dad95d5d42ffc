//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

/// Counts occurrences of `gram` in `tokens` by scanning every window.
fn occurrences(tokens: &[String], gram: &[String]) -> usize {
    if tokens.len() < gram.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| tokens[i..i + gram.len()] == *gram)
        .count()
}

/// Clipped n-gram matches and total candidate n-grams, by enumeration.
pub fn brute_clipped(cand: &[String], refr: &[String], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let total = cand.len() - n + 1;
    let mut clipped = 0;
    for i in 0..total {
        let gram = &cand[i..i + n];
        let first = (0..i).all(|j| cand[j..j + n] != *gram);
        if first {
            clipped += occurrences(cand, gram).min(occurrences(refr, gram));
        }
    }
    (clipped, total)
}

pub fn brute_bleu(cand: &[String], refr: &[String]) -> f64 {
    if cand == refr {
        return 1.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (m, t) = brute_clipped(cand, refr, n);
        log_sum += ((m + 1) as f64 / (t + 1) as f64).ln();
    }
    let bp = (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0).exp();
    bp * (log_sum / 4.0).exp()
}

pub fn brute_rouge1(cand: &[String], refr: &[String]) -> f64 {
    let (o, _) = brute_clipped(cand, refr, 1);
    if o == 0 {
        return 0.0;
    }
    2.0 * o as f64 / (cand.len() + refr.len()) as f64
}

/// GAE by explicit double summation.
pub fn brute_gae(rewards: &[f64], values: &[f64], next_values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * next_values[t] - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for l in 0..(n - t) {
                acc += (gamma * lambda).powi(l as i32) * delta[t + l];
            }
            acc
        })
        .collect()
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}
