//! Deliberately naive reference implementations, written from the metric
//! definitions with plain loops so they share no code with the library.
#![allow(dead_code, clippy::needless_range_loop)]


use ndarray::Array2;

fn eligible(t: &[f64]) -> bool {
    let pos = t.iter().filter(|&&v| v == 1.0).count();
    pos > 0 && pos < t.len()
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn hamming(pred: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let mut wrong = 0usize;
    let mut cells = 0usize;
    for i in 0..pred.nrows() {
        for j in 0..pred.ncols() {
            cells += 1;
            if pred[[i, j]] != truth[[i, j]] {
                wrong += 1;
            }
        }
    }
    wrong as f64 / cells as f64
}

pub fn ranking_loss(conf: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let (c, t) = (rows(conf), rows(truth));
    let (mut total, mut used) = (0.0, 0);
    for (c, t) in c.iter().zip(&t) {
        if !eligible(t) {
            continue;
        }
        let (mut bad, mut pairs) = (0.0, 0.0);
        for r in 0..t.len() {
            for i in 0..t.len() {
                if t[r] == 1.0 && t[i] != 1.0 {
                    pairs += 1.0;
                    if c[r] < c[i] {
                        bad += 1.0;
                    } else if c[r] == c[i] {
                        bad += 0.5;
                    }
                }
            }
        }
        total += bad / pairs;
        used += 1;
    }
    total / used as f64
}

fn rank(c: &[f64], j: usize) -> usize {
    c.iter().filter(|&&v| v >= c[j]).count()
}

pub fn coverage(conf: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let (c, t) = (rows(conf), rows(truth));
    let (mut total, mut used) = (0.0, 0);
    for (c, t) in c.iter().zip(&t) {
        if !eligible(t) {
            continue;
        }
        let mut worst = 0;
        for j in 0..t.len() {
            if t[j] == 1.0 {
                worst = worst.max(rank(c, j));
            }
        }
        total += (worst - 1) as f64;
        used += 1;
    }
    total / used as f64
}

pub fn average_precision(conf: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let (c, t) = (rows(conf), rows(truth));
    let (mut total, mut used) = (0.0, 0);
    for (c, t) in c.iter().zip(&t) {
        if !eligible(t) {
            continue;
        }
        let (mut sum, mut relevant) = (0.0, 0.0);
        for j in 0..t.len() {
            if t[j] != 1.0 {
                continue;
            }
            relevant += 1.0;
            let above = (0..t.len()).filter(|&l| t[l] == 1.0 && c[l] >= c[j]).count();
            sum += above as f64 / rank(c, j) as f64;
        }
        total += sum / relevant;
        used += 1;
    }
    total / used as f64
}

/// `Tr(M' L M)` written as the weighted sum of squared row differences.
pub fn dirichlet_energy(s: &Array2<f64>, m: &Array2<f64>) -> f64 {
    let n = s.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut d2 = 0.0;
            for c in 0..m.ncols() {
                d2 += (m[[i, c]] - m[[j, c]]).powi(2);
            }
            total += s[[i, j]] * d2;
        }
    }
    0.5 * total
}
