//! Helpers shared by the acceptance suite.

use std::fmt;

/// Outcome of one acceptance criterion: every named condition must hold.
#[derive(Debug, Default)]
pub struct Verdict {
    conditions: Vec<(String, bool)>,
}

impl Verdict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a condition with a short measured description.
    pub fn check(&mut self, ok: bool, description: impl Into<String>) -> &mut Self {
        self.conditions.push((description.into(), ok));
        self
    }

    pub fn passed(&self) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.1)
    }

    pub fn failures(&self) -> impl Iterator<Item = &str> {
        self.conditions.iter().filter(|c| !c.1).map(|c| c.0.as_str())
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .conditions
            .iter()
            .map(|(d, ok)| if *ok { d.clone() } else { format!("NOT {d}") })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Average ranks (ties share the mean rank), 1-based.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
