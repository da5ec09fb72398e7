//! Six sparse-vector variants, two correct and four not.
//!
//! Output symbols: below threshold `0`, above `1`, halted `-1`. Variant 3
//! emits the noisy query value in place of `1`.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::mechanisms::{check_positive, Mechanism};
use crate::rng::{laplace, AuditRng};
use crate::types::{Dataset, PrivacyProperty, SampleBatch};

pub const HALTED: f64 = -1.0;
pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_MAX_COUNT: usize = 3;
pub const DEFAULT_QUERIES: usize = 10;

/// `q_j(D) = #{x >= t_j} - #{x < t_j}` for `m` thresholds at the centers of
/// `m` equal cells of `[lo, hi]`. Each query has sensitivity 1 under
/// add/remove, and one added record moves some queries up and the rest down.
pub fn signed_threshold_queries(d: &Dataset, m: usize) -> Vec<f64> {
    let (lo, hi) = d.range();
    let w = (hi - lo) / m as f64;
    (0..m)
        .map(|j| {
            let t = lo + (j as f64 + 0.5) * w;
            d.records()
                .iter()
                .map(|&x| if x >= t { 1.0 } else { -1.0 })
                .sum()
        })
        .collect()
}

struct Scales {
    rho: f64,
    nu: f64,
    /// threshold noise redrawn after every positive answer
    redraw_rho: bool,
    halts: bool,
    emits_value: bool,
}

fn scales(variant: u8, eps: f64, c: usize) -> Scales {
    let c = c as f64;
    let base = Scales {
        rho: 2.0 / eps,
        nu: 4.0 * c / eps,
        redraw_rho: false,
        halts: true,
        emits_value: false,
    };
    match variant {
        1 => base,
        2 => Scales {
            rho: 2.0 * c / eps,
            redraw_rho: true,
            ..base
        },
        3 => Scales {
            nu: 2.0 * c / eps,
            emits_value: true,
            ..base
        },
        4 => Scales {
            rho: 4.0 / eps,
            nu: 4.0 / (3.0 * eps),
            ..base
        },
        5 => Scales {
            nu: 0.0,
            halts: false,
            ..base
        },
        _ => Scales {
            nu: 2.0 / eps,
            halts: false,
            ..base
        },
    }
}

fn run_into(
    s: &Scales,
    queries: &[f64],
    threshold: f64,
    c: usize,
    rng: &mut AuditRng,
    out: &mut [f64],
) {
    let mut rho = laplace(rng, s.rho);
    let mut count = 0;
    for (j, &q) in queries.iter().enumerate() {
        if s.halts && count >= c {
            out[j..].fill(HALTED);
            return;
        }
        let nu = if s.nu > 0.0 { laplace(rng, s.nu) } else { 0.0 };
        let noisy = q + nu;
        if noisy >= threshold + rho {
            out[j] = if s.emits_value { noisy } else { 1.0 };
            count += 1;
            if s.redraw_rho {
                rho = laplace(rng, s.rho);
            }
        } else {
            out[j] = 0.0;
        }
    }
}

/// One run of SVT variant `k` on `D` with the signed-threshold battery.
pub fn svt(
    variant: u8,
    d: &Dataset,
    eps: f64,
    threshold: f64,
    c: usize,
    m: usize,
    rng: &mut AuditRng,
) -> Result<Vec<f64>> {
    let mech = Svt::new(variant, eps, threshold, c, m)?;
    let q = signed_threshold_queries(d, m);
    let mut out = vec![0.0; m];
    run_into(&mech.scales(), &q, threshold, c, rng, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Svt {
    variant: u8,
    epsilon: f64,
    threshold: f64,
    c: usize,
    m: usize,
    name: String,
}

impl Svt {
    pub fn new(variant: u8, epsilon: f64, threshold: f64, c: usize, m: usize) -> Result<Self> {
        if !(1..=6).contains(&variant) {
            return invalid(format!("svt variant {variant} not in 1..=6"));
        }
        check_positive("epsilon", epsilon)?;
        if m == 0 {
            return invalid("svt needs at least one query");
        }
        if c == 0 {
            return invalid("svt max count c must be at least 1");
        }
        if !threshold.is_finite() {
            return invalid("svt threshold must be finite");
        }
        Ok(Svt {
            variant,
            epsilon,
            threshold,
            c,
            m,
            name: format!("svt{variant}"),
        })
    }

    pub fn variant(&self) -> u8 {
        self.variant
    }

    fn scales(&self) -> Scales {
        scales(self.variant, self.epsilon, self.c)
    }

    /// The privacy level this variant actually attains, if any.
    pub fn true_epsilon(&self) -> Option<f64> {
        match self.variant {
            1 | 2 => Some(self.epsilon),
            4 => Some((1.0 + 6.0 * self.c as f64) / 4.0 * self.epsilon),
            _ => None,
        }
    }
}

impl Mechanism for Svt {
    fn name(&self) -> &str {
        &self.name
    }

    fn claimed_property(&self) -> PrivacyProperty {
        PrivacyProperty::Pure {
            epsilon: self.epsilon,
        }
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("epsilon".into(), self.epsilon);
        p.insert("threshold".into(), self.threshold);
        p.insert("c".into(), self.c as f64);
        p.insert("queries".into(), self.m as f64);
        p
    }

    fn sample(&self, d: &Dataset, n: usize, rng: &mut AuditRng) -> Result<SampleBatch> {
        let q = signed_threshold_queries(d, self.m);
        let s = self.scales();
        let mut data = vec![0.0; n * self.m];
        for row in data.chunks_exact_mut(self.m) {
            run_into(&s, &q, self.threshold, self.c, rng, row);
        }
        SampleBatch::new(self.m, data)
    }
}
