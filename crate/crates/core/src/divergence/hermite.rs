//! Gauss–Hermite rule for `∫ g(t) e^{−t²} dt`, nodes by Newton iteration on
//! the orthonormal Hermite recurrence.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

const PI_M4: f64 = 0.751_125_544_464_942_5;

pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `ln(w_k) + t_k²`, i.e. the log of the weight against Lebesgue measure
    /// after dividing out the Gaussian kernel.
    pub log_lebesgue_weights: Vec<f64>,
}

pub fn gauss_hermite(n: usize) -> HermiteRule {
    let mut nodes = vec![0.0; n];
    let mut log_w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => math::sqrt(2.0 * nf + 1.0) - 1.855_75 * math::pow(2.0 * nf + 1.0, -0.166_67),
            1 => z - 1.14 * math::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PI_M4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * math::sqrt(2.0 / jf) * p2 - math::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = math::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if math::abs(z - z1) <= 1e-15 * (1.0 + math::abs(z)) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let lw = math::ln(2.0) - 2.0 * math::ln(math::abs(pp));
        log_w[i] = lw;
        log_w[n - 1 - i] = lw;
    }
    if n % 2 == 1 {
        // Newton sweep can leave the middle node at ±tiny; it is exactly 0.
        nodes[m - 1] = 0.0;
    }
    let weights = log_w.iter().map(|l| math::exp(*l)).collect();
    let log_lebesgue_weights = log_w.iter().zip(&nodes).map(|(l, t)| l + t * t).collect();
    // Nodes descend from the Newton sweep; store ascending.
    let mut rule = HermiteRule { nodes, weights, log_lebesgue_weights };
    rule.nodes.reverse();
    rule.weights.reverse();
    rule.log_lebesgue_weights.reverse();
    rule
}
