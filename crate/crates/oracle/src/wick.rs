//! Photon-number correlation by literal Wick pairing enumeration.
//!
//! The correlation `(1/16)<(X_A² + P_A² − 2V)(X_B² + P_B² − 2V)>` is expanded
//! into monomials of quadrature operators and every monomial expectation is
//! evaluated as the sum over all perfect pairings of products of second
//! moments. Only commuting operator products occur (no monomial contains both
//! `X` and `P` of the same mode), so classical Wick pairing is exact for a
//! zero-mean Gaussian state.

/// Second moments of one (A, B) detector pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMoments {
    pub xx: f64,
    pub pp: f64,
    pub xp: f64,
    pub px: f64,
    pub va_x: f64,
    pub va_p: f64,
    pub vb_x: f64,
    pub vb_p: f64,
    pub v_v: f64,
}

const XA: usize = 0;
const PA: usize = 1;
const XB: usize = 2;
const PB: usize = 3;

impl PairMoments {
    fn covariance(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        match (lo, hi) {
            (XA, XA) => self.va_x,
            (PA, PA) => self.va_p,
            (XB, XB) => self.vb_x,
            (PB, PB) => self.vb_p,
            (XA, XB) => self.xx,
            (PA, PB) => self.pp,
            (XA, PB) => self.xp,
            (PA, XB) => self.px,
            // Same-mode X/P pairs never occur in the expansion.
            _ => unreachable!("pairing ({lo}, {hi}) is not part of the expansion"),
        }
    }
}

/// Sum over all perfect pairings of `ops`.
fn gaussian_expectation(m: &PairMoments, ops: &[usize]) -> f64 {
    if ops.is_empty() {
        return 1.0;
    }
    if ops.len() % 2 == 1 {
        return 0.0;
    }
    let first = ops[0];
    let rest = &ops[1..];
    let mut total = 0.0;
    for k in 0..rest.len() {
        let remaining: Vec<usize> = rest
            .iter()
            .enumerate()
            .filter(|&(idx, _)| idx != k)
            .map(|(_, &op)| op)
            .collect();
        total += m.covariance(first, rest[k]) * gaussian_expectation(m, &remaining);
    }
    total
}

struct Monomial {
    coef: f64,
    ops: Vec<usize>,
}

fn expand(v_v: f64) -> Vec<Monomial> {
    // (X_A X_A + P_A P_A − 2V)(X_B X_B + P_B P_B − 2V)
    let a_side = [(1.0, vec![XA, XA]), (1.0, vec![PA, PA]), (-2.0 * v_v, vec![])];
    let b_side = [(1.0, vec![XB, XB]), (1.0, vec![PB, PB]), (-2.0 * v_v, vec![])];
    let mut out = Vec::with_capacity(9);
    for (ca, oa) in &a_side {
        for (cb, ob) in &b_side {
            let mut ops = oa.clone();
            ops.extend_from_slice(ob);
            out.push(Monomial { coef: ca * cb, ops });
        }
    }
    out
}

/// `(1/16) <(X_A² + P_A² − 2V_v)(X_B² + P_B² − 2V_v)>` by pairing enumeration.
pub fn wick_fourth_moment(m: &PairMoments) -> f64 {
    expand(m.v_v)
        .iter()
        .map(|mono| mono.coef * gaussian_expectation(m, &mono.ops))
        .sum::<f64>()
        / 16.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product_state(va: f64, vb: f64) -> PairMoments {
        PairMoments {
            xx: 0.0,
            pp: 0.0,
            xp: 0.0,
            px: 0.0,
            va_x: va,
            va_p: va,
            vb_x: vb,
            vb_p: vb,
            v_v: 1.0,
        }
    }

    #[test]
    fn vacuum_gives_zero() {
        assert!(wick_fourth_moment(&product_state(1.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn four_operator_pairing_count() {
        // <X⁴> = 3 V² for a single Gaussian variable.
        let m = product_state(2.0, 1.0);
        assert!((gaussian_expectation(&m, &[XA, XA, XA, XA]) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_product_factorizes() {
        for &(va, vb) in &[(1.5, 1.0), (2.0, 3.0), (1.1, 1.7)] {
            let expected = ((va - 1.0) / 2.0) * ((vb - 1.0) / 2.0);
            assert!((wick_fourth_moment(&product_state(va, vb)) - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn tmsv_reproduces_pair_statistics() {
        let r: f64 = 0.5;
        let c = (2.0 * r).cosh();
        let s = (2.0 * r).sinh();
        let m = PairMoments {
            xx: s,
            pp: -s,
            xp: 0.0,
            px: 0.0,
            va_x: c,
            va_p: c,
            vb_x: c,
            vb_p: c,
            v_v: 1.0,
        };
        assert!((wick_fourth_moment(&m) - crate::tmsv_nn(r)).abs() < 1e-12);
    }
}
