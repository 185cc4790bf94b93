//! Lagrange shape functions on the reference cube `[−1, 1]³` and Gauss rules.

use crate::mesh::ElementOrder;

/// Points and weights of a tensor-product Gauss rule.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre rule with `n ∈ {1, 2, 3}` points on `[−1, 1]`.
pub fn gauss_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.6f64.sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => panic!("gauss_1d supports 1 to 3 points, got {n}"),
    }
}

pub fn hex_quadrature(n: usize) -> Quadrature {
    let (x, w) = gauss_1d(n);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j], x[k]]);
                weights.push(w[i] * w[j] * w[k]);
            }
        }
    }
    Quadrature { points, weights }
}

/// Rule on face `face` of the reference cube; points are volume coordinates.
pub fn face_quadrature(n: usize, face: usize) -> Quadrature {
    let (x, w) = gauss_1d(n);
    let axis = face / 2;
    let fixed = if face % 2 == 0 { -1.0 } else { 1.0 };
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let mut p = [0.0; 3];
            let mut free = [x[i], x[j]].into_iter();
            for (d, slot) in p.iter_mut().enumerate() {
                *slot = if d == axis { fixed } else { free.next().unwrap() };
            }
            points.push(p);
            weights.push(w[i] * w[j]);
        }
    }
    Quadrature { points, weights }
}

fn lagrange_1d(order: ElementOrder, t: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        ElementOrder::Q1 => ([0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0], [-0.5, 0.5, 0.0]),
        ElementOrder::Q2 => ([0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], [t - 0.5, -2.0 * t, t + 0.5]),
    }
}

/// Shape function values and reference gradients at `xi`, in local node order.
pub fn shape_functions(order: ElementOrder, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let p = order.nodes_per_edge();
    let l: [([f64; 3], [f64; 3]); 3] = std::array::from_fn(|d| lagrange_1d(order, xi[d]));
    let mut n = Vec::with_capacity(p * p * p);
    let mut dn = Vec::with_capacity(p * p * p);
    for k in 0..p {
        for j in 0..p {
            for i in 0..p {
                let (a, b, c) = (l[0].0[i], l[1].0[j], l[2].0[k]);
                n.push(a * b * c);
                dn.push([l[0].1[i] * b * c, a * l[1].1[j] * c, a * b * l[2].1[k]]);
            }
        }
    }
    (n, dn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_nodal_interpolation() {
        for order in [ElementOrder::Q1, ElementOrder::Q2] {
            let (n, dn) = shape_functions(order, &[0.3, -0.7, 0.1]);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for d in 0..3 {
                assert!(dn.iter().map(|g| g[d]).sum::<f64>().abs() < 1e-14);
            }
            let p = order.nodes_per_edge();
            for a in 0..p * p * p {
                let c = [a % p, (a / p) % p, a / (p * p)];
                let xi = c.map(|i| -1.0 + 2.0 * i as f64 / (p - 1) as f64);
                let (n, _) = shape_functions(order, &xi);
                for (b, v) in n.iter().enumerate() {
                    assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        let q = hex_quadrature(3);
        let s: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(4) * p[1].powi(2)).sum();
        assert!((s - (2.0 / 5.0) * (2.0 / 3.0) * 2.0).abs() < 1e-14);
        let f = face_quadrature(2, 5);
        assert!(f.points.iter().all(|p| p[2] == 1.0));
        assert!((f.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
    }
}
