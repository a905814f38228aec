//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's numerical code; each routine is a
//! direct, unoptimized transcription of the textbook or published definition.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::PI;

// ---------------------------------------------------------------- network

/// Shape of a one-hidden-layer network stored as
/// `[W1 (hidden × input) | b1 | W2 (actions × hidden) | b2]`.
#[derive(Debug, Clone, Copy)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn len(&self) -> usize {
        self.hidden * self.input + self.hidden + self.actions * self.hidden + self.actions
    }
}

pub fn mlp_forward(shape: NetShape, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let w1 = &theta[..shape.hidden * shape.input];
    let b1 = &theta[shape.hidden * shape.input..shape.hidden * shape.input + shape.hidden];
    let off = shape.hidden * shape.input + shape.hidden;
    let w2 = &theta[off..off + shape.actions * shape.hidden];
    let b2 = &theta[off + shape.actions * shape.hidden..];
    let mut h = vec![0.0; shape.hidden];
    for j in 0..shape.hidden {
        let mut z = b1[j];
        for i in 0..shape.input {
            z += w1[j * shape.input + i] * x[i];
        }
        h[j] = if z > 0.0 { z } else { 0.0 };
    }
    (0..shape.actions)
        .map(|a| {
            let mut q = b2[a];
            for j in 0..shape.hidden {
                q += w2[a * shape.hidden + j] * h[j];
            }
            q
        })
        .collect()
}

pub fn huber(e: f64) -> f64 {
    if e.abs() <= 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

/// Mean per-item loss of `Q(x)[a] − target`.
pub fn mlp_loss(shape: NetShape, theta: &[f64], batch: &[(Vec<f64>, usize, f64)], use_huber: bool) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, a, y)| {
            let e = mlp_forward(shape, theta, x)[*a] - y;
            if use_huber {
                huber(e)
            } else {
                e * e
            }
        })
        .sum();
    total / batch.len() as f64
}

/// Central finite-difference gradient of [`mlp_loss`].
pub fn fd_gradient(shape: NetShape, theta: &[f64], batch: &[(Vec<f64>, usize, f64)], use_huber: bool, eps: f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            work[i] = theta[i] + eps;
            let up = mlp_loss(shape, &work, batch, use_huber);
            work[i] = theta[i] - eps;
            let down = mlp_loss(shape, &work, batch, use_huber);
            work[i] = theta[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

// ---------------------------------------------------------------- HDBSCAN

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

/// Components of `members` in the graph whose edges are the pairs with `w[i][j] < below`.
fn components_below(w: &[Vec<f64>], members: &[usize], below: f64) -> Vec<Vec<usize>> {
    let mut seen = vec![false; members.len()];
    let mut out = Vec::new();
    for s in 0..members.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![members[s]];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..members.len() {
                if !seen[v] && w[members[u]][members[v]] < below {
                    seen[v] = true;
                    comp.push(members[v]);
                    queue.push_back(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Smallest threshold at which `members` is connected: the largest edge of its minimum spanning tree.
fn bottleneck(w: &[Vec<f64>], members: &[usize]) -> f64 {
    let m = members.len();
    let mut in_tree = vec![false; m];
    let mut best = vec![f64::INFINITY; m];
    best[0] = 0.0;
    let mut worst: f64 = 0.0;
    for _ in 0..m {
        let u = (0..m)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        worst = worst.max(best[u]);
        for v in 0..m {
            if !in_tree[v] {
                best[v] = best[v].min(w[members[u]][members[v]]);
            }
        }
    }
    worst
}

struct RefCluster {
    birth: f64,
    stability: f64,
    children: Vec<usize>,
}

/// Brute-force HDBSCAN labels.
///
/// Core distance: distance to the `min_samples`-th nearest row counting the row
/// itself. The single-linkage hierarchy is read off threshold graphs, so merges
/// at equal heights happen simultaneously. Flat clusters come from excess of
/// mass over the condensed tree with the root excluded; if every row is
/// identical and there are at least `min_cluster_size` rows, all rows form one
/// cluster.
pub fn brute_hdbscan(rows: &[Vec<f64>], min_cluster_size: usize, min_samples: usize) -> Vec<i32> {
    let n = rows.len();
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist(&rows[i], &rows[j])).collect()).collect();
    let k = min_samples.min(n);
    let core: Vec<f64> = d
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(f64::total_cmp);
            r[k - 1]
        })
        .collect();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i][j] = core[i].max(core[j]).max(d[i][j]);
            }
        }
    }
    let off_diag_zero = (0..n).all(|i| (0..n).all(|j| w[i][j] == 0.0));
    if off_diag_zero && n >= min_cluster_size {
        return vec![0; n];
    }

    let mut clusters = vec![RefCluster { birth: 0.0, stability: 0.0, children: Vec::new() }];
    let mut fell_from = vec![usize::MAX; n];
    let mut work = vec![(0usize, (0..n).collect::<Vec<usize>>())];
    while let Some((id, start)) = work.pop() {
        let mut members = start;
        loop {
            let h = bottleneck(&w, &members);
            let lambda = if h > 0.0 { 1.0 / h } else { f64::INFINITY };
            let parts = components_below(&w, &members, h);
            let birth = clusters[id].birth;
            let big: Vec<&Vec<usize>> = parts.iter().filter(|p| p.len() >= min_cluster_size).collect();
            for p in parts.iter().filter(|p| p.len() < min_cluster_size) {
                for &x in p {
                    fell_from[x] = id;
                    clusters[id].stability += lambda - birth;
                }
            }
            if big.len() >= 2 {
                for p in big {
                    clusters[id].stability += (lambda - birth) * p.len() as f64;
                    let child = clusters.len();
                    clusters.push(RefCluster { birth: lambda, stability: 0.0, children: Vec::new() });
                    clusters[id].children.push(child);
                    work.push((child, p.clone()));
                }
                break;
            } else if big.len() == 1 {
                members = big[0].clone();
            } else {
                break;
            }
        }
    }

    // Children always carry larger ids than their parent.
    let m = clusters.len();
    let mut best: Vec<f64> = clusters.iter().map(|c| c.stability).collect();
    let mut selected = vec![false; m];
    let mut order: Vec<usize> = (1..m).collect();
    order.sort_unstable_by(|a, b| b.cmp(a));
    for c in order {
        let below: f64 = clusters[c].children.iter().map(|&k| best[k]).sum();
        if !clusters[c].children.is_empty() && below > best[c] {
            best[c] = below;
        } else {
            selected[c] = true;
            let mut stack = clusters[c].children.clone();
            while let Some(x) = stack.pop() {
                selected[x] = false;
                stack.extend(clusters[x].children.iter().copied());
            }
        }
    }
    let mut parent = vec![usize::MAX; m];
    for (p, c) in clusters.iter().enumerate() {
        for &k in &c.children {
            parent[k] = p;
        }
    }
    let ids: Vec<usize> = (0..m).filter(|&c| selected[c]).collect();
    (0..n)
        .map(|x| {
            let mut c = fell_from[x];
            while c != usize::MAX {
                if let Some(pos) = ids.iter().position(|&s| s == c) {
                    return pos as i32;
                }
                c = parent[c];
            }
            -1
        })
        .collect()
}

/// Equal partitions up to a relabeling of clusters; noise must match exactly.
pub fn same_partition(a: &[i32], b: &[i32]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<i32, i32> = HashMap::new();
    let mut back: HashMap<i32, i32> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if (x < 0) != (y < 0) {
            return false;
        }
        if x < 0 {
            continue;
        }
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------- statistics

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, nine coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn student_t_density(x: f64, nu: f64) -> f64 {
    let log_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln();
    (log_norm - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp()
}

/// Two-sided tail mass `P(|T| ≥ |t|)` by composite Simpson integration of the density on `[0, |t|]`.
pub fn two_sided_p(t: f64, nu: f64) -> f64 {
    let b = t.abs();
    if b == 0.0 {
        return 1.0;
    }
    let panels = 40_000;
    let h = b / panels as f64;
    let mut s = student_t_density(0.0, nu) + student_t_density(b, nu);
    for i in 1..panels {
        let x = i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * student_t_density(x, nu);
    }
    let half_mass = s * h / 3.0;
    (1.0 - 2.0 * half_mass).max(0.0)
}

fn welford(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, m2 / (xs.len() - 1) as f64)
}

/// `(t, degrees of freedom, two-sided p)` of Welch's test.
pub fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, va) = welford(a);
    let (mb, vb) = welford(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let qa = va / na;
    let qb = vb / nb;
    let t = (ma - mb) / (qa + qb).sqrt();
    let nu = (qa + qb).powi(2) / (qa.powi(2) / (na - 1.0) + qb.powi(2) / (nb - 1.0));
    (t, nu, two_sided_p(t, nu))
}

/// Average ranks by counting: `1 + #less + (#equal − 1) / 2`.
pub fn counting_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rx = counting_ranks(x);
    let ry = counting_ranks(y);
    let n = x.len() as f64;
    let sx: f64 = rx.iter().sum();
    let sy: f64 = ry.iter().sum();
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

// ---------------------------------------------------------------- environments

/// Gym CartPole-v1 transition (Euler integration). Returns `(state, reward, terminated)`.
pub fn cartpole_ref(s: [f64; 4], action: usize) -> ([f64; 4], f64, bool) {
    let gravity = 9.8;
    let masscart = 1.0;
    let masspole = 0.1;
    let total_mass = masspole + masscart;
    let length = 0.5;
    let polemass_length = masspole * length;
    let force_mag = 10.0;
    let tau = 0.02;
    let theta_threshold_radians = 12.0 * 2.0 * PI / 360.0;
    let x_threshold = 2.4;

    let [x, x_dot, theta, theta_dot] = s;
    let force = if action == 1 { force_mag } else { -force_mag };
    let costheta = theta.cos();
    let sintheta = theta.sin();
    let temp = (force + polemass_length * theta_dot.powi(2) * sintheta) / total_mass;
    let thetaacc = (gravity * sintheta - costheta * temp)
        / (length * (4.0 / 3.0 - masspole * costheta.powi(2) / total_mass));
    let xacc = temp - polemass_length * thetaacc * costheta / total_mass;
    let x2 = x + tau * x_dot;
    let x_dot2 = x_dot + tau * xacc;
    let theta2 = theta + tau * theta_dot;
    let theta_dot2 = theta_dot + tau * thetaacc;
    let terminated = x2 < -x_threshold || x2 > x_threshold || theta2 < -theta_threshold_radians || theta2 > theta_threshold_radians;
    ([x2, x_dot2, theta2, theta_dot2], 1.0, terminated)
}

/// Gym MountainCar-v0 transition.
pub fn mountain_car_ref(s: [f64; 2], action: usize) -> ([f64; 2], f64, bool) {
    let (min_position, max_position, max_speed) = (-1.2, 0.6, 0.07);
    let (goal_position, goal_velocity) = (0.5, 0.0);
    let (force, gravity) = (0.001, 0.0025);
    let [mut position, mut velocity] = s;
    velocity += (action as f64 - 1.0) * force + (3.0 * position).cos() * (-gravity);
    velocity = velocity.max(-max_speed).min(max_speed);
    position += velocity;
    position = position.max(min_position).min(max_position);
    if position == min_position && velocity < 0.0 {
        velocity = 0.0;
    }
    let terminated = position >= goal_position && velocity >= goal_velocity;
    ([position, velocity], -1.0, terminated)
}

fn acrobot_dsdt(s: &[f64; 5]) -> [f64; 5] {
    let (m1, m2, l1, lc1, lc2, i1, i2, g): (f64, f64, f64, f64, f64, f64, f64, f64) = (1.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 9.8);
    let a = s[4];
    let (theta1, theta2, dtheta1, dtheta2) = (s[0], s[1], s[2], s[3]);
    let d1 = m1 * lc1.powi(2) + m2 * (l1.powi(2) + lc2.powi(2) + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2.powi(2) + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2.powi(2) * theta2.sin() - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1.powi(2) * theta2.sin() - phi2)
        / (m2 * lc2.powi(2) + i2 - d2.powi(2) / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2, 0.0]
}

fn axpy(y: &[f64; 5], h: f64, k: &[f64; 5]) -> [f64; 5] {
    let mut out = *y;
    for i in 0..5 {
        out[i] = y[i] + h * k[i];
    }
    out
}

fn wrap_ref(mut x: f64, m: f64, big_m: f64) -> f64 {
    let diff = big_m - m;
    while x > big_m {
        x -= diff;
    }
    while x < m {
        x += diff;
    }
    x
}

/// Gym Acrobot-v1 transition ("book" dynamics, one RK4 step over `dt = 0.2`, no torque noise).
pub fn acrobot_ref(s: [f64; 4], action: usize) -> ([f64; 4], f64, bool) {
    let dt = 0.2;
    let torque = [-1.0, 0.0, 1.0][action];
    let y0 = [s[0], s[1], s[2], s[3], torque];
    let dt2 = dt / 2.0;
    let k1 = acrobot_dsdt(&y0);
    let k2 = acrobot_dsdt(&axpy(&y0, dt2, &k1));
    let k3 = acrobot_dsdt(&axpy(&y0, dt2, &k2));
    let k4 = acrobot_dsdt(&axpy(&y0, dt, &k3));
    let mut ns = [0.0; 5];
    for i in 0..5 {
        ns[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let out = [
        wrap_ref(ns[0], -PI, PI),
        wrap_ref(ns[1], -PI, PI),
        ns[2].max(-4.0 * PI).min(4.0 * PI),
        ns[3].max(-9.0 * PI).min(9.0 * PI),
    ];
    let terminated = -out[0].cos() - (out[1] + out[0]).cos() > 1.0;
    (out, if terminated { 0.0 } else { -1.0 }, terminated)
}

/// Deterministic action script: a mix of runs and alternations.
pub fn scripted_action(step: usize, num_actions: usize) -> usize {
    ((step / 7) * 5 + step * step / 3) % num_actions
}

// ---------------------------------------------------------------- returns

/// `Σ γ^i r_i` with the discount built up multiplicatively.
pub fn discounted_sum(rewards: &[f64], gamma: f64) -> f64 {
    let mut g = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += g * r;
        g *= gamma;
    }
    total
}

// ---------------------------------------------------------------- linear algebra

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors as columns)` unsorted.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (divides by `n − 1`).
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, d) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect()
}

/// Column-wise `(x − mean) / σ` with the population σ; constant columns map to 0.
pub fn standardize_ref(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let stats: Vec<(f64, f64, bool)> = (0..d)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (i, &x) in col.iter().enumerate() {
                let delta = x - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (x - mean);
            }
            let constant = col.iter().all(|&x| x == col[0]);
            (mean, (m2 / col.len() as f64).sqrt(), constant)
        })
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&stats)
                .map(|(&x, &(m, s, constant))| if constant { 0.0 } else { (x - m) / s })
                .collect()
        })
        .collect()
}
