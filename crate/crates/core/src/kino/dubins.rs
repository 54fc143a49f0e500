//! Dubins shortest paths and piecewise-constant-curvature curves.

use crate::geometry::{wrap_angle, Point, Pose};
use std::f64::consts::PI;

/// Constant-curvature piece: straight (`kappa = 0`) or circular arc.
/// Negative `length` drives in reverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePiece {
    pub start: Pose,
    pub kappa: f64,
    pub length: f64,
}

impl CurvePiece {
    pub fn at(&self, s: f64) -> Pose {
        advance(self.start, self.kappa, s)
    }

    pub fn end(&self) -> Pose {
        self.at(self.length)
    }
}

/// Pose reached after travelling arc length `s` with curvature `kappa`.
pub fn advance(p: Pose, kappa: f64, s: f64) -> Pose {
    if kappa.abs() < 1e-12 {
        let (sn, cs) = p.theta.sin_cos();
        return Pose::new(p.x + s * cs, p.y + s * sn, p.theta);
    }
    let th = p.theta + kappa * s;
    Pose::new(
        p.x + (th.sin() - p.theta.sin()) / kappa,
        p.y - (th.cos() - p.theta.cos()) / kappa,
        wrap_angle(th),
    )
}

/// Tangent-continuous chain of pieces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Curve {
    pub pieces: Vec<CurvePiece>,
}

impl Curve {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length.abs()).sum()
    }

    /// Sum of absolute heading change.
    pub fn total_turning(&self) -> f64 {
        self.pieces.iter().map(|p| (p.kappa * p.length).abs()).sum()
    }

    pub fn end(&self) -> Option<Pose> {
        self.pieces.last().map(CurvePiece::end)
    }

    /// Samples at uniform arc length no larger than `spacing`, both ends
    /// included; headings are the curve tangent.
    pub fn sample(&self, spacing: f64) -> Vec<Pose> {
        let total = self.length();
        let Some(first) = self.pieces.first() else {
            return Vec::new();
        };
        let n = (total / spacing).ceil().max(1.0) as usize;
        let h = total / n as f64;
        let mut out = Vec::with_capacity(n + 1);
        out.push(first.start);
        let (mut k, mut base) = (0usize, 0.0);
        for i in 1..n {
            let s = i as f64 * h;
            while k + 1 < self.pieces.len() && base + self.pieces[k].length.abs() < s {
                base += self.pieces[k].length.abs();
                k += 1;
            }
            let p = &self.pieces[k];
            let local = (s - base).min(p.length.abs());
            out.push(p.at(local * p.length.signum()));
        }
        out.push(self.end().unwrap());
        out
    }

    /// Points every `step` of arc length (for collision checks).
    pub fn probe(&self, step: f64) -> impl Iterator<Item = Point> + '_ {
        self.pieces.iter().flat_map(move |p| {
            let n = (p.length.abs() / step).ceil().max(1.0) as usize;
            (0..=n).map(move |i| p.at(p.length * i as f64 / n as f64).point())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl DubinsWord {
    const ALL: [DubinsWord; 6] = [
        DubinsWord::Lsl,
        DubinsWord::Rsr,
        DubinsWord::Lsr,
        DubinsWord::Rsl,
        DubinsWord::Rlr,
        DubinsWord::Lrl,
    ];

    /// Curvature sign of each of the three segments.
    fn signs(self) -> [f64; 3] {
        match self {
            DubinsWord::Lsl => [1.0, 0.0, 1.0],
            DubinsWord::Rsr => [-1.0, 0.0, -1.0],
            DubinsWord::Lsr => [1.0, 0.0, -1.0],
            DubinsWord::Rsl => [-1.0, 0.0, 1.0],
            DubinsWord::Rlr => [-1.0, 1.0, -1.0],
            DubinsWord::Lrl => [1.0, -1.0, 1.0],
        }
    }
}

fn mod2pi(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

/// Normalised segment lengths `(t, p, q)` of one word, if it exists.
fn word_params(w: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let cab = (alpha - beta).cos();
    match w {
        DubinsWord::Lsl => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(-alpha + tmp), p2.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::Rsr => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p2.sqrt(), mod2pi(-beta + tmp)])
        }
        DubinsWord::Lsr => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(-alpha + tmp), p, mod2pi(-beta + tmp)])
        }
        DubinsWord::Rsl => {
            let p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::Rlr => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(2.0 * PI - tmp.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::Lrl => {
            let tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(2.0 * PI - tmp.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + p)])
        }
    }
}

/// Every existing Dubins word from `a` to `b` with turning radius `rho`,
/// shortest first.
pub fn dubins_candidates(a: Pose, b: Pose, rho: f64) -> Vec<(f64, Curve)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let d = dx.hypot(dy) / rho;
    let th = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
    let alpha = mod2pi(a.theta - th);
    let beta = mod2pi(b.theta - th);
    let mut out: Vec<(f64, Curve)> = DubinsWord::ALL
        .iter()
        .filter_map(|&w| {
            let params = word_params(w, alpha, beta, d)?;
            let mut pieces = Vec::with_capacity(3);
            let mut pose = a;
            for (sign, len) in w.signs().into_iter().zip(params) {
                if len * rho < 1e-10 {
                    continue;
                }
                let piece = CurvePiece {
                    start: pose,
                    kappa: sign / rho,
                    length: len * rho,
                };
                pose = piece.end();
                pieces.push(piece);
            }
            let total = params.iter().sum::<f64>() * rho;
            Some((total, Curve { pieces }))
        })
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Shortest Dubins path from `a` to `b`.
pub fn dubins_shortest(a: Pose, b: Pose, rho: f64) -> Option<Curve> {
    dubins_candidates(a, b, rho).into_iter().next().map(|(_, c)| c)
}

/// Length of the shortest Dubins path (obstacle-free lower bound).
pub fn dubins_length(a: Pose, b: Pose, rho: f64) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let d = dx.hypot(dy) / rho;
    let th = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
    let alpha = mod2pi(a.theta - th);
    let beta = mod2pi(b.theta - th);
    DubinsWord::ALL
        .iter()
        .filter_map(|&w| word_params(w, alpha, beta, d))
        .map(|p| (p[0] + p[1] + p[2]) * rho)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Pose, b: Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && wrap_angle(a.theta - b.theta).abs() < tol
    }

    #[test]
    fn straight_ahead() {
        let c = dubins_shortest(Pose::new(0.0, 0.0, 0.0), Pose::new(10.0, 0.0, 0.0), 2.0).unwrap();
        assert!((c.length() - 10.0).abs() < 1e-9);
        assert!(c.total_turning() < 1e-9);
    }

    #[test]
    fn half_circle_u_turn() {
        // diametrically opposite poses on a circle of radius rho
        let rho = 3.0;
        let c = dubins_shortest(Pose::new(0.0, 0.0, 0.0), Pose::new(0.0, 2.0 * rho, PI), rho).unwrap();
        assert!((c.length() - PI * rho).abs() < 1e-9);
    }

    #[test]
    fn arc_advance_is_on_circle() {
        let p = advance(Pose::new(0.0, 0.0, 0.0), 0.5, 2.0 * PI);
        assert!(close(p, Pose::new(0.0, 4.0, PI), 1e-12));
    }

    #[test]
    fn sampling_keeps_ends_and_spacing() {
        let a = Pose::new(1.0, 2.0, 0.3);
        let b = Pose::new(8.0, -4.0, -2.0);
        let c = dubins_shortest(a, b, 2.5).unwrap();
        let s = c.sample(0.5);
        assert!(close(s[0], a, 1e-12));
        assert!(close(*s.last().unwrap(), b, 1e-6));
        for w in s.windows(2) {
            assert!(w[0].point().dist(w[1].point()) <= 0.5 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn every_word_reaches_goal(
            x in -20.0f64..20.0, y in -20.0f64..20.0,
            t0 in -3.1f64..3.1, t1 in -3.1f64..3.1, rho in 0.5f64..6.0,
        ) {
            let a = Pose::new(0.0, 0.0, t0);
            let b = Pose::new(x, y, t1);
            let cands = dubins_candidates(a, b, rho);
            prop_assert!(!cands.is_empty());
            for (len, c) in &cands {
                prop_assert!(close(c.end().unwrap_or(a), b, 1e-6), "{:?}", c);
                prop_assert!((c.length() - len).abs() < 1e-6);
                for p in &c.pieces {
                    prop_assert!(p.kappa.abs() <= 1.0 / rho + 1e-12);
                }
            }
            prop_assert!((dubins_length(a, b, rho) - cands[0].0).abs() < 1e-9);
            prop_assert!(cands[0].0 >= (x * x + y * y).sqrt() - 1e-9);
        }
    }
}
