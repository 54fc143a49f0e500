//! Exact squared Euclidean distance transform with nearest-site tracking
//! (lower envelope of parabolas, applied per column then per row).

/// Squared distance from every cell to the nearest site, and that site's
/// flat index. Cells with no site anywhere get `f64::INFINITY` and
/// `usize::MAX`.
pub struct Edt {
    pub dist2: Vec<f64>,
    pub site: Vec<usize>,
}

pub fn edt(width: usize, height: usize, is_site: impl Fn(usize) -> bool) -> Edt {
    let n = width * height;
    // column pass: nearest site row along each column
    let mut col_d = vec![f64::INFINITY; n];
    let mut col_site = vec![usize::MAX; n];
    let mut f = vec![0.0; height.max(width)];
    let mut d = vec![0.0; height.max(width)];
    let mut arg = vec![0usize; height.max(width)];
    let mut env = Envelope::new(height.max(width));
    for x in 0..width {
        for y in 0..height {
            f[y] = if is_site(y * width + x) { 0.0 } else { f64::INFINITY };
        }
        env.run(&f[..height], &mut d[..height], &mut arg[..height]);
        for y in 0..height {
            col_d[y * width + x] = d[y];
            col_site[y * width + x] = if d[y].is_finite() { arg[y] * width + x } else { usize::MAX };
        }
    }
    let mut dist2 = vec![f64::INFINITY; n];
    let mut site = vec![usize::MAX; n];
    for y in 0..height {
        let row = y * width;
        f[..width].copy_from_slice(&col_d[row..row + width]);
        env.run(&f[..width], &mut d[..width], &mut arg[..width]);
        for x in 0..width {
            dist2[row + x] = d[x];
            site[row + x] = if d[x].is_finite() { col_site[row + arg[x]] } else { usize::MAX };
        }
    }
    Edt { dist2, site }
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// `d[q] = min_p (q - p)^2 + f[p]`, `arg[q]` the minimising `p`.
    fn run(&mut self, f: &[f64], d: &mut [f64], arg: &mut [usize]) {
        let n = f.len();
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                let p = v[k as usize];
                let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            d.fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for q in 0..n {
            while z[j + 1] < q as f64 {
                j += 1;
            }
            let p = v[j];
            let dq = q as f64 - p as f64;
            d[q] = dq * dq + f[p];
            arg[q] = p;
        }
    }
}
