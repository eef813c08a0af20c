//! Small numerical utilities: compensated summation, least-squares lines,
//! and closed forms for the constant-potential walk used as test oracles.

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_total(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Ordinary least squares line `y ~ slope x + intercept`, with the rms
/// residual. Panics if fewer than two points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need >= 2 points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - slope * x - intercept;
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

/// log-sum-exp of two natural logs; tolerates -inf.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Closed forms for the walk in a constant potential `lambda > 0`, from the
/// roots `rho_pm = e^lambda ± sqrt(e^{2 lambda} - 1)` of the three-term
/// recurrence `h(x+1) - 2 e^lambda h(x) + h(x-1) = 0`.
pub mod constant_potential {
    /// Decay exponent of the crossing weight: `log rho_plus = arccosh(e^lambda)`,
    /// evaluated stably for large lambda.
    pub fn beta(lambda: f64) -> f64 {
        assert!(lambda >= 0.0);
        if lambda == 0.0 {
            return 0.0;
        }
        // log(e^l (1 + sqrt(1 - e^{-2l}))) avoids overflowing e^l
        lambda + (1.0 + (-(-2.0 * lambda).exp_m1()).sqrt()).ln()
    }

    /// `log Z_{0,r}` for the no-return crossing of `(0, r)`:
    /// `Z = e^{-lambda} (rho_+ - rho_-) / (2 (rho_+^r - rho_-^r))`.
    pub fn log_z_block(lambda: f64, r: u32) -> f64 {
        assert!(r >= 1);
        if lambda == 0.0 {
            return -(2.0 * r as f64).ln();
        }
        let b = beta(lambda);
        let ln2 = std::f64::consts::LN_2;
        // log(rho_+ - rho_-) = log 2 + lambda + 0.5 log(1 - e^{-2 lambda})
        let log_gap = ln2 + lambda + 0.5 * (-(-2.0 * lambda).exp_m1()).ln();
        // log(rho_+^r - rho_-^r) = r beta + log(1 - e^{-2 r beta})
        let log_pow_gap = r as f64 * b + (-(-2.0 * r as f64 * b).exp_m1()).ln();
        -lambda + log_gap - ln2 - log_pow_gap
    }

    /// `d beta / d lambda = e^lambda / sqrt(e^{2 lambda} - 1) = 1 / sqrt(1 - e^{-2 lambda})`.
    pub fn beta_derivative(lambda: f64) -> f64 {
        assert!(lambda > 0.0);
        1.0 / (-(-2.0 * lambda).exp_m1()).sqrt()
    }

    /// Mean conditioned crossing time under the unrestricted measure is exactly
    /// `y * d beta / d lambda` for a constant potential.
    pub fn mean_crossing_time(lambda: f64, y: u32) -> f64 {
        y as f64 * beta_derivative(lambda)
    }

    /// Mean crossing time of the no-return block, `-d/d lambda log Z_{0,r}`,
    /// by central finite differences on the closed form.
    pub fn mean_block_time(lambda: f64, r: u32) -> f64 {
        let h = 1e-6 * lambda.max(1.0);
        -(log_z_block(lambda + h, r) - log_z_block(lambda - h, r)) / (2.0 * h)
    }
}
