//! Two-state continuous-time Markov chain: generator construction, exact
//! event-driven path simulation and occupation-time extraction.

use crate::core::Regime;
use rand::Rng;

/// 2x2 generator built from the transition rates.
/// q = [[-lambda12, lambda12], [lambda21, -lambda21]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub lambda12: f64,
    pub lambda21: f64,
}

impl Generator {
    pub fn new(lambda12: f64, lambda21: f64) -> Generator {
        assert!(lambda12 >= 0.0 && lambda21 >= 0.0, "rates must be >= 0");
        Generator { lambda12, lambda21 }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [
            [-self.lambda12, self.lambda12],
            [self.lambda21, -self.lambda21],
        ]
    }

    pub fn rate_out_of(&self, regime: Regime) -> f64 {
        match regime {
            Regime::One => self.lambda12,
            Regime::Two => self.lambda21,
        }
    }

    /// Closed-form transition matrix P(t) = exp(Q t) of the two-state chain.
    pub fn transition_matrix(&self, t: f64) -> [[f64; 2]; 2] {
        let total = self.lambda12 + self.lambda21;
        if total == 0.0 {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let decay = (-total * t).exp();
        let p11 = (self.lambda21 + self.lambda12 * decay) / total;
        let p22 = (self.lambda12 + self.lambda21 * decay) / total;
        [[p11, 1.0 - p11], [1.0 - p22, p22]]
    }
}

/// Right-continuous piecewise-constant regime path on [0, horizon].
///
/// `states[k]` holds on `[switch_times[k-1], switch_times[k])` with the
/// convention `switch_times[-1] = 0`; the last state holds to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    pub switch_times: Vec<f64>,
    pub states: Vec<Regime>,
    pub horizon: f64,
}

impl RegimePath {
    /// Regime in force at time t (right-continuous).
    pub fn state_at(&self, t: f64) -> Regime {
        // switch_times is ascending; count switches at or before t
        let n = self.switch_times.partition_point(|&s| s <= t);
        self.states[n]
    }
}

/// Exact simulation: holding time in state j is Exponential(lambda_jk).
/// A zero rate makes the state absorbing.
pub fn simulate_regime_path<R: Rng>(
    gen: &Generator,
    initial: Regime,
    horizon: f64,
    rng: &mut R,
) -> RegimePath {
    assert!(horizon >= 0.0);
    let mut switch_times = Vec::new();
    let mut states = vec![initial];
    let mut t = 0.0;
    let mut current = initial;
    loop {
        let rate = gen.rate_out_of(current);
        if rate == 0.0 {
            break;
        }
        let u: f64 = rng.gen::<f64>();
        // inverse-transform exponential; guards u = 0
        let hold = -(1.0 - u).ln() / rate;
        t += hold;
        if t >= horizon {
            break;
        }
        current = current.other();
        switch_times.push(t);
        states.push(current);
    }
    RegimePath {
        switch_times,
        states,
        horizon,
    }
}

/// Total Lebesgue time the path spends in the given regime.
/// occupation_time(1) + occupation_time(2) equals the horizon exactly.
pub fn occupation_time(path: &RegimePath, regime: Regime) -> f64 {
    let mut total = 0.0;
    let mut start = 0.0;
    for (k, &state) in path.states.iter().enumerate() {
        let end = path
            .switch_times
            .get(k)
            .copied()
            .unwrap_or(path.horizon);
        if state == regime {
            total += end - start;
        }
        start = end;
    }
    total
}

/// Regime at each left endpoint of a uniform grid with n_steps steps over
/// the horizon; the regime multiplying a step's diffusion is the regime at
/// the step's start.
pub fn discretize(path: &RegimePath, n_steps: usize) -> Vec<Regime> {
    assert!(n_steps >= 1);
    let dt = path.horizon / n_steps as f64;
    (0..n_steps).map(|i| path.state_at(i as f64 * dt)).collect()
}
