//! Registry entries. Each module exposes an `EXPERIMENT` and a plan type that does the work.

pub mod alg1_map;
pub mod cold_diffusion;
pub mod fig1;
pub mod fig2;
pub mod gaussian_rate;
pub mod path_ode;
pub mod pde_suite;
pub mod theorem1;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweedie_prox::trace::fmt_f64;
use tweedie_prox::Vector;

use crate::config::Params;
use crate::error::Result;

/// CSV text with a fixed header; every field is written with shortest round-trip formatting.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            text: format!("{header}\n"),
            columns: header.split(',').count(),
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let fields: Vec<String> = fields.into_iter().map(Into::into).collect();
        debug_assert_eq!(fields.len(), self.columns, "CSV row width");
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Header fragment `x_1,...,x_d`.
pub fn coord_header(d: usize) -> String {
    (1..=d).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(",")
}

pub fn coords(x: &Vector) -> impl Iterator<Item = String> + '_ {
    x.iter().map(|v| f(*v))
}

/// Independent deterministic stream `stream` of the run's seed.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn uniform_point(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-half_width..=half_width)))
}

pub fn seed(params: &Params) -> Result<u64> {
    params.config().seed()
}

pub fn positive(params: &Params, key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(params.violation(key, &format!("{key} must be positive")))
    }
}

/// Worst-case summary of a list of `(value, threshold)` comparisons.
pub fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Runs `jobs` on scoped threads and returns their results in input order.
pub fn parallel_map<T, R, F>(items: &[T], job: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = items.iter().map(|item| s.spawn(|| job(item))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}
