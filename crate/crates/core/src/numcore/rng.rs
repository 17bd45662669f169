/// Counter-based pseudo random generator.
///
/// Draw `i` (zero-based) of a stream seeded with `s` is
/// `splitmix64_finalize(s + (i + 1) * 0x9E37_79B9_7F4A_7C15)` with wrapping
/// arithmetic, i.e. the SplitMix64 sequence. Uniform reals take the top 53
/// bits: `u = (bits >> 11) * 2^-53`, which lies in `[0, 1)`.
///
/// Normal draws use the Box–Muller transform on two consecutive uniforms
/// `u1, u2`: `r = sqrt(-2 ln(1 - u1))`, yielding `r cos(2 pi u2)` first and
/// `r sin(2 pi u2)` on the following call. `ln`, `cos` and `sin` come from
/// `libm`, so streams are bit-identical on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Derives an independent stream, e.g. one per parameter block.
    pub fn fork(&mut self, tag: u64) -> Rng {
        let base = self.next_u64();
        Rng::new(mix(base ^ mix(tag.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; callers guarantee `lo < hi`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let x = lo + (hi - lo) * self.next_f64();
            // rounding can land exactly on `hi`
            if x < hi {
                return x;
            }
        }
    }

    /// Uniform integer in `0..n`; `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal draw.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(1.0 - u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
