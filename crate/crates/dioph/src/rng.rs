//! Counter-based random numbers: each draw is a pure hash of
//! (seed, stream, index), so parallel and serial runs produce identical
//! streams and any sample can be regenerated in isolation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, stream: 0 }
    }

    /// Independent substream (shift draws vs sample draws etc).
    pub fn stream(&self, stream: u64) -> Self {
        CounterRng {
            seed: self.seed,
            stream,
        }
    }

    pub fn bits(&self, index: u64) -> u64 {
        let mixed = self
            .seed
            .wrapping_add(self.stream.wrapping_mul(0xD129_0D3B_53C7_5FDD))
            .wrapping_add(index.wrapping_mul(GOLDEN));
        splitmix64(mixed)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn unit(&self, index: u64) -> f64 {
        (self.bits(index) >> 11) as f64 / (1u64 << 53) as f64
    }
}
