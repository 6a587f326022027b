//! Gauss-Legendre rules on the unit interval `[0, 1]`.

/// Nodes and weights of an `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

const G1_P: [f64; 1] = [0.5];
const G1_W: [f64; 1] = [1.0];

const G2_P: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
const G2_W: [f64; 2] = [0.5, 0.5];

const G3_P: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const G3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

const G4_P: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const G4_W: [f64; 4] = [
    0.173_927_422_568_726_9,
    0.326_072_577_431_273_1,
    0.326_072_577_431_273_1,
    0.173_927_422_568_726_9,
];

const G5_P: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332_0,
];
const G5_W: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

impl GaussRule {
    /// Returns the `n`-point rule; `n` must lie in `1..=5`.
    pub fn new(n: usize) -> Self {
        match n {
            1 => GaussRule { points: &G1_P, weights: &G1_W },
            2 => GaussRule { points: &G2_P, weights: &G2_W },
            3 => GaussRule { points: &G3_P, weights: &G3_W },
            4 => GaussRule { points: &G4_P, weights: &G4_W },
            5 => GaussRule { points: &G5_P, weights: &G5_W },
            _ => panic!("Gauss rule with {n} points is not tabulated"),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterates `(x, w)` pairs mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(&p, &w)| (a + h * p, h * w))
    }
}
