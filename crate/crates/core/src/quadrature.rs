//! Adaptive Gauss–Kronrod (10/21) quadrature.
//!
//! The integrator is vector valued: several integrands sharing the same
//! nodes are integrated in one pass, and an interval is accepted only when
//! every component meets its own tolerance.

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_410_460,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const MAX_INTERVALS: usize = 4000;

/// Absolute and relative accuracy goals; an estimate is accepted when its
/// error is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn bound(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-9)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    res_abs: [f64; N],
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn kronrod21<const N: usize, F>(f: &F, a: f64, b: f64) -> Segment<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut fv = [[0.0; N]; 21];
    fv[10] = f(center);
    for j in 0..10 {
        let dx = half * XGK[j];
        fv[j] = f(center - dx);
        fv[20 - j] = f(center + dx);
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut abs_value = [0.0; N];
    for k in 0..N {
        let mut res_k = WGK[10] * fv[10][k];
        let mut res_g = 0.0;
        let mut res_abs = WGK[10] * fv[10][k].abs();
        for j in 0..10 {
            let pair = fv[j][k] + fv[20 - j][k];
            res_k += WGK[j] * pair;
            res_abs += WGK[j] * (fv[j][k].abs() + fv[20 - j][k].abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * pair;
            }
        }
        let mean = 0.5 * res_k;
        let mut res_asc = WGK[10] * (fv[10][k] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv[j][k] - mean).abs() + (fv[20 - j][k] - mean).abs());
        }
        value[k] = res_k * half;
        abs_value[k] = res_abs * half.abs();
        error[k] = rescale_error(
            (res_k - res_g) * half,
            res_abs * half.abs(),
            res_asc * half.abs(),
        );
    }
    Segment {
        a,
        b,
        value,
        error,
        res_abs: abs_value,
    }
}

/// Integrates a vector-valued function over `[a, b]`.
pub fn integrate_vec<const N: usize, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    integrate_vec_with_breaks(f, &[a, b], tol)
}

/// Like [`integrate_vec`], but starts from the given ascending breakpoints.
pub fn integrate_vec_with_breaks<const N: usize, F>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if breaks.len() < 2 {
        return Err(Error::domain("quadrature needs at least two breakpoints"));
    }
    if breaks.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("quadrature bounds must be finite"));
    }
    if breaks.windows(2).all(|w| w[0] == w[1]) {
        return Ok(Estimate {
            value: [0.0; N],
            error: [0.0; N],
            evaluations: 0,
        });
    }

    let mut segments: Vec<Segment<N>> = breaks
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| kronrod21(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 21 * segments.len();

    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        let mut total_abs = [0.0; N];
        for s in &segments {
            for k in 0..N {
                total[k] += s.value[k];
                total_err[k] += s.error[k];
                total_abs[k] += s.res_abs[k];
            }
        }
        // components that cancel to ~0 can only be resolved to round-off of ∫|f|
        let bounds: [f64; N] =
            std::array::from_fn(|k| tol.bound(total[k]).max(100.0 * f64::EPSILON * total_abs[k]));
        if (0..N).all(|k| total_err[k] <= bounds[k]) {
            return Ok(Estimate {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if segments.len() >= MAX_INTERVALS {
            let worst = (0..N)
                .map(|k| total_err[k] / bounds[k].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            return Err(Error::Quadrature(format!(
                "{} subintervals on [{}, {}], error/tolerance = {worst:.3e}",
                segments.len(),
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }

        let score = |s: &Segment<N>| -> f64 {
            (0..N)
                .map(|k| s.error[k] / bounds[k].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        };
        let (idx, _) = segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, score(s)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });

        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be subdivided further",
                seg.a, seg.b
            )));
        }
        segments.push(kronrod21(&f, seg.a, mid));
        segments.push(kronrod21(&f, mid, seg.b));
        evaluations += 42;
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x| [f(x)], a, b, tol).map(|e| e.value[0])
}
