//! Daubechies scaling (lowpass) filters, normalized so that `Σ h = √2`.

pub const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

pub const DB2: [f64; 4] = [
    0.482_962_913_144_534_143_37,
    0.836_516_303_737_807_905_58,
    0.224_143_868_042_013_381_03,
    -0.129_409_522_551_260_381_17,
];

pub const DB3: [f64; 6] = [
    0.332_670_552_950_082_616,
    0.806_891_509_311_092_576_49,
    0.459_877_502_118_491_570_1,
    -0.135_011_020_010_254_588_7,
    -0.085_441_273_882_026_661_693,
    0.035_226_291_885_709_536_603,
];

pub const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

/// `Σ_k (k+1)·|h_k|`, recorded per family to catch transcription errors.
pub const CHECKSUMS: [(&str, f64); 4] = [
    ("haar", 2.121_320_343_559_643),
    ("db2", 3.346_065_214_951_231_6),
    ("db3", 4.504_694_278_693_151_4),
    ("db4", 5.099_830_981_429_322_6),
];

pub fn checksum(taps: &[f64]) -> f64 {
    taps.iter()
        .enumerate()
        .map(|(k, h)| (k as f64 + 1.0) * h.abs())
        .sum()
}
