use nfhrtf::metrics::{itd_lag, SD_FLOOR_DB};
use nfhrtf::{magnitude_spectrum, spectral_difference, ErbBank};
use proptest::prelude::*;

const FS: u32 = 48_000;
const NFFT: usize = 256;

fn response(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn naive_magnitude(h: &[f64], nfft: usize) -> Vec<f64> {
    (0..=nfft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in h.iter().enumerate() {
                let w = -2.0 * std::f64::consts::PI * (k * n) as f64 / nfft as f64;
                re += v * w.cos();
                im += v * w.sin();
            }
            re.hypot(im)
        })
        .collect()
}

fn oracle_sd_db(reference: &[f64], measured: &[f64], nfft: usize) -> f64 {
    let (q, bw_min) = (9.265, 24.7);
    let df = FS as f64 / nfft as f64;
    let mut ratios = Vec::new();
    for k in 5..=39 {
        let e = (k as f64 / q).exp();
        let (fc, bw) = (q * bw_min * (e - 1.0), bw_min * e);
        let bins: Vec<usize> = (0..=nfft / 2)
            .filter(|&f| (f as f64 * df - fc).abs() <= 0.5 * bw + 1e-9)
            .collect();
        let bins = if bins.is_empty() { vec![(fc / df).round() as usize] } else { bins };
        let err: f64 = bins.iter().map(|&f| (reference[f] - measured[f]).powi(2)).sum();
        let energy: f64 = bins.iter().map(|&f| reference[f].powi(2)).sum();
        ratios.push(err / energy);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    (10.0 * mean.log10()).max(SD_FLOOR_DB)
}

fn oracle_itd_lag(l: &[f64], r: &[f64]) -> i64 {
    let ml = l.iter().sum::<f64>() / l.len() as f64;
    let mr = r.iter().sum::<f64>() / r.len() as f64;
    let n = l.len() as i64;
    let mut best: Option<(f64, i64)> = None;
    for tau in -(n - 1)..n {
        let mut c = 0.0;
        for i in 0..n {
            let j = i - tau;
            if (0..n).contains(&j) {
                c += (l[i as usize] - ml) * (r[j as usize] - mr);
            }
        }
        let better = match best {
            None => true,
            Some((bc, bt)) => c > bc || (c == bc && (tau.abs(), tau) < (bt.abs(), bt)),
        };
        if better {
            best = Some((c, tau));
        }
    }
    best.unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_matches_naive_dft(h in response(64)) {
        let fast = magnitude_spectrum(&h, NFFT).unwrap();
        for (a, b) in fast.iter().zip(naive_magnitude(&h, NFFT)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b));
        }
    }

    #[test]
    fn sd_matches_oracle(a in response(64), b in response(64)) {
        let (ra, rb) = (naive_magnitude(&a, NFFT), naive_magnitude(&b, NFFT));
        let got = spectral_difference(&ra, &rb, &ErbBank::default(), FS).unwrap();
        prop_assert!((got.total_db - oracle_sd_db(&ra, &rb, NFFT)).abs() <= 1e-9);
    }

    #[test]
    fn sd_joint_scale_invariance(a in response(64), b in response(64), c in 1e-3f64..1e3) {
        let bank = ErbBank::default();
        let ra = magnitude_spectrum(&a, NFFT).unwrap();
        let rb = magnitude_spectrum(&b, NFFT).unwrap();
        let sa: Vec<f64> = ra.iter().map(|v| c * v).collect();
        let sb: Vec<f64> = rb.iter().map(|v| c * v).collect();
        let one = spectral_difference(&ra, &rb, &bank, FS).unwrap();
        let two = spectral_difference(&sa, &sb, &bank, FS).unwrap();
        prop_assert!((one.total_db - two.total_db).abs() <= 1e-9);
    }

    #[test]
    fn band_and_total_agree(a in response(64), b in response(64)) {
        let ra = magnitude_spectrum(&a, NFFT).unwrap();
        let rb = magnitude_spectrum(&b, NFFT).unwrap();
        let sd = spectral_difference(&ra, &rb, &ErbBank::default(), FS).unwrap();
        prop_assert_eq!(sd.per_band_db.len(), 35);
        let mean = sd.per_band_ratio.iter().sum::<f64>() / 35.0;
        prop_assert!((sd.total_db - (10.0 * mean.log10()).max(SD_FLOOR_DB)).abs() <= 1e-12);
        for (db, r) in sd.per_band_db.iter().zip(&sd.per_band_ratio) {
            prop_assert!((db - (10.0 * r.log10()).max(SD_FLOOR_DB)).abs() <= 1e-12);
        }
    }

    #[test]
    fn itd_matches_brute_force(l in response(48), r in response(48)) {
        prop_assert_eq!(itd_lag(&l, &r, None).unwrap(), oracle_itd_lag(&l, &r));
    }

    #[test]
    fn itd_is_antisymmetric(l in response(48), r in response(48)) {
        prop_assert_eq!(itd_lag(&l, &r, None).unwrap(), -itd_lag(&r, &l, None).unwrap());
    }

    #[test]
    fn itd_ignores_positive_rescaling(l in response(48), r in response(48), i in -6i32..6, j in -6i32..6) {
        let (a, b) = (2f64.powi(i), 2f64.powi(j));
        let sl: Vec<f64> = l.iter().map(|v| a * v).collect();
        let sr: Vec<f64> = r.iter().map(|v| b * v).collect();
        prop_assert_eq!(itd_lag(&sl, &sr, None).unwrap(), itd_lag(&l, &r, None).unwrap());
    }

    #[test]
    fn delayed_copy_matches_oracle(h in response(40), d in 1usize..20) {
        let mut l = h.clone();
        l.resize(64, 0.0);
        let mut r = vec![0.0; d];
        r.extend(&h);
        r.resize(64, 0.0);
        prop_assert_eq!(itd_lag(&l, &r, None).unwrap(), oracle_itd_lag(&l, &r));
    }
}
