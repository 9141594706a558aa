use nfhrtf::acquisition::{JitterConfig, ReversedExcitation, Segment};
use nfhrtf::estimator::{estimate_channel, visits_by_bin};
use nfhrtf::{
    acquire, estimate_session, gen_excitation, select_best_visits, simulate_recording, synth_hrir, synth_hrir_set,
    BinauralRecording, Direction, DirectionGrid, HeadModel, HrirSet, NlmsParams, SessionConfig, Trajectory,
};

const FS: u32 = 48_000;

fn truth<T: nfhrtf::Real>() -> HrirSet<T> {
    synth_hrir_set(&HeadModel::default(), &DirectionGrid::new(1.0).unwrap(), 0.4, FS, 256).unwrap()
}

fn jittery(dwell_ms: f64, seed: u64) -> SessionConfig {
    SessionConfig {
        dwell_ms,
        seed,
        jitter: JitterConfig {
            enabled: true,
            yaw_std_deg: 1.0,
            update_interval_ms: 10.0,
        },
        ..SessionConfig::default()
    }
}

#[test]
fn stationary_identification_converges() {
    let n = 24_000;
    let az = 40.0;
    let truth = truth::<f64>();
    let trajectory = Trajectory {
        segments: vec![Segment {
            start_sample: 0,
            end_sample: n as u64,
            instantaneous_azimuth_deg: az,
            grid_bin: Direction::horizontal(az).unwrap(),
            paused: false,
        }],
    };
    let x = gen_excitation::<f64>(3, n, FS).unwrap();
    let (l, _) = simulate_recording(&truth, &trajectory, &x, f64::INFINITY, 3).unwrap();
    let xr = ReversedExcitation::new(&x.samples, 256);
    let visits = estimate_channel(&l, &xr, &trajectory, &NlmsParams::default(), |_, _| {}).unwrap();
    assert_eq!(visits.len(), 1);
    assert!(visits[0].nmse < 1e-3, "nmse {}", visits[0].nmse);
    let (want, _) = synth_hrir::<f64>(&HeadModel::default(), Direction::horizontal(az).unwrap(), 0.4, FS, 256).unwrap();
    let err = visits[0].filter.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-2, "max tap error {err}");
}

#[test]
fn ears_are_processed_independently() {
    let rec = acquire(&truth::<f64>(), &jittery(30.0, 11)).unwrap();
    let params = NlmsParams::default();
    let both = estimate_session(&rec, &params).unwrap();
    let xr = ReversedExcitation::new(&rec.excitation.samples, params.num_taps);
    let left = estimate_channel(&rec.left, &xr, &rec.trajectory, &params, |_, _| {}).unwrap();
    assert_eq!(left, both.left);
    // corrupting the right ear leaves the left result untouched
    let mut other = rec.clone();
    other.right.samples.iter_mut().for_each(|v| *v = -3.0 * *v + 0.5);
    let again = estimate_session(&other, &params).unwrap();
    assert_eq!(again.left, both.left);
    assert_ne!(again.right, both.right);
}

#[test]
fn selection_matches_exhaustive_argmin() {
    let rec: BinauralRecording<f64> = acquire(&truth(), &jittery(60.0, 77)).unwrap();
    let est = estimate_session(&rec, &NlmsParams::default()).unwrap();
    let set = select_best_visits(&est).unwrap();
    let quality = set.quality.as_ref().unwrap();
    let mut revisited = 0;
    for (ear, visits, chosen, nmse) in [
        ("left", &est.left, &set.left, &quality.nmse_left),
        ("right", &est.right, &set.right, &quality.nmse_right),
    ] {
        let groups = visits_by_bin(visits, &est.grid).unwrap();
        for (i, group) in groups.iter().enumerate() {
            if group.len() >= 2 {
                revisited += 1;
            }
            if group.is_empty() {
                assert!(set.missing[i]);
                assert_eq!(nmse[i], None);
                continue;
            }
            let mut best = 0;
            for j in 1..group.len() {
                if group[j].nmse < group[best].nmse {
                    best = j;
                }
            }
            assert_eq!(chosen[i], group[best].filter, "{ear} bin {i}");
            assert_eq!(nmse[i], Some(group[best].nmse), "{ear} bin {i}");
        }
    }
    assert!(revisited > 0, "seeded session should revisit at least one bin");
}

#[test]
fn step_size_trace_follows_the_schedule() {
    let rec = acquire(&truth::<f64>(), &jittery(40.0, 5)).unwrap();
    let params = NlmsParams::default();
    let xr = ReversedExcitation::new(&rec.excitation.samples, params.num_taps);
    let mut trace = Vec::new();
    let visits = estimate_channel(&rec.left, &xr, &rec.trajectory, &params, |n, mu| trace.push((n, mu))).unwrap();
    let starts: std::collections::HashSet<usize> = visits.iter().map(|v| v.start_sample).collect();
    let mut prev: Option<(usize, f64)> = None;
    for &(n, mu) in &trace {
        assert!((params.mu_min..=params.mu_max).contains(&mu));
        if starts.contains(&n) {
            assert_eq!(mu, params.mu_max);
        } else if let Some((pn, pmu)) = prev {
            assert_eq!(pn + 1, n, "adaptation skipped a sample inside a visit");
            assert!(mu <= pmu);
        }
        prev = Some((n, mu));
    }
    assert_eq!(trace.len() as u64, rec.trajectory.unpaused_samples());
}

#[test]
fn single_precision_pipeline() {
    let cfg = SessionConfig {
        dwell_ms: 300.0,
        step_deg: 30.0,
        snr_db: f64::INFINITY,
        ..SessionConfig::default()
    };
    let truth = truth::<f32>();
    let rec = acquire(&truth, &cfg).unwrap();
    let set: HrirSet<f32> = select_best_visits(&estimate_session(&rec, &NlmsParams::default()).unwrap()).unwrap();
    let quality = set.quality.unwrap();
    for v in quality.nmse_left.iter().chain(&quality.nmse_right) {
        assert!(v.unwrap() < 1e-3, "nmse {v:?}");
    }
    assert!(set.left.iter().flatten().all(|v| v.is_finite()));
}
