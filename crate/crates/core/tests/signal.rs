use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tactile_loco::geometry::ForceMap;
use tactile_loco::grid::{BinaryMap, Grid};
use tactile_loco::signal::{
    binarize, delay_stream, flip_noise, lag_ticks, read_stream, write_stream, DelayBuffer, PipelineConfig,
    SignalPipeline, TactileFrame,
};

fn force_from(values: Vec<f64>) -> ForceMap {
    ForceMap {
        values: Grid::from_vec(17, 13, values),
        no_support: false,
    }
}

/// Counts flips over `frames` copies of a constant map.
fn count_flips(fill: u8, frames: usize, rate: f64, seed: u64) -> (usize, usize) {
    let cfg = PipelineConfig {
        flip_rate: rate,
        ..PipelineConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = TactileFrame::new(Grid::from_vec(17, 13, vec![fill; 221]), 0.0);
    let mut flips = 0;
    for _ in 0..frames {
        let out = flip_noise(&src, &cfg, &mut rng);
        flips += out.map.as_slice().iter().filter(|&&v| v != fill).count();
    }
    (flips, frames * 221)
}

#[test]
fn flip_count_is_binomial() {
    for rate in [0.001, 0.005, 0.05, 0.2] {
        let (k, n) = count_flips(0, 2_000, rate, 3);
        let mean = n as f64 * rate;
        let sd = (n as f64 * rate * (1.0 - rate)).sqrt();
        assert!((k as f64 - mean).abs() < 5.0 * sd, "rate {rate}: {k} flips vs {mean} ± {sd}");
    }
}

#[test]
fn flips_symmetric_for_ones_and_zeros() {
    let (k0, n) = count_flips(0, 2_000, 0.01, 9);
    let (k1, _) = count_flips(1, 2_000, 0.01, 9);
    // one uniform per entry: identical draws flip the same positions
    assert_eq!(k0, k1);
    let sd = (n as f64 * 0.01 * 0.99).sqrt();
    assert!((k0 as f64 - n as f64 * 0.01).abs() < 5.0 * sd);
}

#[test]
fn zero_rate_never_flips() {
    assert_eq!(count_flips(1, 100, 0.0, 1).0, 0);
}

proptest! {
    #[test]
    fn binarize_is_idempotent(values in prop::collection::vec(0.0..0.2f64, 221), thr in 0.0..0.15f64) {
        let cfg = PipelineConfig { force_threshold: thr, ..PipelineConfig::default() };
        let once = binarize(&force_from(values), &cfg, 0.0);
        let back: Vec<f64> = once.map.as_slice().iter().map(|&b| b as f64 * (thr + 1.0)).collect();
        let twice = binarize(&force_from(back), &cfg, 0.0);
        prop_assert_eq!(once.map, twice.map);
    }

    #[test]
    fn lag_is_ceil_of_delay(d in 0.0..0.2f64, rate in prop::sample::select(vec![20.0, 40.0, 50.0, 100.0])) {
        let cfg = PipelineConfig { sample_rate: rate, min_delay: 0.0, max_delay: 0.2, ..PipelineConfig::default() };
        let mut buf = DelayBuffer::with_delay(&cfg, 17, 13, d);
        let expected = lag_ticks(d, rate) as usize;
        prop_assert_eq!(expected as f64, (d * rate - 1e-9).ceil().max(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut last_seen: Option<usize> = None;
        for k in 0..60usize {
            let mut m = BinaryMap::new(17, 13);
            for bit in 0..8 {
                m.as_mut_slice()[bit] = ((k >> bit) & 1) as u8;
            }
            buf.push(TactileFrame::new(m, k as f64 / rate));
            let out = buf.query(k as f64 / rate, &mut rng);
            if k < expected {
                prop_assert!(out.cold_start);
                continue;
            }
            prop_assert!(!out.cold_start);
            let idx: usize = (0..8).map(|b| (out.map.as_slice()[b] as usize) << b).sum();
            prop_assert_eq!(k - idx, expected);
            if let Some(prev) = last_seen {
                prop_assert!(idx >= prev);
            }
            last_seen = Some(idx);
        }
    }

    #[test]
    fn per_frame_delay_preserves_order(seed in any::<u64>()) {
        let cfg = PipelineConfig { per_frame_delay: true, ..PipelineConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = DelayBuffer::new(&cfg, 17, 13, &mut rng);
        let frames: Vec<TactileFrame> = (0..100usize)
            .map(|k| {
                let mut m = BinaryMap::new(17, 13);
                for bit in 0..8 {
                    m.as_mut_slice()[bit] = ((k >> bit) & 1) as u8;
                }
                TactileFrame::new(m, k as f64 / 40.0)
            })
            .collect();
        let out = delay_stream(&frames, &mut buf, &mut rng);
        let mut last = 0;
        for (k, f) in out.iter().enumerate() {
            if f.cold_start {
                continue;
            }
            let idx: usize = (0..8).map(|b| (f.map.as_slice()[b] as usize) << b).sum();
            prop_assert!(idx <= k);
            prop_assert!(k - idx <= lag_ticks(cfg.max_delay, 40.0) as usize);
            // newer delays may be shorter, never pointing before a shown frame by more than the delay spread
            prop_assert!(idx + lag_ticks(cfg.max_delay - cfg.min_delay, 40.0) as usize >= last);
            last = last.max(idx);
        }
    }

    #[test]
    fn pipeline_is_deterministic(seed in any::<u64>()) {
        let cfg = PipelineConfig::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pipe = SignalPipeline::new(&cfg, 17, 13, &mut rng);
            (0..50)
                .map(|k| {
                    let v: Vec<f64> = (0..221).map(|i| if (i + k) % 7 == 0 { 0.3 } else { 0.0 }).collect();
                    pipe.step(&force_from(v), k as f64 / 40.0, &mut rng)
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn stream_csv_round_trips(bits in prop::collection::vec(prop::collection::vec(0u8..2, 221), 1..20)) {
        let frames: Vec<TactileFrame> = bits
            .into_iter()
            .enumerate()
            .map(|(k, b)| TactileFrame::new(Grid::from_vec(17, 13, b), k as f64 * 0.025))
            .collect();
        let mut buf = Vec::new();
        write_stream(&mut buf, &frames, 17, 13).unwrap();
        prop_assert!(!buf.contains(&b'\r'));
        let back = read_stream(buf.as_slice(), 17, 13).unwrap();
        prop_assert_eq!(back, frames);
    }
}
