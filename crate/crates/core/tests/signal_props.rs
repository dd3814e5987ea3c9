use blinkscribe_core::protocol::DataRow;
use blinkscribe_core::signal::{BlinkDetector, DetectorConfig};
use proptest::prelude::*;

fn rows() -> impl Strategy<Value = Vec<(u64, DataRow)>> {
    prop::collection::vec(
        (
            0u64..400,
            prop_oneof![
                3 => any::<u8>().prop_map(DataRow::BlinkStrength),
                1 => (0u8..=200).prop_map(DataRow::PoorSignal),
                1 => any::<i16>().prop_map(DataRow::RawSample),
            ],
        ),
        0..200,
    )
    .prop_map(|steps| {
        let mut t = 0;
        steps
            .into_iter()
            .map(|(dt, row)| {
                t += dt;
                (t, row)
            })
            .collect()
    })
}

fn run(seq: &[(u64, DataRow)], threshold: u8, refractory_ms: u64) -> Vec<u64> {
    let mut d = BlinkDetector::new(DetectorConfig {
        threshold,
        refractory_ms,
    });
    seq.iter()
        .filter_map(|(t, r)| d.observe(r, *t).unwrap())
        .map(|e| e.t_ms)
        .collect()
}

proptest! {
    #[test]
    fn events_bounded_by_strong_rows(seq in rows(), threshold: u8, refractory in 0u64..2000) {
        let events = run(&seq, threshold, refractory);
        let strong = seq.iter().filter(|(_, r)| matches!(r, DataRow::BlinkStrength(s) if *s > threshold)).count();
        prop_assert!(events.len() <= strong);
        prop_assert!(events.windows(2).all(|w| w[1] - w[0] >= refractory));
    }

    #[test]
    fn zero_refractory_is_memoryless(seq in rows(), threshold: u8) {
        let expected: Vec<u64> = seq
            .iter()
            .filter(|(_, r)| matches!(r, DataRow::BlinkStrength(s) if *s > threshold))
            .map(|(t, _)| *t)
            .collect();
        prop_assert_eq!(run(&seq, threshold, 0), expected);
    }

    #[test]
    fn raising_threshold_never_adds_events(seq in rows(), a: u8, b: u8, refractory in 0u64..2000) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(run(&seq, hi, refractory).len() <= run(&seq, lo, refractory).len());
    }
}
