mod common;

use chrono::Duration;
use proptest::prelude::*;
use prosim::evaluation::{cycle_time_mae, emd_histograms, emd_timestamps, hour_of_week_histogram, TimestampSelection};
use prosim::eventlog::{Event, EventLog, Trace};
use prosim::simulation::cfls;

use common::random_log;

fn shifted(log: &EventLog, by: Duration) -> EventLog {
    let traces = log
        .traces()
        .iter()
        .map(|t| {
            let events = t.events().iter().map(|e| Event::new(e.activity.clone(), e.start + by, e.end + by)).collect();
            Trace::new(t.case_id(), events).unwrap()
        })
        .collect();
    EventLog::new(traces).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn a_log_against_itself_scores_perfectly(seed in any::<u64>()) {
        let log = random_log(seed);
        prop_assert_eq!(cycle_time_mae(&log, &log).unwrap().mae_secs, 0.0);
        prop_assert_eq!(emd_timestamps(&log, &log), 0.0);
        let s = log.sequences();
        prop_assert_eq!(cfls(&s, &s).unwrap(), 1.0);
    }

    #[test]
    fn metrics_are_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (random_log(a), random_log(b));
        let emd = emd_timestamps(&x, &y);
        prop_assert!((0.0..=1.0).contains(&emd));
        prop_assert!((emd - emd_timestamps(&y, &x)).abs() < 1e-12);
        let mae = cycle_time_mae(&x, &y).unwrap().mae_secs;
        prop_assert!(mae >= 0.0);
        prop_assert!((mae - cycle_time_mae(&y, &x).unwrap().mae_secs).abs() < 1e-9);
        let c = cfls(&x.sequences(), &y.sequences()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn whole_week_shifts_keep_the_histogram(seed in any::<u64>(), weeks in -3i64..=3) {
        let log = random_log(seed);
        let moved = shifted(&log, Duration::weeks(weeks));
        prop_assert_eq!(emd_timestamps(&log, &moved), 0.0);
        prop_assert_eq!(cycle_time_mae(&log, &moved).unwrap().mae_secs, 0.0);
    }

    #[test]
    fn histograms_are_distributions(seed in any::<u64>()) {
        let log = random_log(seed);
        for sel in [TimestampSelection::StartAndEnd, TimestampSelection::StartOnly] {
            let h = hour_of_week_histogram(&log, sel);
            prop_assert_eq!(h.len(), 168);
            prop_assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn point_masses_are_their_normalised_bin_distance(i in 0usize..168, j in 0usize..168) {
        let mut a = vec![0.0; 168];
        let mut b = vec![0.0; 168];
        a[i] = 1.0;
        b[j] = 1.0;
        let expected = i.abs_diff(j) as f64 / 167.0;
        prop_assert!((emd_histograms(&a, &b) - expected).abs() < 1e-12);
    }
}
