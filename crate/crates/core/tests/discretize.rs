use delayprop_core::BinScheme;
use proptest::prelude::*;

#[test]
fn placement_and_midpoints() {
    let s = BinScheme::default_delay();
    let k = s.bin_index(17.0).unwrap();
    assert_eq!(s.bounds(k).unwrap(), (15.0, 30.0));
    assert_eq!(s.bin_index(15.0).unwrap(), k);
    assert_eq!(s.midpoint(k).unwrap(), 22.5);
    assert_eq!(s.midpoint(s.bin_index(0.0).unwrap()).unwrap(), 7.5);
    let top = s.len() - 1;
    assert_eq!(s.bin_index(130.0).unwrap(), top);
    assert_eq!(s.midpoint(top).unwrap(), 127.5);
    assert_eq!(s.label(top).unwrap(), s.labels()[top]);
}

#[test]
fn closed_scheme_rejects_out_of_range() {
    let s = BinScheme::new(vec![0.0, 1.0, 2.0], false, false).unwrap();
    assert!(s.bin_index(-0.1).is_err());
    assert!(s.bin_index(2.0).is_err());
    assert!(BinScheme::new(vec![0.0, 1.0], false, false).is_err());
    assert!(BinScheme::new(vec![0.0, 0.0, 1.0], true, true).is_err());
}

#[test]
fn density_examples() {
    let s = BinScheme::density(-10.0, 10.0).unwrap();
    let d = s.empirical_density(&[3.0]).unwrap();
    assert_eq!(d.iter().filter(|&&p| p == 1.0).count(), 1);
    let values: Vec<f64> = (0..100).map(|i| 4.0 + i as f64 * 0.0199).collect();
    let d = s.empirical_density(&values).unwrap();
    assert_eq!(d[s.bin_index(4.0).unwrap()], 1.0);
}

fn scheme() -> impl Strategy<Value = BinScheme> {
    (prop::collection::vec(0.1f64..30.0, 1..12), -100.0f64..100.0).prop_map(|(widths, lo)| {
        let mut edges = vec![lo];
        for w in widths {
            edges.push(edges.last().unwrap() + w);
        }
        BinScheme::new(edges, true, true).unwrap()
    })
}

proptest! {
    #[test]
    fn midpoint_round_trip(s in scheme()) {
        let lo = usize::from(s.lower_open());
        let hi = s.len() - usize::from(s.upper_open());
        for k in lo..hi {
            prop_assert_eq!(s.bin_index(s.midpoint(k).unwrap()).unwrap(), k);
        }
        let mids = s.midpoints();
        prop_assert!(mids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn open_scheme_partitions_the_line(s in scheme(), x in -1e6f64..1e6) {
        let k = s.bin_index(x).unwrap();
        let (a, b) = s.bounds(k).unwrap();
        prop_assert!(a <= x && x < b);
        let hits = (0..s.len()).filter(|&j| { let (a, b) = s.bounds(j).unwrap(); a <= x && x < b }).count();
        prop_assert_eq!(hits, 1);
    }

    #[test]
    fn density_sums_to_one(values in prop::collection::vec(-50.0f64..49.9, 1..300)) {
        let s = BinScheme::density(-50.0, 50.0).unwrap();
        let d = s.empirical_density(&values).unwrap();
        prop_assert!(d.iter().all(|&p| p >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
