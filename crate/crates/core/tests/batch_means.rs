use greenlb::engine::generate_interarrival;
use greenlb::metrics::batch_means;
use greenlb::rng::{arrival_stream, mix_seed};

#[test]
fn intervals_cover_the_true_mean() {
    let mut covered = 0;
    for rep in 0..100u64 {
        let mut rng = arrival_stream(mix_seed(&[77, rep]));
        let samples: Vec<f64> = (0..20 * 5000)
            .map(|_| generate_interarrival(&mut rng, 1.0))
            .collect();
        let bm = batch_means(&samples, 20).unwrap();
        if (bm.mean - 1.0).abs() <= bm.half_width {
            covered += 1;
        }
    }
    assert!(covered >= 90, "coverage {covered}/100");
}

#[test]
fn remainder_is_dropped() {
    let samples: Vec<f64> = (1..=11).map(f64::from).collect();
    let bm = batch_means(&samples, 2).unwrap();
    // batches [1..5] and [6..10]; 11 is left out
    assert_eq!(bm.mean, 5.5);
    assert_eq!(bm.batches, 2);
}
