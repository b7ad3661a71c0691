use prosim_neural::{mean_absolute_error, train, Activation, LayerSpec, NetworkSpec, Sample, TrainConfig, TrainedModel};
use proptest::prelude::*;

#[test]
fn overfits_a_single_repeated_sample() {
    let spec = NetworkSpec::new(
        3,
        vec![LayerSpec::lstm(8, Activation::Tanh), LayerSpec::dense(1, Activation::Linear)],
    )
    .unwrap();
    let sample = Sample::new(vec![vec![0.2, 0.4, 0.1], vec![0.9, 0.0, 0.3]], vec![0.7]);
    let data = vec![sample; 20];
    let cfg = TrainConfig { epochs: 200, batch_size: 4, patience: 0, seed: 3, ..Default::default() };
    let model = train(TrainedModel::init(spec, 1).unwrap(), &data, &[], &cfg).unwrap();
    let mae = mean_absolute_error(&model, &data).unwrap();
    assert!(mae < 0.01, "final MAE {mae}");
}

#[test]
fn convex_linear_case_does_not_get_worse() {
    let spec = NetworkSpec::new(2, vec![LayerSpec::dense(1, Activation::Linear)]).unwrap();
    let data: Vec<Sample> = (0..40)
        .map(|i| {
            let x = i as f64 / 40.0;
            Sample::new(vec![vec![x, 1.0 - x]], vec![2.0 * x - 0.5])
        })
        .collect();
    let model = TrainedModel::init(spec, 5).unwrap();
    let initial = mean_absolute_error(&model, &data).unwrap();
    let cfg = TrainConfig { epochs: 50, batch_size: 8, patience: 0, ..Default::default() };
    let trained = train(model, &data, &[], &cfg).unwrap();
    let last = mean_absolute_error(&trained, &data).unwrap();
    assert!(last <= initial, "{last} > {initial}");
}

#[test]
fn dropout_training_is_reproducible() {
    let spec = NetworkSpec::new(
        2,
        vec![
            LayerSpec::gru(6, Activation::Tanh).with_dropout(0.2),
            LayerSpec::dense(1, Activation::Linear),
        ],
    )
    .unwrap();
    let data: Vec<Sample> =
        (0..12).map(|i| Sample::new(vec![vec![i as f64 / 12.0, 0.5]; 3], vec![0.1 * i as f64])).collect();
    let cfg = TrainConfig { epochs: 4, batch_size: 5, patience: 2, seed: 77, ..Default::default() };
    let a = train(TrainedModel::init(spec.clone(), 2).unwrap(), &data, &data[..3], &cfg).unwrap();
    let b = train(TrainedModel::init(spec, 2).unwrap(), &data, &data[..3], &cfg).unwrap();
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.history, b.history);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialization_round_trip_is_bit_exact(seed in 0u64..1000, units in 1usize..6, steps in 1usize..5) {
        let spec = NetworkSpec::new(
            3,
            vec![LayerSpec::gru(units, Activation::Selu), LayerSpec::dense(2, Activation::Linear)],
        ).unwrap();
        let model = TrainedModel::init(spec, seed).unwrap();
        let loaded = TrainedModel::load(model.to_bytes().as_slice()).unwrap();
        let window: Vec<Vec<f64>> = (0..steps).map(|t| vec![t as f64 * 0.1, -0.3, 0.7]).collect();
        let a = model.forward(&window).unwrap();
        let b = loaded.forward(&window).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
