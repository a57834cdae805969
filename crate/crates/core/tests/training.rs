use mmsynth::image::stack_axial;
use mmsynth::preprocess::{prepare_case, NormalizationMode};
use mmsynth::rng::stream_rng;
use mmsynth::synthetic::{synthetic_case, SyntheticSpec};
use mmsynth::train::{make_batch_from_images, TrainConfig, Trainer};
use mmsynth::Image;

const OVERFIT_LR: f64 = 1e-3;

fn overfit_slices(count: usize, side: usize) -> Vec<Image<f32>> {
    let spec = SyntheticSpec::new(2, [side, side, count], 3);
    (0..2)
        .flat_map(|p| {
            let prepared = prepare_case(&synthetic_case(p, &spec), NormalizationMode::PerModality).unwrap();
            let range = prepared.slice_indices(true);
            range
                .map(|z| stack_axial(&prepared.case.volumes, z))
                .collect::<Vec<_>>()
        })
        .filter(|img| img.data().iter().any(|&v| v != 0.0))
        .take(count)
        .collect()
}

#[test]
fn overfit_reduces_reconstruction_loss() {
    let slices = overfit_slices(16, 64);
    assert_eq!(slices.len(), 16);
    let config = TrainConfig {
        generator_width: 8,
        discriminator_width: 8,
        batch_size: 4,
        lr_g: OVERFIT_LR,
        lr_d: OVERFIT_LR,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::<f32>::new(config).unwrap();
    let mut rng = stream_rng(1, 99);
    let mut rec = Vec::new();
    let start = std::time::Instant::now();
    for step in 0..200 {
        let k = (step % 4) * 4;
        let batch = make_batch_from_images(slices[k..k + 4].to_vec(), true, 3, &mut rng).unwrap();
        rec.push(trainer.train_step(&batch).unwrap().rec_loss);
    }
    let first: f64 = rec[..10].iter().sum::<f64>() / 10.0;
    let last: f64 = rec[190..].iter().sum::<f64>() / 10.0;
    eprintln!("first {first:.4} last {last:.4} in {:?}", start.elapsed());
    assert!(last <= 0.5 * first, "first {first} last {last}");
}
