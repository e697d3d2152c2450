use crib_bse::fim::identity_backgrounds;
use crib_bse::simulate::io::{decode, encode, DatasetFormat};
use crib_bse::simulate::empirical_isr;
use crib_bse::{crib_model, fit, generate, CribSetup, FitOptions, GgdParams, MixtureConfig, ModelKind, ThetaCvx};

fn config(seed: u64) -> MixtureConfig {
    MixtureConfig::random_geometry(4, 8000, 8, GgdParams::new(0.4, 0.2).unwrap(), 0.3, seed).unwrap()
}

#[test]
fn datasets_survive_both_encodings() {
    let cfg = config(5);
    let data = generate(&cfg).unwrap();
    for format in [DatasetFormat::Json, DatasetFormat::Binary] {
        let bytes = encode(&cfg, &data, format).unwrap();
        let (cfg2, data2) = decode(&bytes).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(data2.x, data.x);
        assert_eq!(data2.block_index, data.block_index);
        assert_eq!(encode(&cfg2, &data2, format).unwrap(), bytes);
    }
}

#[test]
fn same_seed_same_samples() {
    let a = generate(&config(9)).unwrap();
    let b = generate(&config(9)).unwrap();
    let c = generate(&config(10)).unwrap();
    assert_eq!(a.x, b.x);
    assert_ne!(a.x, c.x);
}

#[test]
fn fit_from_truth_lands_near_the_bound() {
    let cfg = config(21);
    let data = generate(&cfg).unwrap();
    let blocks = cfg.blocks();
    let opts = FitOptions { init: Some(ThetaCvx::from_truth(&cfg)), restarts: 1, ..FitOptions::default() };
    let report = fit(&data, cfg.path.schedule(), cfg.ggd, &cfg.sigma().unwrap(), &identity_backgrounds(3, blocks), &opts)
        .unwrap();
    let isr = empirical_isr(&data, &report.theta.separator(), &cfg).unwrap();
    let setup = CribSetup::linear(4, 8000, blocks, cfg.ggd, cfg.tau).unwrap();
    let bound = crib_model(ModelKind::CvxCsv, &setup).unwrap().isr;
    assert!(isr > 0.0 && isr < 20.0 * bound, "isr {isr:.3e}, bound {bound:.3e}");
}
