use outcome_rl::advantage::{collect_advantage_samples, default_nu, AdvantageSamples};
use outcome_rl::fixtures;
use outcome_rl::format::{format_real, parse_real};
use outcome_rl::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
use outcome_rl::mdp::{sample_trajectory, MdpSpec, SaTable, TabularPolicy};
use outcome_rl::outcome::{collect_outcome_dataset, OutcomeDataset, ProcessDataset};
use outcome_rl::preference::{collect_preferences, PreferenceDataset};
use outcome_rl::solvers::ModelClass;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn reals_round_trip_exactly() {
    let mut r = rng(1);
    for _ in 0..2000 {
        let x: f64 = rand::Rng::gen_range(&mut r, -10.0..10.0);
        assert_eq!(parse_real(&format_real(x)).unwrap(), x);
    }
    assert_eq!(format_real(0.375), "0.375");
    assert_eq!(parse_real(&format_real(1.0 / 3.0)).unwrap(), 1.0 / 3.0);
}

#[test]
fn outcome_and_process_files_round_trip() {
    let mut r = rng(2);
    let mdp = random_mdp(&mut r, &RandomMdpConfig::default());
    let pi = random_policy(&mut r, mdp.shape(), false);
    let mut data = collect_outcome_dataset(&mdp, &pi, 50, &mut r).unwrap();
    data.policy = "pi_off".into();
    data.seed = 2;
    let text = data.to_text();
    assert!(text.starts_with("# outcome"));
    assert_eq!(OutcomeDataset::from_text(&text).unwrap(), data);

    let process = ProcessDataset {
        records: (0..20)
            .map(|_| {
                let t = sample_trajectory(&mdp, &pi, &mut r);
                t.stripped().with_rewards(t.rewards().unwrap().to_vec())
            })
            .collect(),
    };
    assert_eq!(ProcessDataset::from_text(&process.to_text()).unwrap(), process);
}

#[test]
fn preference_file_round_trips() {
    let mdp = fixtures::binary_tree(3);
    let pi = TabularPolicy::uniform(mdp.shape());
    let reward = SaTable::from_fn(mdp.shape(), |h, s, a| 0.1 * ((h + s + a) % 3) as f64);
    let data = collect_preferences(&mdp, &pi, &reward, 40, &mut rng(3));
    assert_eq!(PreferenceDataset::from_text(&data.to_text()).unwrap(), data);
}

#[test]
fn advantage_csv_round_trips() {
    let (mdp, mu) = fixtures::counterexample();
    let nu = default_nu(&mdp);
    let samples = collect_advantage_samples(&mdp, &mu, &nu, 3, &mut rng(4)).unwrap();
    let csv = samples.to_csv();
    assert!(csv.starts_with("h,s,a,k,estimate"));
    let back = AdvantageSamples::from_csv(&csv, nu).unwrap();
    assert_eq!(back.samples, samples.samples);
}

#[test]
fn mdp_spec_and_model_class_round_trip() {
    let mut r = rng(5);
    for _ in 0..20 {
        let mdp = random_mdp(&mut r, &RandomMdpConfig::default());
        let text = mdp.to_spec().to_toml_string();
        assert_eq!(MdpSpec::from_toml_str(&text).unwrap().build().unwrap(), mdp);
    }
    let models = fixtures::armor_instance().models;
    let back = ModelClass::from_toml_str(&models.to_toml_string()).unwrap();
    assert_eq!(back.candidates(), models.candidates());
    assert_eq!(back.true_index, Some(4));
}

#[test]
fn shipped_spec_files_build() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mdp = MdpSpec::load(&dir.join("counterexample_mdp.toml")).unwrap().build().unwrap();
    let (reference, _) = fixtures::counterexample();
    assert_eq!(mdp.shape(), reference.shape());
    assert!(mdp.rewards().max_abs_diff(reference.rewards()) < 1e-15);
}

#[test]
fn malformed_records_are_parse_errors() {
    for bad in ["# outcome policy=x seed=1\ntraj=(0,0) R=abc", "# outcome policy=x seed=1\nnonsense"] {
        assert_eq!(OutcomeDataset::from_text(bad).unwrap_err().code(), "E_PARSE");
    }
}
