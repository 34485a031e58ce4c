use spoofsim_core::learner::{LearnerConfig, OracleRegistry};
use spoofsim_core::rng::seeded;
use spoofsim_core::xperm::{
    generate_instance, hybrid_reduction, spoof_learn, xperm, DistinguisherSpec, DistinguisherView, GenerationConfig,
    KnownBank, LearnedModel, XPermQuery,
};
use spoofsim_core::finite_math::BitString;
use spoofsim_core::oracle::ExactOracle;

fn config(l: usize) -> GenerationConfig {
    GenerationConfig {
        n: 4096,
        c: 1,
        l_override: Some(l),
        k: 4,
        prime_cap: 211,
        learner: LearnerConfig::new(1, 32),
        registry: OracleRegistry::parse(&["constant-zero", "sample-lookup"]).unwrap(),
    }
}

#[test]
fn generate_learn_evaluate() {
    let cfg = config(8);
    let mut rng = seeded(10);
    let inst = generate_instance(&cfg, &mut rng).unwrap();
    assert_eq!(inst.params.blocks_per_sample(), 63);
    let samples = inst.samples(64, &mut rng);
    let out = spoof_learn(&samples, &cfg, 4, &mut rng).unwrap();
    for (bits, y) in &samples {
        assert_eq!(out.model.evaluate(bits), *y);
    }
    // Blocks spread over the samples cover every prefix at this size.
    assert_eq!(out.blocks_recovered, 256);
    assert_eq!(out.recomputed, inst.y);
    let fresh = inst.samples(500, &mut rng);
    let agree = fresh.iter().filter(|(b, y)| out.model.evaluate(b) == *y).count();
    if out.v {
        assert_eq!(agree, 500);
    } else {
        assert!(agree < 400);
    }
    let restored = LearnedModel::from_bytes(&out.model.to_bytes()).unwrap();
    assert_eq!(restored, out.model);
}

#[test]
fn unbounded_recompute_sees_through_the_random_branch() {
    let cfg = config(6);
    let mut rng = seeded(11);
    let d = DistinguisherSpec::ExactRecompute { budget: None }.build();
    let mut correct = 0;
    for _ in 0..20 {
        let inst = generate_instance(&cfg, &mut rng).unwrap();
        let samples = inst.samples(16, &mut rng);
        let out = spoof_learn(&samples, &cfg, 4, &mut rng).unwrap();
        let view = DistinguisherView {
            samples: &samples,
            model: &out.model,
            side_channel: None,
        };
        let (outcome, _) = d.run(&view, None, &mut rng).unwrap();
        correct += outcome.is_correct(out.v) as usize;
    }
    assert!(correct >= 19);
}

#[test]
fn tight_budget_forces_abstention() {
    let cfg = config(6);
    let mut rng = seeded(12);
    let inst = generate_instance(&cfg, &mut rng).unwrap();
    let samples = inst.samples(16, &mut rng);
    let out = spoof_learn(&samples, &cfg, 4, &mut rng).unwrap();
    let view = DistinguisherView {
        samples: &samples,
        model: &out.model,
        side_channel: None,
    };
    let spec = DistinguisherSpec::ExactRecompute { budget: Some(10) };
    let (outcome, calls) = spec.build().run(&view, spec.budget(), &mut rng).unwrap();
    assert!(!outcome.is_correct(true) && !outcome.is_correct(false));
    assert_eq!(calls, 0);
}

#[test]
fn planted_distinguisher_predicts_better_than_chance() {
    let mut rng = seeded(13);
    let cfg = config(3);
    let inst = generate_instance(&cfg, &mut rng).unwrap();
    let params = inst.params;
    let exact = ExactOracle::new(params.m, params.p);
    let planted = DistinguisherSpec::PlantedPerfect.build();
    let trials = 3000;
    let mut hits = 0;
    for _ in 0..trials {
        let bank = KnownBank::random(&params, &mut rng);
        let target = XPermQuery::random(params.k, params.m, params.p, &mut rng);
        let truth = xperm(&target, &exact, &mut rng).unwrap();
        let out = hybrid_reduction(&target, &bank, planted.as_ref(), None, &params, 2, None, true, &mut rng).unwrap();
        hits += (out.prediction == Some(truth)) as usize;
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate > 0.55, "prediction rate {rate}");
}

#[test]
fn zero_padding_is_ignored_by_models() {
    let cfg = config(6);
    let mut rng = seeded(14);
    let inst = generate_instance(&cfg, &mut rng).unwrap();
    let samples = inst.samples(8, &mut rng);
    let out = spoof_learn(&samples, &cfg, 4, &mut rng).unwrap();
    let (bits, x) = inst.sample_with_prefix(&mut rng);
    let mut header_only = bits.slice(0..48 + 6);
    header_only.append(&BitString::zeros(bits.len() - header_only.len()));
    assert_eq!(out.model.evaluate(&header_only), out.model.table().get(x as usize));
}
