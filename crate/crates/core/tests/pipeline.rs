use contact_fisher::contact_model::ContactParams;
use contact_fisher::curate::{rank, select, trajectory_scores, Method};
use contact_fisher::dynamics::Physics;
use contact_fisher::estimate::{eval_metrics, fit, OptimizerSettings};
use contact_fisher::fisher::{Reduction, DEFAULT_RIDGE};
use contact_fisher::io::{load_dataset, load_params, save_dataset, save_params};
use contact_fisher::loss::LossModel;
use contact_fisher::synth::{mixed_dataset, perturbed, SimSettings};

#[test]
fn simulated_dataset_survives_disk_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let truth = ContactParams::cube(0.05, 0.3);
    let sim = SimSettings { horizon: 80, ..Default::default() };
    let data = mixed_dataset(12, &truth, &sim, 6).unwrap();
    let manifest = save_dataset(&data, dir.path(), &Physics::default(), "pipeline test").unwrap();
    let (_, loaded) = load_dataset(&manifest).unwrap();
    assert_eq!(loaded.len(), 12);
    for (a, b) in data.iter().zip(&loaded) {
        assert_eq!(a.states, b.states);
    }

    let theta0 = perturbed(&truth, 0.01, 0.45, 2);
    save_params(&theta0, &dir.path().join("theta0.json")).unwrap();
    let theta0 = load_params(&dir.path().join("theta0.json")).unwrap();

    let model = LossModel::default();
    let ranked = rank(&loaded, &theta0, &model, Reduction::Trace, 6, DEFAULT_RIDGE).unwrap();
    // Airborne tosses sit at indices 3, 7, 11 and carry no information.
    assert!(ranked.ordered_indices.iter().all(|i| i % 4 != 3));

    let subset: Vec<_> = ranked.ordered_indices.iter().map(|&i| loaded[i].clone()).collect();
    let opt = OptimizerSettings { epochs: 4, ..Default::default() };
    let r = fit(&subset, &theta0, &model, &opt, 1).unwrap();
    assert!(r.loss_history.last().unwrap() < &r.loss_history[0]);
    let before = eval_metrics(&theta0, &loaded, &model, &sim.solver, Some(&truth)).unwrap();
    let after = eval_metrics(&r.theta_hat, &loaded, &model, &sim.solver, Some(&truth)).unwrap();
    assert!(after.traj_pos_error < before.traj_pos_error);
}

#[test]
fn selection_methods_agree_on_the_dataset_size_contract() {
    let truth = ContactParams::cube(0.05, 0.3);
    let sim = SimSettings { horizon: 60, ..Default::default() };
    let data = mixed_dataset(8, &truth, &sim, 3).unwrap();
    let scores: Vec<_> = trajectory_scores(&data, &perturbed(&truth, 0.01, 0.45, 1), &LossModel::default())
        .unwrap()
        .into_iter()
        .map(|s| s.g)
        .collect();
    for m in [Method::Trace, Method::LogDet, Method::MinEig, Method::Det, Method::InfoOrthogonal, Method::Random] {
        let r = select(m, &scores, 5, 4, DEFAULT_RIDGE).unwrap();
        let mut idx = r.ordered_indices.clone();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 5, "{}", m.name());
        assert!(select(m, &scores, 9, 4, DEFAULT_RIDGE).is_err());
    }
}
