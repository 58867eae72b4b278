use kucbvi_bench::{continuous_dataset, grid_model};

#[test]
fn fixtures_have_requested_size() {
    let d = continuous_dataset(250, 0);
    assert_eq!(d.len(), 250);
    assert!(d.iter().all(|s| s.x_next.iter().all(|v| (0.0..=1.0).contains(v))));
    let (model, gram) = grid_model(100, 0.1, 0);
    assert_eq!(model.n_states(), 64);
    assert_eq!(gram.len(), 64);
    let visits: f64 = (0..64)
        .flat_map(|s| (0..4).map(move |a| (s, a)))
        .map(|(s, a)| model.visits(s, a))
        .sum();
    assert_eq!(visits, 100.0);
}
