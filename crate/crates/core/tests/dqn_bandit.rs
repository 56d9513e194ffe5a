use sspe_core::dqn::bandit::solves_bandit;

#[test]
fn greedy_policy_optimal_on_both_contexts() {
    let solved = (0..20).filter(|&s| solves_bandit(s, 5000).unwrap()).count();
    assert!(solved >= 19, "solved {solved}/20");
}
