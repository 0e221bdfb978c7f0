//! The `list` subcommand: registered drivers, observables, events, rates,
//! and oracles with their parameter schemas.

pub fn listing() -> String {
    let mut out = String::new();
    out.push_str("drivers:\n");
    out.push_str("  gaussian_white_noise      space-time white noise scaled n^{-1/2}; params: none\n");
    out.push_str("  poisson_random_measure    Poisson random measure at rate n, scaled 1/n; params: centered (bool, default false)\n");
    out.push_str("  markov_counting           occupation counting measure of a finite chain; params: kernel (row-stochastic matrix), initial (distribution)\n");
    out.push_str("observables:\n");
    out.push_str("  driver_eval               the scalar path Y(h, .); params: h (one value per cell)\n");
    out.push_str("  markov_mean_sde           X_{k+1} = X_k + state_values[xi_{k+1}]/n; params: state_values, x0 (default 0)\n");
    out.push_str("events:\n");
    out.push_str("  terminal_ge               observable(T) >= level; params: level\n");
    out.push_str("  sup_abs_ge                sup_{t<=T} |observable(t)| >= level; params: level\n");
    out.push_str("rates:\n");
    out.push_str("  poisson_legendre          Legendre transform of the Poisson log-MGF at y; params: y (default event level), tolerance_rel\n");
    out.push_str("  cramer_legendre           Legendre transform of the mark log-MGF at y; params: y (default event level), pi (default driver initial), tolerance_rel\n");
    out.push_str("  schilder_hitting          minimized boundary-crossing path action; params: minimize_steps (default 64), restarts (default 2), tolerance_rel\n");
    out.push_str("oracles:\n");
    out.push_str("  poisson_terminal          exact Poisson tail at n_exact; params: n_exact, tolerance_rel\n");
    out.push_str("  binomial_terminal         exact binomial tail at n_exact; params: n_exact, tolerance_rel\n");
    out
}
