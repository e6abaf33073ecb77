#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "attnlab/dynamics.hpp"
#include "attnlab/harness.hpp"
#include "attnlab/numerics.hpp"
#include "attnlab/theory.hpp"
#include "oracles.hpp"

using namespace attnlab;

namespace {

std::vector<AttentionMatrix> zero_qk_attention_sequence(const MaskGraph& g, int T) {
  std::vector<AttentionMatrix> As;
  for (int t = 0; t < T; ++t)
    As.push_back(masked_softmax(Matrix::Zero(g.n, g.n), g));
  return As;
}

}  // namespace

TEST_CASE("empirical epsilon of uniform attention") {
  CHECK(empirical_epsilon(zero_qk_attention_sequence(causal_mask(2), 3), causal_mask(2)) ==
        0.5);
  for (int n : {2, 3, 5, 8})
    CHECK(empirical_epsilon(zero_qk_attention_sequence(complete_mask(n), 2),
                            complete_mask(n)) == doctest::Approx(1.0 / n).epsilon(1e-15));
}

TEST_CASE("empirical epsilon rejects sparsity mismatches") {
  const MaskGraph g = causal_mask(2);
  std::vector<AttentionMatrix> As{masked_softmax(Matrix::Zero(2, 2), complete_mask(2))};
  CHECK_THROWS_AS(empirical_epsilon(As, g), std::invalid_argument);
  CHECK_THROWS_AS(empirical_epsilon({}, g), std::invalid_argument);
}

TEST_CASE("analytic epsilon floor bounds measured epsilon on unit-row states") {
  Rng rng(1);
  const double C = 1.0, dqk = 2.0;
  for (auto kind : {MaskKind::complete, MaskKind::causal}) {
    MaskGraph g = build_mask(kind, 6, 1);
    const double floor = epsilon_floor(C, dqk, g.max_in_degree());
    CHECK(floor > 0.0);
    for (int trial = 0; trial < 20; ++trial) {
      const TokenMatrix x = sample_sphere_rows(6, 8, rng);
      LayerWeights lw{gaussian_matrix(8, 8, rng), gaussian_matrix(8, 8, rng),
                      Matrix::Identity(8, 8), dqk};
      for (Matrix* m : {&lw.W_Q, &lw.W_K})
        if (spectral_norm(*m) > C) *m *= C / spectral_norm(*m);
      const AttentionMatrix a = masked_softmax(raw_scores(x, lw), g);
      CHECK(min_on_edge(a, g) >= floor - 1e-15);
    }
  }
}

TEST_CASE("contraction rate formulas") {
  CHECK(san_rate(0.5, 1) == 0.5);
  CHECK(san_rate(0.5, 2) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
  CHECK(ln_rate(0.5, 1, 1) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
  // epsilon -> 0 sends both factors to 1 (collapse slows)
  CHECK(san_rate(1e-9, 1) == doctest::Approx(1.0));
  CHECK(ln_rate(1e-6, 2, 4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(san_rate(0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(san_rate(1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(ln_rate(0.9, 1, 4), std::invalid_argument);  // 4*eps^2 >= 1
  CHECK_THROWS_AS(ln_rate(0.5, 1, 0), std::invalid_argument);
}

TEST_CASE("rate factor is decreasing in epsilon and increasing in radius") {
  // Larger epsilon means faster collapse (smaller factor); larger radius
  // means slower collapse (larger factor).
  for (int r : {1, 2, 3, 5}) {
    double prev = san_rate(0.05, r);
    for (double eps : {0.1, 0.2, 0.4, 0.8}) {
      const double f = san_rate(eps, r);
      CHECK(f < prev);
      prev = f;
    }
  }
  for (double eps : {0.1, 0.3, 0.6}) {
    double prev = san_rate(eps, 1);
    for (int r : {2, 3, 4, 6}) {
      const double f = san_rate(eps, r);
      CHECK(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("oscillation verifier on uniform complete attention contracts in one step") {
  const MaskGraph g = complete_mask(4);
  const auto report = verify_oscillation_contraction(zero_qk_attention_sequence(g, 4), g);
  CHECK(report.pass);
  CHECK(report.epsilon == doctest::Approx(0.25));
  CHECK(report.radius == 1);
  // uniform averaging zeroes the oscillation outright
  const AttentionMatrix a = masked_softmax(Matrix::Zero(4, 4), g);
  for (Index j = 0; j < 4; ++j) CHECK(column_oscillation(a.col(j)) < 1e-15);
}

TEST_CASE("oscillation verifier on the causal n=2 uniform chain") {
  const MaskGraph g = causal_mask(2);
  const auto report = verify_oscillation_contraction(zero_qk_attention_sequence(g, 6), g);
  CHECK(report.pass);
  CHECK(report.epsilon == 0.5);
  CHECK(report.factor == doctest::Approx(0.5));
  // basis vector e_2: one application halves the oscillation exactly
  const AttentionMatrix a = masked_softmax(Matrix::Zero(2, 2), g);
  Vector e2(2);
  e2 << 0, 1;
  CHECK(column_oscillation(a * e2) == doctest::Approx(0.5));
}

TEST_CASE("oscillation contraction holds on random masked trajectories") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 9);
    MaskGraph g = oracle::random_digraph(n, 0.2 + 0.6 * rng.uniform(), rng, true);
    if (!classify(g).quasi_strongly_connected) continue;
    std::vector<AttentionMatrix> As;
    for (int t = 0; t < 12; ++t)
      As.push_back(masked_softmax(3.0 * gaussian_matrix(n, n, rng), g));
    CHECK(verify_oscillation_contraction(As, g).pass);
  }
}

TEST_CASE("oscillation verifier requires quasi-strong connectivity") {
  const MaskGraph g = custom_mask(2, {{0, 0}, {1, 1}});  // two isolated self-loops
  CHECK_THROWS_AS(
      verify_oscillation_contraction(zero_qk_attention_sequence(g, 2), g),
      std::invalid_argument);
}

TEST_CASE("phi contraction verifier on trajectories with orthogonal values") {
  Rng rng(3);
  SUBCASE("identical initial rows hold trivially") {
    const MaskGraph g = complete_mask(3);
    TokenMatrix x0(3, 4);
    const TokenMatrix row = sample_sphere_rows(1, 4, rng);
    for (int i = 0; i < 3; ++i) x0.row(i) = row.row(0);
    const WeightSchedule sched = WeightSchedule::random_orthogonal_value(4, 1.0, 1.0, 9);
    RecordPlan plan;
    plan.record_attention = true;
    const auto rec = run_trajectory(x0, sched, g, UpdateRule::post_ln, 40, plan);
    const auto report = verify_phi_contraction(rec.phi_series(), rec.attention, g,
                                               PhiVariant::strongly_connected);
    CHECK(report.pass);
    for (double phi : rec.phi_series()) CHECK(phi == doctest::Approx(1.0));
  }
  SUBCASE("hemisphere start with the causal mask contracts from step zero") {
    const MaskGraph g = causal_mask(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng init(seed);
      const TokenMatrix x0 = sample_hemisphere_rows(4, 8, init);
      const WeightSchedule sched =
          WeightSchedule::random_orthogonal_value(8, 1.0, 1.0, seed);
      RecordPlan plan;
      plan.record_attention = true;
      const auto rec = run_trajectory(x0, sched, g, UpdateRule::post_ln, 200, plan);
      const auto report = verify_phi_contraction(rec.phi_series(), rec.attention, g,
                                                 PhiVariant::quasi_strong);
      CHECK(report.pass);
      CHECK(report.blocks_checked > 0);
    }
  }
  SUBCASE("sphere start with the complete mask contracts once phi is nonnegative") {
    const MaskGraph g = complete_mask(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng init(seed + 100);
      const TokenMatrix x0 = sample_sphere_rows(4, 8, init);
      const WeightSchedule sched =
          WeightSchedule::random_orthogonal_value(8, 1.0, 1.0, seed);
      RecordPlan plan;
      plan.record_attention = true;
      const auto rec = run_trajectory(x0, sched, g, UpdateRule::post_ln, 200, plan);
      const auto report = verify_phi_contraction(rec.phi_series(), rec.attention, g,
                                                 PhiVariant::strongly_connected);
      CHECK(report.pass);
    }
  }
  SUBCASE("hypothesis violations are rejected") {
    const MaskGraph g = causal_mask(3);
    std::vector<double> phi{-0.2, 0.0, 0.1};
    const auto As = zero_qk_attention_sequence(g, 2);
    CHECK_THROWS_AS(verify_phi_contraction(phi, As, g, PhiVariant::quasi_strong),
                    std::invalid_argument);
    CHECK_THROWS_AS(verify_phi_contraction(phi, As, g, PhiVariant::strongly_connected),
                    std::invalid_argument);
  }
}

TEST_CASE("ergodicity gap") {
  SUBCASE("uniform complete attention is rank one after a single step") {
    const MaskGraph g = complete_mask(3);
    const auto gaps = ergodicity_gap(zero_qk_attention_sequence(g, 3));
    CHECK(gaps[0] < 1e-14);
  }
  SUBCASE("causal uniform chain gap decays monotonically after the first step") {
    const MaskGraph g = causal_mask(3);
    const auto gaps = ergodicity_gap(zero_qk_attention_sequence(g, 40));
    CHECK(gaps.front() > 0.0);
    for (std::size_t t = 1; t < gaps.size(); ++t)
      CHECK(gaps[t] <= gaps[t - 1] + 1e-12);
    CHECK(gaps.back() < 1e-6);
  }
  SUBCASE("generic attention starts with a positive gap") {
    Rng rng(4);
    const MaskGraph g = complete_mask(4);
    std::vector<AttentionMatrix> As{masked_softmax(gaussian_matrix(4, 4, rng), g)};
    CHECK(ergodicity_gap(As)[0] > 1e-6);
  }
  SUBCASE("LayerNorm scalings enter the product") {
    Rng rng(5);
    const MaskGraph g = complete_mask(3);
    const WeightSchedule sched = WeightSchedule::random_orthogonal_value(4, 1.0, 1.0, 11);
    RecordPlan plan;
    plan.record_attention = true;
    plan.record_ln_scalings = true;
    const auto rec = run_trajectory(sample_sphere_rows(3, 4, rng), sched, g,
                                    UpdateRule::post_ln, 300, plan);
    const auto gaps = ergodicity_gap(rec.attention, rec.ln_scalings);
    CHECK(gaps.back() < 1e-8);
  }
}

TEST_CASE("jordan value matrix shapes") {
  CHECK(jordan_value_matrix(4, 1, 3.0) == Matrix::Identity(4, 4));
  Matrix expected(2, 2);
  expected << 1, 5, 0, 1;
  CHECK(jordan_value_matrix(2, 2, 5.0) == expected);
  const Matrix m = jordan_value_matrix(5, 3, 2.0);
  CHECK(m(2, 3) == 2.0);
  CHECK(m(3, 4) == 2.0);
  CHECK(m(1, 2) == 0.0);
  CHECK_THROWS_AS(jordan_value_matrix(3, 4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(jordan_value_matrix(3, 0, 1.0), std::invalid_argument);
}

TEST_CASE("W_V - I is nilpotent of index k on the chain block") {
  for (int d : {4, 6}) {
    for (int k = 2; k <= d; ++k) {
      const Matrix n = jordan_value_matrix(d, k, 2.5) - Matrix::Identity(d, d);
      Matrix power = n;
      for (int i = 1; i < k - 1; ++i) power = power * n;
      CHECK(power.norm() > 0.0);  // (W-I)^{k-1} != 0
      CHECK((power * n).norm() == 0.0);  // (W-I)^k == 0
    }
  }
}

TEST_CASE("closed-form equilibrium for N=d=2, w=2") {
  const EquilibriumSet set = construct_equilibrium(2, 2, 2, 2.0, {1, -1});
  CHECK(std::abs(set.X(0, 0) - 0.0) < 1e-15);
  CHECK(std::abs(set.X(0, 1) - 1.0) < 1e-15);
  CHECK(std::abs(set.X(1, 0) - (-0.5)) < 1e-12);
  CHECK(std::abs(set.X(1, 1) - (-std::sqrt(3.0) / 2.0)) < 1e-12);
  CHECK(set.residual < 1e-9);
}

TEST_CASE("equilibrium rows follow the shift recursion pattern") {
  const double w = 4.0;
  const EquilibriumSet set = construct_equilibrium(4, 4, 4, w, {1, -1, 1, -1});
  // alternating signs give the closed-form cascade with entries
  // (+-)(1/w^{i-1}, sqrt(1/w^{2(i-2)} - 1/w^{2(i-1)}), ..., sqrt(1 - 1/w^2))
  CHECK(set.X(1, 2) == doctest::Approx(-1.0 / w).epsilon(1e-14));
  CHECK(set.X(1, 3) == doctest::Approx(-std::sqrt(1.0 - 1.0 / (w * w))).epsilon(1e-14));
  CHECK(set.X(2, 1) == doctest::Approx(1.0 / (w * w)).epsilon(1e-14));
  CHECK(set.X(2, 2) ==
        doctest::Approx(std::sqrt(1.0 / (w * w) - 1.0 / std::pow(w, 4))).epsilon(1e-14));
  CHECK(set.X(3, 0) == doctest::Approx(-1.0 / std::pow(w, 3)).epsilon(1e-14));
  CHECK(has_unit_rows(set.X, 1e-12));
}

TEST_CASE("all sign variants are fixed points with the right rank and are distinct") {
  const int N = 4, d = 4;
  for (double w : {5.0, 8.0, 100.0}) {
    for (int k = 1; k <= 4; ++k) {
      const auto variants = all_sign_vectors(k);
      CHECK(variants.size() == (std::size_t{1} << k));
      std::vector<TokenMatrix> states;
      for (const auto& signs : variants) {
        const EquilibriumSet set = construct_equilibrium(N, d, k, w, signs);
        CHECK(set.residual <= 1e-9);
        CHECK(numerical_rank(set.X) == k);
        CHECK(has_unit_rows(set.X, 1e-12));
        states.push_back(set.X);
      }
      for (std::size_t a = 0; a < states.size(); ++a)
        for (std::size_t b = a + 1; b < states.size(); ++b)
          CHECK((states[a] - states[b]).norm() > 0.1);
    }
  }
}

TEST_CASE("equilibria of different ranks coexist under the full chain matrix") {
  const int N = 4, d = 4;
  const double w = 8.0;
  const Matrix W_full = jordan_value_matrix(d, d, w);
  for (int k = 1; k <= 4; ++k) {
    const EquilibriumSet set = construct_equilibrium(N, d, k, w, all_sign_vectors(k)[0],
                                                     /*full_chain_value=*/true);
    CHECK((set.W_V - W_full).norm() == 0.0);
    CHECK(fixed_point_residual(set.X, W_full) < 1e-9);
    // the same point is also fixed under its trailing-k chain matrix
    const EquilibriumSet trailing = construct_equilibrium(N, d, k, w, all_sign_vectors(k)[0],
                                                          /*full_chain_value=*/false);
    CHECK((trailing.X - set.X).norm() < 1e-14);
    CHECK(fixed_point_residual(set.X, trailing.W_V) < 1e-9);
  }
}

TEST_CASE("equilibrium construction with distinct N and d") {
  const EquilibriumSet tall = construct_equilibrium(5, 3, 2, 9.0, {1, 1});
  CHECK(tall.residual < 1e-9);
  CHECK(numerical_rank(tall.X) == 2);
  const EquilibriumSet wide = construct_equilibrium(3, 6, 3, 7.0, {-1, 1, -1});
  CHECK(wide.residual < 1e-9);
  CHECK(numerical_rank(wide.X) == 3);
}

TEST_CASE("equilibrium parameter validation") {
  CHECK_THROWS_AS(construct_equilibrium(2, 2, 2, 1.0, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(construct_equilibrium(2, 2, 3, 2.0, {1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(construct_equilibrium(2, 2, 2, 2.0, {1}), std::invalid_argument);
  CHECK_THROWS_AS(construct_equilibrium(2, 2, 2, 2.0, {1, 2}), std::invalid_argument);
  // w too small for the constant-block step: sqrt argument goes negative
  CHECK_THROWS_AS(construct_equilibrium(6, 6, 2, 3.0, {1, 1}), std::invalid_argument);
}

TEST_CASE("rank-one state of all pole rows is exactly fixed") {
  const int N = 3, d = 4;
  TokenMatrix x = TokenMatrix::Zero(N, d);
  for (int i = 0; i < N; ++i) x(i, d - 1) = 1.0;
  for (int k = 1; k <= d; ++k)
    CHECK(fixed_point_residual(x, jordan_value_matrix(d, k, 5.0)) < 1e-15);
}

TEST_CASE("random sphere states are far from fixed") {
  Rng rng(6);
  const Matrix W_V = jordan_value_matrix(4, 4, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    const TokenMatrix x = sample_sphere_rows(4, 4, rng);
    CHECK(fixed_point_residual(x, W_V) > 0.01);
  }
}

TEST_CASE("recomputed beta scalings match the construction ansatz") {
  const int N = 4, d = 4;
  const double w = 8.0;
  for (int k = 1; k <= 4; ++k) {
    const EquilibriumSet set = construct_equilibrium(N, d, k, w, all_sign_vectors(k).back());
    const Vector beta = recompute_beta(set.X, set.W_V);
    CHECK(beta(N - k) == doctest::Approx(1.0 / (N - k + 1)).epsilon(1e-12));
    for (int i = N - k + 1; i < N; ++i)
      CHECK(beta(i) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stable rank bound formulas") {
  CHECK(stable_rank_bound(4, 4.0) == doctest::Approx(4.0 / (4.0 - 3.0 / 16.0)).epsilon(1e-15));
  CHECK(stable_rank_bound(4, 4.0) == doctest::Approx(1.04918).epsilon(1e-5));
  CHECK(w_for_delta(0.1) == doctest::Approx(std::sqrt(11.0)).epsilon(1e-15));
  CHECK(stable_rank_bound(5, 1e9) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(stable_rank_bound(4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(w_for_delta(0.0), std::invalid_argument);
}

TEST_CASE("full-rank equilibria satisfy the anisotropy bound") {
  for (int N : {2, 3, 4}) {
    for (double w : {3.3166247903554, 4.0, 8.0, 20.0}) {
      const EquilibriumSet set =
          construct_equilibrium(N, N, N, w, all_sign_vectors(N)[1]);
      const double sr = stable_rank(set.X);
      CHECK(sr >= 1.0 - 1e-12);
      CHECK(sr <= stable_rank_bound(N, w) + 1e-12);
    }
  }
}

TEST_CASE("d2 fixed points") {
  const auto [a, b] = d2_fixed_points(2.0);
  CHECK(a.x() == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(a.y() == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
  CHECK(b.y() == doctest::Approx(-std::sqrt(0.75)).epsilon(1e-15));
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(d2_fixed_points(1.0), std::invalid_argument);

  // B equals row 2 of the (+,-) equilibrium
  const EquilibriumSet set = construct_equilibrium(2, 2, 2, 2.0, {1, -1});
  CHECK((set.X.row(1).transpose() - b).norm() < 1e-14);
}

TEST_CASE("counterexample condition checker") {
  const double w = 3.0;
  SUBCASE("the d=2 equilibrium point is compliant") {
    const EquilibriumSet set = construct_equilibrium(2, 2, 2, w, {1, -1});
    CHECK(check_counterexample_conditions(set.X, w).compliant);
  }
  SUBCASE("pivot short of -1/w is reported by name") {
    TokenMatrix x(2, 2);
    x << 0.6, 0.8, -1.0 / (2.0 * w), -std::sqrt(1.0 - 1.0 / (4.0 * w * w));
    const auto check = check_counterexample_conditions(x, w);
    CHECK(!check.compliant);
    REQUIRE(check.failures.size() == 1);
    CHECK(check.failures[0].find("-1/w") != std::string::npos);
  }
  SUBCASE("nonpositive first coordinate of token 1 is reported") {
    TokenMatrix x(2, 2);
    x << -0.6, 0.8, -0.9, -std::sqrt(1.0 - 0.81);
    const auto check = check_counterexample_conditions(x, w);
    CHECK(!check.compliant);
    CHECK(check.failures[0].find("X_{1,1}") != std::string::npos);
  }
  SUBCASE("sampled states are compliant across sizes and seeds") {
    for (int N : {2, 3, 4}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const TokenMatrix x = sample_counterexample_x0(N, N, N + 1.0, rng);
        const auto check = check_counterexample_conditions(x, N + 1.0);
        CHECK(check.compliant);
        CHECK(check.ratio_condition_lhs <= check.ratio_condition_rhs);
      }
    }
  }
}

TEST_CASE("counterexample invariance holds over a short horizon") {
  const int N = 3;
  const double w = N + 1.0;
  Rng rng(11);
  TokenMatrix x = sample_counterexample_x0(N, N, w, rng);
  const MaskGraph g = causal_mask(N);
  const WeightSchedule sched = WeightSchedule::zero_qk_jordan(N, N, w);
  for (int t = 0; t < 2000; ++t) {
    x = step_post_ln(x, sched.at(t), g);
    CHECK(x(1, N - 2) <= -1.0 / w + 1e-10);
  }
  CHECK(sigma2_over_sigma1(x) > 0.05);
}

TEST_CASE("mu decays within the predicted per-block and envelope allowances over 50 seeds") {
  for (auto kind : {MaskKind::complete, MaskKind::causal, MaskKind::sliding_window}) {
    const MaskGraph g = build_mask(kind, 8, 1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng init = Rng(seed).split(1);
      const WeightSchedule sched =
          WeightSchedule::random_orthogonal_value(16, 1.0, 1.0, Rng(seed).split(2).seed());
      RecordPlan plan;
      plan.record_attention = true;
      const auto rec = run_trajectory(sample_sphere_rows(8, 16, init), sched, g,
                                      UpdateRule::san, 64, plan);
      const double eps = empirical_epsilon(rec.attention, g);
      const auto report = verify_mu_decay(rec.mu_series(), g, eps, /*burn_in_blocks=*/1);
      CHECK(report.pass);
    }
  }
}

TEST_CASE("mu decay verifier accepts healthy SAN runs and flags stalls") {
  Rng rng(12);
  const MaskGraph g = complete_mask(6);
  const WeightSchedule sched = WeightSchedule::random_orthogonal_value(8, 1.0, 1.0, 21);
  RecordPlan plan;
  plan.record_attention = true;
  const auto rec =
      run_trajectory(sample_sphere_rows(6, 8, rng), sched, g, UpdateRule::san, 32, plan);
  const double eps = empirical_epsilon(rec.attention, g);
  CHECK(verify_mu_decay(rec.mu_series(), g, eps).pass);

  // a flat series violates both the block factor and the envelope
  std::vector<double> flat(33, 1.0);
  const auto report = verify_mu_decay(flat, g, 0.25);
  CHECK(!report.pass);
  CHECK(!report.violations.empty());
}
