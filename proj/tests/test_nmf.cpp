#include <doctest.h>

#include <sstream>

#include "auscnmf/nmf.hpp"
#include "oracles.hpp"

using namespace auscnmf;

namespace {

NmfModel exact_instance(std::mt19937_64& rng, Eigen::Index f, Eigen::Index t, Matrix& x, Matrix& y) {
  NmfModel m = oracle::random_model(rng, f, t, 2, 2, 0.0);
  x = m.internal_model();
  y = m.external_model();
  return m;
}

}  // namespace

TEST_CASE("kl_divergence scalar values") {
  CHECK(kl_divergence(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0)) ==
        doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-15));
  CHECK(kl_divergence(Matrix::Constant(1, 1, 0.0), Matrix::Constant(1, 1, 1.0)) == 1.0);
  std::mt19937_64 rng(3);
  const Matrix z = oracle::random_matrix(rng, 5, 7);
  CHECK(std::abs(kl_divergence(z, z)) <= 1e-12);
  CHECK_THROWS_AS(kl_divergence(z, Matrix::Ones(5, 6)), InvalidInput);
}

TEST_CASE("orthogonality_penalty") {
  Matrix disjoint = Matrix::Zero(4, 2);
  disjoint(0, 0) = 1.0;
  disjoint(3, 1) = 2.0;
  CHECK(orthogonality_penalty(disjoint, 1.0) == 0.0);

  Matrix twin = Matrix::Zero(4, 2);
  twin.col(0) << 0.5, 0.5, 0.5, 0.5;
  twin.col(1) = twin.col(0);
  CHECK(orthogonality_penalty(twin, 1.0) == doctest::Approx(2.0).epsilon(1e-15));

  std::mt19937_64 rng(11);
  const Matrix b = oracle::random_matrix(rng, 8, 3);
  CHECK(std::abs(orthogonality_penalty(b, 0.7) - oracle::penalty(b, 0.7)) <= 1e-12);
  CHECK_THROWS_AS(orthogonality_penalty(b, -1.0), InvalidInput);
}

TEST_CASE("total_cost") {
  std::mt19937_64 rng(5);
  Matrix x, y;
  NmfModel exact = exact_instance(rng, 6, 5, x, y);
  CHECK(std::abs(total_cost(exact, x, y).total) <= 1e-10);

  const NmfModel m = oracle::random_model(rng, 6, 5, 2, 2, 0.4);
  x = oracle::random_matrix(rng, 6, 5);
  y = oracle::random_matrix(rng, 6, 5);
  const CostTerms c = total_cost(m, x, y);
  CHECK(std::abs(c.total - oracle::cost(m, x, y)) <= 1e-12 * std::abs(c.total));
  CHECK(c.kl_internal >= 0.0);
  CHECK(c.kl_external >= 0.0);
  CHECK(c.penalty >= 0.0);

  NmfModel free = m;
  free.beta_ortho = 0.0;
  const CostTerms d = total_cost(free, x, y);
  CHECK(d.total == d.kl_internal + d.kl_external);
}

TEST_CASE("init_gains_random") {
  const Gains a = init_gains_random(2, 2, 3, 42);
  const Gains b = init_gains_random(2, 2, 3, 42);
  const Gains c = init_gains_random(2, 2, 3, 43);
  CHECK(a.source == b.source);
  CHECK(a.noise == b.noise);
  CHECK(a.external == b.external);
  CHECK(a.source != c.source);
  for (const Matrix* m : {&a.source, &a.noise, &a.external}) {
    CHECK(m->minCoeff() > kFloor);
    CHECK(m->maxCoeff() <= 1.0);
  }
  CHECK(a.source.size() + a.noise.size() + a.external.size() == 18);
  CHECK_THROWS_AS(init_gains_random(0, 2, 3, 1), InvalidInput);
}

TEST_CASE("update_step matches the scalar-loop oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(3, 20);
    const Eigen::Index f = dim(rng), t = dim(rng);
    const double beta = trial % 3 == 0 ? 0.0 : 0.05 * trial;
    const NmfModel m = oracle::random_model(rng, f, t, 2, 2, beta);
    const Matrix x = oracle::random_matrix(rng, f, t, 0.0, 2.0);
    const Matrix y = oracle::random_matrix(rng, f, t, 0.0, 2.0);
    const NmfModel want = oracle::update_step(m, x, y);
    for (const NmfModel& got : {update_step(m, x, y), reference::update_step(m, x, y)}) {
      CHECK(oracle::max_rel_diff(want.source_bases, got.source_bases) <= 1e-12);
      CHECK(oracle::max_rel_diff(want.noise_bases, got.noise_bases) <= 1e-12);
      CHECK(oracle::max_rel_diff(want.source_gains, got.source_gains) <= 1e-12);
      CHECK(oracle::max_rel_diff(want.noise_gains, got.noise_gains) <= 1e-12);
      CHECK(oracle::max_rel_diff(want.external_gains, got.external_gains) <= 1e-12);
    }
  }
}

TEST_CASE("update_step is bit-identical across thread counts") {
  std::mt19937_64 rng(8);
  const NmfModel m = oracle::random_model(rng, 150, 300, 4, 6, 0.5);
  const Matrix x = oracle::random_matrix(rng, 150, 300);
  const Matrix y = oracle::random_matrix(rng, 150, 300);
  const NmfModel one = update_step(m, x, y, Parallelism{1});
  for (int p : {2, 3, 4}) {
    const NmfModel many = update_step(m, x, y, Parallelism{p});
    CHECK(many.source_bases == one.source_bases);
    CHECK(many.noise_bases == one.noise_bases);
    CHECK(many.source_gains == one.source_gains);
    CHECK(many.noise_gains == one.noise_gains);
    CHECK(many.external_gains == one.external_gains);
  }
}

TEST_CASE("exact factorization is a fixed point") {
  std::mt19937_64 rng(17);
  Matrix x, y;
  const NmfModel m = exact_instance(rng, 9, 7, x, y);
  const NmfModel u = update_step(m, x, y);
  CHECK((u.source_bases - m.source_bases).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((u.noise_bases - m.noise_bases).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((u.source_gains - m.source_gains).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((u.noise_gains - m.noise_gains).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((u.external_gains - m.external_gains).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gain multipliers are invariant under joint scaling") {
  std::mt19937_64 rng(23);
  const double c = 7.5;
  const NmfModel m = oracle::random_model(rng, 10, 12, 2, 3, 0.0);
  const Matrix x = oracle::random_matrix(rng, 10, 12);
  const Matrix y = oracle::random_matrix(rng, 10, 12);
  NmfModel scaled = m;
  scaled.source_gains *= c;
  scaled.noise_gains *= c;
  scaled.external_gains *= c;
  const NmfModel a = update_step(m, x, y);
  const NmfModel b = update_step(scaled, c * x, c * y);
  CHECK(oracle::max_rel_diff(a.source_bases, b.source_bases) <= 1e-12);
  CHECK(oracle::max_rel_diff(a.noise_bases, b.noise_bases) <= 1e-12);
  CHECK(oracle::max_rel_diff(c * a.source_gains, b.source_gains) <= 1e-12);
  CHECK(oracle::max_rel_diff(c * a.noise_gains, b.noise_gains) <= 1e-12);
  CHECK(oracle::max_rel_diff(c * a.external_gains, b.external_gains) <= 1e-12);
}

TEST_CASE("cost is non-increasing without the penalty") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> dim(4, 32);
    const Eigen::Index f = dim(rng), t = dim(rng);
    NmfModel m = oracle::random_model(rng, f, t, 2, 2, 0.0);
    const Matrix x = oracle::random_matrix(rng, f, t, 0.0, 3.0);
    const Matrix y = oracle::random_matrix(rng, f, t, 0.0, 3.0);
    double before = total_cost(m, x, y).total;
    for (int it = 0; it < 10; ++it) {
      m = update_step(m, x, y);
      const double after = total_cost(m, x, y).total;
      REQUIRE(after <= before * (1.0 + 1e-10));
      REQUIRE(m.min_entry() >= kFloor);
      before = after;
    }
  }
}

TEST_CASE("non-finite data raises a numerical error") {
  std::mt19937_64 rng(4);
  const NmfModel m = oracle::random_model(rng, 6, 5, 2, 2, 0.0);
  Matrix x = oracle::random_matrix(rng, 6, 5);
  const Matrix y = oracle::random_matrix(rng, 6, 5);
  x(2, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(update_step(m, x, y), NumericalError);
}

TEST_CASE("shape mismatches are rejected") {
  std::mt19937_64 rng(4);
  const NmfModel m = oracle::random_model(rng, 6, 5, 2, 2, 0.0);
  CHECK_THROWS_AS(update_step(m, Matrix::Ones(6, 4), Matrix::Ones(6, 4)), InvalidInput);
  NmfModel bad = m;
  bad.noise_gains = Matrix::Ones(3, 5);
  CHECK_THROWS_AS(bad.check_shapes(), InvalidInput);
}

TEST_CASE("FactorizationConfig validation") {
  FactorizationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.source_bases = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta_ortho = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("factorize recovers an exact low-rank model") {
  std::mt19937_64 rng(31);
  const Eigen::Index f = 40, t = 60;
  NmfModel truth = oracle::random_model(rng, f, t, 2, 2, 0.0);
  // Sparse-ish ground truth keeps the factorization well conditioned.
  truth.source_bases = truth.source_bases.array().pow(4).matrix();
  truth.noise_bases = truth.noise_bases.array().pow(4).matrix();
  const Matrix x = truth.internal_model();
  const Matrix y = truth.external_model();

  FactorizationConfig cfg;
  cfg.source_bases = 2;
  cfg.noise_bases = 2;
  cfg.beta_ortho = 0.0;
  cfg.max_iters = 2000;
  const auto r = factorize(x, y, cfg);
  const Matrix mean_field = x.rowwise().sum() * x.colwise().sum() / x.sum();
  const double residual = kl_divergence(x, r.model.internal_model());
  CHECK(residual <= 1e-3 * kl_divergence(x, mean_field));
  CHECK(r.trace.increases.empty());
}

TEST_CASE("factorize loop contract and determinism") {
  std::mt19937_64 rng(12);
  const Matrix x = oracle::random_matrix(rng, 20, 30);
  const Matrix y = oracle::random_matrix(rng, 20, 30);
  FactorizationConfig cfg;
  cfg.source_bases = 4;
  cfg.noise_bases = 4;
  cfg.max_iters = 1;
  const auto one = factorize(x, y, cfg);
  CHECK(one.trace.iterations() == 1);
  CHECK(one.trace.entries.size() == 2);
  const NmfModel stepped = update_step(initialize_model(x, cfg), x, y);
  CHECK(one.model.source_bases == stepped.source_bases);
  CHECK(one.model.external_gains == stepped.external_gains);

  cfg.max_iters = 25;
  const auto a = factorize(x, y, cfg);
  const auto b = factorize(x, y, cfg);
  const auto c = factorize(x, y, cfg, Parallelism{3});
  REQUIRE(a.trace.entries.size() == b.trace.entries.size());
  for (std::size_t i = 0; i < a.trace.entries.size(); ++i) {
    CHECK(a.trace.entries[i].total == b.trace.entries[i].total);
    CHECK(a.trace.entries[i].total == c.trace.entries[i].total);
  }
  CHECK(a.model.source_gains == c.model.source_gains);
  // The trace agrees with an independent evaluation of the final model.
  CHECK(a.trace.entries.back().total == doctest::Approx(oracle::cost(a.model, x, y)).epsilon(1e-12));
}

TEST_CASE("early stopping ends on a flat cost") {
  std::mt19937_64 rng(13);
  Matrix x, y;
  const NmfModel truth = exact_instance(rng, 12, 14, x, y);
  FactorizationConfig cfg;
  cfg.source_bases = 2;
  cfg.noise_bases = 2;
  cfg.max_iters = 5000;
  cfg.early_stop = true;
  cfg.convergence_tol = 1e-3;
  const auto r = factorize(x, y, cfg);
  CHECK(r.trace.converged);
  CHECK(r.trace.iterations() < 5000);
}

TEST_CASE("random initialization is seed-deterministic") {
  std::mt19937_64 rng(14);
  const Matrix x = oracle::random_matrix(rng, 16, 20);
  FactorizationConfig cfg;
  cfg.source_bases = 2;
  cfg.noise_bases = 2;
  cfg.init = InitKind::Random;
  cfg.seed = 5;
  const NmfModel a = initialize_model(x, cfg);
  const NmfModel b = initialize_model(x, cfg);
  CHECK(a.source_bases == b.source_bases);
  cfg.seed = 6;
  CHECK(initialize_model(x, cfg).source_bases != a.source_bases);
  CHECK(a.min_entry() >= kFloor);
}

TEST_CASE("cost trace csv") {
  CostTrace trace;
  trace.entries.push_back({1.0, 2.0, 0.5, 3.5});
  std::ostringstream os;
  write_cost_trace_csv(trace, os);
  CHECK(os.str().rfind("iteration,kl_internal,kl_external,penalty,total\n0,1,2,0.5,3.5\n", 0) == 0);
}

TEST_CASE("onmf_update matches the scalar-loop oracle") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(3, 12);
    const Eigen::Index f = dim(rng), t = dim(rng), k = 3;
    const Matrix b = oracle::random_matrix(rng, f, k);
    const Matrix g = oracle::random_matrix(rng, k, t);
    const Matrix x = oracle::random_matrix(rng, f, t, 0.0, 2.0);
    const auto want = oracle::onmf_update(b, g, x);
    const auto got = onmf_update(b, g, x);
    CHECK(oracle::max_rel_diff(want.bases, got.bases) <= 1e-12);
    CHECK(oracle::max_rel_diff(want.gains, got.gains) <= 1e-12);
  }
}

TEST_CASE("onmf_update fixed point and zero data") {
  Matrix b = Matrix::Zero(6, 2);
  b(0, 0) = 0.6;
  b(1, 0) = 0.8;
  b(3, 1) = 1.0;
  std::mt19937_64 rng(2);
  const Matrix g = oracle::random_matrix(rng, 2, 5);
  const Matrix floored = b.cwiseMax(kFloor);
  const Matrix x = floored * g;
  const auto r = onmf_update(floored, g, x);
  CHECK((r.bases - floored).cwiseAbs().maxCoeff() <= 1e-12);

  const auto z = onmf_update(oracle::random_matrix(rng, 6, 2), g, Matrix::Zero(6, 5));
  CHECK(z.bases.maxCoeff() == kFloor);
  CHECK(z.gains.maxCoeff() == kFloor);
  CHECK_THROWS_AS(onmf_update(b, g, Matrix::Zero(5, 5)), InvalidInput);
}
