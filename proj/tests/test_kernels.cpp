#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nfisam/kernels/kernels.hpp"

using nfisam::kernels::Ops;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

bool close_rel(double a, double b, double tol) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

}  // namespace

TEST_CASE("every available implementation agrees with the scalar reference") {
  const Ops& ref = nfisam::kernels::scalar_ops();
  std::mt19937_64 rng(7);

  for (const Ops* ops : nfisam::kernels::available()) {
    CAPTURE(ops->name);

    for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 129u}) {
      auto a = random_vec(rng, n, -3.0, 3.0);
      auto b = random_vec(rng, n, -3.0, 3.0);

      CHECK(close_rel(ops->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), 1e-12));
      CHECK(close_rel(ops->sum(a.data(), n), ref.sum(a.data(), n), 1e-12));

      auto y1 = b, y2 = b;
      ops->axpy(y1.data(), 0.37, a.data(), n);
      ref.axpy(y2.data(), 0.37, a.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-13));
    }

    // transcendentals over a wide range
    auto x = random_vec(rng, 4096, -690.0, 690.0);
    x.push_back(0.0);
    x.push_back(-1e-12);
    x.push_back(708.0);
    {
      auto got = x;
      ops->exp_inplace(got.data(), got.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(close_rel(got[i], std::exp(x[i]), 1e-12));
    }
    {
      auto pos = random_vec(rng, 4096, 1e-12, 1.0);
      auto wide = random_vec(rng, 4096, 1.0, 1e12);
      pos.insert(pos.end(), wide.begin(), wide.end());
      auto got = pos;
      ops->log_inplace(got.data(), got.size());
      for (std::size_t i = 0; i < pos.size(); ++i)
        CHECK(close_rel(got[i], std::log(pos[i]), 1e-12));
    }
    {
      auto v = random_vec(rng, 2048, -40.0, 40.0);
      std::vector<double> got(v.size()), want(v.size());
      ops->softplus(v.data(), got.data(), v.size());
      ref.softplus(v.data(), want.data(), v.size());
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(close_rel(got[i], want[i], 1e-12));
      ops->sigmoid(v.data(), got.data(), v.size());
      ref.sigmoid(v.data(), want.data(), v.size());
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(close_rel(got[i], want[i], 1e-12));
    }

    // matmul against reference on ragged shapes
    for (auto [m, p, k] : {std::array<std::size_t, 3>{1, 1, 1},
                           std::array<std::size_t, 3>{3, 5, 2},
                           std::array<std::size_t, 3>{8, 4, 33},
                           std::array<std::size_t, 3>{17, 9, 31}}) {
      auto a = random_vec(rng, m * k, -2.0, 2.0);
      auto b = random_vec(rng, p * k, -2.0, 2.0);
      std::vector<double> c1(m * p, 0.5), c2(m * p, 0.5);
      ops->matmul_nt(a.data(), m, b.data(), p, k, c1.data(), true);
      ref.matmul_nt(a.data(), m, b.data(), p, k, c2.data(), true);
      for (std::size_t i = 0; i < c1.size(); ++i) CHECK(close_rel(c1[i], c2[i], 1e-12));
      ops->matmul_nt(a.data(), m, b.data(), p, k, c1.data(), false);
      ref.matmul_nt(a.data(), m, b.data(), p, k, c2.data(), false);
      for (std::size_t i = 0; i < c1.size(); ++i) CHECK(close_rel(c1[i], c2[i], 1e-12));
    }
  }
}

TEST_CASE("active kernels are one of the available set") {
  const Ops& act = nfisam::kernels::active();
  bool found = false;
  for (const Ops* ops : nfisam::kernels::available())
    if (ops == &act) found = true;
  CHECK(found);
}
