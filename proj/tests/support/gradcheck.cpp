#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

GradCheckCase random_gradcheck_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const std::size_t dim = pick(3, 6);
  auto vec = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return v;
  };
  auto head = [&] {
    std::vector<double> w(dim * dim);
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t c = 0; c < dim; ++c) w[r * dim + c] = (r == c ? 1.0 : 0.0) + 0.5 * n(rng);
    }
    return rt2v::ProjectionHead(dim, dim, w);
  };
  GradCheckCase c;
  c.heads = {head(), head(), head()};
  c.temperature = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
  const std::size_t examples = pick(1, 3);
  for (std::size_t e = 0; e < examples; ++e) {
    rt2v::RawExample ex;
    ex.query = vec();
    const std::size_t np = pick(1, 3), nn = pick(0, 4);
    auto kind = [&] { return pick(0, 1) ? rt2v::ComponentKind::kObject : rt2v::ComponentKind::kRelation; };
    for (std::size_t i = 0; i < np; ++i) ex.positives.push_back({kind(), vec()});
    for (std::size_t i = 0; i < nn; ++i) ex.negatives.push_back({kind(), vec()});
    c.batch.push_back(std::move(ex));
  }
  return c;
}

// Relative error per entry is |a - n| / max(|a|, |n|, 1e-6): the floor keeps
// entries whose true derivative is (near) zero from dividing rounding noise
// by nothing; above it the comparison is purely relative.
GradCheckResult gradient_check(const GradCheckCase& c, double h) {
  const rt2v::HeadGradients g = rt2v::gradients(c.batch, c.heads, c.temperature);
  GradCheckResult out;
  auto check_head = [&](rt2v::ProjectionHead rt2v::HeadSet::*member, const std::vector<double>& analytic) {
    rt2v::HeadSet probe = c.heads;
    auto w = (probe.*member).weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double up = rt2v::batch_loss(c.batch, probe, c.temperature);
      w[i] = orig - h;
      const double down = rt2v::batch_loss(c.batch, probe, c.temperature);
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic[i] - numeric) / denom);
      ++out.entries;
    }
  };
  check_head(&rt2v::HeadSet::query, g.query);
  check_head(&rt2v::HeadSet::object, g.object);
  check_head(&rt2v::HeadSet::relation, g.relation);
  return out;
}

}  // namespace oracle
