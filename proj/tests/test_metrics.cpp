#include <cmath>

#include "doctest.h"
#include "mpscl/metrics.hpp"
#include "mpscl/rng.hpp"

using namespace mpscl;

namespace {

ImageU8 mask_of(int h, int w, std::vector<std::uint8_t> v) { return ImageU8{h, w, std::move(v)}; }

// Exhaustive oracle: boundary extraction plus a full pairwise distance matrix.
double asd_oracle(const ImageU8& a, const ImageU8& b, int cat) {
  auto boundary = [&](const ImageU8& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.h; ++y) {
      for (int x = 0; x < m.w; ++x) {
        if (m.v[static_cast<std::size_t>(y) * m.w + x] != cat) continue;
        bool edge = false;
        const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || ny >= m.h || nx < 0 || nx >= m.w ||
              m.v[static_cast<std::size_t>(ny) * m.w + nx] != cat) {
            edge = true;
          }
        }
        if (edge) out.emplace_back(y, x);
      }
    }
    return out;
  };
  const auto ba = boundary(a);
  const auto bb = boundary(b);
  REQUIRE(!ba.empty());
  REQUIRE(!bb.empty());
  // full distance matrix, reduced twice
  auto directed = [](const auto& from, const auto& to) {
    double acc = 0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) {
        const double d = std::hypot(p.first - q.first, p.second - q.second);
        best = std::min(best, d);
      }
      acc += best;
    }
    return acc / static_cast<double>(from.size());
  };
  return 0.5 * (directed(ba, bb) + directed(bb, ba));
}

ImageU8 random_mask(Rng& rng, int h, int w, int categories) {
  ImageU8 m{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  // blobby random masks: threshold a few random discs
  for (auto& v : m.v) v = 0;
  for (int c = 1; c < categories; ++c) {
    const double cy = rng.uniform(2, h - 2), cx = rng.uniform(2, w - 2);
    const double r = rng.uniform(2.0, h / 3.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (std::hypot(y - cy, x - cx) < r) {
          m.v[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(c);
        }
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("dice closed forms") {
  auto a = mask_of(1, 8, {1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(dice_coefficient(a, a, 1) == 100.0);

  auto b = mask_of(1, 8, {0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(dice_coefficient(a, b, 1) == 0.0);

  // |P| = |G|/2, P inside G: 2*(|G|/2) / (3|G|/2) = 2/3
  auto g = mask_of(1, 8, {1, 1, 1, 1, 1, 1, 1, 1});
  auto p = mask_of(1, 8, {1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(dice_coefficient(p, g, 1) == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-12));

  // both empty -> 100 by convention
  CHECK(dice_coefficient(a, a, 3) == 100.0);

  // symmetry
  Rng rng(71);
  auto m1 = random_mask(rng, 16, 16, 3);
  auto m2 = random_mask(rng, 16, 16, 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(dice_coefficient(m1, m2, c) == dice_coefficient(m2, m1, c));
  }
}

TEST_CASE("asd closed forms") {
  auto a = mask_of(8, 8, std::vector<std::uint8_t>(64, 0));
  a.v[2 * 8 + 2] = 1;
  CHECK(asd_2d(a, a, 1) == 0.0);

  auto b = mask_of(8, 8, std::vector<std::uint8_t>(64, 0));
  b.v[2 * 8 + 5] = 1;  // 3 pixels to the right
  CHECK(asd_2d(a, b, 1) == doctest::Approx(3.0).epsilon(1e-12));

  // empty mask is undefined
  auto empty = mask_of(8, 8, std::vector<std::uint8_t>(64, 0));
  CHECK_THROWS_WITH_AS(asd_2d(a, empty, 1), doctest::Contains("undefined"), ValueError);
  CHECK_FALSE(try_asd_2d(a, empty, 1).has_value());
}

TEST_CASE("asd on concentric squares matches the exhaustive oracle") {
  const int n = 20;
  auto make_square = [&](int half) {
    ImageU8 m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    for (int y = n / 2 - half; y <= n / 2 + half; ++y) {
      for (int x = n / 2 - half; x <= n / 2 + half; ++x) {
        m.v[static_cast<std::size_t>(y) * n + x] = 1;
      }
    }
    return m;
  };
  auto s5 = make_square(5);
  auto s7 = make_square(7);
  CHECK(asd_2d(s5, s7, 1) == doctest::Approx(asd_oracle(s5, s7, 1)).epsilon(1e-9));
}

TEST_CASE("asd equals the brute-force oracle on random masks and is symmetric") {
  Rng rng(72);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_mask(rng, 24, 24, 2);
    auto b = random_mask(rng, 24, 24, 2);
    const auto ra = try_asd_2d(a, b, 1);
    if (!ra) continue;
    CHECK(*ra == doctest::Approx(asd_oracle(a, b, 1)).epsilon(1e-9));
    CHECK(asd_2d(a, b, 1) == asd_2d(b, a, 1));
  }
}

TEST_CASE("asd is translation invariant") {
  const int n = 24;
  auto disc = [&](int cy, int cx, double r) {
    ImageU8 m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (std::hypot(y - cy, x - cx) < r) m.v[static_cast<std::size_t>(y) * n + x] = 1;
    return m;
  };
  const double base = asd_2d(disc(8, 8, 3.0), disc(8, 11, 4.0), 1);
  const double shifted = asd_2d(disc(12, 10, 3.0), disc(12, 13, 4.0), 1);
  CHECK(base == doctest::Approx(shifted).epsilon(1e-12));
}

TEST_CASE("angle histogram puts aligned features in the first bin") {
  PrototypeSet protos;
  protos.num_categories = 2;
  protos.dim = 2;
  protos.initialized = true;
  protos.vectors = {1.0, 0.0, 0.0, 1.0};

  auto features = FeatureMap::wrap(
      Tensor::from_data({2, 2}, {2.0, 0.0, 0.0, 3.0}), 1, 2);
  auto labels = LabelMap::ground_truth(ImageU8{1, 2, {0, 1}}, 2);
  auto hist = angle_histogram(features, labels, protos, 16);
  CHECK(hist.total == 2);
  CHECK(hist.counts[0] == 2);
  CHECK(hist.mean_angle == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hist.fraction_below(0.7853981633974483) == 1.0);
}

TEST_CASE("orthogonal features land in the pi/2 bin") {
  PrototypeSet protos;
  protos.num_categories = 2;
  protos.dim = 2;
  protos.initialized = true;
  protos.vectors = {1.0, 0.0, 0.0, 1.0};
  auto features = FeatureMap::wrap(Tensor::from_data({1, 2}, {0.0, 5.0}), 1, 1);
  auto labels = LabelMap::ground_truth(ImageU8{1, 1, {0}}, 2);
  auto hist = angle_histogram(features, labels, protos, 8);  // bin width pi/8
  CHECK(hist.total == 1);
  CHECK(hist.counts[4] == 1);  // [pi/2, 5pi/8)
  CHECK(hist.mean_angle == doctest::Approx(1.5707963267948966).epsilon(1e-12));
}

TEST_CASE("angle histogram counts exactly the assigned pixels") {
  Rng rng(73);
  PrototypeSet protos;
  protos.num_categories = 3;
  protos.dim = 4;
  protos.initialized = true;
  protos.vectors.resize(12);
  for (auto& v : protos.vectors) v = rng.uniform(-1, 1);

  std::vector<double> f(16 * 4);
  for (auto& v : f) v = rng.uniform(-1, 1);
  auto features = FeatureMap::wrap(Tensor::from_data({16, 4}, f), 4, 4);
  std::vector<double> onehot(16 * 3, 0.0);
  int assigned = 0;
  for (int i = 0; i < 16; ++i) {
    if (i % 3 == 0) continue;  // leave some unassigned
    onehot[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(rng.uniform_int(3))] = 1.0;
    ++assigned;
  }
  auto labels = LabelMap::from_onehot(Tensor::from_data({16, 3}, onehot), 4, 4,
                                      LabelMap::Kind::Pseudo);
  auto hist = angle_histogram(features, labels, protos, 10);
  CHECK(hist.total == assigned);
  std::int64_t total = 0;
  for (auto c : hist.counts) total += c;
  CHECK(total == assigned);
}

TEST_CASE("evaluate_masks aggregates per-category and foreground means") {
  auto gt = mask_of(1, 6, {0, 1, 1, 2, 2, 0});
  auto pred_perfect = gt;
  auto report = evaluate_masks({pred_perfect}, {gt}, 3);
  CHECK(report.per_category[1].dice == 100.0);
  CHECK(report.per_category[2].dice == 100.0);
  CHECK(report.mean_foreground_dice == 100.0);
  REQUIRE(report.per_category[1].asd.has_value());
  CHECK(*report.per_category[1].asd == 0.0);
  REQUIRE(report.mean_foreground_asd.has_value());
  CHECK(*report.mean_foreground_asd == 0.0);

  // a category empty in both masks: dice 100 by convention, asd missing
  auto report2 = evaluate_masks({mask_of(1, 4, {0, 1, 1, 0})}, {mask_of(1, 4, {0, 1, 1, 0})}, 3);
  CHECK(report2.per_category[2].dice == 100.0);
  CHECK_FALSE(report2.per_category[2].asd.has_value());
  REQUIRE(report2.mean_foreground_asd.has_value());  // category 1 still defined
}
