#include <cmath>
#include <cstring>

#include "doctest.h"
#include "mpscl/losses.hpp"
#include "mpscl/models.hpp"
#include "mpscl/rng.hpp"

using namespace mpscl;

namespace {

Tensor random_image(Rng& rng, int h, int w) {
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = rng.uniform(0.0, 1.0);
  return Tensor::from_data({1, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("zero classifier weights give uniform probabilities") {
  Rng rng(51);
  Generator g({16, 5}, rng);
  std::fill(g.cls_w.mut_data().begin(), g.cls_w.mut_data().end(), 0.0);
  std::fill(g.cls_b.mut_data().begin(), g.cls_b.mut_data().end(), 0.0);
  Rng ir(52);
  auto out = g.forward(random_image(ir, 8, 8));
  for (std::int64_t i = 0; i < out.pred.probs.numel(); ++i) {
    CHECK(out.pred.probs.at(i) == doctest::Approx(0.2).epsilon(1e-14));
  }
}

TEST_CASE("generator output shapes follow the input grid") {
  Rng rng(53);
  Generator g({32, 5}, rng);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 8}, std::pair{8, 24}}) {
    Rng ir(54);
    auto out = g.forward(random_image(ir, h, w));
    CHECK(out.pred.probs.shape() == Shape{static_cast<std::int64_t>(h) * w, 5});
    CHECK(out.features.values.shape() == Shape{static_cast<std::int64_t>(h) * w, 32});
    out.pred.validate();
  }
}

TEST_CASE("generator rejects out-of-contract inputs") {
  Rng rng(55);
  Generator g({16, 5}, rng);
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 0, 8})), Error);
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 7, 8})), ShapeError);  // odd height
  CHECK_THROWS_AS(g.forward(Tensor::zeros({2, 8, 8})), ShapeError);  // two channels
}

TEST_CASE("repeated forwards on the same image are bitwise identical") {
  Rng rng(56);
  Generator g({16, 5}, rng);
  Rng ir(57);
  auto img = random_image(ir, 8, 8);
  auto a = g.forward(img);
  auto b = g.forward(img);
  CHECK(std::memcmp(a.pred.probs.data().data(), b.pred.probs.data().data(),
                    a.pred.probs.data().size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.features.values.data().data(), b.features.values.data().data(),
                    a.features.values.data().size() * sizeof(double)) == 0);
}

TEST_CASE("zero-initialized discriminator scores 0.5 everywhere") {
  Rng rng(58);
  Discriminator d(5, rng);
  for (auto& p : d.params()) {
    std::fill(p.tensor.mut_data().begin(), p.tensor.mut_data().end(), 0.0);
  }
  auto out = d.forward(Tensor::full({5, 16, 16}, 0.3));
  CHECK(out.shape() == Shape{1, 2, 2});
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 0.5);
}

TEST_CASE("discriminator output is invariant to a matched category permutation") {
  Rng rng(59);
  Discriminator d(5, rng);
  Rng ir(60);
  std::vector<double> input(5 * 16 * 16);
  for (auto& v : input) v = ir.uniform(0.0, 0.4);
  auto base = d.forward(Tensor::from_data({5, 16, 16}, input));

  // rotate input channels and the first conv's input-channel slices together
  const std::vector<int> perm{1, 2, 3, 4, 0};
  std::vector<double> pin(input.size());
  for (int c = 0; c < 5; ++c) {
    std::memcpy(pin.data() + static_cast<std::size_t>(c) * 256,
                input.data() + static_cast<std::size_t>(perm[static_cast<std::size_t>(c)]) * 256,
                256 * sizeof(double));
  }
  const auto& w = d.conv1_w.data();  // [cout, 5, 4, 4]
  const int cout = static_cast<int>(d.conv1_w.dim(0));
  std::vector<double> pw(w.size());
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < 5; ++ci) {
      std::memcpy(pw.data() + (static_cast<std::size_t>(co) * 5 + ci) * 16,
                  w.data() +
                      (static_cast<std::size_t>(co) * 5 +
                       static_cast<std::size_t>(perm[static_cast<std::size_t>(ci)])) *
                          16,
                  16 * sizeof(double));
    }
  }
  d.conv1_w.mut_data() = pw;
  auto permuted = d.forward(Tensor::from_data({5, 16, 16}, pin));
  for (std::int64_t i = 0; i < base.numel(); ++i) {
    CHECK(permuted.at(i) == doctest::Approx(base.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("gradient flows through the discriminator into its input") {
  Rng rng(61);
  Discriminator d(5, rng);
  auto f = [&](const Tensor& x) {
    return bce_domain_loss(d.forward(reshape(x, {5, 8, 8})), true);
  };
  Rng ir(62);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> v(5 * 64);
    for (auto& x : v) x = ir.uniform(0.01, 0.36);
    worst = std::max(worst, finite_diff_check(f, Tensor::from_data({5 * 64}, v), 1e-5));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("parameter budget stays under the desk-scale guard") {
  Rng rng(63);
  Generator g({32, 5}, rng);
  Discriminator d(5, rng);
  CHECK(g.param_count() + d.param_count() < 200000);
  CHECK(g.param_count() > 0);
  CHECK(static_cast<std::int64_t>(g.params().size()) == 10);
  CHECK(static_cast<std::int64_t>(d.params().size()) == 6);
}

TEST_CASE("forward, loss and backward stay finite over 1000 random trials") {
  Rng rng(64);
  Generator g({8, 5}, rng);
  const std::vector<double> weights{1, 1, 1, 1, 1};
  bool all_finite = true;
  for (int trial = 0; trial < 1000 && all_finite; ++trial) {
    Rng tr(splitmix64(static_cast<std::uint64_t>(trial) + 1000));
    std::vector<double> img(64);
    for (auto& v : img) v = tr.uniform(0.0, 1.0);
    ImageU8 mask{8, 8, std::vector<std::uint8_t>(64)};
    for (auto& m : mask.v) m = static_cast<std::uint8_t>(tr.uniform_int(5));
    auto out = g.forward(Tensor::from_data({1, 8, 8}, img));
    auto labels = LabelMap::ground_truth(mask, 5);
    auto loss = segmentation_loss(out.pred, labels, weights);
    loss.backward();
    if (!std::isfinite(loss.item())) all_finite = false;
    for (auto& p : g.params()) {
      for (double gv : p.tensor.grad()) {
        if (!std::isfinite(gv)) all_finite = false;
      }
    }
  }
  CHECK(all_finite);
}
