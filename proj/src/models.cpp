#include "mpscl/models.hpp"

#include <cmath>
#include <string>

namespace mpscl {

namespace {

constexpr double kEncoderSlope = 0.1;
constexpr double kDiscSlope = 0.2;

// Centered uniform with fan-in scaling (Kaiming-style bound, which keeps the
// activation variance roughly constant through the stack); biases start at zero.
Tensor init_conv(Rng& rng, std::int64_t cout, std::int64_t cin, std::int64_t kh,
                 std::int64_t kw) {
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * kh * kw));
  std::vector<double> w(static_cast<std::size_t>(cout * cin * kh * kw));
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return Tensor::param({cout, cin, kh, kw}, std::move(w));
}

Tensor init_matrix(Rng& rng, std::int64_t rows, std::int64_t cols, std::int64_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> w(static_cast<std::size_t>(rows * cols));
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return Tensor::param({rows, cols}, std::move(w));
}

Tensor zero_param(Shape shape) {
  return Tensor::param(shape, std::vector<double>(static_cast<std::size_t>(shape_numel(shape)), 0.0));
}

}  // namespace

Generator::Generator(GeneratorConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.feature_dim < 1 || cfg.num_categories < 2) {
    throw ValueError("Generator: feature_dim must be >= 1 and num_categories >= 2");
  }
  const std::int64_t d = cfg.feature_dim;
  const std::int64_t L = cfg.num_categories;
  conv1_w = init_conv(rng, 16, 1, 3, 3);
  conv1_b = zero_param({16});
  conv2_w = init_conv(rng, 32, 16, 3, 3);
  conv2_b = zero_param({32});
  conv3_w = init_conv(rng, 32, 32, 3, 3);
  conv3_b = zero_param({32});
  conv4_w = init_conv(rng, d, 32, 3, 3);
  conv4_b = zero_param({d});
  cls_w = init_matrix(rng, d, L, d);
  cls_b = zero_param({1, L});
}

Generator::Output Generator::forward(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("Generator: image expects [1,H,W], got " + shape_str(image.shape()));
  }
  const std::int64_t h = image.dim(1), w = image.dim(2);
  if (h <= 0 || w <= 0) {
    throw ValueError("Generator: image height and width must be positive");
  }
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("Generator: H and W must be divisible by the downsample factor 2, got " +
                     shape_str(image.shape()));
  }
  auto h1 = leaky_relu(conv2d(image, conv1_w, conv1_b, 1, 1), kEncoderSlope);
  auto p1 = maxpool2x2(h1);
  auto h2 = leaky_relu(conv2d(p1, conv2_w, conv2_b, 1, 1), kEncoderSlope);
  auto h3 = leaky_relu(conv2d(h2, conv3_w, conv3_b, 1, 1), kEncoderSlope);
  auto h4 = conv2d(h3, conv4_w, conv4_b, 1, 1);
  auto up = upsample_nearest2x(h4);  // [d, H, W]
  auto feat = transpose2d(reshape(up, {cfg_.feature_dim, h * w}));  // [P, d]
  auto logits = add(matmul(feat, cls_w), cls_b);                    // [P, L]
  Output out;
  out.features = FeatureMap::wrap(std::move(feat), static_cast<int>(h), static_cast<int>(w));
  out.pred = PredictionMap::from_logits(std::move(logits), static_cast<int>(h), static_cast<int>(w));
  return out;
}

Generator::Output Generator::forward(const ImageF& image) const {
  if (image.v.size() != static_cast<std::size_t>(image.h) * image.w) {
    throw ShapeError("Generator: malformed image raster");
  }
  return forward(Tensor::from_data({1, image.h, image.w}, image.v));
}

std::vector<NamedParam> Generator::params() {
  return {
      {"g.conv1.w", conv1_w}, {"g.conv1.b", conv1_b},
      {"g.conv2.w", conv2_w}, {"g.conv2.b", conv2_b},
      {"g.conv3.w", conv3_w}, {"g.conv3.b", conv3_b},
      {"g.conv4.w", conv4_w}, {"g.conv4.b", conv4_b},
      {"g.cls.w", cls_w},     {"g.cls.b", cls_b},
  };
}

std::int64_t Generator::param_count() const {
  std::int64_t n = 0;
  for (const Tensor* t : {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b,
                          &conv4_w, &conv4_b, &cls_w, &cls_b}) {
    n += t->numel();
  }
  return n;
}

Discriminator::Discriminator(int num_categories, Rng& rng)
    : num_categories_(num_categories) {
  if (num_categories < 2) {
    throw ValueError("Discriminator: num_categories must be >= 2");
  }
  conv1_w = init_conv(rng, 16, num_categories, 4, 4);
  conv1_b = zero_param({16});
  conv2_w = init_conv(rng, 32, 16, 6, 6);
  conv2_b = zero_param({32});
  conv3_w = init_conv(rng, 1, 32, 6, 6);
  conv3_b = zero_param({1});
}

Tensor Discriminator::forward(const Tensor& self_info) const {
  if (self_info.rank() != 3 || self_info.dim(0) != num_categories_) {
    throw ShapeError("Discriminator: input expects [" + std::to_string(num_categories_) +
                     ",H,W], got " + shape_str(self_info.shape()));
  }
  const std::int64_t h = self_info.dim(1), w = self_info.dim(2);
  if (h % 8 != 0 || w % 8 != 0) {
    throw ShapeError("Discriminator: H and W must be divisible by 8, got " +
                     shape_str(self_info.shape()));
  }
  auto h1 = leaky_relu(conv2d(self_info, conv1_w, conv1_b, 2, 1), kDiscSlope);
  auto h2 = leaky_relu(conv2d(h1, conv2_w, conv2_b, 2, 2), kDiscSlope);
  auto h3 = conv2d(h2, conv3_w, conv3_b, 2, 2);
  return clamp(sigmoid(h3), kLogEps, 1.0 - kLogEps);
}

Tensor Discriminator::forward(const SelfInfoMap& map) const {
  // [P, L] -> [L, H, W]
  auto chw = reshape(transpose2d(map.values),
                     {static_cast<std::int64_t>(map.num_categories), map.h, map.w});
  return forward(chw);
}

std::vector<NamedParam> Discriminator::params() {
  return {
      {"d.conv1.w", conv1_w}, {"d.conv1.b", conv1_b},
      {"d.conv2.w", conv2_w}, {"d.conv2.b", conv2_b},
      {"d.conv3.w", conv3_w}, {"d.conv3.b", conv3_b},
  };
}

std::int64_t Discriminator::param_count() const {
  std::int64_t n = 0;
  for (const Tensor* t : {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b}) {
    n += t->numel();
  }
  return n;
}

}  // namespace mpscl
