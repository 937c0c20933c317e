#include "mpscl/maps.hpp"

#include <cmath>
#include <string>

namespace mpscl {

PredictionMap PredictionMap::from_logits(Tensor logits, int h, int w) {
  if (logits.rank() != 2) {
    throw ShapeError("PredictionMap: logits expect [P,L], got " + shape_str(logits.shape()));
  }
  if (logits.dim(0) != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("PredictionMap: logits rows " + std::to_string(logits.dim(0)) +
                     " do not match " + std::to_string(h) + "x" + std::to_string(w));
  }
  PredictionMap pm;
  pm.h = h;
  pm.w = w;
  pm.num_categories = static_cast<int>(logits.dim(1));
  pm.probs = softmax_rows(logits);
  pm.logits = std::move(logits);
  return pm;
}

PredictionMap PredictionMap::from_probs(Tensor probs, int h, int w) {
  if (probs.rank() != 2 || probs.dim(0) != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("PredictionMap: probs expect [" + std::to_string(h) + "*" +
                     std::to_string(w) + ", L], got " + shape_str(probs.shape()));
  }
  PredictionMap pm;
  pm.h = h;
  pm.w = w;
  pm.num_categories = static_cast<int>(probs.dim(1));
  pm.probs = std::move(probs);
  return pm;
}

void PredictionMap::validate() const {
  const auto& d = probs.data();
  const std::int64_t rows = probs.dim(0), cols = probs.dim(1);
  for (std::int64_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double v = d[static_cast<std::size_t>(r * cols + c)];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValueError("PredictionMap: probability out of [0,1] at pixel " + std::to_string(r));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValueError("PredictionMap: row " + std::to_string(r) + " sums to " +
                       std::to_string(sum));
    }
  }
}

LabelMap LabelMap::ground_truth(const ImageU8& mask, int num_categories) {
  if (mask.h <= 0 || mask.w <= 0 ||
      mask.v.size() != static_cast<std::size_t>(mask.h) * mask.w) {
    throw ShapeError("LabelMap: malformed mask raster");
  }
  const std::int64_t p = static_cast<std::int64_t>(mask.h) * mask.w;
  std::vector<double> onehot(static_cast<std::size_t>(p * num_categories), 0.0);
  for (std::int64_t i = 0; i < p; ++i) {
    const int cat = mask.v[static_cast<std::size_t>(i)];
    if (cat >= num_categories) {
      throw ValueError("LabelMap: mask value " + std::to_string(cat) + " at pixel " +
                       std::to_string(i) + " exceeds category count " +
                       std::to_string(num_categories));
    }
    onehot[static_cast<std::size_t>(i * num_categories + cat)] = 1.0;
  }
  LabelMap lm;
  lm.onehot = Tensor::from_data({p, num_categories}, std::move(onehot));
  lm.kind = Kind::GroundTruth;
  lm.h = mask.h;
  lm.w = mask.w;
  lm.num_categories = num_categories;
  return lm;
}

LabelMap LabelMap::from_onehot(Tensor onehot, int h, int w, Kind kind) {
  if (onehot.rank() != 2 || onehot.dim(0) != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("LabelMap: onehot expects [" + std::to_string(h) + "*" +
                     std::to_string(w) + ", L], got " + shape_str(onehot.shape()));
  }
  LabelMap lm;
  lm.num_categories = static_cast<int>(onehot.dim(1));
  lm.onehot = std::move(onehot);
  lm.kind = kind;
  lm.h = h;
  lm.w = w;
  lm.validate();
  return lm;
}

void LabelMap::validate() const {
  const auto& d = onehot.data();
  const std::int64_t rows = onehot.dim(0), cols = onehot.dim(1);
  for (std::int64_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double v = d[static_cast<std::size_t>(r * cols + c)];
      if (v != 0.0 && v != 1.0) {
        throw ValueError("LabelMap: non-binary entry at pixel " + std::to_string(r));
      }
      sum += v;
    }
    if (sum != 0.0 && sum != 1.0) {
      throw ValueError("LabelMap: pixel " + std::to_string(r) + " has " +
                       std::to_string(static_cast<int>(sum)) + " labels");
    }
    if (sum == 0.0 && kind == Kind::GroundTruth) {
      throw ValueError("LabelMap: ground-truth map leaves pixel " + std::to_string(r) +
                       " unassigned");
    }
  }
}

std::vector<std::int32_t> LabelMap::indices() const {
  const auto& d = onehot.data();
  const std::int64_t rows = onehot.dim(0), cols = onehot.dim(1);
  std::vector<std::int32_t> out(static_cast<std::size_t>(rows), -1);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      if (d[static_cast<std::size_t>(r * cols + c)] == 1.0) {
        out[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(c);
        break;
      }
    }
  }
  return out;
}

std::int64_t LabelMap::assigned_count() const {
  const auto idx = indices();
  std::int64_t n = 0;
  for (auto i : idx) n += (i >= 0);
  return n;
}

FeatureMap FeatureMap::wrap(Tensor values, int h, int w) {
  if (values.rank() != 2 || values.dim(0) != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("FeatureMap: values expect [" + std::to_string(h) + "*" +
                     std::to_string(w) + ", d], got " + shape_str(values.shape()));
  }
  FeatureMap fm;
  fm.dim = static_cast<int>(values.dim(1));
  fm.values = std::move(values);
  fm.h = h;
  fm.w = w;
  return fm;
}

}  // namespace mpscl
