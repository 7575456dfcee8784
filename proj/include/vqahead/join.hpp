#pragma once

#include <span>
#include <string>
#include <vector>

#include "vqahead/annotations.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/feature_file.hpp"

namespace vqahead {

// A sample joined with its frozen-encoder features. Spans borrow from the
// FeatureSets and the annotation list, which must outlive the join result;
// both are immutable after load.
struct JoinedSample {
  const AnnotatedSample* sample = nullptr;
  std::vector<std::span<const float>> image_variants;  // ascending variant id, [0] canonical
  std::span<const float> text;

  std::span<const float> image() const { return image_variants.front(); }
};

enum class JoinMode { train, infer };

struct JoinResult {
  std::vector<JoinedSample> joined;    // annotation order preserved
  std::vector<std::string> skipped;    // infer mode: ids missing a feature
};

// Resolves image and text features by sample_id. Train mode requires the
// canonical variant of both features for every sample; infer mode collects
// unresolved ids into the skip list instead of dropping them silently.
inline JoinResult join_split(std::span<const AnnotatedSample> samples,
                             const FeatureSet& image_features,
                             const FeatureSet& text_features,
                             JoinMode mode) {
  JoinResult result;
  result.joined.reserve(samples.size());
  for (const auto& sample : samples) {
    const auto* img_variants = image_features.find_variants(sample.sample_id);
    const bool has_canonical_img =
        img_variants != nullptr && img_variants->find(0) != img_variants->end();
    const std::vector<float>* txt = text_features.find(sample.sample_id, 0);

    if (!has_canonical_img || txt == nullptr) {
      if (mode == JoinMode::train) {
        const char* side = !has_canonical_img ? "image" : "text";
        throw validation_error(std::string("missing ") + side +
                               " feature (variant 0) for key '" + sample.sample_id + "'");
      }
      result.skipped.push_back(sample.sample_id);
      continue;
    }

    JoinedSample js;
    js.sample = &sample;
    js.image_variants.reserve(img_variants->size());
    for (const auto& [variant, values] : *img_variants) {
      (void)variant;  // map iteration is ascending, variant 0 first
      js.image_variants.emplace_back(values.data(), values.size());
    }
    js.text = std::span<const float>(txt->data(), txt->size());
    result.joined.push_back(std::move(js));
  }
  return result;
}

}  // namespace vqahead
