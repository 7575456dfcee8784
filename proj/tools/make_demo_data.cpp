#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqahead/vqahead.hpp"

namespace vq = vqahead;
using nlohmann::json;

// Generates a small linearly separable corpus in the exact on-disk shapes
// the main CLI consumes: annotations JSON plus CFV1 image/text features.
// Class signal lives in one 4-wide block of the image vector; the third
// class doubles as the unanswerable fixture.

namespace {

struct ClassSpec {
  const char* word;
  const char* question;
  int answerable;
};

constexpr ClassSpec kClasses[] = {
    {"2", "how many items are on the table?", 1},
    {"blue", "what color is the mug?", 1},
    {"unanswerable", "what does the receipt say?", 0},
};
constexpr std::size_t kClassCount = std::size(kClasses);
constexpr std::size_t kBlock = 4;

json annotations_for(const std::string& prefix, std::size_t per_class, vq::SplitMix64& rng) {
  json arr = json::array();
  for (std::size_t c = 0; c < kClassCount; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      json answers = json::array();
      // One crowd answer in ten disagrees, which leaves the target intact
      // but keeps the selection stages honest.
      const std::size_t odd_one = rng.next_below(10);
      for (std::size_t a = 0; a < 10; ++a)
        answers.push_back({{"answer", a == odd_one ? "maybe" : kClasses[c].word}});
      arr.push_back({{"image", prefix + "_" + std::to_string(c) + "_" + std::to_string(i) + ".jpg"},
                     {"question", kClasses[c].question},
                     {"answers", answers},
                     {"answerable", kClasses[c].answerable}});
    }
  }
  return arr;
}

void add_features(vq::FeatureSet& img, vq::FeatureSet& txt, const json& annotations,
                  std::uint32_t variants, double noise, std::size_t d_txt,
                  vq::SplitMix64& rng) {
  const std::size_t d_img = kClassCount * kBlock;
  for (const auto& entry : annotations) {
    const std::string id = entry["image"].get<std::string>();
    // The class index sits right after the split prefix.
    const std::size_t underscore = id.rfind("_", id.rfind("_") - 1);
    const std::size_t cls = static_cast<std::size_t>(id[underscore + 1] - '0');
    for (std::uint32_t v = 0; v < variants; ++v) {
      vq::FeatureRecord rec;
      rec.key = id;
      rec.variant = v;
      rec.values.resize(d_img);
      for (std::size_t d = 0; d < d_img; ++d) {
        const double base = (d >= cls * kBlock && d < (cls + 1) * kBlock) ? 1.0 : 0.0;
        rec.values[d] = static_cast<float>(base + noise * rng.next_uniform(-1.0, 1.0));
      }
      img.insert(std::move(rec));
    }
    vq::FeatureRecord trec;
    trec.key = id;
    trec.variant = 0;
    trec.values.resize(d_txt);
    for (std::size_t d = 0; d < d_txt; ++d)
      trec.values[d] = static_cast<float>(0.3 * rng.next_uniform(-1.0, 1.0));
    txt.insert(std::move(trec));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a small separable demo corpus for the vqahead CLI"};
  std::string out_dir;
  std::size_t per_class = 40, val_per_class = 8, d_txt = 4;
  std::uint32_t variants = 1;
  std::uint64_t seed = 7;
  double noise = 0.08;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--per-class", per_class, "training samples per class (default 40)");
  app.add_option("--val-per-class", val_per_class, "validation samples per class (default 8)");
  app.add_option("--variants", variants, "image feature variants per sample (default 1)");
  app.add_option("--seed", seed, "RNG seed (default 7)");
  app.add_option("--noise", noise, "feature noise amplitude (default 0.08)");
  app.add_option("--d-txt", d_txt, "text feature dimension (default 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (per_class == 0) throw vq::validation_error("--per-class must be >= 1");
    if (variants == 0) throw vq::validation_error("--variants must be >= 1");
    if (d_txt == 0) throw vq::validation_error("--d-txt must be >= 1");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    vq::SplitMix64 rng(seed);
    const json train = annotations_for("train", per_class, rng);
    const json val = annotations_for("val", val_per_class, rng);

    vq::FeatureSet img(kClassCount * kBlock), txt(d_txt);
    add_features(img, txt, train, variants, noise, d_txt, rng);
    add_features(img, txt, val, variants, noise, d_txt, rng);

    vq::write_file_atomic(dir / "train_annotations.json", train.dump(2) + "\n");
    if (val_per_class > 0)
      vq::write_file_atomic(dir / "val_annotations.json", val.dump(2) + "\n");
    vq::write_feature_file(dir / "image_features.cfv1", img);
    vq::write_feature_file(dir / "text_features.cfv1", txt);

    json summary{{"dir", out_dir},
                 {"train_annotations", (dir / "train_annotations.json").string()},
                 {"image_features", (dir / "image_features.cfv1").string()},
                 {"text_features", (dir / "text_features.cfv1").string()},
                 {"train_samples", train.size()},
                 {"image_dim", kClassCount * kBlock},
                 {"text_dim", d_txt},
                 {"seed", seed}};
    if (val_per_class > 0) {
      summary["val_annotations"] = (dir / "val_annotations.json").string();
      summary["val_samples"] = val.size();
    }
    std::cout << summary.dump() << "\n";
  } catch (const vq::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vq::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
