#include "paracon/synthetic_task.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "paracon/rng.hpp"

namespace paracon {

namespace {

const std::vector<std::string> kAttributes = {"color",  "shape",  "size",  "material",
                                              "texture", "pattern", "weight", "height",
                                              "age",    "brand",  "style", "mood"};
const std::vector<std::string> kObjects = {"car",   "dog",  "chair", "lamp", "boat",  "tree",
                                           "house", "cup",  "bird",  "shirt", "clock", "bench"};

const std::map<std::string, std::vector<std::string>>& synonyms() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"what", {"which"}},
      {"is", {"was", "appears"}},
      {"the", {"this", "that"}},
      {"of", {"on", "for"}},
      {"color", {"colour", "hue", "shade"}},
      {"shape", {"form", "outline"}},
      {"size", {"dimension", "scale"}},
      {"material", {"substance", "fabric"}},
      {"texture", {"feel", "finish"}},
      {"pattern", {"design", "motif"}},
      {"weight", {"heaviness", "mass"}},
      {"height", {"tallness", "elevation"}},
      {"age", {"oldness", "vintage"}},
      {"brand", {"make", "label"}},
      {"style", {"fashion", "look"}},
      {"mood", {"feeling", "atmosphere"}},
      {"car", {"automobile", "vehicle"}},
      {"dog", {"puppy", "hound"}},
      {"chair", {"seat", "stool"}},
      {"lamp", {"light", "lantern"}},
      {"boat", {"ship", "vessel"}},
      {"tree", {"plant", "oak"}},
      {"house", {"home", "building"}},
      {"cup", {"mug", "glass"}},
      {"bird", {"sparrow", "fowl"}},
      {"shirt", {"top", "blouse"}},
      {"clock", {"watch", "timer"}},
      {"bench", {"pew", "settle"}},
  };
  return table;
}

std::vector<std::string> template_tokens(std::size_t t) {
  const std::string attr = kAttributes[t % kAttributes.size()];
  const std::string object = kObjects[(t * 5 + t / kObjects.size()) % kObjects.size()];
  std::vector<std::string> tokens = {"what", "is", "the", attr, "of", "the", object};
  // Beyond the base vocabulary, disambiguate with a numbered qualifier.
  if (t >= kAttributes.size()) tokens.push_back("variant" + std::to_string(t / kAttributes.size()));
  return tokens;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> perturb(const std::vector<std::string>& tokens, double rate, Rng& rng) {
  const auto& table = synonyms();
  std::vector<std::string> out = tokens;
  bool substituted = false;
  for (auto& token : out) {
    auto it = table.find(token);
    if (it == table.end()) continue;
    if (rng.uniform() < rate) {
      token = it->second[rng.below(it->second.size())];
      substituted = true;
    }
  }
  if (rate > 0.0 && !substituted) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (table.count(out[i])) candidates.push_back(i);
    }
    const std::size_t pos = candidates[rng.below(candidates.size())];
    const auto& options = table.at(out[pos]);
    out[pos] = options[rng.below(options.size())];
  }
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (rng.uniform() < rate / 2.0) std::swap(out[i], out[i + 1]);
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_labels < 1 || num_images < 1 || groups_per_image < 1 || d_v < 1) {
    throw std::invalid_argument("synth: counts must be >= 1");
  }
  if (!(feature_noise >= 0.0)) throw std::invalid_argument("synth: feature_noise must be >= 0");
  if (!(perturb_rate >= 0.0 && perturb_rate <= 1.0)) {
    throw std::invalid_argument("synth: perturb_rate must be in [0, 1]");
  }
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng prototype_rng = root.stream(1);
  Rng image_rng = root.stream(2);

  const auto labels = static_cast<std::size_t>(spec.num_labels);
  const std::size_t templates = spec.groups_per_image;
  const std::size_t stride = std::max<std::size_t>(1, labels / templates);

  std::vector<std::vector<double>> prototypes(labels, std::vector<double>(spec.d_v));
  for (auto& proto : prototypes) {
    for (double& x : proto) x = prototype_rng.normal();
  }

  Dataset dataset;
  dataset.header = {spec.d_v, spec.num_labels};
  for (std::size_t image = 0; image < spec.num_images; ++image) {
    const std::string image_id = "img" + std::to_string(image);
    const std::size_t latent = image_rng.below(labels);
    std::vector<double> features = prototypes[latent];
    for (double& x : features) x += spec.feature_noise * image_rng.normal();

    for (std::size_t t = 0; t < templates; ++t) {
      const int answer = static_cast<int>((latent + t * stride) % labels);
      const std::string group_id = image_id + "_q" + std::to_string(t);
      const auto tokens = template_tokens(t);
      Sample original;
      original.sample_id = group_id;
      original.image_id = image_id;
      original.image_features = features;
      original.question_text = join(tokens);
      original.answer_label = answer;
      original.group_id = group_id;
      original.is_paraphrase = false;
      dataset.samples.push_back(original);

      Rng para_rng = root.stream(1000 + image * templates + t);
      std::set<std::string> seen{original.question_text};
      for (std::size_t p = 0; p < spec.paraphrases_per_group; ++p) {
        std::string text;
        // Prefer distinct rephrasings; give up after a few tries.
        for (int attempt = 0; attempt < 10; ++attempt) {
          text = join(perturb(tokens, spec.perturb_rate, para_rng));
          if (!seen.count(text)) break;
        }
        seen.insert(text);
        Sample para = original;
        para.sample_id = group_id + "_p" + std::to_string(p);
        para.question_text = text;
        para.is_paraphrase = true;
        dataset.samples.push_back(std::move(para));
      }
    }
  }
  return dataset;
}

std::pair<Dataset, Dataset> split_by_image(const Dataset& dataset, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("split_by_image: fraction must be in [0, 1]");
  }
  std::vector<std::string> images;
  std::set<std::string> seen;
  for (const auto& s : dataset.samples) {
    if (seen.insert(s.image_id).second) images.push_back(s.image_id);
  }
  const auto key = [seed](const std::string& id) { return splitmix64(stable_hash(id) ^ seed); };
  std::stable_sort(images.begin(), images.end(),
                   [&](const std::string& a, const std::string& b) { return key(a) < key(b); });
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(images.size())));
  const std::set<std::string> held_out(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(held));

  std::pair<Dataset, Dataset> out;
  out.first.header = dataset.header;
  out.second.header = dataset.header;
  for (const auto& s : dataset.samples) {
    (held_out.count(s.image_id) ? out.second : out.first).samples.push_back(s);
  }
  return out;
}

}  // namespace paracon
