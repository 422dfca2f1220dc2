#include "paracon/data_model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace paracon {

std::string_view to_string(NegativeType type) {
  switch (type) {
    case NegativeType::kImg:
      return "img";
    case NegativeType::kQue:
      return "que";
    case NegativeType::kRand:
      return "rand";
  }
  return "?";
}

NegativeType parse_negative_type(std::string_view name) {
  if (name == "img") return NegativeType::kImg;
  if (name == "que") return NegativeType::kQue;
  if (name == "rand") return NegativeType::kRand;
  throw std::invalid_argument("unknown negative type '" + std::string(name) + "'");
}

IndexedDataset IndexedDataset::build(std::vector<Sample> samples, DatasetHeader header,
                                     double epsilon, const QuestionEmbedder& embedder) {
  if (samples.empty()) throw std::invalid_argument("build_indices: no samples");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("build_indices: epsilon must be in (0, 1]");
  }
  if (header.num_labels <= 0) {
    throw std::invalid_argument("build_indices: num_labels must be positive");
  }
  if (samples.size() > UINT32_MAX) throw std::invalid_argument("build_indices: too many samples");

  IndexedDataset idx;
  idx.header_ = header;
  idx.epsilon_ = epsilon;
  idx.d_q_ = embedder.dim();
  idx.samples_ = std::move(samples);
  const auto n = static_cast<SampleIndex>(idx.samples_.size());

  idx.by_label_.assign(static_cast<std::size_t>(header.num_labels), {});
  std::map<std::string, std::size_t> group_ids;
  std::map<std::string, std::size_t> image_ids;
  std::map<std::string, std::size_t> text_ids;
  std::vector<std::size_t> sample_text(n);
  std::vector<std::vector<double>> text_vecs;
  idx.sample_group_.resize(n);
  idx.sample_image_.resize(n);

  for (SampleIndex i = 0; i < n; ++i) {
    Sample& s = idx.samples_[i];
    if (!idx.by_id_.emplace(s.sample_id, i).second) {
      throw std::invalid_argument("build_indices: duplicate sample_id '" + s.sample_id + "'");
    }
    if (s.image_features.size() != header.d_v) {
      throw std::invalid_argument("build_indices: sample '" + s.sample_id +
                                  "' has image_features of length " +
                                  std::to_string(s.image_features.size()) + ", expected " +
                                  std::to_string(header.d_v));
    }
    if (s.answer_label < 0 || s.answer_label >= header.num_labels) {
      throw std::invalid_argument("build_indices: sample '" + s.sample_id +
                                  "' has answer_label out of range");
    }
    auto [text_it, new_text] = text_ids.emplace(s.question_text, text_vecs.size());
    if (new_text) text_vecs.push_back(embed_question(s.question_text, embedder));
    sample_text[i] = text_it->second;
    s.question_embedding = text_vecs[text_it->second];

    auto [git, new_group] = group_ids.emplace(s.group_id, idx.group_members_.size());
    if (new_group) idx.group_members_.emplace_back();
    idx.group_members_[git->second].push_back(i);
    idx.sample_group_[i] = git->second;

    auto [iit, new_image] = image_ids.emplace(s.image_id, idx.image_members_.size());
    if (new_image) idx.image_members_.emplace_back();
    idx.image_members_[iit->second].push_back(i);
    idx.sample_image_[i] = iit->second;

    idx.by_label_[static_cast<std::size_t>(s.answer_label)].push_back(i);
    if (!s.is_paraphrase) idx.originals_.push_back(i);
  }

  for (const auto& [gid, g] : group_ids) {
    const auto& members = idx.group_members_[g];
    std::size_t originals = 0;
    for (SampleIndex m : members) {
      const Sample& s = idx.samples_[m];
      if (!s.is_paraphrase) ++originals;
      const Sample& first = idx.samples_[members.front()];
      if (s.image_id != first.image_id || s.answer_label != first.answer_label) {
        throw std::invalid_argument("build_indices: group '" + gid +
                                    "' mixes images or answer labels");
      }
    }
    if (originals != 1) {
      throw std::invalid_argument("build_indices: group '" + gid + "' has " +
                                  std::to_string(originals) +
                                  " original questions, expected exactly 1");
    }
  }

  // Question-similarity neighbourhoods, computed once per distinct text.
  const std::size_t num_texts = text_vecs.size();
  std::vector<std::vector<SampleIndex>> text_members(num_texts);
  for (SampleIndex i = 0; i < n; ++i) text_members[sample_text[i]].push_back(i);
  std::vector<std::vector<std::size_t>> similar_texts(num_texts);
  for (std::size_t a = 0; a < num_texts; ++a) {
    for (std::size_t b = a; b < num_texts; ++b) {
      if (cosine_similarity(text_vecs[a], text_vecs[b]) > epsilon) {
        similar_texts[a].push_back(b);
        if (a != b) similar_texts[b].push_back(a);
      }
    }
  }

  idx.que_negatives_.assign(n, {});
  idx.img_negative_count_.assign(n, 0);
  for (SampleIndex i = 0; i < n; ++i) {
    const int label = idx.samples_[i].answer_label;
    const std::size_t image = idx.sample_image_[i];
    auto& que = idx.que_negatives_[i];
    for (std::size_t t : similar_texts[sample_text[i]]) {
      for (SampleIndex j : text_members[t]) {
        if (idx.samples_[j].answer_label != label && idx.sample_image_[j] != image) {
          que.push_back(j);
        }
      }
    }
    std::sort(que.begin(), que.end());
    for (SampleIndex j : idx.image_members_[image]) {
      if (idx.samples_[j].answer_label != label) ++idx.img_negative_count_[i];
    }
  }
  return idx;
}

void IndexedDataset::check_index(SampleIndex i) const {
  if (i >= samples_.size()) {
    throw std::out_of_range("sample index " + std::to_string(i) + " is not in the dataset");
  }
}

SampleIndex IndexedDataset::index_of(std::string_view sample_id) const {
  auto it = by_id_.find(std::string(sample_id));
  if (it == by_id_.end()) {
    throw std::out_of_range("unknown sample_id '" + std::string(sample_id) + "'");
  }
  return it->second;
}

std::span<const SampleIndex> IndexedDataset::with_label(int label) const {
  if (label < 0 || label >= header_.num_labels) return {};
  return by_label_[static_cast<std::size_t>(label)];
}

std::span<const SampleIndex> IndexedDataset::group_of(SampleIndex i) const {
  check_index(i);
  return group_members_[sample_group_[i]];
}

std::span<const SampleIndex> IndexedDataset::image_of(SampleIndex i) const {
  check_index(i);
  return image_members_[sample_image_[i]];
}

std::span<const SampleIndex> IndexedDataset::question_negatives(SampleIndex i) const {
  check_index(i);
  return que_negatives_[i];
}

NegativeType IndexedDataset::classify_negative(SampleIndex x, SampleIndex xbar) const {
  check_index(x);
  check_index(xbar);
  const Sample& a = samples_[x];
  const Sample& b = samples_[xbar];
  if (a.answer_label == b.answer_label) {
    throw std::invalid_argument("classify_negative: '" + b.sample_id +
                                "' has the same answer as '" + a.sample_id +
                                "' and is not a negative");
  }
  if (sample_image_[x] == sample_image_[xbar]) return NegativeType::kImg;
  if (cosine_similarity(a.question_embedding, b.question_embedding) > epsilon_) {
    return NegativeType::kQue;
  }
  return NegativeType::kRand;
}

Positives IndexedDataset::positives(SampleIndex x) const {
  check_index(x);
  Positives out;
  const std::size_t group = sample_group_[x];
  for (SampleIndex j : group_members_[group]) {
    if (j != x) out.paraphrased.push_back(j);
  }
  for (SampleIndex j : with_label(samples_[x].answer_label)) {
    if (sample_group_[j] != group) out.intra_class.push_back(j);
  }
  return out;
}

std::vector<SampleIndex> IndexedDataset::negatives(SampleIndex x, NegativeType type) const {
  check_index(x);
  const int label = samples_[x].answer_label;
  const std::size_t image = sample_image_[x];
  std::vector<SampleIndex> out;
  switch (type) {
    case NegativeType::kImg:
      for (SampleIndex j : image_members_[image]) {
        if (samples_[j].answer_label != label) out.push_back(j);
      }
      std::sort(out.begin(), out.end());
      break;
    case NegativeType::kQue:
      out = que_negatives_[x];
      break;
    case NegativeType::kRand: {
      const auto& que = que_negatives_[x];
      for (SampleIndex j = 0; j < samples_.size(); ++j) {
        if (samples_[j].answer_label == label || sample_image_[j] == image) continue;
        if (std::binary_search(que.begin(), que.end(), j)) continue;
        out.push_back(j);
      }
      break;
    }
  }
  return out;
}

std::size_t IndexedDataset::negative_count(SampleIndex x, NegativeType type) const {
  check_index(x);
  switch (type) {
    case NegativeType::kImg:
      return img_negative_count_[x];
    case NegativeType::kQue:
      return que_negatives_[x].size();
    case NegativeType::kRand: {
      const std::size_t all =
          samples_.size() - by_label_[static_cast<std::size_t>(samples_[x].answer_label)].size();
      return all - img_negative_count_[x] - que_negatives_[x].size();
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// File format

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kRecordFields[] = {"sample_id",     "image_id", "image_features",
                                         "question_text", "answer_label", "group_id",
                                         "is_paraphrase"};

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
  ordered_json header;
  header["d_v"] = dataset.header.d_v;
  header["num_labels"] = dataset.header.num_labels;
  out << header.dump() << '\n';
  for (const Sample& s : dataset.samples) {
    ordered_json j;
    j["sample_id"] = s.sample_id;
    j["image_id"] = s.image_id;
    j["image_features"] = s.image_features;
    j["question_text"] = s.question_text;
    j["answer_label"] = s.answer_label;
    j["group_id"] = s.group_id;
    j["is_paraphrase"] = s.is_paraphrase;
    out << j.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      bad_line(line_no, e.what());
    }
    if (!j.is_object()) bad_line(line_no, "expected a JSON object");
    if (!have_header) {
      if (j.size() != 2 || !j.contains("d_v") || !j.contains("num_labels") ||
          !j["d_v"].is_number_unsigned() || !j["num_labels"].is_number_integer()) {
        bad_line(line_no, "header must be exactly {d_v, num_labels}");
      }
      dataset.header.d_v = j["d_v"].get<std::size_t>();
      dataset.header.num_labels = j["num_labels"].get<int>();
      have_header = true;
      continue;
    }
    if (j.size() != std::size(kRecordFields)) {
      bad_line(line_no, "record must have exactly the 7 sample fields");
    }
    for (const char* field : kRecordFields) {
      if (!j.contains(field)) bad_line(line_no, std::string("missing field '") + field + "'");
    }
    if (!j["answer_label"].is_number_integer()) bad_line(line_no, "answer_label must be an integer");
    try {
      Sample s;
      s.sample_id = j.at("sample_id").get<std::string>();
      s.image_id = j.at("image_id").get<std::string>();
      s.image_features = j.at("image_features").get<std::vector<double>>();
      s.question_text = j.at("question_text").get<std::string>();
      s.answer_label = j.at("answer_label").get<int>();
      s.group_id = j.at("group_id").get<std::string>();
      s.is_paraphrase = j.at("is_paraphrase").get<bool>();
      dataset.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      bad_line(line_no, e.what());
    }
  }
  if (!have_header) throw std::runtime_error("dataset: missing header line");
  return dataset;
}

void write_dataset_file(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
  write_dataset(out, dataset);
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset file '" + path + "'");
  return read_dataset(in);
}

}  // namespace paracon
