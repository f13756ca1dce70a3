#include "mocoll/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "mocoll/error.hpp"
#include "mocoll/io.hpp"
#include "mocoll/rng.hpp"
#include "mocoll/text.hpp"

namespace mocoll {

namespace {

constexpr size_t kMaxImages = 4;

struct RawRecord {
  std::string case_id;
  std::vector<std::string> images;
  std::string finding;
  std::string impression;
  std::string report;  // pre-composed report (ingested corpora)
  std::string split;   // empty when absent
  size_t index = 0;    // 1-based record index in the manifest
};

std::vector<RawRecord> read_jsonl_manifest(const std::filesystem::path& path) {
  std::vector<RawRecord> records;
  for_each_jsonl(path, [&](size_t line_no, const nlohmann::json& rec) {
    RawRecord r;
    r.index = records.size() + 1;
    if (!rec.is_object() || !rec.contains("case_id") || !rec["case_id"].is_string())
      raise(path.string(), ":", line_no, ": record missing string case_id");
    r.case_id = rec["case_id"].get<std::string>();
    if (rec.contains("images")) {
      if (!rec["images"].is_array())
        raise(path.string(), ":", line_no, ": images must be an array (case_id=", r.case_id, ")");
      for (const auto& img : rec["images"]) {
        if (!img.is_string())
          raise(path.string(), ":", line_no, ": image ref must be a string (case_id=", r.case_id, ")");
        r.images.push_back(img.get<std::string>());
      }
    }
    if (rec.contains("finding") && rec["finding"].is_string())
      r.finding = rec["finding"].get<std::string>();
    if (rec.contains("impression") && rec["impression"].is_string())
      r.impression = rec["impression"].get<std::string>();
    if (rec.contains("report") && rec["report"].is_string())
      r.report = rec["report"].get<std::string>();
    if (rec.contains("split")) {
      if (!rec["split"].is_string())
        raise(path.string(), ":", line_no, ": split must be a string (case_id=", r.case_id, ")");
      r.split = rec["split"].get<std::string>();
    }
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<RawRecord> read_csv_manifest(const std::filesystem::path& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) return {};
  std::unordered_map<std::string, size_t> col;
  for (size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
  if (!col.count("case_id")) raise(path.string(), ": CSV manifest missing case_id column");
  auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
    auto it = col.find(name);
    if (it == col.end() || it->second >= row.size()) return "";
    return row[it->second];
  };
  std::vector<RawRecord> records;
  for (size_t i = 1; i < rows.size(); ++i) {
    RawRecord r;
    r.index = i;
    r.case_id = cell(rows[i], "case_id");
    if (r.case_id.empty()) raise(path.string(), ": record ", i, ": missing case_id");
    // images cell holds semicolon-separated refs
    std::string images = cell(rows[i], "images");
    size_t pos = 0;
    while (pos <= images.size() && !images.empty()) {
      size_t next = images.find(';', pos);
      std::string ref = trim(images.substr(pos, next == std::string::npos ? next : next - pos));
      if (!ref.empty()) r.images.push_back(ref);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    r.finding = cell(rows[i], "finding");
    r.impression = cell(rows[i], "impression");
    r.report = cell(rows[i], "report");
    r.split = cell(rows[i], "split");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  raise("unknown split name: ", name);
}

std::vector<const CaptionedCase*> Corpus::split_cases(Split s) const {
  std::vector<const CaptionedCase*> out;
  for (const auto& c : cases)
    if (c.split == s) out.push_back(&c);
  return out;
}

const CaptionedCase* Corpus::find(const std::string& case_id) const {
  for (const auto& c : cases)
    if (c.case_id == case_id) return &c;
  return nullptr;
}

std::string compose_report(const std::string& finding, const std::string& impression) {
  std::string f = trim(finding), i = trim(impression);
  if (f.empty() && i.empty()) raise("compose_report: both finding and impression are empty");
  if (f.empty()) return i;
  if (i.empty()) return f;
  return f + " " + i;
}

Corpus load_corpus(const std::filesystem::path& manifest_path, ManifestFormat format,
                   LoadStats* stats) {
  if (!std::filesystem::exists(manifest_path))
    raise("manifest not found: ", manifest_path.string());
  std::vector<RawRecord> records = format == ManifestFormat::jsonl
                                       ? read_jsonl_manifest(manifest_path)
                                       : read_csv_manifest(manifest_path);
  Corpus corpus;
  corpus.name = manifest_path.stem().string();
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  st.n_records = records.size();

  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.case_id).second)
      raise("duplicate case_id in manifest: ", r.case_id);
    if (r.images.size() > kMaxImages)
      raise("case ", r.case_id, " has ", r.images.size(), " image refs (max ", kMaxImages, ")");
    auto drop = [&](const char* reason) {
      ++st.n_dropped;
      st.drop_reasons.push_back("record " + std::to_string(r.index) + " (case_id=" + r.case_id +
                                "): " + reason);
    };
    if (r.images.empty()) {
      drop("missing images");
      continue;
    }
    if (trim(r.report).empty() && trim(r.finding).empty() && trim(r.impression).empty()) {
      drop("missing report");
      continue;
    }
    std::string report =
        trim(r.report).empty() ? compose_report(r.finding, r.impression) : trim(r.report);
    if (normalize_text(report).empty()) {
      drop("report empty after preprocessing");
      continue;
    }
    CaptionedCase c;
    c.case_id = r.case_id;
    c.image_refs = r.images;
    c.report_text = report;
    c.split = r.split.empty() ? Split::train : split_from_name(r.split);
    corpus.cases.push_back(std::move(c));
  }
  st.n_loaded = corpus.cases.size();
  if (corpus.cases.empty()) raise("zero surviving cases in manifest: ", manifest_path.string());
  return corpus;
}

Corpus split_corpus(const Corpus& corpus, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) raise("split ratio must be in (0, 1), got ", ratio);
  const size_t n = corpus.cases.size();
  if (n < 2) raise("cannot split a corpus with fewer than 2 cases (have ", n, ")");
  const auto n_train = static_cast<size_t>(std::lround(ratio * static_cast<double>(n)));

  // Shuffle over case_id order so the assignment depends on (cases, seed)
  // only, not on manifest ordering.
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return corpus.cases[a].case_id < corpus.cases[b].case_id;
  });
  Rng rng(seed);
  rng.shuffle(order);

  Corpus out = corpus;
  for (size_t i = 0; i < n; ++i)
    out.cases[order[i]].split = i < n_train ? Split::train : Split::test;
  return out;
}

Corpus apply_vocab_filter(const Corpus& corpus, const VocabFilter& filter) {
  if (filter.min_frequency < 0) raise("vocab filter min_frequency must be >= 0");
  if (filter.min_frequency == 0) return corpus;

  std::unordered_map<std::string, int> freq;
  for (const auto& c : corpus.cases) {
    if (c.split != Split::train) continue;
    for (const auto& tok : tokenize(c.report_text)) ++freq[tok];
  }

  Corpus out = corpus;
  out.vocab_cutoff = filter.min_frequency;
  for (auto& c : out.cases) {
    std::vector<std::string> toks = tokenize(c.report_text);
    for (auto& tok : toks) {
      auto it = freq.find(tok);
      if (it == freq.end() || it->second < filter.min_frequency) tok = filter.unknown_token;
    }
    c.report_text = join(toks, " ");
  }
  return out;
}

}  // namespace mocoll
