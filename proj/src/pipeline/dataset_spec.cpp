#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "circlesnake/error.hpp"
#include "circlesnake/image_io.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_spec(const std::string& spec, const std::string& why) {
  throw Error(ErrorCategory::config, "dataset spec '" + spec + "': " + why);
}

class SyntheticDataset final : public Dataset {
 public:
  SyntheticDataset(std::uint64_t seed, int count, int size)
      : seed_(seed), count_(count), config_(data::SynthConfig::for_size(size)) {}

  std::size_t size() const override { return static_cast<std::size_t>(count_); }
  data::Sample get(std::size_t index) const override {
    if (index >= size()) throw InvalidInput("dataset index out of range");
    return data::generate_sample(seed_, static_cast<int>(index), config_);
  }
  std::string describe() const override {
    return "synthetic seed=" + std::to_string(seed_) + " count=" + std::to_string(count_) +
           " size=" + std::to_string(config_.image_size);
  }

 private:
  std::uint64_t seed_;
  int count_;
  data::SynthConfig config_;
};

class InMemoryDataset final : public Dataset {
 public:
  InMemoryDataset(std::vector<data::Sample> samples, std::string description)
      : samples_(std::move(samples)), description_(std::move(description)) {}

  std::size_t size() const override { return samples_.size(); }
  data::Sample get(std::size_t index) const override { return samples_.at(index); }
  std::string describe() const override { return description_; }

 private:
  std::vector<data::Sample> samples_;
  std::string description_;
};

std::uint64_t parse_number(const std::string& spec, const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    bad_spec(spec, key + " must be a nonnegative integer, got '" + text + "'");
  }
  return v;
}

std::unique_ptr<Dataset> open_synthetic(const std::string& spec, const std::string& body) {
  std::map<std::string, std::string> fields;
  std::size_t start = 0;
  while (start <= body.size()) {
    const std::size_t comma = std::min(body.find(',', start), body.size());
    const std::string item = body.substr(start, comma - start);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) bad_spec(spec, "expected key=value, got '" + item + "'");
    fields[item.substr(0, eq)] = item.substr(eq + 1);
    start = comma + 1;
  }
  for (const auto& [k, _] : fields) {
    if (k != "seed" && k != "count" && k != "size") bad_spec(spec, "unknown key '" + k + "'");
  }
  if (!fields.count("seed") || !fields.count("count")) bad_spec(spec, "seed and count are required");
  const std::uint64_t seed = parse_number(spec, "seed", fields["seed"]);
  const std::uint64_t count = parse_number(spec, "count", fields["count"]);
  const std::uint64_t size = fields.count("size") ? parse_number(spec, "size", fields["size"]) : 512;
  if (count < 1 || count > 1000000) bad_spec(spec, "count must be in [1, 1000000]");
  if (size < 64 || size > 4096 || size % 8 != 0) bad_spec(spec, "size must be a multiple of 8 in [64, 4096]");
  return std::make_unique<SyntheticDataset>(seed, static_cast<int>(count), static_cast<int>(size));
}

std::unique_ptr<Dataset> open_coco(const std::string& spec, const std::string& body) {
  const std::size_t at = body.rfind('@');
  if (at == std::string::npos) bad_spec(spec, "expected ANNOTATIONS.json@IMAGE_ROOT");
  const fs::path ann = body.substr(0, at);
  const fs::path root = body.substr(at + 1);
  return std::make_unique<InMemoryDataset>(data::load_coco(ann, root), "coco " + ann.string());
}

std::unique_ptr<Dataset> open_manifest(const std::string& spec, const std::string& body) {
  const std::size_t hash = body.rfind('#');
  if (hash == std::string::npos) bad_spec(spec, "expected PATH#SPLIT");
  fs::path path = body.substr(0, hash);
  const std::string split = body.substr(hash + 1);
  if (fs::is_directory(path)) path /= "manifest.json";
  const data::DatasetManifest manifest = data::read_manifest(path);
  const auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) bad_spec(spec, "manifest has no split '" + split + "'");
  const fs::path dir = path.parent_path();
  const std::set<std::string> wanted(it->second.begin(), it->second.end());
  std::vector<data::Sample> kept;
  for (auto& s : data::load_coco(dir / manifest.source, dir / "images")) {
    if (wanted.count(s.id)) kept.push_back(std::move(s));
  }
  if (kept.size() != wanted.size()) {
    throw Error(ErrorCategory::io, "manifest split '" + split + "' lists " +
                                       std::to_string(wanted.size()) + " samples but " +
                                       std::to_string(kept.size()) + " were found");
  }
  return std::make_unique<InMemoryDataset>(std::move(kept), "manifest " + path.string() + "#" + split);
}

std::unique_ptr<Dataset> open_images(const std::string& body) {
  const fs::path dir = body;
  if (!fs::is_directory(dir)) throw Error(ErrorCategory::io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<data::Sample> samples;
  for (const auto& f : files) {
    data::Sample s;
    s.id = f.stem().string();
    s.image = io::read_png(f);
    samples.push_back(std::move(s));
  }
  return std::make_unique<InMemoryDataset>(std::move(samples), "images " + dir.string());
}

}  // namespace

std::vector<data::Sample> Dataset::all() const {
  std::vector<data::Sample> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(get(i));
  return out;
}

std::unique_ptr<Dataset> open_dataset(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string::npos) bad_spec(spec, "expected KIND:ARGS");
  const std::string kind = spec.substr(0, colon);
  const std::string body = spec.substr(colon + 1);
  if (kind == "synthetic") return open_synthetic(spec, body);
  if (kind == "coco") return open_coco(spec, body);
  if (kind == "manifest") return open_manifest(spec, body);
  if (kind == "images") return open_images(body);
  bad_spec(spec, "unknown kind '" + kind + "' (synthetic, coco, manifest, images)");
}

}  // namespace circlesnake::pipeline
