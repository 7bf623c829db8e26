#include <fstream>
#include <unordered_map>

#include "circlesnake/data.hpp"
#include "circlesnake/error.hpp"
#include "json.hpp"

namespace circlesnake::data {

void DatasetManifest::validate() const {
  std::unordered_map<std::string, std::string> owner;
  for (const auto& [split, ids] : splits) {
    for (const auto& id : ids) {
      auto [it, inserted] = owner.emplace(id, split);
      if (!inserted) {
        throw InvalidInput("manifest: sample '" + id + "' appears in splits '" + it->second +
                           "' and '" + split + "'");
      }
    }
  }
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  nlohmann::json doc = {{"source", manifest.source},
                        {"seed", manifest.seed},
                        {"splits", manifest.splits}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  DatasetManifest m;
  try {
    const auto doc = nlohmann::json::parse(in);
    m.source = doc.at("source").get<std::string>();
    m.seed = doc.value("seed", std::uint64_t{0});
    m.splits = doc.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

}  // namespace circlesnake::data
