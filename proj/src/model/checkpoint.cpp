#include "circlesnake/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "circlesnake/error.hpp"

namespace circlesnake::checkpoint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'C', 'S', 'N', 'K', 'C', 'K', 'P', 'T'};

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCategory::checkpoint, msg); }

std::string dtype_name(torch::Dtype t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: fail(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::Dtype dtype_from(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "uint8") return torch::kUInt8;
  fail("unknown dtype '" + s + "' in checkpoint header");
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void save(const Checkpoint& ckpt, const fs::path& path) {
  json table = json::array();
  std::vector<torch::Tensor> blobs;
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
    const std::uint64_t nbytes = t.numel() * t.element_size();
    table.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", offset},
                     {"nbytes", nbytes}});
    offset += nbytes;
    blobs.push_back(std::move(t));
  }
  const json header = {{"config", ckpt.config},
                       {"config_hash", ckpt.config_hash},
                       {"meta", ckpt.meta},
                       {"tensors", table},
                       {"optimizer", {{"offset", offset}, {"nbytes", ckpt.optimizer_state.size()}}}};
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kFormatVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : blobs) {
      out.write(static_cast<const char*>(t.data_ptr()),
                static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    out.write(ckpt.optimizer_state.data(), static_cast<std::streamsize>(ckpt.optimizer_state.size()));
    if (!out) throw Error(ErrorCategory::io, "failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    fail(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kFormatVersion) {
    fail(path.string() + ": unsupported checkpoint format version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, path);
  if (header_len > (1ULL << 30)) fail(path.string() + ": implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    fail("truncated checkpoint header in " + path.string());
  }
  const std::streamoff data_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::uint64_t data_size = static_cast<std::uint64_t>(in.tellg() - data_start);

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.config = header.at("config");
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.meta = header.value("meta", json::object());
    auto read_blob = [&](std::uint64_t off, std::uint64_t nbytes, void* dst) {
      if (off + nbytes > data_size) fail("truncated tensor data in " + path.string());
      in.clear();
      in.seekg(data_start + static_cast<std::streamoff>(off));
      if (!in.read(static_cast<char*>(dst), static_cast<std::streamsize>(nbytes))) {
        fail("truncated tensor data in " + path.string());
      }
    };
    for (const json& e : header.at("tensors")) {
      const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      torch::Tensor t = torch::empty(shape, dtype_from(e.at("dtype").get<std::string>()));
      const auto nbytes = e.at("nbytes").get<std::uint64_t>();
      if (nbytes != static_cast<std::uint64_t>(t.numel() * t.element_size())) {
        fail("tensor '" + e.at("name").get<std::string>() + "' size does not match its shape");
      }
      read_blob(e.at("offset").get<std::uint64_t>(), nbytes, t.data_ptr());
      ckpt.tensors.emplace(e.at("name").get<std::string>(), std::move(t));
    }
    const json& opt = header.at("optimizer");
    ckpt.optimizer_state.resize(opt.at("nbytes").get<std::size_t>());
    if (!ckpt.optimizer_state.empty()) {
      read_blob(opt.at("offset").get<std::uint64_t>(), ckpt.optimizer_state.size(),
                ckpt.optimizer_state.data());
    }
  } catch (const json::exception& e) {
    fail("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

std::map<std::string, torch::Tensor> state_of(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters(true)) out.emplace(p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers(true)) out.emplace(b.key(), b.value().detach().clone());
  return out;
}

void restore(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& tensors) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& name, torch::Tensor& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail("checkpoint is missing tensor '" + name + "'");
    if (it->second.sizes() != dst.sizes()) {
      fail("tensor '" + name + "' has shape " + c10::str(it->second.sizes()) + ", model expects " +
           c10::str(dst.sizes()));
    }
    dst.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) copy(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy(b.key(), b.value());
}

}  // namespace circlesnake::checkpoint
