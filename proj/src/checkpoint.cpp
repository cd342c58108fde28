#include "affcue/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "affcue/error.hpp"

namespace affcue {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "parameter blobs are written little-endian");

Json config_json(const Checkpoint& c) {
  Json j;
  j["format"] = "affcue-checkpoint";
  j["version"] = kVersion;
  j["model"] = to_json(c.model);
  j["train"] = c.train;
  j["sim"] = to_json(c.sim);
  j["param_count"] = c.params.size();
  j["dtype"] = "float32";
  j["epoch"] = c.epoch;
  j["eval_success"] = c.eval_success ? Json(*c.eval_success) : Json(nullptr);
  return j;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create " + dir.string() + ": " + ec.message());
  write_json_file(dir / "config.json", config_json(ckpt));
  std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + (dir / "params.bin").string());
  const std::uint64_t n = ckpt.params.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(ckpt.params.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!out) throw Error(ErrorKind::IOError, "short write to " + (dir / "params.bin").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto cfg_path = dir / "config.json";
  const auto bin_path = dir / "params.bin";
  if (!std::filesystem::exists(cfg_path) || !std::filesystem::exists(bin_path)) {
    throw Error(ErrorKind::CheckpointError, dir.string() + " is not a checkpoint (config.json/params.bin missing)");
  }
  Checkpoint c;
  try {
    const Json j = read_json_file(cfg_path);
    c.model = model_config_from_json(j.at("model"));
    c.train = j.at("train");
    c.sim = sim_config_from_json(j.at("sim"));
    c.epoch = j.at("epoch").get<int>();
    if (!j.at("eval_success").is_null()) c.eval_success = j.at("eval_success").get<double>();
  } catch (const Error& e) {
    throw Error(ErrorKind::CheckpointError, "bad checkpoint config: " + std::string(e.what()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CheckpointError, "bad checkpoint config: " + std::string(e.what()));
  }

  std::ifstream in(bin_path, std::ios::binary);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw Error(ErrorKind::CheckpointError, bin_path.string() + " has a bad header");
  }
  const std::size_t expected = Model(c.model).parameter_count();
  if (n != expected) {
    throw Error(ErrorKind::CheckpointError, "parameter blob holds " + std::to_string(n) +
                                                " values but the model needs " + std::to_string(expected));
  }
  c.params.resize(n);
  in.read(reinterpret_cast<char*>(c.params.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw Error(ErrorKind::CheckpointError, bin_path.string() + " is truncated");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::CheckpointError, bin_path.string() + " has trailing bytes");
  }
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelConfig& expected) {
  Checkpoint c = load_checkpoint(dir);
  if (!(c.model == expected)) {
    std::string msg = "checkpoint model config differs in:";
    for (const auto& path : json_diff(to_json(c.model), to_json(expected))) msg += " " + path;
    throw Error(ErrorKind::CheckpointError, msg);
  }
  return c;
}

}  // namespace affcue
