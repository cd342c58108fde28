#include "affcue/attention_export.hpp"

#include <algorithm>
#include <bit>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "affcue/config_io.hpp"
#include "affcue/error.hpp"

namespace affcue {

static_assert(std::endian::native == std::endian::little, "raw attention files are little-endian");

namespace {

std::string stem(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "attn_%03d", step);
  return buf;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
}

/// Values mapped to 0..255 by min-max, rounding half to even.
std::vector<std::uint8_t> to_gray(const std::vector<float>& v) {
  std::vector<std::uint8_t> out(v.size(), 128);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(*hi > *lo)) return out;
  const int old = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double range = static_cast<double>(*hi) - *lo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = 255.0 * (static_cast<double>(v[i]) - *lo) / range;
    out[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(x), 0.0, 255.0));
  }
  std::fesetround(old);
  return out;
}

std::string pgm_from_gray(const std::vector<std::uint8_t>& g, int H, int W) {
  std::string s = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  s.append(reinterpret_cast<const char*>(g.data()), g.size());
  return s;
}

}  // namespace

std::vector<AttentionMap> attention_for_trajectory(const Model& model, const std::vector<float>& params,
                                                   const Trajectory& traj) {
  if (!model.has_attention()) throw Error(ErrorKind::ConfigError, "the baseline model has no attention map");
  if (params.size() != model.parameter_count()) throw Error(ErrorKind::CheckpointError, "parameter size mismatch");
  const nn::ParamRef<float> P{&model.layout(), params.data(), nullptr};
  const auto pass = model.forward<float>(P, traj, nullptr, {false, traj.T, 0});
  std::vector<AttentionMap> out;
  for (std::size_t t = 0; t < pass.enc.size(); ++t) {
    const nn::Vec<float> cue = pass.enc[t].aff_cue();
    out.push_back({static_cast<int>(t) + 1, model.cue_height(), model.cue_width(),
                   std::vector<float>(cue.data(), cue.data() + cue.size())});
  }
  return out;
}

std::vector<AttentionMap> attention_from_records(const NetworkPolicy& policy) {
  std::vector<AttentionMap> out;
  const auto& recs = policy.records();
  for (std::size_t t = 0; t < recs.size(); ++t) {
    if (recs[t].cue.empty()) throw Error(ErrorKind::ConfigError, "the baseline model has no attention map");
    out.push_back({static_cast<int>(t) + 1, policy.model().cue_height(), policy.model().cue_width(), recs[t].cue});
  }
  return out;
}

std::string pgm_bytes(const std::vector<float>& values, int H, int W) {
  if (static_cast<std::size_t>(H) * W != values.size()) throw Error(ErrorKind::ShapeError, "map size mismatch");
  return pgm_from_gray(to_gray(values), H, W);
}

void export_attention(const std::vector<AttentionMap>& maps, const std::filesystem::path& out_dir,
                      const std::vector<std::vector<float>>* depth_frames, int depth_h, int depth_w) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create " + out_dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const AttentionMap& m = maps[i];
    if (static_cast<std::size_t>(m.H) * m.W != m.values.size()) throw Error(ErrorKind::ShapeError, "map size mismatch");
    const std::string base = stem(m.step);
    write_bytes(out_dir / (base + ".f32"),
                std::string(reinterpret_cast<const char*>(m.values.data()), m.values.size() * sizeof(float)));
    const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
    write_json_file(out_dir / (base + ".json"),
                    Json{{"step", m.step}, {"H", m.H}, {"W", m.W}, {"min", m.values.empty() ? 0.0f : *lo},
                         {"max", m.values.empty() ? 0.0f : *hi}});
    write_bytes(out_dir / (base + ".pgm"), pgm_bytes(m.values, m.H, m.W));

    if (depth_frames && i < depth_frames->size()) {
      const auto& depth = (*depth_frames)[i];
      if (static_cast<std::size_t>(depth_h) * depth_w != depth.size()) {
        throw Error(ErrorKind::ShapeError, "depth frame size mismatch");
      }
      const auto d = to_gray(depth);
      const auto c = to_gray(m.values);
      std::vector<std::uint8_t> blend(depth.size());
      for (int r = 0; r < depth_h; ++r) {
        for (int col = 0; col < depth_w; ++col) {
          const int cr = std::min(m.H - 1, r * m.H / depth_h);
          const int cc = std::min(m.W - 1, col * m.W / depth_w);
          const std::size_t k = static_cast<std::size_t>(r) * depth_w + col;
          blend[k] = static_cast<std::uint8_t>((d[k] + c[static_cast<std::size_t>(cr) * m.W + cc] + 1) / 2);
        }
      }
      write_bytes(out_dir / (base + "_overlay.pgm"), pgm_from_gray(blend, depth_h, depth_w));
    }
  }
}

std::vector<float> read_attention_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::IOError, "cannot read " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size % sizeof(float) != 0) throw Error(ErrorKind::FormatError, path.string() + " is not a float32 grid");
  std::vector<float> v(size / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size));
  return v;
}

}  // namespace affcue
