#include "affcue/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "affcue/config_io.hpp"
#include "affcue/error.hpp"
#include "affcue/rng.hpp"

namespace affcue {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 * 4 + 1 + 1 + 4 + 4;

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(const std::vector<float>& v) {
    for (float f : v) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > in_.size()) {
      throw Error(ErrorKind::FormatError, std::string(what) + " truncated at byte offset " +
                                              std::to_string(pos_) + " (need " + std::to_string(n) +
                                              " bytes, have " + std::to_string(in_.size() - pos_) + ")");
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::vector<float> f32(std::size_t count, const char* what) {
    need(count * 4, what);
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(in_[pos_ + 4 * i + k]) << (8 * k);
      v[i] = std::bit_cast<float>(bits);
    }
    pos_ += count * 4;
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

bool all_finite(const std::vector<float>& v) {
  for (float f : v) {
    if (!std::isfinite(f)) return false;
  }
  return true;
}

}  // namespace

void Trajectory::validate() const {
  if (T < 2) throw Error(ErrorKind::ShapeError, "trajectory " + id + ": T must be >= 2");
  if (H <= 0 || W <= 0) throw Error(ErrorKind::ShapeError, "trajectory " + id + ": empty image size");
  const auto t = static_cast<std::size_t>(T);
  if (depth.size() != t * H * W || state.size() != t * kStateDim || action.size() != (t - 1) * kActionDim) {
    throw Error(ErrorKind::ShapeError, "trajectory " + id + ": array sizes do not match T/H/W");
  }
  if (!all_finite(depth) || !all_finite(state) || !all_finite(action)) {
    throw Error(ErrorKind::ShapeError, "trajectory " + id + ": non-finite values");
  }
  if (gt_segment) {
    const auto [m, n] = *gt_segment;
    if (m < 1 || m > n || n > T) throw Error(ErrorKind::ShapeError, "trajectory " + id + ": bad segment bounds");
  }
}

std::vector<std::uint8_t> encode_trajectory(const Trajectory& t) {
  t.validate();
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(t.T));
  w.u32(static_cast<std::uint32_t>(t.H));
  w.u32(static_cast<std::uint32_t>(t.W));
  w.u8(static_cast<std::uint8_t>(t.category));
  w.u8(t.gt_segment ? 1 : 0);
  w.u32(t.gt_segment ? static_cast<std::uint32_t>(t.gt_segment->first) : 0);
  w.u32(t.gt_segment ? static_cast<std::uint32_t>(t.gt_segment->second) : 0);
  w.f32(t.depth);
  w.f32(t.state);
  w.f32(t.action);
  return w.take();
}

Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorKind::FormatError, "bad magic bytes");
  r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw Error(ErrorKind::FormatError, "unsupported version " + std::to_string(version));
  }
  Trajectory t;
  t.T = static_cast<int>(r.u32("T"));
  t.H = static_cast<int>(r.u32("H"));
  t.W = static_cast<int>(r.u32("W"));
  const std::uint8_t cat = r.u8("category");
  if (cat >= kNumCategories) throw Error(ErrorKind::FormatError, "bad category byte " + std::to_string(cat));
  t.category = static_cast<AffordanceCategory>(cat);
  const std::uint8_t has_gt = r.u8("has_gt_segment");
  const std::uint32_t m = r.u32("m");
  const std::uint32_t n = r.u32("n");
  if (has_gt > 1) throw Error(ErrorKind::FormatError, "bad has_gt_segment byte");
  if (has_gt) t.gt_segment = std::make_pair(static_cast<int>(m), static_cast<int>(n));
  if (t.T < 2 || t.H <= 0 || t.W <= 0) throw Error(ErrorKind::FormatError, "bad shape header");
  const auto T = static_cast<std::size_t>(t.T);
  t.depth = r.f32(T * t.H * t.W, "depth block");
  t.state = r.f32(T * kStateDim, "state block");
  t.action = r.f32((T - 1) * kActionDim, "action block");
  if (r.remaining() != 0) {
    throw Error(ErrorKind::FormatError, "trailing bytes after action block at offset " + std::to_string(r.pos()));
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
  return t;
}

void save_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  const auto bytes = encode_trajectory(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IOError, "write failed for " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Trajectory t = decode_trajectory(bytes);
  t.id = path.stem().string();
  return t;
}

std::pair<int, int> detect_interaction_bounds(const std::vector<Pose6>& trace, const SegmentThresholds& th) {
  int m = 0;
  int n = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double dpos = (trace[k].head<3>() - trace[k - 1].head<3>()).norm();
    const Mat3 r0 = rotation_from_rpy(trace[k - 1][3], trace[k - 1][4], trace[k - 1][5]);
    const Mat3 r1 = rotation_from_rpy(trace[k][3], trace[k][4], trace[k][5]);
    const double drot = Eigen::AngleAxisd(r0.transpose() * r1).angle();
    if (dpos > th.eps_pos || drot > th.eps_rot) {
      const int t = static_cast<int>(k) + 1;  // 1-based step of the later pose
      if (m == 0) m = t;
      n = t;
    }
  }
  if (m == 0) throw Error(ErrorKind::NoInteraction, "mug pose never changes beyond thresholds");
  return {m, n};
}

InteractionSegment segment_from_bounds(const Trajectory& traj, std::pair<int, int> bounds) {
  const auto [m, n] = bounds;
  if (m < 1 || m > n || n > traj.T) throw Error(ErrorKind::ShapeError, "segment bounds out of range");
  InteractionSegment seg;
  seg.bounds = bounds;
  for (int t = m; t <= n; ++t) {
    seg.states.push_back(traj.state_row(t - 1).cast<double>());
    if (t == 1) {
      seg.prev_actions.push_back(Eigen::VectorXd::Zero(kActionDim));
    } else {
      seg.prev_actions.push_back(traj.action_row(t - 2).cast<double>());
    }
  }
  return seg;
}

InteractionSegment extract_interaction_segment(const Trajectory& traj, const std::vector<Pose6>& trace,
                                               const SegmentThresholds& th) {
  if (static_cast<int>(trace.size()) != traj.T) {
    throw Error(ErrorKind::ShapeError, "mug trace length does not match trajectory");
  }
  return segment_from_bounds(traj, detect_interaction_bounds(trace, th));
}

Eigen::MatrixXd prepend_dummy_action(const Trajectory& traj) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(traj.T, kActionDim);
  for (int t = 1; t < traj.T; ++t) out.row(t) = traj.action_row(t - 1).cast<double>().transpose();
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Json sim = to_json(ds.sim);
  write_json_file(dir / "sim_config.json", sim);
  Json entries = Json::array();
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& t = ds.trajectories[i];
    const std::string file = t.id + ".afft";
    save_trajectory(t, dir / file);
    Json entry{{"id", t.id}, {"category", category_name(t.category)}, {"mug_id", t.mug_id}, {"file", file}};
    if (i < ds.mug_traces.size() && !ds.mug_traces[i].empty()) {
      Json trace = Json::array();
      for (const auto& p : ds.mug_traces[i]) {
        Json row = Json::array();
        for (int k = 0; k < 6; ++k) row.push_back(p[k]);
        trace.push_back(row);
      }
      entry["mug_trace"] = trace;
    }
    entries.push_back(entry);
  }
  Json manifest{{"version", 1},
                {"camera", to_json(ds.sim.camera)},
                {"sim_config_hash", hex64(fnv1a64(sim.dump()))},
                {"trajectories", entries}};
  write_json_file(dir / "dataset.json", manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const Json manifest = read_json_file(dir / "dataset.json");
  Dataset ds;
  try {
    if (manifest.at("version").get<int>() != 1) throw Error(ErrorKind::FormatError, "unsupported dataset version");
    if (std::filesystem::exists(dir / "sim_config.json")) {
      const Json sim = read_json_file(dir / "sim_config.json");
      if (hex64(fnv1a64(sim.dump())) != manifest.at("sim_config_hash").get<std::string>()) {
        throw Error(ErrorKind::FormatError, "sim_config.json does not match manifest hash");
      }
      ds.sim = sim_config_from_json(sim);
    } else {
      ds.sim.camera = camera_from_json(manifest.at("camera"));
    }
    for (const auto& e : manifest.at("trajectories")) {
      Trajectory t = load_trajectory(dir / e.at("file").get<std::string>());
      t.id = e.at("id").get<std::string>();
      t.mug_id = e.at("mug_id").get<std::string>();
      if (category_from_name(e.at("category").get<std::string>()) != t.category) {
        throw Error(ErrorKind::FormatError, "trajectory " + t.id + ": category differs from manifest");
      }
      std::vector<Pose6> trace;
      if (e.contains("mug_trace")) {
        for (const auto& row : e.at("mug_trace")) {
          Pose6 p;
          for (int k = 0; k < 6; ++k) p[k] = row.at(k).get<double>();
          trace.push_back(p);
        }
      }
      ds.trajectories.push_back(std::move(t));
      ds.mug_traces.push_back(std::move(trace));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("dataset.json: ") + e.what());
  }
  return ds;
}

TripletBatch sample_triplets(const std::vector<AffordanceCategory>& categories, std::size_t batch,
                             std::uint64_t seed) {
  std::map<AffordanceCategory, std::vector<std::size_t>> by_cat;
  for (std::size_t i = 0; i < categories.size(); ++i) by_cat[categories[i]].push_back(i);
  std::vector<std::size_t> anchor_pool;
  for (const auto& [cat, members] : by_cat) {
    if (members.size() >= 2) anchor_pool.insert(anchor_pool.end(), members.begin(), members.end());
  }
  if (by_cat.size() < 2 || anchor_pool.empty()) {
    throw Error(ErrorKind::InsufficientData,
                "triplets need >= 2 categories and a category with >= 2 trajectories");
  }
  Rng rng(seed);
  TripletBatch out;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t a = anchor_pool[rng.uniform_index(anchor_pool.size())];
    const auto& same = by_cat[categories[a]];
    std::size_t p = same[rng.uniform_index(same.size() - 1)];
    if (p == a) p = same.back();
    std::vector<std::size_t> others;
    for (const auto& [cat, members] : by_cat) {
      if (cat != categories[a]) others.insert(others.end(), members.begin(), members.end());
    }
    const std::size_t n = others[rng.uniform_index(others.size())];
    out.anchors.push_back(a);
    out.positives.push_back(p);
    out.negatives.push_back(n);
  }
  return out;
}

TripletBatch sample_triplets(const Dataset& ds, std::size_t batch, std::uint64_t seed) {
  std::vector<AffordanceCategory> cats;
  for (const auto& t : ds.trajectories) cats.push_back(t.category);
  return sample_triplets(cats, batch, seed);
}

}  // namespace affcue
