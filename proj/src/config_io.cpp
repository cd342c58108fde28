#include "affcue/config_io.hpp"

#include <fstream>
#include <sstream>

#include "affcue/error.hpp"

namespace affcue {

namespace {

Json vec_json(const auto& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw Error(ErrorKind::FormatError, std::string(what) + ": expected array of " + std::to_string(N));
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[i].get<double>();
  return v;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

Json to_json(const CameraSpec& c) {
  return Json{{"pose", vec_json(c.pose)},
              {"image_size", {c.height, c.width}},
              {"ortho_extent", c.ortho_extent},
              {"depth_range", {c.near, c.far}}};
}

CameraSpec camera_from_json(const Json& j) {
  try {
    CameraSpec c;
    c.pose = vec_from<6>(j.at("pose"), "camera.pose");
    c.height = j.at("image_size").at(0).get<int>();
    c.width = j.at("image_size").at(1).get<int>();
    c.ortho_extent = j.at("ortho_extent").get<double>();
    c.near = j.at("depth_range").at(0).get<double>();
    c.far = j.at("depth_range").at(1).get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("camera: ") + e.what());
  }
}

Json to_json(const SimConfig& c) {
  const GripperParams& g = c.gripper;
  return Json{
      {"gripper",
       {{"finger_max", g.finger_max},
        {"finger_speed", g.finger_speed},
        {"contact_eps", g.contact_eps},
        {"min_grip", g.min_grip},
        {"finger_thickness", g.finger_thickness},
        {"finger_width", g.finger_width},
        {"finger_length", g.finger_length},
        {"palm_thickness", g.palm_thickness}}},
      {"trans_clip", c.trans_clip},
      {"rot_clip", c.rot_clip},
      {"lift_success", c.lift_success},
      {"workspace_min", vec_json(c.workspace_min)},
      {"workspace_max", vec_json(c.workspace_max)},
      {"home_pose", vec_json(c.home_pose)},
      {"camera", to_json(c.camera)},
      {"render_table", c.render_table},
  };
}

SimConfig sim_config_from_json(const Json& j) {
  try {
    SimConfig c;
    const SimConfig d;
    if (j.contains("gripper")) {
      const Json& g = j.at("gripper");
      c.gripper.finger_max = get_or(g, "finger_max", d.gripper.finger_max);
      c.gripper.finger_speed = get_or(g, "finger_speed", d.gripper.finger_speed);
      c.gripper.contact_eps = get_or(g, "contact_eps", d.gripper.contact_eps);
      c.gripper.min_grip = get_or(g, "min_grip", d.gripper.min_grip);
      c.gripper.finger_thickness = get_or(g, "finger_thickness", d.gripper.finger_thickness);
      c.gripper.finger_width = get_or(g, "finger_width", d.gripper.finger_width);
      c.gripper.finger_length = get_or(g, "finger_length", d.gripper.finger_length);
      c.gripper.palm_thickness = get_or(g, "palm_thickness", d.gripper.palm_thickness);
    }
    c.trans_clip = get_or(j, "trans_clip", d.trans_clip);
    c.rot_clip = get_or(j, "rot_clip", d.rot_clip);
    c.lift_success = get_or(j, "lift_success", d.lift_success);
    if (j.contains("workspace_min")) c.workspace_min = vec_from<3>(j.at("workspace_min"), "workspace_min");
    if (j.contains("workspace_max")) c.workspace_max = vec_from<3>(j.at("workspace_max"), "workspace_max");
    if (j.contains("home_pose")) c.home_pose = vec_from<6>(j.at("home_pose"), "home_pose");
    if (j.contains("camera")) c.camera = camera_from_json(j.at("camera"));
    c.render_table = get_or(j, "render_table", d.render_table);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("sim_config: ") + e.what());
  }
}

Json to_json(const MugSpec& m) {
  Json aff = Json::array();
  for (auto c : m.affordable) aff.push_back(std::string(category_name(c)));
  return Json{{"id", m.id},
              {"body_radius", m.body_radius},
              {"body_height", m.body_height},
              {"wall_top_open", m.wall_top_open},
              {"has_handle", m.has_handle},
              {"handle_width", m.handle_width},
              {"handle_depth", m.handle_depth},
              {"handle_height", m.handle_height},
              {"handle_clearance", m.handle_clearance},
              {"affordable", aff}};
}

MugSpec mug_from_json(const Json& j) {
  try {
    MugSpec m;
    m.id = j.at("id").get<std::string>();
    m.body_radius = j.at("body_radius").get<double>();
    m.body_height = j.at("body_height").get<double>();
    m.wall_top_open = j.at("wall_top_open").get<bool>();
    m.has_handle = j.at("has_handle").get<bool>();
    m.handle_width = j.at("handle_width").get<double>();
    m.handle_depth = j.at("handle_depth").get<double>();
    m.handle_height = j.at("handle_height").get<double>();
    m.handle_clearance = j.at("handle_clearance").get<double>();
    for (const auto& c : j.at("affordable")) m.affordable.insert(category_from_name(c.get<std::string>()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("mug spec: ") + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IOError, "write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void save_mugs(const std::vector<MugSpec>& mugs, const std::filesystem::path& path) {
  Json arr = Json::array();
  for (const auto& m : mugs) arr.push_back(to_json(m));
  write_json_file(path, arr);
}

std::vector<MugSpec> load_mugs(const std::filesystem::path& path, const GripperParams& gripper) {
  const Json j = read_json_file(path);
  if (!j.is_array()) throw Error(ErrorKind::FormatError, path.string() + ": expected a JSON array");
  std::vector<MugSpec> mugs;
  for (const auto& item : j) {
    MugSpec m = mug_from_json(item);
    if (derive_affordances(m, gripper) != m.affordable) {
      throw Error(ErrorKind::FormatError, "mug " + m.id + ": stored affordances differ from geometry");
    }
    mugs.push_back(std::move(m));
  }
  return mugs;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::vector<std::string> json_diff(const Json& a, const Json& b, const std::string& prefix) {
  std::vector<std::string> out;
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (!b.contains(it.key())) {
        out.push_back(key);
      } else {
        auto sub = json_diff(it.value(), b.at(it.key()), key);
        out.insert(out.end(), sub.begin(), sub.end());
      }
    }
    for (auto it = b.begin(); it != b.end(); ++it) {
      if (!a.contains(it.key())) out.push_back(prefix.empty() ? it.key() : prefix + "." + it.key());
    }
  } else if (a != b) {
    out.push_back(prefix.empty() ? "<root>" : prefix);
  }
  return out;
}

}  // namespace affcue
