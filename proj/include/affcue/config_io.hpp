#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "affcue/mugsim.hpp"

namespace affcue {

using Json = nlohmann::ordered_json;

Json to_json(const CameraSpec& c);
CameraSpec camera_from_json(const Json& j);
Json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const Json& j);
Json to_json(const MugSpec& m);
MugSpec mug_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; byte-stable for equal content.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void save_mugs(const std::vector<MugSpec>& mugs, const std::filesystem::path& path);
/// Validates that each stored "affordable" set equals the derived one.
std::vector<MugSpec> load_mugs(const std::filesystem::path& path, const GripperParams& gripper);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Dotted paths of leaves that differ between two JSON documents.
std::vector<std::string> json_diff(const Json& a, const Json& b, const std::string& prefix = "");

}  // namespace affcue
