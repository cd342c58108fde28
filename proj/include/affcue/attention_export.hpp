#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "affcue/dataset.hpp"
#include "affcue/evaluation.hpp"
#include "affcue/model.hpp"

namespace affcue {

struct AttentionMap {
  int step = 0;  ///< 1-based
  int H = 0;
  int W = 0;
  std::vector<float> values;  ///< row-major H x W
};

/// Teacher-forced cues over a stored trajectory.
std::vector<AttentionMap> attention_for_trajectory(const Model& model, const std::vector<float>& params,
                                                   const Trajectory& traj);
/// Cues recorded by a network policy during its last episode.
std::vector<AttentionMap> attention_from_records(const NetworkPolicy& policy);

/// Binary P5 graymap, min-max normalized to 0..255 with round-half-to-even;
/// a constant map becomes uniform 128.
std::string pgm_bytes(const std::vector<float>& values, int H, int W);

/// Writes attn_{step:03}.f32 (little-endian float32), attn_{step:03}.json
/// ({step, H, W, min, max}) and attn_{step:03}.pgm per map; with depth
/// frames given (same order), also attn_{step:03}_overlay.pgm, the cue
/// upsampled nearest-neighbor onto the depth image.
void export_attention(const std::vector<AttentionMap>& maps, const std::filesystem::path& out_dir,
                      const std::vector<std::vector<float>>* depth_frames = nullptr, int depth_h = 0,
                      int depth_w = 0);

/// Reads an attn_*.f32 file back.
std::vector<float> read_attention_raw(const std::filesystem::path& path);

}  // namespace affcue
