#pragma once

// Frozen reference encoders. Both are fixed seeded random projections plus
// pooling; they hold no trainable state and equal inputs always encode to
// bit-identical features.

#include <memory>
#include <string>
#include <vector>

#include "vimonet/core.hpp"

namespace vimonet::encoders {

struct EncoderConfig {
  int d_motion = 64;
  int d_video = 64;
  int motion_tokens = 8;  // K_m
  int patch_grid = 4;     // P_g, pooling grid is P_g x P_g
  int video_frames = 8;   // keyframes fed to the video encoder
  std::uint64_t seed = 17;

  void validate() const {
    if (d_motion < 4 || d_video < 4) throw ContractError("encoder widths must be >= 4");
    if (motion_tokens < 1) throw ContractError("motion_tokens must be >= 1");
    if (patch_grid < 1) throw ContractError("patch_grid must be >= 1");
    if (video_frames < 1) throw ContractError("video_frames must be >= 1");
  }
};

struct MotionFeatures {
  Mat tokens;  // K_m x d_motion
  std::vector<std::string> warnings;
};

struct VideoFeatures {
  Mat tokens;  // T x d_video
};

// Endpoint-inclusive uniform keyframe indices; pads with the last frame when
// the clip is shorter than the target.
inline std::vector<int> keyframe_indices(int input_frames, int target_frames) {
  if (input_frames < 1 || target_frames < 1) throw ContractError("keyframe counts must be >= 1");
  std::vector<int> idx(static_cast<std::size_t>(target_frames));
  if (input_frames <= target_frames) {
    for (int i = 0; i < target_frames; ++i) idx[i] = std::min(i, input_frames - 1);
    return idx;
  }
  if (target_frames == 1) {
    idx[0] = 0;
    return idx;
  }
  const long long n1 = input_frames - 1, t1 = target_frames - 1;
  for (int i = 0; i < target_frames; ++i) idx[i] = static_cast<int>(i * n1 / t1);
  return idx;
}

inline VideoClip downsample_keyframes(const VideoClip& video, int target_frames) {
  auto idx = keyframe_indices(video.frame_count(), target_frames);
  std::vector<std::uint8_t> pixels;
  pixels.reserve(video.frame_size() * idx.size());
  for (int i : idx) {
    auto f = video.frame(i);
    pixels.insert(pixels.end(), f.begin(), f.end());
  }
  return VideoClip(target_frames, video.height(), video.width(), video.channels(), std::move(pixels));
}

// Contiguous, equal-as-possible split of [0, n) into k chunks:
// chunk c covers [floor(c*n/k), floor((c+1)*n/k)).
inline std::pair<int, int> chunk_bounds(int n, int k, int c) {
  auto lo = static_cast<int>(static_cast<long long>(c) * n / k);
  auto hi = static_cast<int>(static_cast<long long>(c + 1) * n / k);
  return {lo, hi};
}

inline Mat motion_projection(int joints, const EncoderConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, 0x6d6f74ULL + static_cast<std::uint64_t>(joints)));
  const int in = 3 * joints;
  return normal_matrix(cfg.d_motion, in, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

inline Mat video_projection(int channels, const EncoderConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, 0x766964ULL + static_cast<std::uint64_t>(channels)));
  const int in = cfg.patch_grid * cfg.patch_grid * channels;
  return normal_matrix(cfg.d_video, in, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

inline MotionFeatures encode_motion(const MotionSequence& m, const EncoderConfig& cfg) {
  cfg.validate();
  MotionFeatures out;
  const int frames = m.frame_count();
  int k = cfg.motion_tokens;
  if (frames < k) {
    out.warnings.push_back("motion has " + std::to_string(frames) + " frames < motion_tokens " +
                           std::to_string(k) + "; emitting " + std::to_string(frames) + " tokens");
    k = frames;
  }
  const Mat proj = motion_projection(m.joint_count(), cfg);
  const Mat per_frame = m.frames() * proj.transpose();  // F x d_motion
  out.tokens.resize(k, cfg.d_motion);
  for (int c = 0; c < k; ++c) {
    auto [lo, hi] = chunk_bounds(frames, k, c);
    out.tokens.row(c) = per_frame.middleRows(lo, hi - lo).colwise().mean();
  }
  return out;
}

// Per-frame, per-channel patch means (intensity scaled to [0, 1]) flattened
// in (patch_row, patch_col, channel) order.
inline Mat patch_means(const VideoClip& v, int grid) {
  const int cells = grid * grid * v.channels();
  Mat out = Mat::Zero(v.frame_count(), cells);
  for (int t = 0; t < v.frame_count(); ++t) {
    for (int py = 0; py < grid; ++py) {
      auto [y0, y1] = chunk_bounds(v.height(), grid, py);
      for (int px = 0; px < grid; ++px) {
        auto [x0, x1] = chunk_bounds(v.width(), grid, px);
        const double area = static_cast<double>(y1 - y0) * (x1 - x0);
        for (int c = 0; c < v.channels(); ++c) {
          double sum = 0.0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) sum += v.at(t, y, x, c);
          out(t, (py * grid + px) * v.channels() + c) = area > 0 ? sum / (255.0 * area) : 0.0;
        }
      }
    }
  }
  return out;
}

inline VideoFeatures encode_video(const VideoClip& v, const EncoderConfig& cfg) {
  cfg.validate();
  if (v.height() < cfg.patch_grid || v.width() < cfg.patch_grid)
    throw ContractError("video frame smaller than the patch grid");
  const Mat proj = video_projection(v.channels(), cfg);
  return VideoFeatures{patch_means(v, cfg.patch_grid) * proj.transpose()};
}

// Adapter seam for swapping in real pretrained encoders.
class MotionEncoder {
 public:
  virtual ~MotionEncoder() = default;
  virtual MotionFeatures encode(const MotionSequence& m) const = 0;
  virtual std::size_t trainable_parameter_count() const { return 0; }
  virtual int width() const = 0;
};

class VideoEncoder {
 public:
  virtual ~VideoEncoder() = default;
  virtual VideoFeatures encode(const VideoClip& v) const = 0;
  virtual std::size_t trainable_parameter_count() const { return 0; }
  virtual int width() const = 0;
};

class ReferenceMotionEncoder final : public MotionEncoder {
 public:
  explicit ReferenceMotionEncoder(EncoderConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  MotionFeatures encode(const MotionSequence& m) const override { return encode_motion(m, cfg_); }
  int width() const override { return cfg_.d_motion; }

 private:
  EncoderConfig cfg_;
};

// Downsamples to cfg.video_frames keyframes before encoding.
class ReferenceVideoEncoder final : public VideoEncoder {
 public:
  explicit ReferenceVideoEncoder(EncoderConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  VideoFeatures encode(const VideoClip& v) const override {
    return encode_video(downsample_keyframes(v, cfg_.video_frames), cfg_);
  }
  int width() const override { return cfg_.d_video; }

 private:
  EncoderConfig cfg_;
};

}  // namespace vimonet::encoders
