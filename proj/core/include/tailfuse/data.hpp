#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tailfuse/rng.hpp"

namespace tailfuse {

enum class Modality { rgb, depth };
enum class Split { train, val, test };

Modality modality_from_string(std::string_view name);
Split split_from_string(std::string_view name);
std::string to_string(Modality m);
std::string to_string(Split s);

/// One synthetic "video" frame, row-major (height, width, channel).
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  double at(int r, int c, int ch) const {
    return values[(static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(c)) *
                      static_cast<std::size_t>(channels) +
                  static_cast<std::size_t>(ch)];
  }
  double& at(int r, int c, int ch) {
    return values[(static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(c)) *
                      static_cast<std::size_t>(channels) +
                  static_cast<std::size_t>(ch)];
  }
};

struct FrameSequence {
  std::string id;
  Modality modality = Modality::rgb;
  int label = 0;
  std::vector<Frame> frames;

  void validate() const;  ///< non-empty, uniform dims, finite values
};

/// Fixed-length window of frames; crop offsets are shared by every frame.
struct Clip {
  std::vector<Frame> frames;
  int start_index = 0;  ///< source frame the window begins at
  int crop_row = 0;
  int crop_col = 0;
  int crop_size = 0;  ///< 0 until a crop has been applied
};

struct GeneratorConfig {
  int num_classes = 20;       ///< K
  int num_samples = 2000;     ///< N
  double zipf_exponent = 1.5; ///< class sizes proportional to rank^(-s)

  // Frame geometry and the preprocessing applied on top of it.
  int frame_height = 64;
  int frame_width = 48;
  int frame_channels = 3;
  int resize_width = 32;
  int crop_size = 28;
  int clip_len = 16;  ///< T
  int min_seq_len = 12;
  int max_seq_len = 40;

  // Latent process the frames are rendered from.
  int latent_dim = 8;
  double modality_correlation = 0.85;  ///< rho in [0, 1]
  double latent_noise = 0.25;
  double render_noise = 0.05;
  /// Tail-class hardness ramp: class c's sample noise is multiplied by
  /// 1 + difficulty_spread * rank_fraction(c), and paired class means move
  /// closer together toward the tail.
  double difficulty_spread = 1.0;
  /// Angular separation of paired class means (pairs share a base direction).
  double pair_separation = 0.35;

  std::uint64_t seed = 42;

  void validate() const;
  int feature_dim() const { return crop_size * crop_size * frame_channels; }
};

struct Sample {
  std::string id;
  int label = 0;
  Split split = Split::train;
  std::vector<double> rgb;    ///< pooled features; empty when absent
  std::vector<double> depth;

  const std::vector<double>& features(Modality m) const {
    return m == Modality::rgb ? rgb : depth;
  }
};

struct Dataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<Sample> samples;
  std::vector<std::int64_t> class_counts;        ///< per class, all splits
  std::vector<std::int64_t> class_train_counts;  ///< per class, train split

  bool has(Modality m) const;
  std::vector<std::size_t> split_indices(Split s) const;
  void validate() const;
};

/// Class sizes proportional to rank^(-exponent), rounded by largest
/// remainder, minimum 1 per class. Throws ConfigError when total < classes.
std::vector<int> zipf_class_sizes(int num_classes, double exponent, int total);

/// 55/10/35 train/val/test counts for one class by largest remainder; each
/// count differs from its exact fraction by less than 1.
std::array<int, 3> split_counts(int class_size);

/// T consecutive frames. When the sequence is long enough the start index is
/// drawn uniformly from [0, len - T]; shorter sequences are returned whole and
/// padded with copies of the last frame. Throws DataError on empty input.
Clip sample_clip(const FrameSequence& seq, int t_frames, Rng& rng);

/// Bilinear resize to the target width, height scaled to keep the aspect
/// ratio (align-corners = false).
Frame resize_keep_aspect(const Frame& frame, int target_width);

/// One (row, col) offset drawn uniformly and applied to every frame.
Clip random_crop_clip(const Clip& clip, int size, Rng& rng);

/// Per-pixel-channel mean over the clip's frames, flattened row-major.
std::vector<double> temporal_pool(const Clip& clip);

/// Clip -> resize -> crop -> pool with the given substreams.
std::vector<double> preprocess_sequence(const FrameSequence& seq,
                                        const GeneratorConfig& cfg,
                                        Rng& clip_rng, Rng& crop_rng);

struct SequencePair {
  FrameSequence rgb;
  FrameSequence depth;
  Split split = Split::train;
};

/// Deterministic synthetic long-tailed two-modality source. Sample metadata
/// (label, split, sequence length) and every rendered frame are pure
/// functions of (config, sample index), so single samples can be rendered
/// without materializing the rest.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(GeneratorConfig cfg);
  ~SyntheticGenerator();
  SyntheticGenerator(SyntheticGenerator&&) noexcept;
  SyntheticGenerator& operator=(SyntheticGenerator&&) noexcept;

  const GeneratorConfig& config() const;
  const std::vector<int>& class_sizes() const;
  int num_samples() const;

  int label_of(int index) const;
  Split split_of(int index) const;
  std::string id_of(int index) const;
  int sequence_length(int index) const;

  /// Full frame sequences for one sample (both modalities).
  SequencePair render_pair(int index) const;

  /// Pooled features for one sample and modality via the preprocessing
  /// pipeline; renders only the frames the clip touches.
  std::vector<double> build_features(int index, Modality m) const;

  /// The whole dataset: features for every sample, split assignments,
  /// class frequency tables.
  Dataset generate() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Dataset generate_synthetic(const GeneratorConfig& cfg);

/// Feature-table file: comma-separated, header `id,split,label,modality,
/// f0..f{d-1}`, one row per (sample, modality). Leading '#' lines carry
/// metadata (config fingerprint).
void write_feature_table(const Dataset& ds, const std::string& path,
                         const std::string& fingerprint);
Dataset load_feature_table(const std::string& path);

/// Manifest: JSON record of the generator config, sufficient to regenerate
/// the dataset bit-identically.
void write_manifest(const GeneratorConfig& cfg, const std::string& path,
                    const std::string& fingerprint);
GeneratorConfig manifest_from_json(const std::string& text);
GeneratorConfig load_manifest(const std::string& path);
std::string manifest_to_json(const GeneratorConfig& cfg,
                             const std::string& fingerprint);

}  // namespace tailfuse
