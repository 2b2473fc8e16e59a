#include "tailfuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailfuse/errors.hpp"
#include "json_detail.hpp"
#include "text_io.hpp"

namespace tailfuse {

using nlohmann::json;

Modality modality_from_string(std::string_view name) {
  if (name == "rgb") return Modality::rgb;
  if (name == "depth") return Modality::depth;
  throw DataError("unknown modality tag: " + std::string(name));
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split tag: " + std::string(name));
}

std::string to_string(Modality m) { return m == Modality::rgb ? "rgb" : "depth"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

void FrameSequence::validate() const {
  if (frames.empty()) throw DataError("frame sequence is empty: " + id);
  const Frame& first = frames.front();
  for (const Frame& f : frames) {
    if (f.height != first.height || f.width != first.width ||
        f.channels != first.channels) {
      throw DataError("frame dimensions vary within sequence: " + id);
    }
    if (static_cast<int>(f.values.size()) != f.height * f.width * f.channels) {
      throw DataError("frame buffer size mismatch in sequence: " + id);
    }
    for (double v : f.values) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite frame value in sequence: " + id);
      }
    }
  }
}

void GeneratorConfig::validate() const {
  if (num_classes < 2) throw ConfigError("generator needs num_classes >= 2");
  if (num_samples < num_classes) {
    throw ConfigError("generator needs num_samples >= num_classes");
  }
  if (zipf_exponent < 0.0) throw ConfigError("zipf_exponent must be >= 0");
  if (frame_height < 1 || frame_width < 1 || frame_channels < 1) {
    throw ConfigError("frame dimensions must be positive");
  }
  if (resize_width < 1) throw ConfigError("resize_width must be >= 1");
  const int resized_height = static_cast<int>(std::lround(
      static_cast<double>(frame_height) * resize_width / frame_width));
  if (crop_size < 1 || crop_size > std::min(resized_height, resize_width)) {
    throw ConfigError("crop_size " + std::to_string(crop_size) +
                      " exceeds resized frame " +
                      std::to_string(resized_height) + "x" +
                      std::to_string(resize_width));
  }
  if (clip_len < 1) throw ConfigError("clip_len must be >= 1");
  if (min_seq_len < 1 || max_seq_len < min_seq_len) {
    throw ConfigError("sequence length range is invalid");
  }
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (modality_correlation < 0.0 || modality_correlation > 1.0) {
    throw ConfigError("modality_correlation must lie in [0, 1]");
  }
  if (latent_noise < 0.0 || render_noise < 0.0 || difficulty_spread < 0.0 ||
      pair_separation < 0.0) {
    throw ConfigError("noise and spread parameters must be >= 0");
  }
}

bool Dataset::has(Modality m) const {
  return std::any_of(samples.begin(), samples.end(), [m](const Sample& s) {
    return !s.features(m).empty();
  });
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == s) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  if (num_classes < 2) throw DataError("dataset needs at least two classes");
  if (samples.empty()) throw DataError("dataset has no samples");
  std::set<std::string> ids;
  for (const Sample& s : samples) {
    if (!ids.insert(s.id).second) {
      throw DataError("duplicate sample id: " + s.id);
    }
    if (s.label < 0 || s.label >= num_classes) {
      throw DataError("label out of range for sample " + s.id);
    }
    for (const auto* f : {&s.rgb, &s.depth}) {
      if (f->empty()) continue;
      if (static_cast<int>(f->size()) != feature_dim) {
        throw DataError("feature width mismatch for sample " + s.id);
      }
      for (double v : *f) {
        if (!std::isfinite(v)) {
          throw DataError("non-finite feature for sample " + s.id);
        }
      }
    }
  }
}

std::vector<int> zipf_class_sizes(int num_classes, double exponent,
                                  int total) {
  if (num_classes < 1) throw ConfigError("zipf_class_sizes needs classes >= 1");
  if (total < num_classes) {
    throw ConfigError("zipf_class_sizes needs total >= classes");
  }
  std::vector<double> ideal(static_cast<std::size_t>(num_classes));
  double mass = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    ideal[static_cast<std::size_t>(c)] = std::pow(c + 1.0, -exponent);
    mass += ideal[static_cast<std::size_t>(c)];
  }
  for (double& v : ideal) v = v / mass * total;

  std::vector<int> sizes(static_cast<std::size_t>(num_classes));
  int assigned = 0;
  for (int c = 0; c < num_classes; ++c) {
    sizes[static_cast<std::size_t>(c)] =
        static_cast<int>(std::floor(ideal[static_cast<std::size_t>(c)]));
    assigned += sizes[static_cast<std::size_t>(c)];
  }
  std::vector<int> order(static_cast<std::size_t>(num_classes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = ideal[static_cast<std::size_t>(a)] -
                      sizes[static_cast<std::size_t>(a)];
    const double fb = ideal[static_cast<std::size_t>(b)] -
                      sizes[static_cast<std::size_t>(b)];
    return fa > fb;
  });
  for (int r = 0; r < total - assigned; ++r) {
    sizes[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] += 1;
  }
  // Tail classes stay present: bump zero-size classes, taking from the
  // currently largest one.
  for (int c = 0; c < num_classes; ++c) {
    while (sizes[static_cast<std::size_t>(c)] < 1) {
      const auto largest = std::max_element(sizes.begin(), sizes.end());
      *largest -= 1;
      sizes[static_cast<std::size_t>(c)] += 1;
    }
  }
  return sizes;
}

std::array<int, 3> split_counts(int class_size) {
  if (class_size < 1) throw ConfigError("split_counts needs class_size >= 1");
  const std::array<double, 3> fractions{0.55, 0.10, 0.35};
  std::array<double, 3> ideal{};
  std::array<int, 3> counts{};
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    ideal[static_cast<std::size_t>(s)] =
        fractions[static_cast<std::size_t>(s)] * class_size;
    counts[static_cast<std::size_t>(s)] = static_cast<int>(
        std::floor(ideal[static_cast<std::size_t>(s)]));
    assigned += counts[static_cast<std::size_t>(s)];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ideal[static_cast<std::size_t>(a)] -
               counts[static_cast<std::size_t>(a)] >
           ideal[static_cast<std::size_t>(b)] -
               counts[static_cast<std::size_t>(b)];
  });
  for (int r = 0; r < class_size - assigned; ++r) {
    counts[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] += 1;
  }
  return counts;
}

Clip sample_clip(const FrameSequence& seq, int t_frames, Rng& rng) {
  if (t_frames < 1) throw ConfigError("clip length must be >= 1");
  if (seq.frames.empty()) throw DataError("cannot clip an empty sequence");
  const int len = static_cast<int>(seq.frames.size());
  Clip clip;
  clip.frames.reserve(static_cast<std::size_t>(t_frames));
  if (len >= t_frames) {
    clip.start_index =
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(len - t_frames + 1)));
    for (int t = 0; t < t_frames; ++t) {
      clip.frames.push_back(seq.frames[static_cast<std::size_t>(clip.start_index + t)]);
    }
  } else {
    clip.start_index = 0;
    for (const Frame& f : seq.frames) clip.frames.push_back(f);
    while (static_cast<int>(clip.frames.size()) < t_frames) {
      clip.frames.push_back(seq.frames.back());  // pad with the last frame
    }
  }
  return clip;
}

Frame resize_keep_aspect(const Frame& frame, int target_width) {
  if (target_width < 1) throw ConfigError("target width must be >= 1");
  if (frame.width < 1 || frame.height < 1) {
    throw DataError("cannot resize an empty frame");
  }
  const int out_h = static_cast<int>(std::lround(
      static_cast<double>(frame.height) * target_width / frame.width));
  const int out_w = target_width;

  Frame out;
  out.height = std::max(out_h, 1);
  out.width = out_w;
  out.channels = frame.channels;
  out.values.resize(static_cast<std::size_t>(out.height) *
                    static_cast<std::size_t>(out.width) *
                    static_cast<std::size_t>(out.channels));

  const double scale_r = static_cast<double>(frame.height) / out.height;
  const double scale_c = static_cast<double>(frame.width) / out.width;
  for (int r = 0; r < out.height; ++r) {
    double src_r = (r + 0.5) * scale_r - 0.5;
    src_r = std::clamp(src_r, 0.0, static_cast<double>(frame.height - 1));
    const int r0 = static_cast<int>(std::floor(src_r));
    const int r1 = std::min(r0 + 1, frame.height - 1);
    const double fr = src_r - r0;
    for (int c = 0; c < out.width; ++c) {
      double src_c = (c + 0.5) * scale_c - 0.5;
      src_c = std::clamp(src_c, 0.0, static_cast<double>(frame.width - 1));
      const int c0 = static_cast<int>(std::floor(src_c));
      const int c1 = std::min(c0 + 1, frame.width - 1);
      const double fc = src_c - c0;
      for (int ch = 0; ch < frame.channels; ++ch) {
        const double top =
            (1.0 - fc) * frame.at(r0, c0, ch) + fc * frame.at(r0, c1, ch);
        const double bottom =
            (1.0 - fc) * frame.at(r1, c0, ch) + fc * frame.at(r1, c1, ch);
        out.at(r, c, ch) = (1.0 - fr) * top + fr * bottom;
      }
    }
  }
  return out;
}

Clip random_crop_clip(const Clip& clip, int size, Rng& rng) {
  if (clip.frames.empty()) throw DataError("cannot crop an empty clip");
  const Frame& first = clip.frames.front();
  if (size < 1 || size > std::min(first.height, first.width)) {
    throw ConfigError("crop size " + std::to_string(size) +
                      " does not fit frame " + std::to_string(first.height) +
                      "x" + std::to_string(first.width));
  }
  const int max_row = first.height - size;
  const int max_col = first.width - size;
  Clip out;
  out.start_index = clip.start_index;
  out.crop_size = size;
  out.crop_row = max_row > 0
                     ? static_cast<int>(rng.next_below(
                           static_cast<std::uint64_t>(max_row + 1)))
                     : 0;
  out.crop_col = max_col > 0
                     ? static_cast<int>(rng.next_below(
                           static_cast<std::uint64_t>(max_col + 1)))
                     : 0;
  out.frames.reserve(clip.frames.size());
  for (const Frame& f : clip.frames) {
    Frame cropped;
    cropped.height = size;
    cropped.width = size;
    cropped.channels = f.channels;
    cropped.values.resize(static_cast<std::size_t>(size) *
                          static_cast<std::size_t>(size) *
                          static_cast<std::size_t>(f.channels));
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        for (int ch = 0; ch < f.channels; ++ch) {
          cropped.at(r, c, ch) = f.at(out.crop_row + r, out.crop_col + c, ch);
        }
      }
    }
    out.frames.push_back(std::move(cropped));
  }
  return out;
}

std::vector<double> temporal_pool(const Clip& clip) {
  if (clip.frames.empty()) throw DataError("cannot pool an empty clip");
  const std::size_t pixels = clip.frames.front().values.size();
  std::vector<double> pooled(pixels, 0.0);
  for (const Frame& f : clip.frames) {
    for (std::size_t i = 0; i < pixels; ++i) pooled[i] += f.values[i];
  }
  const double inv = 1.0 / static_cast<double>(clip.frames.size());
  for (double& v : pooled) v *= inv;
  return pooled;
}

std::vector<double> preprocess_sequence(const FrameSequence& seq,
                                        const GeneratorConfig& cfg,
                                        Rng& clip_rng, Rng& crop_rng) {
  Clip clip = sample_clip(seq, cfg.clip_len, clip_rng);
  for (Frame& f : clip.frames) f = resize_keep_aspect(f, cfg.resize_width);
  clip = random_crop_clip(clip, cfg.crop_size, crop_rng);
  return temporal_pool(clip);
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

namespace {

std::vector<double> gaussian_vector(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.next_gaussian();
  return v;
}

void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

// Random rotation: Gram-Schmidt over a gaussian matrix, rows = basis.
std::vector<double> random_rotation(Rng& rng, int n) {
  std::vector<double> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (double& x : m) x = rng.next_gaussian();
  for (int i = 0; i < n; ++i) {
    double* row = m.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < i; ++j) {
      const double* prev = m.data() + static_cast<std::size_t>(j) * n;
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += row[k] * prev[k];
      for (int k = 0; k < n; ++k) row[k] -= dot * prev[k];
    }
    double norm = 0.0;
    for (int k = 0; k < n; ++k) norm += row[k] * row[k];
    norm = std::sqrt(norm);
    for (int k = 0; k < n; ++k) row[k] = norm > 0.0 ? row[k] / norm : 0.0;
  }
  return m;
}

}  // namespace

struct SyntheticGenerator::Impl {
  GeneratorConfig cfg;
  std::vector<int> sizes;
  std::vector<int> labels;    // per sample
  std::vector<Split> splits;  // per sample
  std::vector<double> class_means;       // K x L
  std::vector<double> class_noise_mult;  // K
  std::vector<double> rotation;          // L x L
  std::vector<double> proj_rgb;          // pixels x L
  std::vector<double> proj_depth;        // pixels x L
  int pixels = 0;

  struct SampleLatent {
    int length = 0;
    std::vector<double> z0;
    std::vector<double> z1;
  };

  explicit Impl(GeneratorConfig config) : cfg(std::move(config)) {
    cfg.validate();
    const int k_classes = cfg.num_classes;
    const int latent = cfg.latent_dim;
    sizes = zipf_class_sizes(k_classes, cfg.zipf_exponent, cfg.num_samples);

    labels.reserve(static_cast<std::size_t>(cfg.num_samples));
    splits.reserve(static_cast<std::size_t>(cfg.num_samples));
    for (int c = 0; c < k_classes; ++c) {
      const auto [n_train, n_val, n_test] =
          split_counts(sizes[static_cast<std::size_t>(c)]);
      for (int j = 0; j < sizes[static_cast<std::size_t>(c)]; ++j) {
        labels.push_back(c);
        splits.push_back(j < n_train          ? Split::train
                         : j < n_train + n_val ? Split::val
                                               : Split::test);
      }
    }

    // Paired class means: class c shares a base direction with class
    // K-1-c, so tail classes sit close to a head class and get harder the
    // further down the tail they are.
    Rng base_rng = make_stream(cfg.seed, "class_base");
    Rng offset_rng = make_stream(cfg.seed, "class_offset");
    const int pairs = (k_classes + 1) / 2;
    std::vector<std::vector<double>> bases(static_cast<std::size_t>(pairs));
    for (auto& b : bases) {
      b = gaussian_vector(base_rng, latent);
      normalize(b);
    }
    class_means.resize(static_cast<std::size_t>(k_classes) *
                       static_cast<std::size_t>(latent));
    class_noise_mult.resize(static_cast<std::size_t>(k_classes));
    for (int c = 0; c < k_classes; ++c) {
      const int pair = std::min(c, k_classes - 1 - c);
      const double sign = c < k_classes - 1 - c ? 1.0 : -1.0;
      std::vector<double> offset = gaussian_vector(offset_rng, latent);
      normalize(offset);
      std::vector<double> mean(static_cast<std::size_t>(latent));
      for (int l = 0; l < latent; ++l) {
        mean[static_cast<std::size_t>(l)] =
            bases[static_cast<std::size_t>(pair)][static_cast<std::size_t>(l)] +
            sign * cfg.pair_separation * offset[static_cast<std::size_t>(l)];
      }
      normalize(mean);
      std::copy(mean.begin(), mean.end(),
                class_means.begin() +
                    static_cast<std::size_t>(c) * static_cast<std::size_t>(latent));
      const double rank_fraction =
          k_classes > 1 ? static_cast<double>(c) / (k_classes - 1) : 0.0;
      class_noise_mult[static_cast<std::size_t>(c)] =
          1.0 + cfg.difficulty_spread * rank_fraction;
    }

    Rng rot_rng = make_stream(cfg.seed, "rotate");
    rotation = random_rotation(rot_rng, latent);

    pixels = cfg.frame_height * cfg.frame_width * cfg.frame_channels;
    Rng proj_rgb_rng = make_stream(cfg.seed, "proj_rgb");
    Rng proj_depth_rng = make_stream(cfg.seed, "proj_depth");
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(latent));
    proj_rgb.resize(static_cast<std::size_t>(pixels) *
                    static_cast<std::size_t>(latent));
    proj_depth.resize(proj_rgb.size());
    for (double& x : proj_rgb) x = proj_rgb_rng.next_gaussian() * proj_scale;
    for (double& x : proj_depth) x = proj_depth_rng.next_gaussian() * proj_scale;
  }

  SampleLatent latent_of(int index) const {
    Rng rng = make_stream(cfg.seed, "sample", static_cast<std::uint64_t>(index));
    SampleLatent s;
    s.length = cfg.min_seq_len +
               static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                   cfg.max_seq_len - cfg.min_seq_len + 1)));
    const int latent = cfg.latent_dim;
    const int label = labels[static_cast<std::size_t>(index)];
    const double sigma =
        cfg.latent_noise * class_noise_mult[static_cast<std::size_t>(label)];
    const double* mean = class_means.data() +
                         static_cast<std::size_t>(label) *
                             static_cast<std::size_t>(latent);
    s.z0.resize(static_cast<std::size_t>(latent));
    s.z1.resize(static_cast<std::size_t>(latent));
    for (int l = 0; l < latent; ++l) {
      s.z0[static_cast<std::size_t>(l)] = mean[l] + sigma * rng.next_gaussian();
    }
    for (int l = 0; l < latent; ++l) {
      s.z1[static_cast<std::size_t>(l)] = mean[l] + sigma * rng.next_gaussian();
    }
    return s;
  }

  std::vector<double> latent_at(const SampleLatent& s, int t) const {
    const double u =
        s.length > 1 ? static_cast<double>(t) / (s.length - 1) : 0.0;
    std::vector<double> x(s.z0.size());
    for (std::size_t l = 0; l < x.size(); ++l) {
      x[l] = (1.0 - u) * s.z0[l] + u * s.z1[l];
    }
    return x;
  }

  Frame render_frame(int index, Modality m, const SampleLatent& s, int t) const {
    const int latent = cfg.latent_dim;
    std::vector<double> x = latent_at(s, t);
    if (m == Modality::depth) {
      // Depth latent: fixed rotation of the rgb latent plus per-frame noise
      // that vanishes as the modality correlation approaches 1.
      std::vector<double> y(x.size(), 0.0);
      for (int i = 0; i < latent; ++i) {
        const double* row = rotation.data() + static_cast<std::size_t>(i) * latent;
        double acc = 0.0;
        for (int j = 0; j < latent; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = acc;
      }
      Rng noise = make_stream(cfg.seed, "mod_noise",
                              static_cast<std::uint64_t>(index),
                              static_cast<std::uint64_t>(t));
      const double scale = (1.0 - cfg.modality_correlation) * cfg.latent_noise;
      for (double& v : y) v += scale * noise.next_gaussian();
      x = std::move(y);
    }

    const std::vector<double>& proj =
        m == Modality::rgb ? proj_rgb : proj_depth;
    Rng pixel_noise =
        make_stream(cfg.seed, m == Modality::rgb ? "render_rgb" : "render_depth",
                    static_cast<std::uint64_t>(index),
                    static_cast<std::uint64_t>(t));
    Frame f;
    f.height = cfg.frame_height;
    f.width = cfg.frame_width;
    f.channels = cfg.frame_channels;
    f.values.resize(static_cast<std::size_t>(pixels));
    for (int p = 0; p < pixels; ++p) {
      const double* row = proj.data() + static_cast<std::size_t>(p) * latent;
      double acc = 0.0;
      for (int l = 0; l < latent; ++l) acc += row[l] * x[static_cast<std::size_t>(l)];
      f.values[static_cast<std::size_t>(p)] =
          acc + cfg.render_noise * pixel_noise.next_uniform(-1.0, 1.0);
    }
    return f;
  }
};

SyntheticGenerator::SyntheticGenerator(GeneratorConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {}
SyntheticGenerator::~SyntheticGenerator() = default;
SyntheticGenerator::SyntheticGenerator(SyntheticGenerator&&) noexcept = default;
SyntheticGenerator& SyntheticGenerator::operator=(SyntheticGenerator&&) noexcept =
    default;

const GeneratorConfig& SyntheticGenerator::config() const { return impl_->cfg; }
const std::vector<int>& SyntheticGenerator::class_sizes() const {
  return impl_->sizes;
}
int SyntheticGenerator::num_samples() const { return impl_->cfg.num_samples; }

int SyntheticGenerator::label_of(int index) const {
  return impl_->labels.at(static_cast<std::size_t>(index));
}
Split SyntheticGenerator::split_of(int index) const {
  return impl_->splits.at(static_cast<std::size_t>(index));
}
std::string SyntheticGenerator::id_of(int index) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}
int SyntheticGenerator::sequence_length(int index) const {
  return impl_->latent_of(index).length;
}

SequencePair SyntheticGenerator::render_pair(int index) const {
  const auto latent = impl_->latent_of(index);
  SequencePair pair;
  pair.split = split_of(index);
  for (Modality m : {Modality::rgb, Modality::depth}) {
    FrameSequence seq;
    seq.id = id_of(index);
    seq.modality = m;
    seq.label = label_of(index);
    seq.frames.reserve(static_cast<std::size_t>(latent.length));
    for (int t = 0; t < latent.length; ++t) {
      seq.frames.push_back(impl_->render_frame(index, m, latent, t));
    }
    (m == Modality::rgb ? pair.rgb : pair.depth) = std::move(seq);
  }
  return pair;
}

std::vector<double> SyntheticGenerator::build_features(int index,
                                                       Modality m) const {
  const GeneratorConfig& cfg = impl_->cfg;
  const auto latent = impl_->latent_of(index);
  const std::string tag = to_string(m);

  // Same draw sample_clip would make, but only the clip window is rendered.
  Rng clip_rng =
      make_stream(cfg.seed, "clip_" + tag, static_cast<std::uint64_t>(index));
  int start = 0;
  if (latent.length >= cfg.clip_len) {
    start = static_cast<int>(clip_rng.next_below(
        static_cast<std::uint64_t>(latent.length - cfg.clip_len + 1)));
  }
  Clip clip;
  clip.start_index = start;
  const int rendered = std::min(cfg.clip_len, latent.length - start);
  clip.frames.reserve(static_cast<std::size_t>(cfg.clip_len));
  for (int t = 0; t < rendered; ++t) {
    clip.frames.push_back(impl_->render_frame(index, m, latent, start + t));
  }
  while (static_cast<int>(clip.frames.size()) < cfg.clip_len) {
    clip.frames.push_back(clip.frames.back());
  }

  for (Frame& f : clip.frames) f = resize_keep_aspect(f, cfg.resize_width);
  Rng crop_rng =
      make_stream(cfg.seed, "crop_" + tag, static_cast<std::uint64_t>(index));
  clip = random_crop_clip(clip, cfg.crop_size, crop_rng);
  return temporal_pool(clip);
}

Dataset SyntheticGenerator::generate() const {
  const GeneratorConfig& cfg = impl_->cfg;
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.feature_dim = cfg.feature_dim();
  ds.class_counts.assign(static_cast<std::size_t>(cfg.num_classes), 0);
  ds.class_train_counts.assign(static_cast<std::size_t>(cfg.num_classes), 0);
  ds.samples.reserve(static_cast<std::size_t>(cfg.num_samples));
  for (int i = 0; i < cfg.num_samples; ++i) {
    Sample s;
    s.id = id_of(i);
    s.label = label_of(i);
    s.split = split_of(i);
    s.rgb = build_features(i, Modality::rgb);
    s.depth = build_features(i, Modality::depth);
    ds.class_counts[static_cast<std::size_t>(s.label)] += 1;
    if (s.split == Split::train) {
      ds.class_train_counts[static_cast<std::size_t>(s.label)] += 1;
    }
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

Dataset generate_synthetic(const GeneratorConfig& cfg) {
  return SyntheticGenerator(cfg).generate();
}

// ---------------------------------------------------------------------------
// Feature-table and manifest I/O
// ---------------------------------------------------------------------------

void write_feature_table(const Dataset& ds, const std::string& path,
                         const std::string& fingerprint) {
  std::string out;
  out += "# fingerprint=" + fingerprint + "\n";
  out += "id,split,label,modality";
  for (int f = 0; f < ds.feature_dim; ++f) out += ",f" + std::to_string(f);
  out += "\n";
  for (const Sample& s : ds.samples) {
    for (Modality m : {Modality::rgb, Modality::depth}) {
      const auto& features = s.features(m);
      if (features.empty()) continue;
      out += s.id;
      out += ',';
      out += to_string(s.split);
      out += ',';
      out += std::to_string(s.label);
      out += ',';
      out += to_string(m);
      for (double v : features) {
        out += ',';
        out += detail::format_double(v);
      }
      out += '\n';
    }
  }
  detail::write_file(path, out);
}

Dataset load_feature_table(const std::string& path) {
  const std::string text = detail::read_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  int feature_dim = -1;

  Dataset ds;
  std::map<std::string, std::size_t> index_of;  // id -> sample slot
  std::vector<std::string> order;
  std::set<std::pair<std::string, std::string>> seen_rows;
  bool any_rgb = false;
  bool any_depth = false;
  int max_label = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_csv(line);
    const std::string where = "(" + path + ":" + std::to_string(line_no) + ")";
    if (!header_seen) {
      if (fields.size() < 5 || fields[0] != "id" || fields[1] != "split" ||
          fields[2] != "label" || fields[3] != "modality") {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": bad feature-table header");
      }
      feature_dim = static_cast<int>(fields.size()) - 4;
      header_seen = true;
      continue;
    }
    if (static_cast<int>(fields.size()) != feature_dim + 4) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(feature_dim + 4) + " fields, got " +
                      std::to_string(fields.size()));
    }
    const std::string id(fields[0]);
    Split split;
    Modality modality;
    try {
      split = split_from_string(fields[1]);
      modality = modality_from_string(fields[3]);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const int label = static_cast<int>(detail::parse_int(fields[2], where));
    if (label < 0) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": negative label");
    }
    if (!seen_rows.emplace(id, std::string(fields[3])).second) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": duplicate (id, modality) row for " + id);
    }

    std::vector<double> features;
    features.reserve(static_cast<std::size_t>(feature_dim));
    for (int f = 0; f < feature_dim; ++f) {
      const double v =
          detail::parse_double(fields[static_cast<std::size_t>(f + 4)], where);
      if (!std::isfinite(v)) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": non-finite feature value");
      }
      features.push_back(v);
    }

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      Sample s;
      s.id = id;
      s.label = label;
      s.split = split;
      index_of.emplace(id, ds.samples.size());
      it = index_of.find(id);
      ds.samples.push_back(std::move(s));
      order.push_back(id);
    } else {
      const Sample& existing = ds.samples[it->second];
      if (existing.label != label) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": label disagreement across modalities for " + id);
      }
      if (existing.split != split) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": split disagreement across modalities for " + id);
      }
    }
    Sample& s = ds.samples[it->second];
    (modality == Modality::rgb ? s.rgb : s.depth) = std::move(features);
    (modality == Modality::rgb ? any_rgb : any_depth) = true;
    max_label = std::max(max_label, label);
  }
  if (!header_seen) throw DataError(path + ": missing header row");
  if (ds.samples.empty()) throw DataError(path + ": no data rows");

  // When both modalities appear in the file, every id must carry both.
  if (any_rgb && any_depth) {
    for (const Sample& s : ds.samples) {
      if (s.rgb.empty() || s.depth.empty()) {
        throw DataError(path + ": sample " + s.id + " is missing the " +
                        (s.rgb.empty() ? "rgb" : "depth") + " modality row");
      }
    }
  }

  ds.feature_dim = feature_dim;
  ds.num_classes = max_label + 1;
  if (ds.num_classes < 2) {
    throw DataError(path + ": feature table needs at least two classes");
  }
  ds.class_counts.assign(static_cast<std::size_t>(ds.num_classes), 0);
  ds.class_train_counts.assign(static_cast<std::size_t>(ds.num_classes), 0);
  for (const Sample& s : ds.samples) {
    ds.class_counts[static_cast<std::size_t>(s.label)] += 1;
    if (s.split == Split::train) {
      ds.class_train_counts[static_cast<std::size_t>(s.label)] += 1;
    }
  }
  ds.validate();
  return ds;
}

namespace detail {

json generator_to_json(const GeneratorConfig& cfg) {
  return json{{"num_classes", cfg.num_classes},
              {"num_samples", cfg.num_samples},
              {"zipf_exponent", cfg.zipf_exponent},
              {"frame_height", cfg.frame_height},
              {"frame_width", cfg.frame_width},
              {"frame_channels", cfg.frame_channels},
              {"resize_width", cfg.resize_width},
              {"crop_size", cfg.crop_size},
              {"clip_len", cfg.clip_len},
              {"min_seq_len", cfg.min_seq_len},
              {"max_seq_len", cfg.max_seq_len},
              {"latent_dim", cfg.latent_dim},
              {"modality_correlation", cfg.modality_correlation},
              {"latent_noise", cfg.latent_noise},
              {"render_noise", cfg.render_noise},
              {"difficulty_spread", cfg.difficulty_spread},
              {"pair_separation", cfg.pair_separation},
              {"seed", cfg.seed}};
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig cfg;
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.num_samples = j.value("num_samples", cfg.num_samples);
  cfg.zipf_exponent = j.value("zipf_exponent", cfg.zipf_exponent);
  cfg.frame_height = j.value("frame_height", cfg.frame_height);
  cfg.frame_width = j.value("frame_width", cfg.frame_width);
  cfg.frame_channels = j.value("frame_channels", cfg.frame_channels);
  cfg.resize_width = j.value("resize_width", cfg.resize_width);
  cfg.crop_size = j.value("crop_size", cfg.crop_size);
  cfg.clip_len = j.value("clip_len", cfg.clip_len);
  cfg.min_seq_len = j.value("min_seq_len", cfg.min_seq_len);
  cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.modality_correlation =
      j.value("modality_correlation", cfg.modality_correlation);
  cfg.latent_noise = j.value("latent_noise", cfg.latent_noise);
  cfg.render_noise = j.value("render_noise", cfg.render_noise);
  cfg.difficulty_spread = j.value("difficulty_spread", cfg.difficulty_spread);
  cfg.pair_separation = j.value("pair_separation", cfg.pair_separation);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

}  // namespace detail

std::string manifest_to_json(const GeneratorConfig& cfg,
                             const std::string& fingerprint) {
  json j{{"generator", detail::generator_to_json(cfg)},
         {"fingerprint", fingerprint}};
  return j.dump(2) + "\n";
}

void write_manifest(const GeneratorConfig& cfg, const std::string& path,
                    const std::string& fingerprint) {
  detail::write_file(path, manifest_to_json(cfg, fingerprint));
}

GeneratorConfig manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  return detail::generator_from_json(j.contains("generator") ? j.at("generator")
                                                             : j);
}

GeneratorConfig load_manifest(const std::string& path) {
  return manifest_from_json(detail::read_file(path));
}

}  // namespace tailfuse
