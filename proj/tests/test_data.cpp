#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tailfuse/data.hpp"
#include "tailfuse/errors.hpp"

using namespace tailfuse;

namespace {

GeneratorConfig tiny_config() {
  GeneratorConfig cfg;
  cfg.num_classes = 4;
  cfg.num_samples = 60;
  cfg.zipf_exponent = 1.0;
  cfg.frame_height = 16;
  cfg.frame_width = 12;
  cfg.frame_channels = 2;
  cfg.resize_width = 8;
  cfg.crop_size = 7;
  cfg.clip_len = 4;
  cfg.min_seq_len = 3;
  cfg.max_seq_len = 9;
  cfg.latent_dim = 5;
  cfg.seed = 424242;
  return cfg;
}

Frame constant_frame(int h, int w, int c, double value) {
  Frame f;
  f.height = h;
  f.width = w;
  f.channels = c;
  f.values.assign(static_cast<std::size_t>(h * w * c), value);
  return f;
}

FrameSequence ramp_sequence(int len, int h = 6, int w = 6, int c = 1) {
  FrameSequence seq;
  seq.id = "ramp";
  for (int t = 0; t < len; ++t) {
    seq.frames.push_back(constant_frame(h, w, c, static_cast<double>(t)));
  }
  return seq;
}

}  // namespace

TEST_CASE("zipf class sizes: uniform case and oracle agreement") {
  CHECK(zipf_class_sizes(4, 0.0, 400) == std::vector<int>{100, 100, 100, 100});

  const auto sizes = zipf_class_sizes(20, 1.5, 2000);
  CHECK(sizes == oracles::brute_zipf_sizes(20, 1.5, 2000));
  CHECK(sizes.front() == 921);  // head share of the rank^-1.5 mass
  CHECK(sizes.back() == 10);
  int total = 0;
  for (int s : sizes) total += s;
  CHECK(total == 2000);

  // Long-tail shape: non-increasing in rank; every class present.
  for (std::size_t c = 1; c < sizes.size(); ++c) {
    CHECK(sizes[c] <= sizes[c - 1]);
    CHECK(sizes[c] >= 1);
  }

  // Extreme skew still keeps every class alive.
  const auto skewed = zipf_class_sizes(10, 4.0, 12);
  for (int s : skewed) CHECK(s >= 1);
  CHECK_THROWS_AS(zipf_class_sizes(10, 1.0, 5), ConfigError);
}

TEST_CASE("split counts follow 55/10/35 with per-class rounding") {
  for (int n : {1, 2, 3, 7, 9, 20, 100, 766, 921}) {
    const auto [train, val, test] = split_counts(n);
    CHECK(train + val + test == n);
    CHECK(train >= 1);
    CHECK(std::abs(train - 0.55 * n) < 1.0);
    CHECK(std::abs(val - 0.10 * n) < 1.0);
    CHECK(std::abs(test - 0.35 * n) < 1.0);
  }
  CHECK(split_counts(100) == std::array<int, 3>{55, 10, 35});
}

TEST_CASE("sample_clip returns the whole sequence when lengths match") {
  const FrameSequence seq = ramp_sequence(16);
  Rng rng(1);
  const Clip clip = sample_clip(seq, 16, rng);
  CHECK(clip.start_index == 0);
  REQUIRE(clip.frames.size() == 16);
  for (int t = 0; t < 16; ++t) {
    CHECK(clip.frames[static_cast<std::size_t>(t)].values.front() ==
          static_cast<double>(t));
  }
}

TEST_CASE("sample_clip pads short sequences with the last frame") {
  const FrameSequence seq = ramp_sequence(10);
  Rng rng(2);
  const Clip clip = sample_clip(seq, 16, rng);
  REQUIRE(clip.frames.size() == 16);
  for (int t = 0; t < 10; ++t) {
    CHECK(clip.frames[static_cast<std::size_t>(t)].values.front() == t);
  }
  for (int t = 10; t < 16; ++t) {
    CHECK(clip.frames[static_cast<std::size_t>(t)].values.front() == 9.0);
  }

  FrameSequence empty;
  empty.id = "empty";
  CHECK_THROWS_AS(sample_clip(empty, 4, rng), DataError);
}

TEST_CASE("sample_clip start index is uniform over the legal range") {
  const FrameSequence seq = ramp_sequence(40);
  Rng rng(3);
  std::vector<int> counts(25, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Clip clip = sample_clip(seq, 16, rng);
    REQUIRE(clip.start_index >= 0);
    REQUIRE(clip.start_index <= 24);
    counts[static_cast<std::size_t>(clip.start_index)] += 1;
    CHECK(clip.frames.front().values.front() == clip.start_index);
  }
  // Each bin within 3 sigma of the uniform expectation.
  const double expected = draws / 25.0;
  const double sigma = std::sqrt(draws * (1.0 / 25.0) * (24.0 / 25.0));
  for (int c : counts) {
    CHECK(std::abs(c - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("resize keeps aspect ratio and interpolates convexly") {
  Frame f = constant_frame(48, 64, 3, 0.0);
  Rng rng(4);
  for (double& v : f.values) v = rng.next_uniform(-2.0, 2.0);

  const Frame resized = resize_keep_aspect(f, 32);
  CHECK(resized.height == 24);  // 48 * 32 / 64
  CHECK(resized.width == 32);
  const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
  for (double v : resized.values) {
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }

  // Identity at the native width.
  const Frame same = resize_keep_aspect(f, 64);
  REQUIRE(same.values.size() == f.values.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    CHECK(std::abs(same.values[i] - f.values[i]) <= 1e-12);
  }

  // Constant frames stay constant.
  const Frame flat = resize_keep_aspect(constant_frame(30, 20, 2, 3.25), 11);
  for (double v : flat.values) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));

  CHECK_THROWS_AS(resize_keep_aspect(f, 0), ConfigError);
}

TEST_CASE("random crop uses one offset for the whole clip") {
  Clip clip;
  for (int t = 0; t < 5; ++t) {
    Frame f = constant_frame(24, 32, 1, 0.0);
    for (int r = 0; r < 24; ++r) {
      for (int c = 0; c < 32; ++c) {
        f.at(r, c, 0) = r * 100.0 + c + t * 1e6;
      }
    }
    clip.frames.push_back(std::move(f));
  }

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Clip cropped = random_crop_clip(clip, 20, rng);
    CHECK(cropped.crop_row >= 0);
    CHECK(cropped.crop_row <= 4);
    CHECK(cropped.crop_col >= 0);
    CHECK(cropped.crop_col <= 12);
    CHECK(cropped.crop_size == 20);
    for (int t = 0; t < 5; ++t) {
      // Window content proves each frame used the same offsets.
      CHECK(cropped.frames[static_cast<std::size_t>(t)].at(0, 0, 0) ==
            cropped.crop_row * 100.0 + cropped.crop_col + t * 1e6);
    }
  }

  // Full-size crop is the identity with offsets (0, 0).
  Clip square;
  square.frames.push_back(constant_frame(8, 8, 2, 1.5));
  const Clip same = random_crop_clip(square, 8, rng);
  CHECK(same.crop_row == 0);
  CHECK(same.crop_col == 0);
  CHECK(same.frames[0].values == square.frames[0].values);

  CHECK_THROWS_AS(random_crop_clip(clip, 25, rng), ConfigError);
}

TEST_CASE("temporal pooling averages frames") {
  Clip clip;
  clip.frames.push_back(constant_frame(3, 3, 1, 4.0));
  clip.frames.push_back(constant_frame(3, 3, 1, -2.0));
  const auto pooled = temporal_pool(clip);
  for (double v : pooled) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  Clip mirrored;
  Frame x = constant_frame(2, 2, 1, 0.0);
  x.values = {1.0, -3.0, 2.0, 0.5};
  Frame neg = x;
  for (double& v : neg.values) v = -v;
  mirrored.frames = {x, neg};
  for (double v : temporal_pool(mirrored)) CHECK(v == 0.0);

  Clip identical;
  identical.frames = {x, x, x};
  CHECK(temporal_pool(identical) == x.values);
}

TEST_CASE("generation is deterministic and structurally sound") {
  const GeneratorConfig cfg = tiny_config();
  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(cfg);
  CHECK(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].rgb == b.samples[i].rgb);      // bit-identical
    CHECK(a.samples[i].depth == b.samples[i].depth);
  }

  GeneratorConfig other = cfg;
  other.seed = 7;
  const Dataset c = generate_synthetic(other);
  CHECK(a.samples[0].rgb != c.samples[0].rgb);

  a.validate();
  CHECK(a.num_classes == 4);
  CHECK(a.feature_dim == 7 * 7 * 2);
  CHECK(a.has(Modality::rgb));
  CHECK(a.has(Modality::depth));

  // Per-class split shares respect the largest-remainder bound.
  const SyntheticGenerator gen(cfg);
  std::vector<std::array<int, 3>> by_class(4, {0, 0, 0});
  for (int i = 0; i < gen.num_samples(); ++i) {
    const int label = gen.label_of(i);
    const int s = gen.split_of(i) == Split::train ? 0
                  : gen.split_of(i) == Split::val ? 1
                                                  : 2;
    by_class[static_cast<std::size_t>(label)][static_cast<std::size_t>(s)] += 1;
  }
  for (int c4 = 0; c4 < 4; ++c4) {
    const int n = gen.class_sizes()[static_cast<std::size_t>(c4)];
    CHECK(std::abs(by_class[static_cast<std::size_t>(c4)][0] - 0.55 * n) < 1.0);
    CHECK(std::abs(by_class[static_cast<std::size_t>(c4)][1] - 0.10 * n) < 1.0);
    CHECK(std::abs(by_class[static_cast<std::size_t>(c4)][2] - 0.35 * n) < 1.0);
    CHECK(by_class[static_cast<std::size_t>(c4)][0] >= 1);
  }

  GeneratorConfig bad = cfg;
  bad.num_samples = 3;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("rendered pairs align across modalities") {
  const SyntheticGenerator gen(tiny_config());
  for (int i : {0, 7, 31}) {
    const SequencePair pair = gen.render_pair(i);
    pair.rgb.validate();
    pair.depth.validate();
    CHECK(pair.rgb.id == pair.depth.id);
    CHECK(pair.rgb.label == pair.depth.label);
    CHECK(pair.rgb.frames.size() == pair.depth.frames.size());
    CHECK(pair.rgb.modality == Modality::rgb);
    CHECK(pair.depth.modality == Modality::depth);
    CHECK(static_cast<int>(pair.rgb.frames.size()) == gen.sequence_length(i));
  }
}

TEST_CASE("generated features equal the public preprocessing pipeline") {
  const GeneratorConfig cfg = tiny_config();
  const SyntheticGenerator gen(cfg);
  const Dataset ds = gen.generate();
  for (int i : {0, 5, 23, 59}) {
    const SequencePair pair = gen.render_pair(i);
    for (Modality m : {Modality::rgb, Modality::depth}) {
      Rng clip_rng = make_stream(cfg.seed, "clip_" + to_string(m),
                                 static_cast<std::uint64_t>(i));
      Rng crop_rng = make_stream(cfg.seed, "crop_" + to_string(m),
                                 static_cast<std::uint64_t>(i));
      const auto features =
          preprocess_sequence(m == Modality::rgb ? pair.rgb : pair.depth, cfg,
                              clip_rng, crop_rng);
      CHECK(features ==
            ds.samples[static_cast<std::size_t>(i)].features(m));
    }
  }
}

TEST_CASE("pipeline commutes with order-preserving id relabeling") {
  const GeneratorConfig cfg = tiny_config();
  const SyntheticGenerator gen(cfg);
  for (int i : {2, 11}) {
    SequencePair pair = gen.render_pair(i);
    FrameSequence renamed = pair.rgb;
    renamed.id = "totally-different-name";
    Rng clip_a = make_stream(cfg.seed, "clip_rgb", static_cast<std::uint64_t>(i));
    Rng crop_a = make_stream(cfg.seed, "crop_rgb", static_cast<std::uint64_t>(i));
    Rng clip_b = make_stream(cfg.seed, "clip_rgb", static_cast<std::uint64_t>(i));
    Rng crop_b = make_stream(cfg.seed, "crop_rgb", static_cast<std::uint64_t>(i));
    CHECK(preprocess_sequence(pair.rgb, cfg, clip_a, crop_a) ==
          preprocess_sequence(renamed, cfg, clip_b, crop_b));
  }
}

TEST_CASE("feature table round-trips bit-exactly") {
  namespace fs = std::filesystem;
  const Dataset ds = generate_synthetic(tiny_config());
  const auto path =
      (fs::temp_directory_path() / "tailfuse_table_test.csv").string();
  write_feature_table(ds, path, "fpX");
  const Dataset loaded = load_feature_table(path);
  CHECK(loaded.num_classes == ds.num_classes);
  CHECK(loaded.feature_dim == ds.feature_dim);
  REQUIRE(loaded.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(loaded.samples[i].id == ds.samples[i].id);
    CHECK(loaded.samples[i].label == ds.samples[i].label);
    CHECK(loaded.samples[i].split == ds.samples[i].split);
    CHECK(loaded.samples[i].rgb == ds.samples[i].rgb);
    CHECK(loaded.samples[i].depth == ds.samples[i].depth);
  }
  CHECK(loaded.class_counts == ds.class_counts);
  fs::remove(path);
}

TEST_CASE("feature table loader surfaces parse errors with line numbers") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();
  const auto write = [&](const std::string& name, const std::string& text) {
    const auto p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
  };

  const std::string header = "id,split,label,modality,f0,f1\n";
  const auto short_row =
      write("tf_tab1.csv", header + "s0,train,0,rgb,1.0\n");
  CHECK_THROWS_WITH_AS(load_feature_table(short_row), doctest::Contains(":2"),
                       DataError);

  const auto bad_split =
      write("tf_tab2.csv", header + "s0,holdout,0,rgb,1.0,2.0\n");
  CHECK_THROWS_WITH_AS(load_feature_table(bad_split),
                       doctest::Contains("split"), DataError);

  const auto dup = write("tf_tab3.csv", header +
                                            "s0,train,0,rgb,1.0,2.0\n"
                                            "s0,train,0,rgb,1.0,2.0\n");
  CHECK_THROWS_WITH_AS(load_feature_table(dup), doctest::Contains("duplicate"),
                       DataError);

  const auto misaligned = write("tf_tab4.csv", header +
                                                   "s0,train,0,rgb,1.0,2.0\n"
                                                   "s0,train,0,depth,1.0,2.0\n"
                                                   "s1,train,1,rgb,1.0,2.0\n");
  CHECK_THROWS_WITH_AS(load_feature_table(misaligned),
                       doctest::Contains("s1"), DataError);

  const auto single_modality = write(
      "tf_tab5.csv", header + "s0,train,0,rgb,1.0,2.0\ns1,val,1,rgb,3.0,4.0\n");
  const Dataset rgb_only = load_feature_table(single_modality);
  CHECK(rgb_only.has(Modality::rgb));
  CHECK_FALSE(rgb_only.has(Modality::depth));

  for (const auto& p : {short_row, bad_split, dup, misaligned, single_modality}) {
    fs::remove(p);
  }
}

TEST_CASE("manifest regenerates the dataset bit-identically") {
  namespace fs = std::filesystem;
  const GeneratorConfig cfg = tiny_config();
  const auto path =
      (fs::temp_directory_path() / "tailfuse_manifest_test.json").string();
  write_manifest(cfg, path, "fpM");
  const GeneratorConfig loaded = load_manifest(path);
  CHECK(loaded.seed == cfg.seed);
  CHECK(loaded.num_classes == cfg.num_classes);
  CHECK(loaded.zipf_exponent == cfg.zipf_exponent);

  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(loaded);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].rgb == b.samples[i].rgb);
  }
  fs::remove(path);
}

TEST_CASE("generator config validation rejects infeasible geometry") {
  GeneratorConfig cfg = tiny_config();
  cfg.crop_size = 99;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  // Landscape frames whose resized height cannot host the crop.
  GeneratorConfig landscape = tiny_config();
  landscape.frame_height = 48;
  landscape.frame_width = 64;
  landscape.resize_width = 32;
  landscape.crop_size = 28;
  CHECK_THROWS_AS(landscape.validate(), ConfigError);

  GeneratorConfig bad_rho = tiny_config();
  bad_rho.modality_correlation = 1.5;
  CHECK_THROWS_AS(bad_rho.validate(), ConfigError);
}
