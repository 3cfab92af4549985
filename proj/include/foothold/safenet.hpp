#pragma once

#include "foothold/common.hpp"
#include "foothold/criteria.hpp"
#include "foothold/terrain.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace foothold {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

struct TensorSpec {
  const char* name;
  std::array<std::uint32_t, 4> dims;  // unused trailing dims are 0
  int ndim;

  std::size_t numel() const {
    std::size_t n = 1;
    for (int d = 0; d < ndim; ++d) n *= dims[d];
    return n;
  }
};

// Fixed 2-level U-Net: enc1(1->8) enc2(8->16) bott(16->32) dec2(48->16) dec1(24->8) out(8->1, 1x1).
inline const std::vector<TensorSpec>& architecture() {
  static const std::vector<TensorSpec> spec = [] {
    std::vector<TensorSpec> s;
    auto conv = [&](const char* w, const char* b, std::uint32_t out, std::uint32_t in, std::uint32_t k) {
      s.push_back({w, {out, in, k, k}, 4});
      s.push_back({b, {out, 0, 0, 0}, 1});
    };
    conv("enc1.conv1.weight", "enc1.conv1.bias", 8, 1, 3);
    conv("enc1.conv2.weight", "enc1.conv2.bias", 8, 8, 3);
    conv("enc2.conv1.weight", "enc2.conv1.bias", 16, 8, 3);
    conv("enc2.conv2.weight", "enc2.conv2.bias", 16, 16, 3);
    conv("bott.conv1.weight", "bott.conv1.bias", 32, 16, 3);
    conv("bott.conv2.weight", "bott.conv2.bias", 32, 32, 3);
    conv("dec2.conv1.weight", "dec2.conv1.bias", 16, 48, 3);
    conv("dec2.conv2.weight", "dec2.conv2.bias", 16, 16, 3);
    conv("dec1.conv1.weight", "dec1.conv1.bias", 8, 24, 3);
    conv("dec1.conv2.weight", "dec1.conv2.bias", 8, 8, 3);
    conv("out.weight", "out.bias", 1, 8, 1);
    return s;
  }();
  return spec;
}

inline constexpr std::size_t kParameterCount = 29617;
inline constexpr float kHeightScale = 0.1f;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct NetWeights {
  std::vector<Tensor> tensors;  // in architecture order

  static NetWeights zeros() {
    NetWeights w;
    for (const auto& t : architecture()) {
      Tensor x;
      x.name = t.name;
      x.dims.assign(t.dims.begin(), t.dims.begin() + t.ndim);
      x.values.assign(t.numel(), 0.0f);
      w.tensors.push_back(std::move(x));
    }
    return w;
  }

  static NetWeights random(std::uint64_t seed, float scale = 0.2f) {
    NetWeights w = zeros();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-scale, scale);
    for (auto& t : w.tensors)
      for (auto& v : t.values) v = u(rng);
    return w;
  }

  Tensor& operator[](const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return t;
    throw InvalidArgument("no tensor named " + name);
  }
  const Tensor& operator[](const std::string& name) const { return const_cast<NetWeights&>(*this)[name]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
  }
};

class WeightFormatError : public FormatError {
 public:
  enum class Reason { io, magic, version, tensor_count, name, shape, non_finite, truncated };
  WeightFormatError(Reason reason, const std::string& msg) : FormatError(msg), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

inline void validate_weights(const NetWeights& w) {
  using R = WeightFormatError::Reason;
  const auto& arch = architecture();
  if (w.tensors.size() != arch.size())
    throw WeightFormatError(R::tensor_count, "expected " + std::to_string(arch.size()) + " tensors, got " +
                                                 std::to_string(w.tensors.size()));
  for (std::size_t k = 0; k < arch.size(); ++k) {
    const Tensor& t = w.tensors[k];
    if (t.name != arch[k].name)
      throw WeightFormatError(R::name, "tensor " + std::to_string(k) + ": expected name '" + arch[k].name +
                                           "', got '" + t.name + "'");
    const std::vector<std::uint32_t> want(arch[k].dims.begin(), arch[k].dims.begin() + arch[k].ndim);
    if (t.dims != want) throw WeightFormatError(R::shape, "shape mismatch for tensor '" + t.name + "'");
    if (t.values.size() != arch[k].numel())
      throw WeightFormatError(R::shape, "value count mismatch for tensor '" + t.name + "'");
    for (float v : t.values)
      if (!std::isfinite(v)) throw WeightFormatError(R::non_finite, "non-finite value in tensor '" + t.name + "'");
  }
}

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw WeightFormatError(WeightFormatError::Reason::truncated, std::string("truncated file while reading ") + what);
  return v;
}

}  // namespace detail

inline void save_weights(const NetWeights& w, const std::string& path) {
  validate_weights(w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw WeightFormatError(WeightFormatError::Reason::io, "cannot open " + path + " for writing");
  os.write("SFNW", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.tensors.size()));
  for (const auto& t : w.tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put<std::uint32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
  }
  if (!os) throw WeightFormatError(WeightFormatError::Reason::io, "write failed: " + path);
}

inline NetWeights load_weights(const std::string& path) {
  using R = WeightFormatError::Reason;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WeightFormatError(R::io, "cannot open weights file " + path);
  char magic[4] = {};
  if (!is.read(magic, 4)) throw WeightFormatError(R::truncated, "truncated file while reading magic");
  if (std::memcmp(magic, "SFNW", 4) != 0) throw WeightFormatError(R::magic, "bad magic, expected SFNW");
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != 1) throw WeightFormatError(R::version, "unsupported version " + std::to_string(version));
  const auto count = detail::get<std::uint32_t>(is, "tensor count");
  const auto& arch = architecture();
  if (count != arch.size())
    throw WeightFormatError(R::tensor_count,
                            "expected " + std::to_string(arch.size()) + " tensors, got " + std::to_string(count));
  NetWeights w;
  for (std::uint32_t k = 0; k < count; ++k) {
    Tensor t;
    const auto len = detail::get<std::uint32_t>(is, "name length");
    if (len > 256) throw WeightFormatError(R::name, "tensor name too long");
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw WeightFormatError(R::truncated, "truncated tensor name");
    if (t.name != arch[k].name)
      throw WeightFormatError(R::name, "tensor " + std::to_string(k) + ": expected name '" + arch[k].name +
                                           "', got '" + t.name + "'");
    const auto ndim = detail::get<std::uint32_t>(is, "ndim");
    if (ndim > 8) throw WeightFormatError(R::shape, "bad rank for tensor '" + t.name + "'");
    for (std::uint32_t d = 0; d < ndim; ++d) t.dims.push_back(detail::get<std::uint32_t>(is, "dims"));
    const std::vector<std::uint32_t> want(arch[k].dims.begin(), arch[k].dims.begin() + arch[k].ndim);
    if (t.dims != want) throw WeightFormatError(R::shape, "shape mismatch for tensor '" + t.name + "'");
    t.values.resize(arch[k].numel());
    if (!is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4)))
      throw WeightFormatError(R::truncated, "truncated values for tensor '" + t.name + "'");
    w.tensors.push_back(std::move(t));
  }
  validate_weights(w);
  return w;
}

using Logits = std::array<float, kWindowCells>;

namespace detail {

// Feature map stored channel-major: c * (s*s) + i * s + j.
struct FeatureMap {
  int channels = 0;
  int size = 0;
  std::vector<float> data;

  FeatureMap(int c, int s) : channels(c), size(s), data(static_cast<std::size_t>(c) * s * s, 0.0f) {}
  float* channel(int c) { return data.data() + static_cast<std::size_t>(c) * size * size; }
  const float* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * size * size; }
};

inline FeatureMap conv(const FeatureMap& in, const Tensor& w, const Tensor& b, bool relu) {
  const int co = static_cast<int>(w.dims[0]);
  const int ci = static_cast<int>(w.dims[1]);
  const int k = static_cast<int>(w.dims[2]);
  const int pad = k / 2;
  const int s = in.size;
  FeatureMap out(co, s);
  for (int o = 0; o < co; ++o) {
    float* dst = out.channel(o);
    std::fill(dst, dst + s * s, b.values[o]);
    for (int c = 0; c < ci; ++c) {
      const float* src = in.channel(c);
      const float* kern = w.values.data() + (static_cast<std::size_t>(o) * ci + c) * k * k;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const float wv = kern[ky * k + kx];
          const int dy = ky - pad, dx = kx - pad;
          const int i0 = std::max(0, -dy), i1 = std::min(s, s - dy);
          const int j0 = std::max(0, -dx), j1 = std::min(s, s - dx);
          for (int i = i0; i < i1; ++i) {
            const float* row = src + (i + dy) * s + dx;
            float* drow = dst + i * s;
            for (int j = j0; j < j1; ++j) drow[j] += wv * row[j];
          }
        }
    }
    if (relu)
      for (int q = 0; q < s * s; ++q) dst[q] = std::max(dst[q], 0.0f);
  }
  return out;
}

inline FeatureMap maxpool2(const FeatureMap& in) {
  const int s = in.size / 2;
  FeatureMap out(in.channels, s);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.channel(c);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) {
        const int a = 2 * i * in.size + 2 * j;
        dst[i * s + j] = std::max({src[a], src[a + 1], src[a + in.size], src[a + in.size + 1]});
      }
  }
  return out;
}

// Nearest upsample of `low` followed by channel concat with `skip` (upsampled channels first).
inline FeatureMap upsample_concat(const FeatureMap& low, const FeatureMap& skip) {
  const int s = skip.size;
  FeatureMap out(low.channels + skip.channels, s);
  for (int c = 0; c < low.channels; ++c) {
    const float* src = low.channel(c);
    float* dst = out.channel(c);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) dst[i * s + j] = src[(i / 2) * low.size + j / 2];
  }
  std::copy(skip.data.begin(), skip.data.end(), out.channel(low.channels));
  return out;
}

}  // namespace detail

/// Logits for one window. Heights are normalized by their own mean and a 0.1 m scale.
inline Logits forward(const NetWeights& w, const HeightmapWindow& window) {
  double mean = 0.0;
  for (double h : window.heights) mean += h;
  mean /= kWindowCells;
  detail::FeatureMap x(1, kWindowSize);
  for (int q = 0; q < kWindowCells; ++q)
    x.data[q] = static_cast<float>((window.heights[q] - mean) / static_cast<double>(kHeightScale));

  const auto& t = w.tensors;
  auto layer = [&](const detail::FeatureMap& in, std::size_t idx, bool relu = true) {
    return detail::conv(in, t[idx], t[idx + 1], relu);
  };
  const auto e1 = layer(layer(x, 0), 2);
  const auto e2 = layer(layer(detail::maxpool2(e1), 4), 6);
  const auto bt = layer(layer(detail::maxpool2(e2), 8), 10);
  const auto d2 = layer(layer(detail::upsample_concat(bt, e2), 12), 14);
  const auto d1 = layer(layer(detail::upsample_concat(d2, e1), 16), 18);
  const auto out = layer(d1, 20, false);
  Logits logits;
  std::copy(out.data.begin(), out.data.end(), logits.begin());
  return logits;
}

inline SafetyMask predict_mask(const NetWeights& w, const HeightmapWindow& window) {
  Stopwatch sw;
  const Logits logits = forward(w, window);
  MaskLayer safe{};
  for (int q = 0; q < kWindowCells; ++q) safe[q] = logits[q] > 0.0f;
  SafetyMask m = SafetyMask::uniform(window.center_xy, window.resolution, safe);
  m.eval_time_us = sw.elapsed_us();
  return m;
}

struct TimingStats {
  double median_us = 0.0;
  double p95_us = 0.0;
  double mean_us = 0.0;

  static TimingStats from(std::vector<double> samples) {
    TimingStats s;
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    const auto at = [&](double q) {
      return samples[std::min(samples.size() - 1, static_cast<std::size_t>(std::ceil(q * samples.size())) - 1)];
    };
    s.median_us = at(0.5);
    s.p95_us = at(0.95);
    for (double v : samples) s.mean_us += v;
    s.mean_us /= static_cast<double>(samples.size());
    return s;
  }
};

struct Agreement {
  double accuracy = 1.0;
  double iou = 1.0;  // 1 when both masks are empty
};

inline Agreement mask_agreement(const std::vector<MaskLayer>& predicted, const std::vector<MaskLayer>& truth) {
  if (predicted.size() != truth.size()) throw InvalidArgument("mask_agreement: size mismatch");
  std::size_t same = 0, inter = 0, uni = 0, total = 0;
  for (std::size_t k = 0; k < truth.size(); ++k)
    for (int q = 0; q < kWindowCells; ++q) {
      same += predicted[k][q] == truth[k][q];
      inter += predicted[k][q] && truth[k][q];
      uni += predicted[k][q] || truth[k][q];
      ++total;
    }
  Agreement a;
  if (total > 0) a.accuracy = static_cast<double>(same) / static_cast<double>(total);
  a.iou = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  return a;
}

struct BenchmarkReport {
  TimingStats criteria;
  TimingStats network;
  Agreement agreement;
  std::size_t windows = 0;
};

struct LabeledQuery {
  HeightmapWindow window;
  FootQuery query;
};

inline BenchmarkReport benchmark(const NetWeights& w, const std::vector<LabeledQuery>& cases, const RobotGeometry& geom) {
  if (cases.size() < 100) throw InvalidArgument("benchmark needs at least 100 windows");
  BenchmarkReport r;
  r.windows = cases.size();
  std::vector<double> tc, tn;
  std::vector<MaskLayer> exact, pred;
  for (const auto& c : cases) {
    Stopwatch s1;
    const SafetyMask m = evaluate(c.window, c.query, geom);
    tc.push_back(s1.elapsed_us());
    Stopwatch s2;
    const SafetyMask p = predict_mask(w, c.window);
    tn.push_back(s2.elapsed_us());
    exact.push_back(m.safe);
    pred.push_back(p.safe);
  }
  r.criteria = TimingStats::from(std::move(tc));
  r.network = TimingStats::from(std::move(tn));
  r.agreement = mask_agreement(pred, exact);
  return r;
}

// ---- dataset (SFDS) ----

struct DatasetRecord {
  std::array<float, kWindowCells> heights{};
  std::array<std::uint8_t, kWindowCells> labels{};
};

inline void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("SFDS", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  detail::put<std::uint32_t>(os, kWindowSize);
  for (const auto& r : records) {
    os.write(reinterpret_cast<const char*>(r.heights.data()), kWindowCells * 4);
    os.write(reinterpret_cast<const char*>(r.labels.data()), kWindowCells);
  }
  if (!os) throw FormatError("write failed: " + path);
}

inline std::vector<DatasetRecord> read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open dataset " + path);
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "SFDS", 4) != 0) throw FormatError("bad dataset magic");
  if (detail::get<std::uint32_t>(is, "version") != 1) throw FormatError("unsupported dataset version");
  const auto count = detail::get<std::uint32_t>(is, "count");
  if (detail::get<std::uint32_t>(is, "width") != kWindowSize) throw FormatError("dataset window width must be 32");
  std::vector<DatasetRecord> out(count);
  for (auto& r : out) {
    if (!is.read(reinterpret_cast<char*>(r.heights.data()), kWindowCells * 4) ||
        !is.read(reinterpret_cast<char*>(r.labels.data()), kWindowCells))
      throw FormatError("dataset truncated");
    for (auto l : r.labels)
      if (l > 1) throw FormatError("dataset label outside {0,1}");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("dataset has trailing bytes");
  return out;
}

/// Random window + query pairs drawn from stairs, rough and flat terrain. The
/// query places the touchdown hip at nominal height above the window center and
/// the lift-off point one stride behind.
inline std::vector<LabeledQuery> sample_queries(std::size_t count, std::uint64_t seed, double body_height = 0.55) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const GridSpec spec{Vec2(-2.0, -2.0), 0.02, 201, 201};
  std::vector<LabeledQuery> out;
  out.reserve(count);
  TerrainGrid terrain = TerrainGrid::flat(spec);
  for (std::size_t k = 0; k < count; ++k) {
    if (k % 8 == 0) {
      const double kind = u01(rng);
      if (kind < 0.4)
        terrain = generate_stairs(0.05 + 0.12 * u01(rng), 0.2 + 0.2 * u01(rng), 6, spec, -1.0 + u01(rng));
      else if (kind < 0.85)
        terrain = generate_rough(0.02 + 0.08 * u01(rng), 0.1 + 0.3 * u01(rng), rng(), spec);
      else
        terrain = TerrainGrid::flat(spec);
    }
    const Vec2 c(-1.2 + 2.4 * u01(rng), -1.2 + 2.4 * u01(rng));
    const auto [r, cc] = terrain.nearest_cell(c);
    LabeledQuery q;
    q.window = extract_window(terrain, terrain.cell_center(r, cc));
    const double ground = q.window.at(kWindowSize / 2, kWindowSize / 2);
    q.query.leg_id = static_cast<int>(k % kNumLegs);
    q.query.hip_touchdown = Vec3(c.x(), c.y(), ground + body_height);
    const Vec2 back = c - Vec2(0.2 + 0.2 * u01(rng), 0.0);
    q.query.foot_liftoff = Vec3(back.x(), back.y(), sample_height(terrain, back));
    out.push_back(std::move(q));
  }
  return out;
}

inline std::vector<DatasetRecord> generate_dataset(std::size_t count, std::uint64_t seed, const RobotGeometry& geom) {
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (const auto& q : sample_queries(count, seed)) {
    DatasetRecord r;
    for (int i = 0; i < kWindowCells; ++i) r.heights[i] = static_cast<float>(q.window.heights[i]);
    const SafetyMask m = evaluate(q.window, q.query, geom);
    for (int i = 0; i < kWindowCells; ++i) r.labels[i] = m.safe[i] ? 1 : 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace foothold
