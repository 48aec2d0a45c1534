#include "livorlab/lut.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "livorlab/json_io.hpp"

namespace livorlab::mcrt {

static_assert(std::endian::native == std::endian::little, "FLUT1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'L', 'U', 'T', '1', '\0', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

std::string fmt_coords(std::span<const double> coords) {
  std::ostringstream ss;
  ss << '(';
  for (std::size_t i = 0; i < coords.size(); ++i) ss << (i ? ", " : "") << coords[i];
  ss << ')';
  return ss.str();
}

double interpolate_table(const ForwardLut& lut, std::span<const double> table, std::span<const double> coords) {
  const auto& axes = lut.axes();
  if (coords.size() != axes.size()) {
    throw Error(Errc::InvalidArgument, "expected " + std::to_string(axes.size()) + " coordinates");
  }
  const std::size_t dims = axes.size();
  std::vector<std::size_t> lo(dims);
  std::vector<double> t(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const auto& nodes = axes[d].nodes;
    const double c = coords[d];
    if (!(c >= nodes.front() && c <= nodes.back())) {
      throw Error(Errc::OutOfGrid, axes[d].name + "=" + std::to_string(c) + " outside [" +
                                       std::to_string(nodes.front()) + ", " + std::to_string(nodes.back()) +
                                       "] at coordinates " + fmt_coords(coords));
    }
    if (nodes.size() == 1) {
      lo[d] = 0;
      t[d] = 0.0;
      continue;
    }
    auto it = std::upper_bound(nodes.begin(), nodes.end(), c);
    std::size_t i = static_cast<std::size_t>(std::distance(nodes.begin(), it));
    i = std::min(i == 0 ? 0 : i - 1, nodes.size() - 2);
    lo[d] = i;
    t[d] = (c - nodes[i]) / (nodes[i + 1] - nodes[i]);
  }

  // Sum over the 2^dims corners of the cell.
  double acc = 0.0;
  std::vector<std::size_t> node(dims);
  for (std::size_t corner = 0; corner < (std::size_t{1} << dims); ++corner) {
    double weight = 1.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const bool upper = (corner >> d) & 1U;
      if (upper && axes[d].nodes.size() == 1) {
        weight = 0.0;
        break;
      }
      node[d] = lo[d] + (upper ? 1 : 0);
      weight *= upper ? t[d] : 1.0 - t[d];
    }
    if (weight != 0.0) acc += weight * table[lut.flat_index(node)];
  }
  return acc;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<double> doubles(std::size_t n) {
    if (n > bytes_.size() / sizeof(double)) throw Error(Errc::ParseError, "FLUT1: truncated file");
    std::vector<double> v(n);
    auto raw = take(n * sizeof(double));
    std::memcpy(v.data(), raw.data(), raw.size());
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::ParseError, "FLUT1: truncated file");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

LutAxis LutAxis::log_spaced(std::string name, double first, double last, std::size_t count) {
  if (!(first > 0.0 && last > first) || count < 2) {
    throw Error(Errc::InvalidArgument, "log-spaced axis needs 0 < first < last and count >= 2");
  }
  LutAxis axis{std::move(name), std::vector<double>(count)};
  const double step = std::log(last / first) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) axis.nodes[i] = first * std::exp(step * static_cast<double>(i));
  axis.nodes.front() = first;
  axis.nodes.back() = last;
  return axis;
}

LutTemplate default_lut_template() {
  LutTemplate t;
  t.stack.ambient_n = 1.0;
  t.stack.layers = {Layer{0.1, 1.0, 0.0, 1.4, kInfiniteThickness}};
  t.variable_layer = 0;
  return t;
}

std::vector<LutAxis> default_lut_axes() {
  return {LutAxis::log_spaced(std::string(kAxisMuA), 0.005, 5.0, 16),
          LutAxis::log_spaced(std::string(kAxisMuSPrime), 0.3, 10.0, 12)};
}

ForwardLut::ForwardLut(std::vector<LutAxis> axes, std::vector<double> values, std::vector<double> stderrs,
                       std::string provenance)
    : axes_(std::move(axes)), values_(std::move(values)), stderrs_(std::move(stderrs)),
      provenance_(std::move(provenance)) {
  if (axes_.empty()) throw Error(Errc::InvalidArgument, "LUT needs at least one axis");
  std::size_t total = 1;
  for (const auto& axis : axes_) {
    if (axis.nodes.empty()) throw Error(Errc::InvalidArgument, "LUT axis '" + axis.name + "' is empty");
    for (std::size_t i = 1; i < axis.nodes.size(); ++i) {
      if (!(axis.nodes[i] > axis.nodes[i - 1])) {
        throw Error(Errc::InvalidArgument, "LUT axis '" + axis.name + "' is not strictly increasing");
      }
    }
    total *= axis.nodes.size();
  }
  if (values_.size() != total || stderrs_.size() != total) {
    throw Error(Errc::InvalidArgument, "LUT value count does not match the axes");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "LUT value outside [0, 1]");
  }
}

std::size_t ForwardLut::axis_index(std::string_view name) const {
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].name == name) return i;
  }
  throw Error(Errc::InvalidArgument, "LUT has no axis named '" + std::string(name) + "'");
}

std::size_t ForwardLut::flat_index(std::span<const std::size_t> node) const {
  std::size_t index = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) index = index * axes_[d].nodes.size() + node[d];
  return index;
}

ForwardLut build_lut(const LutTemplate& tmpl, const std::vector<LutAxis>& axes, const SimConfig& cfg,
                     unsigned workers, std::size_t max_nodes) {
  tmpl.stack.validate();
  cfg.validate();
  if (tmpl.variable_layer >= tmpl.stack.layers.size()) {
    throw Error(Errc::InvalidArgument, "variable layer index out of range");
  }
  if (axes.size() != 2) throw Error(Errc::InvalidArgument, "LUT axes must be mu_a and mu_s_prime");
  std::size_t total = 1;
  for (const auto& axis : axes) {
    if (axis.nodes.empty()) throw Error(Errc::InvalidArgument, "LUT axis '" + axis.name + "' is empty");
    for (std::size_t i = 1; i < axis.nodes.size(); ++i) {
      if (!(axis.nodes[i] > axis.nodes[i - 1])) {
        throw Error(Errc::InvalidArgument, "LUT axis '" + axis.name + "' is not strictly increasing");
      }
    }
    total *= axis.nodes.size();
  }
  if (total > max_nodes) {
    throw Error(Errc::GridTooLarge, std::to_string(total) + " nodes exceed the cap of " + std::to_string(max_nodes));
  }

  const bool mu_a_first = axes[0].name == kAxisMuA && axes[1].name == kAxisMuSPrime;
  const bool mu_a_second = axes[1].name == kAxisMuA && axes[0].name == kAxisMuSPrime;
  if (!mu_a_first && !mu_a_second) throw Error(Errc::InvalidArgument, "LUT axes must be mu_a and mu_s_prime");
  const auto& mu_a_axis = mu_a_first ? axes[0] : axes[1];
  for (double v : mu_a_axis.nodes) {
    if (v < 0.0) throw Error(Errc::InvalidArgument, "mu_a nodes must be >= 0");
  }

  const double g = tmpl.stack.layers[tmpl.variable_layer].g;
  std::vector<double> values(total), stderrs(total);
  std::size_t k = 0;
  for (double c0 : axes[0].nodes) {
    for (double c1 : axes[1].nodes) {
      const double mu_a = mu_a_first ? c0 : c1;
      const double mu_s_prime = mu_a_first ? c1 : c0;
      LayerStack stack = tmpl.stack;
      stack.layers[tmpl.variable_layer].mu_a = mu_a;
      stack.layers[tmpl.variable_layer].mu_s = mu_s_prime / (1.0 - g);
      const auto res = simulate(stack, cfg, workers);
      values[k] = res.r_diffuse;
      stderrs[k] = res.r_diffuse_stderr;
      ++k;
    }
  }

  Json prov{{"template", tmpl.stack},
            {"variable_layer", tmpl.variable_layer},
            {"sim", cfg},
            {"engine", "livorlab " LIVORLAB_VERSION}};
  return ForwardLut(axes, std::move(values), std::move(stderrs), prov.dump());
}

double lut_reflectance(const ForwardLut& lut, std::span<const double> coords) {
  return interpolate_table(lut, lut.values(), coords);
}

double lut_stderr(const ForwardLut& lut, std::span<const double> coords) {
  return interpolate_table(lut, lut.stderrs(), coords);
}

std::string serialize_lut(const ForwardLut& lut) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(lut.axes().size()));
  for (const auto& axis : lut.axes()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(axis.name.size()));
    out += axis.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(axis.nodes.size()));
    for (double v : axis.nodes) put<double>(out, v);
  }
  put<std::uint64_t>(out, lut.values().size());
  for (double v : lut.values()) put<double>(out, v);
  for (double v : lut.stderrs()) put<double>(out, v);
  put<std::uint64_t>(out, lut.provenance().size());
  out += lut.provenance();
  return out;
}

ForwardLut deserialize_lut(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(Errc::ParseError, "not a FLUT1 file (bad magic)");
  }
  if (auto version = in.get<std::uint32_t>(); version != kFormatVersion) {
    throw Error(Errc::ParseError, "unsupported FLUT1 version " + std::to_string(version));
  }
  const auto axis_count = in.get<std::uint32_t>();
  std::vector<LutAxis> axes;
  for (std::uint32_t a = 0; a < axis_count; ++a) {
    LutAxis axis;
    axis.name = std::string(in.take(in.get<std::uint32_t>()));
    axis.nodes = in.doubles(in.get<std::uint32_t>());
    axes.push_back(std::move(axis));
  }
  const auto count = in.get<std::uint64_t>();
  auto values = in.doubles(count);
  auto stderrs = in.doubles(count);
  std::string provenance(in.take(in.get<std::uint64_t>()));
  if (!in.done()) throw Error(Errc::ParseError, "FLUT1: trailing bytes");
  try {
    return ForwardLut(std::move(axes), std::move(values), std::move(stderrs), std::move(provenance));
  } catch (const Error& e) {
    throw Error(Errc::ParseError, std::string("FLUT1: ") + e.what());
  }
}

void save_lut(const ForwardLut& lut, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const auto bytes = serialize_lut(lut);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

ForwardLut load_lut(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::LutNotFound, "cannot open LUT " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_lut(ss.str());
}

}  // namespace livorlab::mcrt
