#include "livorlab/mcrt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace livorlab::mcrt {

namespace {

constexpr double kCosZero = 1.0 - 1.0e-12;
constexpr double kCos90 = 1.0e-6;
constexpr double kWeightFloor = 1e-14;
constexpr std::uint64_t kLosslessInteractionBudget = 100'000;
constexpr std::uint64_t kMaxSteps = 100'000'000;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Prepared {
  std::vector<Layer> layers;
  std::vector<double> z_top;
  std::vector<double> z_bottom;
  std::vector<double> mu_t;
  double ambient_n = 1.0;
  double r_specular = 0.0;
  bool returns_with_certainty = false;  // lossless with a semi-infinite bottom
};

Prepared prepare(const LayerStack& stack) {
  Prepared p;
  p.layers = stack.layers;
  p.ambient_n = stack.ambient_n;
  double z = 0.0;
  bool lossless = true;
  for (const auto& layer : stack.layers) {
    p.z_top.push_back(z);
    z += layer.thickness_mm;
    p.z_bottom.push_back(z);
    p.mu_t.push_back(layer.mu_a + layer.mu_s);
    lossless = lossless && layer.mu_a == 0.0;
  }
  p.r_specular = specular_reflectance(stack.ambient_n, stack.layers.front().n);
  p.returns_with_certainty = lossless && stack.layers.back().semi_infinite();
  return p;
}

// Henyey-Greenstein deflection cosine.
double sample_hg_cosine(double g, double u) noexcept {
  if (g == 0.0) return 2.0 * u - 1.0;
  const double tmp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u);
  return std::clamp((1.0 + g * g - tmp * tmp) / (2.0 * g), -1.0, 1.0);
}

struct Direction {
  double ux = 0.0, uy = 0.0, uz = 1.0;
};

void spin(Direction& d, double g, StreamRng& rng) noexcept {
  const double cost = sample_hg_cosine(g, rng.uniform());
  const double sint = std::sqrt(std::max(0.0, 1.0 - cost * cost));
  const double psi = kTwoPi * rng.uniform();
  const double cosp = std::cos(psi);
  const double sinp = std::sin(psi);
  if (std::abs(d.uz) > kCosZero) {
    d.ux = sint * cosp;
    d.uy = sint * sinp;
    d.uz = d.uz >= 0.0 ? cost : -cost;
    return;
  }
  const double tmp = std::sqrt(1.0 - d.uz * d.uz);
  const double ux = sint * (d.ux * d.uz * cosp - d.uy * sinp) / tmp + d.ux * cost;
  const double uy = sint * (d.uy * d.uz * cosp + d.ux * sinp) / tmp + d.uy * cost;
  const double uz = -sint * cosp * tmp + d.uz * cost;
  d = {ux, uy, uz};
}

struct PhotonOutcome {
  double reflected = 0.0;
  double transmitted = 0.0;
  double absorbed = 0.0;
};

PhotonOutcome run_photon(const Prepared& p, const SimConfig& cfg, StreamRng& rng) {
  PhotonOutcome out;
  double w = 1.0 - p.r_specular;
  std::size_t li = 0;
  double z = 0.0;
  Direction dir;
  double step_left = 0.0;  // dimensionless optical depth still to travel
  std::uint64_t interactions = 0;
  const std::size_t last = p.layers.size() - 1;

  for (std::uint64_t steps = 0;; ++steps) {
    if (steps >= kMaxSteps) {
      out.absorbed += w;
      return out;
    }
    const Layer& layer = p.layers[li];
    const double mu_t = p.mu_t[li];
    if (step_left == 0.0 && mu_t > 0.0) step_left = -std::log(rng.uniform());

    double to_boundary = std::numeric_limits<double>::infinity();
    if (dir.uz > 0.0) {
      to_boundary = (p.z_bottom[li] - z) / dir.uz;
    } else if (dir.uz < 0.0) {
      to_boundary = (p.z_top[li] - z) / dir.uz;
    }
    const double free_path = mu_t > 0.0 ? step_left / mu_t : std::numeric_limits<double>::infinity();

    if (free_path >= to_boundary) {
      if (!std::isfinite(to_boundary)) {
        // clear semi-infinite bottom layer: the photon never comes back
        out.transmitted += w;
        return out;
      }
      if (mu_t > 0.0) step_left = std::max(0.0, step_left - to_boundary * mu_t);
      const bool upward = dir.uz < 0.0;
      z = upward ? p.z_top[li] : p.z_bottom[li];
      const bool leaving = upward ? li == 0 : li == last;
      const double n2 = leaving ? p.ambient_n : p.layers[upward ? li - 1 : li + 1].n;
      double cos_t = 0.0;
      const double r = fresnel_reflectance(layer.n, n2, std::abs(dir.uz), cos_t);
      if (rng.uniform() <= r) {
        dir.uz = -dir.uz;
        continue;
      }
      if (leaving) {
        (upward ? out.reflected : out.transmitted) += w;
        return out;
      }
      const double ratio = layer.n / n2;
      dir.ux *= ratio;
      dir.uy *= ratio;
      dir.uz = upward ? -cos_t : cos_t;
      li = upward ? li - 1 : li + 1;
      continue;
    }

    z += free_path * dir.uz;
    step_left = 0.0;
    const double dw = w * layer.mu_a / mu_t;
    out.absorbed += dw;
    w -= dw;
    spin(dir, layer.g, rng);
    ++interactions;

    if (cfg.enable_roulette) {
      if (w < cfg.roulette_threshold) {
        if (rng.uniform() <= cfg.roulette_survival) {
          w /= cfg.roulette_survival;
        } else {
          return out;
        }
      }
    } else if (w < kWeightFloor) {
      out.absorbed += w;
      return out;
    }
    if (p.returns_with_certainty && interactions > kLosslessInteractionBudget) {
      out.reflected += w;
      return out;
    }
  }
}

struct BatchTally {
  double r_sum = 0.0, r_sq = 0.0;
  double t_sum = 0.0, t_sq = 0.0;
  double absorbed = 0.0;
};

BatchTally run_batch(const Prepared& p, const SimConfig& cfg, std::uint64_t batch, std::uint64_t count) {
  StreamRng rng(cfg.seed, batch);
  BatchTally t;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto o = run_photon(p, cfg, rng);
    t.r_sum += o.reflected;
    t.r_sq += o.reflected * o.reflected;
    t.t_sum += o.transmitted;
    t.t_sq += o.transmitted * o.transmitted;
    t.absorbed += o.absorbed;
  }
  return t;
}

double standard_error(double sum, double sum_sq, double n) {
  if (n < 2.0) return 0.0;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return std::sqrt(var / n);
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : state_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

std::uint64_t StreamRng::next() noexcept {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

void LayerStack::validate() const {
  if (!(ambient_n >= 1.0)) throw Error(Errc::InvalidStack, "ambient index must be >= 1");
  if (layers.empty()) throw Error(Errc::InvalidStack, "stack needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (!(l.mu_a >= 0.0) || !(l.mu_s >= 0.0) || !std::isfinite(l.mu_a) || !std::isfinite(l.mu_s)) {
      throw Error(Errc::InvalidStack, where + "coefficients must be finite and >= 0");
    }
    if (!(l.g > -1.0 && l.g < 1.0)) throw Error(Errc::InvalidStack, where + "g must lie in (-1, 1)");
    if (!(l.n >= 1.0) || !std::isfinite(l.n)) throw Error(Errc::InvalidStack, where + "n must be >= 1");
    if (l.semi_infinite()) {
      if (i + 1 != layers.size()) throw Error(Errc::InvalidStack, where + "only the last layer may be semi-infinite");
    } else if (!(l.thickness_mm > 0.0) || !std::isfinite(l.thickness_mm)) {
      throw Error(Errc::InvalidStack, where + "thickness must be > 0");
    }
  }
}

void SimConfig::validate() const {
  if (photon_count < 1) throw Error(Errc::InvalidArgument, "photon_count must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  if (!(roulette_threshold > 0.0 && roulette_threshold < 1.0)) {
    throw Error(Errc::InvalidArgument, "roulette_threshold must lie in (0, 1)");
  }
  if (!(roulette_survival >= 0.05 && roulette_survival <= 0.5)) {
    throw Error(Errc::InvalidArgument, "roulette_survival must lie in [0.05, 0.5]");
  }
}

double specular_reflectance(double n_ambient, double n_top) {
  const double r = (n_ambient - n_top) / (n_ambient + n_top);
  return r * r;
}

double fresnel_reflectance(double n1, double n2, double cos_i, double& cos_t) {
  if (n1 == n2) {
    cos_t = cos_i;
    return 0.0;
  }
  if (cos_i > kCosZero) {
    cos_t = cos_i;
    return specular_reflectance(n1, n2);
  }
  if (cos_i < kCos90) {
    cos_t = 0.0;
    return 1.0;
  }
  const double sin_i = std::sqrt(1.0 - cos_i * cos_i);
  const double sin_t = n1 * sin_i / n2;
  if (sin_t >= 1.0) {
    cos_t = 0.0;
    return 1.0;
  }
  cos_t = std::sqrt(1.0 - sin_t * sin_t);
  const double cap = cos_i * cos_t - sin_i * sin_t;  // cos(a + b)
  const double cam = cos_i * cos_t + sin_i * sin_t;  // cos(a - b)
  const double sap = sin_i * cos_t + cos_i * sin_t;  // sin(a + b)
  const double sam = sin_i * cos_t - cos_i * sin_t;  // sin(a - b)
  return 0.5 * sam * sam * (cam * cam + cap * cap) / (sap * sap * cam * cam);
}

MCResult simulate(const LayerStack& stack, const SimConfig& cfg, unsigned workers) {
  stack.validate();
  cfg.validate();
  const Prepared prepared = prepare(stack);

  const std::uint64_t batches = (cfg.photon_count + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<BatchTally> tallies(batches);
  auto batch_count = [&](std::uint64_t b) {
    return std::min(cfg.batch_size, cfg.photon_count - b * cfg.batch_size);
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, batches));
  if (workers <= 1) {
    for (std::uint64_t b = 0; b < batches; ++b) tallies[b] = run_batch(prepared, cfg, b, batch_count(b));
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned k = 0; k < workers; ++k) {
      pool.emplace_back([&] {
        for (std::uint64_t b = next++; b < batches; b = next++) {
          tallies[b] = run_batch(prepared, cfg, b, batch_count(b));
        }
      });
    }
  }

  BatchTally total;
  for (const auto& t : tallies) {
    total.r_sum += t.r_sum;
    total.r_sq += t.r_sq;
    total.t_sum += t.t_sum;
    total.t_sq += t.t_sq;
    total.absorbed += t.absorbed;
  }
  const auto n = static_cast<double>(cfg.photon_count);
  MCResult res;
  res.r_specular = prepared.r_specular;
  res.r_diffuse = total.r_sum / n;
  res.transmittance = total.t_sum / n;
  res.absorbed = total.absorbed / n;
  res.r_diffuse_stderr = standard_error(total.r_sum, total.r_sq, n);
  res.transmittance_stderr = standard_error(total.t_sum, total.t_sq, n);
  res.photons = cfg.photon_count;
  res.seed = cfg.seed;
  return res;
}

}  // namespace livorlab::mcrt
