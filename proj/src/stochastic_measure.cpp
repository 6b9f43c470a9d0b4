#include "nfheat/stochastic_measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <nlohmann/json.hpp>

#include "nfheat/error.hpp"
#include "nfheat/rng.hpp"

namespace nfheat::measure {

namespace {

constexpr std::uint64_t kRootTag = 0xffffffffull;
constexpr std::uint64_t kSignTag = 0xfffffffeull;
constexpr std::uint64_t kStoreBudget = 1ull << 22;
constexpr int kAtomDigits = 40;

std::uint64_t kind_tag(BaseKind k) { return static_cast<std::uint64_t>(k) + 1; }

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// Chambers-Mallows-Stuck, symmetric, unit scale.
double sample_stable(double alpha, rng::SplitMix64& g) {
  boost::random::uniform_01<double> u01;
  boost::random::exponential_distribution<double> expo(1.0);
  const double V = std::numbers::pi * (u01(g) - 0.5);
  double W = expo(g);
  if (W <= 0) W = 1e-300;
  if (std::abs(alpha - 1.0) < 1e-12) return std::tan(V);
  return std::sin(alpha * V) / std::pow(std::cos(V), 1.0 / alpha) *
         std::pow(std::cos((1.0 - alpha) * V) / W, (1.0 - alpha) / alpha);
}

// Base-N digits with half-open cells: digit i = ceil(yN) in 1..N, then y <- yN - (i - 1).
std::vector<int> atom_digits(double x, int N) {
  std::vector<int> d;
  double y = x;
  for (int j = 0; j < kAtomDigits; ++j) {
    int i = static_cast<int>(std::ceil(y * N));
    i = std::clamp(i, 1, N);
    d.push_back(i);
    y = y * N - (i - 1);
    y = std::clamp(y, 0.0, 1.0);
  }
  return d;
}

}  // namespace

std::string BaseSM::describe() const {
  std::ostringstream os;
  switch (kind) {
    case BaseKind::gaussian_white: os << "gaussian"; break;
    case BaseKind::symmetric_stable: os << "stable:" << stability; break;
    case BaseKind::atomic_series: os << "atomic:" << atom_positions.size(); break;
  }
  return os.str();
}

BaseSM parse_base(const std::string& spec, std::uint64_t seed) {
  BaseSM b;
  b.seed = seed;
  auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto number = [&](double def) {
    if (arg.empty()) return def;
    try {
      std::size_t pos = 0;
      double v = std::stod(arg, &pos);
      if (pos != arg.size()) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad base-measure parameter '" + arg + "'");
    }
  };
  if (head == "gaussian") {
    b.kind = BaseKind::gaussian_white;
  } else if (head == "stable") {
    b.kind = BaseKind::symmetric_stable;
    b.stability = number(1.5);
    if (!(b.stability > 0.0 && b.stability < 2.0)) throw ValidationError("stability index must lie in (0, 2)");
  } else if (head == "atomic") {
    b.kind = BaseKind::atomic_series;
    const double count = number(8);
    if (!(count >= 1 && count <= 1000) || count != std::floor(count))
      throw ValidationError("atom count must be an integer in 1..1000");
    rng::SplitMix64 g(rng::hash_key({seed, 0xa70a11ull}));
    boost::random::uniform_01<double> u01;
    for (int n = 0; n < static_cast<int>(count); ++n) {
      double x = u01(g);
      if (x <= 0.0) x = 0.5;
      b.atom_positions.push_back(x);
      b.atom_coefficients.push_back(std::ldexp(1.0, -(n + 1)));
    }
  } else {
    throw ValidationError("unknown base measure '" + spec + "' (gaussian, stable:<index>, atomic:<count>)");
  }
  return b;
}

Interval address_to_interval(const geometry::CellAddress& addr, const geometry::FractalModel& model) {
  for (int s : addr.word)
    if (s < 1 || s > model.N) throw ValidationError("address_to_interval: symbol out of range");
  const auto n = static_cast<int>(addr.word.size());
  Interval iv;
  iv.k = 1 + geometry::word_index(addr.word, model.N);
  const double len = std::pow(static_cast<double>(model.N), -n);
  iv.a = static_cast<double>(iv.k - 1) * len;
  iv.b = static_cast<double>(iv.k) * len;
  return iv;
}

std::vector<double> MeasureRealization::default_weights(std::size_t components) {
  std::vector<double> w(components);
  for (std::size_t j = 0; j < components; ++j) w[j] = std::ldexp(1.0, -static_cast<int>(j));
  return w;
}

double MeasureRealization::raw_root(std::size_t c) const {
  rng::SplitMix64 g(rng::hash_key({base_.seed, kind_tag(base_.kind), c, kRootTag}));
  switch (base_.kind) {
    case BaseKind::gaussian_white: {
      boost::random::normal_distribution<double> nd;
      return nd(g);
    }
    case BaseKind::symmetric_stable: return sample_stable(base_.stability, g);
    case BaseKind::atomic_series: {
      double s = 0;
      for (std::size_t n = 0; n < base_.atom_positions.size(); ++n) {
        double sign = 1.0;
        if (base_.random_signs) {
          std::uint64_t h = rng::hash_key({base_.seed, kSignTag, c, n});
          sign = (h & 1u) ? 1.0 : -1.0;
        }
        s += sign * base_.atom_coefficients[n];
      }
      return s;
    }
  }
  return 0.0;
}

void MeasureRealization::children(std::size_t c, int depth, std::uint64_t index, double raw, double* out) const {
  const int N = N_;
  rng::SplitMix64 g(rng::hash_key({base_.seed, kind_tag(base_.kind), c, static_cast<std::uint64_t>(depth), index}));
  double len = 1.0;
  for (int j = 0; j < depth; ++j) len /= N;
  switch (base_.kind) {
    case BaseKind::gaussian_white: {
      // Brownian bridge over N equal subintervals: iid increments conditioned on their sum
      boost::random::normal_distribution<double> nd;
      const double sd = std::sqrt(len / N);
      double mean = 0;
      for (int i = 0; i < N; ++i) {
        out[i] = nd(g);
        mean += out[i];
      }
      mean /= N;
      for (int i = 0; i < N; ++i) out[i] = raw / N + sd * (out[i] - mean);
      break;
    }
    case BaseKind::symmetric_stable: {
      const double scale = std::pow(len / N, 1.0 / base_.stability);
      double sum = 0;
      for (int i = 0; i < N; ++i) {
        out[i] = scale * sample_stable(base_.stability, g);
        sum += out[i];
      }
      const double fix = (raw - sum) / N;
      for (int i = 0; i < N; ++i) out[i] += fix;
      break;
    }
    case BaseKind::atomic_series: {
      std::fill(out, out + N, 0.0);
      for (std::size_t n = 0; n < base_.atom_positions.size(); ++n) {
        const auto digits = atom_digits(base_.atom_positions[n], N);
        if (depth >= kAtomDigits) throw ValidationError("atomic base: depth beyond atom resolution");
        std::uint64_t k = 0;
        for (int j = 0; j < depth; ++j) k = k * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(digits[j] - 1);
        if (k != index) continue;
        double sign = 1.0;
        if (base_.random_signs) {
          std::uint64_t h = rng::hash_key({base_.seed, kSignTag, c, n});
          sign = (h & 1u) ? 1.0 : -1.0;
        }
        out[digits[depth] - 1] += sign * base_.atom_coefficients[n];
      }
      break;
    }
  }
}

MeasureRealization MeasureRealization::realize(const BaseSM& base, const geometry::FractalModel& model, int M,
                                               int n_max, std::vector<double> component_weights, int stored_depth) {
  if (M < 0 || n_max < 0) throw ValidationError("realize: blowup and depth must be nonnegative");
  if (n_max > 30) throw ValidationError("realize: depth overflow (max 30)");
  if (model.N > 64) throw ValidationError("realize: at most 64 maps supported");
  if (base.kind == BaseKind::atomic_series) {
    if (base.atom_positions.size() != base.atom_coefficients.size())
      throw ValidationError("atomic base: positions and coefficients differ in length");
    for (double x : base.atom_positions)
      if (!(x > 0.0 && x <= 1.0)) throw ValidationError("atomic base: positions must lie in (0, 1]");
    if (n_max >= kAtomDigits) throw ValidationError("atomic base: depth overflow");
  }
  if (base.kind == BaseKind::symmetric_stable && !(base.stability > 0 && base.stability < 2))
    throw ValidationError("stability index must lie in (0, 2)");
  MeasureRealization r;
  r.N_ = model.N;
  r.model_name_ = model.name;
  r.blowup_ = M;
  r.max_depth_ = n_max;
  r.base_ = base;
  const std::size_t comps = ipow(static_cast<std::uint64_t>(model.N), M);
  if (comps > (1u << 20)) throw ValidationError("realize: too many blow-up components");
  r.weights_ = component_weights.empty() ? default_weights(comps) : std::move(component_weights);
  if (r.weights_.size() != comps) throw ValidationError("realize: need one weight per blow-up component");
  for (double w : r.weights_)
    if (!std::isfinite(w)) throw ValidationError("realize: component weights must be finite");

  int s = 0;
  std::uint64_t cells = comps;
  std::uint64_t level = 1;
  while (s < n_max) {
    level *= static_cast<std::uint64_t>(model.N);
    if (cells + comps * level > kStoreBudget) break;
    cells += comps * level;
    ++s;
  }
  if (stored_depth >= 0) s = std::min(stored_depth, n_max);
  r.stored_depth_ = s;

  r.raw_.assign(comps, {});
  std::vector<double> buf(static_cast<std::size_t>(model.N));
  for (std::size_t c = 0; c < comps; ++c) {
    auto& lv = r.raw_[c];
    lv.resize(static_cast<std::size_t>(s) + 1);
    lv[0] = {r.raw_root(c)};
    for (int d = 0; d < s; ++d) {
      lv[d + 1].resize(lv[d].size() * static_cast<std::size_t>(model.N));
      for (std::uint64_t k = 0; k < lv[d].size(); ++k) {
        r.children(c, d, k, lv[d][k], buf.data());
        std::copy(buf.begin(), buf.end(), lv[d + 1].begin() + static_cast<std::ptrdiff_t>(k * model.N));
      }
    }
  }
  return r;
}

MeasureRealization MeasureRealization::zero(const geometry::FractalModel& model, int M, int n_max) {
  MeasureRealization r;
  r.N_ = model.N;
  r.model_name_ = model.name;
  r.blowup_ = M;
  r.max_depth_ = n_max;
  r.stored_depth_ = n_max;
  r.streamable_ = false;
  const std::size_t comps = ipow(static_cast<std::uint64_t>(model.N), M);
  r.weights_ = default_weights(comps);
  r.raw_.assign(comps, {});
  for (auto& lv : r.raw_) {
    std::uint64_t len = 1;
    for (int d = 0; d <= n_max; ++d) {
      lv.emplace_back(len, 0.0);
      len *= static_cast<std::uint64_t>(model.N);
    }
  }
  return r;
}

double MeasureRealization::raw_mass(std::size_t c, int depth, std::uint64_t index) const {
  if (c >= components()) throw ValidationError("mass: component out of range");
  if (depth < 0 || depth > max_depth_) throw ValidationError("mass: depth beyond realization");
  if (index >= ipow(static_cast<std::uint64_t>(N_), depth)) throw ValidationError("mass: index out of range");
  if (depth <= stored_depth_) return raw_[c][static_cast<std::size_t>(depth)][index];
  // regenerate the path from the stored ancestor
  std::vector<std::uint64_t> path;
  std::uint64_t k = index;
  for (int d = depth; d > stored_depth_; --d) {
    path.push_back(k);
    k /= static_cast<std::uint64_t>(N_);
  }
  double v = raw_[c][static_cast<std::size_t>(stored_depth_)][k];
  std::vector<double> buf(static_cast<std::size_t>(N_));
  int d = stored_depth_;
  for (auto it = path.rbegin(); it != path.rend(); ++it, ++d) {
    children(c, d, *it / static_cast<std::uint64_t>(N_), v, buf.data());
    v = buf[*it % static_cast<std::uint64_t>(N_)];
  }
  return v;
}

double MeasureRealization::mass(std::size_t component, int depth, std::uint64_t index) const {
  return weights_[component] * raw_mass(component, depth, index);
}

double MeasureRealization::mass(const geometry::CellAddress& addr) const {
  if (addr.blowup != blowup_) throw ValidationError("mass: address blowup does not match realization");
  if (static_cast<int>(addr.word.size()) < blowup_) throw ValidationError("mass: word shorter than blowup");
  for (int s : addr.word)
    if (s < 1 || s > N_) throw ValidationError("mass: symbol out of range");
  std::span<const int> w(addr.word);
  const auto c = geometry::word_index(w.first(static_cast<std::size_t>(blowup_)), N_);
  const auto k = geometry::word_index(w.subspan(static_cast<std::size_t>(blowup_)), N_);
  return mass(c, static_cast<int>(addr.word.size()) - blowup_, k);
}

double MeasureRealization::total_mass() const {
  double s = 0;
  for (std::size_t c = 0; c < components(); ++c) s += mass(c, 0, 0);
  return s;
}

void MeasureRealization::for_each_cell(int depth,
                                       const std::function<void(std::size_t, std::uint64_t, double)>& fn) const {
  if (depth < 0 || depth > max_depth_) throw ValidationError("for_each_cell: depth beyond realization");
  for (std::size_t c = 0; c < components(); ++c) {
    const double w = weights_[c];
    if (depth <= stored_depth_) {
      const auto& lv = raw_[c][static_cast<std::size_t>(depth)];
      for (std::uint64_t k = 0; k < lv.size(); ++k) fn(c, k, w * lv[k]);
      continue;
    }
    // depth-first regeneration keeps positional order
    std::vector<std::vector<double>> bufs(static_cast<std::size_t>(depth - stored_depth_), std::vector<double>(static_cast<std::size_t>(N_)));
    std::function<void(int, std::uint64_t, double)> rec = [&](int d, std::uint64_t k, double v) {
      if (d == depth) {
        fn(c, k, w * v);
        return;
      }
      auto& b = bufs[static_cast<std::size_t>(d - stored_depth_)];
      children(c, d, k, v, b.data());
      const std::vector<double> local = b;
      for (int i = 0; i < N_; ++i) rec(d + 1, k * static_cast<std::uint64_t>(N_) + static_cast<std::uint64_t>(i), local[static_cast<std::size_t>(i)]);
    };
    const auto& top = raw_[c][static_cast<std::size_t>(stored_depth_)];
    for (std::uint64_t k = 0; k < top.size(); ++k) rec(stored_depth_, k, top[k]);
  }
}

std::vector<double> MeasureRealization::level_masses(int depth) const {
  std::vector<double> out;
  out.reserve(components() * ipow(static_cast<std::uint64_t>(N_), depth));
  for_each_cell(depth, [&](std::size_t, std::uint64_t, double m) { out.push_back(m); });
  return out;
}

std::vector<double> MeasureRealization::sum_squares_by_depth(int depth) const {
  if (depth < 0) throw ValidationError("sum_squares_by_depth: negative depth");
  if (depth > stored_depth_ && !streamable_)
    throw ValidationError("sum_squares_by_depth: realization holds no generator beyond its stored depth");
  if (depth > stored_depth_ && base_.kind == BaseKind::atomic_series && depth >= kAtomDigits)
    throw ValidationError("sum_squares_by_depth: depth beyond atom resolution");
  std::vector<double> sums(static_cast<std::size_t>(depth) + 1, 0.0);
  const int N = N_;
  std::vector<double> stack(static_cast<std::size_t>(N) * static_cast<std::size_t>(std::max(depth - stored_depth_, 1) + 1));
  for (std::size_t c = 0; c < components(); ++c) {
    const double w2 = weights_[c] * weights_[c];
    for (int d = 0; d <= std::min(depth, stored_depth_); ++d) {
      double s = 0;
      for (double v : raw_[c][static_cast<std::size_t>(d)]) s += v * v;
      sums[static_cast<std::size_t>(d)] += w2 * s;
    }
    if (depth <= stored_depth_) continue;
    std::vector<double> local(static_cast<std::size_t>(depth - stored_depth_) + 1, 0.0);
    // children of the node at depth d are written at slot (d - stored) * N
    struct Walker {
      const MeasureRealization& self;
      std::size_t c;
      int N, stored, depth;
      double* stack;
      double* local;
      void operator()(int d, std::uint64_t k, double v) const {
        double* out = stack + static_cast<std::size_t>(d - stored) * static_cast<std::size_t>(N);
        self.children(c, d, k, v, out);
        double s = 0;
        for (int i = 0; i < N; ++i) s += out[i] * out[i];
        local[d + 1 - stored] += s;
        if (d + 1 == depth) return;
        for (int i = 0; i < N; ++i) (*this)(d + 1, k * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(i), out[i]);
      }
    };
    const Walker rec{*this, c, N, stored_depth_, depth, stack.data(), local.data()};
    const auto& top = raw_[c][static_cast<std::size_t>(stored_depth_)];
    for (std::uint64_t k = 0; k < top.size(); ++k) rec(stored_depth_, k, top[k]);
    for (int d = stored_depth_ + 1; d <= depth; ++d)
      sums[static_cast<std::size_t>(d)] += w2 * local[static_cast<std::size_t>(d - stored_depth_)];
  }
  return sums;
}

MeasureRealization MeasureRealization::combine(double a, const MeasureRealization& other, double b) const {
  if (other.N_ != N_ || other.blowup_ != blowup_ || other.components() != components())
    throw ValidationError("combine: realizations differ in shape");
  MeasureRealization r;
  r.N_ = N_;
  r.model_name_ = model_name_;
  r.blowup_ = blowup_;
  r.max_depth_ = std::min(max_depth_, other.max_depth_);
  r.stored_depth_ = r.max_depth_;
  r.streamable_ = false;
  r.base_ = base_;
  r.weights_.assign(components(), 1.0);
  r.raw_.assign(components(), {});
  for (int d = 0; d <= r.max_depth_; ++d) {
    auto x = level_masses(d), y = other.level_masses(d);
    const std::size_t per = x.size() / components();
    for (std::size_t c = 0; c < components(); ++c) {
      std::vector<double> v(per);
      for (std::size_t k = 0; k < per; ++k) v[k] = a * x[c * per + k] + b * y[c * per + k];
      r.raw_[c].push_back(std::move(v));
    }
  }
  return r;
}

std::string MeasureRealization::to_json() const {
  nlohmann::json j;
  j["format"] = "nfheat-realization-1";
  j["model"] = model_name_;
  j["N"] = N_;
  j["blowup"] = blowup_;
  j["depth"] = stored_depth_;
  j["generator_depth"] = max_depth_;
  j["streamable"] = streamable_;
  j["base"] = {{"kind", base_.describe()},
               {"seed", base_.seed},
               {"stability", base_.stability},
               {"atom_positions", base_.atom_positions},
               {"atom_coefficients", base_.atom_coefficients},
               {"random_signs", base_.random_signs}};
  j["component_weights"] = weights_;
  auto cells = nlohmann::json::array();
  for (int d = 0; d <= stored_depth_; ++d) {
    for_each_cell(d, [&](std::size_t c, std::uint64_t k, double m) {
      std::string w;
      auto full = geometry::index_word(c, static_cast<std::size_t>(blowup_), N_);
      auto local = geometry::index_word(k, static_cast<std::size_t>(d), N_);
      full.insert(full.end(), local.begin(), local.end());
      for (std::size_t i = 0; i < full.size(); ++i) w += (i ? "." : "") + std::to_string(full[i]);
      cells.push_back({{"word", w}, {"mass", m}});
    });
  }
  j["cells"] = std::move(cells);
  return j.dump(1);
}

MeasureRealization MeasureRealization::from_json(const std::string& text, const geometry::FractalModel& model) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("realization document is not valid JSON: ") + e.what());
  }
  MeasureRealization r;
  try {
    if (j.at("format") != "nfheat-realization-1") throw ValidationError("unknown realization format");
    r.N_ = j.at("N").get<int>();
    if (r.N_ != model.N) throw ValidationError("realization does not match the model");
    r.model_name_ = j.at("model").get<std::string>();
    r.blowup_ = j.at("blowup").get<int>();
    r.stored_depth_ = j.at("depth").get<int>();
    // deeper levels regenerate from the stored ancestors and the seed streams
    r.streamable_ = j.value("streamable", false);
    r.max_depth_ = r.streamable_ ? j.value("generator_depth", r.stored_depth_) : r.stored_depth_;
    if (r.stored_depth_ < 0 || r.max_depth_ < r.stored_depth_ || r.max_depth_ > 30)
      throw ValidationError("realization: bad depth fields");
    const auto& b = j.at("base");
    const auto kind = b.at("kind").get<std::string>();
    const auto head = kind.substr(0, kind.find(':'));
    if (head == "gaussian") r.base_.kind = BaseKind::gaussian_white;
    else if (head == "stable") r.base_.kind = BaseKind::symmetric_stable;
    else if (head == "atomic") r.base_.kind = BaseKind::atomic_series;
    else throw ValidationError("realization: unknown base kind '" + kind + "'");
    r.base_.seed = b.at("seed").get<std::uint64_t>();
    r.base_.stability = b.at("stability").get<double>();
    r.base_.atom_positions = b.at("atom_positions").get<std::vector<double>>();
    r.base_.atom_coefficients = b.at("atom_coefficients").get<std::vector<double>>();
    r.base_.random_signs = b.at("random_signs").get<bool>();
    r.weights_ = j.at("component_weights").get<std::vector<double>>();
    const std::size_t comps = ipow(static_cast<std::uint64_t>(r.N_), r.blowup_);
    if (r.weights_.size() != comps) throw ValidationError("realization: wrong number of component weights");
    r.raw_.assign(comps, {});
    for (auto& lv : r.raw_) {
      std::uint64_t len = 1;
      for (int d = 0; d <= r.stored_depth_; ++d) {
        lv.emplace_back(len, std::nan(""));
        len *= static_cast<std::uint64_t>(r.N_);
      }
    }
    for (const auto& cell : j.at("cells")) {
      std::vector<int> word;
      std::stringstream ss(cell.at("word").get<std::string>());
      std::string tok;
      while (std::getline(ss, tok, '.'))
        if (!tok.empty()) word.push_back(std::stoi(tok));
      if (static_cast<int>(word.size()) < r.blowup_ || static_cast<int>(word.size()) > r.blowup_ + r.stored_depth_)
        throw ValidationError("realization: cell word has wrong length");
      for (int s : word)
        if (s < 1 || s > r.N_) throw ValidationError("realization: symbol out of range");
      std::span<const int> w(word);
      auto c = geometry::word_index(w.first(static_cast<std::size_t>(r.blowup_)), r.N_);
      auto k = geometry::word_index(w.subspan(static_cast<std::size_t>(r.blowup_)), r.N_);
      const double m = cell.at("mass").get<double>();
      r.raw_[c][word.size() - static_cast<std::size_t>(r.blowup_)][k] = r.weights_[c] != 0.0 ? m / r.weights_[c] : 0.0;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed realization document: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("malformed realization document: bad word");
  }
  for (const auto& lv : r.raw_)
    for (const auto& level : lv)
      for (double v : level)
        if (std::isnan(v)) throw ValidationError("realization document is missing cells");
  return r;
}

geometry::Point anchor_point(const geometry::FractalModel& model, int blowup, std::size_t component, int depth,
                             std::uint64_t index, AnchorRule rule) {
  geometry::CellAddress a;
  a.blowup = blowup;
  a.word = geometry::index_word(component, static_cast<std::size_t>(blowup), model.N);
  auto local = geometry::index_word(index, static_cast<std::size_t>(depth), model.N);
  a.word.insert(a.word.end(), local.begin(), local.end());
  // the blow-up prefix is part of the word; the outer factor alpha^M restores the scale
  const std::size_t r = rule == AnchorRule::first_fixed_point ? 0 : model.boundary_size() - 1;
  return geometry::apply_word(model, a, model.boundary_point(r));
}

double integrate(const std::function<double(const geometry::Point&)>& g, const MeasureRealization& real,
                 const geometry::FractalModel& model, int n, AnchorRule rule) {
  if (n < 0 || n > real.max_depth()) throw ValidationError("integrate: depth beyond realization");
  double s = 0;
  real.for_each_cell(n, [&](std::size_t c, std::uint64_t k, double m) {
    const double v = g(anchor_point(model, real.blowup(), c, n, k, rule));
    if (!std::isfinite(v)) throw ValidationError("integrate: integrand is not finite at an anchor");
    s += v * m;
  });
  return s;
}

std::vector<double> lemma22_diagnostic(const std::vector<std::function<double(const geometry::Point&)>>& family,
                                       const MeasureRealization& real, const geometry::FractalModel& model, int n) {
  std::vector<double> out;
  double acc = 0;
  for (const auto& g : family) {
    const double v = integrate(g, real, model, n);
    acc += v * v;
    out.push_back(acc);
  }
  return out;
}

std::vector<double> cell_family_partial_sums(const MeasureRealization& real, const geometry::FractalModel& model,
                                             int L, double beta) {
  if (L < 1) throw ValidationError("cell_family_partial_sums: need L >= 1");
  const auto sq = real.sum_squares_by_depth(L);
  std::vector<double> out;
  double acc = 0;
  for (int l = 1; l <= L; ++l) {
    acc += std::pow(model.alpha, -2.0 * l * beta) * sq[static_cast<std::size_t>(l)];
    out.push_back(acc);
  }
  return out;
}

Plateau plateau(const std::vector<double>& partial_sums, double threshold) {
  Plateau p;
  if (partial_sums.empty()) {
    p.flat = true;
    return p;
  }
  const double last = partial_sums.back();
  const double half = partial_sums[partial_sums.size() / 2 - (partial_sums.size() >= 2 ? 1 : 0)];
  p.relative_increment = last == 0.0 ? 0.0 : (last - half) / last;
  p.flat = p.relative_increment < threshold;
  return p;
}

}  // namespace nfheat::measure
