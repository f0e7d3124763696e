#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cq/mdp.hpp"  // detail::format_double / parse_double
#include "cq/rng.hpp"

namespace cq {

/** One named parameter block inside a flat vector. */
struct Slice {
  std::string name;
  std::string group;  // learning-rate group ("main", "trunc_heads", ...)
  int rows;
  int cols;
  std::size_t off;
};

class ParamLayout {
 public:
  std::size_t add(const std::string& name, const std::string& group, int rows,
                  int cols) {
    slices_.push_back(Slice{name, group, rows, cols, total_});
    total_ += static_cast<std::size_t>(rows) * cols;
    return slices_.back().off;
  }

  const std::vector<Slice>& slices() const { return slices_; }
  std::size_t total() const { return total_; }

  const Slice& find(const std::string& name) const {
    for (const Slice& s : slices_)
      if (s.name == name) return s;
    throw std::invalid_argument("ParamLayout: no slice named " + name);
  }

 private:
  std::vector<Slice> slices_;
  std::size_t total_ = 0;
};

/** Flat parameter (or gradient) vector tied to a layout. */
class ParamVector {
 public:
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout)
      : v(layout->total(), 0.0), layout_(std::move(layout)) {}

  const ParamLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParamLayout> layout_ptr() const { return layout_; }

  double* slice(const Slice& s) { return v.data() + s.off; }
  const double* slice(const Slice& s) const { return v.data() + s.off; }
  double* slice(const std::string& name) { return v.data() + layout_->find(name).off; }

  void zero() { v.assign(v.size(), 0.0); }

  std::vector<double> v;

 private:
  std::shared_ptr<const ParamLayout> layout_;
};

enum class Act { kIdentity, kRelu, kLeakyRelu, kTanhBound };

namespace detail {

inline double act_fwd(Act a, double z, double leak, double bound) {
  switch (a) {
    case Act::kIdentity: return z;
    case Act::kRelu: return z >= 0.0 ? z : 0.0;
    case Act::kLeakyRelu: return z >= 0.0 ? z : leak * z;
    case Act::kTanhBound: return bound * std::tanh(z);
  }
  return z;
}

// Derivative at the pre-activation.  Kink convention for (leaky) ReLU: the
// point z = 0 takes the right-hand slope 1.
inline double act_bwd(Act a, double z, double leak, double bound) {
  switch (a) {
    case Act::kIdentity: return 1.0;
    case Act::kRelu: return z >= 0.0 ? 1.0 : 0.0;
    case Act::kLeakyRelu: return z >= 0.0 ? 1.0 : leak;
    case Act::kTanhBound: {
      double t = std::tanh(z);
      return bound * (1.0 - t * t);
    }
  }
  return 1.0;
}

// y += W x + b over a (rows x cols) slice pair
inline void linear_fwd(const double* w, const double* b, std::span<const double> x,
                       double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// dX += W^T dY, gW += dY x^T, gB += dY
inline void linear_bwd(const double* w, std::span<const double> x,
                       std::span<const double> dy, double* gw, double* gb,
                       double* dx, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double d = dy[r];
    gb[r] += d;
    double* gwr = gw + static_cast<std::size_t>(r) * cols;
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      gwr[c] += d * x[c];
      if (dx) dx[c] += d * wr[c];
    }
  }
}

// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] for both weights and biases.
// Draw order: the W slice row-major, then the bias, one uniform01 each.
inline void init_linear(Rng& rng, double* w, double* b, int rows, int cols) {
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int i = 0; i < rows * cols; ++i) w[i] = rng.uniform(-bound, bound);
  for (int r = 0; r < rows; ++r) b[r] = rng.uniform(-bound, bound);
}

}  // namespace detail

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  Act hidden_act = Act::kLeakyRelu;
  Act output_act = Act::kIdentity;
  double leak = 0.01;
  double tanh_bound = 1.0;
  std::string group = "main";
};

/**
 * Plain fully-connected network over a flat ParamVector.  Layer l owns
 * slices "<prefix>fc<l>.w" / ".b".  forward() fills a caller-provided cache
 * (inputs and pre-activations) that backward() consumes; backward
 * accumulates parameter gradients and returns the input cotangent.
 */
class Mlp {
 public:
  Mlp(MlpSpec spec, const std::string& prefix = "")
      : params(make_layout(spec, prefix)), spec_(std::move(spec)) {}

  struct Cache {
    std::vector<std::vector<double>> x;  // input of each layer
    std::vector<std::vector<double>> z;  // pre-activation of each layer
  };

  void init(Rng& rng) {
    const auto& sl = params.layout().slices();
    for (std::size_t l = 0; l < sl.size(); l += 2)
      detail::init_linear(rng, params.slice(sl[l]), params.slice(sl[l + 1]),
                          sl[l].rows, sl[l].cols);
  }

  int num_layers() const { return static_cast<int>(spec_.hidden.size()) + 1; }
  const MlpSpec& spec() const { return spec_; }

  std::vector<double> forward(std::span<const double> input, Cache* cache) const {
    if (static_cast<int>(input.size()) != spec_.input_dim)
      throw std::invalid_argument("Mlp::forward: input dim mismatch");
    if (cache) {
      cache->x.assign(num_layers(), {});
      cache->z.assign(num_layers(), {});
    }
    std::vector<double> cur(input.begin(), input.end());
    const auto& sl = params.layout().slices();
    for (int l = 0; l < num_layers(); ++l) {
      const Slice& ws = sl[2 * l];
      const Slice& bs = sl[2 * l + 1];
      std::vector<double> z(ws.rows);
      detail::linear_fwd(params.slice(ws), params.slice(bs), cur, z.data(),
                         ws.rows, ws.cols);
      if (cache) {
        cache->x[l] = cur;
        cache->z[l] = z;
      }
      bool last = l == num_layers() - 1;
      Act a = last ? spec_.output_act : spec_.hidden_act;
      cur.resize(z.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        cur[i] = detail::act_fwd(a, z[i], spec_.leak, spec_.tanh_bound);
    }
    return cur;
  }

  std::vector<double> backward(const Cache& cache, std::span<const double> out_cot,
                               ParamVector& grad) const {
    const auto& sl = params.layout().slices();
    std::vector<double> d(out_cot.begin(), out_cot.end());
    for (int l = num_layers() - 1; l >= 0; --l) {
      bool last = l == num_layers() - 1;
      Act a = last ? spec_.output_act : spec_.hidden_act;
      const std::vector<double>& z = cache.z[l];
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] *= detail::act_bwd(a, z[i], spec_.leak, spec_.tanh_bound);
      const Slice& ws = sl[2 * l];
      const Slice& bs = sl[2 * l + 1];
      std::vector<double> dx(ws.cols, 0.0);
      detail::linear_bwd(params.slice(ws), cache.x[l], d, grad.slice(ws),
                         grad.slice(bs), dx.data(), ws.rows, ws.cols);
      d = std::move(dx);
    }
    return d;
  }

  ParamVector params;

 private:
  static std::shared_ptr<const ParamLayout> make_layout(const MlpSpec& spec,
                                                        const std::string& prefix) {
    auto layout = std::make_shared<ParamLayout>();
    int in = spec.input_dim;
    std::vector<int> dims = spec.hidden;
    dims.push_back(spec.output_dim);
    for (std::size_t l = 0; l < dims.size(); ++l) {
      std::string base = prefix + "fc" + std::to_string(l + 1);
      layout->add(base + ".w", spec.group, dims[l], in);
      layout->add(base + ".b", spec.group, dims[l], 1);
      in = dims[l];
    }
    return layout;
  }

  MlpSpec spec_;
};

/**
 * Per-parameter adaptive-moment optimizer.  Group learning rates scale the
 * step of their slices; a group at rate 0 leaves its parameters bitwise
 * untouched.  plain_sgd switches to theta -= rate * grad for the
 * hand-checkable plain-gradient mode.
 */
class Adam {
 public:
  Adam(std::shared_ptr<const ParamLayout> layout, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : layout_(std::move(layout)), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(layout_->total(), 0.0), v_(layout_->total(), 0.0) {}

  void step(ParamVector& p, const ParamVector& g,
            const std::map<std::string, double>& rates, bool plain_sgd = false) {
    if (p.v.size() != m_.size() || g.v.size() != m_.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const Slice& s : layout_->slices()) {
      double rate = rates.at(s.group);
      std::size_t end = s.off + static_cast<std::size_t>(s.rows) * s.cols;
      for (std::size_t i = s.off; i < end; ++i) {
        if (plain_sgd) {
          if (rate != 0.0) p.v[i] -= rate * g.v[i];
          continue;
        }
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g.v[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.v[i] * g.v[i];
        if (rate != 0.0)
          p.v[i] -= rate * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
      }
    }
  }

  long steps_taken() const { return t_; }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  double beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/** theta_target <- (1 - tau) * theta_target + tau * theta_online */
inline void polyak_update(ParamVector& target, const ParamVector& online,
                          double tau) {
  if (target.v.size() != online.v.size())
    throw std::invalid_argument("polyak_update: size mismatch");
  for (std::size_t i = 0; i < target.v.size(); ++i)
    target.v[i] = (1.0 - tau) * target.v[i] + tau * online.v[i];
}

/**
 * Versioned text checkpoint of a ParamVector: a layout header naming every
 * slice, then one shortest-round-trip decimal per parameter.  Load verifies
 * the layout and is value-exact.
 */
inline std::string save_params(const ParamVector& p) {
  std::ostringstream out;
  out << "cqparams 1 " << p.layout().slices().size() << "\n";
  for (const Slice& s : p.layout().slices())
    out << s.name << ' ' << s.group << ' ' << s.rows << ' ' << s.cols << "\n";
  for (double x : p.v) out << detail::format_double(x) << "\n";
  return out.str();
}

inline void load_params(ParamVector& p, const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  std::size_t nslices = 0;
  if (!(in >> magic >> version >> nslices) || magic != "cqparams" || version != 1)
    throw std::invalid_argument("load_params: bad header");
  if (nslices != p.layout().slices().size())
    throw std::invalid_argument("load_params: slice count mismatch");
  for (const Slice& s : p.layout().slices()) {
    std::string name, group;
    int rows = 0, cols = 0;
    if (!(in >> name >> group >> rows >> cols))
      throw std::invalid_argument("load_params: truncated layout");
    if (name != s.name || group != s.group || rows != s.rows || cols != s.cols)
      throw std::invalid_argument("load_params: layout mismatch at " + name);
  }
  for (double& x : p.v) {
    std::string tok;
    if (!(in >> tok)) throw std::invalid_argument("load_params: missing values");
    x = detail::parse_double(tok);
  }
  std::string extra;
  if (in >> extra) throw std::invalid_argument("load_params: trailing values");
}

}  // namespace cq
