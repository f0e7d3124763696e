#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "cq/mlp.hpp"
#include "cq/rng.hpp"

namespace cq {

/**
 * Critic that emits the n truncated heads, the n shifted heads, and the
 * full Q in one pass:
 *
 *   (s ⊕ a) -> fc1 -> fc2 ---> trunc heads (linear, n)
 *                        \---> fc3 ---> shift heads (linear, n)
 *                                 \---> fc4 ---> q head (linear, 1)
 *
 * Hidden layers share one width and leaky-ReLU (slope 0.01).  Rate groups:
 * the head output layers are "trunc_heads" / "shift_heads", the final value
 * layer is "q_head", and the shared fully-connected stack is "trunk".
 */
class CompositeCriticNet {
 public:
  CompositeCriticNet(int state_dim, int action_dim, int hidden, int n)
      : params(make_layout(state_dim + action_dim, hidden, n)),
        sdim_(state_dim), adim_(action_dim), hidden_(hidden), n_(n) {
    if (n < 1) throw std::invalid_argument("CompositeCriticNet: n < 1");
  }

  struct Out {
    std::vector<double> trunc;
    std::vector<double> shift;
    double q;
  };

  struct Cache {
    std::vector<double> x;       // s ⊕ a
    std::vector<double> z1, h1;
    std::vector<double> z2, h2;
    std::vector<double> z3, h3;
    std::vector<double> z4, h4;
  };

  int n() const { return n_; }
  int state_dim() const { return sdim_; }
  int action_dim() const { return adim_; }

  // Weight init in wiring order fc1, fc2, trunc, fc3, shift, fc4, q;
  // each layer draws W row-major then its bias.
  void init(Rng& rng) {
    for (const char* name : {"fc1", "fc2", "trunc", "fc3", "shift", "fc4", "q"}) {
      const Slice& w = params.layout().find(std::string(name) + ".w");
      const Slice& b = params.layout().find(std::string(name) + ".b");
      detail::init_linear(rng, params.slice(w), params.slice(b), w.rows, w.cols);
    }
  }

  Out forward(std::span<const double> s, std::span<const double> a,
              Cache* cache) const {
    if (static_cast<int>(s.size()) != sdim_ || static_cast<int>(a.size()) != adim_)
      throw std::invalid_argument("CompositeCriticNet::forward: dim mismatch");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x.assign(s.begin(), s.end());
    c.x.insert(c.x.end(), a.begin(), a.end());
    c.z1 = affine("fc1", c.x);
    c.h1 = lrelu(c.z1);
    c.z2 = affine("fc2", c.h1);
    c.h2 = lrelu(c.z2);
    Out out;
    out.trunc = affine("trunc", c.h2);
    c.z3 = affine("fc3", c.h2);
    c.h3 = lrelu(c.z3);
    out.shift = affine("shift", c.h3);
    c.z4 = affine("fc4", c.h3);
    c.h4 = lrelu(c.z4);
    out.q = affine("q", c.h4)[0];
    return out;
  }

  // Accumulates parameter gradients for arbitrary head cotangents and
  // returns the cotangent of (s ⊕ a).
  std::vector<double> backward(const Cache& c, std::span<const double> tr_cot,
                               std::span<const double> sh_cot, double q_cot,
                               ParamVector& grad) const {
    std::vector<double> dh4(hidden_, 0.0);
    {
      double dq = q_cot;
      bwd("q", c.h4, std::span<const double>(&dq, 1), grad, dh4.data());
    }
    std::vector<double> dh3(hidden_, 0.0);
    bwd_through_lrelu("fc4", c.z4, c.h3, dh4, grad, dh3.data());
    bwd("shift", c.h3, sh_cot, grad, dh3.data());
    std::vector<double> dh2(hidden_, 0.0);
    bwd_through_lrelu("fc3", c.z3, c.h2, dh3, grad, dh2.data());
    bwd("trunc", c.h2, tr_cot, grad, dh2.data());
    std::vector<double> dh1(hidden_, 0.0);
    bwd_through_lrelu("fc2", c.z2, c.h1, dh2, grad, dh1.data());
    std::vector<double> dx(sdim_ + adim_, 0.0);
    bwd_through_lrelu("fc1", c.z1, c.x, dh1, grad, dx.data());
    return dx;
  }

  /**
   * Entropy regularizer gradients.  The heads are linear, so the gradient
   * of any scalar with cotangent dh[i] on head i touches exactly that
   * head's row: d/dW_i = dh[i] * input, d/db_i = dh[i].  Adds
   * tr_scale * dH into the trunc head slices and sh_scale * dH into the
   * shift head slices; nothing else is touched.
   */
  void head_entropy_grads(const Cache& c, std::span<const double> dh,
                          double tr_scale, double sh_scale,
                          ParamVector& grad) const {
    const Slice& tw = params.layout().find("trunc.w");
    const Slice& tb = params.layout().find("trunc.b");
    const Slice& sw = params.layout().find("shift.w");
    const Slice& sb = params.layout().find("shift.b");
    for (int i = 0; i < n_; ++i) {
      double* gtw = grad.slice(tw) + static_cast<std::size_t>(i) * hidden_;
      double* gsw = grad.slice(sw) + static_cast<std::size_t>(i) * hidden_;
      for (int j = 0; j < hidden_; ++j) {
        gtw[j] += tr_scale * dh[i] * c.h2[j];
        gsw[j] += sh_scale * dh[i] * c.h3[j];
      }
      grad.slice(tb)[i] += tr_scale * dh[i];
      grad.slice(sb)[i] += sh_scale * dh[i];
    }
  }

  ParamVector params;

 private:
  static std::shared_ptr<const ParamLayout> make_layout(int in, int hidden, int n) {
    auto l = std::make_shared<ParamLayout>();
    l->add("fc1.w", "trunk", hidden, in);
    l->add("fc1.b", "trunk", hidden, 1);
    l->add("fc2.w", "trunk", hidden, hidden);
    l->add("fc2.b", "trunk", hidden, 1);
    l->add("trunc.w", "trunc_heads", n, hidden);
    l->add("trunc.b", "trunc_heads", n, 1);
    l->add("fc3.w", "trunk", hidden, hidden);
    l->add("fc3.b", "trunk", hidden, 1);
    l->add("shift.w", "shift_heads", n, hidden);
    l->add("shift.b", "shift_heads", n, 1);
    l->add("fc4.w", "trunk", hidden, hidden);
    l->add("fc4.b", "trunk", hidden, 1);
    l->add("q.w", "q_head", 1, hidden);
    l->add("q.b", "q_head", 1, 1);
    return l;
  }

  static std::vector<double> lrelu(const std::vector<double>& z) {
    std::vector<double> h(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      h[i] = detail::act_fwd(Act::kLeakyRelu, z[i], 0.01, 1.0);
    return h;
  }

  std::vector<double> affine(const std::string& name, std::span<const double> x) const {
    const Slice& w = params.layout().find(name + ".w");
    const Slice& b = params.layout().find(name + ".b");
    std::vector<double> y(w.rows);
    detail::linear_fwd(params.slice(w), params.slice(b), x, y.data(), w.rows, w.cols);
    return y;
  }

  void bwd(const std::string& name, std::span<const double> x,
           std::span<const double> dy, ParamVector& grad, double* dx) const {
    const Slice& w = params.layout().find(name + ".w");
    const Slice& b = params.layout().find(name + ".b");
    detail::linear_bwd(params.slice(w), x, dy, grad.slice(w), grad.slice(b), dx,
                       w.rows, w.cols);
  }

  // cotangent on the activation -> through the leaky-ReLU kink -> linear
  void bwd_through_lrelu(const std::string& name, const std::vector<double>& z,
                         std::span<const double> x, std::vector<double>& dh,
                         ParamVector& grad, double* dx) const {
    for (std::size_t i = 0; i < dh.size(); ++i)
      dh[i] *= detail::act_bwd(Act::kLeakyRelu, z[i], 0.01, 1.0);
    bwd(name, x, dh, grad, dx);
  }

  int sdim_, adim_, hidden_, n_;
};

}  // namespace cq
