#include "ensdiv/mlp.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace ensdiv {

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("MlpConfig: need at least input and output sizes");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw ConfigError("MlpConfig: all layer sizes must be >= 1");
}

MlpParams init_mlp(const MlpConfig& config, Rng& rng) {
  config.validate();
  MlpParams p;
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const std::size_t fan_in = config.layer_sizes[l];
    const std::size_t fan_out = config.layer_sizes[l + 1];
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Mat w(fan_out, fan_in);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = std_dev * rng.normal();
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

std::pair<Mat, ForwardTrace> mlp_forward(const MlpParams& params, const Mat& x) {
  if (params.weights.empty()) throw ConfigError("mlp_forward: empty parameter set");
  if (x.cols() != params.weights.front().cols())
    throw_dim_error("mlp_forward", x, params.weights.front());

  ForwardTrace trace;
  trace.input = x;
  Mat act = x;
  const std::size_t layers = params.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    Mat z = matmul(act, transpose(params.weights[l]));
    z = add_row_broadcast(z, params.biases[l]);
    trace.pre_acts.push_back(z);
    if (l + 1 < layers) {
      Mat h = z;
      for (std::size_t i = 0; i < h.size(); ++i)
        if (h.data()[i] < 0.0) h.data()[i] = 0.0;
      trace.hidden_acts.push_back(h);
      act = std::move(h);
    } else {
      act = std::move(z);
    }
  }
  return {act, std::move(trace)};
}

MlpGrads mlp_backward(const MlpParams& params, const ForwardTrace& trace,
                      const Mat& grad_scores) {
  const std::size_t layers = params.num_layers();
  if (trace.pre_acts.size() != layers)
    throw DimError("mlp_backward: trace does not match parameter set");
  if (!grad_scores.same_shape(trace.pre_acts.back()))
    throw_dim_error("mlp_backward", grad_scores, trace.pre_acts.back());

  MlpGrads grads = zero_grads(params);
  Mat delta = grad_scores;  // d(sum)/d(pre_act of current layer)
  for (std::size_t l = layers; l-- > 0;) {
    const Mat& below = (l == 0) ? trace.input : trace.hidden_acts[l - 1];
    grads.weights[l] = matmul(transpose(delta), below);
    grads.biases[l] = col_sum(delta);
    if (l == 0) break;
    Mat next = matmul(delta, params.weights[l]);
    // ReLU gate from the pre-activation; subgradient at 0 is 0
    const Mat& z = trace.pre_acts[l - 1];
    for (std::size_t i = 0; i < next.size(); ++i)
      if (z.data()[i] <= 0.0) next.data()[i] = 0.0;
    delta = std::move(next);
  }
  return grads;
}

MlpGrads zero_grads(const MlpParams& params) {
  MlpGrads g;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

void accumulate_grads(MlpGrads& into, const MlpGrads& g, double factor) {
  for (std::size_t l = 0; l < into.weights.size(); ++l) {
    axpy_in_place(into.weights[l], factor, g.weights[l]);
    for (std::size_t i = 0; i < into.biases[l].size(); ++i)
      into.biases[l][i] += factor * g.biases[l][i];
  }
}

double optimizer_lr(const Optimizer& opt) {
  return std::visit([](const auto& o) { return o.lr; }, opt);
}

Optimizer with_lr(const Optimizer& opt, double lr) {
  Optimizer out = opt;
  std::visit([lr](auto& o) { o.lr = lr; }, out);
  return out;
}

OptState init_opt_state(const MlpParams& params) {
  OptState s;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    s.w_m.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    s.w_v.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    s.b_m.emplace_back(params.biases[l].size(), 0.0);
    s.b_v.emplace_back(params.biases[l].size(), 0.0);
  }
  return s;
}

namespace {

void sgd_step(double* theta, double* vel, const double* g, std::size_t n, double lr,
              double momentum, double wd) {
  for (std::size_t i = 0; i < n; ++i) {
    const double grad = g[i] + wd * theta[i];
    vel[i] = momentum * vel[i] + grad;
    theta[i] -= lr * vel[i];
  }
}

void adam_step(double* theta, double* m, double* v, const double* g, std::size_t n,
               const Adam& a, double wd, long t) {
  const double bc1 = 1.0 - std::pow(a.b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(a.b2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const double grad = g[i] + wd * theta[i];
    m[i] = a.b1 * m[i] + (1.0 - a.b1) * grad;
    v[i] = a.b2 * v[i] + (1.0 - a.b2) * grad * grad;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= a.lr * mhat / (std::sqrt(vhat) + a.eps);
  }
}

}  // namespace

void apply_update(MlpParams& params, const MlpGrads& grads, OptState& state, const Optimizer& opt,
                  double weight_decay) {
  if (grads.weights.size() != params.weights.size())
    throw DimError("apply_update: gradient/parameter layer count mismatch");
  ++state.step;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    if (!params.weights[l].same_shape(grads.weights[l]))
      throw_dim_error("apply_update", params.weights[l], grads.weights[l]);
    const std::size_t nw = params.weights[l].size();
    const std::size_t nb = params.biases[l].size();
    if (const auto* sgd = std::get_if<SgdMomentum>(&opt)) {
      sgd_step(params.weights[l].data(), state.w_m[l].data(), grads.weights[l].data(), nw, sgd->lr,
               sgd->momentum, weight_decay);
      sgd_step(params.biases[l].data(), state.b_m[l].data(), grads.biases[l].data(), nb, sgd->lr,
               sgd->momentum, weight_decay);
    } else {
      const auto& a = std::get<Adam>(opt);
      adam_step(params.weights[l].data(), state.w_m[l].data(), state.w_v[l].data(),
                grads.weights[l].data(), nw, a, weight_decay, state.step);
      adam_step(params.biases[l].data(), state.b_m[l].data(), state.b_v[l].data(),
                grads.biases[l].data(), nb, a, weight_decay, state.step);
    }
  }
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw IoError("checkpoint: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    write_u64(os, bits);
  }
}

void read_doubles(std::istream& is, double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64(is);
    std::memcpy(&p[i], &bits, 8);
  }
}

}  // namespace

void save_mlp(std::ostream& os, const MlpParams& params) {
  write_u64(os, params.num_layers());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    write_u64(os, params.weights[l].rows());
    write_u64(os, params.weights[l].cols());
    write_doubles(os, params.weights[l].data(), params.weights[l].size());
    write_doubles(os, params.biases[l].data(), params.biases[l].size());
  }
}

MlpParams load_mlp(std::istream& is) {
  MlpParams p;
  const std::uint64_t layers = read_u64(is);
  if (layers == 0 || layers > 1024) throw IoError("checkpoint: bad layer count");
  for (std::uint64_t l = 0; l < layers; ++l) {
    const std::uint64_t rows = read_u64(is);
    const std::uint64_t cols = read_u64(is);
    if (rows == 0 || cols == 0 || rows * cols > (1ULL << 32))
      throw IoError("checkpoint: bad layer shape");
    Mat w(rows, cols);
    read_doubles(is, w.data(), w.size());
    std::vector<double> b(rows, 0.0);
    read_doubles(is, b.data(), b.size());
    w.require_finite("checkpoint weights");
    for (double v : b)
      if (!std::isfinite(v)) throw DomainError("checkpoint biases: non-finite entry");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

}  // namespace ensdiv
