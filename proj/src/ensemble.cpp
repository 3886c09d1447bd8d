#include "ensdiv/ensemble.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ensdiv {

const char* to_string(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::MeanOutput: return "mean-output";
    case AggregationMode::ScoreAvg: return "score-avg";
    case AggregationMode::ProbAvg: return "prob-avg";
  }
  return "?";
}

const char* to_string(TaskKind task) {
  return task == TaskKind::Regression ? "regression" : "classification";
}

void EnsembleModel::validate() const {
  if (learners.size() < 2) throw ConfigError("ensemble: need at least 2 learners");
  if (weights.size() != learners.size())
    throw ConfigError("ensemble: weight count does not match learner count");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("ensemble: weights must be nonnegative");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw ConfigError("ensemble: weights must sum to 1");
  const bool classification_mode = mode != AggregationMode::MeanOutput;
  if (classification_mode != (task == TaskKind::Classification))
    throw ConfigError("ensemble: aggregation mode incompatible with task kind");
}

bool EnsembleOutputs::is_active(std::size_t j) const {
  for (std::size_t a : active)
    if (a == j) return true;
  return false;
}

double EnsembleOutputs::active_weight_of(std::size_t j) const {
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i] == j) return active_weights[i];
  return 0.0;
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<double>> resolve_mask(const EnsembleModel& model,
                                                                      const LearnerMask& mask) {
  std::vector<std::size_t> active;
  if (mask.empty()) {
    for (std::size_t j = 0; j < model.size(); ++j) active.push_back(j);
  } else {
    if (mask.size() != model.size()) throw ConfigError("ensemble: mask length != learner count");
    for (std::size_t j = 0; j < model.size(); ++j)
      if (mask[j]) active.push_back(j);
    if (active.empty()) throw ConfigError("ensemble: mask drops every learner");
  }
  double sum = 0.0;
  for (std::size_t j : active) sum += model.weights[j];
  std::vector<double> w;
  w.reserve(active.size());
  for (std::size_t j : active) w.push_back(model.weights[j] / sum);
  return {std::move(active), std::move(w)};
}

}  // namespace

EnsembleForward ensemble_forward(const EnsembleModel& model, const Mat& x,
                                 const LearnerMask& mask) {
  auto [active, weights] = resolve_mask(model, mask);

  EnsembleForward out;
  out.outputs.mode = model.mode;
  out.outputs.scores.resize(model.size());
  out.outputs.probs.resize(model.size());
  out.traces.resize(model.size());
  out.outputs.active = active;
  out.outputs.active_weights = weights;

  Mat mean_scores;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const std::size_t j = active[i];
    auto [scores, trace] = mlp_forward(model.learners[j], x);
    if (i == 0)
      mean_scores = scale(scores, weights[i]);
    else
      axpy_in_place(mean_scores, weights[i], scores);
    out.outputs.scores[j] = std::move(scores);
    out.traces[j] = std::move(trace);
  }
  out.outputs.mean_scores = mean_scores;

  switch (model.mode) {
    case AggregationMode::MeanOutput:
      out.outputs.aggregate = std::move(mean_scores);
      break;
    case AggregationMode::ScoreAvg:
      for (std::size_t i = 0; i < active.size(); ++i) {
        const std::size_t j = active[i];
        out.outputs.probs[j] = softmax_rows(out.outputs.scores[j]);
      }
      out.outputs.aggregate = softmax_rows(mean_scores);
      break;
    case AggregationMode::ProbAvg: {
      Mat mean_probs;
      for (std::size_t i = 0; i < active.size(); ++i) {
        const std::size_t j = active[i];
        Mat p = softmax_rows(out.outputs.scores[j]);
        if (i == 0)
          mean_probs = scale(p, weights[i]);
        else
          axpy_in_place(mean_probs, weights[i], p);
        out.outputs.probs[j] = std::move(p);
      }
      out.outputs.aggregate = std::move(mean_probs);
      break;
    }
  }
  return out;
}

EnsembleOutputs ensemble_predict(const EnsembleModel& model, const Mat& x,
                                 const LearnerMask& mask) {
  return ensemble_forward(model, x, mask).outputs;
}

Mat softmax_vjp(const Mat& probs, const Mat& v) {
  if (!probs.same_shape(v)) throw_dim_error("softmax_vjp", probs, v);
  Mat out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < probs.cols(); ++c) dot += probs(r, c) * v(r, c);
    for (std::size_t c = 0; c < probs.cols(); ++c) out(r, c) = probs(r, c) * (v(r, c) - dot);
  }
  return out;
}

std::vector<Mat> distribute_gradient(const EnsembleOutputs& outputs,
                                     const Mat& grad_wrt_aggregate) {
  if (!grad_wrt_aggregate.same_shape(outputs.aggregate))
    throw_dim_error("distribute_gradient", grad_wrt_aggregate, outputs.aggregate);

  const std::size_t m = outputs.scores.size();
  std::vector<Mat> grads(m);
  for (std::size_t j = 0; j < m; ++j)
    grads[j] = Mat(grad_wrt_aggregate.rows(), grad_wrt_aggregate.cols());

  switch (outputs.mode) {
    case AggregationMode::MeanOutput:
      for (std::size_t i = 0; i < outputs.active.size(); ++i)
        grads[outputs.active[i]] = scale(grad_wrt_aggregate, outputs.active_weights[i]);
      break;
    case AggregationMode::ScoreAvg: {
      // One Jacobian at the aggregate; every learner sees the same direction.
      const Mat shared = softmax_vjp(outputs.aggregate, grad_wrt_aggregate);
      for (std::size_t i = 0; i < outputs.active.size(); ++i)
        grads[outputs.active[i]] = scale(shared, outputs.active_weights[i]);
      break;
    }
    case AggregationMode::ProbAvg:
      for (std::size_t i = 0; i < outputs.active.size(); ++i) {
        const std::size_t j = outputs.active[i];
        grads[j] = scale(softmax_vjp(outputs.probs[j], grad_wrt_aggregate),
                         outputs.active_weights[i]);
      }
      break;
  }
  return grads;
}

EnsembleModel subensemble(const EnsembleModel& model, const std::vector<std::size_t>& keep) {
  if (keep.empty()) throw ConfigError("subensemble: keep set is empty");
  EnsembleModel out;
  out.config = model.config;
  out.mode = model.mode;
  out.task = model.task;
  double sum = 0.0;
  for (std::size_t j : keep) {
    if (j >= model.size()) throw ConfigError("subensemble: learner index out of range");
    sum += model.weights[j];
  }
  for (std::size_t j : keep) {
    out.learners.push_back(model.learners[j]);
    out.weights.push_back(model.weights[j] / sum);
  }
  return out;
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
  if (!is) throw IoError("ensemble checkpoint: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

constexpr std::uint64_t kMagic = 0x314b43'44534e45ULL;  // "ENSDCK1"

}  // namespace

void save_ensemble(std::ostream& os, const EnsembleModel& model) {
  write_u64(os, kMagic);
  write_u64(os, static_cast<std::uint64_t>(model.mode));
  write_u64(os, static_cast<std::uint64_t>(model.task));
  write_u64(os, model.config.layer_sizes.size());
  for (std::size_t s : model.config.layer_sizes) write_u64(os, s);
  write_u64(os, model.size());
  for (double w : model.weights) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(w));
    std::memcpy(&bits, &w, 8);
    write_u64(os, bits);
  }
  for (const MlpParams& p : model.learners) save_mlp(os, p);
}

EnsembleModel load_ensemble(std::istream& is) {
  if (read_u64(is) != kMagic) throw IoError("ensemble checkpoint: bad magic");
  EnsembleModel m;
  m.mode = static_cast<AggregationMode>(read_u64(is));
  m.task = static_cast<TaskKind>(read_u64(is));
  const std::uint64_t n_sizes = read_u64(is);
  if (n_sizes < 2 || n_sizes > 1024) throw IoError("ensemble checkpoint: bad layer count");
  for (std::uint64_t i = 0; i < n_sizes; ++i)
    m.config.layer_sizes.push_back(static_cast<std::size_t>(read_u64(is)));
  const std::uint64_t learners = read_u64(is);
  if (learners < 2 || learners > 100000) throw IoError("ensemble checkpoint: bad learner count");
  for (std::uint64_t j = 0; j < learners; ++j) {
    const std::uint64_t bits = read_u64(is);
    double w;
    std::memcpy(&w, &bits, 8);
    m.weights.push_back(w);
  }
  for (std::uint64_t j = 0; j < learners; ++j) m.learners.push_back(load_mlp(is));
  m.validate();
  return m;
}

void save_ensemble_file(const std::string& path, const EnsembleModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  save_ensemble(os, model);
  if (!os) throw IoError("write failed: " + path);
}

EnsembleModel load_ensemble_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  return load_ensemble(is);
}

}  // namespace ensdiv
