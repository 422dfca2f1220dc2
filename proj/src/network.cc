#include "paracon/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "paracon/rng.hpp"

namespace paracon {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kEncoder:
      return "encoder";
    case ParamGroup::kProjection:
      return "projection";
    case ParamGroup::kClassifier:
      return "classifier";
  }
  return "?";
}

bool GroupMask::contains(ParamGroup g) const {
  switch (g) {
    case ParamGroup::kEncoder:
      return encoder;
    case ParamGroup::kProjection:
      return projection;
    case ParamGroup::kClassifier:
      return classifier;
  }
  return false;
}

namespace {

ParamTensor make_param(std::string name, ParamGroup group, std::size_t rows, std::size_t cols) {
  ParamTensor p;
  p.name = std::move(name);
  p.group = group;
  p.rows = rows;
  p.cols = cols;
  p.value.assign(rows * cols, 0.0);
  p.m.assign(rows * cols, 0.0);
  p.v.assign(rows * cols, 0.0);
  return p;
}

std::vector<ParamTensor> layout(const NetworkDims& d) {
  if (d.d_v + d.d_q == 0 || d.d_h == 0 || d.d_z == 0 || d.num_labels == 0) {
    throw std::invalid_argument("network: all dimensions must be positive");
  }
  using G = ParamGroup;
  std::vector<ParamTensor> p;
  p.push_back(make_param("encoder.w1", G::kEncoder, d.d_h, d.input_dim()));
  p.push_back(make_param("encoder.b1", G::kEncoder, d.d_h, 1));
  p.push_back(make_param("encoder.w2", G::kEncoder, d.d_h, d.d_h));
  p.push_back(make_param("encoder.b2", G::kEncoder, d.d_h, 1));
  p.push_back(make_param("projection.w1", G::kProjection, d.d_h, d.d_h));
  p.push_back(make_param("projection.b1", G::kProjection, d.d_h, 1));
  p.push_back(make_param("projection.w2", G::kProjection, d.d_z, d.d_h));
  p.push_back(make_param("projection.b2", G::kProjection, d.d_z, 1));
  p.push_back(make_param("classifier.w", G::kClassifier, d.num_labels, d.d_h));
  p.push_back(make_param("classifier.b", G::kClassifier, d.num_labels, 1));
  return p;
}

// out = in * W^T + b
Matrix affine(const Matrix& in, const ParamTensor& w, const ParamTensor& b) {
  // Row-times-transposed-weights as a sequence of contiguous axpy updates.
  std::vector<double> wt(w.rows * w.cols);
  for (std::size_t o = 0; o < w.rows; ++o) {
    for (std::size_t i = 0; i < w.cols; ++i) wt[i * w.rows + o] = w.value[o * w.cols + i];
  }
  Matrix out(in.rows(), w.rows);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    double* y = out.row(r).data();
    for (std::size_t o = 0; o < w.rows; ++o) y[o] = b.value[o];
    for (std::size_t i = 0; i < w.cols; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wc = wt.data() + i * w.rows;
      for (std::size_t o = 0; o < w.rows; ++o) y[o] += xi * wc[o];
    }
  }
  return out;
}

void tanh_inplace(Matrix& m) {
  for (double& x : m.flat()) x = std::tanh(x);
}

// Accumulates dW, db and (optionally) d input for out = in * W^T + b.
void affine_backward(const Matrix& in, const Matrix& dout, const ParamTensor& w,
                     std::vector<double>& dw, std::vector<double>& db, Matrix* din) {
  if (din) *din = Matrix(in.rows(), w.cols);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = dout(r, o);
      if (g == 0.0) continue;
      db[o] += g;
      double* dwr = dw.data() + o * w.cols;
      for (std::size_t i = 0; i < w.cols; ++i) dwr[i] += g * x[i];
      if (din) {
        const double* wr = w.value.data() + o * w.cols;
        auto dx = din->row(r);
        for (std::size_t i = 0; i < w.cols; ++i) dx[i] += g * wr[i];
      }
    }
  }
}

// d pre-activation given d activation and the tanh output.
void tanh_backward(Matrix& grad, const Matrix& activated) {
  auto g = grad.flat();
  auto a = activated.flat();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
}

}  // namespace

NetworkState NetworkState::initialize(const NetworkDims& dims, std::uint64_t seed) {
  NetworkState state;
  state.dims_ = dims;
  state.params_ = layout(dims);
  Rng rng(seed);
  for (auto& p : state.params_) {
    if (p.cols == 1) continue;  // biases start at zero
    const double limit = std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
    for (double& x : p.value) x = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return state;
}

NetworkState NetworkState::zeros(const NetworkDims& dims) {
  NetworkState state;
  state.dims_ = dims;
  state.params_ = layout(dims);
  return state;
}

std::size_t NetworkState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::uint64_t NetworkState::group_hash(ParamGroup group) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    if (p.group != group) continue;
    for (double x : p.value) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

ForwardCache forward(const NetworkState& state, const Matrix& inputs, GroupMask heads) {
  const auto& d = state.dims();
  if (inputs.cols() != d.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.cols()) +
                                " columns, network expects " + std::to_string(d.input_dim()));
  }
  using S = NetworkState;
  ForwardCache c;
  c.input = inputs;
  c.h1 = affine(inputs, state.param(S::kEncW1), state.param(S::kEncB1));
  tanh_inplace(c.h1);
  c.h = affine(c.h1, state.param(S::kEncW2), state.param(S::kEncB2));
  tanh_inplace(c.h);

  if (heads.projection) {
    c.g1 = affine(c.h, state.param(S::kProjW1), state.param(S::kProjB1));
    tanh_inplace(c.g1);
    c.proj = affine(c.g1, state.param(S::kProjW2), state.param(S::kProjB2));
    c.z = Matrix(inputs.rows(), d.d_z);
    c.proj_norm.resize(inputs.rows());
    c.proj_fallback.assign(inputs.rows(), 0);
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
      const double norm = std::sqrt(dot(c.proj.row(r), c.proj.row(r)));
      c.proj_norm[r] = norm;
      if (!(norm >= kSafeNormFloor)) {
        c.proj_fallback[r] = 1;
        c.z(r, 0) = 1.0;
        continue;
      }
      for (std::size_t j = 0; j < d.d_z; ++j) c.z(r, j) = c.proj(r, j) / norm;
    }
  }

  if (heads.classifier) c.logits = affine(c.h, state.param(S::kClsW), state.param(S::kClsB));
  return c;
}

Gradients Gradients::zeros_like(const NetworkState& state) {
  Gradients g;
  for (const auto& p : state.params()) g.values.emplace_back(p.value.size(), 0.0);
  return g;
}

std::vector<double> Gradients::flatten_all() const {
  std::vector<double> out;
  for (const auto& v : values) out.insert(out.end(), v.begin(), v.end());
  return out;
}

double Gradients::norm() const {
  double s = 0.0;
  for (const auto& v : values) {
    for (double x : v) s += x * x;
  }
  return std::sqrt(s);
}

namespace {

ParamGroup slot_group(std::size_t slot) {
  if (slot <= NetworkState::kEncB2) return ParamGroup::kEncoder;
  if (slot <= NetworkState::kProjB2) return ParamGroup::kProjection;
  return ParamGroup::kClassifier;
}

}  // namespace

std::vector<double> Gradients::flatten(ParamGroup group) const {
  std::vector<double> out;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (slot_group(s) == group) out.insert(out.end(), values[s].begin(), values[s].end());
  }
  return out;
}

Gradients backward(const NetworkState& state, const ForwardCache& cache, const Matrix* grad_z,
                   const Matrix* grad_logits) {
  using S = NetworkState;
  const auto& d = state.dims();
  const std::size_t batch = cache.input.rows();
  Gradients g = Gradients::zeros_like(state);
  Matrix dh(batch, d.d_h);

  if (grad_logits) {
    if (grad_logits->rows() != batch || grad_logits->cols() != d.num_labels) {
      throw std::invalid_argument("backward: logits gradient has the wrong shape");
    }
    Matrix dh_cls;
    affine_backward(cache.h, *grad_logits, state.param(S::kClsW), g.values[S::kClsW],
                    g.values[S::kClsB], &dh_cls);
    for (std::size_t i = 0; i < dh.flat().size(); ++i) dh.flat()[i] += dh_cls.flat()[i];
  }

  if (grad_z) {
    if (grad_z->rows() != batch || grad_z->cols() != d.d_z) {
      throw std::invalid_argument("backward: z gradient has the wrong shape");
    }
    Matrix dproj(batch, d.d_z);
    for (std::size_t r = 0; r < batch; ++r) {
      if (cache.proj_fallback[r]) continue;  // constant output, no gradient
      const auto z = cache.z.row(r);
      const auto gz = grad_z->row(r);
      const double radial = dot(z, gz);
      for (std::size_t j = 0; j < d.d_z; ++j) {
        dproj(r, j) = (gz[j] - z[j] * radial) / cache.proj_norm[r];
      }
    }
    Matrix dg1;
    affine_backward(cache.g1, dproj, state.param(S::kProjW2), g.values[S::kProjW2],
                    g.values[S::kProjB2], &dg1);
    tanh_backward(dg1, cache.g1);
    Matrix dh_proj;
    affine_backward(cache.h, dg1, state.param(S::kProjW1), g.values[S::kProjW1],
                    g.values[S::kProjB1], &dh_proj);
    for (std::size_t i = 0; i < dh.flat().size(); ++i) dh.flat()[i] += dh_proj.flat()[i];
  }

  if (grad_z || grad_logits) {
    tanh_backward(dh, cache.h);
    Matrix dh1;
    affine_backward(cache.h1, dh, state.param(S::kEncW2), g.values[S::kEncW2],
                    g.values[S::kEncB2], &dh1);
    tanh_backward(dh1, cache.h1);
    affine_backward(cache.input, dh1, state.param(S::kEncW1), g.values[S::kEncW1],
                    g.values[S::kEncB1], nullptr);
  }
  return g;
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("schedule: base_lr must be positive");
  if (!(warmup_factor > 0.0 && warmup_factor <= 1.0)) {
    throw std::invalid_argument("schedule: warmup_factor must be in (0, 1]");
  }
  if (warmup_iters < 0) throw std::invalid_argument("schedule: warmup_iters must be >= 0");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("schedule: decay_factor must be positive");
  for (std::size_t i = 1; i < decay_steps.size(); ++i) {
    if (decay_steps[i] <= decay_steps[i - 1]) {
      throw std::invalid_argument("schedule: decay_steps must be strictly increasing");
    }
  }
}

LrSchedule LrSchedule::scaled_to(std::int64_t total_iters) const {
  const double ratio =
      static_cast<double>(total_iters) / static_cast<double>(kReferenceIterations);
  LrSchedule out = *this;
  out.warmup_iters = std::llround(static_cast<double>(warmup_iters) * ratio);
  std::int64_t previous = -1;
  for (auto& step : out.decay_steps) {
    step = std::max<std::int64_t>(std::llround(static_cast<double>(step) * ratio), previous + 1);
    previous = step;
  }
  return out;
}

double lr_at(std::int64_t iteration, const LrSchedule& schedule) {
  if (iteration < schedule.warmup_iters) {
    const double frac =
        static_cast<double>(iteration) / static_cast<double>(schedule.warmup_iters);
    return schedule.base_lr * (schedule.warmup_factor + (1.0 - schedule.warmup_factor) * frac);
  }
  int passed = 0;
  for (std::int64_t step : schedule.decay_steps) {
    if (iteration >= step) ++passed;
  }
  // Dividing by the reciprocal power keeps round values such as 2e-4 * 0.2^2
  // exactly representable.
  return passed == 0 ? schedule.base_lr
                     : schedule.base_lr / std::pow(1.0 / schedule.decay_factor, passed);
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, std::int64_t step, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& v : grads.values) {
      for (double& x : v) x *= scale;
    }
  }
  return norm;
}

void apply_step(NetworkState& state, Gradients grads, const LrSchedule& schedule,
                const AdamConfig& cfg, GroupMask mask) {
  auto& params = state.params();
  if (grads.values.size() != params.size()) {
    throw std::invalid_argument("apply_step: gradient layout does not match the network");
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (grads.values[s].size() != params[s].value.size()) {
      throw std::invalid_argument("apply_step: gradient for " + params[s].name +
                                  " has the wrong size");
    }
    if (!mask.contains(params[s].group)) {
      std::fill(grads.values[s].begin(), grads.values[s].end(), 0.0);
      continue;
    }
    for (double x : grads.values[s]) {
      if (!std::isfinite(x)) {
        throw std::runtime_error("non-finite gradient in parameter " + params[s].name);
      }
    }
  }
  clip_grad_norm(grads, cfg.clip_norm);
  const double lr = lr_at(state.iteration(), schedule);
  const std::int64_t step = state.iteration() + 1;
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (!mask.contains(params[s].group)) continue;
    adam_update(params[s].value, grads.values[s], params[s].m, params[s].v, lr, step, cfg);
  }
  state.set_iteration(step);
}

void backward_and_step(NetworkState& state, const ForwardCache& cache, const Matrix* grad_z,
                       const Matrix* grad_logits, const LrSchedule& schedule,
                       const AdamConfig& cfg) {
  GroupMask mask;
  mask.encoder = grad_z || grad_logits;
  mask.projection = grad_z != nullptr;
  mask.classifier = grad_logits != nullptr;
  apply_step(state, backward(state, cache, grad_z, grad_logits), schedule, cfg, mask);
}

// ---------------------------------------------------------------------------
// Checkpoints: a versioned text dump with hex-float values so that every
// double round-trips exactly.

namespace {

constexpr const char* kCheckpointMagic = "paracon-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_values(std::ostream& out, const std::vector<double>& values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", values[i]);
    if (i) out << ' ';
    out << buf;
  }
  out << '\n';
}

std::vector<double> read_values(std::istream& in, std::size_t count, const std::string& what) {
  std::vector<double> values(count);
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw std::runtime_error("checkpoint: truncated " + what);
    char* end = nullptr;
    values[i] = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      throw std::runtime_error("checkpoint: bad number '" + token + "' in " + what);
    }
  }
  return values;
}

}  // namespace

void save_checkpoint(std::ostream& out, const NetworkState& state) {
  const auto& d = state.dims();
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "dims " << d.d_v << ' ' << d.d_q << ' ' << d.d_h << ' ' << d.d_z << ' '
      << d.num_labels << '\n';
  out << "iteration " << state.iteration() << '\n';
  for (const auto& p : state.params()) {
    out << "param " << p.name << ' ' << p.rows << ' ' << p.cols << '\n';
    write_values(out, p.value);
    write_values(out, p.m);
    write_values(out, p.v);
  }
}

NetworkState load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string key;
  NetworkDims d;
  if (!(in >> key >> d.d_v >> d.d_q >> d.d_h >> d.d_z >> d.num_labels) || key != "dims") {
    throw std::runtime_error("checkpoint: missing dims");
  }
  std::int64_t iteration = 0;
  if (!(in >> key >> iteration) || key != "iteration") {
    throw std::runtime_error("checkpoint: missing iteration");
  }
  NetworkState state = NetworkState::zeros(d);
  state.set_iteration(iteration);
  for (auto& p : state.params()) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> key >> name >> rows >> cols) || key != "param") {
      throw std::runtime_error("checkpoint: missing parameter " + p.name);
    }
    if (name != p.name || rows != p.rows || cols != p.cols) {
      throw std::runtime_error("checkpoint: expected parameter " + p.name + ", found " + name);
    }
    p.value = read_values(in, p.value.size(), p.name);
    p.m = read_values(in, p.m.size(), p.name + " (m)");
    p.v = read_values(in, p.v.size(), p.name + " (v)");
  }
  return state;
}

void save_checkpoint_file(const std::string& path, const NetworkState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, state);
}

NetworkState load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace paracon
