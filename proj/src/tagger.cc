#include "atsen/tagger.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "atsen/corpus.h"
#include "atsen/distillation.h"
#include "atsen/error.h"
#include "atsen/rng.h"

namespace atsen {

void TaggerConfig::validate() const {
  if (token_vocab_size < 1) throw ConfigError("token_vocab_size", "must be at least 1");
  if (embed_dim < 1) throw ConfigError("embed_dim", "must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be at least 1");
  if (tag_count < 1) throw ConfigError("tag_count", "must be at least 1");
  if (context_radius < 0) throw ConfigError("context_radius", "must be non-negative");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    throw ConfigError("init_scale", "must be a finite non-negative number");
  }
}

Tagger::Tagger(TaggerConfig config) : config_(config) { config_.validate(); }

ParamSet Tagger::layout() const {
  const auto v = static_cast<std::size_t>(config_.token_vocab_size);
  const auto e = static_cast<std::size_t>(config_.embed_dim);
  const auto h = static_cast<std::size_t>(config_.hidden_dim);
  const auto k = static_cast<std::size_t>(config_.tag_count);
  const auto d = static_cast<std::size_t>(config_.input_dim());
  return ParamSet({{"embedding.weight", "embedding", v * e},
                   {"hidden.weight", "hidden", h * d},
                   {"hidden.bias", "hidden", h},
                   {"output.weight", "output", k * h},
                   {"output.bias", "output", k}});
}

ParamSet Tagger::init() const {
  ParamSet params = layout();
  Rng rng(config_.init_seed);
  const double s = config_.init_scale;
  for (double &v : params.values()) {
    const double u = rng.uniform();
    v = s == 0.0 ? 0.0 : s * (2.0 * u - 1.0);
  }
  return params;
}

void Tagger::check(const ParamSet &params) const {
  if (!params.same_layout(layout())) throw ShapeError("parameters do not match tagger layout");
}

ForwardTrace Tagger::forward(const ParamSet &params, std::span<const int> ids) const {
  check(params);
  const int n = static_cast<int>(ids.size());
  const int e = config_.embed_dim, h = config_.hidden_dim, k = config_.tag_count;
  const int r = config_.context_radius, d = config_.input_dim();
  for (int id : ids) {
    if (id < 0 || id >= config_.token_vocab_size) {
      throw InputError("token index " + std::to_string(id) + " outside vocabulary");
    }
  }
  auto emb = params.fragment("embedding.weight");
  auto w1 = params.fragment("hidden.weight");
  auto b1 = params.fragment("hidden.bias");
  auto w2 = params.fragment("output.weight");
  auto b2 = params.fragment("output.bias");

  ForwardTrace t;
  t.ids.assign(ids.begin(), ids.end());
  t.inputs = Matrix(n, d);
  t.z = Matrix(n, h);
  t.logits = Matrix(n, k);
  for (int j = 0; j < n; ++j) {
    auto x = t.inputs.row(j);
    for (int off = -r; off <= r; ++off) {
      const int pos = j + off;
      const int id = (pos >= 0 && pos < n) ? ids[pos] : TokenVocab::kPad;
      std::memcpy(&x[(off + r) * e], &emb[static_cast<std::size_t>(id) * e], e * sizeof(double));
    }
    auto z = t.z.row(j);
    for (int u = 0; u < h; ++u) {
      const double *w = &w1[static_cast<std::size_t>(u) * d];
      double acc = b1[u];
      for (int i = 0; i < d; ++i) acc += w[i] * x[i];
      z[u] = std::tanh(acc);
    }
    auto a = t.logits.row(j);
    for (int c = 0; c < k; ++c) {
      const double *w = &w2[static_cast<std::size_t>(c) * h];
      double acc = b2[c];
      for (int u = 0; u < h; ++u) acc += w[u] * z[u];
      a[c] = acc;
    }
  }
  return t;
}

double Tagger::accumulate_grad(const ParamSet &params, std::span<const int> ids,
                               const LossSpec &spec, ParamSet &grad) const {
  check(params);
  check(grad);
  const ForwardTrace t = forward(params, ids);
  const int n = static_cast<int>(ids.size());
  if (n == 0) return 0.0;
  const int e = config_.embed_dim, h = config_.hidden_dim, k = config_.tag_count;
  const int r = config_.context_radius, d = config_.input_dim();

  Matrix da(n, k);
  double loss = 0.0;
  if (spec.ce) {
    const CeTerm &ce = *spec.ce;
    if (static_cast<int>(ce.targets.size()) != n) throw InputError("CE targets length mismatch");
    if (!ce.mask.empty() && static_cast<int>(ce.mask.size()) != n) {
      throw InputError("CE mask length mismatch");
    }
    std::vector<double> logp(k);
    const double coef = ce.weight / n;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!ce.mask.empty() && !ce.mask[j]) continue;
      const int y = ce.targets[j];
      if (y < 0 || y >= k) throw InputError("CE target outside tag range");
      log_softmax(t.logits.row(j), 1.0, logp);
      sum -= logp[y];
      for (int c = 0; c < k; ++c) da(j, c) += coef * std::exp(logp[c]);
      da(j, y) -= coef;
    }
    loss += coef * sum;
  }
  for (const KdTerm &term : spec.kd) {
    if (term.teacher_logits.rows() != static_cast<std::size_t>(n) ||
        term.teacher_logits.cols() != static_cast<std::size_t>(k)) {
      throw InputError("teacher logits shape does not match the sentence");
    }
    loss += term.weight * kd_loss(t.logits, term.teacher_logits, term.temperature);
    Matrix g = kd_logit_grad(t.logits, term.teacher_logits, term.temperature);
    for (std::size_t i = 0; i < g.data().size(); ++i) da.data()[i] += term.weight * g.data()[i];
  }
  for (double &v : da.data()) v *= spec.scale;
  loss *= spec.scale;

  auto w1 = params.fragment("hidden.weight");
  auto w2 = params.fragment("output.weight");
  auto g_emb = grad.fragment("embedding.weight");
  auto g_w1 = grad.fragment("hidden.weight");
  auto g_b1 = grad.fragment("hidden.bias");
  auto g_w2 = grad.fragment("output.weight");
  auto g_b2 = grad.fragment("output.bias");

  std::vector<double> dz(h), dx(d);
  for (int j = 0; j < n; ++j) {
    auto a = da.row(j);
    auto z = t.z.row(j);
    auto x = t.inputs.row(j);
    std::fill(dz.begin(), dz.end(), 0.0);
    for (int c = 0; c < k; ++c) {
      if (a[c] == 0.0) continue;
      double *gw = &g_w2[static_cast<std::size_t>(c) * h];
      const double *w = &w2[static_cast<std::size_t>(c) * h];
      for (int u = 0; u < h; ++u) {
        gw[u] += a[c] * z[u];
        dz[u] += w[u] * a[c];
      }
      g_b2[c] += a[c];
    }
    std::fill(dx.begin(), dx.end(), 0.0);
    for (int u = 0; u < h; ++u) {
      const double dh = dz[u] * (1.0 - z[u] * z[u]);
      if (dh == 0.0) continue;
      double *gw = &g_w1[static_cast<std::size_t>(u) * d];
      const double *w = &w1[static_cast<std::size_t>(u) * d];
      for (int i = 0; i < d; ++i) {
        gw[i] += dh * x[i];
        dx[i] += w[i] * dh;
      }
      g_b1[u] += dh;
    }
    for (int off = -r; off <= r; ++off) {
      const int pos = j + off;
      const int id = (pos >= 0 && pos < n) ? ids[pos] : TokenVocab::kPad;
      double *ge = &g_emb[static_cast<std::size_t>(id) * e];
      for (int c = 0; c < e; ++c) ge[c] += dx[(off + r) * e + c];
    }
  }
  return loss;
}

LossAndGrad Tagger::loss_and_grad(const ParamSet &params, std::span<const int> ids,
                                  const LossSpec &spec) const {
  LossAndGrad out;
  out.grad = params.zeros_like();
  out.loss = accumulate_grad(params, ids, spec, out.grad);
  return out;
}

Matrix Tagger::feature_grad_of_kd(const ParamSet &params, const ForwardTrace &trace,
                                  const Matrix &teacher_logits, double temperature) const {
  check(params);
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  const Matrix da = kd_logit_grad(trace.logits, teacher_logits, temperature);
  const std::size_t n = trace.z.rows();
  const int h = config_.hidden_dim, k = config_.tag_count;
  auto w2 = params.fragment("output.weight");
  Matrix dz(n, h);
  for (std::size_t j = 0; j < n; ++j) {
    for (int c = 0; c < k; ++c) {
      const double a = da(j, c);
      const double *w = &w2[static_cast<std::size_t>(c) * h];
      for (int u = 0; u < h; ++u) dz(j, u) += a * w[u];
    }
  }
  return dz;
}

Matrix Tagger::feature_grad_of_kd(const ParamSet &params, std::span<const int> ids,
                                  const Matrix &teacher_logits, double temperature) const {
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  return feature_grad_of_kd(params, forward(params, ids), teacher_logits, temperature);
}

Prediction predict_from_logits(const Matrix &logits) {
  Prediction p;
  p.tags.reserve(logits.rows());
  p.confidences.reserve(logits.rows());
  std::vector<double> probs(logits.cols());
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    auto row = logits.row(j);
    softmax(row, 1.0, probs);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    p.tags.push_back(static_cast<int>(best));
    p.confidences.push_back(probs[best]);
  }
  return p;
}

Prediction Tagger::predict(const ParamSet &params, std::span<const int> ids) const {
  return predict_from_logits(forward(params, ids).logits);
}

namespace {

constexpr char kMagic[8] = {'A', 'T', 'S', 'N', 'P', 'S', '0', '1'};

void put_u64(std::ostream &out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(b), 8);
}

std::uint64_t get_u64(std::istream &in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char *>(b), 8)) throw IoError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream &out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream &in) { return std::bit_cast<double>(get_u64(in)); }

void put_string(std::ostream &out, const std::string &s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream &in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1u << 20)) throw IoError("corrupt checkpoint string");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream &out, const TaggerConfig &config, const ParamSet &params) {
  if (!params.same_layout(Tagger(config).layout())) {
    throw ShapeError("parameters do not match the checkpoint config");
  }
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, static_cast<std::uint64_t>(config.token_vocab_size));
  put_u64(out, static_cast<std::uint64_t>(config.embed_dim));
  put_u64(out, static_cast<std::uint64_t>(config.hidden_dim));
  put_u64(out, static_cast<std::uint64_t>(config.tag_count));
  put_u64(out, static_cast<std::uint64_t>(config.context_radius));
  put_u64(out, config.init_seed);
  put_f64(out, config.init_scale);
  put_u64(out, params.fragments().size());
  for (const auto &f : params.fragments()) {
    put_string(out, f.name);
    put_string(out, f.unit);
    put_u64(out, f.length);
    for (std::size_t i = 0; i < f.length; ++i) put_f64(out, params[f.offset + i]);
  }
  if (!out) throw IoError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream &in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("not a parameter checkpoint");
  }
  Checkpoint ck;
  ck.config.token_vocab_size = static_cast<int>(get_u64(in));
  ck.config.embed_dim = static_cast<int>(get_u64(in));
  ck.config.hidden_dim = static_cast<int>(get_u64(in));
  ck.config.tag_count = static_cast<int>(get_u64(in));
  ck.config.context_radius = static_cast<int>(get_u64(in));
  ck.config.init_seed = get_u64(in);
  ck.config.init_scale = get_f64(in);
  ck.params = Tagger(ck.config).layout();
  const std::uint64_t count = get_u64(in);
  if (count != ck.params.fragments().size()) throw ShapeError("checkpoint fragment count mismatch");
  for (const auto &f : ck.params.fragments()) {
    const std::string name = get_string(in);
    const std::string unit = get_string(in);
    const std::uint64_t length = get_u64(in);
    if (name != f.name || unit != f.unit || length != f.length) {
      throw ShapeError("checkpoint fragment " + name + " does not match the stored config");
    }
    for (std::size_t i = 0; i < f.length; ++i) ck.params[f.offset + i] = get_f64(in);
  }
  return ck;
}

}  // namespace atsen
