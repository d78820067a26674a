// Straight-line reimplementation of the window tagger, used as an oracle.
// Plain nested vectors, no shared code with the library's kernels.
#ifndef ATSEN_TESTS_REFERENCE_NET_H_
#define ATSEN_TESTS_REFERENCE_NET_H_

#include <cmath>
#include <vector>

#include "atsen/param_set.h"
#include "atsen/tagger.h"

namespace atsen::ref {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

struct Net {
  int V, E, H, K, R;
  Mat emb, w1, w2;
  Vec b1, b2;
};

inline Mat take(std::span<const double> f, int rows, int cols) {
  Mat m(rows, Vec(cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m[i][j] = f[i * cols + j];
  }
  return m;
}

inline Net unpack(const TaggerConfig &c, const ParamSet &p) {
  Net n{c.token_vocab_size, c.embed_dim, c.hidden_dim, c.tag_count, c.context_radius, {}, {}, {}, {}, {}};
  const int d = (2 * n.R + 1) * n.E;
  n.emb = take(p.fragment("embedding.weight"), n.V, n.E);
  n.w1 = take(p.fragment("hidden.weight"), n.H, d);
  auto b1 = p.fragment("hidden.bias");
  n.b1.assign(b1.begin(), b1.end());
  n.w2 = take(p.fragment("output.weight"), n.K, n.H);
  auto b2 = p.fragment("output.bias");
  n.b2.assign(b2.begin(), b2.end());
  return n;
}

// Flattened in layout order.
inline Vec pack(const Net &n) {
  Vec out;
  for (auto &r : n.emb) out.insert(out.end(), r.begin(), r.end());
  for (auto &r : n.w1) out.insert(out.end(), r.begin(), r.end());
  out.insert(out.end(), n.b1.begin(), n.b1.end());
  for (auto &r : n.w2) out.insert(out.end(), r.begin(), r.end());
  out.insert(out.end(), n.b2.begin(), n.b2.end());
  return out;
}

struct Trace {
  Mat x, z, a;
};

inline Trace forward(const Net &n, const std::vector<int> &ids) {
  Trace t;
  const int len = static_cast<int>(ids.size());
  for (int j = 0; j < len; ++j) {
    Vec x;
    for (int off = -n.R; off <= n.R; ++off) {
      int pos = j + off;
      int id = (pos < 0 || pos >= len) ? 0 : ids[pos];
      x.insert(x.end(), n.emb[id].begin(), n.emb[id].end());
    }
    Vec z(n.H);
    for (int u = 0; u < n.H; ++u) {
      double s = n.b1[u];
      for (std::size_t i = 0; i < x.size(); ++i) s += n.w1[u][i] * x[i];
      z[u] = std::tanh(s);
    }
    Vec a(n.K);
    for (int c = 0; c < n.K; ++c) {
      double s = n.b2[c];
      for (int u = 0; u < n.H; ++u) s += n.w2[c][u] * z[u];
      a[c] = s;
    }
    t.x.push_back(x);
    t.z.push_back(z);
    t.a.push_back(a);
  }
  return t;
}

inline Vec probs(const Vec &a, double temp) {
  double mx = a[0];
  for (double v : a) mx = std::max(mx, v);
  Vec p(a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i] = std::exp((a[i] - mx) / temp);
  for (double &v : p) v /= s;
  return p;
}

struct Kd {
  Mat teacher;
  double temp, weight;
};

struct Spec {
  bool ce = false;
  std::vector<int> targets;
  std::vector<bool> mask;  // empty = all
  double ce_weight = 1.0;
  std::vector<Kd> kd;
  double scale = 1.0;
};

// Loss and dLoss/dlogits.
inline double loss_and_dlogits(const Trace &t, const Spec &s, Mat &da) {
  const int n = static_cast<int>(t.a.size());
  const int k = n ? static_cast<int>(t.a[0].size()) : 0;
  da.assign(n, Vec(k, 0.0));
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    if (s.ce && (s.mask.empty() || s.mask[j])) {
      Vec p = probs(t.a[j], 1.0);
      loss += -std::log(p[s.targets[j]]) * s.ce_weight * s.scale / n;
      for (int c = 0; c < k; ++c) {
        da[j][c] += s.scale * s.ce_weight * (p[c] - (c == s.targets[j] ? 1.0 : 0.0)) / n;
      }
    }
    for (const Kd &kd : s.kd) {
      Vec ps = probs(t.a[j], kd.temp), pt = probs(kd.teacher[j], kd.temp);
      for (int c = 0; c < k; ++c) {
        loss += -pt[c] * std::log(ps[c]) * kd.weight * s.scale / n;
        da[j][c] += s.scale * kd.weight * (ps[c] - pt[c]) / (kd.temp * n);
      }
    }
  }
  return loss;
}

// Returns loss; gradient in layout order.
inline double loss_and_grad(const Net &n, const std::vector<int> &ids, const Spec &s, Vec &grad) {
  Trace t = forward(n, ids);
  Mat da;
  double loss = loss_and_dlogits(t, s, da);
  Net g = n;
  for (auto &r : g.emb) std::fill(r.begin(), r.end(), 0.0);
  for (auto &r : g.w1) std::fill(r.begin(), r.end(), 0.0);
  for (auto &r : g.w2) std::fill(r.begin(), r.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);
  const int len = static_cast<int>(ids.size());
  for (int j = 0; j < len; ++j) {
    Vec dz(n.H, 0.0);
    for (int c = 0; c < n.K; ++c) {
      g.b2[c] += da[j][c];
      for (int u = 0; u < n.H; ++u) {
        g.w2[c][u] += da[j][c] * t.z[j][u];
        dz[u] += da[j][c] * n.w2[c][u];
      }
    }
    Vec dx(t.x[j].size(), 0.0);
    for (int u = 0; u < n.H; ++u) {
      double dh = dz[u] * (1 - t.z[j][u] * t.z[j][u]);
      g.b1[u] += dh;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        g.w1[u][i] += dh * t.x[j][i];
        dx[i] += dh * n.w1[u][i];
      }
    }
    for (int off = -n.R; off <= n.R; ++off) {
      int pos = j + off;
      int id = (pos < 0 || pos >= len) ? 0 : ids[pos];
      for (int e = 0; e < n.E; ++e) g.emb[id][e] += dx[(off + n.R) * n.E + e];
    }
  }
  grad = pack(g);
  return loss;
}

// d KD / d z for one teacher: (ps - pt) / (T N) times the output weights.
inline Mat kd_feature_grad(const Net &n, const std::vector<int> &ids, const Mat &teacher, double temp) {
  Trace t = forward(n, ids);
  const int len = static_cast<int>(ids.size());
  Mat dz(len, Vec(n.H, 0.0));
  for (int j = 0; j < len; ++j) {
    Vec ps = probs(t.a[j], temp), pt = probs(teacher[j], temp);
    for (int c = 0; c < n.K; ++c) {
      for (int u = 0; u < n.H; ++u) dz[j][u] += (ps[c] - pt[c]) / (temp * len) * n.w2[c][u];
    }
  }
  return dz;
}

}  // namespace atsen::ref

#endif  // ATSEN_TESTS_REFERENCE_NET_H_
