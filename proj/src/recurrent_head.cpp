#include "see/recurrent_head.hpp"

#include <cmath>
#include <string>

#include "see/errors.hpp"

namespace see {

namespace {

void check_size(const std::vector<float>& v, std::size_t n, const char* name) {
  if (v.size() != n)
    throw ArgumentError(std::string(name) + " has " + std::to_string(v.size()) + " elements, expected " +
                        std::to_string(n));
}

bool all_finite(std::span<const float> v) {
  for (const float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// out[i] = sum_j m[i, j] * x[j]. Parameters and state are fp32; sums are carried in double
// so the only rounding that matters is the final store.
void matvec(const std::vector<float>& m, std::span<const float> x, std::vector<double>& out) {
  const std::size_t cols = x.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    const float* row = m.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += static_cast<double>(row[j]) * x[j];
    out[i] = acc;
  }
}

}  // namespace

GruWeights GruWeights::zeros(int input_size, int hidden_size) {
  const auto d = static_cast<std::size_t>(input_size);
  const auto hd = static_cast<std::size_t>(hidden_size);
  GruWeights w;
  w.input_size = input_size;
  w.hidden_size = hidden_size;
  w.w_z.assign(hd * d, 0.0f);
  w.w_r.assign(hd * d, 0.0f);
  w.w_h.assign(hd * d, 0.0f);
  w.u_z.assign(hd * hd, 0.0f);
  w.u_r.assign(hd * hd, 0.0f);
  w.u_h.assign(hd * hd, 0.0f);
  w.b_z.assign(hd, 0.0f);
  w.b_r.assign(hd, 0.0f);
  w.b_h.assign(hd, 0.0f);
  return w;
}

void GruWeights::validate() const {
  if (input_size <= 0 || hidden_size <= 0) throw ArgumentError("GRU sizes must be positive");
  const auto d = static_cast<std::size_t>(input_size);
  const auto hd = static_cast<std::size_t>(hidden_size);
  check_size(w_z, hd * d, "gru.w_z");
  check_size(w_r, hd * d, "gru.w_r");
  check_size(w_h, hd * d, "gru.w_h");
  check_size(u_z, hd * hd, "gru.u_z");
  check_size(u_r, hd * hd, "gru.u_r");
  check_size(u_h, hd * hd, "gru.u_h");
  check_size(b_z, hd, "gru.b_z");
  check_size(b_r, hd, "gru.b_r");
  check_size(b_h, hd, "gru.b_h");
}

FcWeights FcWeights::zeros(int hidden_size) {
  return {hidden_size, std::vector<float>(2 * static_cast<std::size_t>(hidden_size), 0.0f), {0.0f, 0.0f}};
}

void FcWeights::validate() const {
  if (hidden_size <= 0) throw ArgumentError("FC hidden size must be positive");
  check_size(w, 2 * static_cast<std::size_t>(hidden_size), "fc.w");
  check_size(b, 2, "fc.b");
}

std::size_t HeadWeights::mac_count() const {
  const auto d = static_cast<std::size_t>(gru.input_size);
  const auto hd = static_cast<std::size_t>(gru.hidden_size);
  return 3 * (hd * d + hd * hd) + 2 * hd;
}

HeadState gru_step(std::span<const float> x, const HeadState& state, const GruWeights& w) {
  w.validate();
  if (x.size() != static_cast<std::size_t>(w.input_size))
    throw ArgumentError("GRU input has " + std::to_string(x.size()) + " elements, expected " +
                        std::to_string(w.input_size));
  if (state.h.size() != static_cast<std::size_t>(w.hidden_size))
    throw ArgumentError("GRU state has " + std::to_string(state.h.size()) + " elements, expected " +
                        std::to_string(w.hidden_size));
  if (!all_finite(x) || !all_finite(state.h)) throw NumericError("non-finite value entering GRU step");

  const auto hd = static_cast<std::size_t>(w.hidden_size);
  std::vector<double> wx(hd), uh(hd);
  std::vector<double> z(hd), r(hd);

  matvec(w.w_z, x, wx);
  matvec(w.u_z, state.h, uh);
  for (std::size_t i = 0; i < hd; ++i) z[i] = sigmoid(wx[i] + uh[i] + w.b_z[i]);

  matvec(w.w_r, x, wx);
  matvec(w.u_r, state.h, uh);
  for (std::size_t i = 0; i < hd; ++i) r[i] = sigmoid(wx[i] + uh[i] + w.b_r[i]);

  matvec(w.w_h, x, wx);
  matvec(w.u_h, state.h, uh);
  HeadState next{std::vector<float>(hd)};
  for (std::size_t i = 0; i < hd; ++i) {
    const double cand = std::tanh(wx[i] + r[i] * uh[i] + w.b_h[i]);
    next.h[i] = static_cast<float>((1.0 - z[i]) * state.h[i] + z[i] * cand);
  }
  if (!all_finite(next.h)) throw NumericError("GRU step produced a non-finite state");
  return next;
}

NormalizedPoint fc_regress(std::span<const float> h, const FcWeights& fc) {
  fc.validate();
  if (h.size() != static_cast<std::size_t>(fc.hidden_size))
    throw ArgumentError("FC input has " + std::to_string(h.size()) + " elements, expected " +
                        std::to_string(fc.hidden_size));
  std::vector<double> out(2);
  matvec(fc.w, h, out);
  return {static_cast<float>(sigmoid(out[0] + fc.b[0])), static_cast<float>(sigmoid(out[1] + fc.b[1]))};
}

PixelPoint denormalize(NormalizedPoint p, int height, int width) {
  if (!(p.u >= 0.0f && p.u <= 1.0f && p.v >= 0.0f && p.v <= 1.0f))
    throw ArgumentError("normalised coordinates must lie in [0, 1]");
  return {static_cast<double>(p.u) * width, static_cast<double>(p.v) * height};
}

}  // namespace see
