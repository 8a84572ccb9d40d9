#pragma once

#include <span>
#include <vector>

namespace see {

/// GRU parameters. Input matrices are hidden x input, recurrent ones hidden x hidden, row-major.
struct GruWeights {
  int input_size = 0;
  int hidden_size = 0;
  std::vector<float> w_z, w_r, w_h;
  std::vector<float> u_z, u_r, u_h;
  std::vector<float> b_z, b_r, b_h;

  static GruWeights zeros(int input_size, int hidden_size);
  void validate() const;
};

/// Regressor from the hidden state to two normalised coordinates.
struct FcWeights {
  int hidden_size = 0;
  std::vector<float> w;  // 2 x hidden, row-major
  std::vector<float> b;  // 2

  static FcWeights zeros(int hidden_size);
  void validate() const;
};

struct HeadWeights {
  GruWeights gru;
  FcWeights fc;

  std::size_t mac_count() const;
};

struct HeadState {
  std::vector<float> h;

  static HeadState zeros(int hidden_size) { return {std::vector<float>(static_cast<std::size_t>(hidden_size), 0.0f)}; }
};

struct NormalizedPoint {
  float u = 0.5f;
  float v = 0.5f;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

/// One GRU update:
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + r * (U_h h) + b_h)
///   h' = (1 - z) * h + z * h~
/// Throws ArgumentError on shape mismatch and NumericError on non-finite input or state.
HeadState gru_step(std::span<const float> x, const HeadState& state, const GruWeights& w);

/// sigmoid(W h + b), so both coordinates stay inside [0, 1].
NormalizedPoint fc_regress(std::span<const float> h, const FcWeights& fc);

/// px = u * width, py = v * height. Throws ArgumentError when u or v leaves [0, 1].
PixelPoint denormalize(NormalizedPoint p, int height, int width);

}  // namespace see
