#pragma once

#include <string>

#include "stcnn/autograd.hpp"
#include "stcnn/params.hpp"
#include "stcnn/rng.hpp"

namespace stcnn {

/// How normalisation layers treat statistics on a forward pass.
enum class NormMode {
  BatchStatistics,    // normalise with batch moments, track running moments
  RunningStatistics,  // normalise with stored moments, never modify them
};

/// Everything a network forward pass needs besides its inputs.
struct ForwardContext {
  ParameterStore& params;
  NormMode norm = NormMode::RunningStatistics;
  /// With BatchStatistics, whether running moments absorb the batch moments.
  bool track_running = true;
};

namespace layers {

/// He-normal weight (cout, cin, k, k), optional zero bias `<name>.b`.
void init_conv(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
               int k, bool bias, Rng& rng);
/// Transposed conv weight (cin, cout, k, k).
void init_deconv(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
                 int k, Rng& rng);
/// gamma=1, beta=0 plus running mean/var buffers.
void init_norm(ParameterStore& ps, Group g, const std::string& name, int channels);

ag::Var conv(ForwardContext& ctx, const std::string& name, const ag::Var& x,
             ag::ConvOptions opt);
ag::Var deconv(ForwardContext& ctx, const std::string& name, const ag::Var& x, int stride,
               int pad, int output_pad);
ag::Var norm(ForwardContext& ctx, const std::string& name, const ag::Var& x);

/// conv -> norm -> ReLU, with parameters `<name>.conv.*` and `<name>.bn.*`.
void init_conv_bn(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
                  int k, Rng& rng);
ag::Var conv_bn_relu(ForwardContext& ctx, const std::string& name, const ag::Var& x,
                     ag::ConvOptions opt);

/// Residual unit relu(x + norm(conv3x3(x))) at constant width.
void init_res_unit(ParameterStore& ps, Group g, const std::string& name, int channels,
                   Rng& rng);
ag::Var res_unit(ForwardContext& ctx, const std::string& name, const ag::Var& x,
                 int dilation);

}  // namespace layers
}  // namespace stcnn
