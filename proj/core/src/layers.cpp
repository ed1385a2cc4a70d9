#include "stcnn/layers.hpp"

#include <cmath>

namespace stcnn::layers {

namespace {

Tensor he_normal(Shape s, int fan_in, Rng& rng) {
  Tensor t(s);
  const double std = std::sqrt(2.0 / fan_in);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
  return t;
}

}  // namespace

void init_conv(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
               int k, bool bias, Rng& rng) {
  ps.add(name + ".w", g, he_normal({cout, cin, k, k}, cin * k * k, rng));
  if (bias) ps.add(name + ".b", g, Tensor({1, cout, 1, 1}, 0.0));
}

void init_deconv(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
                 int k, Rng& rng) {
  ps.add(name + ".w", g, he_normal({cin, cout, k, k}, cin * k * k, rng));
}

void init_norm(ParameterStore& ps, Group g, const std::string& name, int channels) {
  ps.add(name + ".gamma", g, Tensor({1, channels, 1, 1}, 1.0));
  ps.add(name + ".beta", g, Tensor({1, channels, 1, 1}, 0.0));
  ps.add(name + ".running_mean", g, Tensor({1, channels, 1, 1}, 0.0), false);
  ps.add(name + ".running_var", g, Tensor({1, channels, 1, 1}, 1.0), false);
}

ag::Var conv(ForwardContext& ctx, const std::string& name, const ag::Var& x,
             ag::ConvOptions opt) {
  const std::string bias_name = name + ".b";
  ag::Var bias;
  if (ctx.params.contains(bias_name)) bias = ctx.params.var(bias_name);
  return ag::conv2d(x, ctx.params.var(name + ".w"), bias, opt);
}

ag::Var deconv(ForwardContext& ctx, const std::string& name, const ag::Var& x, int stride,
               int pad, int output_pad) {
  return ag::conv_transpose2d(x, ctx.params.var(name + ".w"), ag::Var(), stride, pad,
                              output_pad);
}

ag::Var norm(ForwardContext& ctx, const std::string& name, const ag::Var& x) {
  const auto& gamma_entry = ctx.params.entry(name + ".gamma");
  ag::BatchNormState st;
  st.running_mean = &ctx.params.buffer(name + ".running_mean");
  st.running_var = &ctx.params.buffer(name + ".running_var");
  // A frozen group never touches its statistics.
  const bool batch = ctx.norm == NormMode::BatchStatistics &&
                     !ctx.params.frozen(gamma_entry.group);
  st.use_batch_stats = batch;
  st.update_running = batch && ctx.track_running;
  return ag::batch_norm(x, gamma_entry.var, ctx.params.var(name + ".beta"), st);
}

void init_conv_bn(ParameterStore& ps, Group g, const std::string& name, int cin, int cout,
                  int k, Rng& rng) {
  init_conv(ps, g, name + ".conv", cin, cout, k, false, rng);
  init_norm(ps, g, name + ".bn", cout);
}

ag::Var conv_bn_relu(ForwardContext& ctx, const std::string& name, const ag::Var& x,
                     ag::ConvOptions opt) {
  return ag::relu(norm(ctx, name + ".bn", conv(ctx, name + ".conv", x, opt)));
}

void init_res_unit(ParameterStore& ps, Group g, const std::string& name, int channels,
                   Rng& rng) {
  init_conv_bn(ps, g, name, channels, channels, 3, rng);
}

ag::Var res_unit(ForwardContext& ctx, const std::string& name, const ag::Var& x,
                 int dilation) {
  ag::Var y = norm(ctx, name + ".bn",
                   conv(ctx, name + ".conv", x, {1, dilation, dilation}));
  return ag::relu(ag::add(x, y));
}

}  // namespace stcnn::layers
