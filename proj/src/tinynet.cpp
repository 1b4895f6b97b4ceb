#include "jade/tinynet.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace jade {

void MlpSpec::validate() const {
  if (input_dim < 1) throw Error(Err::ShapeMismatch, "input_dim must be >= 1");
  if (output_dim < 1) throw Error(Err::ShapeMismatch, "output_dim must be >= 1");
  for (int h : hidden)
    if (h < 1) throw Error(Err::ShapeMismatch, "hidden width must be >= 1");
  if (head == Head::Softmax && output_dim < 2)
    throw Error(Err::ShapeMismatch, "softmax head requires output_dim >= 2");
}

std::size_t MlpModel::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.w.size() + layer.b.size();
  return n;
}

void Gradients::add(const Gradients& other) {
  if (layers.size() != other.layers.size()) throw Error(Err::ShapeMismatch, "gradient add");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.w.size() != b.w.size() || a.b.size() != b.b.size())
      throw Error(Err::ShapeMismatch, "gradient add layer " + std::to_string(l));
    for (std::size_t i = 0; i < a.w.size(); ++i) a.w[i] += b.w[i];
    for (std::size_t i = 0; i < a.b.size(); ++i) a.b[i] += b.b[i];
  }
}

void Gradients::scale(double s) {
  for (auto& layer : layers) {
    for (auto& x : layer.w) x *= s;
    for (auto& x : layer.b) x *= s;
  }
}

namespace {

std::vector<std::pair<int, int>> layer_dims(const MlpSpec& spec) {
  std::vector<std::pair<int, int>> dims;  // (out, in)
  int in = spec.input_dim;
  for (int h : spec.hidden) {
    dims.emplace_back(h, in);
    in = h;
  }
  dims.emplace_back(spec.output_dim, in);
  return dims;
}

ParamBlock zero_block(int out, int in) {
  ParamBlock blk;
  blk.in = in;
  blk.out = out;
  blk.w.assign(static_cast<std::size_t>(out) * in, 0.0);
  blk.b.assign(out, 0.0);
  return blk;
}

}  // namespace

MlpModel mlp_init(const MlpSpec& spec, uint64_t seed) {
  spec.validate();
  MlpModel m;
  m.spec = spec;
  Rng rng(seed);
  for (const auto& [out, in] : layer_dims(spec)) {
    ParamBlock blk = zero_block(out, in);
    const double a = std::sqrt(6.0 / (in + out));
    for (auto& w : blk.w) w = rng.uniform(-a, a);
    m.layers.push_back(std::move(blk));
    m.adam_m.push_back(zero_block(out, in));
    m.adam_v.push_back(zero_block(out, in));
  }
  return m;
}

Gradients zero_gradients(const MlpModel& m) {
  Gradients g;
  for (const auto& layer : m.layers) g.layers.push_back(zero_block(layer.out, layer.in));
  return g;
}

std::vector<double> forward(const MlpModel& m, const std::vector<double>& x,
                            ForwardCache* cache) {
  if (static_cast<int>(x.size()) != m.spec.input_dim)
    throw Error(Err::ShapeMismatch, "input size " + std::to_string(x.size()) + " != " +
                                        std::to_string(m.spec.input_dim));
  for (double v : x)
    if (!std::isfinite(v)) throw Error(Err::NonFiniteInput, "forward input");

  if (cache) {
    cache->inputs.clear();
    cache->inputs.reserve(m.layers.size());
  }
  std::vector<double> act = x;
  const std::size_t n_layers = m.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = m.layers[l];
    if (cache) cache->inputs.push_back(act);
    std::vector<double> next(layer.out);
    for (int i = 0; i < layer.out; ++i) {
      double sum = layer.b[i];
      const double* row = layer.w.data() + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) sum += row[j] * act[j];
      next[i] = sum;
    }
    if (l + 1 < n_layers)
      for (auto& v : next) v = v > 0 ? v : 0.0;  // relu
    act = std::move(next);
  }
  if (m.spec.head == Head::Softmax) {
    double mx = act[0];
    for (double v : act) mx = std::max(mx, v);
    double sum = 0;
    for (auto& v : act) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : act) v /= sum;
  }
  if (cache) cache->output = act;
  return act;
}

Gradients backward(const MlpModel& m, const ForwardCache& cache,
                   const std::vector<double>& output_grad) {
  if (cache.inputs.size() != m.layers.size())
    throw Error(Err::ShapeMismatch, "cache does not match model depth");
  if (output_grad.size() != cache.output.size())
    throw Error(Err::ShapeMismatch, "output_grad size");

  // dL/d(logits): softmax Jacobian p_k (g_k - sum_j g_j p_j), identity for linear.
  std::vector<double> delta = output_grad;
  if (m.spec.head == Head::Softmax) {
    const auto& p = cache.output;
    double dot = 0;
    for (std::size_t k = 0; k < p.size(); ++k) dot += output_grad[k] * p[k];
    for (std::size_t k = 0; k < p.size(); ++k) delta[k] = p[k] * (output_grad[k] - dot);
  }

  Gradients grads = zero_gradients(m);
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& layer = m.layers[l];
    const auto& in = cache.inputs[l];
    auto& g = grads.layers[l];
    for (int i = 0; i < layer.out; ++i) {
      const double d = delta[i];
      g.b[i] = d;
      double* grow = g.w.data() + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) grow[j] = d * in[j];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (int i = 0; i < layer.out; ++i) {
      const double d = delta[i];
      const double* row = layer.w.data() + static_cast<std::size_t>(i) * layer.in;
      for (int j = 0; j < layer.in; ++j) prev[j] += d * row[j];
    }
    // relu mask: layer l's input is the previous layer's post-activation
    for (int j = 0; j < layer.in; ++j)
      if (!(in[j] > 0)) prev[j] = 0.0;
    delta = std::move(prev);
  }
  return grads;
}

void adam_step(MlpModel& m, const Gradients& grads, const AdamConfig& cfg) {
  if (grads.layers.size() != m.layers.size())
    throw Error(Err::ShapeMismatch, "adam_step gradient depth");
  if (!(cfg.learning_rate > 0)) throw Error(Err::RangeError, "learning_rate must be > 0");
  m.adam_t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(m.adam_t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(m.adam_t));
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const auto& g = grads.layers[l];
    if (g.w.size() != layer.w.size() || g.b.size() != layer.b.size())
      throw Error(Err::ShapeMismatch, "adam_step layer " + std::to_string(l));
    auto update = [&](std::vector<double>& p, std::vector<double>& mm, std::vector<double>& vv,
                      const std::vector<double>& gg) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        mm[i] = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * gg[i];
        vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gg[i] * gg[i];
        const double mhat = mm[i] / bc1;
        const double vhat = vv[i] / bc2;
        p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        if (!std::isfinite(p[i]))
          throw Error(Err::NonFiniteParameter, "layer " + std::to_string(l));
      }
    };
    update(layer.w, m.adam_m[l].w, m.adam_v[l].w, g.w);
    update(layer.b, m.adam_m[l].b, m.adam_v[l].b, g.b);
  }
}

void sgd_step(MlpModel& m, const Gradients& grads, double learning_rate) {
  if (grads.layers.size() != m.layers.size())
    throw Error(Err::ShapeMismatch, "sgd_step gradient depth");
  if (!(learning_rate > 0)) throw Error(Err::RangeError, "learning_rate must be > 0");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const auto& g = grads.layers[l];
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      layer.w[i] -= learning_rate * g.w[i];
      if (!std::isfinite(layer.w[i]))
        throw Error(Err::NonFiniteParameter, "layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= learning_rate * g.b[i];
  }
}

namespace {

nlohmann::json block_json(const ParamBlock& blk) {
  return {{"w", blk.w}, {"b", blk.b}, {"in", blk.in}, {"out", blk.out}};
}

ParamBlock block_from_json(const nlohmann::json& j) {
  ParamBlock blk;
  blk.w = j.at("w").get<std::vector<double>>();
  blk.b = j.at("b").get<std::vector<double>>();
  blk.in = j.at("in").get<int>();
  blk.out = j.at("out").get<int>();
  if (blk.w.size() != static_cast<std::size_t>(blk.in) * blk.out ||
      blk.b.size() != static_cast<std::size_t>(blk.out))
    throw Error(Err::ShapeMismatch, "checkpoint block dims");
  return blk;
}

}  // namespace

void save_model(const MlpModel& m, const std::string& path) {
  for (const auto& layer : m.layers)
    for (double w : layer.w)
      if (!std::isfinite(w)) throw Error(Err::NonFiniteParameter, "save_model");
  nlohmann::json j;
  j["format"] = "jade-mlp/v1";
  j["spec"] = {{"input_dim", m.spec.input_dim},
               {"hidden", m.spec.hidden},
               {"output_dim", m.spec.output_dim},
               {"head", m.spec.head == Head::Softmax ? "softmax" : "linear"}};
  j["adam_t"] = m.adam_t;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    layers.push_back({{"param", block_json(m.layers[l])},
                      {"adam_m", block_json(m.adam_m[l])},
                      {"adam_v", block_json(m.adam_v[l])}});
  j["layers"] = std::move(layers);
  write_text_file(path, j.dump(2) + "\n");
}

MlpModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, path + ": " + e.what());
  }
  MlpModel m;
  try {
    if (j.at("format").get<std::string>() != "jade-mlp/v1")
      throw Error(Err::SchemaError, path + ": unknown checkpoint format");
    const auto& js = j.at("spec");
    m.spec.input_dim = js.at("input_dim").get<int>();
    m.spec.hidden = js.at("hidden").get<std::vector<int>>();
    m.spec.output_dim = js.at("output_dim").get<int>();
    m.spec.head = js.at("head").get<std::string>() == "softmax" ? Head::Softmax : Head::Linear;
    m.adam_t = j.at("adam_t").get<long long>();
    for (const auto& jl : j.at("layers")) {
      m.layers.push_back(block_from_json(jl.at("param")));
      m.adam_m.push_back(block_from_json(jl.at("adam_m")));
      m.adam_v.push_back(block_from_json(jl.at("adam_v")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, path + ": " + e.what());
  }
  m.spec.validate();
  // cross-check stored dims against the spec
  const auto dims = layer_dims(m.spec);
  if (dims.size() != m.layers.size()) throw Error(Err::ShapeMismatch, path + ": layer count");
  for (std::size_t l = 0; l < dims.size(); ++l)
    if (m.layers[l].out != dims[l].first || m.layers[l].in != dims[l].second)
      throw Error(Err::ShapeMismatch, path + ": layer " + std::to_string(l) + " dims");
  return m;
}

MlpModel load_model(const std::string& path, const MlpSpec& expected) {
  MlpModel m = load_model(path);
  if (!(m.spec == expected)) throw Error(Err::ShapeMismatch, path + ": spec mismatch");
  return m;
}

}  // namespace jade
