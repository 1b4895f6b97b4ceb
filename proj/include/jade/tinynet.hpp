#ifndef JADE_TINYNET_HPP
#define JADE_TINYNET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "jade/common.hpp"

namespace jade {

enum class Head { Linear, Softmax };

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;  // relu layers
  int output_dim = 1;
  Head head = Head::Linear;

  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct ParamBlock {
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
  int in = 0;
  int out = 0;
};

// Per-layer parameter gradients, shape-matched to the model.
struct Gradients {
  std::vector<ParamBlock> layers;

  void add(const Gradients& other);
  void scale(double s);
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Inputs to every layer plus the head output; consumed by backward().
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // inputs[l] feeds layer l
  std::vector<double> output;               // post-head
};

struct MlpModel {
  MlpSpec spec;
  std::vector<ParamBlock> layers;
  std::vector<ParamBlock> adam_m;
  std::vector<ParamBlock> adam_v;
  long long adam_t = 0;

  std::size_t param_count() const;
};

MlpModel mlp_init(const MlpSpec& spec, uint64_t seed);

Gradients zero_gradients(const MlpModel& m);

std::vector<double> forward(const MlpModel& m, const std::vector<double>& x,
                            ForwardCache* cache = nullptr);

// output_grad is dL/d(head output); for a softmax head it is mapped through
// the softmax Jacobian onto the logits.
Gradients backward(const MlpModel& m, const ForwardCache& cache,
                   const std::vector<double>& output_grad);

void adam_step(MlpModel& m, const Gradients& grads, const AdamConfig& cfg);

// Plain gradient descent; leaves the Adam moments untouched.
void sgd_step(MlpModel& m, const Gradients& grads, double learning_rate);

void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);
MlpModel load_model(const std::string& path, const MlpSpec& expected);

}  // namespace jade

#endif
