#ifndef JADE_BANDIT_HPP
#define JADE_BANDIT_HPP

#include <string>
#include <vector>

#include "jade/common.hpp"

namespace jade {

struct BanditConfig {
  double gamma = 0.999;  // discount on past rewards
  double b = 0.2;        // exploration constant
};

struct ArmState {
  std::string id;
  double discounted_reward_sum = 0;
  double discounted_pull_count = 0;
  long long raw_pull_count = 0;
};

// Discounted UCB over the training-trace pool. Streaming form: every record
// decays all arms by gamma, then credits the pulled arm.
class DiscountedUcb {
 public:
  DiscountedUcb(std::vector<std::string> arm_ids, BanditConfig cfg);

  void record(const std::string& arm, double reward);

  // mean + sqrt(b * log t / raw pulls); +inf for never-pulled arms. t counts
  // epochs from 1, natural log.
  double value(const std::string& arm, double epoch_t) const;

  // argmax of value; ties broken by lowest raw pull count, then id.
  const std::string& select(double epoch_t) const;

  const std::vector<ArmState>& arms() const { return arms_; }

  std::string to_json() const;
  static DiscountedUcb from_json(const std::string& text);

 private:
  const ArmState& find(const std::string& arm) const;
  std::vector<ArmState> arms_;
  BanditConfig cfg_;
};

}  // namespace jade

#endif
