#include "jade/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace jade {

DiscountedUcb::DiscountedUcb(std::vector<std::string> arm_ids, BanditConfig cfg) : cfg_(cfg) {
  if (arm_ids.empty()) throw Error(Err::EmptyPool, "bandit needs at least one arm");
  if (!(cfg.gamma > 0 && cfg.gamma <= 1)) throw Error(Err::RangeError, "gamma outside (0,1]");
  if (!(cfg.b >= 0)) throw Error(Err::RangeError, "B must be >= 0");
  std::sort(arm_ids.begin(), arm_ids.end());
  for (auto& id : arm_ids) arms_.push_back({std::move(id), 0, 0, 0});
}

const ArmState& DiscountedUcb::find(const std::string& arm) const {
  auto it = std::lower_bound(arms_.begin(), arms_.end(), arm,
                             [](const ArmState& a, const std::string& id) { return a.id < id; });
  if (it == arms_.end() || it->id != arm) throw Error(Err::UnknownArm, arm);
  return *it;
}

void DiscountedUcb::record(const std::string& arm, double reward) {
  if (!std::isfinite(reward)) throw Error(Err::RangeError, "reward must be finite");
  ArmState* pulled = const_cast<ArmState*>(&find(arm));
  for (auto& a : arms_) {
    a.discounted_reward_sum *= cfg_.gamma;
    a.discounted_pull_count *= cfg_.gamma;
  }
  pulled->discounted_reward_sum += reward;
  pulled->discounted_pull_count += 1.0;
  pulled->raw_pull_count += 1;
}

double DiscountedUcb::value(const std::string& arm, double epoch_t) const {
  const ArmState& a = find(arm);
  if (a.raw_pull_count == 0) return std::numeric_limits<double>::infinity();
  const double mean = a.discounted_reward_sum / a.discounted_pull_count;
  const double t = std::max(epoch_t, 1.0);
  const double bonus =
      std::sqrt(cfg_.b * std::log(t) / static_cast<double>(a.raw_pull_count));
  return mean + bonus;
}

const std::string& DiscountedUcb::select(double epoch_t) const {
  const ArmState* best = nullptr;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto& a : arms_) {
    const double v = value(a.id, epoch_t);
    bool better = v > best_value;
    if (!better && v == best_value && best) {
      // ties: lowest raw pull count, then lexicographic id (arms_ is sorted)
      better = a.raw_pull_count < best->raw_pull_count;
    }
    if (better || !best) {
      best = &a;
      best_value = v;
    }
  }
  return best->id;
}

std::string DiscountedUcb::to_json() const {
  nlohmann::json j;
  j["format"] = "jade-bandit/v1";
  j["gamma"] = cfg_.gamma;
  j["b"] = cfg_.b;
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : arms_)
    arms.push_back({{"id", a.id},
                    {"reward_sum", a.discounted_reward_sum},
                    {"pull_count", a.discounted_pull_count},
                    {"raw_pulls", a.raw_pull_count}});
  j["arms"] = std::move(arms);
  return j.dump(2) + "\n";
}

DiscountedUcb DiscountedUcb::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "jade-bandit/v1")
      throw Error(Err::SchemaError, "unknown bandit state format");
    BanditConfig cfg;
    cfg.gamma = j.at("gamma").get<double>();
    cfg.b = j.at("b").get<double>();
    std::vector<std::string> ids;
    for (const auto& a : j.at("arms")) ids.push_back(a.at("id").get<std::string>());
    DiscountedUcb ucb(ids, cfg);
    for (const auto& a : j.at("arms")) {
      ArmState& arm = const_cast<ArmState&>(ucb.find(a.at("id").get<std::string>()));
      arm.discounted_reward_sum = a.at("reward_sum").get<double>();
      arm.discounted_pull_count = a.at("pull_count").get<double>();
      arm.raw_pull_count = a.at("raw_pulls").get<long long>();
    }
    return ucb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, std::string("bandit state: ") + e.what());
  }
}

}  // namespace jade
