#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>

#include "trajflow/geo.hpp"
#include "trajflow/nn.hpp"

namespace trajflow::condition {

// Order of the five numeric condition scalars throughout the project:
// avg_speed, avg_step_distance, elapsed_time, cumulative_distance, step_count.
struct ConditionSpec {
  int departure_bin = 0;
  int origin_zone = 0;
  int destination_zone = 0;
  geo::TransportMode mode = geo::TransportMode::OTHER;
  std::array<double, 5> numeric_std{};  // z-scored against dataset statistics
  std::array<double, 5> numeric_raw{};
};

struct Vocab {
  int departure_bins = 288;
  int zones = 64;
  int modes = 5;
};

struct EncoderConfig {
  std::size_t control_dim = 128;
  std::size_t deep_hidden = 512;
  std::size_t time_freqs = 64;
};

// Wide&Deep condition fusion plus the sinusoidal flow-time embedding.
// A nullopt spec selects the learned unconditional null token (a dedicated
// embedding row per discrete feature and a zero wide vector).
class ConditionEncoder {
 public:
  void build(nn::ParamStore& store, const Vocab& vocab,
             const EncoderConfig& cfg, std::mt19937_64& rng);

  // e_c = LayerNorm(e_wide + e_deep)
  nn::Var encode(nn::Tape& tape,
                 const std::optional<ConditionSpec>& spec) const;
  // Sinusoidal features [sin(w_k t), cos(w_k t)], w_k log-spaced over
  // [1, 1e4], followed by a 2-layer MLP; requires t in [0,1].
  nn::Var time_embedding(nn::Tape& tape, double t) const;

  const Vocab& vocab() const { return vocab_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  Vocab vocab_;
  EncoderConfig cfg_;
  nn::Param* wide_w_ = nullptr;
  nn::Param* wide_b_ = nullptr;
  nn::Param* emb_departure_ = nullptr;
  nn::Param* emb_origin_ = nullptr;
  nn::Param* emb_destination_ = nullptr;
  nn::Param* emb_mode_ = nullptr;
  nn::Param* deep_w1_ = nullptr;
  nn::Param* deep_b1_ = nullptr;
  nn::Param* deep_w2_ = nullptr;
  nn::Param* deep_b2_ = nullptr;
  nn::Param* ln_gamma_ = nullptr;
  nn::Param* ln_beta_ = nullptr;
  nn::Param* time_w1_ = nullptr;
  nn::Param* time_b1_ = nullptr;
  nn::Param* time_w2_ = nullptr;
  nn::Param* time_b2_ = nullptr;
};

// With probability p, replaces the condition with the null token.
std::optional<ConditionSpec> condition_dropout(const ConditionSpec& spec,
                                               double p, std::mt19937_64& rng);

// {"departure_bin": int, "origin_zone": int, "destination_zone": int,
//  "mode": str, "numeric": {optional scalar overrides by name}}
// Numeric overrides are raw values; standardization happens against the
// model's stored dataset statistics.
ConditionSpec spec_from_json(const std::string& text);
std::string spec_to_json(const ConditionSpec& spec);

void validate_spec(const ConditionSpec& spec, const Vocab& vocab);

}  // namespace trajflow::condition
