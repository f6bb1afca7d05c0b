#include "trajflow/condition.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace trajflow::condition {

void ConditionEncoder::build(nn::ParamStore& store, const Vocab& vocab,
                             const EncoderConfig& cfg, std::mt19937_64& rng) {
  vocab_ = vocab;
  cfg_ = cfg;
  const std::size_t d = cfg.control_dim;
  wide_w_ = store.add_dense("cond.wide.w", d, 5, rng);
  wide_b_ = store.add_bias("cond.wide.b", d);
  // One extra row per table holds the unconditional null token.
  emb_departure_ = store.add_embedding("cond.emb.departure",
                                       vocab.departure_bins + 1, d, rng);
  emb_origin_ = store.add_embedding("cond.emb.origin", vocab.zones + 1, d, rng);
  emb_destination_ =
      store.add_embedding("cond.emb.destination", vocab.zones + 1, d, rng);
  emb_mode_ = store.add_embedding("cond.emb.mode", vocab.modes + 1, d, rng);
  deep_w1_ = store.add_dense("cond.deep.w1", cfg.deep_hidden, 4 * d, rng);
  deep_b1_ = store.add_bias("cond.deep.b1", cfg.deep_hidden);
  deep_w2_ = store.add_dense("cond.deep.w2", d, cfg.deep_hidden, rng);
  deep_b2_ = store.add_bias("cond.deep.b2", d);
  ln_gamma_ = store.add_bias("cond.ln.gamma", d);
  std::fill(ln_gamma_->value.begin(), ln_gamma_->value.end(), 1.0);
  ln_beta_ = store.add_bias("cond.ln.beta", d);
  time_w1_ = store.add_dense("time.w1", d, 2 * cfg.time_freqs, rng);
  time_b1_ = store.add_bias("time.b1", d);
  time_w2_ = store.add_dense("time.w2", d, d, rng);
  time_b2_ = store.add_bias("time.b2", d);
}

void validate_spec(const ConditionSpec& spec, const Vocab& vocab) {
  if (spec.departure_bin < 0 || spec.departure_bin >= vocab.departure_bins)
    throw std::invalid_argument("condition: departure_bin out of vocabulary");
  if (spec.origin_zone < 0 || spec.origin_zone >= vocab.zones)
    throw std::invalid_argument("condition: origin_zone out of vocabulary");
  if (spec.destination_zone < 0 || spec.destination_zone >= vocab.zones)
    throw std::invalid_argument("condition: destination_zone out of vocabulary");
}

nn::Var ConditionEncoder::encode(nn::Tape& tape,
                                 const std::optional<ConditionSpec>& spec) const {
  std::size_t dep_row, orig_row, dest_row, mode_row;
  std::vector<double> wide_in(5, 0.0);
  if (spec) {
    validate_spec(*spec, vocab_);
    dep_row = static_cast<std::size_t>(spec->departure_bin);
    orig_row = static_cast<std::size_t>(spec->origin_zone);
    dest_row = static_cast<std::size_t>(spec->destination_zone);
    mode_row = static_cast<std::size_t>(spec->mode);
    for (int i = 0; i < 5; ++i) wide_in[static_cast<std::size_t>(i)] = spec->numeric_std[static_cast<std::size_t>(i)];
  } else {
    dep_row = static_cast<std::size_t>(vocab_.departure_bins);
    orig_row = static_cast<std::size_t>(vocab_.zones);
    dest_row = static_cast<std::size_t>(vocab_.zones);
    mode_row = static_cast<std::size_t>(vocab_.modes);
  }
  nn::Var wide = tape.dense(tape.input(std::move(wide_in)), *wide_w_, *wide_b_);
  nn::Var cat = tape.concat({tape.embedding(*emb_departure_, dep_row),
                             tape.embedding(*emb_origin_, orig_row),
                             tape.embedding(*emb_destination_, dest_row),
                             tape.embedding(*emb_mode_, mode_row)});
  nn::Var deep = tape.dense(
      tape.silu(tape.dense(cat, *deep_w1_, *deep_b1_)), *deep_w2_, *deep_b2_);
  return tape.layer_norm(tape.add(wide, deep), *ln_gamma_, *ln_beta_);
}

nn::Var ConditionEncoder::time_embedding(nn::Tape& tape, double t) const {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("time_embedding: t outside [0,1]");
  const std::size_t f = cfg_.time_freqs;
  std::vector<double> feat(2 * f);
  for (std::size_t k = 0; k < f; ++k) {
    const double omega =
        std::exp(std::log(1e4) * static_cast<double>(k) /
                 static_cast<double>(f - 1));
    feat[k] = std::sin(omega * t);
    feat[f + k] = std::cos(omega * t);
  }
  nn::Var h = tape.dense(tape.input(std::move(feat)), *time_w1_, *time_b1_);
  return tape.dense(tape.silu(h), *time_w2_, *time_b2_);
}

std::optional<ConditionSpec> condition_dropout(const ConditionSpec& spec,
                                               double p, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("condition_dropout: p outside [0,1]");
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  if (dist(rng) < p) return std::nullopt;
  return spec;
}

ConditionSpec spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ConditionSpec spec;
  spec.departure_bin = j.at("departure_bin").get<int>();
  spec.origin_zone = j.at("origin_zone").get<int>();
  spec.destination_zone = j.at("destination_zone").get<int>();
  spec.mode = geo::mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("numeric")) {
    const auto& num = j.at("numeric");
    static const char* names[5] = {"avg_speed", "avg_step_distance",
                                   "elapsed_time", "cumulative_distance",
                                   "step_count"};
    for (std::size_t i = 0; i < 5; ++i) {
      if (num.contains(names[i]))
        spec.numeric_raw[i] = num.at(names[i]).get<double>();
      else
        spec.numeric_raw[i] = std::nan("");  // to be sampled empirically
    }
  } else {
    spec.numeric_raw.fill(std::nan(""));
  }
  return spec;
}

std::string spec_to_json(const ConditionSpec& spec) {
  nlohmann::ordered_json j;
  j["departure_bin"] = spec.departure_bin;
  j["origin_zone"] = spec.origin_zone;
  j["destination_zone"] = spec.destination_zone;
  j["mode"] = geo::mode_to_string(spec.mode);
  nlohmann::ordered_json num;
  static const char* names[5] = {"avg_speed", "avg_step_distance",
                                 "elapsed_time", "cumulative_distance",
                                 "step_count"};
  for (std::size_t i = 0; i < 5; ++i)
    if (!std::isnan(spec.numeric_raw[i])) num[names[i]] = spec.numeric_raw[i];
  if (!num.empty()) j["numeric"] = num;
  return j.dump();
}

}  // namespace trajflow::condition
