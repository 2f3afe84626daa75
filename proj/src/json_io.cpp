#include "gemr/json_io.hpp"

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace gemr {
namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename V>
void read_opt(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"input_dim", c.input_dim}, {"hidden_widths", c.hidden_widths}, {"output_dim", c.output_dim}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("input_dim").get_to(c.input_dim);
  j.at("hidden_widths").get_to(c.hidden_widths);
  j.at("output_dim").get_to(c.output_dim);
}

void to_json(nlohmann::json& j, const AttentionOptions& o) {
  j = {{"scaled", o.scaled}, {"projection_relu", o.projection_relu}};
}

void from_json(const nlohmann::json& j, AttentionOptions& o) {
  j.at("scaled").get_to(o.scaled);
  j.at("projection_relu").get_to(o.projection_relu);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"global", c.global},
       {"local", c.local},
       {"mechanism", std::string(mechanism_name(c.mechanism))},
       {"attention", c.attention},
       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("global").get_to(c.global);
  j.at("local").get_to(c.local);
  c.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());
  j.at("attention").get_to(c.attention);
  j.at("dropout").get_to(c.dropout);
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"n_train", c.n_train},
       {"n_val", c.n_val},
       {"n_eval", c.n_eval},
       {"faces_min", c.faces_min},
       {"faces_max", c.faces_max},
       {"global_dim", c.global_dim},
       {"face_dim", c.face_dim},
       {"signal", c.signal},
       {"distractor", c.distractor},
       {"salience_gap", c.salience_gap},
       {"noise", c.noise},
       {"salience_noise", c.salience_noise},
       {"global_strength", c.global_strength},
       {"context_mix", c.context_mix},
       {"global_noise", c.global_noise},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  reject_unknown(j,
                 {"n_train", "n_val", "n_eval", "faces_min", "faces_max", "global_dim", "face_dim", "signal",
                  "distractor", "salience_gap", "noise", "salience_noise", "global_strength", "context_mix",
                  "global_noise", "seed"},
                 "dataset config");
  read_opt(j, "n_train", c.n_train);
  read_opt(j, "n_val", c.n_val);
  read_opt(j, "n_eval", c.n_eval);
  read_opt(j, "faces_min", c.faces_min);
  read_opt(j, "faces_max", c.faces_max);
  read_opt(j, "global_dim", c.global_dim);
  read_opt(j, "face_dim", c.face_dim);
  read_opt(j, "signal", c.signal);
  read_opt(j, "distractor", c.distractor);
  read_opt(j, "salience_gap", c.salience_gap);
  read_opt(j, "noise", c.noise);
  read_opt(j, "salience_noise", c.salience_noise);
  read_opt(j, "global_strength", c.global_strength);
  read_opt(j, "context_mix", c.context_mix);
  read_opt(j, "global_noise", c.global_noise);
  read_opt(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"lr0", c.lr0},
       {"decay_factor", c.decay_factor},
       {"decay_period", c.decay_period},
       {"epochs", c.epochs},
       {"momentum", c.momentum},
       {"dropout", c.dropout},
       {"seed", c.seed},
       {"mechanism", std::string(mechanism_name(c.mechanism))},
       {"merge_val", c.merge_val}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"batch_size", "lr0", "decay_factor", "decay_period", "epochs", "momentum", "dropout", "seed",
                  "mechanism", "merge_val"},
                 "train config");
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "lr0", c.lr0);
  read_opt(j, "decay_factor", c.decay_factor);
  read_opt(j, "decay_period", c.decay_period);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "dropout", c.dropout);
  read_opt(j, "seed", c.seed);
  if (j.contains("mechanism")) c.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());
  read_opt(j, "merge_val", c.merge_val);
}

}  // namespace gemr
