#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "seamotion/error.hpp"
#include "seamotion/network.hpp"

namespace seamotion {

inline constexpr int kCheckpointVersion = 1;

/// A network plus free-form metadata (window sizes, normalization constants,
/// seeds) that travels with it.
struct Checkpoint {
  Network net;
  nlohmann::json meta = nlohmann::json::object();
};

/// JSON document: versioned header, architecture, declared parameter count,
/// metadata, then the flat parameter array in layout order. Doubles are
/// written in shortest round-trip form.
inline void save_checkpoint(const Network& net, const std::filesystem::path& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json j;
  j["format"] = "seamotion-checkpoint";
  j["version"] = kCheckpointVersion;
  j["param_count"] = count_params(net);
  auto& arch = j["architecture"];
  arch["lstm"] = nlohmann::json::array();
  for (const auto& s : net.lstm_shapes()) arch["lstm"].push_back({{"input", s.input_size}, {"hidden", s.hidden_size}});
  arch["fc"] = nlohmann::json::array();
  for (const auto& s : net.fc_shapes())
    arch["fc"].push_back({{"in", s.in}, {"out", s.out}, {"activation", to_string(s.activation)}});
  arch["parameter_order"] =
      "per LSTM layer: W_input[4H x r], W_hidden[4H x H], b_input[4H], b_hidden[4H] (gates i,f,g,o); "
      "per FC layer: weights[out x in], bias[out]; matrices row-major";
  j["meta"] = meta;
  j["params"] = std::vector<double>(net.params().begin(), net.params().end());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump(1) << '\n';
  if (!out) throw ConfigError("write failed for checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint '" + path.string() + "' is malformed or truncated: " + e.what());
  }
  try {
    if (j.value("format", "") != "seamotion-checkpoint") throw LoadError("not a seamotion checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw LoadError("checkpoint version " + std::to_string(j.at("version").get<int>()) + " unsupported");
    std::vector<LstmShape> lstm;
    for (const auto& l : j.at("architecture").at("lstm"))
      lstm.push_back({l.at("input").get<std::size_t>(), l.at("hidden").get<std::size_t>()});
    std::vector<FcShape> fc;
    for (const auto& f : j.at("architecture").at("fc"))
      fc.push_back({f.at("in").get<std::size_t>(), f.at("out").get<std::size_t>(),
                    activation_from_string(f.at("activation").get<std::string>())});
    Checkpoint ck;
    try {
      ck.net = Network(std::move(lstm), std::move(fc));
    } catch (const DomainError& e) {
      throw LoadError(std::string("inconsistent architecture: ") + e.what());
    }
    const auto declared = j.at("param_count").get<std::size_t>();
    const auto& params = j.at("params");
    if (declared != ck.net.param_count() || params.size() != declared)
      throw LoadError("declared parameter count " + std::to_string(declared) + ", architecture implies " +
                      std::to_string(ck.net.param_count()) + ", file holds " + std::to_string(params.size()));
    auto dst = ck.net.params();
    for (std::size_t i = 0; i < declared; ++i) dst[i] = params[i].get<double>();
    ck.meta = j.value("meta", nlohmann::json::object());
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint '" + path.string() + "' is missing fields: " + e.what());
  }
}

}  // namespace seamotion
