#pragma once

#include <string>

#include <json.hpp>

#include "backlab/arch.hpp"
#include "backlab/errors.hpp"

namespace backlab {

inline nlohmann::json arch_to_json(const ArchSpec& a) {
  nlohmann::json j;
  j["in"] = {a.in_channels, a.in_h, a.in_w};
  j["classes"] = a.classes;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : a.layers) {
    nlohmann::json lj;
    switch (l.kind) {
      case LayerSpec::Kind::conv:
        lj["kind"] = "conv";
        lj["out"] = l.conv_out;
        lj["k"] = l.conv_kernel;
        lj["stride"] = l.conv_stride;
        break;
      case LayerSpec::Kind::relu:
        lj["kind"] = "relu";
        break;
      case LayerSpec::Kind::maxpool:
        lj["kind"] = "maxpool";
        lj["k"] = l.pool_k;
        break;
      case LayerSpec::Kind::flatten:
        lj["kind"] = "flatten";
        break;
      case LayerSpec::Kind::dense:
        lj["kind"] = "dense";
        lj["out"] = l.dense_out;
        break;
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline ArchSpec arch_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrKind::format, "arch descriptor must be a JSON object");
  require(j.contains("in") && j["in"].is_array() && j["in"].size() == 3, ErrKind::format,
          "arch descriptor needs \"in\": [channels, height, width]");
  require(j.contains("classes") && j["classes"].is_number_integer(), ErrKind::format,
          "arch descriptor needs integer \"classes\"");
  require(j.contains("layers") && j["layers"].is_array(), ErrKind::format,
          "arch descriptor needs \"layers\" array");
  ArchSpec a;
  a.in_channels = j["in"][0].get<int>();
  a.in_h = j["in"][1].get<int>();
  a.in_w = j["in"][2].get<int>();
  a.classes = j["classes"].get<int>();
  for (const auto& lj : j["layers"]) {
    require(lj.is_object() && lj.contains("kind") && lj["kind"].is_string(), ErrKind::format,
            "each layer needs a string \"kind\"");
    const std::string kind = lj["kind"].get<std::string>();
    auto geti = [&](const char* key) {
      require(lj.contains(key) && lj[key].is_number_integer(), ErrKind::format,
              "layer \"" + kind + "\" needs integer \"" + key + "\"");
      return lj[key].get<int>();
    };
    if (kind == "conv") {
      const int stride = lj.contains("stride") ? geti("stride") : 1;
      a.layers.push_back(LayerSpec::conv(geti("out"), geti("k"), stride));
    } else if (kind == "relu") {
      a.layers.push_back(LayerSpec::relu());
    } else if (kind == "maxpool") {
      a.layers.push_back(LayerSpec::maxpool(geti("k")));
    } else if (kind == "flatten") {
      a.layers.push_back(LayerSpec::flatten());
    } else if (kind == "dense") {
      a.layers.push_back(LayerSpec::dense(geti("out")));
    } else {
      fail(ErrKind::format, "unknown layer kind \"" + kind + "\"");
    }
  }
  validate_arch(a);
  return a;
}

}  // namespace backlab
