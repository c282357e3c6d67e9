#include "ecgdg/model.hpp"

#include <sstream>

#include "ecgdg/config.hpp"

namespace ecgdg::nn {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::atoi(tok.c_str()));
  return out;
}

std::string join_strs(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += v[i];
  }
  return s;
}

std::vector<std::string> split_strs(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

std::string get_or(const std::map<std::string, std::string>& kv, const std::string& key,
                   const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

}  // namespace

HeadMode parse_head_mode(const std::string& text) {
  if (text == "sigmoid") return HeadMode::Sigmoid;
  if (text == "softmax") return HeadMode::Softmax;
  fail(ErrorCode::InvalidConfig, "head_mode must be sigmoid or softmax, got '" + text + "'");
}

std::map<std::string, std::string> ModelConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["in_leads"] = std::to_string(in_leads);
  kv["num_classes"] = std::to_string(num_classes);
  kv["stem_kernel"] = std::to_string(stem_kernel);
  kv["stem_stride"] = std::to_string(stem_stride);
  kv["stem_channels"] = std::to_string(stem_channels);
  kv["pool_kernel"] = std::to_string(pool_kernel);
  kv["pool_stride"] = std::to_string(pool_stride);
  kv["pool_padding"] = std::to_string(pool_padding);
  kv["stage_channels"] = join_ints(stage_channels);
  kv["blocks_per_stage"] = join_ints(blocks_per_stage);
  kv["tap_projection_channels"] = std::to_string(tap_projection_channels);
  kv["dropout_rate"] = std::to_string(dropout_rate);
  kv["head_mode"] = head_mode_name(head_mode);
  kv["decision_threshold"] = std::to_string(decision_threshold);
  kv["multiscale"] = multiscale ? "true" : "false";
  kv["tap_points"] = join_strs(tap_points);
  return kv;
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  require_known_keys(kv,
                     {"in_leads", "num_classes", "stem_kernel", "stem_stride", "stem_channels",
                      "pool_kernel", "pool_stride", "pool_padding", "stage_channels",
                      "blocks_per_stage", "tap_projection_channels", "dropout_rate", "head_mode",
                      "decision_threshold", "multiscale", "tap_points"},
                     "model config");
  ModelConfig cfg;
  cfg.in_leads = std::atoi(get_or(kv, "in_leads", "12").c_str());
  cfg.num_classes = std::atoi(get_or(kv, "num_classes", "24").c_str());
  cfg.stem_kernel = std::atoi(get_or(kv, "stem_kernel", "15").c_str());
  cfg.stem_stride = std::atoi(get_or(kv, "stem_stride", "2").c_str());
  cfg.stem_channels = std::atoi(get_or(kv, "stem_channels", "64").c_str());
  cfg.pool_kernel = std::atoi(get_or(kv, "pool_kernel", "3").c_str());
  cfg.pool_stride = std::atoi(get_or(kv, "pool_stride", "2").c_str());
  cfg.pool_padding = std::atoi(get_or(kv, "pool_padding", "1").c_str());
  cfg.stage_channels = split_ints(get_or(kv, "stage_channels", "64,128,256,512"));
  cfg.blocks_per_stage = split_ints(get_or(kv, "blocks_per_stage", "2,2,2,2"));
  cfg.tap_projection_channels = std::atoi(get_or(kv, "tap_projection_channels", "32").c_str());
  cfg.dropout_rate = std::atof(get_or(kv, "dropout_rate", "0.1").c_str());
  cfg.head_mode = parse_head_mode(get_or(kv, "head_mode", "sigmoid"));
  cfg.decision_threshold = std::atof(get_or(kv, "decision_threshold", "0.5").c_str());
  cfg.multiscale = get_or(kv, "multiscale", "true") == "true";
  cfg.tap_points = split_strs(get_or(kv, "tap_points", ""));
  cfg.validate();
  return cfg;
}

}  // namespace ecgdg::nn
