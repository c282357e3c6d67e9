#include "ecgdg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ecgdg/config.hpp"
#include "ecgdg/errors.hpp"
#include "ecgdg/parallel.hpp"
#include "ecgdg/rng.hpp"

namespace fs = std::filesystem;

namespace ecgdg::train {

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (lr <= 0.0) fail(ErrorCode::InvalidConfig, "lr must be positive");
  if (lr_decay_factor <= 0.0 || lr_decay_factor > 1.0)
    fail(ErrorCode::InvalidConfig, "lr_decay_factor must be in (0,1]");
  if (lr_decay_epoch < 1 || lr_decay_epoch > epochs)
    fail(ErrorCode::InvalidConfig, "lr_decay_epoch must lie within [1, epochs]");
  if (early_stop_patience < 1) fail(ErrorCode::InvalidConfig, "patience must be >= 1");
  if (lr_schedule != "step" && lr_schedule != "exp")
    fail(ErrorCode::InvalidConfig, "lr_schedule must be step or exp");
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["epochs"] = std::to_string(epochs);
  kv["batch_size"] = std::to_string(batch_size);
  kv["lr"] = std::to_string(lr);
  kv["lr_decay_factor"] = std::to_string(lr_decay_factor);
  kv["lr_decay_epoch"] = std::to_string(lr_decay_epoch);
  kv["lr_schedule"] = lr_schedule;
  kv["early_stop_patience"] = std::to_string(early_stop_patience);
  kv["seed"] = std::to_string(seed);
  kv["deterministic"] = deterministic ? "true" : "false";
  kv["adam_beta1"] = std::to_string(adam_beta1);
  kv["adam_beta2"] = std::to_string(adam_beta2);
  kv["adam_eps"] = std::to_string(adam_eps);
  return kv;
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  require_known_keys(kv,
                     {"epochs", "batch_size", "lr", "lr_decay_factor", "lr_decay_epoch",
                      "lr_schedule", "early_stop_patience", "seed", "deterministic", "adam_beta1",
                      "adam_beta2", "adam_eps"},
                     "trainer config");
  TrainConfig cfg;
  auto get = [&](const char* key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  cfg.epochs = std::atoi(get("epochs", "40").c_str());
  cfg.batch_size = std::atoi(get("batch_size", "64").c_str());
  cfg.lr = std::atof(get("lr", "0.001").c_str());
  cfg.lr_decay_factor = std::atof(get("lr_decay_factor", "0.1").c_str());
  cfg.lr_decay_epoch = std::atoi(get("lr_decay_epoch", "24").c_str());
  cfg.lr_schedule = get("lr_schedule", "step");
  cfg.early_stop_patience = std::atoi(get("early_stop_patience", "20").c_str());
  cfg.seed = std::strtoull(get("seed", "0").c_str(), nullptr, 10);
  cfg.deterministic = get("deterministic", "false") == "true";
  cfg.adam_beta1 = std::atof(get("adam_beta1", "0.9").c_str());
  cfg.adam_beta2 = std::atof(get("adam_beta2", "0.999").c_str());
  cfg.adam_eps = std::atof(get("adam_eps", "1e-8").c_str());
  cfg.validate();
  return cfg;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.epochs)
    fail(ErrorCode::OutOfRange, "epoch " + std::to_string(epoch) + " outside [1, " +
                                    std::to_string(cfg.epochs) + "]");
  if (epoch < cfg.lr_decay_epoch) return cfg.lr;
  if (cfg.lr_schedule == "step") return cfg.lr * cfg.lr_decay_factor;
  int decays = epoch - cfg.lr_decay_epoch + 1;
  return cfg.lr * std::pow(cfg.lr_decay_factor, decays);
}

EpochOutcome note_epoch(RunState& state, const EpochLog& row, int patience) {
  state.log.push_back(row);
  EpochOutcome outcome;
  bool first = state.best_epoch == 0;
  if (first || row.val_loss < state.best_val_loss) {
    state.best_val_loss = row.val_loss;
    state.best_epoch = row.epoch;
    state.epochs_since_improvement = 0;
    outcome.improved = true;
  } else {
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement >= patience) {
      state.stopped_early = true;
      outcome.stop = true;
    }
  }
  return outcome;
}

nn::Tensor<float> batch_tensor(const std::vector<io::EcgRecord>& records,
                               const std::vector<int64_t>& indices, int64_t begin, int64_t end) {
  if (begin >= end) fail(ErrorCode::EmptySplit, "empty batch");
  int64_t B = end - begin;
  int64_t L = records[static_cast<size_t>(indices[static_cast<size_t>(begin)])].num_samples;
  nn::Tensor<float> batch({B, io::kNumLeads, L});
  for (int64_t i = 0; i < B; ++i) {
    const auto& rec = records[static_cast<size_t>(indices[static_cast<size_t>(begin + i)])];
    if (rec.num_samples != L)
      fail(ErrorCode::ShapeMismatch, rec.id + ": record lengths differ within a batch");
    std::copy(rec.leads.begin(), rec.leads.end(),
              batch.data.begin() + static_cast<size_t>(i * io::kNumLeads * L));
  }
  return batch;
}

namespace {

nn::Tensor<float> target_tensor(const BinaryMatrix& targets, const std::vector<int64_t>& indices,
                                int64_t begin, int64_t end) {
  int64_t B = end - begin;
  nn::Tensor<float> t({B, targets.cols});
  for (int64_t i = 0; i < B; ++i) {
    int64_t row = indices[static_cast<size_t>(begin + i)];
    for (int64_t c = 0; c < targets.cols; ++c)
      t.at2(i, c) = static_cast<float>(targets.at(row, c));
  }
  return t;
}

nn::ValueId head_loss(nn::Tape<float>& tape, nn::ValueId logits, nn::ValueId targets,
                      nn::HeadMode mode) {
  return mode == nn::HeadMode::Sigmoid ? tape.sigmoid_bce(logits, targets)
                                       : tape.softmax_ce(logits, targets);
}

double eval_loss(nn::ModelGraph<float>& model, const RecordSet& set, int batch_size) {
  std::vector<int64_t> order(set.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  int64_t n = static_cast<int64_t>(set.records.size());
  double total = 0.0;
  for (int64_t begin = 0; begin < n; begin += batch_size) {
    int64_t end = std::min<int64_t>(begin + batch_size, n);
    nn::Tape<float> tape;
    nn::Tensor<float> batch = batch_tensor(set.records, order, begin, end);
    nn::ValueId logits = nn::forward(tape, model, batch, false);
    nn::ValueId targets = tape.leaf(target_tensor(set.targets, order, begin, end));
    nn::ValueId loss = head_loss(tape, logits, targets, model.cfg.head_mode);
    total += static_cast<double>(tape.value(loss).data[0]) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(n);
}

void append_log_row(const std::string& path, const EpochLog& row, bool header) {
  std::ofstream out(path, header ? std::ios::trunc : std::ios::app);
  if (!out) fail(ErrorCode::IoFailure, "cannot write log: " + path);
  if (header) out << "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f,%.6g,%.3f\n", row.epoch, row.train_loss,
                row.val_loss, row.lr, row.seconds);
  out << buf;
}

}  // namespace

RunState train(nn::ModelGraph<float>& model, const RecordSet& train_set, const RecordSet& val_set,
               const TrainConfig& cfg, const std::string& run_dir) {
  cfg.validate();
  if (train_set.records.empty()) fail(ErrorCode::EmptySplit, "training set is empty");
  if (val_set.records.empty()) fail(ErrorCode::EmptySplit, "validation set is empty");
  if (cfg.deterministic) set_max_threads(1);

  fs::create_directories(run_dir);
  std::string log_path = (fs::path(run_dir) / "log.csv").string();
  std::string ckpt_path = (fs::path(run_dir) / "best.ckpt").string();

  int64_t n = static_cast<int64_t>(train_set.records.size());
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  RunState state;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double lr = lr_at(epoch, cfg);

    Philox shuffle = named_stream(cfg.seed, "shuffle/epoch" + std::to_string(epoch));
    for (size_t i = static_cast<size_t>(n); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle.next_below(i));
      std::swap(order[i - 1], order[j]);
    }

    double train_loss_sum = 0.0;
    for (int64_t begin = 0; begin < n; begin += cfg.batch_size) {
      int64_t end = std::min<int64_t>(begin + cfg.batch_size, n);
      nn::Tape<float> tape;
      nn::Tensor<float> batch = batch_tensor(train_set.records, order, begin, end);
      nn::ValueId logits = nn::forward(tape, model, batch, true);
      nn::ValueId targets = tape.leaf(target_tensor(train_set.targets, order, begin, end));
      nn::ValueId loss = head_loss(tape, logits, targets, model.cfg.head_mode);
      double loss_v = static_cast<double>(tape.value(loss).data[0]);
      if (!std::isfinite(loss_v))
        fail(ErrorCode::DivergedLoss, "train loss is not finite at epoch " +
                                          std::to_string(epoch) + ", batch starting " +
                                          std::to_string(begin));
      model.params.zero_grad();
      tape.backward(loss);
      model.params.adam_step(lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      ++state.optimizer_steps;
      train_loss_sum += loss_v * static_cast<double>(end - begin);
    }
    double train_loss = train_loss_sum / static_cast<double>(n);

    double val_loss = eval_loss(model, val_set, cfg.batch_size);
    if (!std::isfinite(val_loss))
      fail(ErrorCode::DivergedLoss, "val loss is not finite at epoch " + std::to_string(epoch));

    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Deterministic runs zero the wall-clock column so logs are reproducible
    // byte for byte.
    EpochLog row{epoch, train_loss, val_loss, lr, cfg.deterministic ? 0.0 : seconds};
    EpochOutcome outcome = note_epoch(state, row, cfg.early_stop_patience);
    append_log_row(log_path, row, epoch == 1);
    if (outcome.improved) {
      nn::save_checkpoint(model.params, ckpt_path);
      state.best_checkpoint_path = ckpt_path;
    }
    if (outcome.stop) break;
  }
  return state;
}

EvalResult evaluate_split(nn::ModelGraph<float>& model, const RecordSet& set, double threshold,
                          int batch_size) {
  if (set.records.empty()) fail(ErrorCode::EmptySplit, "evaluation set is empty");
  int64_t n = static_cast<int64_t>(set.records.size());
  int64_t C = model.cfg.num_classes;
  if (set.targets.rows != n || set.targets.cols != C)
    fail(ErrorCode::ShapeMismatch, "evaluation targets misaligned with records/classes");

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  EvalResult result;
  result.logits = nn::Tensor<float>({n, C});
  result.predictions = BinaryMatrix(n, C);
  double total = 0.0;
  for (int64_t begin = 0; begin < n; begin += batch_size) {
    int64_t end = std::min<int64_t>(begin + batch_size, n);
    nn::Tape<float> tape;
    nn::Tensor<float> batch = batch_tensor(set.records, order, begin, end);
    nn::ValueId logits = nn::forward(tape, model, batch, false);
    nn::ValueId targets = tape.leaf(target_tensor(set.targets, order, begin, end));
    nn::ValueId loss = head_loss(tape, logits, targets, model.cfg.head_mode);
    total += static_cast<double>(tape.value(loss).data[0]) * static_cast<double>(end - begin);
    const nn::Tensor<float>& lv = tape.value(logits);
    for (int64_t i = 0; i < end - begin; ++i)
      for (int64_t c = 0; c < C; ++c) result.logits.at2(begin + i, c) = lv.at2(i, c);
  }
  result.mean_loss = total / static_cast<double>(n);
  result.predictions = nn::predict(result.logits, model.cfg.head_mode, threshold);
  return result;
}

}  // namespace ecgdg::train
