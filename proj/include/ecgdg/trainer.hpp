#pragma once

#include <map>
#include <string>
#include <vector>

#include "ecgdg/matrix.hpp"
#include "ecgdg/model.hpp"
#include "ecgdg/record.hpp"

namespace ecgdg::train {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double lr = 0.001;
  double lr_decay_factor = 0.1;
  int lr_decay_epoch = 24;
  std::string lr_schedule = "step";  // step: one cut at the decay epoch; exp: per-epoch decay
  int early_stop_patience = 20;
  uint64_t seed = 0;
  bool deterministic = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  std::map<std::string, std::string> to_key_values() const;
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv);
};

// Learning rate for a 1-based epoch. Step schedule: cfg.lr before the decay
// epoch, cfg.lr * factor from it onward (single cut). Exp schedule: one
// factor multiplication per epoch from the decay epoch.
double lr_at(int epoch, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct RunState {
  std::vector<EpochLog> log;
  double best_val_loss = 0.0;
  int best_epoch = 0;  // 0 until the first epoch completes
  int epochs_since_improvement = 0;
  bool stopped_early = false;
  int64_t optimizer_steps = 0;
  std::string best_checkpoint_path;
};

// Appends the epoch row, updates the best-so-far bookkeeping and the
// patience counter. Returns true when training must stop (patience
// exhausted). `improved` is reported through the return struct so the
// trainer knows to checkpoint. Shared by train() and scripted tests.
struct EpochOutcome {
  bool improved = false;
  bool stop = false;
};
EpochOutcome note_epoch(RunState& state, const EpochLog& row, int patience);

// Records plus their multi-hot targets, rows aligned.
struct RecordSet {
  std::vector<io::EcgRecord> records;
  BinaryMatrix targets;
};

// Assembles (N, 12, L) batch tensors from a record subset.
nn::Tensor<float> batch_tensor(const std::vector<io::EcgRecord>& records,
                               const std::vector<int64_t>& indices, int64_t begin, int64_t end);

// The training protocol: per-epoch seeded shuffle, one optimizer step per
// batch (final partial batch kept), per-epoch validation loss, checkpoint on
// improvement, early stop at patience exhaustion. Writes log.csv and
// best.ckpt into run_dir. The returned state's best checkpoint is the final
// artifact, not the last epoch.
RunState train(nn::ModelGraph<float>& model, const RecordSet& train_set, const RecordSet& val_set,
               const TrainConfig& cfg, const std::string& run_dir);

struct EvalResult {
  BinaryMatrix predictions;
  nn::Tensor<float> logits;
  double mean_loss = 0.0;
};

// Deterministic eval-mode pass over a record set; predictions aligned with
// the scored-label order.
EvalResult evaluate_split(nn::ModelGraph<float>& model, const RecordSet& set, double threshold,
                          int batch_size = 64);

}  // namespace ecgdg::train
