#pragma once

#include <string>

#include "tapfm/corpus.hpp"
#include "tapfm/multitask.hpp"
#include "tapfm/pretrain.hpp"

namespace tapfm {

// Single JSON config document; unknown keys are rejected and every seed is
// explicit after loading. A --seed flag beats TAPFM_SEED beats the file.
struct RunConfig {
  std::string data_dir = "data";
  std::string work_dir = ".";
  CorpusConfig corpus;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  int lstm_hidden = 16;
  uint64_t seed = 1;
};

RunConfig load_run_config(const std::string& path);

// Applies a global seed to every section of an already-loaded config.
void override_seed(RunConfig& cfg, uint64_t seed);

// exit 0 success, 1 usage, 2 data, 3 numeric; errors go to stderr as
// "E:<code>: <message>".
int main_dispatch(int argc, char** argv);

}  // namespace tapfm
