#pragma once

#include "ft/runconfig.hpp"

namespace ftcli {

// Each command composes the library modules for one pipeline stage. All of
// them write config.resolved.json next to their outputs.
void cmd_synth(const ft::RunConfig& cfg);
void cmd_pretrain(const ft::RunConfig& cfg);
void cmd_finetune(const ft::RunConfig& cfg);
void cmd_predict(const ft::RunConfig& cfg);
void cmd_evaluate(const ft::RunConfig& cfg);
void cmd_baseline(const ft::RunConfig& cfg);
void cmd_experiment(const ft::RunConfig& cfg);

} // namespace ftcli
