#pragma once

#include "lfagcl/config.hpp"

namespace lfagcl::cli {

int cmd_prepare(const RunConfig& cfg);
int cmd_pretrain_lfa(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);
int cmd_group_analysis(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);

}  // namespace lfagcl::cli
