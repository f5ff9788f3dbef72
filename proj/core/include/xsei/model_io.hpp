#pragma once

#include <filesystem>

#include "xsei/checkpoint.hpp"
#include "xsei/models.hpp"

namespace xsei::models {

/// Serializes any zoo model into the checkpoint container. The JSON header
/// carries the family tag, kind, descriptor and shape; the parameter block
/// carries weights, tree nodes or stored neighbors as f64 values.
nn::Checkpoint to_checkpoint(const Model& model);
TrainedModel from_checkpoint(const nn::Checkpoint& ckpt);

void save_model(const std::filesystem::path& path, const Model& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace xsei::models
