// Copyright 2026 The projann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>

#include "projann/common.hpp"
#include "projann/eval.hpp"
#include "projann/pipeline.hpp"
#include "projann/projection.hpp"

namespace projann {

using IntMatrix =
    Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Current `.lvec` and projection file version.
inline constexpr uint32_t kFormatVersion = 1;

FloatMatrix read_fvecs(const std::filesystem::path& path);
IntMatrix read_ivecs(const std::filesystem::path& path);

/// Writes and fsyncs before returning. An empty matrix gives an empty file.
void write_fvecs(const FloatMatrix& m, const std::filesystem::path& path);
void write_ivecs(const IntMatrix& m, const std::filesystem::path& path);

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path, Metric metric);

void save_projection(const ProjectionPair& p, const std::filesystem::path& path);
ProjectionPair load_projection(const std::filesystem::path& path);

/// Single-file index bundle; layout in docs/FORMAT.md.
void save_index(const TwoPhaseIndex& index, const std::filesystem::path& path);
TwoPhaseIndex load_index(const std::filesystem::path& path);

}  // namespace projann
