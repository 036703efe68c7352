// Copyright 2026 The fedsnn Authors
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

// Self-describing model checkpoint.
//
//   "FSNNCKPT"            8 bytes
//   version               u32
//   header length         u64, then that many bytes of `key = value` text:
//                         model structure, SNN parameters and one
//                         `param <name> <offset> <d0>x<d1>...` line per entry
//   value count           u64, then float32 parameter values
//   buffer count          u64, then float32 BNTT running statistics
//
// Integers and floats are little-endian.

#include "fedsnn/model.hpp"

#include <filesystem>
#include <string>

namespace fedsnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws std::runtime_error on a malformed or inconsistent file.
Model load_checkpoint(const std::filesystem::path& path);

/// The text header written by save_checkpoint.
std::string checkpoint_header(const Model& model);

}  // namespace fedsnn
