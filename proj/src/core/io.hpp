// Copyright 2026 the nnsp authors
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

#include <iosfwd>
#include <string>
#include <vector>

#include "core/sym_tensor.hpp"
#include "core/types.hpp"

namespace nnsp {

// Binary container, little endian: 8-byte magic, int64 rows, int64 cols,
// 1-byte dtype tag (0 = f64), row-major payload.  Rank-4 tensors use their
// own magic with (n, count) in place of (rows, cols).

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

void write_tensor(std::ostream& os, const SymTensor4& t);
SymTensor4 read_tensor(std::istream& is);

// RFC-4180 CSV with '.' decimal separator.  Fields containing commas,
// quotes or newlines are quoted.
std::string csv_escape(const std::string& field);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace nnsp
