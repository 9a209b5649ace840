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

#include "core/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nnsp {

namespace {

constexpr char kMatrixMagic[8] = {'N', 'N', 'S', 'P', 'M', 'A', 'T', '1'};
constexpr char kTensorMagic[8] = {'N', 'N', 'S', 'P', 'T', '4', 'v', '1'};

void write_i64(std::ostream& os, int64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((uint64_t)v >> (8 * i));
  os.write((const char*)b, 8);
}

int64_t read_i64(std::istream& is) {
  unsigned char b[8];
  is.read((char*)b, 8);
  if (!is) throw Error("binary read: truncated header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= (uint64_t)b[i] << (8 * i);
  return (int64_t)v;
}

void write_payload(std::ostream& os, const double* data, std::size_t count) {
  os.put((char)0);  // dtype f64
  os.write((const char*)data, (std::streamsize)(count * sizeof(double)));
  if (!os) throw Error("binary write failed");
}

void read_payload(std::istream& is, double* data, std::size_t count) {
  int dtype = is.get();
  if (dtype != 0) throw Error("binary read: unsupported dtype tag " + std::to_string(dtype));
  is.read((char*)data, (std::streamsize)(count * sizeof(double)));
  if (!is) throw Error("binary read: truncated payload");
}

}  // namespace

void write_matrix(std::ostream& os, const Matrix& m) {
  os.write(kMatrixMagic, 8);
  write_i64(os, m.rows());
  write_i64(os, m.cols());
  // Eigen stores column-major; the container is row-major
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_payload(os, rm.data(), (std::size_t)m.size());
}

Matrix read_matrix(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMatrixMagic, 8) != 0)
    throw Error("binary read: bad matrix magic");
  int64_t rows = read_i64(is);
  int64_t cols = read_i64(is);
  if (rows < 0 || cols < 0) throw Error("binary read: negative dimensions");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  read_payload(is, rm.data(), (std::size_t)(rows * cols));
  return rm;
}

void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  write_matrix(os, m);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  return read_matrix(is);
}

void write_tensor(std::ostream& os, const SymTensor4& t) {
  os.write(kTensorMagic, 8);
  write_i64(os, t.n());
  write_i64(os, (int64_t)t.count());
  write_payload(os, t.data().data(), t.count());
}

SymTensor4 read_tensor(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kTensorMagic, 8) != 0)
    throw Error("binary read: bad tensor magic");
  int64_t n = read_i64(is);
  int64_t count = read_i64(is);
  SymTensor4 t((int)n);
  if ((int64_t)t.count() != count) throw Error("binary read: tensor size inconsistent with n");
  read_payload(is, t.data().data(), t.count());
  return t;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary);  // binary: stable \r\n-free output
  if (!os) throw Error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os << ',';
    os << csv_escape(header[i]);
  }
  os << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error("write_csv: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << csv_escape(row[i]);
    }
    os << '\n';
  }
  if (!os) throw Error("write_csv: write failed: " + path);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace nnsp
